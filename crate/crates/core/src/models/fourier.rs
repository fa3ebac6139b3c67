//! Fourier inversion of a characteristic function: log-price density,
//! in-the-money probabilities and option prices, plus a tabulated prior
//! built from the inverted density.
//!
//! The inversion integrals over `(0, a]` are evaluated on a fixed set of
//! Gauss-Legendre panels that is shared by every `x` or strike, so one set
//! of characteristic function values serves a whole table or chain.

use num_complex::Complex64;

use super::{charfn_unchecked, MarketEnv, ModelParams};
use crate::error::{Error, Result};
use crate::prior::PriorDensity;
use crate::quadrature::gauss_legendre;

/// Numeraire for [`FourierGrid::cdf_bar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// `Pi_1`: probability of finishing in the money under the stock measure.
    Stock,
    /// `Pi_2`: the same under the risk-neutral (bond) measure.
    Bond,
}

/// Truncation and panel layout for the inversion integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSpec {
    /// Initial truncation point `a`; `None` derives one from the spread of
    /// the log price. It is doubled until the characteristic function has
    /// decayed below `decay_tol`.
    pub truncation: Option<f64>,
    /// Minimum number of panels on `(0, a]`.
    pub min_panels: usize,
    /// Panel budget. Hitting it stops the doubling and sets a warning.
    pub max_panels: usize,
    /// Required `|phi(a)| * max(1, 1/a)`.
    pub decay_tol: f64,
    /// Largest `|x - centre|`, in log-price standard deviations, for which
    /// the panels must resolve the oscillation of `e^{-iux}`.
    pub reach: f64,
}

impl Default for InversionSpec {
    fn default() -> Self {
        Self { truncation: None, min_panels: 32, max_panels: 20_000, decay_tol: 1e-14, reach: 40.0 }
    }
}

impl InversionSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.truncation {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput(format!("truncation point must be > 0, got {a}")));
            }
        }
        if self.min_panels == 0 || self.max_panels < self.min_panels {
            return Err(Error::InvalidInput("need 0 < min_panels <= max_panels".into()));
        }
        if !(self.decay_tol > 0.0) || !(self.reach > 0.0) {
            return Err(Error::InvalidInput("decay_tol and reach must be positive".into()));
        }
        Ok(())
    }
}

/// Set when the characteristic function had not decayed to the requested
/// level at the largest truncation point the panel budget allows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub truncation: f64,
    pub residual: f64,
}

const GL_ORDER: usize = 16;

/// Characteristic function values on a fixed quadrature grid in `u`.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    centre: f64,
    sd: f64,
    truncation: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // phi(u) e^{-iu centre}
    bond: Vec<Complex64>,
    // phi(u - i) / phi(-i) e^{-iu centre}
    stock: Option<Vec<Complex64>>,
    warning: Option<TruncationWarning>,
}

/// Mean and standard deviation of the log price from the characteristic
/// function near the origin.
pub fn log_moments_from_cf(model: &ModelParams, env: &MarketEnv) -> (f64, f64) {
    let x0 = env.forward().ln();
    let h = 1e-3;
    let u = Complex64::new(h, 0.0);
    let z = (charfn_unchecked(model, env, u) * Complex64::new(0.0, -h * x0).exp()).ln();
    let mean = x0 + z.im / h;
    let var = (-2.0 * z.re / (h * h)).max(1e-10);
    (mean, var.sqrt())
}

impl FourierGrid {
    pub fn new(model: &ModelParams, env: &MarketEnv, spec: &InversionSpec, with_stock_measure: bool) -> Result<Self> {
        model.validate()?;
        env.validate()?;
        spec.validate()?;
        let (centre, sd) = log_moments_from_cf(model, env);
        let phi = |u: f64| charfn_unchecked(model, env, Complex64::new(u, 0.0));
        let fwd = env.forward();
        let phi_stock = |u: f64| charfn_unchecked(model, env, Complex64::new(u, -1.0)) / fwd;
        let envelope = |u: f64| {
            let mut m = phi(u).norm();
            if with_stock_measure {
                m = m.max(phi_stock(u).norm());
            }
            m * (1.0 / u).max(1.0)
        };

        let width_cap = 8.0 / (spec.reach * sd);
        let mut a = spec.truncation.unwrap_or(10.0 / sd);
        let mut warning = None;
        loop {
            // the envelope can wiggle, so look at a few points near the end
            let residual = [0.75, 0.875, 1.0].iter().map(|f| envelope(f * a)).fold(0.0, f64::max);
            if !residual.is_finite() {
                return Err(Error::Numerical(format!("characteristic function not finite near u = {a}")));
            }
            if residual <= spec.decay_tol {
                break;
            }
            if (2.0 * a / width_cap).ceil() as usize > spec.max_panels {
                warning = Some(TruncationWarning { truncation: a, residual });
                break;
            }
            a *= 2.0;
        }
        let panels = ((a / width_cap).ceil() as usize).max(spec.min_panels);
        let width = a / panels as f64;
        let (gx, gw) = gauss_legendre(GL_ORDER);
        let mut nodes = Vec::with_capacity(panels * GL_ORDER);
        let mut weights = Vec::with_capacity(panels * GL_ORDER);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        let shift = |u: f64| Complex64::new(0.0, -u * centre).exp();
        let bond: Vec<Complex64> = nodes.iter().map(|&u| phi(u) * shift(u)).collect();
        let stock = with_stock_measure.then(|| nodes.iter().map(|&u| phi_stock(u) * shift(u)).collect::<Vec<_>>());
        if bond.iter().chain(stock.iter().flatten()).any(|z| !z.is_finite()) {
            return Err(Error::Numerical("characteristic function not finite on the inversion grid".into()));
        }
        Ok(Self { centre, sd, truncation: a, nodes, weights, bond, stock, warning })
    }

    /// Centre of the grid: the mean of the log price.
    pub fn centre(&self) -> f64 {
        self.centre
    }

    /// Standard deviation of the log price.
    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn warning(&self) -> Option<TruncationWarning> {
        self.warning
    }

    /// `(int Re[psi e^{-iuz}] du, int u Im[psi e^{-iuz}] du)`.
    fn transform(&self, z: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for ((&u, &w), psi) in self.nodes.iter().zip(&self.weights).zip(&self.bond) {
            let (s, c) = (u * z).sin_cos();
            v += w * (psi.re * c + psi.im * s);
            dv += w * u * (psi.im * c - psi.re * s);
        }
        (v, dv)
    }

    /// Density of the log price, clamped at zero.
    pub fn pdf(&self, x: f64) -> f64 {
        (self.transform(x - self.centre).0 / std::f64::consts::PI).max(0.0)
    }

    /// Density of the log price and its derivative, unclamped.
    pub fn pdf_and_derivative(&self, x: f64) -> (f64, f64) {
        let (v, dv) = self.transform(x - self.centre);
        (v / std::f64::consts::PI, dv / std::f64::consts::PI)
    }

    /// `Pi_1` or `Pi_2` at strike `k`, clamped to `[0, 1]`.
    pub fn cdf_bar(&self, k: f64, measure: Measure) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput(format!("strike must be > 0, got {k}")));
        }
        let values = match measure {
            Measure::Bond => &self.bond,
            Measure::Stock => self
                .stock
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("grid was built without the stock measure".into()))?,
        };
        if k.is_infinite() {
            return Ok(0.0);
        }
        let z = k.ln() - self.centre;
        // Re[e^{-iuz} psi / (iu)] = Im[e^{-iuz} psi] / u
        let mut acc = 0.0;
        for ((&u, &w), psi) in self.nodes.iter().zip(&self.weights).zip(values) {
            let (s, c) = (u * z).sin_cos();
            acc += w * (psi.im * c - psi.re * s) / u;
        }
        Ok((0.5 + acc / std::f64::consts::PI).clamp(0.0, 1.0))
    }
}

/// Prices calls and digitals at any number of strikes from one grid.
#[derive(Debug, Clone)]
pub struct CfPricer {
    env: MarketEnv,
    grid: FourierGrid,
}

impl CfPricer {
    pub fn new(model: &ModelParams, env: &MarketEnv, spec: &InversionSpec) -> Result<Self> {
        Ok(Self { env: *env, grid: FourierGrid::new(model, env, spec, true)? })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn env(&self) -> &MarketEnv {
        &self.env
    }

    pub fn cdf_bar(&self, k: f64, measure: Measure) -> Result<f64> {
        self.grid.cdf_bar(k, measure)
    }

    /// Discounted call `e^{-dT} S Pi_1 - e^{-rT} K Pi_2`.
    pub fn price_call(&self, k: f64) -> Result<f64> {
        let e = &self.env;
        let p1 = self.grid.cdf_bar(k, Measure::Stock)?;
        let p2 = self.grid.cdf_bar(k, Measure::Bond)?;
        if k.is_infinite() {
            return Ok(0.0);
        }
        let c = (-e.dividend * e.maturity).exp() * e.spot * p1 - e.discount() * k * p2;
        Ok(c.max(0.0))
    }

    /// Discounted put from the complementary probabilities.
    pub fn price_put(&self, k: f64) -> Result<f64> {
        let e = &self.env;
        let p1 = self.grid.cdf_bar(k, Measure::Stock)?;
        let p2 = self.grid.cdf_bar(k, Measure::Bond)?;
        let p = e.discount() * k * (1.0 - p2) - (-e.dividend * e.maturity).exp() * e.spot * (1.0 - p1);
        Ok(p.max(0.0))
    }

    /// Discounted cash-or-nothing digital `e^{-rT} Pi_2`.
    pub fn price_digital(&self, k: f64) -> Result<f64> {
        Ok(self.env.discount() * self.grid.cdf_bar(k, Measure::Bond)?)
    }
}

/// A model's log-price density, tabulated from Fourier inversion and
/// interpolated by cubic Hermite splines in `ln p`.
///
/// Far in the tails, where the inverted density is dominated by rounding,
/// `ln p` continues linearly.
#[derive(Debug, Clone)]
pub struct FourierPrior {
    label: String,
    mean: f64,
    sd: f64,
    x0: f64,
    step: f64,
    ln_p: Vec<f64>,
    d_ln_p: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    support: (f64, f64),
    warning: Option<TruncationWarning>,
}

/// Tabulated points must carry at least this fraction of the peak density.
const RELIABLE: f64 = 1e-13;
/// The support ends where the log-price density drops below this level,
/// about the accuracy of the inversion in double precision.
pub const DENSITY_FLOOR: f64 = 1e-12;
const STEPS_PER_SD: f64 = 32.0;

impl FourierPrior {
    pub fn new(model: &ModelParams, env: &MarketEnv, spec: &InversionSpec) -> Result<Self> {
        let grid = FourierGrid::new(model, env, spec, false)?;
        let (mean, sd) = (grid.centre(), grid.sd());
        let step = sd / STEPS_PER_SD;
        let max_steps = (60.0 * STEPS_PER_SD) as usize;
        // with a truncated, slowly decaying characteristic function the
        // inversion carries an error of about int_a^inf |phi| / pi
        let noise = grid.warning().map_or(0.0, |w| w.residual * w.truncation / std::f64::consts::PI);

        let mut right = Vec::new();
        let mut left = Vec::new();
        let mut peak: f64 = 0.0;
        for (dir, out) in [(1.0, &mut right), (-1.0, &mut left)] {
            let start = if dir > 0.0 { 0 } else { 1 };
            for j in start..max_steps {
                let x = mean + dir * step * j as f64;
                let (p, dp) = grid.pdf_and_derivative(x);
                peak = peak.max(p);
                if !(p > (RELIABLE * peak).max(10.0 * noise)) {
                    break;
                }
                out.push((p.ln(), dp / p));
            }
        }
        if right.len() < 2 * STEPS_PER_SD as usize || left.len() < 2 * STEPS_PER_SD as usize {
            return Err(Error::Numerical("inverted density is not resolved on the log-price grid".into()));
        }
        let x0 = mean - step * left.len() as f64;
        left.reverse();
        let (ln_p, mut d_ln_p): (Vec<f64>, Vec<f64>) = left.into_iter().chain(right).unzip();
        if grid.warning().is_some() {
            // the derivative transform converges even more slowly than the
            // density, so take slopes from the tabulated values instead
            d_ln_p = difference_slopes(&ln_p, step);
        }

        let m = STEPS_PER_SD as usize;
        let last = ln_p.len() - 1;
        let min_slope = 0.5 / sd;
        let left_slope = ((ln_p[m] - ln_p[0]) / (m as f64 * step)).max(min_slope);
        let right_slope = ((ln_p[last] - ln_p[last - m]) / (m as f64 * step)).min(-min_slope);

        let mut prior = Self {
            label: format!("{} (Fourier)", model.kind().name()),
            mean,
            sd,
            x0,
            step,
            ln_p,
            d_ln_p,
            left_slope,
            right_slope,
            support: (f64::NEG_INFINITY, f64::INFINITY),
            warning: grid.warning(),
        };
        prior.support = (prior.floor_crossing(-1.0), prior.floor_crossing(1.0));
        Ok(prior)
    }

    pub fn warning(&self) -> Option<TruncationWarning> {
        self.warning
    }

    /// Where the density falls to [`DENSITY_FLOOR`] on one side of the mean.
    fn floor_crossing(&self, dir: f64) -> f64 {
        let mut inner = self.mean;
        let mut outer = self.mean + dir * self.sd;
        while self.eval(outer) > DENSITY_FLOOR {
            inner = outer;
            outer += dir * self.sd;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if self.eval(mid) > DENSITY_FLOOR {
                inner = mid;
            } else {
                outer = mid;
            }
            if (outer - inner).abs() < 1e-12 * self.sd {
                break;
            }
        }
        outer
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.ln_p.len() - 1;
        let t = (x - self.x0) / self.step;
        if t <= 0.0 {
            return (self.ln_p[0] + self.left_slope * (x - self.x0)).exp();
        }
        if t >= last as f64 {
            let x_end = self.x0 + self.step * last as f64;
            return (self.ln_p[last] + self.right_slope * (x - x_end)).exp();
        }
        let j = (t.floor() as usize).min(last - 1);
        let s = t - j as f64;
        let h = self.step;
        let (y0, y1) = (self.ln_p[j], self.ln_p[j + 1]);
        let (m0, m1) = (self.d_ln_p[j] * h, self.d_ln_p[j + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        y.exp()
    }
}

/// Fourth-order central differences, second order next to the ends.
fn difference_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|j| match j {
            0 => (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h),
            j if j == n - 1 => (3.0 * y[j] - 4.0 * y[j - 1] + y[j - 2]) / (2.0 * h),
            j if j == 1 || j == n - 2 => (y[j + 1] - y[j - 1]) / (2.0 * h),
            j => (-y[j + 2] + 8.0 * y[j + 1] - 8.0 * y[j - 1] + y[j - 2]) / (12.0 * h),
        })
        .collect()
}

impl PriorDensity for FourierPrior {
    fn log_price_pdf(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn log_support(&self) -> (f64, f64) {
        self.support
    }

    fn log_moments(&self) -> (f64, f64) {
        (self.mean, self.sd)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
