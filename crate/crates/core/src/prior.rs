//! Prior densities for the terminal price.
//!
//! A prior is either Lebesgue measure on `[0, inf)` (which turns the relative
//! entropy problem into plain entropy maximisation) or a probability density.
//! Densities are described through the log price `x = ln S`; the price
//! density is `p(S) = p~(ln S) / S`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_partition, QuadratureSpec};
use crate::special::{normal_cdf, normal_pdf};

/// Probability left outside a prior's truncated support on each side.
pub const TAIL_MASS: f64 = 1e-12;

pub trait PriorDensity: Send + Sync + fmt::Debug {
    /// Density of the log price at `x`.
    fn log_price_pdf(&self, x: f64) -> f64;

    /// Truncated support `[x_lo, x_hi]` in log price.
    fn log_support(&self) -> (f64, f64);

    /// Mean and standard deviation of the log price; used to lay out
    /// quadrature panels.
    fn log_moments(&self) -> (f64, f64);

    /// Log prices where the density has a kink or cusp.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Supremum of the tilts `beta` for which `e^{beta S} p(S)` is
    /// integrable over the truncated support. Finite support makes every
    /// tilt admissible.
    fn moment_bound(&self) -> f64 {
        f64::INFINITY
    }

    /// Decay rate `-(d/dS) ln p(S)` near the top of the support. A fitted
    /// last-bucket tilt above this makes the density increase towards the
    /// truncation point, so prices out there depend on where it sits.
    fn tail_slope(&self) -> f64 {
        tail_slope_bound(self)
    }

    fn describe(&self) -> String;

    /// Price density `p(S)`; zero outside the truncated support.
    fn pdf(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        let x = s.ln();
        let (lo, hi) = self.log_support();
        if x < lo || x > hi {
            return 0.0;
        }
        self.log_price_pdf(x) / s
    }

    /// `[S_min, S_max]` truncation of the price support.
    fn support_hint(&self) -> (f64, f64) {
        let (lo, hi) = self.log_support();
        (lo.exp(), hi.exp())
    }
}

/// Least-squares slope of `-ln p(S)` over the top decade `[S_max / 10,
/// S_max]` of the support.
pub fn tail_slope_bound<P: PriorDensity + ?Sized>(prior: &P) -> f64 {
    let (_, hi) = prior.log_support();
    let s_max = hi.exp();
    let pts: Vec<(f64, f64)> = (0..=10)
        .map(|k| s_max * 10f64.powf(-(k as f64) / 10.0))
        .filter_map(|s| {
            let v = prior.log_price_pdf(s.ln().min(hi));
            (v > 0.0).then(|| (s, v.ln() - s.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let ms = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - ms).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - ms) * (p.1 - ml)).sum();
    (-sxy / sxx).max(0.0)
}

/// Reference measure for the entropy problem.
#[derive(Clone)]
pub enum Prior {
    Lebesgue,
    Density(Arc<dyn PriorDensity>),
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Lebesgue => write!(f, "Lebesgue"),
            Prior::Density(p) => write!(f, "Density({})", p.describe()),
        }
    }
}

impl Prior {
    pub fn density<P: PriorDensity + 'static>(p: P) -> Self {
        Prior::Density(Arc::new(p))
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self, Prior::Lebesgue)
    }

    pub fn pdf(&self, s: f64) -> f64 {
        match self {
            Prior::Lebesgue => {
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Prior::Density(p) => p.pdf(s),
        }
    }

    /// Supremum of admissible tilts in the unbounded bucket.
    pub fn moment_bound(&self) -> f64 {
        match self {
            Prior::Lebesgue => 0.0,
            Prior::Density(p) => p.moment_bound(),
        }
    }

    /// See [`PriorDensity::tail_slope`]; zero for Lebesgue measure.
    pub fn tail_slope(&self) -> f64 {
        match self {
            Prior::Lebesgue => 0.0,
            Prior::Density(p) => p.tail_slope(),
        }
    }

    pub fn support_hint(&self) -> (f64, f64) {
        match self {
            Prior::Lebesgue => (0.0, f64::INFINITY),
            Prior::Density(p) => p.support_hint(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Prior::Lebesgue => "lebesgue".into(),
            Prior::Density(p) => p.describe(),
        }
    }
}

/// Finds where the tail mass beyond `x` (on the side given by `upper`)
/// drops to `mass`. `tail(x)` must be monotone in the outward direction.
pub fn tail_quantile<F: Fn(f64) -> Result<f64>>(tail: F, start: f64, step: f64, upper: bool, mass: f64) -> Result<f64> {
    let dir = if upper { 1.0 } else { -1.0 };
    let mut inner = start;
    let mut outer = start;
    let mut found = false;
    for k in 0..200 {
        outer = start + dir * step * (k + 1) as f64;
        if tail(outer)? <= mass {
            found = true;
            break;
        }
        inner = outer;
    }
    if !found {
        return Err(Error::Numerical("could not bracket the prior's tail quantile".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (inner + outer);
        if tail(mid)? <= mass {
            outer = mid;
        } else {
            inner = mid;
        }
        if (outer - inner).abs() < 1e-10 * step {
            break;
        }
    }
    Ok(outer)
}

/// Support `[x_lo, x_hi]` of a log-price density found by integrating it
/// outwards from its mean.
pub fn support_from_density<F: Fn(f64) -> f64>(
    pdf: F,
    mean: f64,
    sd: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let reach = 60.0 * sd;
    let tail = |from: f64, to: f64| -> Result<f64> {
        let (a, b) = if from < to { (from, to) } else { (to, from) };
        let mut pts = vec![a];
        let panels = 24;
        for k in 1..panels {
            pts.push(a + (b - a) * k as f64 / panels as f64);
        }
        pts.push(b);
        pts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
        pts.sort_by(f64::total_cmp);
        let s = QuadratureSpec { abs_tol: 1e-16, ..*spec };
        Ok(integrate_partition(&pdf, &pts, &s)?.value)
    };
    let hi = tail_quantile(|x| tail(x, mean + reach), mean, sd, true, TAIL_MASS)?;
    let lo = tail_quantile(|x| tail(mean - reach, x), mean, sd, false, TAIL_MASS)?;
    Ok((lo, hi))
}

/// Lognormal prior: `ln S ~ N(mu, s^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LognormalPrior {
    mu: f64,
    s: f64,
    x_lo: f64,
    x_hi: f64,
}

impl LognormalPrior {
    pub fn new(mu: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidInput(format!("lognormal needs finite mu and s > 0, got {mu}, {s}")));
        }
        let z = tail_quantile(|z| Ok(normal_cdf(-z)), 0.0, 1.0, true, TAIL_MASS)?;
        Ok(Self { mu, s, x_lo: mu - z * s, x_hi: mu + z * s })
    }

    /// Lognormal with the given forward, volatility and maturity.
    pub fn from_forward(forward: f64, sigma: f64, maturity: f64) -> Result<Self> {
        let s = sigma * maturity.sqrt();
        Self::new(forward.ln() - 0.5 * s * s, s)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

impl PriorDensity for LognormalPrior {
    fn log_price_pdf(&self, x: f64) -> f64 {
        normal_pdf((x - self.mu) / self.s) / self.s
    }

    fn log_support(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    fn log_moments(&self) -> (f64, f64) {
        (self.mu, self.s)
    }

    fn tail_slope(&self) -> f64 {
        // -(d/dS) ln p at the top of the support
        let s_max = self.x_hi.exp();
        ((self.x_hi - self.mu) / (self.s * self.s) + 1.0) / s_max
    }

    fn describe(&self) -> String {
        format!("lognormal(mu={}, s={})", self.mu, self.s)
    }
}
