//! Least-squares calibration of model parameters to implied volatilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::OptionChain;
use crate::error::{Error, Result};
use crate::models::black::{black_call, black_vega};
use crate::models::{as_prior, CfPricer, InversionSpec, MarketEnv, ModelKind, ModelParams, PriorOptions};
use crate::mred;
use crate::quadrature::QuadratureSpec;

/// Black implied volatility of a discounted call price.
///
/// Safeguarded Newton on vega inside a shrinking bisection bracket; the
/// result reprices the undiscounted call to within `1e-12 max(F, K)`.
pub fn implied_vol(price: f64, env: &MarketEnv, strike: f64) -> Result<f64> {
    env.validate()?;
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidInput(format!("strike must be > 0, got {strike}")));
    }
    let f = env.forward();
    let t = env.maturity;
    let target = price / env.discount();
    let intrinsic = (f - strike).max(0.0);
    if !(target > intrinsic && target < f) {
        return Err(Error::Domain(format!(
            "call price {price} at strike {strike} is outside the no-arbitrage bounds ({}, {})",
            intrinsic * env.discount(),
            f * env.discount()
        )));
    }
    let tol = 1e-12 * f.max(strike);
    let (mut lo, mut hi): (f64, f64) = (1e-9, 1.0);
    while black_call(f, strike, hi, t) < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Domain(format!("no volatility below 1000 reprices {price} at {strike}")));
        }
    }
    // Start at the inflection point of the price in vol, from which Newton
    // converges monotonically.
    let mut vol = ((2.0 * (f / strike).ln().abs()) / t).sqrt().clamp(lo.max(0.05), hi);
    for _ in 0..200 {
        let diff = black_call(f, strike, vol, t) - target;
        if diff.abs() <= tol {
            return Ok(vol);
        }
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = black_vega(f, strike, vol, t);
        let newton = vol - diff / vega;
        vol = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            return Ok(vol);
        }
    }
    Err(Error::Convergence { solver: "implied_vol", iterations: 200, residual: black_call(f, strike, vol, t) - target })
}

/// One market quote: strike, Black volatility and least-squares weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub strike: f64,
    pub vol: f64,
    pub weight: f64,
}

impl Quote {
    pub fn new(strike: f64, vol: f64) -> Result<Self> {
        let q = Self { strike, vol, weight: 1.0 };
        q.validate()?;
        Ok(q)
    }

    /// Quote from a discounted call price.
    pub fn from_price(env: &MarketEnv, strike: f64, price: f64) -> Result<Self> {
        Self::new(strike, implied_vol(price, env, strike)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidInput(format!("quote strike must be > 0, got {}", self.strike)));
        }
        if !(self.vol > 0.0 && self.vol < 5.0) {
            return Err(Error::InvalidInput(format!("quote vol must lie in (0, 5), got {}", self.vol)));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidInput(format!("quote weight must be >= 0, got {}", self.weight)));
        }
        Ok(())
    }
}

/// Outcome of [`calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: ModelParams,
    /// `sum w_i (sigma_i - sigma_i(params))^2`.
    pub sse: f64,
    /// Relative entropy of the chain-matching density against the fitted
    /// model's density, once computed by [`fit_quality`].
    pub relative_entropy: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub model_vols: Vec<f64>,
}

/// Levenberg-Marquardt controls.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub max_iterations: usize,
    /// Initial damping.
    pub lambda: f64,
    /// Stop when the scaled gradient, the relative step or the relative
    /// change in the objective falls below this.
    pub tol: f64,
    pub inversion: InversionSpec,
    /// Starting points; when empty a fixed three-point set derived from the
    /// quotes is used.
    pub starts: Vec<ModelParams>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { max_iterations: 500, lambda: 1e-3, tol: 1e-12, inversion: InversionSpec::default(), starts: Vec::new() }
    }
}

/// Model implied vols at the quoted strikes.
pub fn model_vols(params: &ModelParams, env: &MarketEnv, strikes: &[f64], spec: &InversionSpec) -> Result<Vec<f64>> {
    if let ModelParams::BlackScholes { sigma } = *params {
        return Ok(vec![sigma; strikes.len()]);
    }
    let pricer = CfPricer::new(params, env, spec)?;
    strikes.iter().map(|&k| implied_vol(pricer.price_call(k)?, env, k)).collect()
}

/// `sum w_i (sigma_i - sigma_hat_i)^2`.
pub fn sse(quotes: &[Quote], vols: &[f64]) -> f64 {
    quotes.iter().zip(vols).map(|(q, v)| q.weight * (q.vol - v).powi(2)).sum()
}

// Unconstrained coordinates: log for positive parameters, atanh for rho.
fn to_internal(p: &ModelParams) -> Vec<f64> {
    match *p {
        ModelParams::BlackScholes { sigma } => vec![sigma.ln()],
        ModelParams::Heston { kappa, theta, rho, sigma, v0, .. } => {
            vec![kappa.ln(), theta.max(1e-12).ln(), rho.clamp(-0.999, 0.999).atanh(), sigma.ln(), v0.max(1e-12).ln()]
        }
        ModelParams::SchobelZhu { kappa, theta, rho, sigma, v0 } => {
            vec![kappa.ln(), theta, rho.clamp(-0.999, 0.999).atanh(), sigma.ln(), v0]
        }
        ModelParams::VarianceGamma { theta, sigma, nu } => vec![theta, sigma.ln(), nu.ln()],
    }
}

fn from_internal(kind: ModelKind, z: &[f64]) -> Result<ModelParams> {
    let p = match kind {
        ModelKind::BlackScholes => ModelParams::BlackScholes { sigma: z[0].exp() },
        ModelKind::Heston => ModelParams::heston(z[0].exp(), z[1].exp(), z[2].tanh(), z[3].exp(), z[4].exp()),
        ModelKind::SchobelZhu => {
            ModelParams::SchobelZhu { kappa: z[0].exp(), theta: z[1], rho: z[2].tanh(), sigma: z[3].exp(), v0: z[4] }
        }
        ModelKind::VarianceGamma => ModelParams::VarianceGamma { theta: z[0], sigma: z[1].exp(), nu: z[2].exp() },
    };
    p.validate()?;
    Ok(p)
}

fn default_starts(kind: ModelKind, quotes: &[Quote]) -> Vec<ModelParams> {
    let vol = quotes.iter().map(|q| q.vol).sum::<f64>() / quotes.len() as f64;
    let var = vol * vol;
    match kind {
        ModelKind::BlackScholes => [1.0, 0.7, 1.4].iter().map(|m| ModelParams::BlackScholes { sigma: vol * m }).collect(),
        ModelKind::Heston => vec![
            ModelParams::heston(1.5, var, -0.5, 0.5, var),
            ModelParams::heston(0.5, 1.5 * var, -0.8, 0.3, var),
            ModelParams::heston(3.0, var, -0.3, 1.0, 0.7 * var),
        ],
        ModelKind::SchobelZhu => vec![
            ModelParams::SchobelZhu { kappa: 1.5, theta: vol, rho: -0.5, sigma: 0.2, v0: vol },
            ModelParams::SchobelZhu { kappa: 0.5, theta: 1.2 * vol, rho: -0.8, sigma: 0.3, v0: vol },
            ModelParams::SchobelZhu { kappa: 3.0, theta: vol, rho: -0.3, sigma: 0.5, v0: 0.8 * vol },
        ],
        ModelKind::VarianceGamma => vec![
            ModelParams::VarianceGamma { theta: -0.1, sigma: vol, nu: 0.2 },
            ModelParams::VarianceGamma { theta: -0.3, sigma: 0.8 * vol, nu: 0.4 },
            ModelParams::VarianceGamma { theta: 0.0, sigma: vol, nu: 0.1 },
        ],
    }
}

struct Lm<'a> {
    kind: ModelKind,
    env: &'a MarketEnv,
    quotes: &'a [Quote],
    strikes: Vec<f64>,
    sqrt_w: Vec<f64>,
    spec: &'a InversionSpec,
}

impl Lm<'_> {
    /// Weighted residuals `sqrt(w_i) (sigma_hat_i - sigma_i)` and the model vols.
    fn residuals(&self, z: &[f64]) -> Result<(DVector<f64>, Vec<f64>)> {
        let p = from_internal(self.kind, z)?;
        let vols = model_vols(&p, self.env, &self.strikes, self.spec)?;
        let r = DVector::from_iterator(
            vols.len(),
            vols.iter().zip(self.quotes).zip(&self.sqrt_w).map(|((v, q), w)| w * (v - q.vol)),
        );
        Ok((r, vols))
    }

    /// Forward-difference Jacobian, one thread per column.
    fn jacobian(&self, z: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let cols: Vec<Result<DVector<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..z.len())
                .map(|j| {
                    scope.spawn(move || {
                        let h = 1e-6 * z[j].abs().max(1.0);
                        let mut zp = z.to_vec();
                        zp[j] += h;
                        // step back instead when the forward point is invalid
                        let (r, h) = match self.residuals(&zp) {
                            Ok((r, _)) => (r, h),
                            Err(_) => {
                                zp[j] = z[j] - h;
                                (self.residuals(&zp)?.0, -h)
                            }
                        };
                        Ok((r - r0) / h)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("jacobian worker panicked")).collect()
        });
        let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_columns(&cols))
    }

    fn run(&self, start: &ModelParams, opts: &CalibrationOptions) -> Result<FitReport> {
        let mut z = to_internal(start);
        let (mut r, mut vols) = self.residuals(&z)?;
        let mut cost = r.norm_squared();
        let mut lambda = opts.lambda;
        let mut nu = 2.0;
        let mut converged = false;
        let mut iterations = 0;
        let mut jac = self.jacobian(&z, &r)?;
        while iterations < opts.max_iterations {
            iterations += 1;
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &r;
            if g.amax() <= opts.tol || cost <= 1e-30 {
                converged = true;
                break;
            }
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let z_new: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let predicted = -(step.dot(&g) * 2.0 + (&jac * &step).norm_squared());
            let trial = self.residuals(&z_new);
            let accepted = match trial {
                Ok((r_new, vols_new)) => {
                    let cost_new = r_new.norm_squared();
                    let gain = (cost - cost_new) / predicted.abs().max(f64::MIN_POSITIVE);
                    if cost_new < cost {
                        let small_step = step.norm() <= opts.tol * (DVector::from_column_slice(&z).norm() + opts.tol);
                        let small_change = cost - cost_new <= opts.tol * cost;
                        z = z_new;
                        r = r_new;
                        vols = vols_new;
                        cost = cost_new;
                        lambda *= (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0);
                        nu = 2.0;
                        if small_step || small_change {
                            converged = true;
                            break;
                        }
                        true
                    } else {
                        false
                    }
                }
                Err(_) => false,
            };
            if accepted {
                jac = self.jacobian(&z, &r)?;
            } else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e16 {
                    // no descent direction left at working precision
                    converged = true;
                    break;
                }
            }
        }
        let params = from_internal(self.kind, &z)?;
        Ok(FitReport { params, sse: sse(self.quotes, &vols), relative_entropy: None, iterations, converged, model_vols: vols })
    }
}

/// Fits `kind` to the quotes by Levenberg-Marquardt from each start and
/// keeps the best fit.
pub fn calibrate(kind: ModelKind, env: &MarketEnv, quotes: &[Quote], opts: &CalibrationOptions) -> Result<FitReport> {
    env.validate()?;
    opts.inversion.validate()?;
    let n_params = kind.parameter_names().len();
    if quotes.len() < n_params {
        return Err(Error::InvalidInput(format!(
            "{} has {n_params} parameters but only {} quotes were given",
            kind.name(),
            quotes.len()
        )));
    }
    for q in quotes {
        q.validate()?;
    }
    let lm = Lm {
        kind,
        env,
        quotes,
        strikes: quotes.iter().map(|q| q.strike).collect(),
        sqrt_w: quotes.iter().map(|q| q.weight.sqrt()).collect(),
        spec: &opts.inversion,
    };
    let starts = if opts.starts.is_empty() { default_starts(kind, quotes) } else { opts.starts.clone() };
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for start in &starts {
        if start.kind() != kind {
            return Err(Error::InvalidInput(format!("start {start:?} is not a {} model", kind.name())));
        }
        match lm.run(start, opts) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.sse < b.sse) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidInput("no calibration starts".into())))
}

/// Both fit criteria for a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitQuality {
    pub sse: f64,
    /// `min int q ln(q/p)` over densities repricing the chain, with `p` the
    /// model density.
    pub relative_entropy: f64,
}

pub fn fit_quality(
    params: &ModelParams,
    env: &MarketEnv,
    chain: &OptionChain,
    quotes: &[Quote],
    prior_opts: &PriorOptions,
    spec: &QuadratureSpec,
) -> Result<FitQuality> {
    let strikes: Vec<f64> = quotes.iter().map(|q| q.strike).collect();
    let vols = model_vols(params, env, &strikes, &prior_opts.inversion)?;
    let prior = as_prior(params, env, prior_opts)?;
    let fit = mred::minimize(&prior, chain, spec)?;
    Ok(FitQuality { sse: sse(quotes, &vols), relative_entropy: fit.objective.max(0.0) })
}

impl FitReport {
    pub fn with_quality(mut self, q: FitQuality) -> Self {
        self.sse = q.sse;
        self.relative_entropy = Some(q.relative_entropy);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_env() -> MarketEnv {
        MarketEnv::new(100.0, 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn implied_vol_of_the_reference_call() {
        let env = unit_env();
        assert_relative_eq!(implied_vol(9.9476, &env, 100.0).unwrap(), 0.25, epsilon = 1e-4);
        let exact = black_call(100.0, 100.0, 0.25, 1.0);
        assert_relative_eq!(implied_vol(exact, &env, 100.0).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn bounds_are_domain_errors() {
        let env = unit_env();
        assert!(matches!(implied_vol(20.0, &env, 80.0), Err(Error::Domain(_))));
        assert!(matches!(implied_vol(100.0, &env, 80.0), Err(Error::Domain(_))));
        assert!(matches!(implied_vol(0.0, &env, 120.0), Err(Error::Domain(_))));
    }

    #[test]
    fn implied_vol_with_carry() {
        let env = MarketEnv::new(1300.0, 0.003, 0.02, 152.0 / 365.0).unwrap();
        for (k, v) in [(900.0, 0.41), (1300.0, 0.2), (1600.0, 0.13)] {
            let p = env.discount() * black_call(env.forward(), k, v, env.maturity);
            let iv = implied_vol(p, &env, k).unwrap();
            assert_relative_eq!(iv, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn transforms_round_trip() {
        let ps = [
            ModelParams::heston(0.8568, 0.08, -0.8016, 0.5473, 0.0421),
            ModelParams::SchobelZhu { kappa: 1.6316, theta: 0.1731, rho: -0.8031, sigma: 0.3249, v0: 0.1887 },
            ModelParams::VarianceGamma { theta: -0.2808, sigma: 0.1535, nu: 0.3638 },
        ];
        for p in ps {
            let back = from_internal(p.kind(), &to_internal(&p)).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                assert_relative_eq!(*a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn black_scholes_surface_recovers_sigma() {
        let env = unit_env();
        let quotes: Vec<Quote> = [80.0, 100.0, 120.0].iter().map(|&k| Quote::new(k, 0.231).unwrap()).collect();
        let fit = calibrate(ModelKind::BlackScholes, &env, &quotes, &CalibrationOptions::default()).unwrap();
        let ModelParams::BlackScholes { sigma } = fit.params else { unreachable!() };
        assert_relative_eq!(sigma, 0.231, epsilon = 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn sse_is_the_weighted_sum() {
        let quotes = [
            Quote { strike: 90.0, vol: 0.30, weight: 1.0 },
            Quote { strike: 100.0, vol: 0.25, weight: 2.0 },
            Quote { strike: 110.0, vol: 0.22, weight: 0.5 },
        ];
        let got = sse(&quotes, &[0.31, 0.24, 0.20]);
        assert_relative_eq!(got, 0.0001 + 2.0 * 0.0001 + 0.5 * 0.0004, epsilon = 1e-15);
    }

    #[test]
    fn too_few_quotes() {
        let quotes = [Quote::new(100.0, 0.2).unwrap()];
        let err = calibrate(ModelKind::Heston, &unit_env(), &quotes, &CalibrationOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
