//! Variance Gamma: characteristic function and closed-form density.

use num_complex::Complex64;

use super::{MarketEnv, ModelParams};
use crate::error::{Error, Result};
use crate::prior::{support_from_density, PriorDensity};
use crate::quadrature::QuadratureSpec;
use crate::special::{bessel_k, ln_gamma};

struct Vg {
    theta: f64,
    sigma: f64,
    nu: f64,
}

fn params(model: &ModelParams) -> Vg {
    let ModelParams::VarianceGamma { theta, sigma, nu } = *model else {
        unreachable!("vg called with {model:?}")
    };
    Vg { theta, sigma, nu }
}

/// Convexity correction `omega = ln(1 - theta nu - sigma^2 nu / 2) / nu`.
fn omega(p: &Vg) -> f64 {
    (1.0 - p.theta * p.nu - 0.5 * p.sigma * p.sigma * p.nu).ln() / p.nu
}

/// Location of the cusp: `ln S0 + (r - d + omega) T`.
pub fn cusp(model: &ModelParams, env: &MarketEnv) -> f64 {
    let p = params(model);
    env.spot.ln() + (env.rate - env.dividend + omega(&p)) * env.maturity
}

pub(crate) fn charfn(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Complex64 {
    let p = params(model);
    let i = Complex64::i();
    let base = 1.0 - i * p.theta * p.nu * u + 0.5 * p.sigma * p.sigma * p.nu * u * u;
    (i * u * cusp(model, env) - env.maturity / p.nu * base.ln()).exp()
}

fn ln_bessel_k(order: f64, z: f64) -> Result<f64> {
    let order = order.abs();
    if order > 50.0 {
        // uniform asymptotic expansion in the order
        let t = z / order;
        let r = (1.0 + t * t).sqrt();
        let eta = r + (t / (1.0 + r)).ln();
        let p = 1.0 / r;
        let (p2, p3) = (p * p, p * p * p);
        let u1 = (3.0 * p - 5.0 * p3) / 24.0;
        let u2 = (81.0 * p2 - 462.0 * p2 * p2 + 385.0 * p3 * p3) / 1152.0;
        let u3 = (30375.0 * p3 - 369603.0 * p3 * p2 + 765765.0 * p3 * p2 * p2 - 425425.0 * p3 * p3 * p3) / 414720.0;
        let series = 1.0 - u1 / order + u2 / (order * order) - u3 / (order * order * order);
        return Ok(0.5 * (std::f64::consts::PI / (2.0 * order)).ln() - order * eta - 0.5 * r.ln() + series.ln());
    }
    if z > 700.0 {
        let mu = 4.0 * order * order;
        return Ok(0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z + (1.0 + (mu - 1.0) / (8.0 * z) + (mu - 1.0) * (mu - 9.0) / (128.0 * z * z)).ln());
    }
    Ok(bessel_k(order, z)?.ln())
}

/// Closed-form density of the log price `x`.
///
/// At the cusp the density is finite only when `T / nu > 1/2`; otherwise
/// the singularity is integrable and this returns a domain error.
pub fn vg_pdf_closed(model: &ModelParams, env: &MarketEnv, x: f64) -> Result<f64> {
    model.validate()?;
    if !matches!(model, ModelParams::VarianceGamma { .. }) {
        return Err(Error::InvalidInput("vg_pdf_closed needs a VG model".into()));
    }
    let p = params(model);
    let t = env.maturity;
    let s2 = p.sigma * p.sigma;
    let shape = t / p.nu;
    let order = shape - 0.5;
    let a = 2.0 * s2 / p.nu + p.theta * p.theta;
    let xt = x - cusp(model, env);
    let ln_front = std::f64::consts::LN_2
        - shape * p.nu.ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        - p.sigma.ln()
        - ln_gamma(shape);
    let z = xt.abs() * a.sqrt() / s2;
    if z < 1e-8 {
        if order <= 0.0 {
            return Err(Error::Domain(format!(
                "VG density is singular at the cusp when T/nu = {shape} <= 1/2"
            )));
        }
        // K_v(z) ~ Gamma(v) / 2 (2/z)^v
        let ln_p = ln_front + ln_gamma(order) - std::f64::consts::LN_2 + order * (2.0 * s2 / a).ln();
        return Ok(ln_p.exp());
    }
    let ln_p = ln_front + p.theta * xt / s2 + 0.5 * order * (xt * xt / a).ln() + ln_bessel_k(order, z)?;
    Ok(ln_p.exp())
}

/// The closed-form VG density as a prior, with a breakpoint at the cusp.
#[derive(Debug, Clone)]
pub struct VgPrior {
    model: ModelParams,
    env: MarketEnv,
    cusp: f64,
    mean: f64,
    sd: f64,
    support: (f64, f64),
}

impl VgPrior {
    pub fn new(model: &ModelParams, env: &MarketEnv) -> Result<Self> {
        model.validate()?;
        env.validate()?;
        let ModelParams::VarianceGamma { theta, sigma, nu } = *model else {
            return Err(Error::InvalidInput("VgPrior needs a VG model".into()));
        };
        let c = cusp(model, env);
        let mean = c + theta * env.maturity;
        let sd = ((sigma * sigma + nu * theta * theta) * env.maturity).sqrt();
        let mut prior = Self { model: *model, env: *env, cusp: c, mean, sd, support: (f64::NEG_INFINITY, f64::INFINITY) };
        prior.support = support_from_density(|x| prior.log_price_pdf(x), mean, sd, &[c], &QuadratureSpec::default())?;
        Ok(prior)
    }

    pub fn cusp(&self) -> f64 {
        self.cusp
    }
}

impl PriorDensity for VgPrior {
    fn log_price_pdf(&self, x: f64) -> f64 {
        vg_pdf_closed(&self.model, &self.env, x).unwrap_or(f64::INFINITY)
    }

    fn log_support(&self) -> (f64, f64) {
        self.support
    }

    fn log_moments(&self) -> (f64, f64) {
        (self.mean, self.sd)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.cusp]
    }

    fn describe(&self) -> String {
        let ModelParams::VarianceGamma { theta, sigma, nu } = self.model else { unreachable!() };
        format!("vg(theta={theta}, sigma={sigma}, nu={nu})")
    }
}
