//! Characteristic-function models for the terminal log price and their use
//! as prior densities.

pub mod black;
pub mod fourier;
pub mod heston;
pub mod sz;
pub mod vg;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{LognormalPrior, Prior};

pub use fourier::{CfPricer, FourierGrid, FourierPrior, InversionSpec, Measure};

/// Spot, carry and maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketEnv {
    pub spot: f64,
    pub rate: f64,
    pub dividend: f64,
    pub maturity: f64,
}

impl MarketEnv {
    pub fn new(spot: f64, rate: f64, dividend: f64, maturity: f64) -> Result<Self> {
        let env = Self { spot, rate, dividend, maturity };
        env.validate()?;
        Ok(env)
    }

    /// Environment whose forward is `forward`.
    pub fn from_forward(forward: f64, rate: f64, dividend: f64, maturity: f64) -> Result<Self> {
        Self::new(forward * (-(rate - dividend) * maturity).exp(), rate, dividend, maturity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(Error::InvalidInput(format!("spot must be > 0, got {}", self.spot)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidInput(format!("maturity must be > 0, got {}", self.maturity)));
        }
        if !self.rate.is_finite() || !self.dividend.is_finite() {
            return Err(Error::InvalidInput("rates must be finite".into()));
        }
        Ok(())
    }

    pub fn forward(&self) -> f64 {
        self.spot * ((self.rate - self.dividend) * self.maturity).exp()
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BlackScholes,
    Heston,
    SchobelZhu,
    VarianceGamma,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::BlackScholes => "bs",
            ModelKind::Heston => "heston",
            ModelKind::SchobelZhu => "sz",
            ModelKind::VarianceGamma => "vg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bs" | "black-scholes" | "blackscholes" => Ok(ModelKind::BlackScholes),
            "heston" => Ok(ModelKind::Heston),
            "sz" | "schobel-zhu" | "schobelzhu" => Ok(ModelKind::SchobelZhu),
            "vg" | "variance-gamma" | "variancegamma" => Ok(ModelKind::VarianceGamma),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }

    /// Parameter names in the order used by [`ModelParams::values`].
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::BlackScholes => &["sigma"],
            ModelKind::Heston | ModelKind::SchobelZhu => &["kappa", "theta", "rho", "sigma", "v0"],
            ModelKind::VarianceGamma => &["theta", "sigma", "nu"],
        }
    }
}

/// Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    BlackScholes {
        sigma: f64,
    },
    /// `dv = (kappa theta - (kappa + lambda) v) dt + sigma sqrt(v) dW`.
    Heston {
        kappa: f64,
        theta: f64,
        rho: f64,
        sigma: f64,
        v0: f64,
        #[serde(default)]
        lambda: f64,
    },
    /// Ornstein-Uhlenbeck volatility `dv = kappa (theta - v) dt + sigma dW`.
    SchobelZhu {
        kappa: f64,
        theta: f64,
        rho: f64,
        sigma: f64,
        v0: f64,
    },
    VarianceGamma {
        theta: f64,
        sigma: f64,
        nu: f64,
    },
}

impl ModelParams {
    pub fn heston(kappa: f64, theta: f64, rho: f64, sigma: f64, v0: f64) -> Self {
        ModelParams::Heston { kappa, theta, rho, sigma, v0, lambda: 0.0 }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::BlackScholes { .. } => ModelKind::BlackScholes,
            ModelParams::Heston { .. } => ModelKind::Heston,
            ModelParams::SchobelZhu { .. } => ModelKind::SchobelZhu,
            ModelParams::VarianceGamma { .. } => ModelKind::VarianceGamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let finite = self.values().iter().all(|v| v.is_finite());
        if !finite {
            return bad("model parameters must be finite".into());
        }
        match *self {
            ModelParams::BlackScholes { sigma } => {
                if !(sigma > 0.0) {
                    return bad(format!("sigma must be > 0, got {sigma}"));
                }
            }
            ModelParams::Heston { kappa, theta, rho, sigma, v0, lambda } => {
                if !(sigma > 0.0) || !(kappa + lambda > 0.0) || theta < 0.0 || v0 < 0.0 || !(-1.0..=1.0).contains(&rho) {
                    return bad(format!(
                        "Heston needs kappa + lambda > 0, theta >= 0, v0 >= 0, sigma > 0, |rho| <= 1; got kappa={kappa}, theta={theta}, rho={rho}, sigma={sigma}, v0={v0}"
                    ));
                }
            }
            ModelParams::SchobelZhu { kappa, rho, sigma, .. } => {
                if !(sigma > 0.0) || !(kappa > 0.0) || !(-1.0..=1.0).contains(&rho) {
                    return bad(format!("Schobel-Zhu needs kappa > 0, sigma > 0, |rho| <= 1; got kappa={kappa}, rho={rho}, sigma={sigma}"));
                }
            }
            ModelParams::VarianceGamma { theta, sigma, nu } => {
                if !(sigma > 0.0 && nu > 0.0) {
                    return bad(format!("VG needs sigma > 0 and nu > 0, got sigma={sigma}, nu={nu}"));
                }
                if !(1.0 - theta * nu - 0.5 * sigma * sigma * nu > 0.0) {
                    return bad("VG needs 1 - theta nu - sigma^2 nu / 2 > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Parameter values in [`ModelKind::parameter_names`] order.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ModelParams::BlackScholes { sigma } => vec![sigma],
            ModelParams::Heston { kappa, theta, rho, sigma, v0, .. }
            | ModelParams::SchobelZhu { kappa, theta, rho, sigma, v0 } => vec![kappa, theta, rho, sigma, v0],
            ModelParams::VarianceGamma { theta, sigma, nu } => vec![theta, sigma, nu],
        }
    }

    pub fn from_values(kind: ModelKind, v: &[f64]) -> Result<Self> {
        let want = kind.parameter_names().len();
        if v.len() != want {
            return Err(Error::InvalidInput(format!("{} needs {want} parameters, got {}", kind.name(), v.len())));
        }
        let p = match kind {
            ModelKind::BlackScholes => ModelParams::BlackScholes { sigma: v[0] },
            ModelKind::Heston => ModelParams::heston(v[0], v[1], v[2], v[3], v[4]),
            ModelKind::SchobelZhu => ModelParams::SchobelZhu { kappa: v[0], theta: v[1], rho: v[2], sigma: v[3], v0: v[4] },
            ModelKind::VarianceGamma => ModelParams::VarianceGamma { theta: v[0], sigma: v[1], nu: v[2] },
        };
        Ok(p)
    }
}

/// Characteristic function `E[e^{i u ln S(T)}]`.
pub fn charfn(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Result<Complex64> {
    model.validate()?;
    env.validate()?;
    Ok(charfn_unchecked(model, env, u))
}

pub(crate) fn charfn_unchecked(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Complex64 {
    let i = Complex64::i();
    match *model {
        ModelParams::BlackScholes { sigma } => {
            let t = env.maturity;
            let mu = env.spot.ln() + (env.rate - env.dividend - 0.5 * sigma * sigma) * t;
            (i * u * mu - 0.5 * sigma * sigma * u * u * t).exp()
        }
        ModelParams::Heston { .. } => heston::charfn(model, env, u),
        ModelParams::SchobelZhu { .. } => sz::charfn(model, env, u),
        ModelParams::VarianceGamma { .. } => vg::charfn(model, env, u),
    }
}

/// How a model is turned into a prior density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorOptions {
    /// Use the closed-form density when one exists.
    pub prefer_closed_form: bool,
    pub inversion: InversionSpec,
}

impl Default for PriorOptions {
    fn default() -> Self {
        Self { prefer_closed_form: true, inversion: InversionSpec::default() }
    }
}

/// The model's terminal density as a prior.
pub fn as_prior(model: &ModelParams, env: &MarketEnv, opts: &PriorOptions) -> Result<Prior> {
    model.validate()?;
    env.validate()?;
    match *model {
        ModelParams::BlackScholes { sigma } if opts.prefer_closed_form => {
            Ok(Prior::density(LognormalPrior::from_forward(env.forward(), sigma, env.maturity)?))
        }
        ModelParams::VarianceGamma { .. } if opts.prefer_closed_form => Ok(Prior::density(vg::VgPrior::new(model, env)?)),
        _ => Ok(Prior::density(FourierPrior::new(model, env, &opts.inversion)?)),
    }
}

/// Discounted call price by Fourier inversion.
pub fn price_call_cf(model: &ModelParams, env: &MarketEnv, strike: f64) -> Result<f64> {
    CfPricer::new(model, env, &InversionSpec::default())?.price_call(strike)
}

/// Discounted digital price by Fourier inversion.
pub fn price_digital_cf(model: &ModelParams, env: &MarketEnv, strike: f64) -> Result<f64> {
    CfPricer::new(model, env, &InversionSpec::default())?.price_digital(strike)
}

/// In-the-money probability under the stock (`Pi_1`) or bond (`Pi_2`)
/// numeraire.
pub fn cdf_bar(model: &ModelParams, env: &MarketEnv, strike: f64, measure: Measure) -> Result<f64> {
    CfPricer::new(model, env, &InversionSpec::default())?.cdf_bar(strike, measure)
}

/// Log-price density by Fourier inversion.
pub fn invert_pdf(model: &ModelParams, env: &MarketEnv, x: f64, spec: &InversionSpec) -> Result<f64> {
    Ok(FourierGrid::new(model, env, spec, false)?.pdf(x))
}
