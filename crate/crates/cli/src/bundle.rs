//! JSON result bundle.
//!
//! Computed quantities are written at 10 significant digits. Market inputs
//! and fitted coefficients keep full precision, so a bundle reloads into
//! exactly the density that produced it.

use serde::{Deserialize, Serialize};

use entrofit::density::TiltedDensity;
use entrofit::models::{as_prior, MarketEnv, ModelParams, PriorOptions};
use entrofit::prior::Prior;
use entrofit::quadrature::QuadratureSpec;
use entrofit::{Error, Result};

use crate::prior_arg::PriorArg;

pub const FORMAT: &str = "entrofit-result/1";

/// Rounds to 10 significant digits.
pub fn sig10(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub forward: f64,
    pub spot: f64,
    pub maturity: f64,
    pub rate: f64,
    pub dividend: f64,
}

impl Market {
    pub fn from_env(env: &MarketEnv, forward: f64) -> Self {
        Self { forward, spot: env.spot, maturity: env.maturity, rate: env.rate, dividend: env.dividend }
    }

    pub fn env(&self) -> Result<MarketEnv> {
        MarketEnv::new(self.spot, self.rate, self.dividend, self.maturity)
    }
}

/// Tilt `alpha e^{beta S}` on `[lower, upper)`; `upper = None` is infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub lower: f64,
    pub upper: Option<f64>,
    pub ln_alpha: f64,
    pub beta: f64,
}

/// Undiscounted prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub strike: f64,
    pub call: f64,
    pub digital: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Minimised objective: relative entropy for a density prior, minus the
    /// entropy for Lebesgue measure.
    pub objective: f64,
    pub relative_entropy: Option<f64>,
    /// `-int q ln q`.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSwapBlock {
    pub drift: f64,
    pub variance: f64,
    pub vol: f64,
    pub log_contract: f64,
    pub entropy: f64,
    pub log_entropy: f64,
    pub variance_entropy_route: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub strike: f64,
    pub market_vol: f64,
    pub model_vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub model: String,
    pub params: ModelParams,
    pub sse: f64,
    pub relative_entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub quotes: Vec<QuoteRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub format: String,
    pub command: String,
    pub market: Market,
    pub prior: String,
    pub quad_rel_tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strikes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients: Vec<Coefficient>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prices: Vec<PriceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varswap: Option<VarSwapBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationBlock>,
}

impl ResultBundle {
    pub fn new(command: &str, market: Market, prior: &PriorArg, quad: &QuadratureSpec) -> Self {
        Self {
            format: FORMAT.into(),
            command: command.into(),
            market,
            prior: prior.canonical(),
            quad_rel_tol: quad.rel_tol,
            strikes: Vec::new(),
            coefficients: Vec::new(),
            prices: Vec::new(),
            diagnostics: None,
            varswap: None,
            calibration: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), reason: e.to_string() })?;
        if b.format != FORMAT {
            return Err(Error::InvalidInput(format!("unsupported result format '{}'", b.format)));
        }
        Ok(b)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serialises");
        s.push('\n');
        s
    }

    pub fn quad(&self) -> QuadratureSpec {
        QuadratureSpec::default().with_rel_tol(self.quad_rel_tol)
    }

    pub fn set_density(&mut self, q: &TiltedDensity) {
        let ks = q.strikes();
        self.strikes = ks.to_vec();
        self.coefficients = q
            .ln_alpha()
            .iter()
            .zip(q.beta())
            .enumerate()
            .map(|(i, (&ln_alpha, &beta))| Coefficient {
                lower: if i == 0 { 0.0 } else { ks[i - 1] },
                upper: ks.get(i).copied(),
                ln_alpha,
                beta,
            })
            .collect();
    }

    /// Rebuilds the fitted density.
    pub fn density(&self) -> Result<TiltedDensity> {
        if self.coefficients.is_empty() {
            return Err(Error::InvalidInput(format!("the '{}' result holds no fitted density", self.command)));
        }
        if self.coefficients.len() != self.strikes.len() + 1 {
            return Err(Error::InvalidInput("coefficient table does not match the strikes".into()));
        }
        let prior = build_prior(&PriorArg::parse(&self.prior)?, &self.market.env()?)?;
        TiltedDensity::new(
            prior,
            self.strikes.clone(),
            self.coefficients.iter().map(|c| c.ln_alpha).collect(),
            self.coefficients.iter().map(|c| c.beta).collect(),
            self.market.forward,
            self.quad(),
        )
    }
}

pub fn build_prior(arg: &PriorArg, env: &MarketEnv) -> Result<Prior> {
    match arg {
        PriorArg::Lebesgue => Ok(Prior::Lebesgue),
        PriorArg::Model(p) => as_prior(p, env, &PriorOptions::default()),
    }
}

pub fn price_rows(q: &TiltedDensity, strikes: &[f64]) -> Result<Vec<PriceRow>> {
    strikes
        .iter()
        .map(|&k| Ok(PriceRow { strike: k, call: sig10(q.price_call(k)?), digital: sig10(q.price_digital(k)?) }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(sig10(9.947645711), 9.947645711);
        assert_eq!(sig10(9.94764571123456), 9.947645711);
        assert_eq!(sig10(-0.000123456789012), -0.0001234567890);
        assert_eq!(sig10(0.0), 0.0);
    }
}
