//! Fair variance swap rates from fitted densities.
//!
//! For a diffusion, `sigma^2_fair = (2/T) E[int mu dt] + (2/T) ln S(0) -
//! (2/T) E[ln S(T)]`. The log contract `E[ln S(T)]` is computed either
//! directly or as the entropy difference `H(q) - H~(q~)` between the price
//! density and the log-price density (both with the `-int f ln f` sign).

use serde::Serialize;

use crate::density::TiltedDensity;
use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::special::EULER_GAMMA;

pub use crate::special::expint_ei;

/// `(2/T) E[int_0^T mu(t) dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftSpec {
    pub annualised_drift: f64,
}

impl DriftSpec {
    /// Deterministic risk-neutral drift `2 (r - d)`.
    pub fn risk_neutral(rate: f64, dividend: f64) -> Self {
        Self { annualised_drift: 2.0 * (rate - dividend) }
    }
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { annualised_drift: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarSwapResult {
    /// `sigma^2_fair` from the log contract.
    pub variance: f64,
    pub vol: f64,
    /// `E[ln S(T)]`.
    pub log_contract: f64,
    /// `H(q) = -int q ln q dS`.
    pub entropy: f64,
    /// `H~(q~) = -int q~ ln q~ dx`.
    pub log_entropy: f64,
    /// `sigma^2_fair` with `E[ln S(T)] = H(q) - H~(q~)`.
    pub variance_entropy_route: f64,
}

/// Business days per year, for converting to per-day quotes.
pub const BUSINESS_DAYS: f64 = 252.0;

/// `E[ln S(T)]` by quadrature.
pub fn log_contract(q: &TiltedDensity) -> Result<f64> {
    q.log_contract()
}

/// `int_0^S e^{beta u} ln u du` by its power series, for `|beta S| < 1`:
/// `ln S (e^{bS} - 1)/b - sum_{k>=1} b^{k-1} S^k / (k k!)`.
fn anchored_primitive(beta: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let t = beta * s;
    let expm1_ratio = if beta == 0.0 { s } else { t.exp_m1() / beta };
    let mut term = s;
    let mut sum = s;
    for k in 2..60 {
        let kf = k as f64;
        term *= t / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    s.ln() * expm1_ratio - sum
}

/// `[e^{beta S} ln S - Ei(beta S)] / beta`, a primitive of `e^{beta u} ln u`
/// for `beta != 0` that vanishes at `+inf` when `beta < 0`. At `S = 0` it
/// takes the limit `-(gamma + ln|beta|) / beta`.
fn ei_primitive(beta: f64, s: f64) -> Result<f64> {
    let offset = (EULER_GAMMA + beta.abs().ln()) / beta;
    if s.is_infinite() {
        if !(beta < 0.0) {
            return Err(Error::Domain(format!("log contract diverges for beta_n = {beta} >= 0")));
        }
        return Ok(0.0);
    }
    let t = beta * s;
    if t.abs() < 1.0 {
        return Ok(anchored_primitive(beta, s) - offset);
    }
    Ok((t.exp() * s.ln() - expint_ei(t)?) / beta)
}

/// `int_a^b e^{beta u} ln u du`. Buckets inside the series region use the
/// primitive anchored at zero; anywhere else the anchor constant would
/// cancel catastrophically against large `alpha`, so the unanchored form
/// is differenced instead.
fn bucket_log_integral(beta: f64, a: f64, b: f64) -> Result<f64> {
    if b.is_finite() && (beta * b).abs() < 1.0 {
        return Ok(anchored_primitive(beta, b) - anchored_primitive(beta, a));
    }
    Ok(ei_primitive(beta, b)? - ei_primitive(beta, a)?)
}

/// `E[ln S(T)]` for a maximum entropy density (Lebesgue prior) through the
/// exponential integral.
pub fn log_contract_med_closed(q: &TiltedDensity) -> Result<f64> {
    if !matches!(q.prior(), Prior::Lebesgue) {
        return Err(Error::InvalidInput("closed-form log contract needs the Lebesgue prior".into()));
    }
    let ks = q.strikes();
    let n = ks.len();
    let edge = |i: usize| match i {
        0 => 0.0,
        i if i <= n => ks[i - 1],
        _ => f64::INFINITY,
    };
    let mut total = 0.0;
    for (i, (&la, &b)) in q.ln_alpha().iter().zip(q.beta()).enumerate() {
        let integral = bucket_log_integral(b, edge(i), edge(i + 1)).map_err(|e| e.in_bucket(i))?;
        total += la.exp() * integral;
    }
    Ok(total)
}

/// Fair variance swap rate by both routes.
pub fn fair_rate(q: &TiltedDensity, drift: DriftSpec, spot: f64, maturity: f64) -> Result<VarSwapResult> {
    if !(spot > 0.0 && maturity > 0.0) {
        return Err(Error::InvalidInput(format!("need spot > 0 and maturity > 0, got {spot}, {maturity}")));
    }
    let log_contract = match q.prior() {
        Prior::Lebesgue => log_contract_med_closed(q)?,
        Prior::Density(_) => q.log_contract()?,
    };
    let entropy = q.entropy()?;
    let log_entropy = q.log_density_entropy()?;
    let rate = |el: f64| drift.annualised_drift + 2.0 / maturity * (spot.ln() - el);
    let variance = rate(log_contract);
    let variance_entropy_route = rate(entropy - log_entropy);
    if (variance - variance_entropy_route).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "variance swap routes disagree: log contract {variance}, entropy {variance_entropy_route}"
        )));
    }
    if variance < 0.0 {
        return Err(Error::Numerical(format!("negative fair variance {variance}")));
    }
    Ok(VarSwapResult { variance, vol: variance.sqrt(), log_contract, entropy, log_entropy, variance_entropy_route })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::LognormalPrior;
    use crate::quadrature::QuadratureSpec;
    use approx::assert_relative_eq;

    fn exponential(lambda: f64) -> TiltedDensity {
        TiltedDensity::new(Prior::Lebesgue, vec![], vec![lambda.ln()], vec![-lambda], 1.0 / lambda, QuadratureSpec::default())
            .unwrap()
    }

    #[test]
    fn exponential_log_contract() {
        for lambda in [0.01, 0.5, 3.0] {
            let q = exponential(lambda);
            let exact = -EULER_GAMMA + (1.0 / lambda).ln();
            assert_relative_eq!(log_contract_med_closed(&q).unwrap(), exact, epsilon = 1e-12);
            assert_relative_eq!(q.log_contract().unwrap(), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn exponential_entropy_identity() {
        let q = exponential(0.02);
        let h = q.entropy().unwrap();
        let ht = q.log_density_entropy().unwrap();
        assert_relative_eq!(h - ht, -EULER_GAMMA + 50f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn bucket_integral_is_continuous_in_beta() {
        for (a, b) in [(0.0, 0.5), (20.0, 40.0), (100.0, 140.0)] {
            let zero = bucket_log_integral(0.0, a, b).unwrap();
            let exact = |s: f64| if s == 0.0 { 0.0 } else { s * s.ln() - s };
            assert_relative_eq!(zero, exact(b) - exact(a), max_relative = 1e-12);
            for eps in [1e-9, -1e-9] {
                assert_relative_eq!(bucket_log_integral(eps, a, b).unwrap(), zero, max_relative = 1e-6);
            }
            // both sides of the series switch
            let beta = 1.0 / b;
            let lo = bucket_log_integral(beta * (1.0 - 1e-9), a, b).unwrap();
            let hi = bucket_log_integral(beta * (1.0 + 1e-9), a, b).unwrap();
            assert_relative_eq!(lo, hi, max_relative = 1e-7);
        }
    }

    #[test]
    fn steep_far_bucket_keeps_its_digits() {
        // a thin far bucket with alpha near e^85: the anchored primitive loses
        // everything here
        let chain = crate::chain::OptionChain::new(
            1.0,
            0.0,
            0.0,
            100.0,
            vec![140.0, 150.0],
            vec![
                crate::models::black::black_call(100.0, 140.0, 0.15, 1.0),
                crate::models::black::black_call(100.0, 150.0, 0.15, 1.0),
            ],
        )
        .unwrap();
        let q = crate::mred::minimize(&Prior::Lebesgue, &chain, &QuadratureSpec::default()).unwrap().density;
        assert!(q.ln_alpha()[1] > 50.0);
        assert_relative_eq!(log_contract_med_closed(&q).unwrap(), q.log_contract().unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn zero_beta_bucket_uses_s_ln_s() {
        // uniform on [0, 2) with mass 1/2, then e^{-(S-2)}/2 on [2, inf)
        let q = TiltedDensity::new(
            Prior::Lebesgue,
            vec![2.0],
            vec![0.25f64.ln(), (0.5f64).ln() + 2.0],
            vec![0.0, -1.0],
            2.0,
            QuadratureSpec::default(),
        )
        .unwrap();
        let closed = log_contract_med_closed(&q).unwrap();
        assert_relative_eq!(closed, q.log_contract().unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn positive_last_tilt_is_rejected() {
        let q = TiltedDensity::new(Prior::Lebesgue, vec![], vec![0.0], vec![-1.0], 1.0, QuadratureSpec::default()).unwrap();
        assert!(log_contract_med_closed(&q).is_ok());
        assert!(matches!(bucket_log_integral(0.1, 5.0, f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn lognormal_fair_rate_is_its_variance() {
        let sigma = 0.25;
        let prior = Prior::density(LognormalPrior::from_forward(100.0, sigma, 1.0).unwrap());
        let q = TiltedDensity::new(prior, vec![], vec![0.0], vec![0.0], 100.0, QuadratureSpec::default()).unwrap();
        let r = fair_rate(&q, DriftSpec::default(), 100.0, 1.0).unwrap();
        assert_relative_eq!(r.log_contract, 100f64.ln() - 0.5 * sigma * sigma, epsilon = 1e-10);
        assert_relative_eq!(r.variance, sigma * sigma, epsilon = 1e-9);
        assert_relative_eq!(r.variance_entropy_route, sigma * sigma, epsilon = 1e-8);
        let gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln();
        assert_relative_eq!(r.log_entropy, gauss, epsilon = 1e-9);
    }
}
