//! Black-Scholes closed forms on the forward.

use crate::special::normal_cdf;

/// Undiscounted call `E[(S - K)^+]` for a lognormal forward.
pub fn black_call(forward: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    if strike <= 0.0 {
        return forward - strike;
    }
    let sd = vol * maturity.sqrt();
    if sd <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    forward * normal_cdf(d1) - strike * normal_cdf(d2)
}

/// Undiscounted digital `P(S > K)`.
pub fn black_digital(forward: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    if strike <= 0.0 {
        return 1.0;
    }
    let sd = vol * maturity.sqrt();
    let d2 = (forward / strike).ln() / sd - 0.5 * sd;
    normal_cdf(d2)
}

/// d(call)/d(vol).
pub fn black_vega(forward: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    let sq = maturity.sqrt();
    let sd = vol * sq;
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    forward * crate::special::normal_pdf(d1) * sq
}
