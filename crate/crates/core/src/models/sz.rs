//! Schobel-Zhu characteristic function.
//!
//! With `phi(u) = exp(i u (ln S0 + (r - d) T) + A + B v0 + C v0^2)` the
//! coefficients solve, in time to maturity,
//!
//! ```text
//! C' = 2 sigma^2 C^2 - 2 (kappa - i u rho sigma) C - (u^2 + i u) / 2
//! B' = 2 kappa theta C - (kappa - i u rho sigma) B + 2 sigma^2 B C
//! A' = kappa theta B + sigma^2 B^2 / 2 + sigma^2 C
//! ```
//!
//! from zero. Substituting `C = -w' / (2 sigma^2 w)` linearises the system
//! and gives elementary closed forms in `cosh(D tau)` and `sinh(D tau)`,
//! written here in terms of `e^{-D tau}` with `Re D >= 0`. An adaptive
//! Dormand-Prince 5(4) integration of the same system covers the
//! degenerate `D = 0` point and serves as a check on the closed form.

use num_complex::Complex64;

use super::{MarketEnv, ModelParams};

type State = [Complex64; 3];

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for j in 0..3 {
            out[j] += h * c * k[j];
        }
    }
    out
}

/// Integrates `y' = f(y)` from 0 to `t` with `y(0) = 0`.
fn dopri<F: Fn(&State) -> State>(f: F, t: f64, rtol: f64, atol: f64) -> State {
    let zero = Complex64::new(0.0, 0.0);
    let mut y: State = [zero; 3];
    let mut k1 = f(&y);
    let scale0 = k1.iter().map(|k| k.norm()).fold(0.0, f64::max);
    let mut h = if scale0 > 0.0 { (0.01 / scale0).min(t) } else { t };
    let mut s = 0.0;
    let mut steps = 0usize;
    while s < t {
        if s + h > t {
            h = t - s;
        }
        let k2 = f(&axpy(&y, &[(A21, &k1)], h));
        let k3 = f(&axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(&axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(&axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(&y5);
        let mut err: f64 = 0.0;
        for j in 0..3 {
            let e = h * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
            let sc = atol + rtol * y[j].norm().max(y5[j].norm());
            err = err.max(e.norm() / sc);
        }
        steps += 1;
        if err <= 1.0 || h < 1e-14 * t || steps > 200_000 {
            s += h;
            y = y5;
            k1 = k7;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

pub(crate) fn charfn(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Complex64 {
    let ModelParams::SchobelZhu { kappa, theta, rho, sigma, v0 } = *model else {
        unreachable!("sz::charfn called with {model:?}")
    };
    let i = Complex64::i();
    let t = env.maturity;
    let s2 = sigma * sigma;
    let b = kappa - i * u * rho * sigma;
    let s = 0.5 * (u * u + i * u);
    let d = (b * b + 2.0 * s2 * s).sqrt();
    if d.norm() < 1e-8 * (1.0 + b.norm()) {
        return charfn_ode(model, env, u);
    }
    let beta = b / d;
    let x = d * t;
    let e = (-x).exp();
    let e2 = e * e;
    let den = (1.0 + beta) + (1.0 - beta) * e2;
    let h1 = (1.0 - e2) / den;
    let h2 = (1.0 - e) * (1.0 - e) / den;
    // ln(cosh x + beta sinh x), continuous in u
    let ln_w = if (1.0 + beta).norm() > 1e-6 {
        let g = (beta - 1.0) / (beta + 1.0);
        x + ((1.0 - g * e2) / (1.0 - g)).ln()
    } else {
        x + (0.5 * den).ln()
    };
    let k = -2.0 * kappa * theta * s / (d * d);
    let c_coef = -s / d * h1;
    let b_coef = k * h2;
    let kt = kappa * theta * k / d;
    let a_coef = -0.5 * ln_w + 0.5 * b * t - 0.5 * kt * (h1 - x) - kt * beta * h2;
    let drift = i * u * (env.spot.ln() + (env.rate - env.dividend) * t);
    (drift + a_coef + b_coef * v0 + c_coef * v0 * v0).exp()
}

/// The same characteristic function by direct integration of the Riccati
/// system.
pub(crate) fn charfn_ode(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Complex64 {
    let ModelParams::SchobelZhu { kappa, theta, rho, sigma, v0 } = *model else {
        unreachable!("sz::charfn_ode called with {model:?}")
    };
    let i = Complex64::i();
    let s2 = sigma * sigma;
    let damp = kappa - i * u * rho * sigma;
    let forcing = -0.5 * (u * u + i * u);
    let rhs = |y: &State| -> State {
        let (b, c) = (y[1], y[2]);
        [
            kappa * theta * b + 0.5 * s2 * b * b + s2 * c,
            2.0 * kappa * theta * c - damp * b + 2.0 * s2 * b * c,
            2.0 * s2 * c * c - 2.0 * damp * c + forcing,
        ]
    };
    let y = dopri(rhs, env.maturity, 1e-12, 1e-14);
    let drift = i * u * (env.spot.ln() + (env.rate - env.dividend) * env.maturity);
    (drift + y[0] + y[1] * v0 + y[2] * v0 * v0).exp()
}
