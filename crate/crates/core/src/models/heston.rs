//! Heston characteristic function, written with the negated square root so
//! that the complex logarithm stays on its principal branch.

use num_complex::Complex64;

use super::{MarketEnv, ModelParams};

pub(crate) fn charfn(model: &ModelParams, env: &MarketEnv, u: Complex64) -> Complex64 {
    let ModelParams::Heston { kappa, theta, rho, sigma, v0, lambda } = *model else {
        unreachable!("heston::charfn called with {model:?}")
    };
    let i = Complex64::i();
    let t = env.maturity;
    let b = kappa + lambda;
    let s2 = sigma * sigma;
    let rsu = i * rho * sigma * u;
    let d2 = -((rsu - b) * (rsu - b) + s2 * (i * u + u * u)).sqrt();
    let num = b - rsu + d2;
    let g = num / (b - rsu - d2);
    let e = (d2 * t).exp();
    let c = (env.rate - env.dividend) * i * u * t + kappa * theta / s2 * (num * t - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
    let d = num / s2 * (1.0 - e) / (1.0 - g * e);
    (c + d * v0 + i * u * env.spot.ln()).exp()
}
