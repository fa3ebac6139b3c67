//! Piecewise-tilted densities `q(S) = alpha_i e^{beta_i S} p(S)` and the
//! pricing and entropy functionals evaluated against them.

use crate::error::{Error, Result};
use crate::prior::{Prior, PriorDensity};
use crate::quadrature::{integrate, integrate_lower_tail, integrate_partition, QuadratureSpec, TailRule};

/// Weights accepted by [`integrate_against`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    S,
    S2,
    LnS,
    Exp(f64),
    SExp(f64),
    S2Exp(f64),
}

impl Weight {
    fn eval(&self, s: f64) -> f64 {
        match *self {
            Weight::One => 1.0,
            Weight::S => s,
            Weight::S2 => s * s,
            Weight::LnS => s.ln(),
            Weight::Exp(b) => (b * s).exp(),
            Weight::SExp(b) => s * (b * s).exp(),
            Weight::S2Exp(b) => s * s * (b * s).exp(),
        }
    }

    fn beta(&self) -> Option<f64> {
        match *self {
            Weight::Exp(b) | Weight::SExp(b) | Weight::S2Exp(b) => Some(b),
            _ => None,
        }
    }
}

/// `∫_a^b w(S) p(S) dS` against a prior.
pub fn integrate_against(prior: &Prior, a: f64, b: f64, weight: Weight, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a < b) || a < 0.0 {
        return Err(Error::InvalidInput(format!("need 0 <= a < b, got [{a}, {b}]")));
    }
    if b.is_infinite() {
        match weight.beta() {
            Some(beta) if beta >= prior.moment_bound() => {
                return Err(Error::Domain(format!(
                    "exponential weight with beta = {beta} >= beta* = {}",
                    prior.moment_bound()
                )))
            }
            None if prior.is_lebesgue() => {
                return Err(Error::Domain("weight is not integrable against Lebesgue measure on an unbounded range".into()))
            }
            _ => {}
        }
    }
    match prior {
        Prior::Lebesgue => {
            let scale = weight.beta().map(|b| 1.0 / b.abs()).unwrap_or(1.0);
            lebesgue_integral(&|s| weight.eval(s), a, b, scale, a.max(1.0) * 1e-6, spec)
        }
        Prior::Density(p) => density_integral(p.as_ref(), &|s, dens| weight.eval(s) * dens, a, b, spec),
    }
}

/// `∫_a^inf f` with `S = a + scale t/(1-t)`.
fn scaled_upper_tail<F: Fn(f64) -> f64>(f: &F, a: f64, scale: f64, spec: &QuadratureSpec) -> Result<f64> {
    if let TailRule::Truncate { width } = spec.tail {
        return Ok(integrate(f, a, a + width, spec)?.value);
    }
    let g = |t: f64| {
        let om = 1.0 - t;
        let s = a + scale * t / om;
        if !s.is_finite() {
            return 0.0;
        }
        let v = f(s) * scale / (om * om);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let cuts = [0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 0.99, 1.0];
    Ok(integrate_partition(&g, &cuts, spec)?.value)
}

/// `∫_a^b f(S) dS`, splitting off `[0, eps]` under `S = e^y` when `a = 0`
/// so that integrable log singularities at the origin are resolved.
fn lebesgue_integral<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tail_scale: f64,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut total = 0.0;
    let mut start = a;
    if a == 0.0 {
        let cut = eps.min(b);
        total += integrate_lower_tail(
            |y: f64| {
                let s = y.exp();
                let v = f(s) * s;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            cut.ln(),
            spec,
        )?
        .value;
        start = cut;
    }
    if b.is_infinite() {
        total += scaled_upper_tail(f, start, tail_scale, spec)?;
    } else if b > start {
        // a few interior points help the adaptive driver find the bulk
        let pts: Vec<f64> = (0..=8).map(|k| start + (b - start) * k as f64 / 8.0).collect();
        total += integrate_partition(f, &pts, spec)?.value;
    }
    Ok(total)
}

/// `∫_a^b f(S, p(S)) dS` for a density prior, computed in log price over
/// the part of `[a, b]` inside the prior's support.
fn density_integral<F: Fn(f64, f64) -> f64>(
    p: &dyn PriorDensity,
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (x_lo, x_hi) = p.log_support();
    let xa = if a > 0.0 { a.ln().max(x_lo) } else { x_lo };
    let xb = if b.is_finite() { b.ln().min(x_hi) } else { x_hi };
    if !(xb > xa) {
        return Ok(0.0);
    }
    let (_, sd) = p.log_moments();
    let pieces = (((xb - xa) / (0.5 * sd)).ceil() as usize).clamp(1, 400);
    let mut pts: Vec<f64> = (0..=pieces).map(|k| xa + (xb - xa) * k as f64 / pieces as f64).collect();
    pts.extend(p.breakpoints().into_iter().filter(|&e| e > xa && e < xb));
    pts.sort_by(f64::total_cmp);
    let g = |x: f64| {
        let s = x.exp();
        // p(S) dS = p~(x) dx, so pass p(S) and multiply by the Jacobian S
        let dens = p.log_price_pdf(x);
        if dens <= 0.0 {
            return 0.0;
        }
        let v = f(s, dens / s) * s;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    Ok(integrate_partition(&g, &pts, spec)?.value)
}

/// Fitted density: prior tilted by `alpha_i e^{beta_i S}` on each bucket
/// `[K_i, K_{i+1})`, `K_0 = 0`, `K_{n+1} = inf`.
#[derive(Debug, Clone)]
pub struct TiltedDensity {
    prior: Prior,
    strikes: Vec<f64>,
    ln_alpha: Vec<f64>,
    beta: Vec<f64>,
    forward: f64,
    spec: QuadratureSpec,
}

impl TiltedDensity {
    pub fn new(
        prior: Prior,
        strikes: Vec<f64>,
        ln_alpha: Vec<f64>,
        beta: Vec<f64>,
        forward: f64,
        spec: QuadratureSpec,
    ) -> Result<Self> {
        let n = strikes.len();
        if ln_alpha.len() != n + 1 || beta.len() != n + 1 {
            return Err(Error::InvalidInput(format!(
                "{n} strikes need {} coefficients, got {} alphas and {} betas",
                n + 1,
                ln_alpha.len(),
                beta.len()
            )));
        }
        if strikes.windows(2).any(|w| !(w[1] > w[0])) || strikes.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidInput("strikes must be positive and increasing".into()));
        }
        if ln_alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        let last = beta[n];
        if last >= prior.moment_bound() {
            return Err(Error::Domain(format!(
                "beta_n = {last} must stay below beta* = {}",
                prior.moment_bound()
            )));
        }
        Ok(Self { prior, strikes, ln_alpha, beta, forward, spec })
    }

    /// Builds from `alpha` rather than `ln alpha`.
    pub fn from_alpha(
        prior: Prior,
        strikes: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        forward: f64,
        spec: QuadratureSpec,
    ) -> Result<Self> {
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidInput("alpha must be positive".into()));
        }
        Self::new(prior, strikes, alpha.iter().map(|a| a.ln()).collect(), beta, forward, spec)
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.ln_alpha.iter().map(|l| l.exp()).collect()
    }

    pub fn ln_alpha(&self) -> &[f64] {
        &self.ln_alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn with_spec(mut self, spec: QuadratureSpec) -> Self {
        self.spec = spec;
        self
    }

    fn n(&self) -> usize {
        self.strikes.len()
    }

    fn strike(&self, i: usize) -> f64 {
        match i {
            0 => 0.0,
            i if i <= self.n() => self.strikes[i - 1],
            _ => f64::INFINITY,
        }
    }

    /// Bucket containing `s`: the `i` with `K_i <= s < K_{i+1}`.
    pub fn bucket_of(&self, s: f64) -> usize {
        self.strikes.partition_point(|&k| k <= s)
    }

    /// Log of the tilt `g = q/p` at `s` using bucket `i`'s coefficients.
    pub fn ln_tilt(&self, i: usize, s: f64) -> f64 {
        self.ln_alpha[i] + self.beta[i] * s
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if !(s >= 0.0) {
            return 0.0;
        }
        let p = self.prior.pdf(s);
        if p == 0.0 {
            return 0.0;
        }
        self.ln_tilt(self.bucket_of(s), s).exp() * p
    }

    /// `∫_a^b f(i, S, q(S)) dS`, bucket by bucket.
    fn integrate_with<F: Fn(usize, f64, f64) -> f64>(&self, a: f64, b: f64, f: F) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..=self.n() {
            let lo = self.strike(i).max(a);
            let hi = self.strike(i + 1).min(b);
            if !(hi > lo) {
                continue;
            }
            let (la, be) = (self.ln_alpha[i], self.beta[i]);
            let v = match &self.prior {
                Prior::Lebesgue => {
                    if hi.is_infinite() && be >= 0.0 {
                        return Err(Error::Domain(format!("beta_{i} = {be} >= 0 on the unbounded bucket")).in_bucket(i));
                    }
                    let g = |s: f64| {
                        let q = (la + be * s).exp();
                        f(i, s, q)
                    };
                    let scale = if be != 0.0 { 1.0 / be.abs() } else { 1.0 };
                    lebesgue_integral(&g, lo, hi, scale, 1e-6 * self.forward, &self.spec)
                }
                Prior::Density(p) => {
                    let g = |s: f64, dens: f64| {
                        let q = (la + be * s).exp() * dens;
                        f(i, s, q)
                    };
                    density_integral(p.as_ref(), &g, lo, hi, &self.spec)
                }
            };
            total += v.map_err(|e| e.in_bucket(i))?;
        }
        Ok(total)
    }

    /// `∫ w(S) q(S) dS` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, weight: Weight) -> Result<f64> {
        self.integrate_with(a, b, |_, s, q| weight.eval(s) * q)
    }

    /// Undiscounted call `∫_K^inf (S - K) q(S) dS`.
    pub fn price_call(&self, k: f64) -> Result<f64> {
        if !(k >= 0.0) {
            return Err(Error::InvalidInput(format!("strike must be >= 0, got {k}")));
        }
        self.integrate_with(k, f64::INFINITY, |_, s, q| (s - k) * q)
    }

    /// `∫_K^inf q(S) dS`.
    pub fn price_digital(&self, k: f64) -> Result<f64> {
        if !(k >= 0.0) {
            return Err(Error::InvalidInput(format!("strike must be >= 0, got {k}")));
        }
        self.integrate_with(k, f64::INFINITY, |_, _, q| q)
    }

    pub fn mass(&self) -> Result<f64> {
        self.price_digital(0.0)
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate(0.0, f64::INFINITY, Weight::S)
    }

    /// Differential entropy `-∫ q ln q`.
    pub fn entropy(&self) -> Result<f64> {
        self.integrate_with(0.0, f64::INFINITY, |_, _, q| if q > 0.0 { -q * q.ln() } else { 0.0 })
    }

    /// `∫ q ln(q/p)`, with `ln(q/p) = ln alpha_i + beta_i S`.
    pub fn relative_entropy(&self) -> Result<f64> {
        self.integrate_with(0.0, f64::INFINITY, |i, s, q| q * self.ln_tilt(i, s))
    }

    /// Log contract `E[ln S]`.
    pub fn log_contract(&self) -> Result<f64> {
        self.integrate_with(0.0, f64::INFINITY, |_, s, q| q * s.ln())
    }

    /// Entropy `-∫ q~ ln q~ dx` of the log-price density `q~(x) = S q(S)`.
    pub fn log_density_entropy(&self) -> Result<f64> {
        self.integrate_with(0.0, f64::INFINITY, |_, s, q| {
            let qx = s * q;
            if qx > 0.0 {
                -q * qx.ln()
            } else {
                0.0
            }
        })
    }

    /// Jump of `ln g` across each interior strike: `ln g(K_i+) - ln g(K_i-)`.
    pub fn tilt_jumps(&self) -> Vec<f64> {
        (1..=self.n())
            .map(|i| {
                let k = self.strike(i);
                self.ln_tilt(i, k) - self.ln_tilt(i - 1, k)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::LognormalPrior;
    use approx::assert_relative_eq;

    fn exponential(lambda: f64) -> TiltedDensity {
        TiltedDensity::new(Prior::Lebesgue, vec![], vec![lambda.ln()], vec![-lambda], 1.0 / lambda, QuadratureSpec::default())
            .unwrap()
    }

    #[test]
    fn exponential_med() {
        let q = exponential(0.01);
        assert_relative_eq!(q.pdf(0.0), 0.01, max_relative = 1e-15);
        assert_relative_eq!(q.mass().unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(q.mean().unwrap(), 100.0, max_relative = 1e-10);
        assert_relative_eq!(q.price_call(0.0).unwrap(), 100.0, max_relative = 1e-10);
        // entropy of Exp(lambda) is 1 - ln lambda
        assert_relative_eq!(q.entropy().unwrap(), 1.0 - 0.01f64.ln(), max_relative = 1e-10);
        // E[ln S] = -gamma - ln lambda
        let expected = -crate::special::EULER_GAMMA - 0.01f64.ln();
        assert_relative_eq!(q.log_contract().unwrap(), expected, max_relative = 1e-10);
    }

    #[test]
    fn zero_tilt_returns_the_prior() {
        let prior = Prior::density(LognormalPrior::from_forward(100.0, 0.25, 1.0).unwrap());
        let q = TiltedDensity::new(prior.clone(), vec![90.0, 110.0], vec![0.0; 3], vec![0.0; 3], 100.0, QuadratureSpec::default())
            .unwrap();
        for s in [50.0, 90.0, 100.0, 130.0] {
            assert_eq!(q.pdf(s), prior.pdf(s));
        }
        assert!(q.relative_entropy().unwrap().abs() < 1e-14);
        assert_relative_eq!(q.mean().unwrap(), 100.0, max_relative = 1e-10);
    }

    #[test]
    fn uniform_density_has_negative_entropy() {
        // uniform on [0, 1/u] with u = 4
        let u: f64 = 4.0;
        let q = TiltedDensity::new(Prior::Lebesgue, vec![1.0 / u], vec![u.ln(), -700.0], vec![0.0, -1.0], 0.125, QuadratureSpec::default())
            .unwrap();
        assert_relative_eq!(q.entropy().unwrap(), -u.ln(), max_relative = 1e-10);
    }

    #[test]
    fn lognormal_mean_against_weight() {
        let prior = Prior::density(LognormalPrior::new(0.0, 1.0).unwrap());
        let spec = QuadratureSpec::default();
        let m = integrate_against(&prior, 0.0, f64::INFINITY, Weight::S, &spec).unwrap();
        assert_relative_eq!(m, 0.5f64.exp(), max_relative = 1e-9);
        let one = integrate_against(&prior, 0.0, f64::INFINITY, Weight::One, &spec).unwrap();
        assert_relative_eq!(one, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn lebesgue_interval_length() {
        let v = integrate_against(&Prior::Lebesgue, 80.0, 100.0, Weight::Exp(0.0), &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(v, 20.0, max_relative = 1e-14);
    }

    #[test]
    fn exponential_weight_beyond_bound_is_rejected() {
        let err = integrate_against(&Prior::Lebesgue, 100.0, f64::INFINITY, Weight::Exp(1e-3), &QuadratureSpec::default());
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn bucket_lookup_is_right_continuous() {
        let q = TiltedDensity::new(Prior::Lebesgue, vec![1.0, 2.0], vec![0.0; 3], vec![0.0, 0.0, -1.0], 1.0, QuadratureSpec::default())
            .unwrap();
        assert_eq!(q.bucket_of(0.5), 0);
        assert_eq!(q.bucket_of(1.0), 1);
        assert_eq!(q.bucket_of(2.0), 2);
    }
}
