//! Per-bucket exponential tilts.
//!
//! On each strike interval `[K_i, K_{i+1})` the fitted density is
//! `alpha_i e^{beta_i S} p(S)`. Given the bucket's mass and conditional mean,
//! `beta_i` solves `c_i'(beta) = mean` where `c_i` is the cumulant function
//! `ln ∫ e^{beta S} p(S) dS` over the bucket, and `alpha_i = mass e^{-c_i}`.

use crate::chain::OptionChain;
use crate::density::TiltedDensity;
use crate::error::{Error, Result};
use crate::prior::{Prior, PriorDensity};
use crate::quadrature::{gauss_legendre, QuadratureSpec};

/// Mass and conditional mean required of bucket `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketTarget {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
    pub mean: f64,
}

/// Value and first two derivatives of a bucket cumulant function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantEval {
    pub c: f64,
    pub dc: f64,
    pub d2c: f64,
}

/// Bucket targets implied by calls and a digital vector `D_1..D_n`.
pub fn bucket_targets(chain: &OptionChain, digitals: &[f64]) -> Result<Vec<BucketTarget>> {
    let n = chain.n();
    if digitals.len() != n {
        return Err(Error::InvalidInput(format!("expected {n} digitals, got {}", digitals.len())));
    }
    let d = |i: usize| match i {
        0 => 1.0,
        i if i <= n => digitals[i - 1],
        _ => 0.0,
    };
    (0..=n)
        .map(|i| {
            let lower = chain.strike(i);
            let upper = chain.strike(i + 1);
            let mass = d(i) - d(i + 1);
            if !(mass > 0.0) {
                return Err(Error::Arbitrage { index: i, reason: format!("bucket mass {mass} is not positive") });
            }
            // asset-or-nothing value of the bucket, relative to its lower strike
            let excess = if i == n {
                chain.call(i)
            } else {
                chain.call(i) - chain.call(i + 1) - (upper - lower) * d(i + 1)
            };
            let mean = lower + excess / mass;
            if !(mean > lower && mean < upper) {
                return Err(Error::Arbitrage {
                    index: i,
                    reason: format!("conditional mean {mean} outside ({lower}, {upper})"),
                });
            }
            Ok(BucketTarget { index: i, lower, upper, mass, mean })
        })
        .collect()
}

// Below this |beta (b - a)| the closed forms switch to their series.
const SERIES_CUTOFF: f64 = 0.25;

/// `ln(expm1(t)/t)`.
fn ln_expm1_ratio(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if t > 0.0 {
        t + (-(-t).exp_m1()).ln() - t.ln()
    } else {
        (-t.exp_m1()).ln() - (-t).ln()
    }
}

/// Mean of the uniform law on `[0, 1]` tilted by `e^{t u}`.
fn tilted_uniform_mean(t: f64) -> f64 {
    if t.abs() < SERIES_CUTOFF {
        let t2 = t * t;
        0.5 + t
            * (1.0 / 12.0
                + t2 * (-1.0 / 720.0
                    + t2 * (1.0 / 30240.0
                        + t2 * (-1.0 / 1_209_600.0 + t2 * (1.0 / 47_900_160.0 - t2 * 691.0 / 1_307_674_368_000.0)))))
    } else {
        1.0 / (-(-t).exp_m1()) - 1.0 / t
    }
}

/// Variance of the same law.
fn tilted_uniform_variance(t: f64) -> f64 {
    if t.abs() < SERIES_CUTOFF {
        let t2 = t * t;
        1.0 / 12.0
            + t2 * (-1.0 / 240.0
                + t2 * (1.0 / 6048.0
                    + t2 * (-1.0 / 172_800.0 + t2 * (1.0 / 5_322_240.0 - t2 * 7601.0 / 1_307_674_368_000.0))))
    } else {
        let sh = (0.5 * t).sinh();
        1.0 / (t * t) - 1.0 / (4.0 * sh * sh)
    }
}

/// Closed-form cumulant of Lebesgue measure on `[lower, upper)`.
pub fn lebesgue_cumulant(lower: f64, upper: f64, beta: f64) -> Result<CumulantEval> {
    if !(upper > lower) {
        return Err(Error::InvalidInput(format!("empty bucket [{lower}, {upper})")));
    }
    if upper.is_infinite() {
        if !(beta < 0.0) {
            return Err(Error::Domain(format!(
                "beta = {beta} on an unbounded Lebesgue bucket; the integral needs beta < beta* = 0"
            )));
        }
        return Ok(CumulantEval {
            c: beta * lower - (-beta).ln(),
            dc: lower - 1.0 / beta,
            d2c: 1.0 / (beta * beta),
        });
    }
    let w = upper - lower;
    let t = beta * w;
    Ok(CumulantEval {
        c: beta * lower + w.ln() + ln_expm1_ratio(t),
        dc: lower + w * tilted_uniform_mean(t),
        d2c: w * w * tilted_uniform_variance(t),
    })
}

/// A prior restricted to one bucket, discretised once by Gauss-Legendre
/// panels in log price so that every cumulant evaluation sums over the same
/// nodes. The resulting `c`, `c'`, `c''` are exactly consistent with each
/// other and smooth in `beta`.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    nodes: Vec<f64>,
    ln_weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn cumulant(&self, beta: f64) -> CumulantEval {
        let shift = self
            .nodes
            .iter()
            .zip(&self.ln_weights)
            .map(|(s, lw)| lw + beta * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut first = 0.0;
        for (s, lw) in self.nodes.iter().zip(&self.ln_weights) {
            let e = (lw + beta * s - shift).exp();
            sum += e;
            first += e * s;
        }
        let mean = first / sum;
        let mut second = 0.0;
        for (s, lw) in self.nodes.iter().zip(&self.ln_weights) {
            let e = (lw + beta * s - shift).exp();
            second += e * (s - mean) * (s - mean);
        }
        CumulantEval { c: shift + sum.ln(), dc: mean, d2c: second / sum }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_node(&self) -> f64 {
        self.nodes.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max_node(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(f64::NAN)
    }
}

/// Log-price panel edges covering a prior's support.
fn panel_edges(prior: &dyn PriorDensity, spec: &QuadratureSpec) -> Vec<f64> {
    let (lo, hi) = prior.log_support();
    let (_, sd) = prior.log_moments();
    let h = spec.panel_width.min(0.25 * sd);
    let count = ((hi - lo) / h).ceil().max(1.0) as usize;
    let h = (hi - lo) / count as f64;
    (0..=count).map(|k| if k == count { hi } else { lo + h * k as f64 }).collect()
}

fn discretise(prior: &dyn PriorDensity, edges: &[f64], lower: f64, upper: f64) -> DiscreteMeasure {
    let (gl_x, gl_w) = gauss_legendre(16);
    let (x_lo, x_hi) = prior.log_support();
    let a = if lower > 0.0 { lower.ln().max(x_lo) } else { x_lo };
    let b = if upper.is_finite() { upper.ln().min(x_hi) } else { x_hi };
    let mut nodes = Vec::new();
    let mut ln_weights = Vec::new();
    if !(b > a) {
        return DiscreteMeasure { nodes, ln_weights };
    }
    let mut cuts = vec![a, b];
    cuts.extend(edges.iter().copied().filter(|&e| e > a && e < b));
    cuts.extend(prior.breakpoints().into_iter().filter(|&e| e > a && e < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for w in cuts.windows(2) {
        let (pa, pb) = (w[0], w[1]);
        let half = 0.5 * (pb - pa);
        let mid = 0.5 * (pa + pb);
        for (gx, gw) in gl_x.iter().zip(&gl_w) {
            let x = mid + half * gx;
            let dens = prior.log_price_pdf(x);
            if dens > 0.0 {
                // p(S) dS = p~(x) dx
                nodes.push(x.exp());
                ln_weights.push((gw * half).ln() + dens.ln());
            }
        }
    }
    DiscreteMeasure { nodes, ln_weights }
}

/// Cumulant machinery for one bucket.
#[derive(Debug, Clone)]
pub enum BucketKernel {
    Lebesgue { lower: f64, upper: f64 },
    Discrete { lower: f64, upper: f64, measure: DiscreteMeasure, beta_sup: f64 },
}

impl BucketKernel {
    pub fn new(prior: &Prior, lower: f64, upper: f64, spec: &QuadratureSpec) -> Result<Self> {
        match prior {
            Prior::Lebesgue => Ok(BucketKernel::Lebesgue { lower, upper }),
            Prior::Density(p) => {
                let edges = panel_edges(p.as_ref(), spec);
                Self::discrete(p.as_ref(), &edges, lower, upper)
            }
        }
    }

    fn discrete(p: &dyn PriorDensity, edges: &[f64], lower: f64, upper: f64) -> Result<Self> {
        let measure = discretise(p, edges, lower, upper);
        if measure.len() < 2 {
            return Err(Error::Domain(format!(
                "bucket [{lower}, {upper}) has no prior mass inside the support {:?}",
                p.support_hint()
            )));
        }
        let beta_sup = if upper.is_infinite() { p.moment_bound() } else { f64::INFINITY };
        Ok(BucketKernel::Discrete { lower, upper, measure, beta_sup })
    }

    pub fn lower(&self) -> f64 {
        match self {
            BucketKernel::Lebesgue { lower, .. } | BucketKernel::Discrete { lower, .. } => *lower,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            BucketKernel::Lebesgue { upper, .. } | BucketKernel::Discrete { upper, .. } => *upper,
        }
    }

    /// Open upper end of the effective domain of the cumulant.
    pub fn beta_sup(&self) -> f64 {
        match self {
            BucketKernel::Lebesgue { upper, .. } => {
                if upper.is_infinite() {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BucketKernel::Discrete { beta_sup, .. } => *beta_sup,
        }
    }

    pub fn cumulant(&self, beta: f64) -> Result<CumulantEval> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta = {beta}")));
        }
        let ce = match self {
            BucketKernel::Lebesgue { lower, upper } => lebesgue_cumulant(*lower, *upper, beta)?,
            BucketKernel::Discrete { measure, beta_sup, .. } => {
                if beta >= *beta_sup {
                    return Err(Error::Domain(format!(
                        "beta = {beta} is outside the effective domain (beta* = {beta_sup})"
                    )));
                }
                measure.cumulant(beta)
            }
        };
        debug_assert!(ce.d2c > 0.0 || !ce.d2c.is_finite(), "cumulant not strictly convex at beta = {beta}");
        Ok(ce)
    }

    /// Supremum of `c'` over the effective domain: the largest conditional
    /// mean this bucket can carry.
    pub fn mean_sup(&self) -> f64 {
        match self {
            BucketKernel::Lebesgue { upper, .. } => *upper,
            BucketKernel::Discrete { measure, beta_sup, .. } => {
                if beta_sup.is_finite() {
                    measure.cumulant(*beta_sup).dc
                } else {
                    measure.max_node()
                }
            }
        }
    }

    /// Infimum of `c'`.
    pub fn mean_inf(&self) -> f64 {
        match self {
            BucketKernel::Lebesgue { lower, .. } => *lower,
            BucketKernel::Discrete { measure, .. } => measure.min_node(),
        }
    }
}

/// Kernels for every bucket of a strike grid, built once per (prior, grid).
#[derive(Debug, Clone)]
pub struct BucketLayout {
    prior: Prior,
    strikes: Vec<f64>,
    kernels: Vec<BucketKernel>,
    spec: QuadratureSpec,
}

impl BucketLayout {
    pub fn new(prior: &Prior, strikes: &[f64], spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let n = strikes.len();
        let k = |i: usize| match i {
            0 => 0.0,
            i if i <= n => strikes[i - 1],
            _ => f64::INFINITY,
        };
        let kernels = match prior {
            Prior::Lebesgue => (0..=n).map(|i| BucketKernel::Lebesgue { lower: k(i), upper: k(i + 1) }).collect(),
            Prior::Density(p) => {
                let edges = panel_edges(p.as_ref(), spec);
                (0..=n)
                    .map(|i| BucketKernel::discrete(p.as_ref(), &edges, k(i), k(i + 1)).map_err(|e| e.in_bucket(i)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self { prior: prior.clone(), strikes: strikes.to_vec(), kernels, spec: *spec })
    }

    pub fn kernels(&self) -> &[BucketKernel] {
        &self.kernels
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Solves every bucket for the given targets.
    pub fn solve(&self, targets: &[BucketTarget]) -> Result<Vec<BucketSolution>> {
        if targets.len() != self.kernels.len() {
            return Err(Error::InvalidInput("target count does not match the bucket layout".into()));
        }
        self.kernels
            .iter()
            .zip(targets)
            .map(|(k, t)| solve_bucket(k, t).map_err(|e| e.in_bucket(t.index)))
            .collect()
    }

    /// Assembles the tilted density from solved buckets.
    pub fn density(&self, solutions: &[BucketSolution], forward: f64) -> Result<TiltedDensity> {
        TiltedDensity::new(
            self.prior.clone(),
            self.strikes.clone(),
            solutions.iter().map(|s| s.ln_alpha).collect(),
            solutions.iter().map(|s| s.beta).collect(),
            forward,
            self.spec,
        )
    }
}

/// Cumulant of `prior` over `[lower, upper)` at `beta`.
pub fn cumulant(prior: &Prior, lower: f64, upper: f64, beta: f64, spec: &QuadratureSpec) -> Result<CumulantEval> {
    BucketKernel::new(prior, lower, upper, spec)?.cumulant(beta)
}

/// Tolerance on `|c'(beta) - mean|`.
fn mean_tolerance(target: &BucketTarget) -> f64 {
    let scale = if target.upper.is_finite() { target.upper - target.lower } else { target.mean - target.lower };
    1e-12 * scale
}

const MAX_ROOT_ITERATIONS: usize = 100;

/// Solves `c'(beta) = mean` by Newton's method inside an expanding bracket.
pub fn solve_beta(kernel: &BucketKernel, target: &BucketTarget) -> Result<f64> {
    if !(target.mean > target.lower && target.mean < target.upper) {
        return Err(Error::Arbitrage {
            index: target.index,
            reason: format!("conditional mean {} outside ({}, {})", target.mean, target.lower, target.upper),
        });
    }
    if let BucketKernel::Lebesgue { lower, upper } = kernel {
        if upper.is_infinite() {
            // c' = K_n - 1/beta
            return Ok(-1.0 / (target.mean - lower));
        }
    }
    let tol = mean_tolerance(target);
    let m = target.mean;
    if m >= kernel.mean_sup() || m <= kernel.mean_inf() {
        return Err(Error::Domain(format!(
            "conditional mean {m} is outside the range ({}, {}) the prior can reach in this bucket",
            kernel.mean_inf(),
            kernel.mean_sup()
        )));
    }
    let width = if target.upper.is_finite() { target.upper - target.lower } else { m - target.lower };
    let beta_sup = kernel.beta_sup();

    let mut beta = 0.0_f64.min(beta_sup - 1.0 / width);
    let mut ce = kernel.cumulant(beta)?;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = beta_sup;
    let mut step = 1.0 / width;
    let mut expansions = 0;
    loop {
        let r = ce.dc - m;
        if r.abs() <= tol {
            return Ok(beta);
        }
        if r < 0.0 {
            lo = beta;
            if hi < beta_sup {
                break;
            }
            let mut cand = beta + step;
            if cand >= beta_sup {
                cand = beta + 0.5 * (beta_sup - beta);
                if !(cand > beta && cand < beta_sup) {
                    return Err(Error::Domain(format!(
                        "conditional mean {m} needs beta at or beyond beta* = {beta_sup}"
                    )));
                }
            }
            beta = cand;
        } else {
            hi = beta;
            if lo > f64::NEG_INFINITY {
                break;
            }
            beta -= step;
        }
        step *= 2.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::Convergence { solver: "beta bracket", iterations: expansions, residual: r });
        }
        ce = kernel.cumulant(beta)?;
    }

    for it in 0..MAX_ROOT_ITERATIONS {
        let r = ce.dc - m;
        if r.abs() <= tol {
            return Ok(beta);
        }
        if r < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let mut next = beta - r / ce.d2c;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if !(next > lo && next < hi) {
            // bracket exhausted at floating-point resolution
            if r.abs() <= 100.0 * tol {
                return Ok(beta);
            }
            return Err(Error::Convergence { solver: "beta root", iterations: it, residual: r });
        }
        beta = next;
        ce = kernel.cumulant(beta)?;
    }
    let r = ce.dc - m;
    if r.abs() <= tol {
        return Ok(beta);
    }
    Err(Error::Convergence { solver: "beta root", iterations: MAX_ROOT_ITERATIONS, residual: r })
}

/// `alpha = mass e^{-c(beta)}`.
pub fn solve_alpha(kernel: &BucketKernel, target: &BucketTarget, beta: f64) -> Result<f64> {
    let ln_alpha = target.mass.ln() - kernel.cumulant(beta)?.c;
    let alpha = ln_alpha.exp();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Numerical(format!("alpha = e^{ln_alpha} is not representable")));
    }
    Ok(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSolution {
    pub beta: f64,
    pub ln_alpha: f64,
    pub cumulant: CumulantEval,
}

pub fn solve_bucket(kernel: &BucketKernel, target: &BucketTarget) -> Result<BucketSolution> {
    let beta = solve_beta(kernel, target)?;
    let cumulant = kernel.cumulant(beta)?;
    Ok(BucketSolution { beta, ln_alpha: target.mass.ln() - cumulant.c, cumulant })
}

/// Fits the density matching the chain's calls and digitals, bucket by
/// bucket.
pub fn fit_with_digitals(prior: &Prior, chain: &OptionChain, spec: &QuadratureSpec) -> Result<TiltedDensity> {
    let digitals = chain
        .digitals()
        .ok_or_else(|| Error::InvalidInput("chain has no digital prices".into()))?;
    let targets = bucket_targets(chain, digitals)?;
    let layout = BucketLayout::new(prior, chain.strikes(), spec)?;
    let solutions = layout.solve(&targets)?;
    layout.density(&solutions, chain.forward())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::LognormalPrior;
    use approx::assert_relative_eq;

    #[test]
    fn lebesgue_closed_forms_at_zero() {
        let ce = lebesgue_cumulant(80.0, 100.0, 0.0).unwrap();
        assert_relative_eq!(ce.c, 20f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(ce.dc, 90.0, max_relative = 1e-15);
        assert_relative_eq!(ce.d2c, 400.0 / 12.0, max_relative = 1e-15);
    }

    #[test]
    fn lebesgue_last_bucket() {
        let ce = lebesgue_cumulant(100.0, f64::INFINITY, -0.1).unwrap();
        assert_relative_eq!(ce.dc, 110.0, max_relative = 1e-15);
        assert_relative_eq!(ce.d2c, 100.0, max_relative = 1e-15);
        assert!(matches!(lebesgue_cumulant(100.0, f64::INFINITY, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn series_and_closed_forms_meet_at_the_cutoff() {
        for &t in &[SERIES_CUTOFF * (1.0 - 1e-12), SERIES_CUTOFF * (1.0 + 1e-12)] {
            for sign in [-1.0, 1.0] {
                let t = sign * t;
                let sh = (0.5 * t).sinh();
                let exact_v = 1.0 / (t * t) - 1.0 / (4.0 * sh * sh);
                assert_relative_eq!(tilted_uniform_variance(t), exact_v, max_relative = 1e-13);
                let exact_m = 1.0 / (-(-t).exp_m1()) - 1.0 / t;
                assert_relative_eq!(tilted_uniform_mean(t), exact_m, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn small_beta_limit_is_continuous() {
        let at0 = lebesgue_cumulant(80.0, 100.0, 0.0).unwrap();
        for b in [1e-6, -1e-6] {
            let ce = lebesgue_cumulant(80.0, 100.0, b).unwrap();
            assert!((ce.c - at0.c).abs() < 1e-4);
            assert!((ce.dc - at0.dc).abs() < 1e-3);
            assert!((ce.d2c - at0.d2c).abs() < 1e-9 * 1e3);
        }
    }

    #[test]
    fn lebesgue_last_bucket_root_is_exact() {
        let k = BucketKernel::Lebesgue { lower: 140.0, upper: f64::INFINITY };
        let t = BucketTarget { index: 5, lower: 140.0, upper: f64::INFINITY, mass: 0.05, mean: 160.0 };
        assert_relative_eq!(solve_beta(&k, &t).unwrap(), -0.05, max_relative = 1e-15);
    }

    #[test]
    fn midpoint_mean_gives_zero_tilt() {
        let k = BucketKernel::Lebesgue { lower: 80.0, upper: 100.0 };
        let t = BucketTarget { index: 1, lower: 80.0, upper: 100.0, mass: 0.3, mean: 90.0 };
        let beta = solve_beta(&k, &t).unwrap();
        assert_eq!(beta, 0.0);
        assert_relative_eq!(solve_alpha(&k, &t, beta).unwrap(), 0.015, max_relative = 1e-14);
    }

    #[test]
    fn finite_bucket_roots_hit_the_mean() {
        let k = BucketKernel::Lebesgue { lower: 80.0, upper: 100.0 };
        for &m in &[80.001, 81.0, 85.0, 93.0, 99.0, 99.999] {
            let t = BucketTarget { index: 1, lower: 80.0, upper: 100.0, mass: 0.3, mean: m };
            let beta = solve_beta(&k, &t).unwrap();
            let ce = k.cumulant(beta).unwrap();
            assert!((ce.dc - m).abs() <= 1e-10 * 20.0, "m = {m}: c' = {}", ce.dc);
        }
    }

    #[test]
    fn discrete_measure_agrees_with_direct_quadrature() {
        let prior = Prior::density(LognormalPrior::from_forward(100.0, 0.2, 1.0).unwrap());
        let spec = QuadratureSpec::default();
        let Prior::Density(p) = &prior else { unreachable!() };
        let k = BucketKernel::new(&prior, 100.0, f64::INFINITY, &spec).unwrap();
        let ce = k.cumulant(-0.05).unwrap();
        // fine trapezoid in log price over the same truncated support
        let (_, hi) = p.log_support();
        let a = 100f64.ln();
        let n = 400_000;
        let h = (hi - a) / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j in 0..=n {
            let x = a + h * j as f64;
            let w = if j == 0 || j == n { 0.5 } else { 1.0 } * h;
            let s = x.exp();
            let f = w * p.log_price_pdf(x) * (-0.05 * s).exp();
            m0 += f;
            m1 += f * s;
            m2 += f * s * s;
        }
        let mean = m1 / m0;
        assert_relative_eq!(ce.c, m0.ln(), max_relative = 1e-9);
        assert_relative_eq!(ce.dc, mean, max_relative = 1e-9);
        assert_relative_eq!(ce.d2c, m2 / m0 - mean * mean, max_relative = 1e-7);
    }

    #[test]
    fn beyond_moment_bound_is_a_domain_error() {
        let k = BucketKernel::new(&Prior::Lebesgue, 100.0, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        assert_eq!(k.beta_sup(), 0.0);
        let err = k.cumulant(0.01).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("beta*")));
    }
}
