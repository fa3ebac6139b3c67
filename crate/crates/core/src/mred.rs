//! Calls-only fitting: minimise the relative entropy over the digital
//! prices.
//!
//! For a digital vector `D` inside the no-arbitrage rectangle the bucket
//! problems have unique solutions, and the resulting relative entropy
//! `H(D) = sum p_i ln p_i + sum p_i c*_i(Kbar_i)` is strictly convex with a
//! closed-form gradient and a tridiagonal Hessian. A damped Newton method on
//! `D` therefore finds the density that matches the calls with the least
//! relative entropy.

use crate::bucket::{bucket_targets, BucketLayout, BucketSolution, BucketTarget};
use crate::chain::OptionChain;
use crate::density::TiltedDensity;
use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::quadrature::QuadratureSpec;

/// Open interval `(lower_i, upper_i)` of arbitrage-free digital prices at
/// each strike.
pub fn digital_bounds(chain: &OptionChain) -> Result<Vec<(f64, f64)>> {
    let bounds = chain.call_spread_bounds();
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::Arbitrage {
                index: i + 1,
                reason: format!("empty digital interval ({lo}, {hi})"),
            });
        }
    }
    Ok(bounds)
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Pivots of the LDL^T factorisation; all positive iff the matrix is
    /// positive definite.
    pub fn pivots(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut piv = Vec::with_capacity(n);
        for i in 0..n {
            let p = if i == 0 { self.diag[0] } else { self.diag[i] - self.off[i - 1] * self.off[i - 1] / piv[i - 1] };
            piv.push(p);
        }
        piv
    }
}

/// Solves `H x = g` by symmetric Thomas elimination.
pub fn tridiagonal_solve(h: &Tridiagonal, g: &[f64]) -> Result<Vec<f64>> {
    let n = h.diag.len();
    if g.len() != n || h.off.len() != n.saturating_sub(1) {
        return Err(Error::InvalidInput("tridiagonal system has inconsistent sizes".into()));
    }
    let piv = h.pivots();
    if let Some(i) = piv.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::Numerical(format!("non-positive pivot {} at row {i}: Hessian lost definiteness", piv[i])));
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = if i == 0 { g[0] } else { g[i] - h.off[i - 1] / piv[i - 1] * y[i - 1] };
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = if i + 1 == n { y[i] / piv[i] } else { (y[i] - h.off[i] * x[i + 1]) / piv[i] };
    }
    Ok(x)
}

/// Objective, gradient and Hessian at one digital vector.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Tridiagonal,
    pub targets: Vec<BucketTarget>,
    pub solutions: Vec<BucketSolution>,
}

/// Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Closest an iterate may come to a face of the rectangle.
    pub margin: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-9, max_iterations: 200, margin: 1e-12 }
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone)]
pub struct MredFit {
    pub density: TiltedDensity,
    /// Digital prices of the fitted density at the chain's strikes.
    pub digitals: Vec<f64>,
    /// Relative entropy of the fit against the prior (for the Lebesgue
    /// prior, minus the differential entropy).
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value after each accepted step, starting point first.
    pub history: Vec<f64>,
}

/// A calls-only fitting problem with its bucket discretisation cached.
#[derive(Debug, Clone)]
pub struct MredProblem {
    chain: OptionChain,
    layout: BucketLayout,
    bounds: Vec<(f64, f64)>,
}

impl MredProblem {
    pub fn new(prior: &Prior, chain: &OptionChain, spec: &QuadratureSpec) -> Result<Self> {
        let bounds = digital_bounds(chain)?;
        let layout = BucketLayout::new(prior, chain.strikes(), spec)?;
        Ok(Self { chain: chain.clone().without_digitals(), layout, bounds })
    }

    pub fn chain(&self) -> &OptionChain {
        &self.chain
    }

    pub fn layout(&self) -> &BucketLayout {
        &self.layout
    }

    /// The no-arbitrage rectangle.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// The rectangle narrowed to digitals the prior can support: with a
    /// truncated prior, the top bucket's conditional mean `K_n + C_n / D_n`
    /// must stay below the largest mean the bucket can reach.
    pub fn feasible_bounds(&self) -> Result<Vec<(f64, f64)>> {
        let mut b = self.bounds.clone();
        let n = self.chain.n();
        if n == 0 {
            return Ok(b);
        }
        let top = &self.layout.kernels()[n];
        let reach = top.mean_sup() - self.chain.strike(n);
        if reach.is_finite() {
            let floor = self.chain.call(n) / reach;
            let lo = &mut b[n - 1].0;
            *lo = lo.max(floor * (1.0 + 1e-9));
            if *lo >= b[n - 1].1 {
                return Err(Error::Domain(format!(
                    "the prior's upper tail cannot carry the call at strike {}: needs a digital above {floor}",
                    self.chain.strike(n)
                )));
            }
        }
        Ok(b)
    }

    pub fn evaluate(&self, digitals: &[f64]) -> Result<ObjectiveEval> {
        let targets = bucket_targets(&self.chain, digitals)?;
        let solutions = self.layout.solve(&targets)?;
        let n = self.chain.n();
        let k = |i: usize| self.chain.strike(i);
        let mut value = 0.0;
        for (t, s) in targets.iter().zip(&solutions) {
            // p ln alpha + beta p Kbar, with ln alpha = ln p - c
            value += t.mass * (s.ln_alpha + s.beta * t.mean);
        }
        let gradient: Vec<f64> = (1..=n)
            .map(|i| {
                let (l, r) = (&solutions[i - 1], &solutions[i]);
                (r.ln_alpha + r.beta * k(i)) - (l.ln_alpha + l.beta * k(i))
            })
            .collect();
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 1..=n {
            let (tl, sl) = (&targets[i - 1], &solutions[i - 1]);
            let (tr, sr) = (&targets[i], &solutions[i]);
            let left = (k(i) - tl.mean).powi(2) / (tl.mass * sl.cumulant.d2c);
            let right = (tr.mean - k(i)).powi(2) / (tr.mass * sr.cumulant.d2c);
            diag.push(1.0 / tl.mass + 1.0 / tr.mass + left + right);
            if i < n {
                off.push(-1.0 / tr.mass + (tr.mean - k(i)) * (k(i + 1) - tr.mean) / (tr.mass * sr.cumulant.d2c));
            }
        }
        Ok(ObjectiveEval { value, gradient, hessian: Tridiagonal { diag, off }, targets, solutions })
    }

    pub fn density_at(&self, eval: &ObjectiveEval) -> Result<TiltedDensity> {
        self.layout.density(&eval.solutions, self.chain.forward())
    }

    /// Damped Newton from the centre of the feasible rectangle.
    pub fn minimize(&self, opts: &NewtonOptions) -> Result<MredFit> {
        let bounds = self.feasible_bounds()?;
        let mut x: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut eval = self.evaluate(&x)?;
        let mut history = vec![eval.value];
        let inside = |y: &[f64]| {
            y.iter()
                .zip(&bounds)
                .all(|(v, (lo, hi))| *v > lo + opts.margin && *v < hi - opts.margin)
        };
        for it in 0..=opts.max_iterations {
            let gnorm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gnorm < opts.gradient_tol {
                return Ok(MredFit {
                    density: self.density_at(&eval)?,
                    digitals: x,
                    objective: eval.value,
                    iterations: it,
                    gradient_norm: gnorm,
                    history,
                });
            }
            if it == opts.max_iterations {
                break;
            }
            let step = tridiagonal_solve(&eval.hessian, &eval.gradient)?;
            let noise = 1e-12 * eval.value.abs().max(1.0);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - t * si).collect();
                if inside(&cand) {
                    if let Ok(e) = self.evaluate(&cand) {
                        if e.value <= eval.value + noise {
                            accepted = Some((cand, e));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, e)) => {
                    x = cand;
                    eval = e;
                    history.push(eval.value);
                }
                None => {
                    return Err(Error::Convergence { solver: "entropy Newton line search", iterations: it, residual: gnorm });
                }
            }
        }
        let gnorm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Err(Error::Convergence { solver: "entropy Newton", iterations: opts.max_iterations, residual: gnorm })
    }
}

/// Objective at `digitals` for a one-off evaluation.
pub fn evaluate(prior: &Prior, chain: &OptionChain, digitals: &[f64], spec: &QuadratureSpec) -> Result<ObjectiveEval> {
    MredProblem::new(prior, chain, spec)?.evaluate(digitals)
}

/// Minimum relative entropy density matching the chain's calls (maximum
/// entropy density for the Lebesgue prior).
pub fn minimize(prior: &Prior, chain: &OptionChain, spec: &QuadratureSpec) -> Result<MredFit> {
    MredProblem::new(prior, chain, spec)?.minimize(&NewtonOptions::default())
}
