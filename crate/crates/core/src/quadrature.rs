//! Adaptive Gauss-Kronrod integration and Gauss-Legendre rules.
//!
//! The adaptive driver bisects the panel with the largest error estimate
//! until the global estimate meets `max(abs_tol, rel_tol * |I|)`. Callers
//! pass explicit breakpoints wherever the integrand has a kink (bucket
//! strikes, cusps of a prior) so no panel straddles one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a semi-infinite range is made finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailRule {
    /// `S = a + t / (1 - t)` maps `[a, inf)` onto `[0, 1)`.
    Rational,
    /// Cut the range at `a + width`.
    Truncate { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailRule,
    /// Log-price panel width of the fixed Gauss-Legendre bucket measures.
    pub panel_width: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail: TailRule::Rational,
            panel_width: 0.01,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("quadrature tolerances must be > 0".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidInput("max_subdivisions must be >= 1".into()));
        }
        if !(self.panel_width > 0.0) {
            return Err(Error::InvalidInput("panel_width must be > 0".into()));
        }
        if let TailRule::Truncate { width } = self.tail {
            if !(width > 0.0) {
                return Err(Error::InvalidInput("tail truncation width must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

// 31-point Kronrod extension of the 15-point Gauss rule (QUADPACK qk31).
const XGK: [f64; 16] = [
    0.998002298693397060285172840152271,
    0.987992518020485428489565718586613,
    0.967739075679139134257347978784337,
    0.937273392400705904307758947710209,
    0.897264532344081900882509656454496,
    0.848206583410427216200648320774217,
    0.790418501442465932967649294817947,
    0.724417731360170047416186054613938,
    0.650996741297416970533735895313275,
    0.570972172608538847537226737253911,
    0.485081863640239680693655740232351,
    0.394151347077563369897207370981045,
    0.299180007153168812166780024266389,
    0.201194093997434522300628303394596,
    0.101142066918717499027074231447392,
    0.0,
];

const WGK: [f64; 16] = [
    0.005377479872923348987792051430128,
    0.015007947329316122538374763075807,
    0.025460847326715320186874001019653,
    0.035346360791375846222037948478360,
    0.044589751324764876608227299373280,
    0.053481524690928087265343147239430,
    0.062009567800670640285139230960803,
    0.069854121318728258709520077099147,
    0.076849680757720378894432777482659,
    0.083080502823133021038289247286104,
    0.088564443056211770647275443693774,
    0.093126598170825321225486872747346,
    0.096642726983623678505179907627589,
    0.099173598721791959332393173484603,
    0.100769845523875595044946662617570,
    0.101330007014791549017374792767493,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[15].
const WG: [f64; 8] = [
    0.030753241996117268354628393577204,
    0.070366047488108124709267416450667,
    0.107159220467171935011869546685869,
    0.139570677926154314447804794511028,
    0.166269205816993933553200860481209,
    0.186161000015562211026800561866423,
    0.198431485327111576456118326443839,
    0.202578241925561272880620199967519,
];

/// One Gauss-Kronrod 15/31 panel on `[a, b]`: (Kronrod value, |Kronrod - Gauss|).
pub fn gk31<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[15];
    let mut gauss = fc * WG[7];
    for j in 0..15 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over the partition given by `points` (sorted, at
/// least two entries).
pub fn integrate_partition<F: Fn(f64) -> f64>(
    f: &F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("partition needs two points".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if !(w[1] > w[0]) {
            continue;
        }
        let (v, e) = gk31(f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{}, {}]",
            points[0],
            points[points.len() - 1]
        )));
    }
    let mut count = heap.len();
    // panels too narrow to split are parked here
    let mut frozen_err = 0.0;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if count >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                a: points[0],
                b: points[points.len() - 1],
                estimate: total,
                error: total_err,
            });
        }
        if !(mid > worst.a && mid < worst.b) {
            frozen_err += worst.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk31(f, worst.a, mid);
        let (v2, e2) = gk31(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        count += 1;
    }
    // recompute sums to shed accumulated rounding from the running updates
    let mut value = 0.0;
    let mut error = frozen_err;
    for p in heap.iter() {
        value += p.value;
        error += p.error;
    }
    if !value.is_finite() {
        return Err(Error::Numerical("non-finite quadrature result".into()));
    }
    Ok(Estimate { value, error, subdivisions: count })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    if b < a {
        let e = integrate(f, b, a, spec)?;
        return Ok(Estimate { value: -e.value, ..e });
    }
    integrate_partition(&f, &[a, b], spec)
}

/// `∫_a^∞ f`, using the spec's tail rule.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    match spec.tail {
        TailRule::Truncate { width } => integrate(f, a, a + width, spec),
        TailRule::Rational => {
            let g = |t: f64| {
                let one_minus = 1.0 - t;
                let s = a + t / one_minus;
                if !s.is_finite() {
                    return 0.0;
                }
                let v = f(s) / (one_minus * one_minus);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            // a few fixed cuts so the mapped integrand is resolved from the start
            let cuts = [0.0, 0.5, 0.75, 0.9, 0.97, 0.99, 1.0];
            integrate_partition(&g, &cuts, spec)
        }
    }
}

/// `∫_{-∞}^b f`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_upper_tail(|y| f(-y), -b, spec)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z_old = z;
            z = z_old - p1 / dp;
            if (z - z_old).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_rule_is_exact_for_degree_45_polynomials() {
        let total: f64 = 2.0 * WGK[..15].iter().sum::<f64>() + WGK[15];
        assert_relative_eq!(total, 2.0, max_relative = 1e-15);
        // 31-point Kronrod integrates degree 3n+1 = 46 exactly
        let (v, _) = gk31(&|x: f64| x.powi(44), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 45.0, max_relative = 1e-13);
        let (v, _) = gk31(&|x: f64| 3.0 * x * x + 2.0 * x, 0.0, 2.0);
        assert_relative_eq!(v, 12.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks_and_tails() {
        let spec = QuadratureSpec::default();
        let e = integrate(|x: f64| 1.0 / (1.0 + x * x), -10.0, 10.0, &spec).unwrap();
        assert_relative_eq!(e.value, 2.0 * 10f64.atan(), max_relative = 1e-12);

        let e = integrate_upper_tail(|x: f64| (-x).exp(), 0.0, &spec).unwrap();
        assert_relative_eq!(e.value, 1.0, max_relative = 1e-11);

        let e = integrate_lower_tail(|x: f64| (-x * x / 2.0).exp(), 0.0, &spec).unwrap();
        assert_relative_eq!(e.value, (std::f64::consts::PI / 2.0).sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        let spec = QuadratureSpec::default();
        let e = integrate(|x: f64| x.ln(), 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(e.value, -1.0, max_relative = 1e-9);
    }

    #[test]
    fn subdivision_cap_reports_error() {
        let spec = QuadratureSpec { max_subdivisions: 2, ..Default::default() };
        let r = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
            let deg = 2 * n - 2;
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(m, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        assert!(QuadratureSpec { rel_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(QuadratureSpec { max_subdivisions: 0, ..Default::default() }.validate().is_err());
    }
}
