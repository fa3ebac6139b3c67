//! Module-level invariants, checked on random inputs.

mod common;

use common::*;
use entrofit::bucket::{cumulant, lebesgue_cumulant};
use entrofit::calibration::implied_vol;
use entrofit::density::{integrate_against, Weight};
use entrofit::models::black::black_call;
use entrofit::models::fourier::CfPricer;
use entrofit::models::{charfn, InversionSpec, MarketEnv, ModelParams};
use entrofit::mred::{MredProblem, NewtonOptions};
use entrofit::prior::{Prior, PriorDensity};
use entrofit::quadrature::{integrate, QuadratureSpec};
use entrofit::varswap::{log_contract, log_contract_med_closed};
use entrofit::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        max_shrink_iters: 64,
        rng_seed: RngSeed::Fixed(20_111_017),
        ..ProptestConfig::default()
    }
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Composite Simpson with `m` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|j| f(a + h * j as f64) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Uniform density on `(0, len]`, expressed in log price.
#[derive(Debug)]
struct Uniform {
    len: f64,
}

impl PriorDensity for Uniform {
    fn log_price_pdf(&self, x: f64) -> f64 {
        if x <= self.len.ln() {
            x.exp() / self.len
        } else {
            0.0
        }
    }

    fn log_support(&self) -> (f64, f64) {
        (self.len.ln() - 40.0, self.len.ln())
    }

    fn log_moments(&self) -> (f64, f64) {
        (self.len.ln() - 1.0, 1.0)
    }

    fn describe(&self) -> String {
        format!("uniform(0, {})", self.len)
    }
}

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        Just(Weight::One),
        Just(Weight::S),
        Just(Weight::S2),
        Just(Weight::LnS),
        (-0.1f64..0.1).prop_map(Weight::Exp),
        (-0.1f64..0.1).prop_map(Weight::SExp),
    ]
}

fn weight_fn(w: Weight) -> impl Fn(f64) -> f64 {
    move |s| match w {
        Weight::One => 1.0,
        Weight::S => s,
        Weight::S2 => s * s,
        Weight::LnS => s.ln(),
        Weight::Exp(b) => (b * s).exp(),
        Weight::SExp(b) => s * (b * s).exp(),
        Weight::S2Exp(b) => s * s * (b * s).exp(),
    }
}

fn model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        (0.1f64..0.6).prop_map(|sigma| ModelParams::BlackScholes { sigma }),
        (0.5f64..3.0, 0.01f64..0.09, -0.9f64..0.0, 0.1f64..0.6, 0.01f64..0.09)
            .prop_map(|(k, th, rho, s, v0)| ModelParams::heston(k, th, rho, s, v0)),
        (0.5f64..3.0, 0.1f64..0.3, -0.9f64..0.0, 0.1f64..0.4, 0.1f64..0.3).prop_map(|(kappa, theta, rho, sigma, v0)| {
            ModelParams::SchobelZhu { kappa, theta, rho, sigma, v0 }
        }),
        (-0.3f64..0.1, 0.1f64..0.3, 0.1f64..0.5).prop_map(|(theta, sigma, nu)| ModelParams::VarianceGamma { theta, sigma, nu }),
    ]
}

fn market() -> impl Strategy<Value = MarketEnv> {
    (50.0f64..200.0, 0.0f64..0.06, 0.0f64..0.04, 0.25f64..2.0).prop_map(|(s, r, d, t)| MarketEnv::new(s, r, d, t).unwrap())
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn prior_integrals_match_fine_simpson(sigma in 0.15f64..0.5, a in 40.0f64..120.0, width in 5.0f64..80.0, w in weight()) {
        let prior = bs_prior(sigma);
        let b = a + width;
        let got = ok(integrate_against(&prior, a, b, w, &spec()))?;
        let f = weight_fn(w);
        let want = simpson(|s| f(s) * prior.pdf(s), a, b, 20_000);
        prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-12), "{got} vs {want}");
    }

    #[test]
    fn cumulant_derivatives_match_differences(prior in prior_choice(), lo in 60.0f64..140.0, width in 5.0f64..40.0, tw in -3.0f64..3.0) {
        let prior = prior.build();
        let (a, b) = (lo, lo + width);
        let beta = tw / width;
        let h = 1e-4 / width;
        let c = |x: f64| cumulant(&prior, a, b, x, &spec());
        let (mid, up, down) = (ok(c(beta))?, ok(c(beta + h))?, ok(c(beta - h))?);
        let dc = (up.c - down.c) / (2.0 * h);
        let d2c = (up.dc - down.dc) / (2.0 * h);
        prop_assert!((mid.dc - dc).abs() <= 1e-6 * mid.dc.abs(), "c' {} vs {dc}", mid.dc);
        prop_assert!((mid.d2c - d2c).abs() <= 1e-6 * mid.d2c.abs().max(width * width * 1e-3), "c'' {} vs {d2c}", mid.d2c);
    }

    #[test]
    fn steep_tilts_pile_mass_on_a_bucket_edge(lo in 10.0f64..200.0, width in 1.0f64..80.0) {
        let (a, b) = (lo, lo + width);
        let up = ok(lebesgue_cumulant(a, b, 20.0 / width))?;
        let down = ok(lebesgue_cumulant(a, b, -20.0 / width))?;
        prop_assert!((b - up.dc).abs() <= 0.05 * width, "c'(+) = {}", up.dc);
        prop_assert!((down.dc - a).abs() <= 0.05 * width, "c'(-) = {}", down.dc);
    }

    #[test]
    fn uniform_prior_shifts_the_lebesgue_cumulant(lo in 20.0f64..150.0, width in 1.0f64..50.0, tw in -1.0f64..1.0) {
        let len = 1000.0;
        let prior = Prior::density(Uniform { len });
        let (a, b) = (lo, lo + width);
        let beta = tw / width;
        let got = ok(cumulant(&prior, a, b, beta, &spec()))?;
        let want = ok(lebesgue_cumulant(a, b, beta))?;
        prop_assert!((got.c - (want.c - len.ln())).abs() <= 1e-9, "c {} vs {}", got.c, want.c - len.ln());
        prop_assert!((got.dc - want.dc).abs() <= 1e-9 * want.dc, "c' {} vs {}", got.dc, want.dc);
        prop_assert!((got.d2c - want.d2c).abs() <= 1e-9 * want.d2c.max(1e-3 * width * width), "c'' {} vs {}", got.d2c, want.d2c);
    }

    #[test]
    fn fitted_density_is_a_martingale_measure(c in case(5)) {
        let fit = ok(MredProblem::new(&c.prior.build(), &c.chain(), &spec()).and_then(|p| p.minimize(&NewtonOptions::default())))?;
        let q = &fit.density;
        let mass = ok(q.mass())?;
        let mean = ok(q.mean())?;
        prop_assert!((mass - 1.0).abs() <= 1e-8, "mass {mass}");
        prop_assert!((mean - F).abs() <= 1e-8 * F, "mean {mean}");
    }

    #[test]
    fn optimum_lies_inside_the_rectangle(c in case(5)) {
        let problem = ok(MredProblem::new(&c.prior.build(), &c.chain(), &spec()))?;
        let fit = ok(problem.minimize(&NewtonOptions::default()))?;
        for (d, (lo, hi)) in fit.digitals.iter().zip(problem.bounds()) {
            prop_assert!(lo < d && d < hi, "{d} outside ({lo}, {hi})");
        }
    }

    #[test]
    fn relative_entropy_dominates_half_the_squared_distance(c in case(4).prop_filter("needs a density prior", |c| !matches!(c.prior, PriorChoice::Lebesgue))) {
        let prior = c.prior.build();
        let fit = ok(entrofit::mred::minimize(&prior, &c.chain(), &spec()))?;
        let q = &fit.density;
        let re = ok(q.relative_entropy())?;
        prop_assert!(re >= -1e-10, "relative entropy {re}");
        let gap = |s: f64| (q.pdf(s) - prior.pdf(s)).abs();
        let mut cuts = vec![1e-9];
        cuts.extend_from_slice(q.strikes());
        cuts.push(10.0 * F);
        let mut l1 = 0.0;
        for w in cuts.windows(2) {
            l1 += ok(integrate(gap, w[0], w[1], &spec()))?.value;
        }
        prop_assert!(re + 1e-10 >= 0.5 * l1 * l1, "relative entropy {re} below {}", 0.5 * l1 * l1);
    }

    #[test]
    fn objective_is_convex_on_the_rectangle(c in case(5), u in prop::collection::vec((0.02f64..0.98, 0.02f64..0.98), 5), t in 0.0f64..1.0) {
        let problem = ok(MredProblem::new(&c.prior.build(), &c.chain(), &spec()))?;
        let bounds = ok(problem.feasible_bounds())?;
        let at = |k: usize| -> Vec<f64> {
            bounds.iter().zip(&u).map(|((lo, hi), p)| lo + (hi - lo) * if k == 0 { p.0 } else { p.1 }).collect()
        };
        let (d1, d2) = (at(0), at(1));
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let h = |d: &[f64]| problem.evaluate(d).map(|e| e.value);
        // a truncated prior cannot reach every bucket mean in the rectangle;
        // the objective is +inf there and the chord bound holds trivially
        let (h1, h2) = (h(&d1), h(&d2));
        let unreachable = |r: &entrofit::Result<f64>| match r {
            Err(Error::Bucket { source, .. }) => matches!(**source, Error::Domain(_)),
            _ => false,
        };
        prop_assume!(!unreachable(&h1) && !unreachable(&h2));
        let (h1, h2, hm) = (ok(h1)?, ok(h2)?, ok(h(&mix))?);
        prop_assert!(hm <= t * h1 + (1.0 - t) * h2 + 1e-10, "{hm} above the chord {}", t * h1 + (1.0 - t) * h2);
    }

    #[test]
    fn newton_never_climbs(c in case(5)) {
        let fit = ok(entrofit::mred::minimize(&c.prior.build(), &c.chain(), &spec()))?;
        for w in fit.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "step rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn log_contract_routes_agree(c in case(5).prop_map(|c| Case { prior: PriorChoice::Lebesgue, ..c })) {
        let fit = ok(entrofit::mred::minimize(&Prior::Lebesgue, &c.chain(), &spec()))?;
        let closed = ok(log_contract_med_closed(&fit.density))?;
        let quad = ok(log_contract(&fit.density.clone().with_spec(spec().with_rel_tol(1e-13))))?;
        prop_assert!((closed - quad).abs() <= 1e-8, "{closed} vs {quad}");
    }

    #[test]
    fn implied_vol_round_trips(env in market(), moneyness in -0.5f64..0.5, sigma in 0.05f64..1.0) {
        let k = env.forward() * (moneyness * sigma * env.maturity.sqrt()).exp();
        let price = env.discount() * black_call(env.forward(), k, sigma, env.maturity);
        let got = ok(implied_vol(price, &env, k))?;
        prop_assert!((got - sigma).abs() <= 1e-10, "{got} vs {sigma}");
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn characteristic_function_is_bounded(m in model(), env in market(), u in prop::collection::vec(-50.0f64..50.0, 8)) {
        prop_assume!(m.validate().is_ok());
        let at_zero = ok(charfn(&m, &env, Complex64::new(0.0, 0.0)))?;
        prop_assert!((at_zero - 1.0).norm() <= 1e-12, "phi(0) = {at_zero}");
        for x in u {
            let v = ok(charfn(&m, &env, Complex64::new(x, 0.0)))?;
            prop_assert!(v.norm() <= 1.0 + 1e-12, "|phi({x})| = {}", v.norm());
        }
    }

    #[test]
    fn put_call_parity(m in model(), env in market(), z in -1.5f64..1.5) {
        prop_assume!(m.validate().is_ok());
        let pricer = ok(CfPricer::new(&m, &env, &InversionSpec::default()))?;
        let k = env.forward() * (0.3 * z * env.maturity.sqrt()).exp();
        let parity = ok(pricer.price_call(k))? - ok(pricer.price_put(k))?;
        let want = env.discount() * (env.forward() - k);
        prop_assert!((parity - want).abs() <= 1e-8 * env.forward(), "{parity} vs {want}");
    }
}
