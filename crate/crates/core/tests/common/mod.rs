//! Fixtures and generators shared by the integration test targets.
#![allow(dead_code)]

use std::sync::OnceLock;

use entrofit::chain::OptionChain;
use entrofit::models::black::black_call;
use entrofit::models::{as_prior, MarketEnv, ModelParams, PriorOptions};
use entrofit::prior::{LognormalPrior, Prior};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

pub const F: f64 = 100.0;
pub const T: f64 = 1.0;
pub const SIGMA: f64 = 0.25;

/// The reference market: `r = d = 0`, `S0 = F = 100`, `T = 1`.
pub fn env() -> MarketEnv {
    MarketEnv::new(F, 0.0, 0.0, T).unwrap()
}

pub fn bs_chain(strikes: &[f64]) -> OptionChain {
    let calls = strikes.iter().map(|&k| black_call(F, k, SIGMA, T)).collect();
    OptionChain::new(T, 0.0, 0.0, F, strikes.to_vec(), calls).unwrap()
}

pub const STRIKE_SETS: [&[f64]; 3] = [&[100.0], &[60.0, 100.0, 140.0], &[60.0, 80.0, 100.0, 120.0, 140.0]];

pub fn heston_ref() -> ModelParams {
    ModelParams::heston(1.0, 0.04, -0.3, 0.25, 0.04)
}

pub fn bs_prior(sigma: f64) -> Prior {
    Prior::density(LognormalPrior::from_forward(F, sigma, T).unwrap())
}

/// The reference Heston prior, built once per process.
pub fn heston_prior() -> Prior {
    static P: OnceLock<Prior> = OnceLock::new();
    P.get_or_init(|| as_prior(&heston_ref(), &env(), &PriorOptions::default()).unwrap()).clone()
}

/// SPX-like market with the reference model parameters.
pub fn spx_env() -> MarketEnv {
    MarketEnv::new(1300.0, 0.003, 0.02, 152.0 / 365.0).unwrap()
}

pub fn spx_strikes() -> Vec<f64> {
    (0..15).map(|i| 900.0 + 50.0 * i as f64).collect()
}

pub fn spx_heston() -> ModelParams {
    ModelParams::heston(0.8568, 0.0800, -0.8016, 0.5473, 0.0421)
}

pub fn spx_sz() -> ModelParams {
    ModelParams::SchobelZhu { kappa: 1.6316, theta: 0.1731, rho: -0.8031, sigma: 0.3249, v0: 0.1887 }
}

pub fn spx_vg() -> ModelParams {
    ModelParams::VarianceGamma { theta: -0.2808, sigma: 0.1535, nu: 0.3638 }
}

/// A random arbitrage-free market: calls from a two-component lognormal
/// mixture at 1 to `max_n` strikes, and one of three priors.
#[derive(Debug, Clone)]
pub struct Case {
    pub strikes: Vec<f64>,
    pub weight: f64,
    pub vols: (f64, f64),
    pub prior: PriorChoice,
}

#[derive(Debug, Clone, Copy)]
pub enum PriorChoice {
    Lebesgue,
    Bs(f64),
    Heston,
}

impl PriorChoice {
    pub fn build(self) -> Prior {
        match self {
            PriorChoice::Lebesgue => Prior::Lebesgue,
            PriorChoice::Bs(s) => bs_prior(s),
            PriorChoice::Heston => heston_prior(),
        }
    }
}

impl Case {
    pub fn chain(&self) -> OptionChain {
        let (a, b) = self.vols;
        let calls = self
            .strikes
            .iter()
            .map(|&k| self.weight * black_call(F, k, a, T) + (1.0 - self.weight) * black_call(F, k, b, T))
            .collect();
        OptionChain::new(T, 0.0, 0.0, F, self.strikes.clone(), calls).unwrap()
    }
}

pub fn prior_choice() -> impl Strategy<Value = PriorChoice> {
    prop_oneof![
        2 => Just(PriorChoice::Lebesgue),
        2 => (0.2f64..0.5).prop_map(PriorChoice::Bs),
        1 => Just(PriorChoice::Heston),
    ]
}

pub fn case(max_n: usize) -> impl Strategy<Value = Case> {
    let grid: Vec<f64> = (12..=30).map(|k| 5.0 * k as f64).collect();
    (
        prop::sample::subsequence(grid, 1..=max_n),
        0.0f64..1.0,
        0.15f64..0.4,
        0.15f64..0.4,
        prior_choice(),
    )
        .prop_map(|(strikes, weight, a, b, prior)| Case { strikes, weight, vols: (a, b), prior })
}

/// Seeded runner so every invocation draws the same cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 64, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Runs a property and renders the outcome as `Ok(())` or a failure message.
pub fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    match runner(cases).run(&strategy, test) {
        Ok(()) => Ok(()),
        Err(TestError::Fail(why, value)) => Err(format!("{why} at {value:?}")),
        Err(TestError::Abort(why)) => Err(format!("aborted: {why}")),
    }
}

/// Largest value seen across the cases of a property.
#[derive(Default)]
pub struct Worst(std::sync::Mutex<f64>);

impl Worst {
    pub fn see(&self, v: f64) {
        let mut w = self.0.lock().unwrap();
        if v > *w || v.is_nan() {
            *w = v;
        }
    }

    pub fn get(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

/// Converts a library error into a failed case.
pub fn ok<V>(r: entrofit::Result<V>) -> Result<V, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}
