//! Command implementations. Each returns a finished result; nothing is
//! written until the whole command has succeeded.

use entrofit::calibration::{self, CalibrationOptions, Quote};
use entrofit::density::TiltedDensity;
use entrofit::models::{ModelKind, ModelParams, PriorOptions};
use entrofit::mred::{self, MredProblem};
use entrofit::prior::Prior;
use entrofit::quadrature::QuadratureSpec;
use entrofit::varswap::{fair_rate, DriftSpec};
use entrofit::{Error, Result};

use crate::bundle::{
    build_prior, price_rows, sig10, CalibrationBlock, Diagnostics, Market, QuoteRow, ResultBundle, VarSwapBlock,
};
use crate::chain_csv::ParsedChain;
use crate::prior_arg::PriorArg;

/// Environment variable overriding the relative quadrature tolerance.
pub const QUAD_TOL_VAR: &str = "ENTROFIT_QUAD_TOL";

pub fn quadrature_from_env() -> Result<QuadratureSpec> {
    let spec = QuadratureSpec::default();
    match std::env::var(QUAD_TOL_VAR) {
        Ok(v) => {
            let tol: f64 = v.trim().parse().map_err(|_| Error::InvalidInput(format!("{QUAD_TOL_VAR}='{v}' is not a number")))?;
            if !(tol > 0.0 && tol < 1e-2) {
                return Err(Error::InvalidInput(format!("{QUAD_TOL_VAR} must lie in (0, 1e-2), got {tol}")));
            }
            Ok(spec.with_rel_tol(tol))
        }
        Err(_) => Ok(spec),
    }
}

fn market(parsed: &ParsedChain) -> Market {
    Market::from_env(&parsed.env, parsed.chain.forward())
}

fn diagnostics(q: &TiltedDensity, prior: &Prior, iterations: usize, gradient_norm: f64, objective: f64) -> Result<Diagnostics> {
    Ok(Diagnostics {
        iterations,
        gradient_norm: sig10(gradient_norm),
        objective: sig10(objective),
        relative_entropy: (!prior.is_lebesgue()).then(|| sig10(objective)),
        entropy: sig10(q.entropy()?),
    })
}

/// `fit-med` and `fit-mred`: calls-only fit.
pub fn fit(command: &str, parsed: &ParsedChain, prior_arg: &PriorArg, quad: &QuadratureSpec) -> Result<ResultBundle> {
    let prior = build_prior(prior_arg, &parsed.env)?;
    let chain = parsed.chain.clone().without_digitals();
    let fit = mred::minimize(&prior, &chain, quad)?;
    let mut b = ResultBundle::new(command, market(parsed), prior_arg, quad);
    b.set_density(&fit.density);
    b.prices = price_rows(&fit.density, chain.strikes())?;
    b.diagnostics = Some(diagnostics(&fit.density, &prior, fit.iterations, fit.gradient_norm, fit.objective)?);
    Ok(b)
}

/// `fit-digitals`: calls and digitals given, one independent solve per bucket.
pub fn fit_digitals(parsed: &ParsedChain, prior_arg: &PriorArg, quad: &QuadratureSpec) -> Result<ResultBundle> {
    let digitals = parsed
        .chain
        .digitals()
        .ok_or_else(|| Error::InvalidInput("fit-digitals needs a 'digital' column".into()))?
        .to_vec();
    let prior = build_prior(prior_arg, &parsed.env)?;
    let problem = MredProblem::new(&prior, &parsed.chain, quad)?;
    let eval = problem.evaluate(&digitals)?;
    let q = problem.density_at(&eval)?;
    let gnorm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut b = ResultBundle::new("fit-digitals", market(parsed), prior_arg, quad);
    b.set_density(&q);
    b.prices = price_rows(&q, parsed.chain.strikes())?;
    b.diagnostics = Some(diagnostics(&q, &prior, 0, gnorm, eval.value)?);
    Ok(b)
}

/// `price`: reprices a fitted density at new strikes.
pub fn price(fit: &ResultBundle, strikes: &[f64]) -> Result<ResultBundle> {
    if strikes.is_empty() {
        return Err(Error::InvalidInput("no strikes to price".into()));
    }
    if let Some(k) = strikes.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidInput(format!("strike {k} must be positive")));
    }
    let q = fit.density()?;
    let mut b = fit.clone();
    b.command = "price".into();
    b.prices = price_rows(&q, strikes)?;
    b.varswap = None;
    Ok(b)
}

/// `varswap`: fair variance swap rate of a fitted density.
pub fn varswap(fit: &ResultBundle, drift: Option<f64>) -> Result<ResultBundle> {
    let q = fit.density()?;
    let m = &fit.market;
    let drift = drift.map_or_else(|| DriftSpec::risk_neutral(m.rate, m.dividend), |d| DriftSpec { annualised_drift: d });
    let r = fair_rate(&q, drift, m.spot, m.maturity)?;
    let mut b = fit.clone();
    b.command = "varswap".into();
    b.varswap = Some(VarSwapBlock {
        drift: sig10(drift.annualised_drift),
        variance: sig10(r.variance),
        vol: sig10(r.vol),
        log_contract: sig10(r.log_contract),
        entropy: sig10(r.entropy),
        log_entropy: sig10(r.log_entropy),
        variance_entropy_route: sig10(r.variance_entropy_route),
    });
    Ok(b)
}

/// `calibrate`: least squares on implied vols, then the relative entropy
/// of the chain-matching density against the fitted model.
pub fn calibrate(parsed: &ParsedChain, kind: ModelKind, starts: Vec<ModelParams>, quad: &QuadratureSpec) -> Result<ResultBundle> {
    let env = &parsed.env;
    let chain = parsed.chain.clone().without_digitals();
    let df = env.discount();
    let quotes: Vec<Quote> = chain
        .strikes()
        .iter()
        .zip(chain.calls())
        .map(|(&k, &c)| Quote::from_price(env, k, c * df))
        .collect::<Result<_>>()?;
    let opts = CalibrationOptions { starts, ..CalibrationOptions::default() };
    let fit = calibration::calibrate(kind, env, &quotes, &opts)?;
    let quality = calibration::fit_quality(&fit.params, env, &chain, &quotes, &PriorOptions::default(), quad)?;
    let prior_arg = PriorArg::Model(fit.params);
    let mut b = ResultBundle::new("calibrate", market(parsed), &prior_arg, quad);
    b.calibration = Some(CalibrationBlock {
        model: prior_arg.canonical(),
        params: fit.params,
        sse: sig10(quality.sse),
        relative_entropy: sig10(quality.relative_entropy),
        iterations: fit.iterations,
        converged: fit.converged,
        quotes: quotes
            .iter()
            .zip(&fit.model_vols)
            .map(|(q, v)| QuoteRow { strike: q.strike, market_vol: sig10(q.vol), model_vol: sig10(*v) })
            .collect(),
    });
    Ok(b)
}

/// Tail mass left outside the default density grid on each side.
const GRID_TAIL: f64 = 1e-6;

/// Strike where the upper tail mass `P(S > k)` equals `mass`.
fn upper_quantile(q: &TiltedDensity, mass: f64, start: f64) -> Result<f64> {
    let (mut a, mut b) = (0.0, start.max(1e-12));
    while q.price_digital(b)? > mass {
        a = b;
        b *= 2.0;
        if b > 1e12 {
            return Err(Error::Numerical("density tail does not decay".into()));
        }
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if q.price_digital(m)? > mass {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-10 * b {
            break;
        }
    }
    Ok(b)
}

/// `density`: `(S, q(S))` on an even grid. Without explicit bounds the
/// grid spans the central `1 - 2e-6` of the probability.
pub fn density_grid(fit: &ResultBundle, points: usize, lo: Option<f64>, hi: Option<f64>) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {points}")));
    }
    let q = fit.density()?;
    let f = fit.market.forward;
    let hi = match hi {
        Some(h) => h,
        None => upper_quantile(&q, GRID_TAIL, f)?,
    };
    let lo = match lo {
        Some(l) => l,
        None if 1.0 - q.price_digital(1e-6 * f)? <= GRID_TAIL => upper_quantile(&q, 1.0 - GRID_TAIL, f)?,
        None => 0.0,
    };
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("grid bounds must satisfy 0 <= lo < hi, got {lo}, {hi}")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|j| {
            let s = lo + step * j as f64;
            (sig10(s), sig10(q.pdf(s)))
        })
        .collect())
}
