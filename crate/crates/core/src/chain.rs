//! Option chains: forward, undiscounted call prices and optional digitals at
//! one maturity.

use serde::Serialize;

use crate::error::{Error, Result};

/// Market data at a single maturity. All prices are undiscounted.
///
/// Index conventions follow the bucket layout: strike `0` is `0`, strike
/// `n + 1` is `+inf`, call `0` is the forward, call `n + 1` is `0`,
/// digital `0` is `1` and digital `n + 1` is `0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionChain {
    maturity: f64,
    rate: f64,
    dividend: f64,
    forward: f64,
    strikes: Vec<f64>,
    calls: Vec<f64>,
    digitals: Option<Vec<f64>>,
}

impl OptionChain {
    pub fn new(
        maturity: f64,
        rate: f64,
        dividend: f64,
        forward: f64,
        strikes: Vec<f64>,
        calls: Vec<f64>,
    ) -> Result<Self> {
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::InvalidInput(format!("maturity must be > 0, got {maturity}")));
        }
        if !rate.is_finite() || !dividend.is_finite() {
            return Err(Error::InvalidInput("rates must be finite".into()));
        }
        if !(forward > 0.0 && forward.is_finite()) {
            return Err(Error::InvalidInput(format!("forward must be > 0, got {forward}")));
        }
        if strikes.len() != calls.len() {
            return Err(Error::InvalidInput(format!(
                "{} strikes but {} call prices",
                strikes.len(),
                calls.len()
            )));
        }
        let chain = Self { maturity, rate, dividend, forward, strikes, calls, digitals: None };
        chain.check_strikes()?;
        chain.check_calls()?;
        Ok(chain)
    }

    /// Attaches digital prices, which must lie strictly between the adjacent
    /// call-spread slopes.
    pub fn with_digitals(mut self, digitals: Vec<f64>) -> Result<Self> {
        if digitals.len() != self.strikes.len() {
            return Err(Error::InvalidInput(format!(
                "{} strikes but {} digital prices",
                self.strikes.len(),
                digitals.len()
            )));
        }
        for (i, (lo, hi)) in self.call_spread_bounds().into_iter().enumerate() {
            let d = digitals[i];
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!("digital {} is not finite", i + 1)));
            }
            if d <= lo {
                return Err(Error::Arbitrage {
                    index: i + 1,
                    reason: format!("digital {d} at or below the right call-spread bound {lo}"),
                });
            }
            if d >= hi {
                return Err(Error::Arbitrage {
                    index: i + 1,
                    reason: format!("digital {d} at or above the left call-spread bound {hi}"),
                });
            }
        }
        self.digitals = Some(digitals);
        Ok(self)
    }

    pub fn without_digitals(mut self) -> Self {
        self.digitals = None;
        self
    }

    /// Keeps the strikes at the given (0-based) positions.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let mut strikes = Vec::with_capacity(keep.len());
        let mut calls = Vec::with_capacity(keep.len());
        let mut digitals = Vec::with_capacity(keep.len());
        for &j in keep {
            if j >= self.strikes.len() {
                return Err(Error::InvalidInput(format!("strike position {j} out of range")));
            }
            strikes.push(self.strikes[j]);
            calls.push(self.calls[j]);
            if let Some(d) = &self.digitals {
                digitals.push(d[j]);
            }
        }
        let chain = Self::new(self.maturity, self.rate, self.dividend, self.forward, strikes, calls)?;
        if self.digitals.is_some() {
            chain.with_digitals(digitals)
        } else {
            Ok(chain)
        }
    }

    fn check_strikes(&self) -> Result<()> {
        for (i, &k) in self.strikes.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidInput(format!("strike {} must be positive and finite, got {k}", i + 1)));
            }
            if i > 0 {
                let prev = self.strikes[i - 1];
                if k == prev {
                    return Err(Error::InvalidInput(format!("duplicate strike {k} at position {}", i + 1)));
                }
                if k < prev {
                    return Err(Error::InvalidInput(format!("strikes not increasing at position {}: {prev} then {k}", i + 1)));
                }
            }
        }
        Ok(())
    }

    /// Calls must be strictly decreasing and strictly convex in the strike,
    /// including the sentinels `(0, forward)` and `(inf, 0)`, with the first
    /// slope above `-1`.
    fn check_calls(&self) -> Result<()> {
        let n = self.n();
        for i in 1..=n {
            let c = self.call(i);
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("call {i} is not finite")));
            }
            if c <= 0.0 {
                return Err(Error::Arbitrage { index: i, reason: format!("call price {c} is not positive") });
            }
            if c >= self.call(i - 1) {
                return Err(Error::Arbitrage {
                    index: i,
                    reason: format!("call price {c} does not decrease from {}", self.call(i - 1)),
                });
            }
        }
        let mut prev_slope = -1.0;
        for i in 0..n {
            let slope = (self.call(i + 1) - self.call(i)) / (self.strike(i + 1) - self.strike(i));
            if slope <= prev_slope {
                let reason = if i == 0 {
                    format!("call {} is below forward minus strike", i + 1)
                } else {
                    format!("call curve not strictly convex at strike {}", self.strike(i))
                };
                return Err(Error::Arbitrage { index: i.max(1), reason });
            }
            prev_slope = slope;
        }
        Ok(())
    }

    /// Number of strikes `n`.
    pub fn n(&self) -> usize {
        self.strikes.len()
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dividend(&self) -> f64 {
        self.dividend
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn discount_factor(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    /// Spot implied by the forward and the carry.
    pub fn spot(&self) -> f64 {
        self.forward * (-(self.rate - self.dividend) * self.maturity).exp()
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn calls(&self) -> &[f64] {
        &self.calls
    }

    pub fn digitals(&self) -> Option<&[f64]> {
        self.digitals.as_deref()
    }

    /// `K_i` for `0 <= i <= n + 1`.
    pub fn strike(&self, i: usize) -> f64 {
        match i {
            0 => 0.0,
            i if i <= self.n() => self.strikes[i - 1],
            _ => f64::INFINITY,
        }
    }

    /// `C_i` for `0 <= i <= n + 1`.
    pub fn call(&self, i: usize) -> f64 {
        match i {
            0 => self.forward,
            i if i <= self.n() => self.calls[i - 1],
            _ => 0.0,
        }
    }

    /// `D_i` for `0 <= i <= n + 1`, if digitals are attached.
    pub fn digital(&self, i: usize) -> Option<f64> {
        let d = self.digitals.as_ref()?;
        Some(match i {
            0 => 1.0,
            i if i <= self.n() => d[i - 1],
            _ => 0.0,
        })
    }

    /// Open interval of arbitrage-free digital prices at each strike:
    /// `(-(C_{i+1} - C_i)/(K_{i+1} - K_i), -(C_i - C_{i-1})/(K_i - K_{i-1}))`,
    /// with the lower end `0` at the last strike.
    pub fn call_spread_bounds(&self) -> Vec<(f64, f64)> {
        let n = self.n();
        (1..=n)
            .map(|i| {
                let lower = if i == n {
                    0.0
                } else {
                    -(self.call(i + 1) - self.call(i)) / (self.strike(i + 1) - self.strike(i))
                };
                let upper = -(self.call(i) - self.call(i - 1)) / (self.strike(i) - self.strike(i - 1));
                (lower, upper)
            })
            .collect()
    }
}
