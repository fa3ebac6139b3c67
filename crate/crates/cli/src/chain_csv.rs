//! Option-chain CSV input.
//!
//! ```text
//! # forward=100, T=1, r=0, d=0
//! # discounted=false
//! strike,call,digital
//! 60,40.14540,0.97246
//! ```
//!
//! Metadata lines start with `#` and hold comma-separated `key=value`
//! pairs. `forward` (or `spot`) and `T` are required; `r` and `d` default
//! to zero. With `discounted=true` the call and digital columns are
//! present values and are divided by `e^{-rT}` on input. The `digital`
//! column is optional.

use entrofit::chain::OptionChain;
use entrofit::models::MarketEnv;
use entrofit::{Error, Result};

/// Chain plus the market data it was quoted against.
#[derive(Debug, Clone)]
pub struct ParsedChain {
    pub chain: OptionChain,
    pub env: MarketEnv,
    /// CSV line number of each strike row.
    pub lines: Vec<usize>,
}

#[derive(Debug, Default)]
struct Meta {
    forward: Option<f64>,
    spot: Option<f64>,
    maturity: Option<f64>,
    rate: f64,
    dividend: f64,
    discounted: bool,
}

fn parse_meta(text: &str) -> Result<Meta> {
    let mut meta = Meta::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some(body) = line.trim_start().strip_prefix('#') else { continue };
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((key, value)) = item.split_once('=') else {
                // free-text comment
                continue;
            };
            let key = key.trim();
            if key.contains(char::is_whitespace) {
                continue;
            }
            let value = value.trim();
            let num = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| Error::Parse { line: line_no, reason: format!("{key}: '{value}' is not a number") })
            };
            match key {
                "forward" | "F" => meta.forward = Some(num()?),
                "spot" | "S0" => meta.spot = Some(num()?),
                "T" | "maturity" => meta.maturity = Some(num()?),
                "r" | "rate" => meta.rate = num()?,
                "d" | "dividend" => meta.dividend = num()?,
                "discounted" => {
                    meta.discounted = match value {
                        "true" | "1" | "yes" => true,
                        "false" | "0" | "no" => false,
                        other => {
                            return Err(Error::Parse { line: line_no, reason: format!("discounted: expected true or false, got '{other}'") })
                        }
                    }
                }
                other => return Err(Error::Parse { line: line_no, reason: format!("unknown metadata key '{other}'") }),
            }
        }
    }
    Ok(meta)
}

/// Parses and validates a chain. Errors carry CSV line numbers; for
/// arbitrage violations the `index` field is the offending line.
pub fn parse_chain(text: &str) -> Result<ParsedChain> {
    let meta = parse_meta(text)?;
    let maturity = meta.maturity.ok_or_else(|| Error::InvalidInput("metadata must give the maturity T".into()))?;
    let env = match (meta.forward, meta.spot) {
        (Some(_), Some(_)) => return Err(Error::InvalidInput("give either forward or spot, not both".into())),
        (Some(f), None) => MarketEnv::from_forward(f, meta.rate, meta.dividend, maturity)?,
        (None, Some(s)) => MarketEnv::new(s, meta.rate, meta.dividend, maturity)?,
        (None, None) => return Err(Error::InvalidInput("metadata must give forward or spot".into())),
    };
    let scale = if meta.discounted { 1.0 / env.discount() } else { 1.0 };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header_line = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let header_pos = reader.position().line() as usize;
    let columns: Vec<String> = header_line.iter().map(|h| h.to_ascii_lowercase()).collect();
    let with_digital = match columns.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["strike", "call"] => false,
        ["strike", "call", "digital"] => true,
        _ => {
            return Err(Error::Parse {
                line: header_pos.max(1),
                reason: format!("header must be 'strike,call[,digital]', got '{}'", columns.join(",")),
            })
        }
    };

    let mut strikes = Vec::new();
    let mut calls = Vec::new();
    let mut digitals = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != columns.len() {
            return Err(Error::Parse { line, reason: format!("expected {} fields, got {}", columns.len(), record.len()) });
        }
        let field = |j: usize| -> Result<f64> {
            let raw = &record[j];
            let v: f64 = raw.parse().map_err(|_| Error::Parse { line, reason: format!("{}: '{raw}' is not a number", columns[j]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, reason: format!("{}: '{raw}' is not finite", columns[j]) });
            }
            Ok(v)
        };
        let k = field(0)?;
        if !(k > 0.0) {
            return Err(Error::Parse { line, reason: format!("strike {k} must be positive") });
        }
        if let Some(&prev) = strikes.last() {
            if k == prev {
                return Err(Error::Parse { line, reason: format!("duplicate strike {k}") });
            }
            if k < prev {
                return Err(Error::Parse { line, reason: format!("strikes must increase: {k} follows {prev}") });
            }
        }
        strikes.push(k);
        calls.push(field(1)? * scale);
        if with_digital {
            digitals.push(field(2)? * scale);
        }
        lines.push(line);
    }
    if strikes.is_empty() {
        return Err(Error::InvalidInput("chain has no strike rows".into()));
    }
    let at_line = |e: Error| match e {
        Error::Arbitrage { index, reason } => {
            let line = lines.get(index.wrapping_sub(1)).copied().unwrap_or(0);
            Error::Arbitrage { index: line, reason: format!("line {line}: {reason}") }
        }
        other => other,
    };
    let mut chain = OptionChain::new(maturity, meta.rate, meta.dividend, env.forward(), strikes, calls).map_err(at_line)?;
    if with_digital {
        chain = chain.with_digitals(digitals).map_err(at_line)?;
    }
    Ok(ParsedChain { chain, env, lines })
}

fn csv_error(e: &csv::Error, fallback: usize) -> Error {
    let line = e.position().map_or(fallback, |p| p.line() as usize);
    Error::Parse { line, reason: e.to_string() }
}

/// Keeps the rows whose strikes appear in `wanted` (matched to a relative
/// `1e-9`).
pub fn select_strikes(parsed: &ParsedChain, wanted: &[f64]) -> Result<ParsedChain> {
    let mut keep = Vec::with_capacity(wanted.len());
    for &w in wanted {
        let pos = parsed
            .chain
            .strikes()
            .iter()
            .position(|&k| (k - w).abs() <= 1e-9 * w.abs().max(1.0))
            .ok_or_else(|| Error::InvalidInput(format!("strike {w} is not in the chain")))?;
        keep.push(pos);
    }
    keep.sort_unstable();
    keep.dedup();
    Ok(ParsedChain {
        chain: parsed.chain.subset(&keep)?,
        env: parsed.env,
        lines: keep.iter().map(|&j| parsed.lines[j]).collect(),
    })
}
