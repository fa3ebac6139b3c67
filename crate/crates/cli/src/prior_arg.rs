//! `--prior` / `--model` argument syntax: `lebesgue`, or a model name
//! followed by `key=value` pairs, e.g. `heston:kappa=1,theta=0.04,rho=-0.3,sigma=0.25,v0=0.04`.

use std::collections::BTreeMap;

use entrofit::models::{ModelKind, ModelParams};
use entrofit::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorArg {
    Lebesgue,
    Model(ModelParams),
}

impl PriorArg {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("lebesgue") || text.eq_ignore_ascii_case("med") {
            return Ok(PriorArg::Lebesgue);
        }
        Ok(PriorArg::Model(parse_model(text)?))
    }

    /// Canonical text form; parses back to the same value.
    pub fn canonical(&self) -> String {
        match self {
            PriorArg::Lebesgue => "lebesgue".into(),
            PriorArg::Model(p) => model_string(p),
        }
    }
}

/// `kind:name=value,...` with every parameter of the kind present.
pub fn parse_model(text: &str) -> Result<ModelParams> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let kind = ModelKind::parse(kind.trim())?;
    let values = parse_pairs(rest)?;
    let names = kind.parameter_names();
    for key in values.keys() {
        if !names.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!("{} has no parameter '{key}' (expected {})", kind.name(), names.join(", "))));
        }
    }
    let v: Vec<f64> = names
        .iter()
        .map(|n| values.get(*n).copied().ok_or_else(|| Error::InvalidInput(format!("{} needs {n}", kind.name()))))
        .collect::<Result<_>>()?;
    let p = ModelParams::from_values(kind, &v)?;
    p.validate()?;
    Ok(p)
}

/// Model parameters in `kind:name=value,...` form.
pub fn model_string(p: &ModelParams) -> String {
    let kind = p.kind();
    let pairs: Vec<String> = kind.parameter_names().iter().zip(p.values()).map(|(n, v)| format!("{n}={v:?}")).collect();
    format!("{}:{}", kind.name(), pairs.join(","))
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected name=value, got '{item}'")))?;
        let value: f64 = v.trim().parse().map_err(|_| Error::InvalidInput(format!("{}: '{}' is not a number", k.trim(), v.trim())))?;
        if out.insert(k.trim().to_string(), value).is_some() {
            return Err(Error::InvalidInput(format!("parameter '{}' given twice", k.trim())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_form() {
        assert_eq!(PriorArg::parse("lebesgue").unwrap(), PriorArg::Lebesgue);
        assert_eq!(PriorArg::parse("bs:sigma=0.30").unwrap(), PriorArg::Model(ModelParams::BlackScholes { sigma: 0.3 }));
        let h = PriorArg::parse("heston:kappa=1,theta=0.04,rho=-0.3,sigma=0.25,v0=0.04").unwrap();
        assert_eq!(h, PriorArg::Model(ModelParams::heston(1.0, 0.04, -0.3, 0.25, 0.04)));
    }

    #[test]
    fn canonical_round_trip() {
        for text in ["lebesgue", "vg:theta=-0.2808,sigma=0.1535,nu=0.3638", "sz:kappa=1.6316,theta=0.1731,rho=-0.8031,sigma=0.3249,v0=0.1887"] {
            let a = PriorArg::parse(text).unwrap();
            assert_eq!(PriorArg::parse(&a.canonical()).unwrap(), a);
        }
    }

    #[test]
    fn rejects_incomplete_or_unknown() {
        assert!(PriorArg::parse("heston:kappa=1").is_err());
        assert!(PriorArg::parse("bs:vol=0.2").is_err());
        assert!(PriorArg::parse("bs:sigma=-0.2").is_err());
        assert!(PriorArg::parse("cev:sigma=0.2").is_err());
    }
}
