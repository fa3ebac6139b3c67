//! File output and exit codes.

use std::fs;
use std::io::Write;
use std::path::Path;

use entrofit::Error;

use crate::bundle::{Coefficient, PriceRow};

pub const EXIT_OK: i32 = 0;
/// Bad arguments, unreadable files, malformed input.
pub const EXIT_INPUT: i32 = 2;
/// Input prices admit arbitrage.
pub const EXIT_ARBITRAGE: i32 = 3;
/// An iterative solver did not converge.
pub const EXIT_CONVERGENCE: i32 = 4;
/// Domain, quadrature or other numerical failure.
pub const EXIT_NUMERICAL: i32 = 5;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e.root() {
            Error::Arbitrage { .. } => EXIT_ARBITRAGE,
            Error::Convergence { .. } => EXIT_CONVERGENCE,
            Error::InvalidInput(_) | Error::Parse { .. } => EXIT_INPUT,
            Error::Domain(_) | Error::Quadrature { .. } | Error::Numerical(_) | Error::Bucket { .. } => EXIT_NUMERICAL,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_INPUT;
    }
    EXIT_NUMERICAL
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn prices_csv(rows: &[PriceRow]) -> String {
    let mut s = String::from("strike,call,digital\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.strike, r.call, r.digital));
    }
    s
}

pub fn coefficients_csv(rows: &[Coefficient]) -> String {
    let mut s = String::from("lower,upper,ln_alpha,beta\n");
    for c in rows {
        let upper = c.upper.map_or_else(|| "inf".to_string(), |u| u.to_string());
        s.push_str(&format!("{},{upper},{:?},{:?}\n", c.lower, c.ln_alpha, c.beta));
    }
    s
}

pub fn grid_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("S,density\n");
    for (x, q) in rows {
        s.push_str(&format!("{x},{q}\n"));
    }
    s
}
