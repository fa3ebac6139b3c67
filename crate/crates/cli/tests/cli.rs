use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entrofit::models::black::{black_call, black_digital};
use entrofit_cli::bundle::ResultBundle;
use entrofit_cli::parse_chain;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn entrofit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entrofit")).args(args).env_remove("ENTROFIT_QUAD_TOL").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = entrofit(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bundled_fixture_holds_black_scholes_prices() {
    let text = std::fs::read_to_string(fixture("bs_sigma25_digitals.csv")).unwrap();
    let parsed = parse_chain(&text).unwrap();
    assert_eq!(parsed.chain.strikes(), &[60.0, 80.0, 100.0, 120.0, 140.0]);
    for (i, &k) in parsed.chain.strikes().iter().enumerate() {
        assert!((parsed.chain.calls()[i] - black_call(100.0, k, 0.25, 1.0)).abs() < 1e-12);
        assert!((parsed.chain.digitals().unwrap()[i] - black_digital(100.0, k, 0.25, 1.0)).abs() < 1e-12);
    }
}

#[test]
fn med_then_price_reproduces_the_reference_digital() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("med.json");
    ok(&["fit-med", "--chain", path_str(&fixture("bs_sigma25.csv")), "--out", path_str(&fit)]);
    let priced = ResultBundle::from_json(&ok(&["price", "--fit", path_str(&fit), "--strikes", "100"])).unwrap();
    let row = &priced.prices[0];
    assert_eq!(row.strike, 100.0);
    assert!((row.digital - 0.4510).abs() <= 0.00005, "digital {}", row.digital);
}

#[test]
fn varswap_after_mred_with_black_scholes_prior() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("mred.json");
    ok(&[
        "fit-mred",
        "--chain",
        path_str(&fixture("bs_sigma25.csv")),
        "--strikes",
        "60,100,140",
        "--prior",
        "bs:sigma=0.30",
        "--out",
        path_str(&fit),
    ]);
    let b = ResultBundle::from_json(&ok(&["varswap", "--fit", path_str(&fit)])).unwrap();
    let v = b.varswap.unwrap();
    assert!((v.variance - 0.0632).abs() <= 0.00005, "variance {}", v.variance);
    assert!((v.variance - v.variance_entropy_route).abs() < 1e-8);
}

#[test]
fn density_grid_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("med.json");
    let grid = dir.path().join("grid.csv");
    ok(&["fit-med", "--chain", path_str(&fixture("bs_sigma25.csv")), "--out", path_str(&fit)]);
    ok(&["density", "--fit", path_str(&fit), "--grid", "256", "--out", path_str(&grid)]);
    let text = std::fs::read_to_string(&grid).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("S,density"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 256);
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum();
    assert!((mass - 1.0).abs() <= 1e-4, "mass {mass}");
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let chain = fixture("bs_sigma25.csv");
    let args = ["fit-mred", "--chain", path_str(&chain), "--prior", "bs:sigma=0.2"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn reloaded_coefficients_reprice_the_table_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    let coef = dir.path().join("coef.csv");
    ok(&[
        "fit-mred",
        "--chain",
        path_str(&fixture("bs_sigma25.csv")),
        "--prior",
        "heston:kappa=1,theta=0.04,rho=-0.3,sigma=0.25,v0=0.04",
        "--out",
        path_str(&fit),
        "--coefficients",
        path_str(&coef),
    ]);
    let original = ResultBundle::from_json(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    let strikes: Vec<String> = original.prices.iter().map(|r| r.strike.to_string()).collect();
    let again = ResultBundle::from_json(&ok(&["price", "--fit", path_str(&fit), "--strikes", &strikes.join(",")])).unwrap();
    assert_eq!(original.prices, again.prices);
    let coef_text = std::fs::read_to_string(&coef).unwrap();
    assert_eq!(coef_text.lines().count(), 1 + original.coefficients.len());
    assert!(coef_text.lines().last().unwrap().starts_with("140,inf,"));
}

#[test]
fn digitals_path_recovers_the_prior() {
    let out = ok(&["fit-digitals", "--chain", path_str(&fixture("bs_sigma25_digitals.csv")), "--prior", "bs:sigma=0.25"]);
    let b = ResultBundle::from_json(&out).unwrap();
    // calls and digitals come from the prior itself, so the tilt is flat
    for c in &b.coefficients {
        assert!(c.ln_alpha.abs() < 1e-6 && c.beta.abs() < 1e-7, "{c:?}");
    }
    assert!(b.diagnostics.unwrap().relative_entropy.unwrap() < 1e-9);
}

#[test]
fn calibrate_black_scholes_to_its_own_prices() {
    let b = ResultBundle::from_json(&ok(&["calibrate", "--chain", path_str(&fixture("bs_sigma25.csv")), "--model", "bs"])).unwrap();
    let c = b.calibration.unwrap();
    let entrofit::models::ModelParams::BlackScholes { sigma } = c.params else { panic!("{:?}", c.params) };
    assert!((sigma - 0.25).abs() < 1e-8);
    assert!(c.relative_entropy < 1e-8);
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let arb = write(dir.path(), "arb.csv", "# forward=100, T=1\nstrike,call\n80,22.2656\n100,23.0\n");
    let out = entrofit(&["fit-med", "--chain", path_str(&arb)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let bad = write(dir.path(), "bad.csv", "# forward=100, T=1\nstrike,call\n80,x\n");
    assert_eq!(entrofit(&["fit-med", "--chain", path_str(&bad)]).status.code(), Some(2));
    assert_eq!(entrofit(&["fit-med", "--chain", "/nonexistent/chain.csv"]).status.code(), Some(2));
    assert_eq!(entrofit(&["fit-med"]).status.code(), Some(2));
    assert_eq!(entrofit(&["fit-mred", "--chain", path_str(&fixture("bs_sigma25.csv")), "--prior", "bs:vol=1"]).status.code(), Some(2));

    // a narrow prior cannot carry the far out-of-the-money call
    let target = dir.path().join("never.json");
    let out = entrofit(&[
        "fit-mred",
        "--chain",
        path_str(&fixture("bs_sigma25.csv")),
        "--prior",
        "bs:sigma=0.01",
        "--out",
        path_str(&target),
    ]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!target.exists(), "failed command left a partial result");
}

#[test]
fn quadrature_tolerance_from_environment() {
    let chain = fixture("bs_sigma25.csv");
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_entrofit"))
            .args(["fit-med", "--chain", path_str(&chain)])
            .env("ENTROFIT_QUAD_TOL", tol)
            .output()
            .unwrap()
    };
    let out = run("1e-9");
    assert!(out.status.success());
    let b = ResultBundle::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(b.quad_rel_tol, 1e-9);
    assert_eq!(run("lots").status.code(), Some(2));
}
