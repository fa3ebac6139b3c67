use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use entrofit::models::ModelKind;
use entrofit_cli::bundle::ResultBundle;
use entrofit_cli::chain_csv::{parse_chain, select_strikes, ParsedChain};
use entrofit_cli::commands;
use entrofit_cli::output::{coefficients_csv, exit_code, grid_csv, prices_csv, write_atomic, EXIT_INPUT};
use entrofit_cli::prior_arg::{parse_model, PriorArg};

/// Entropy-based risk-neutral densities from option prices.
#[derive(Parser)]
#[command(name = "entrofit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum entropy density matching the chain's calls.
    FitMed(FitArgs),
    /// Minimum relative entropy density against a model prior.
    FitMred {
        #[command(flatten)]
        fit: FitArgs,
        /// `lebesgue`, or e.g. `bs:sigma=0.3`, `heston:kappa=1,theta=0.04,rho=-0.3,sigma=0.25,v0=0.04`.
        #[arg(long)]
        prior: String,
    },
    /// Density from given calls and digitals (needs a `digital` column).
    FitDigitals {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value = "lebesgue")]
        prior: String,
    },
    /// Prices a fitted density at new strikes.
    Price {
        #[command(flatten)]
        from: FromFit,
        /// Comma-separated strikes.
        #[arg(long, value_delimiter = ',', required = true)]
        strikes: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fair variance swap rate of a fitted density.
    Varswap {
        #[command(flatten)]
        from: FromFit,
        /// `(2/T) E[int mu dt]`; defaults to `2 (r - d)`.
        #[arg(long, allow_hyphen_values = true)]
        drift: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Least-squares fit of a model to the chain's implied vols.
    Calibrate {
        #[arg(long)]
        chain: PathBuf,
        /// bs, heston, sz or vg.
        #[arg(long)]
        model: String,
        /// Starting point(s) in the `--prior` syntax; repeatable.
        #[arg(long)]
        start: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fitted density on an even grid, as two-column CSV.
    Density {
        #[command(flatten)]
        from: FromFit,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Option chain CSV.
    #[arg(long)]
    chain: PathBuf,
    /// Use only these strikes from the chain.
    #[arg(long, value_delimiter = ',')]
    strikes: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArgs,
    /// Coefficient table CSV.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args)]
struct FromFit {
    /// Result JSON written by a fit command.
    #[arg(long)]
    fit: PathBuf,
}

#[derive(Args)]
struct OutArgs {
    /// Result JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Price table CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_chain(path: &Path, strikes: Option<&[f64]>) -> Result<ParsedChain> {
    let parsed = parse_chain(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    Ok(match strikes {
        Some(ks) => select_strikes(&parsed, ks)?,
        None => parsed,
    })
}

fn load_fit(from: &FromFit) -> Result<ResultBundle> {
    ResultBundle::from_json(&read(&from.fit)?).with_context(|| format!("in {}", from.fit.display()))
}

struct Pending {
    files: Vec<(PathBuf, String)>,
    stdout: Option<String>,
}

impl Pending {
    fn bundle(b: &ResultBundle, out: &OutArgs) -> Self {
        let mut files = Vec::new();
        let mut stdout = None;
        match &out.out {
            Some(p) => files.push((p.clone(), b.to_json())),
            None => stdout = Some(b.to_json()),
        }
        if let Some(p) = &out.csv {
            files.push((p.clone(), prices_csv(&b.prices)));
        }
        Self { files, stdout }
    }

    fn commit(self) -> Result<()> {
        for (path, text) in &self.files {
            write_atomic(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        if let Some(s) = self.stdout {
            print!("{s}");
        }
        Ok(())
    }
}

fn fit_outputs(b: &ResultBundle, args: &FitArgs) -> Pending {
    let mut p = Pending::bundle(b, &args.out);
    if let Some(path) = &args.coefficients {
        p.files.push((path.clone(), coefficients_csv(&b.coefficients)));
    }
    p
}

fn run(cli: Cli) -> Result<()> {
    let quad = commands::quadrature_from_env()?;
    let pending = match cli.command {
        Command::FitMed(args) => {
            let parsed = load_chain(&args.chain, args.strikes.as_deref())?;
            let b = commands::fit("fit-med", &parsed, &PriorArg::Lebesgue, &quad)?;
            fit_outputs(&b, &args)
        }
        Command::FitMred { fit: args, prior } => {
            let prior = PriorArg::parse(&prior)?;
            let parsed = load_chain(&args.chain, args.strikes.as_deref())?;
            let b = commands::fit("fit-mred", &parsed, &prior, &quad)?;
            fit_outputs(&b, &args)
        }
        Command::FitDigitals { fit: args, prior } => {
            let prior = PriorArg::parse(&prior)?;
            let parsed = load_chain(&args.chain, args.strikes.as_deref())?;
            let b = commands::fit_digitals(&parsed, &prior, &quad)?;
            fit_outputs(&b, &args)
        }
        Command::Price { from, strikes, out } => {
            let b = commands::price(&load_fit(&from)?, &strikes)?;
            Pending::bundle(&b, &out)
        }
        Command::Varswap { from, drift, out } => {
            let b = commands::varswap(&load_fit(&from)?, drift)?;
            Pending::bundle(&b, &out)
        }
        Command::Calibrate { chain, model, start, out } => {
            let kind = ModelKind::parse(&model)?;
            let starts = start.iter().map(|s| parse_model(s)).collect::<entrofit::Result<Vec<_>>>()?;
            let parsed = load_chain(&chain, None)?;
            let b = commands::calibrate(&parsed, kind, starts, &quad)?;
            Pending::bundle(&b, &out)
        }
        Command::Density { from, grid, lo, hi, out } => {
            let rows = commands::density_grid(&load_fit(&from)?, grid, lo, hi)?;
            let text = grid_csv(&rows);
            match out {
                Some(p) => Pending { files: vec![(p, text)], stdout: None },
                None => Pending { files: Vec::new(), stdout: Some(text) },
            }
        }
    };
    pending.commit()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
