mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mdim_core::cp::CpKind;
use mdim_core::{Error, ErrorClass};

use commands::{EstimateQuantity, Family, OracleKind, Outcome, ReproArgs, VariantArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Bowen,
    Packing,
}

/// Mean dimension estimates for dynamical systems.
#[derive(Debug, Parser)]
#[command(name = "mdim-lab", version)]
struct Cli {
    /// Experiment JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest subset exact covering is tried on.
    #[arg(long, global = true)]
    exact_limit: Option<usize>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Output directory. Without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    Estimate {
        #[arg(long, value_enum, default_value = "mdim")]
        quantity: EstimateQuantity,
    },
    ScaleEntropy,
    StableSet {
        #[arg(long, value_enum)]
        variant: VariantArg,
    },
    Dispersion {
        #[arg(long, value_enum)]
        variant: VariantArg,
    },
    Cp {
        #[arg(long, value_enum, default_value = "bowen")]
        kind: KindArg,
    },
    Check {
        /// 1.1, 1.2, 1.3, 4.1 or C4.3
        #[arg(long)]
        theorem: String,
    },
    Repro {
        #[arg(value_enum)]
        family: Family,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Constant value of the base point for E2 and E3.
        #[arg(long, default_value = "1/4")]
        base_value: String,
        /// Random cloud size for the E1 spanning check.
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Computational => 3,
        ErrorClass::Invariant => 4,
    }
}

fn threads() {
    let n = std::env::var("MDIMLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let cfg = config::load(cli.config.as_deref())?;
    let res = config::resolve(cfg, cli.seed, cli.exact_limit, cli.budget);
    match &cli.cmd {
        Cmd::Estimate { quantity } => commands::estimate(&res, *quantity),
        Cmd::ScaleEntropy => commands::scale_entropy_cmd(&res),
        Cmd::StableSet { variant } => commands::stable_set(&res, *variant),
        Cmd::Dispersion { variant } => commands::dispersion(&res, *variant),
        Cmd::Cp { kind } => commands::cp_cmd(&res, match kind {
            KindArg::Bowen => CpKind::Bowen,
            KindArg::Packing => CpKind::Packing,
        }),
        Cmd::Check { theorem } => commands::check(&res, theorem),
        Cmd::Repro { family, epsilon, delta, n, base_value, points } => commands::repro_cmd(
            &res,
            &ReproArgs {
                family: *family,
                epsilon: epsilon.clone(),
                delta: delta.clone(),
                n: *n,
                base_value: base_value.clone(),
                points: *points,
            },
        ),
        Cmd::Oracle { kind } => commands::oracle_cmd(&res, *kind),
    }
}

fn emit(cli: &Cli, out: &Outcome) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(&out.json).expect("json") + "\n";
    let Some(dir) = &cli.out else {
        print!("{json}");
        return Ok(());
    };
    let seed = out.json.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
    let hash = out.json.get("config_hash").and_then(|v| v.as_str()).unwrap_or("");
    if cli.format != Format::Json {
        output::write_file(dir, &format!("{}.csv", out.name), &output::render_csv(&out.records, seed, hash))?;
    }
    if cli.format != Format::Csv {
        output::write_file(dir, &format!("{}.json", out.name), &json)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    threads();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Err(e) = emit(&cli, &outcome) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(3);
    }
    match &outcome.failure {
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e))
        }
        None => ExitCode::SUCCESS,
    }
}
