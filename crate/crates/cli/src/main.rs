use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use haps_planner::optimizer::{run_baseline, solve, Regime};
use haps_planner::report::{
    baseline_row, build_artifact, csv_string, write_solution_csv, write_solution_json, write_sweep_csv,
};
use haps_planner::{ScenarioConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "haps-planner", version, about = "HAPS-RIS and multi-UAV coverage planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    UavOnly,
    HapsOnly,
    EqualSplit,
    Optimized,
    All,
}

impl RegimeArg {
    fn regimes(self) -> Vec<Regime> {
        match self {
            RegimeArg::UavOnly => vec![Regime::UavOnly],
            RegimeArg::HapsOnly => vec![Regime::HapsOnly],
            RegimeArg::EqualSplit => vec![Regime::EqualSplit],
            RegimeArg::Optimized => vec![Regime::Optimized],
            RegimeArg::All => Regime::ALL.to_vec(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write the solution artifact.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; CSV also writes `<stem>_summary.csv` and `<stem>_trace.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Compare bandwidth regimes on one layout.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = RegimeArg::All)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep over seeds `0..replications`.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_solve(config: &Path, seed: u64, out: &Path, format: Format) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let scenario = cfg.build(seed).with_context(|| format!("building scenario from {}", config.display()))?;
    let outcome = solve(&scenario, &cfg.optimizer, seed)?;
    let artifact = build_artifact(&outcome, &cfg, &scenario, seed);
    let written = match format {
        Format::Json => {
            write_solution_json(&artifact, out)?;
            vec![out.to_path_buf()]
        }
        Format::Csv => write_solution_csv(&artifact, out)?,
    };
    let s = &artifact.summary;
    println!(
        "kappa_opt={} r_star_m={} u_haps={} n_uav={} outage_count={}",
        s.kappa_opt.0, s.r_star_m, s.u_haps, s.n_uav, s.outage_count
    );
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    if s.outage_count > 0 {
        eprintln!("{} users below the minimum rate", s.outage_count);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_baseline(config: &Path, regime: RegimeArg, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let scenario = cfg.build(seed).with_context(|| format!("building scenario from {}", config.display()))?;
    let rows = regime
        .regimes()
        .into_iter()
        .map(|r| Ok(baseline_row(r, &run_baseline(r, &scenario, &cfg.optimizer, seed)?.best)))
        .collect::<Result<Vec<_>>>()?;
    let text = csv_string(&rows)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(spec: &Path, out: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec = SweepSpec::from_toml_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    let result = haps_planner::run_sweep(&spec)?;
    write_sweep_csv(&result.rows, out)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows, {failed} failed cells", result.rows.len());
    eprintln!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(config: &Path, seed: u64) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let s = cfg.build(seed).with_context(|| format!("validating {}", config.display()))?;
    println!(
        "ok: {} users, {} subcarriers, M = {}, r0 = {} bit/s",
        s.user_count(),
        s.total_subcarriers,
        s.ris_elements,
        s.min_rate_bps
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config, seed, out, format } => cmd_solve(config, *seed, out, *format),
        Command::Baseline { config, regime, seed, out } => cmd_baseline(config, *regime, *seed, out.as_deref()),
        Command::Sweep { spec, out } => cmd_sweep(spec, out),
        Command::Validate { config, seed } => cmd_validate(config, *seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
