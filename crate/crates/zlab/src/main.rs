//! `zlab`: runs, verification suites, the kernel benchmark and star-product
//! checks from the command line.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on a
//! configuration or numeric error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use zlab_core::lab::bench::{kernel_bench, render_bench};
use zlab_core::lab::checks::{all_pass, render_table};
use zlab_core::lab::config::{preset, RunConfig, PRESET_NAMES};
use zlab_core::lab::criteria::star_group;
use zlab_core::lab::run::run;
use zlab_core::lab::verify::verify;

#[derive(Parser, Debug)]
#[command(name = "zlab", version, about = "Asymptotic tails of planar Euler flows: runs and checks")]
struct Cli {
    /// Worker threads (speed only; results are identical for any count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the RNG seed of the run configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for run artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a scenario from a TOML config file or a preset name.
    Run {
        /// Path to a config file, or one of the preset names.
        config: String,
    },
    /// Run a verification suite: algebra, cauchy, dynamics, group or all.
    Verify { suite: String },
    /// Time direct against far-field summation with M = G = each size.
    KernelBench { sizes: Vec<usize> },
    /// Star-product group axioms and the composition fit up to order N.
    StarCheck { order: usize },
}

fn load_config(arg: &str) -> Result<RunConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(RunConfig::from_toml(&text)?);
    }
    preset(arg).with_context(|| format!("{arg:?} is neither a config file nor a preset ({})", PRESET_NAMES.join(", ")))
}

fn default_out_dir(arg: &str, cfg: &RunConfig) -> Result<PathBuf> {
    let stem = Path::new(arg).file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let hash = cfg.content_hash()?;
    Ok(PathBuf::from("zlab-runs").join(format!("{stem}-{}", &hash[..12])))
}

fn cmd_run(arg: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let mut cfg = load_config(arg)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dir = match out.or_else(|| cfg.out.clone()) {
        Some(d) => d,
        None => default_out_dir(arg, &cfg)?,
    };
    let record = run(&cfg, &dir)?;
    print!("{}", render_table(&record.checks));
    println!("artifacts: {}", record.out_dir.display());
    if let Some(f) = &record.failure {
        eprintln!("run stopped early: {f}");
    }
    Ok(record.exit_code())
}

fn gate(checks: &[zlab_core::lab::checks::CheckResult]) -> i32 {
    print!("{}", render_table(checks));
    if all_pass(checks) {
        0
    } else {
        2
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config } => cmd_run(&config, cli.seed, cli.out),
        Command::Verify { suite } => Ok(gate(&verify(&suite)?)),
        Command::KernelBench { sizes } => {
            let rows = kernel_bench(&sizes)?;
            print!("{}", render_bench(&rows));
            Ok(if rows.iter().all(|r| r.counts) { 0 } else { 2 })
        }
        Command::StarCheck { order } => Ok(gate(&star_group(order, 100).checks)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
