//! `sparse-oco`: run one experiment or a sweep from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration, 3 invariant violation,
//! 4 runtime or stream failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sparse_oco::config::ExperimentConfig;
use sparse_oco::experiment::{run_experiment, run_sweep, write_run_artifacts, CellStatus};
use sparse_oco::Error;

#[derive(Parser)]
#[command(
    name = "sparse-oco",
    version,
    about = "Sparse online convex optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment.
    Run(Common),
    /// Run the cross product of the config's [sweep] axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of cells run concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Keep going (and exit 0) when a cell fails.
        #[arg(long)]
        keep_going: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; defaults to `[output] dir` or the config's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Store every prediction (enables online-to-batch output).
    #[arg(long)]
    snapshot_predictions: bool,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.snapshot_predictions {
            cfg.snapshot_predictions = true;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        let base = self
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        match &cfg.output.dir {
            Some(d) => base.join(d),
            None => base,
        }
    }

    fn stem(&self) -> String {
        self.config
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(common) => cmd_run(&common),
        Command::Sweep {
            common,
            workers,
            keep_going,
        } => cmd_sweep(&common, workers, keep_going),
    };
    ExitCode::from(code)
}

fn report(err: &anyhow::Error) -> u8 {
    eprintln!("error: {err:#}");
    err.downcast_ref::<Error>()
        .map_or(4, |e| e.exit_code() as u8)
}

fn cmd_run(common: &Common) -> u8 {
    match try_run(common) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn try_run(common: &Common) -> anyhow::Result<u8> {
    let cfg = common.load()?;
    let art = run_experiment(&cfg)?;
    let dir = common.out_dir(&cfg);
    let csv = write_run_artifacts(&dir, &common.stem(), &art)
        .with_context(|| format!("writing artifacts to {}", dir.display()))?;
    print!("{}", art.summary.render());
    println!("  ledger: {}", csv.display());
    if let Some(f) = &art.failure {
        eprintln!("error: {f}");
    }
    Ok(art.exit_code() as u8)
}

fn cmd_sweep(common: &Common, workers: usize, keep_going: bool) -> u8 {
    match try_sweep(common, workers, keep_going) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn try_sweep(common: &Common, workers: usize, keep_going: bool) -> anyhow::Result<u8> {
    let cfg = common.load()?;
    let (summary, results) = run_sweep(&cfg, workers)?;
    let root = common.out_dir(&cfg);
    let stem = common.stem();
    let cell_dir = root.join(&stem);
    for (cell, res) in summary.cells.iter().zip(&results) {
        if let Ok(art) = res {
            write_run_artifacts(&cell_dir, &format!("cell-{:03}", cell.index), art).with_context(
                || format!("writing cell {} to {}", cell.index, cell_dir.display()),
            )?;
        }
    }
    let agg = root.join(format!("{stem}.sweep.json"));
    std::fs::write(&agg, summary.to_json() + "\n")
        .with_context(|| format!("writing {}", agg.display()))?;
    for cell in &summary.cells {
        let slope = cell
            .comparators
            .first()
            .and_then(|c| c.slope)
            .map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
        match cell.status {
            CellStatus::Ok => println!("cell {:03} ok      slope {slope}", cell.index),
            CellStatus::Failed => println!(
                "cell {:03} FAILED  {}",
                cell.index,
                cell.error.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    println!(
        "{} cell(s), {} failed; aggregate: {}",
        summary.cells.len(),
        summary.failed,
        agg.display()
    );
    if summary.failed > 0 && !keep_going {
        return Ok(summary.first_failure_code() as u8);
    }
    Ok(0)
}
