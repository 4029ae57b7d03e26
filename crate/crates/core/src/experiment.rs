//! Config-driven experiment runner: builds the stream and algorithm, runs
//! it, and renders the ledger CSV and the run summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{
    AbsoluteStream, AdversarialStream, Algorithm, ComparatorConfig, ComparatorKind, CoverPrior,
    ExperimentConfig, ExpertsStream, QuadraticStream, StreamConfig, SweepConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{build_cover, sparsity_prior};
use crate::grid::{canonical_basis, corners};
use crate::meta::{run_boaplus, run_saboa, run_squint, RunOptions, RunOutput};
use crate::metrics::{
    fit_rate_slope, format_float, regret_curve, write_ledger_csv, RegretColumn, SlopeFit,
};
use crate::par::Execution;
use crate::streams::{
    sparse_parameter, AbsoluteDeviationConfig, AbsoluteDeviationStream, AdversarialConfig,
    AdversarialStrongStream, ExpertAdviceStream, LossStream, QuadraticConfig, QuadraticIIDStream,
    SyntheticExperts,
};
use crate::vector::ParamVector;

/// Version of the summary and sweep JSON layouts.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Artifact version string embedded in every output file.
pub fn artifact_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Builds the loss stream described by the config.
pub fn build_stream(cfg: &ExperimentConfig) -> Result<Box<dyn LossStream>> {
    let seed = cfg.seed;
    let prefix = |e: Error| match e {
        Error::Config(m) => Error::Config(format!("stream: {m}")),
        other => other,
    };
    let stream: Box<dyn LossStream> = match &cfg.stream {
        StreamConfig::Quadratic(QuadraticStream {
            dim,
            sparsity,
            theta_norm,
            noise,
            noise_kind,
            latent,
            truncation,
            design,
        }) => {
            let theta = sparse_parameter(*dim, *sparsity, *theta_norm, seed).map_err(prefix)?;
            let mut q = QuadraticConfig::new(theta, design.clone(), *noise, seed);
            q.noise_kind = *noise_kind;
            q.latent = *latent;
            q.truncation = *truncation;
            Box::new(QuadraticIIDStream::new(q).map_err(prefix)?)
        }
        StreamConfig::Adversarial(AdversarialStream {
            dim,
            sparsity,
            modulus,
            centre_norm,
            spread,
        }) => Box::new(
            AdversarialStrongStream::new(AdversarialConfig {
                dim: *dim,
                modulus: *modulus,
                sparsity: *sparsity,
                centre_norm: *centre_norm,
                spread: *spread,
                seed,
            })
            .map_err(prefix)?,
        ),
        StreamConfig::Experts(ExpertsStream {
            experts,
            good,
            outcome_noise,
            bias,
            max_noise,
        }) => {
            let mut s = SyntheticExperts::new(*experts, *good, seed);
            s.outcome_noise = *outcome_noise;
            s.bias = (bias[0], bias[1]);
            s.max_noise = *max_noise;
            Box::new(ExpertAdviceStream::synthetic(s).map_err(prefix)?)
        }
        StreamConfig::Absolute(AbsoluteStream {
            dim,
            sparsity,
            theta_norm,
            rows,
        }) => {
            let theta = sparse_parameter(*dim, *sparsity, *theta_norm, seed).map_err(prefix)?;
            Box::new(
                AbsoluteDeviationStream::new(AbsoluteDeviationConfig {
                    theta_star: theta,
                    rows: *rows,
                    seed,
                })
                .map_err(prefix)?,
            )
        }
    };
    Ok(stream)
}

/// Resolves the configured comparators to `(label, point)` pairs.
pub fn resolve_comparators(
    cfg: &ExperimentConfig,
    stream: &dyn LossStream,
) -> Result<Vec<(String, ParamVector)>> {
    let dim = stream.dim();
    cfg.comparators
        .iter()
        .enumerate()
        .map(|(j, c)| Ok((c.label(j), comparator_point(c, j, stream, dim)?)))
        .collect()
}

fn comparator_point(
    c: &ComparatorConfig,
    j: usize,
    stream: &dyn LossStream,
    dim: usize,
) -> Result<ParamVector> {
    let field = format!("comparators[{j}]");
    let point = match c.kind {
        ComparatorKind::Optimum => stream.optimum().ok_or_else(|| {
            Error::config(format!(
                "{field}.kind: stream `{}` has no known optimum",
                stream.name()
            ))
        })?,
        ComparatorKind::Zero => ParamVector::zeros(dim),
        ComparatorKind::Basis => {
            let index = c.index.unwrap_or(0);
            if index >= dim {
                return Err(Error::config(format!(
                    "{field}.index: {index} is out of range for d = {dim}"
                )));
            }
            ParamVector::basis(dim, index, 1.0)
        }
        ComparatorKind::Vector => {
            let coords = c.coords.clone().unwrap_or_default();
            if coords.len() != dim {
                return Err(Error::config(format!(
                    "{field}.coords: expected {dim} coordinates, got {}",
                    coords.len()
                )));
            }
            ParamVector::new(coords).map_err(|e| Error::config(format!("{field}.coords: {e}")))?
        }
    };
    if point.norm_l1() > 1.0 + crate::geometry::UNIT_BALL_SLACK {
        return Err(Error::config(format!(
            "{field}: comparator lies outside the unit l1-ball"
        )));
    }
    Ok(point)
}

/// Runner options derived from the config.
pub fn run_options(cfg: &ExperimentConfig) -> RunOptions {
    RunOptions {
        scale_multiplier: cfg.scale.multiplier,
        scale: cfg.scale.value,
        exponent: cfg.exponent,
        leader: cfg.leader.clone(),
        checkpoints: cfg.checkpoints.resolve(cfg.horizon),
        full_snapshots: cfg.snapshot_predictions,
        execution: cfg.execution,
    }
}

/// Runs the configured algorithm against `stream`.
pub fn run_algorithm(cfg: &ExperimentConfig, stream: &dyn LossStream) -> Result<RunOutput> {
    let opts = run_options(cfg);
    let dim = stream.dim();
    let out = match cfg.algorithm {
        Algorithm::Squint => run_squint(stream, canonical_basis(dim), cfg.horizon, &opts),
        Algorithm::SquintCorners => run_squint(stream, corners(dim, 1.0), cfg.horizon, &opts),
        Algorithm::SquintCover => {
            let cover = cfg
                .cover
                .as_ref()
                .ok_or_else(|| Error::config("cover: missing [cover] table"))?;
            let grid = build_cover(dim, cover.eps).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("cover.eps: {m}")),
                other => other,
            })?;
            let grid = match cover.prior {
                CoverPrior::Sparsity => sparsity_prior(&grid),
                CoverPrior::Uniform => grid,
            };
            run_squint(stream, grid, cfg.horizon, &opts)
        }
        Algorithm::BoaPlus => run_boaplus(stream, cfg.horizon, &opts),
        Algorithm::Saboa => run_saboa(stream, cfg.horizon, &opts),
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorSummary {
    pub name: String,
    /// Average regret at the last recorded round.
    pub final_avg_regret: Option<f64>,
    /// Fitted exponent of average regret against `T` over the checkpoints
    /// at or beyond `slope_min_t`.
    pub slope: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub index: usize,
    pub first_round: usize,
    pub last_round: usize,
    pub grid_size: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub artifact: String,
    pub config: ExperimentConfig,
    pub stream: String,
    pub regime: String,
    pub rounds_completed: usize,
    pub complete: bool,
    pub wall_time_seconds: f64,
    pub comparators: Vec<ComparatorSummary>,
    pub sessions: Vec<SessionSummary>,
    pub max_gradient: f64,
    pub gradient_bound: f64,
    pub invariant_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub online_to_batch: Option<Vec<f64>>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub exit_code: i32,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Short plain-text report for the terminal.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} on {} ({}), {} of {} rounds{}\n",
            algorithm_name(self.config.algorithm),
            self.stream,
            self.regime,
            self.rounds_completed,
            self.config.horizon,
            if self.complete { "" } else { " (incomplete)" }
        );
        for c in &self.comparators {
            let regret = c
                .final_avg_regret
                .map_or("n/a".to_string(), |r| format!("{r:.4e}"));
            let slope = c
                .slope
                .map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
            s.push_str(&format!(
                "  vs {:<12} avg regret {regret}  slope {slope}\n",
                c.name
            ));
        }
        s.push_str(&format!(
            "  max gradient {:.4} (bound {:.4}), {} session(s), {:.2}s\n",
            self.max_gradient,
            self.gradient_bound,
            self.sessions.len().max(1),
            self.wall_time_seconds
        ));
        if let Some(f) = &self.failure {
            s.push_str(&format!("  FAILED: {f}\n"));
        }
        s
    }
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Squint => "squint",
        Algorithm::SquintCorners => "squint-corners",
        Algorithm::SquintCover => "squint-cover",
        Algorithm::BoaPlus => "boa+",
        Algorithm::Saboa => "saboa",
    }
}

/// Everything a run produces. A run that failed mid-way still carries the
/// partial ledger; `failure` holds the error.
#[derive(Debug)]
pub struct RunArtifacts {
    pub output: RunOutput,
    pub summary: RunSummary,
    pub csv: String,
    /// One row per round when prediction snapshots were requested.
    pub predictions_csv: Option<String>,
    pub failure: Option<Error>,
}

impl RunArtifacts {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, Error::exit_code)
    }
}

/// Builds, runs and renders one experiment. Configuration problems are
/// returned as `Err`; failures during the run end up in
/// [`RunArtifacts::failure`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();
    let stream = build_stream(cfg)?;
    let comparators = resolve_comparators(cfg, stream.as_ref())?;
    let mut output = run_algorithm(cfg, stream.as_ref())?;
    let wall = start.elapsed().as_secs_f64();
    let mut failure = output.failure.take();

    let rounds = output.ledger.reached_checkpoints();
    let mut columns = Vec::with_capacity(comparators.len());
    let mut summaries = Vec::with_capacity(comparators.len());
    for (name, point) in &comparators {
        let values = match regret_curve(
            &output.ledger,
            point,
            stream.as_ref(),
            &rounds,
            cfg.execution,
        ) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                vec![f64::NAN; rounds.len()]
            }
        };
        let fit_points: Vec<(f64, f64)> = rounds
            .iter()
            .zip(&values)
            .filter(|(t, _)| **t >= cfg.slope_min_t)
            .map(|(t, r)| (*t as f64, *r))
            .collect();
        let (slope, slope_note) = match fit_rate_slope(&fit_points, 0) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        summaries.push(ComparatorSummary {
            name: name.clone(),
            final_avg_regret: values.last().copied().filter(|v| v.is_finite()),
            slope,
            slope_note,
        });
        columns.push(RegretColumn {
            name: name.clone(),
            values,
        });
    }

    let preamble = vec![artifact_version(), format!("config {}", cfg.to_json())];
    let mut csv = Vec::new();
    write_ledger_csv(&mut csv, &output.ledger, &rounds, &columns, &preamble)?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");

    let predictions_csv = output.ledger.predictions().map(|preds| {
        let mut s = preamble
            .iter()
            .map(|l| format!("# {l}\n"))
            .collect::<String>();
        s.push('t');
        for j in 0..output.ledger.dim() {
            s.push_str(&format!(",theta_{j}"));
        }
        s.push('\n');
        for (t, p) in preds.iter().enumerate() {
            s.push_str(&(t + 1).to_string());
            for v in p.iter() {
                s.push(',');
                s.push_str(&format_float(*v));
            }
            s.push('\n');
        }
        s
    });
    let online_to_batch = if output.ledger.is_empty() {
        None
    } else {
        crate::metrics::online_to_batch(&output.ledger, output.ledger.len())
            .ok()
            .map(ParamVector::into_vec)
    };

    let sessions = output
        .sessions
        .iter()
        .map(|s| SessionSummary {
            index: s.index,
            first_round: s.rounds.start,
            last_round: s.rounds.end.saturating_sub(1),
            grid_size: s.grid.len(),
            scale: s.scale,
        })
        .collect();
    let summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        artifact: artifact_version(),
        config: cfg.clone(),
        stream: stream.name().to_string(),
        regime: format!("{:?}", stream.regime()).to_lowercase(),
        rounds_completed: output.ledger.len(),
        complete: output.ledger.is_complete() && failure.is_none(),
        wall_time_seconds: wall,
        comparators: summaries,
        sessions,
        max_gradient: output.max_gradient,
        gradient_bound: output.gradient_bound,
        invariant_violations: usize::from(matches!(failure, Some(Error::Invariant(_)))),
        online_to_batch,
        failure: failure.as_ref().map(ToString::to_string),
        exit_code: failure.as_ref().map_or(0, Error::exit_code),
    };
    Ok(RunArtifacts {
        output,
        summary,
        csv,
        predictions_csv,
        failure,
    })
}

/// Writes `<stem>.csv`, `<stem>.summary.json` and, when present,
/// `<stem>.predictions.csv` into `dir`. Returns the CSV path.
pub fn write_run_artifacts(dir: &Path, stem: &str, art: &RunArtifacts) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, &art.csv)?;
    fs::write(
        dir.join(format!("{stem}.summary.json")),
        art.summary.to_json() + "\n",
    )?;
    if let Some(p) = &art.predictions_csv {
        fs::write(dir.join(format!("{stem}.predictions.csv")), p)?;
    }
    Ok(csv_path)
}

/// Overrides applied to the base config for one sweep cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellAxes {
    pub horizon: usize,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    pub seed: u64,
}

fn sparsity_of(stream: &StreamConfig) -> Option<usize> {
    match stream {
        StreamConfig::Quadratic(s) => Some(s.sparsity),
        StreamConfig::Adversarial(s) => Some(s.sparsity),
        StreamConfig::Absolute(s) => Some(s.sparsity),
        StreamConfig::Experts(_) => None,
    }
}

fn with_axes(base: &ExperimentConfig, axes: &CellAxes) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.horizon = axes.horizon;
    cfg.seed = axes.seed;
    match &mut cfg.stream {
        StreamConfig::Quadratic(QuadraticStream { dim, sparsity, .. })
        | StreamConfig::Adversarial(AdversarialStream { dim, sparsity, .. })
        | StreamConfig::Absolute(AbsoluteStream { dim, sparsity, .. }) => {
            *dim = axes.dim;
            *sparsity = axes.sparsity.unwrap_or(*sparsity);
        }
        StreamConfig::Experts(s) => s.experts = axes.dim,
    }
    cfg
}

/// Expands the sweep axes into one config per cell, in row-major order over
/// (horizon, dim, sparsity, seed).
pub fn sweep_cells(base: &ExperimentConfig) -> Result<Vec<(CellAxes, ExperimentConfig)>> {
    let sweep: SweepConfig = match &base.sweep {
        Some(s) if !s.is_empty() => s.clone(),
        _ => return Err(Error::config("sweep: config has no sweep axis")),
    };
    let base_sparsity = sparsity_of(&base.stream);
    if !sweep.sparsity.is_empty() && base_sparsity.is_none() {
        return Err(Error::config(
            "sweep.sparsity: the experts stream has no sparsity parameter",
        ));
    }
    let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
    let horizons = or(&sweep.horizon, base.horizon);
    let dims = or(&sweep.dim, base.stream.dim());
    let sparsities: Vec<Option<usize>> = if sweep.sparsity.is_empty() {
        vec![base_sparsity]
    } else {
        sweep.sparsity.iter().map(|s| Some(*s)).collect()
    };
    let seeds = if sweep.seed.is_empty() {
        vec![base.seed]
    } else {
        sweep.seed.clone()
    };
    let mut cells = Vec::new();
    for &horizon in &horizons {
        for &dim in &dims {
            for &sparsity in &sparsities {
                for &seed in &seeds {
                    let axes = CellAxes {
                        horizon,
                        dim,
                        sparsity,
                        seed,
                    };
                    let cfg = with_axes(base, &axes);
                    cells.push((axes, cfg));
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub index: usize,
    pub axes: CellAxes,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rounds_completed: usize,
    pub comparators: Vec<ComparatorSummary>,
    #[serde(skip)]
    pub exit_code: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Aggregate of a sweep. Contains no timing so that reruns are identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub artifact: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    pub failed: usize,
}

impl SweepSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep summary serializes")
    }

    /// Exit code of the first failed cell, or 0.
    pub fn first_failure_code(&self) -> i32 {
        self.cells
            .iter()
            .find(|c| c.status == CellStatus::Failed)
            .map_or(0, |c| c.exit_code)
    }
}

/// Result of one sweep cell: its artifacts, or the error that prevented the
/// run from starting.
pub type CellResult = Result<RunArtifacts>;

/// Runs every cell on `workers` threads (sequentially when `workers <= 1`
/// or the `parallel` feature is off) and aggregates after all have joined.
/// Cells are independent, so the aggregate does not depend on `workers`.
pub fn run_sweep(
    base: &ExperimentConfig,
    workers: usize,
) -> Result<(SweepSummary, Vec<CellResult>)> {
    base.validate()?;
    let cells = sweep_cells(base)?;
    let results = run_cells(&cells, workers)?;
    let reports: Vec<CellReport> = cells
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(index, ((axes, _), res))| cell_report(index, axes.clone(), res))
        .collect();
    let failed = reports
        .iter()
        .filter(|r| r.status == CellStatus::Failed)
        .count();
    let summary = SweepSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        artifact: artifact_version(),
        config: base.clone(),
        cells: reports,
        failed,
    };
    Ok((summary, results))
}

fn run_cells(cells: &[(CellAxes, ExperimentConfig)], workers: usize) -> Result<Vec<CellResult>> {
    let run = |(_, cfg): &(CellAxes, ExperimentConfig)| run_experiment(cfg);
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("workers: cannot start thread pool: {e}")))?;
        return Ok(pool.install(|| cells.par_iter().map(run).collect()));
    }
    let _ = workers;
    Ok(cells.iter().map(run).collect())
}

fn cell_report(index: usize, axes: CellAxes, res: &CellResult) -> CellReport {
    match res {
        Ok(art) => CellReport {
            index,
            axes,
            status: if art.failure.is_some() {
                CellStatus::Failed
            } else {
                CellStatus::Ok
            },
            error: art.summary.failure.clone(),
            rounds_completed: art.summary.rounds_completed,
            comparators: art.summary.comparators.clone(),
            exit_code: art.exit_code(),
        },
        Err(e) => CellReport {
            index,
            axes,
            status: CellStatus::Failed,
            error: Some(e.to_string()),
            rounds_completed: 0,
            comparators: Vec::new(),
            exit_code: e.exit_code(),
        },
    }
}

/// Execution strategy forced onto a config, e.g. from a command-line flag.
pub fn with_execution(mut cfg: ExperimentConfig, exec: Execution) -> ExperimentConfig {
    cfg.execution = exec;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
version = 1
algorithm = "squint-corners"
horizon = 64
seed = 5
slope_min_t = 4

[stream]
kind = "quadratic"
dim = 4
sparsity = 2

[[comparators]]
kind = "optimum"

[[comparators]]
kind = "zero"
"#,
        )
        .unwrap()
    }

    #[test]
    fn run_produces_csv_and_summary() {
        let art = run_experiment(&base()).unwrap();
        assert!(art.failure.is_none());
        let lines: Vec<&str> = art.csv.lines().collect();
        assert!(lines[0].starts_with("# sparse-oco "));
        assert!(lines[1].starts_with("# config {"));
        assert_eq!(
            lines[2],
            "t,cumulative_loss,avg_regret_optimum,avg_regret_zero"
        );
        assert_eq!(lines.len(), 3 + 7);
        assert!(lines.last().unwrap().starts_with("64,"));
        assert_eq!(art.summary.comparators.len(), 2);
        assert!(art.summary.comparators[0].slope.is_some());
        assert_eq!(art.summary.invariant_violations, 0);
        let json: serde_json::Value = serde_json::from_str(&art.summary.to_json()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["config"]["horizon"], 64);
    }

    #[test]
    fn csv_is_deterministic_across_execution_modes() {
        let a = run_experiment(&with_execution(base(), Execution::Sequential)).unwrap();
        let b = run_experiment(&with_execution(base(), Execution::Parallel)).unwrap();
        // The preamble echoes the execution mode; the table must match.
        let body = |s: &str| s.lines().skip(2).map(str::to_owned).collect::<Vec<_>>();
        assert_eq!(body(&a.csv), body(&b.csv));
    }

    #[test]
    fn every_algorithm_runs() {
        for alg in ["squint", "squint-corners", "boa+", "saboa"] {
            let text = format!(
                "version = 1\nalgorithm = \"{alg}\"\nhorizon = 40\nseed = 1\n[stream]\nkind = \"adversarial\"\ndim = 3\nsparsity = 1\n"
            );
            let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
            let art = run_experiment(&cfg).unwrap();
            assert!(art.failure.is_none(), "{alg}: {:?}", art.failure);
            assert_eq!(art.summary.rounds_completed, 40);
        }
        let cfg = ExperimentConfig::from_toml_str(
            "version = 1\nalgorithm = \"squint-cover\"\nhorizon = 20\nseed = 1\n[cover]\neps = 0.25\n[stream]\nkind = \"quadratic\"\ndim = 2\nsparsity = 1\n",
        )
        .unwrap();
        assert!(run_experiment(&cfg).unwrap().failure.is_none());
    }

    #[test]
    fn bad_comparator_is_a_config_error() {
        let mut cfg = base();
        cfg.comparators = vec![ComparatorConfig {
            kind: ComparatorKind::Basis,
            name: None,
            index: Some(9),
            coords: None,
        }];
        let err = run_experiment(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("comparators[0].index"));
    }

    #[test]
    fn sweep_expands_cross_product() {
        let mut cfg = base();
        cfg.sweep = Some(SweepConfig {
            horizon: vec![8, 16],
            seed: vec![1, 2, 3],
            ..Default::default()
        });
        let cells = sweep_cells(&cfg).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(
            cells[4].0,
            CellAxes {
                horizon: 16,
                dim: 4,
                sparsity: Some(2),
                seed: 2
            }
        );
        assert_eq!(cells[4].1.horizon, 16);
        assert!(cells[4].1.sweep.is_none());
        cfg.sweep = Some(SweepConfig::default());
        assert!(sweep_cells(&cfg).is_err());
    }
}
