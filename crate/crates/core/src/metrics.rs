//! Regret accounting, online-to-batch conversion and rate-slope fits.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::UNIT_BALL_SLACK;
use crate::par::{self, Execution};
use crate::streams::LossStream;
use crate::vector::ParamVector;

const REPLAY_CHUNK: usize = 1024;

/// Regret values at or below zero are floored here before taking logs.
pub const SLOPE_FLOOR: f64 = 1e-12;

/// Per-round record of a run: the loss of each prediction, its excess risk
/// when the stream has a risk oracle, and prediction snapshots.
#[derive(Debug, Clone)]
pub struct RegretLedger {
    dim: usize,
    losses: Vec<f64>,
    excess: Option<Vec<f64>>,
    cumulative: Vec<f64>,
    checkpoints: Vec<usize>,
    snapshots: Vec<(usize, ParamVector)>,
    predictions: Option<Vec<ParamVector>>,
    session_starts: Vec<usize>,
    complete: bool,
}

impl RegretLedger {
    /// `checkpoints` are rounds at which predictions are snapshotted; with
    /// `full_snapshots` every prediction is kept.
    pub fn new(
        dim: usize,
        mut checkpoints: Vec<usize>,
        track_excess: bool,
        full_snapshots: bool,
    ) -> Self {
        checkpoints.sort_unstable();
        checkpoints.dedup();
        Self {
            dim,
            losses: Vec::new(),
            excess: track_excess.then(Vec::new),
            cumulative: Vec::new(),
            checkpoints,
            snapshots: Vec::new(),
            predictions: full_snapshots.then(Vec::new),
            session_starts: Vec::new(),
            complete: true,
        }
    }

    /// Records round `len() + 1`: the prediction played, its loss and excess risk.
    pub fn record(
        &mut self,
        prediction: &ParamVector,
        loss: f64,
        excess: Option<f64>,
    ) -> Result<()> {
        if prediction.dim() != self.dim {
            return Err(Error::config("ledger prediction dimension mismatch"));
        }
        let t = self.losses.len() + 1;
        if let Some(ex) = self.excess.as_mut() {
            ex.push(
                excess.ok_or_else(|| Error::stream(format!("missing excess risk in round {t}")))?,
            );
        }
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.losses.push(loss);
        self.cumulative.push(prev + loss);
        if self.checkpoints.binary_search(&t).is_ok() {
            self.snapshots.push((t, prediction.clone()));
        }
        if let Some(p) = self.predictions.as_mut() {
            p.push(prediction.clone());
        }
        Ok(())
    }

    pub fn mark_session_start(&mut self) {
        self.session_starts.push(self.losses.len() + 1);
    }

    pub fn mark_incomplete(&mut self) {
        self.complete = false;
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rounds recorded so far.
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Excess risk of every prediction, when tracked.
    pub fn excess(&self) -> Option<&[f64]> {
        self.excess.as_deref()
    }

    pub fn cumulative_loss(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.cumulative[t - 1]
        }
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    /// Checkpoints that have been reached.
    pub fn reached_checkpoints(&self) -> Vec<usize> {
        self.checkpoints
            .iter()
            .copied()
            .filter(|&t| t <= self.len())
            .collect()
    }

    pub fn snapshots(&self) -> &[(usize, ParamVector)] {
        &self.snapshots
    }

    pub fn predictions(&self) -> Option<&[ParamVector]> {
        self.predictions.as_deref()
    }

    /// First round of every session, for restarted algorithms.
    pub fn session_starts(&self) -> &[usize] {
        &self.session_starts
    }
}

fn check_comparator(comparator: &ParamVector, dim: usize) -> Result<()> {
    if comparator.dim() != dim {
        return Err(Error::config(format!(
            "comparator dimension {} does not match {dim}",
            comparator.dim()
        )));
    }
    if comparator.norm_l1() > 1.0 + UNIT_BALL_SLACK {
        return Err(Error::domain(format!(
            "comparator has l1 norm {} > 1",
            comparator.norm_l1()
        )));
    }
    Ok(())
}

/// Cumulative loss of a fixed comparator at every round `1..=upto`.
pub fn comparator_cumulative_losses(
    stream: &dyn LossStream,
    comparator: &ParamVector,
    upto: usize,
    exec: Execution,
) -> Result<Vec<f64>> {
    let parts = par::map_chunks(exec, upto, REPLAY_CHUNK, |range| -> Result<Vec<f64>> {
        range.map(|t| stream.loss(t + 1, comparator)).collect()
    });
    let mut cum = Vec::with_capacity(upto);
    let mut acc = 0.0;
    for part in parts {
        for l in part? {
            acc += l;
            cum.push(acc);
        }
    }
    Ok(cum)
}

/// Average regret against `comparator` at each of `rounds` (sorted, each at
/// most the ledger length).
///
/// With an excess-risk trace in the ledger the regret is measured through
/// the risk oracle, `(1/T) sum_t [E l(theta_hat) - E l(theta)]`; otherwise it
/// uses the realized losses of a replay.
pub fn regret_curve(
    ledger: &RegretLedger,
    comparator: &ParamVector,
    stream: &dyn LossStream,
    rounds: &[usize],
    exec: Execution,
) -> Result<Vec<f64>> {
    check_comparator(comparator, ledger.dim())?;
    let last = rounds.iter().copied().max().unwrap_or(0);
    if last > ledger.len() {
        return Err(Error::config(format!(
            "round {last} is beyond the ledger ({} rounds)",
            ledger.len()
        )));
    }
    if rounds.contains(&0) {
        return Err(Error::domain("regret is undefined at T = 0"));
    }
    if let Some(excess) = ledger.excess() {
        let offset = stream.risk_excess(comparator)?;
        let mut prefix = Vec::with_capacity(last);
        let mut acc = 0.0;
        for e in &excess[..last] {
            acc += e;
            prefix.push(acc);
        }
        return Ok(rounds
            .iter()
            .map(|&t| prefix[t - 1] / t as f64 - offset)
            .collect());
    }
    let cum = comparator_cumulative_losses(stream, comparator, last, exec)?;
    Ok(rounds
        .iter()
        .map(|&t| (ledger.cumulative_loss(t) - cum[t - 1]) / t as f64)
        .collect())
}

/// Average regret over the whole ledger.
pub fn average_regret(
    ledger: &RegretLedger,
    comparator: &ParamVector,
    stream: &dyn LossStream,
) -> Result<f64> {
    if ledger.is_empty() {
        return Err(Error::InsufficientData("empty ledger".into()));
    }
    Ok(regret_curve(
        ledger,
        comparator,
        stream,
        &[ledger.len()],
        Execution::default(),
    )?[0])
}

/// Mean of the first `upto` predictions.
pub fn online_to_batch(ledger: &RegretLedger, upto: usize) -> Result<ParamVector> {
    let preds = ledger.predictions().ok_or_else(|| {
        Error::config("online-to-batch needs full prediction snapshots (snapshot_predictions)")
    })?;
    if upto == 0 || upto > preds.len() {
        return Err(Error::config(format!(
            "cannot average {upto} of {} predictions",
            preds.len()
        )));
    }
    let mut sum = vec![0.0; ledger.dim()];
    for p in &preds[..upto] {
        sum.iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
    }
    ParamVector::new(sum.into_iter().map(|s| s / upto as f64).collect())
}

/// Least-squares fit of `log(regret)` against `log(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Whether some regret value was floored at [`SLOPE_FLOOR`].
    pub floored: bool,
}

/// Fits the rate exponent on `(T, avg_regret)` pairs after discarding the
/// first `burn_in` points.
pub fn fit_rate_slope(points: &[(f64, f64)], burn_in: usize) -> Result<SlopeFit> {
    let used: Vec<(f64, f64)> = points.iter().skip(burn_in).copied().collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "slope fit needs 3 points after burn-in, got {}",
            used.len()
        )));
    }
    if used.iter().any(|(t, r)| !(*t > 0.0) || r.is_nan()) {
        return Err(Error::InsufficientData(
            "slope fit needs positive horizons and numeric regrets".into(),
        ));
    }
    let mut floored = false;
    let logs: Vec<(f64, f64)> = used
        .iter()
        .map(|&(t, r)| {
            if r <= SLOPE_FLOOR {
                floored = true;
            }
            (t.ln(), r.max(SLOPE_FLOOR).ln())
        })
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "slope fit needs distinct horizons".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        points: logs.len(),
        floored,
    })
}

/// Fixed float formatting for CSV output: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One named regret column of a ledger export.
#[derive(Debug, Clone)]
pub struct RegretColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// Writes the checkpoint table: `t, cumulative_loss, avg_regret_<name>...`.
/// `preamble` lines are emitted first, each prefixed with `# `.
pub fn write_ledger_csv<W: Write>(
    mut out: W,
    ledger: &RegretLedger,
    rounds: &[usize],
    columns: &[RegretColumn],
    preamble: &[String],
) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    write!(out, "t,cumulative_loss")?;
    for c in columns {
        write!(out, ",avg_regret_{}", c.name)?;
    }
    writeln!(out)?;
    for (j, &t) in rounds.iter().enumerate() {
        write!(out, "{t},{}", format_float(ledger.cumulative_loss(t)))?;
        for c in columns {
            write!(out, ",{}", format_float(c.values[j]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
