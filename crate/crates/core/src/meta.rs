//! Plain squint runs and the restart meta-algorithms BOA+ and SABOA.
//!
//! Rounds are 1-indexed and session `i` covers `[2^i, 2^(i+1))`, so session 0
//! is round 1 alone. Each session runs a fresh [`SquintState`] whose ladder is
//! sized for the session length.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dilated_soft_threshold, hard_truncate, project_l1, UNIT_BALL_SLACK};
use crate::grid::{corner_points, ExpertGrid};
use crate::metrics::RegretLedger;
use crate::par::Execution;
use crate::squint::SquintState;
use crate::streams::{empirical_objective, LossStream, Objective, Regime};
use crate::vector::ParamVector;

/// Session index of round `t`: `floor(log2 t)`.
pub fn session_of(t: usize) -> Result<usize> {
    if t == 0 {
        return Err(Error::domain("rounds are 1-indexed"));
    }
    Ok(t.ilog2() as usize)
}

/// Doubling schedule `t_i = 2^i` truncated at a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoublingSchedule {
    horizon: usize,
}

impl DoublingSchedule {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    /// Number of sessions needed to cover `1..=horizon`.
    pub fn sessions(&self) -> usize {
        if self.horizon == 0 {
            0
        } else {
            self.horizon.ilog2() as usize + 1
        }
    }

    /// Rounds of session `i`, truncated at the horizon.
    pub fn rounds(&self, i: usize) -> Range<usize> {
        let start = 1usize << i;
        start..(start << 1).min(self.horizon + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeaderSolverConfig {
    pub max_iterations: usize,
    /// Stop once the unit-step projected-gradient mapping is this small in l2.
    pub tolerance: f64,
    /// Step size `c / sqrt(iteration)`.
    pub step: f64,
}

impl Default for LeaderSolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-8,
            step: 0.5,
        }
    }
}

impl LeaderSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("leader.max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("leader.tolerance must be positive"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("leader.step must be positive"));
        }
        Ok(())
    }
}

/// Approximate minimizer of `objective` over the unit l1-ball by projected
/// subgradient descent from the origin. Returns the iterate with the smallest
/// objective seen.
pub fn solve_leader(objective: &dyn Objective, cfg: &LeaderSolverConfig) -> Result<ParamVector> {
    cfg.validate()?;
    let mut theta = ParamVector::zeros(objective.dim());
    let mut best: Option<(f64, ParamVector)> = None;
    for k in 1..=cfg.max_iterations + 1 {
        let (value, grad) = objective.evaluate(&theta)?;
        if !value.is_finite() {
            return Err(Error::stream("non-finite leader objective"));
        }
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, theta.clone()));
        }
        if k > cfg.max_iterations {
            break;
        }
        let mapping = theta.dist_l2(&project_l1(&theta.sub(&grad), 1.0));
        if mapping < cfg.tolerance {
            break;
        }
        let step = cfg.step / (k as f64).sqrt();
        theta = project_l1(&theta.sub(&grad.scaled(step)), 1.0);
    }
    Ok(best.expect("at least one evaluation").1)
}

/// Running mean of the predictions of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionAverage {
    sum: Vec<f64>,
    count: usize,
}

impl SessionAverage {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, prediction: &ParamVector) {
        self.sum
            .iter_mut()
            .zip(prediction.iter())
            .for_each(|(s, v)| *s += v);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The mean, or the origin before any prediction.
    pub fn average(&self) -> ParamVector {
        if self.count == 0 {
            return ParamVector::zeros(self.sum.len());
        }
        let n = self.count as f64;
        ParamVector::from_finite(self.sum.iter().map(|s| s / n).collect())
    }
}

fn check_in_ball(v: &ParamVector, what: &str) -> Result<()> {
    let n = v.norm_l1();
    if n > 1.0 + UNIT_BALL_SLACK {
        return Err(Error::domain(format!("{what} has l1 norm {n} > 1")));
    }
    Ok(())
}

/// Hard truncations `[leader]_k`, `k = 1..d`, and the `2d` corners of the
/// radius-2 ball, uniform prior.
pub fn boaplus_grid(leader: &ParamVector) -> Result<ExpertGrid> {
    check_in_ball(leader, "leader")?;
    let d = leader.dim();
    let mut points: Vec<ParamVector> = (1..=d).map(|k| hard_truncate(leader, k)).collect();
    points.extend(corner_points(d, 2.0));
    ExpertGrid::uniform(points)
}

/// Sparsity levels `{1, 2, 4, ..., 2^floor(log2 d), d}`.
pub fn sparsity_levels(d: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (0..=d.ilog2()).map(|j| 1usize << j).collect();
    if *levels.last().unwrap() != d {
        levels.push(d);
    }
    levels
}

/// Grid of SABOA session `i` built from the previous session's average:
/// dilated soft thresholds over `eps in {2^-k, k = 0..i}` and the sparsity
/// levels, hard truncations `k = 1..d`, and the `2d` unit corners.
pub fn saboa_grid(average: &ParamVector, session: usize) -> Result<ExpertGrid> {
    check_in_ball(average, "session average")?;
    let avg = if average.norm_l1() > 1.0 {
        project_l1(average, 1.0)
    } else {
        average.clone()
    };
    let d = avg.dim();
    let mut points = Vec::new();
    for k in 0..=session {
        let eps = 0.5f64.powi(k as i32);
        for &d0 in &sparsity_levels(d) {
            points.push(dilated_soft_threshold(&avg, eps, d0));
        }
    }
    points.extend((1..=d).map(|k| hard_truncate(&avg, k)));
    points.extend(corner_points(d, 1.0));
    ExpertGrid::uniform(points)
}

/// Cardinality bound `(i+1)(1 + log2 d) + 3d` on SABOA grids.
pub fn saboa_size_bound(d: usize, session: usize) -> f64 {
    (session + 1) as f64 * (1.0 + (d as f64).log2()) + 3.0 * d as f64
}

/// Options shared by all runners.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// `E = scale_multiplier * G` unless `scale` is set.
    pub scale_multiplier: f64,
    pub scale: Option<f64>,
    /// Ladder exponent; `None` uses 1 for plain squint and 2 for restarts.
    pub exponent: Option<u32>,
    pub leader: LeaderSolverConfig,
    pub checkpoints: Vec<usize>,
    pub full_snapshots: bool,
    pub execution: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scale_multiplier: 4.0 / 3.0,
            scale: None,
            exponent: None,
            leader: LeaderSolverConfig::default(),
            checkpoints: Vec::new(),
            full_snapshots: false,
            execution: Execution::default(),
        }
    }
}

impl RunOptions {
    fn scale_for(&self, stream: &dyn LossStream, radius: f64) -> Result<(f64, f64)> {
        let bound = stream.gradient_bound(radius);
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::config(format!(
                "gradient bound must be positive, got {bound}"
            )));
        }
        let scale = self.scale.unwrap_or(self.scale_multiplier * bound);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok((scale, bound))
    }
}

/// What one session of a run used.
#[derive(Debug, Clone)]
pub struct SessionInfo {
    pub index: usize,
    pub rounds: Range<usize>,
    pub grid: ExpertGrid,
    /// Leader (BOA+) or previous-session average (SABOA) the grid came from.
    pub anchor: ParamVector,
    pub scale: f64,
}

/// Result of a run. On failure the ledger holds the rounds played so far and
/// is flagged incomplete.
#[derive(Debug)]
pub struct RunOutput {
    pub ledger: RegretLedger,
    pub sessions: Vec<SessionInfo>,
    /// Largest `||grad l_t(theta_hat)||_inf` observed and the declared bound.
    pub max_gradient: f64,
    pub gradient_bound: f64,
    pub failure: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<RunOutput> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

fn tracks_excess(stream: &dyn LossStream) -> bool {
    stream.regime() == Regime::Iid
        && stream
            .risk_excess(&ParamVector::zeros(stream.dim()))
            .is_ok()
}

struct Runner<'a> {
    stream: &'a dyn LossStream,
    ledger: RegretLedger,
    track: bool,
    max_gradient: f64,
    gradient_bound: f64,
    sessions: Vec<SessionInfo>,
}

impl<'a> Runner<'a> {
    fn new(stream: &'a dyn LossStream, opts: &RunOptions) -> Self {
        let track = tracks_excess(stream);
        Self {
            stream,
            ledger: RegretLedger::new(
                stream.dim(),
                opts.checkpoints.clone(),
                track,
                opts.full_snapshots,
            ),
            track,
            max_gradient: 0.0,
            gradient_bound: 0.0,
            sessions: Vec::new(),
        }
    }

    /// Plays `rounds` with `state`, recording every round and handing each
    /// prediction to `on_prediction`.
    fn play(
        &mut self,
        state: &mut SquintState,
        rounds: Range<usize>,
        bound: f64,
        mut on_prediction: impl FnMut(&ParamVector),
    ) -> Result<()> {
        let radius = state.grid().radius();
        self.gradient_bound = self.gradient_bound.max(bound);
        for t in rounds {
            let prediction = state.predict().clone();
            if prediction.norm_l1() > radius + 1e-12 {
                return Err(Error::Invariant(format!(
                    "round {t}: prediction l1 norm {} exceeds grid radius {radius}",
                    prediction.norm_l1()
                )));
            }
            let (loss, grad) = self.stream.loss_and_gradient(t, &prediction)?;
            let g = grad.norm_linf();
            if !(g <= bound * (1.0 + 1e-9)) {
                return Err(Error::Invariant(format!(
                    "round {t}: gradient sup-norm {g} exceeds the declared bound {bound}"
                )));
            }
            self.max_gradient = self.max_gradient.max(g);
            let excess = if self.track {
                Some(self.stream.risk_excess(&prediction)?)
            } else {
                None
            };
            self.ledger.record(&prediction, loss, excess)?;
            on_prediction(&prediction);
            state.update(&grad)?;
        }
        Ok(())
    }

    fn finish(mut self, result: Result<()>) -> RunOutput {
        let failure = result.err();
        if failure.is_some() {
            self.ledger.mark_incomplete();
        }
        RunOutput {
            ledger: self.ledger,
            sessions: self.sessions,
            max_gradient: self.max_gradient,
            gradient_bound: self.gradient_bound,
            failure,
        }
    }
}

fn check_dims(stream: &dyn LossStream, grid: Option<&ExpertGrid>, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if let Some(g) = grid {
        if g.dim() != stream.dim() {
            return Err(Error::config(format!(
                "grid dimension {} does not match stream dimension {}",
                g.dim(),
                stream.dim()
            )));
        }
    }
    Ok(())
}

/// Squint over a fixed grid for `horizon` rounds (ladder exponent 1 by default).
pub fn run_squint(
    stream: &dyn LossStream,
    grid: ExpertGrid,
    horizon: usize,
    opts: &RunOptions,
) -> RunOutput {
    let mut runner = Runner::new(stream, opts);
    let result = (|| {
        check_dims(stream, Some(&grid), horizon)?;
        let (scale, bound) = opts.scale_for(stream, grid.radius())?;
        let mut state =
            SquintState::with_horizon(grid.clone(), scale, horizon, opts.exponent.unwrap_or(1))?
                .with_execution(opts.execution)
                .with_gradient_bound(bound);
        runner.sessions.push(SessionInfo {
            index: 0,
            rounds: 1..horizon + 1,
            grid,
            anchor: ParamVector::zeros(stream.dim()),
            scale,
        });
        runner.ledger.mark_session_start();
        runner.play(&mut state, 1..horizon + 1, bound, |_| {})
    })();
    runner.finish(result)
}

fn run_restarted(
    stream: &dyn LossStream,
    horizon: usize,
    opts: &RunOptions,
    radius: f64,
    mut anchor_for: impl FnMut(usize, &SessionAverage) -> Result<ParamVector>,
    grid_for: impl Fn(&ParamVector, usize) -> Result<ExpertGrid>,
) -> RunOutput {
    let mut runner = Runner::new(stream, opts);
    let result = (|| {
        check_dims(stream, None, horizon)?;
        let (scale, bound) = opts.scale_for(stream, radius)?;
        let schedule = DoublingSchedule::new(horizon);
        let mut previous = SessionAverage::new(stream.dim());
        for i in 0..schedule.sessions() {
            let rounds = schedule.rounds(i);
            let anchor = anchor_for(i, &previous)?;
            let grid = grid_for(&anchor, i)?;
            let mut state = SquintState::with_horizon(
                grid.clone(),
                scale,
                rounds.len(),
                opts.exponent.unwrap_or(2),
            )?
            .with_execution(opts.execution)
            .with_gradient_bound(bound);
            runner.sessions.push(SessionInfo {
                index: i,
                rounds: rounds.clone(),
                grid,
                anchor,
                scale,
            });
            runner.ledger.mark_session_start();
            let mut current = SessionAverage::new(stream.dim());
            runner.play(&mut state, rounds, bound, |p| current.push(p))?;
            previous = current;
        }
        Ok(())
    })();
    runner.finish(result)
}

/// BOA+: per session, the leader over all earlier rounds, its hard
/// truncations and the radius-2 corners.
pub fn run_boaplus(stream: &dyn LossStream, horizon: usize, opts: &RunOptions) -> RunOutput {
    let d = stream.dim();
    run_restarted(
        stream,
        horizon,
        opts,
        2.0,
        |i, _| {
            if i == 0 {
                return Ok(ParamVector::zeros(d));
            }
            let objective = empirical_objective(stream, (1usize << i) - 1)?;
            solve_leader(objective.as_ref(), &opts.leader)
        },
        |leader, _| boaplus_grid(leader),
    )
}

/// SABOA: per session, shrunk versions of the previous session's average
/// prediction and the unit corners.
pub fn run_saboa(stream: &dyn LossStream, horizon: usize, opts: &RunOptions) -> RunOutput {
    run_restarted(
        stream,
        horizon,
        opts,
        1.0,
        |_, prev| Ok(prev.average()),
        saboa_grid,
    )
}
