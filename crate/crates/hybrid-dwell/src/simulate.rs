//! Exact trajectory simulation under an event schedule, witness evaluation,
//! and convergence classification.
//!
//! Flows are linear, so stepping multiplies by matrix exponentials: states at
//! sample points are exact up to rounding, independent of the sample step.
//! The same engine simulates the original system, the reordered or decoupled
//! forms, and the reduced-order model, since all of them are carried by
//! [`HybridDynamics`].
//!
//! Divergence is data, not an error: a trajectory that crosses the
//! divergence threshold keeps its samples and records the crossing time, and
//! one that approaches the floating-point ceiling is truncated there.

use std::collections::HashMap;

use crate::certify::{build_m_tau, CertifyError, LyapunovData, ModeLyapunov};
use crate::decouple::DecoupledSystem;
use crate::linalg::{expm, LinalgError, Vector};
use crate::model::{EventSchedule, HybridDynamics, HybridSystemSpec, ModelError};
use crate::tol;

/// Errors raised by simulation and witness evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("sample step must be positive, got {0}")]
    BadSampleStep(f64),
    #[error("schedule event {index}: mode {mode} does not exist (system has {count} modes)")]
    UnknownMode { index: usize, mode: usize, count: usize },
    #[error("schedule event {index}: no jump map for jump {jump} from mode {from} to mode {to}")]
    MissingJumpMap { index: usize, jump: usize, from: usize, to: usize },
    #[error(
        "schedule event {index}: jump map is {rows}x{cols} but maps a {want_cols}-dimensional \
         state into {want_rows} dimensions"
    )]
    JumpShape { index: usize, rows: usize, cols: usize, want_rows: usize, want_cols: usize },
    #[error("state for mode {mode} has dimension {got}, expected {want}")]
    StateDimension { mode: usize, got: usize, want: usize },
    #[error("model rejected the input: {0}")]
    Model(#[from] ModelError),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

/// One recorded state: time, active mode, state vector, and whether the
/// sample is the post-jump side of an event.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mode: usize,
    pub state: Vector,
    pub is_post_jump: bool,
}

/// Witness values at one sample time: the weighted slow and fast energies
/// of the decoupled coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSample {
    pub t: f64,
    pub w_s: f64,
    pub w_f: f64,
}

/// A simulated trajectory. Event times carry exactly two samples, the
/// pre-jump state then the post-jump state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// First sample time at which the state norm exceeded the divergence
    /// threshold (or the floating-point ceiling, which also truncates).
    pub diverged_at: Option<f64>,
    /// Norm of the initial state, the reference for divergence and
    /// convergence thresholds.
    pub initial_norm: f64,
}

/// Sampling and divergence knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Grid spacing for in-interval samples; events are always sampled.
    pub sample_dt: f64,
    /// A trajectory counts as diverged once its norm exceeds this multiple
    /// of the initial norm.
    pub divergence_factor: f64,
    /// Hard state-norm ceiling: the simulation truncates there instead of
    /// overflowing.
    pub hard_limit: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            sample_dt: 0.01,
            divergence_factor: tol::DIVERGENCE_FACTOR_DEFAULT,
            hard_limit: tol::HARD_STATE_LIMIT,
        }
    }
}

/// Outcome of comparing a trajectory against a decay threshold over a
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Converging,
    Diverging,
    Undecided,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::Converging => write!(f, "converging"),
            Classification::Diverging => write!(f, "diverging"),
            Classification::Undecided => write!(f, "undecided"),
        }
    }
}

struct Recorder {
    samples: Vec<Sample>,
    diverged_at: Option<f64>,
    initial_norm: f64,
    divergence_factor: f64,
    hard_limit: f64,
}

impl Recorder {
    /// Records a sample; returns true when the simulation must stop because
    /// the state reached the floating-point ceiling.
    fn record(&mut self, t: f64, mode: usize, state: &Vector, is_post_jump: bool) -> bool {
        let norm = state.norm();
        self.samples.push(Sample { t, mode, state: state.clone(), is_post_jump });
        if self.diverged_at.is_none() && norm > self.divergence_factor * self.initial_norm {
            self.diverged_at = Some(t);
        }
        if !(norm <= self.hard_limit) {
            if self.diverged_at.is_none() {
                self.diverged_at = Some(t);
            }
            return true;
        }
        false
    }

    fn finish(self) -> Trajectory {
        Trajectory {
            samples: self.samples,
            diverged_at: self.diverged_at,
            initial_norm: self.initial_norm,
        }
    }
}

fn check_compatibility(
    dynamics: &HybridDynamics,
    schedule: &EventSchedule,
    x0: &Vector,
) -> Result<(), SimError> {
    let count = dynamics.generators.len();
    for (index, event) in schedule.events.iter().enumerate() {
        if event.mode >= count {
            return Err(SimError::UnknownMode { index, mode: event.mode, count });
        }
    }
    for index in 1..schedule.events.len() {
        let from = schedule.events[index - 1].mode;
        let to = schedule.events[index].mode;
        let jump = schedule.events[index].jump.expect("validated at schedule construction");
        let map = dynamics
            .jumps
            .get(&(from, jump, to))
            .ok_or(SimError::MissingJumpMap { index, jump, from, to })?;
        let (want_rows, want_cols) = (dynamics.dim(to), dynamics.dim(from));
        if map.nrows() != want_rows || map.ncols() != want_cols {
            return Err(SimError::JumpShape {
                index,
                rows: map.nrows(),
                cols: map.ncols(),
                want_rows,
                want_cols,
            });
        }
    }
    let start_mode = schedule.events[0].mode;
    let want = dynamics.dim(start_mode);
    if x0.len() != want {
        return Err(SimError::StateDimension { mode: start_mode, got: x0.len(), want });
    }
    Ok(())
}

/// Simulates `dynamics` under `schedule` from `x0`.
///
/// Within each inter-event interval the state advances by the exponential of
/// the active generator: one cached step per grid point plus an exact
/// partial step to the interval end. Every event time is sampled twice,
/// pre-jump then post-jump. Divergence is recorded in the trajectory rather
/// than raised as an error.
pub fn simulate(
    dynamics: &HybridDynamics,
    schedule: &EventSchedule,
    options: &SimOptions,
    x0: &Vector,
) -> Result<Trajectory, SimError> {
    if !(options.sample_dt > 0.0) {
        return Err(SimError::BadSampleStep(options.sample_dt));
    }
    check_compatibility(dynamics, schedule, x0)?;

    let mut rec = Recorder {
        samples: Vec::new(),
        diverged_at: None,
        initial_norm: x0.norm(),
        divergence_factor: options.divergence_factor,
        hard_limit: options.hard_limit,
    };
    let mut cache: HashMap<(usize, u64), crate::linalg::Mat> = HashMap::new();
    let mut state = x0.clone();
    let events = &schedule.events;

    for k in 0..events.len() {
        let mode = events[k].mode;
        let t_start = events[k].t;
        if k == 0 {
            if rec.record(t_start, mode, &state, false) {
                return Ok(rec.finish());
            }
        } else {
            let jump = events[k].jump.expect("validated at schedule construction");
            let map = &dynamics.jumps[&(events[k - 1].mode, jump, mode)];
            state = map * state;
            if rec.record(t_start, mode, &state, true) {
                return Ok(rec.finish());
            }
        }

        let t_end = if k + 1 < events.len() { events[k + 1].t } else { schedule.horizon };
        if t_end <= t_start {
            continue;
        }
        let generator = &dynamics.generators[mode];
        let step_to = |target_dt: f64,
                           state: &mut Vector,
                           cache: &mut HashMap<(usize, u64), crate::linalg::Mat>|
         -> Result<(), SimError> {
            let key = (mode, target_dt.to_bits());
            if !cache.contains_key(&key) {
                cache.insert(key, expm(generator, target_dt)?);
            }
            *state = &cache[&key] * &*state;
            Ok(())
        };

        // In-interval grid: anchored at the interval start so sample times
        // are identical across different step sizes that share grid points.
        let guard = 1e-12 * t_end.abs().max(1.0);
        let mut steps = 0u64;
        loop {
            let t_next = t_start + (steps + 1) as f64 * options.sample_dt;
            if t_next >= t_end - guard {
                break;
            }
            step_to(options.sample_dt, &mut state, &mut cache)?;
            steps += 1;
            if rec.record(t_next, mode, &state, false) {
                return Ok(rec.finish());
            }
        }
        let t_last_grid = t_start + steps as f64 * options.sample_dt;
        let remainder = t_end - t_last_grid;
        if remainder > 0.0 {
            step_to(remainder, &mut state, &mut cache)?;
        }
        // Interval-end sample: the pre-jump state, or the final state at the
        // horizon.
        if rec.record(t_end, mode, &state, false) {
            return Ok(rec.finish());
        }
    }
    Ok(rec.finish())
}

/// Convenience wrapper: builds the event-driven dynamics of `spec` in its
/// original coordinates and simulates it.
pub fn simulate_spec(
    spec: &HybridSystemSpec,
    schedule: &EventSchedule,
    options: &SimOptions,
    x0: &Vector,
) -> Result<Trajectory, SimError> {
    let dynamics = HybridDynamics::from_spec(spec)?;
    simulate(&dynamics, schedule, options, x0)
}

/// Evaluates the slow and fast witness values along a trajectory simulated
/// in the original coordinates.
///
/// Each state is reordered with the active mode's permutation, the fast part
/// is shifted onto the boundary-layer coordinate `y = z + h x`, and the
/// witnesses are the weighted norms `W_s = sqrt(x' Q_s x)` and
/// `W_f = sqrt(y' Q_f y)`. The result parallels `trajectory.samples` index
/// for index.
pub fn witnesses(
    trajectory: &Trajectory,
    reordered: &crate::model::ReorderedSystem,
    decoupled: &DecoupledSystem,
    modes: &[ModeLyapunov],
) -> Result<Vec<WitnessSample>, SimError> {
    let count = reordered.modes.len().min(decoupled.modes.len()).min(modes.len());
    let n_x = reordered.n_x;
    let mut out = Vec::with_capacity(trajectory.samples.len());
    for (index, sample) in trajectory.samples.iter().enumerate() {
        if sample.mode >= count {
            return Err(SimError::UnknownMode { index, mode: sample.mode, count });
        }
        let s = &reordered.modes[sample.mode].s;
        if sample.state.len() != s.ncols() {
            return Err(SimError::StateDimension {
                mode: sample.mode,
                got: sample.state.len(),
                want: s.ncols(),
            });
        }
        let r = s * &sample.state;
        let x = r.rows(0, n_x).into_owned();
        let z = r.rows(n_x, r.len() - n_x).into_owned();
        let y = z + &decoupled.modes[sample.mode].h * &x;
        let lyap = &modes[sample.mode];
        out.push(WitnessSample {
            t: sample.t,
            w_s: lyap.q_s.quad(&x).sqrt(),
            w_f: lyap.q_f.quad(&y).sqrt(),
        });
    }
    Ok(out)
}

/// Classifies a trajectory over `[0, horizon]` against a decay `threshold`
/// relative to the initial norm.
///
/// Diverging when the divergence threshold was crossed; converging when the
/// trajectory covers the horizon, ends at or below `threshold` times the
/// initial norm, and stays there over the last tenth of the horizon;
/// undecided otherwise.
pub fn classify(trajectory: &Trajectory, horizon: f64, threshold: f64) -> Classification {
    if trajectory.diverged_at.is_some() {
        return Classification::Diverging;
    }
    let Some(last) = trajectory.samples.last() else {
        return Classification::Undecided;
    };
    if last.t < horizon - 1e-9 * horizon.abs().max(1.0) {
        return Classification::Undecided;
    }
    let bound = threshold * trajectory.initial_norm;
    if last.state.norm() > bound {
        return Classification::Undecided;
    }
    let tail_start = horizon - 0.1 * horizon;
    let tail_ok = trajectory
        .samples
        .iter()
        .filter(|s| s.t >= tail_start)
        .all(|s| s.state.norm() <= bound);
    if tail_ok {
        Classification::Converging
    } else {
        Classification::Undecided
    }
}

fn assert_aligned(samples: &[Sample], wits: &[WitnessSample]) {
    assert_eq!(
        samples.len(),
        wits.len(),
        "witness samples must parallel trajectory samples"
    );
}

/// Largest relative increase of the combined energy `W_s^2 + W_f^2` between
/// consecutive samples inside a mode interval (pairs straddling a jump are
/// skipped). Nonpositive when the energy is monotone as the flow analysis
/// predicts for admissible epsilon.
pub fn max_energy_increase(samples: &[Sample], wits: &[WitnessSample]) -> f64 {
    assert_aligned(samples, wits);
    let mut worst = f64::NEG_INFINITY;
    for i in 1..wits.len() {
        if samples[i].is_post_jump {
            continue;
        }
        let v0 = wits[i - 1].w_s.powi(2) + wits[i - 1].w_f.powi(2);
        let v1 = wits[i].w_s.powi(2) + wits[i].w_f.powi(2);
        worst = worst.max((v1 - v0) / v0.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Largest violation of the fast-envelope bound
/// `W_f(t) <= W_f(t_k) e^{-lambda_f (t - t_k)/eps} + eps beta1 sqrt(V(t_k))`
/// within each mode interval, anchored at the interval's first sample.
pub fn max_fast_envelope_violation(
    samples: &[Sample],
    wits: &[WitnessSample],
    lambda_f: f64,
    beta1: f64,
    epsilon: f64,
) -> f64 {
    assert_aligned(samples, wits);
    let mut worst = f64::NEG_INFINITY;
    let mut anchor = 0usize;
    for i in 0..wits.len() {
        if samples[i].is_post_jump || i == 0 {
            anchor = i;
            continue;
        }
        let dt = wits[i].t - wits[anchor].t;
        let v0 = wits[anchor].w_s.powi(2) + wits[anchor].w_f.powi(2);
        let bound = wits[anchor].w_f * (-lambda_f * dt / epsilon).exp() + epsilon * beta1 * v0.sqrt();
        worst = worst.max(wits[i].w_f - bound);
    }
    worst
}

/// Largest componentwise violation of the event-time recursion
/// `(W_s, W_f)(t_{k+1}) <= Gamma M_{tau_k} (W_s, W_f)(t_k)`, where `t_k`
/// ranges over interval starts (the initial sample and every post-jump
/// sample).
pub fn max_event_recursion_violation(
    samples: &[Sample],
    wits: &[WitnessSample],
    lyap: &LyapunovData,
    epsilon: f64,
) -> Result<f64, CertifyError> {
    assert_aligned(samples, wits);
    let starts: Vec<usize> = (0..samples.len())
        .filter(|&i| i == 0 || samples[i].is_post_jump)
        .collect();
    let gamma = lyap.gamma_matrix();
    let mut worst = f64::NEG_INFINITY;
    for pair in starts.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let tau = wits[j].t - wits[i].t;
        let gain = &gamma * build_m_tau(lyap, epsilon, tau)?;
        let bound_s = gain[(0, 0)] * wits[i].w_s + gain[(0, 1)] * wits[i].w_f;
        let bound_f = gain[(1, 0)] * wits[i].w_s + gain[(1, 1)] * wits[i].w_f;
        worst = worst.max(wits[j].w_s - bound_s).max(wits[j].w_f - bound_f);
    }
    Ok(worst)
}
