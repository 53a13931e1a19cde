//! System description, validation, coordinate reordering, dimension
//! augmentation, and event schedules.
//!
//! A hybrid system here is a finite family of linear flows
//! `D^i dX/dt = F^i X` together with jump matrices applied at switching
//! instants, `X(t_k) = J^{j} X(t_k^-)`. The diagonal scaling `D^i` marks each
//! coordinate as slow (entry 1) or fast (entry `epsilon`). Analysis code
//! works on a reordered copy in which slow coordinates come first in every
//! mode; this module builds the per-mode permutations that connect the two
//! views and keeps both exactly consistent.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;

/// One mode of the hybrid system in its original coordinate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    /// Flow matrix `F` in `D dX/dt = F X` (original coordinate order).
    pub flow: Mat,
    /// Per-coordinate scale flags: `true` marks a fast coordinate, i.e. a
    /// diagonal entry `epsilon` in `D`.
    pub fast_mask: Vec<bool>,
}

impl ModeSpec {
    /// State dimension of this mode.
    pub fn dim(&self) -> usize {
        self.flow.nrows()
    }

    /// Number of slow coordinates.
    pub fn n_slow(&self) -> usize {
        self.fast_mask.iter().filter(|&&f| !f).count()
    }

    /// Number of fast coordinates.
    pub fn n_fast(&self) -> usize {
        self.fast_mask.iter().filter(|&&f| f).count()
    }
}

/// One jump matrix together with the mode transitions it is declared for.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSpec {
    /// State reset matrix in original coordinates, shape
    /// `dim(target) x dim(source)` for every declared transition.
    pub matrix: Mat,
    /// Declared `(source_mode, target_mode)` pairs this jump may realize.
    pub transitions: Vec<(usize, usize)>,
}

/// Complete description of a two-time-scale switched and impulsive system.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSystemSpec {
    /// Time-scale ratio, in (0, 1).
    pub epsilon: f64,
    /// Modes in index order.
    pub modes: Vec<ModeSpec>,
    /// Jump matrices in index order.
    pub jumps: Vec<JumpSpec>,
}

/// A single problem detected by [`HybridSystemSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// The time-scale ratio is outside the open interval (0, 1).
    EpsilonOutOfRange { value: f64 },
    /// The system declares no modes.
    NoModes,
    /// A flow matrix is not square.
    NonSquareFlow { mode: usize, rows: usize, cols: usize },
    /// A scale mask does not match its mode dimension.
    MaskLengthMismatch { mode: usize, mask_len: usize, dim: usize },
    /// A flow matrix contains a NaN or infinite entry.
    NonFiniteFlowEntry { mode: usize, row: usize, col: usize },
    /// A jump matrix contains a NaN or infinite entry.
    NonFiniteJumpEntry { jump: usize, row: usize, col: usize },
    /// A jump declares no transitions at all.
    NoDeclaredTransition { jump: usize },
    /// A declared transition references a mode index that does not exist.
    BadTransitionIndex { jump: usize, source: usize, target: usize },
    /// A jump matrix shape disagrees with the dimensions of a declared
    /// transition.
    ShapeMismatch {
        jump: usize,
        source: usize,
        target: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    /// No mode has any slow coordinate, so no slow/fast split exists.
    EmptySlowBlock,
    /// No mode has any fast coordinate, so no slow/fast split exists.
    EmptyFastBlock,
    /// Slow-coordinate counts differ across modes; apply augmentation first.
    NonConstantSlowCount { counts: Vec<usize> },
    /// Fast-coordinate counts differ across modes; apply augmentation first.
    NonConstantFastCount { counts: Vec<usize> },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::EpsilonOutOfRange { value } => {
                write!(f, "time-scale ratio must lie in (0, 1), got {value}")
            }
            Finding::NoModes => write!(f, "system declares no modes"),
            Finding::NonSquareFlow { mode, rows, cols } => {
                write!(f, "mode {mode}: flow matrix is {rows}x{cols}, expected square")
            }
            Finding::MaskLengthMismatch { mode, mask_len, dim } => write!(
                f,
                "mode {mode}: scale mask has {mask_len} entries for a {dim}-dimensional flow"
            ),
            Finding::NonFiniteFlowEntry { mode, row, col } => {
                write!(f, "mode {mode}: flow entry ({row}, {col}) is not finite")
            }
            Finding::NonFiniteJumpEntry { jump, row, col } => {
                write!(f, "jump {jump}: entry ({row}, {col}) is not finite")
            }
            Finding::NoDeclaredTransition { jump } => {
                write!(f, "jump {jump} declares no transitions")
            }
            Finding::BadTransitionIndex { jump, source, target } => write!(
                f,
                "jump {jump}: transition {source} -> {target} references an unknown mode"
            ),
            Finding::ShapeMismatch {
                jump,
                source,
                target,
                rows,
                cols,
                expected_rows,
                expected_cols,
            } => write!(
                f,
                "jump {jump}: matrix is {rows}x{cols} but transition {source} -> {target} \
                 needs {expected_rows}x{expected_cols}"
            ),
            Finding::EmptySlowBlock => {
                write!(f, "no mode has a slow coordinate; a slow/fast split needs both groups")
            }
            Finding::EmptyFastBlock => {
                write!(f, "no mode has a fast coordinate; a slow/fast split needs both groups")
            }
            Finding::NonConstantSlowCount { counts } => write!(
                f,
                "slow-coordinate counts differ across modes ({counts:?}); augment the system first"
            ),
            Finding::NonConstantFastCount { counts } => write!(
                f,
                "fast-coordinate counts differ across modes ({counts:?}); augment the system first"
            ),
        }
    }
}

/// Errors produced by model construction and schedule handling.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid system description: {}", join_findings(.0))]
    Invalid(Vec<Finding>),
    #[error("schedule is empty; it must at least set the initial mode at t = 0")]
    EmptySchedule,
    #[error("schedule must start at t = 0, first event is at t = {t0}")]
    BadScheduleStart { t0: f64 },
    #[error("the initial schedule event must not carry a jump")]
    InitialJump,
    #[error("schedule event {index} at t = {t} does not come strictly after its predecessor")]
    NonIncreasingTime { index: usize, t: f64 },
    #[error("schedule event {index} has no jump index; only the initial event may omit it")]
    MissingJump { index: usize },
    #[error("schedule event {index} references mode {mode}, but the system has {count} modes")]
    UnknownMode { index: usize, mode: usize, count: usize },
    #[error("schedule event {index} references jump {jump}, but the system has {count} jumps")]
    UnknownJump { index: usize, jump: usize, count: usize },
    #[error(
        "schedule event {index} uses jump {jump} for {from} -> {to}, \
         which is not among its declared transitions"
    )]
    UndeclaredTransition { index: usize, jump: usize, from: usize, to: usize },
    #[error("horizon {horizon} ends before the last event at t = {last}")]
    HorizonTooShort { horizon: f64, last: f64 },
    #[error("dwell time must be positive and finite, got {0}")]
    BadDwell(f64),
    #[error("mode {mode} has no declared outgoing transition")]
    NoTransitionFrom { mode: usize },
    #[error("augmentation rate must be positive and finite, got {0}")]
    BadAugmentRate(f64),
}

fn join_findings(findings: &[Finding]) -> String {
    findings.iter().map(Finding::to_string).collect::<Vec<_>>().join("; ")
}

impl HybridSystemSpec {
    /// Checks the description for structural problems and returns them all.
    ///
    /// An empty list means the system is ready for [`reorder`]. Findings are
    /// data, not errors: callers decide whether to stop, report, or augment.
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            findings.push(Finding::EpsilonOutOfRange { value: self.epsilon });
        }
        if self.modes.is_empty() {
            findings.push(Finding::NoModes);
        }
        for (i, mode) in self.modes.iter().enumerate() {
            if mode.flow.nrows() != mode.flow.ncols() {
                findings.push(Finding::NonSquareFlow {
                    mode: i,
                    rows: mode.flow.nrows(),
                    cols: mode.flow.ncols(),
                });
            }
            if mode.fast_mask.len() != mode.dim() {
                findings.push(Finding::MaskLengthMismatch {
                    mode: i,
                    mask_len: mode.fast_mask.len(),
                    dim: mode.dim(),
                });
            }
            for row in 0..mode.flow.nrows() {
                for col in 0..mode.flow.ncols() {
                    if !mode.flow[(row, col)].is_finite() {
                        findings.push(Finding::NonFiniteFlowEntry { mode: i, row, col });
                    }
                }
            }
        }
        for (j, jump) in self.jumps.iter().enumerate() {
            for row in 0..jump.matrix.nrows() {
                for col in 0..jump.matrix.ncols() {
                    if !jump.matrix[(row, col)].is_finite() {
                        findings.push(Finding::NonFiniteJumpEntry { jump: j, row, col });
                    }
                }
            }
            if jump.transitions.is_empty() {
                findings.push(Finding::NoDeclaredTransition { jump: j });
            }
            for &(source, target) in &jump.transitions {
                if source >= self.modes.len() || target >= self.modes.len() {
                    findings.push(Finding::BadTransitionIndex { jump: j, source, target });
                    continue;
                }
                let expected_rows = self.modes[target].dim();
                let expected_cols = self.modes[source].dim();
                if jump.matrix.nrows() != expected_rows || jump.matrix.ncols() != expected_cols {
                    findings.push(Finding::ShapeMismatch {
                        jump: j,
                        source,
                        target,
                        rows: jump.matrix.nrows(),
                        cols: jump.matrix.ncols(),
                        expected_rows,
                        expected_cols,
                    });
                }
            }
        }
        if !self.modes.is_empty() {
            let slow: Vec<usize> = self.modes.iter().map(ModeSpec::n_slow).collect();
            let fast: Vec<usize> = self.modes.iter().map(ModeSpec::n_fast).collect();
            // A group that is empty in every mode cannot be fixed by
            // augmentation; a count that merely varies can be.
            if slow.iter().all(|&c| c == 0) {
                findings.push(Finding::EmptySlowBlock);
            } else if slow.iter().any(|&c| c != slow[0]) {
                findings.push(Finding::NonConstantSlowCount { counts: slow });
            }
            if fast.iter().all(|&c| c == 0) {
                findings.push(Finding::EmptyFastBlock);
            } else if fast.iter().any(|&c| c != fast[0]) {
                findings.push(Finding::NonConstantFastCount { counts: fast });
            }
        }
        findings
    }

    /// All `(jump index, target mode)` pairs declared as leaving `mode`,
    /// in (jump, target) order.
    pub fn transitions_from(&self, mode: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, jump) in self.jumps.iter().enumerate() {
            for &(source, target) in &jump.transitions {
                if source == mode {
                    out.push((j, target));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Builds the permutation that moves slow coordinates (in original order) to
/// the front and fast coordinates (in original order) behind them.
///
/// The returned matrix `S` acts on states as `reordered = S * original` and
/// satisfies `S D S^T = blockdiag(I, epsilon I)` for the diagonal scale
/// matrix described by the mask.
pub fn build_permutation(fast_mask: &[bool]) -> Mat {
    let n = fast_mask.len();
    let order: Vec<usize> = fast_mask
        .iter()
        .enumerate()
        .filter(|(_, &fast)| !fast)
        .map(|(i, _)| i)
        .chain(fast_mask.iter().enumerate().filter(|(_, &fast)| fast).map(|(i, _)| i))
        .collect();
    let mut s = Mat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        s[(new, old)] = 1.0;
    }
    s
}

/// One mode after reordering, with its permutation and partitioned flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderedMode {
    /// Permutation with `reordered = s * original`.
    pub s: Mat,
    /// Reordered flow matrix `S F S^T`, slow block first.
    pub a: Mat,
    n_x: usize,
    n_z: usize,
}

impl ReorderedMode {
    /// Slow-to-slow block (top left, `n_x x n_x`).
    pub fn a11(&self) -> Mat {
        self.a.view((0, 0), (self.n_x, self.n_x)).into_owned()
    }

    /// Fast-to-slow block (top right, `n_x x n_z`).
    pub fn a12(&self) -> Mat {
        self.a.view((0, self.n_x), (self.n_x, self.n_z)).into_owned()
    }

    /// Slow-to-fast block (bottom left, `n_z x n_x`).
    pub fn a21(&self) -> Mat {
        self.a.view((self.n_x, 0), (self.n_z, self.n_x)).into_owned()
    }

    /// Fast-to-fast block (bottom right, `n_z x n_z`).
    pub fn a22(&self) -> Mat {
        self.a.view((self.n_x, self.n_x), (self.n_z, self.n_z)).into_owned()
    }
}

/// The system after slow-first reordering, constant dimensions across modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderedSystem {
    /// Time-scale ratio carried over from the description.
    pub epsilon: f64,
    /// Slow-state dimension, identical in every mode.
    pub n_x: usize,
    /// Fast-state dimension, identical in every mode.
    pub n_z: usize,
    /// Reordered modes in index order.
    pub modes: Vec<ReorderedMode>,
    /// Jump maps in reordered coordinates, keyed by
    /// `(source mode, jump index, target mode)`.
    pub jumps: BTreeMap<(usize, usize, usize), Mat>,
}

/// Reorders every mode so slow coordinates come first and transforms all jump
/// maps into the reordered frame.
///
/// Fails with the validation findings if the description is not clean or the
/// slow/fast counts are not constant; run [`augment`] first in that case.
pub fn reorder(spec: &HybridSystemSpec) -> Result<ReorderedSystem, ModelError> {
    let findings = spec.validate();
    if !findings.is_empty() {
        return Err(ModelError::Invalid(findings));
    }
    let n_x = spec.modes[0].n_slow();
    let n_z = spec.modes[0].n_fast();
    let modes: Vec<ReorderedMode> = spec
        .modes
        .iter()
        .map(|mode| {
            let s = build_permutation(&mode.fast_mask);
            let a = &s * &mode.flow * s.transpose();
            ReorderedMode { s, a, n_x, n_z }
        })
        .collect();
    let mut jumps = BTreeMap::new();
    for (j, jump) in spec.jumps.iter().enumerate() {
        for &(source, target) in &jump.transitions {
            let map = &modes[target].s * &jump.matrix * modes[source].s.transpose();
            jumps.insert((source, j, target), map);
        }
    }
    Ok(ReorderedSystem { epsilon: spec.epsilon, n_x, n_z, modes, jumps })
}

impl ReorderedSystem {
    /// Flow and jump maps in reordered coordinates, ready for simulation.
    ///
    /// The generator of mode `i` is the reordered flow with its fast rows
    /// divided by `epsilon`, i.e. `d/dt (x, z) = [[A11, A12], [A21/eps, A22/eps]] (x, z)`.
    pub fn dynamics(&self) -> HybridDynamics {
        let generators = self
            .modes
            .iter()
            .map(|mode| {
                let mut g = mode.a.clone();
                for row in self.n_x..self.n_x + self.n_z {
                    for col in 0..g.ncols() {
                        g[(row, col)] /= self.epsilon;
                    }
                }
                g
            })
            .collect();
        HybridDynamics { generators, jumps: self.jumps.clone() }
    }
}

/// Default rate for artificial augmentation coordinates.
///
/// With decay rates of the slow and fast parts in hand the artificial
/// coordinates are made ten times faster than either; without them, `10 /
/// epsilon` dominates any plausible rate of the original system.
pub fn default_augment_lambda(epsilon: f64, rates: Option<(f64, f64)>) -> f64 {
    match rates {
        Some((lambda_s, lambda_f)) => {
            crate::tol::AUGMENT_LAMBDA_FACTOR * lambda_s.max(lambda_f)
        }
        None => crate::tol::AUGMENT_LAMBDA_FACTOR / epsilon,
    }
}

/// Pads every mode with artificial coordinates so slow and fast counts become
/// constant, equal to the per-group maxima over modes.
///
/// Artificial coordinates are appended after the original ones (slow pads
/// first, then fast pads), flow as `-lambda * (.)` on their own, and are reset
/// to zero by every jump. They therefore never influence the original
/// coordinates, and any trajectory restricted to the original coordinates
/// matches the unaugmented system exactly.
///
/// A description whose counts are already constant is returned unchanged.
pub fn augment(spec: &HybridSystemSpec, lambda: f64) -> Result<HybridSystemSpec, ModelError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ModelError::BadAugmentRate(lambda));
    }
    let blocking: Vec<Finding> = spec
        .validate()
        .into_iter()
        .filter(|f| {
            !matches!(
                f,
                Finding::NonConstantSlowCount { .. } | Finding::NonConstantFastCount { .. }
            )
        })
        .collect();
    if !blocking.is_empty() {
        return Err(ModelError::Invalid(blocking));
    }
    let max_slow = spec.modes.iter().map(ModeSpec::n_slow).max().unwrap_or(0);
    let max_fast = spec.modes.iter().map(ModeSpec::n_fast).max().unwrap_or(0);
    if spec
        .modes
        .iter()
        .all(|m| m.n_slow() == max_slow && m.n_fast() == max_fast)
    {
        return Ok(spec.clone());
    }

    let modes = spec
        .modes
        .iter()
        .map(|mode| {
            let slow_pad = max_slow - mode.n_slow();
            let fast_pad = max_fast - mode.n_fast();
            let n_old = mode.dim();
            let n_new = n_old + slow_pad + fast_pad;
            let mut flow = Mat::zeros(n_new, n_new);
            flow.view_mut((0, 0), (n_old, n_old)).copy_from(&mode.flow);
            for k in n_old..n_new {
                flow[(k, k)] = -lambda;
            }
            let mut fast_mask = mode.fast_mask.clone();
            fast_mask.extend(std::iter::repeat(false).take(slow_pad));
            fast_mask.extend(std::iter::repeat(true).take(fast_pad));
            ModeSpec { flow, fast_mask }
        })
        .collect::<Vec<_>>();

    let jumps = spec
        .jumps
        .iter()
        .map(|jump| {
            let rows = jump
                .transitions
                .first()
                .map(|&(_, target)| modes[target].dim())
                .unwrap_or(jump.matrix.nrows());
            let cols = jump
                .transitions
                .first()
                .map(|&(source, _)| modes[source].dim())
                .unwrap_or(jump.matrix.ncols());
            let mut matrix = Mat::zeros(rows, cols);
            matrix
                .view_mut((0, 0), (jump.matrix.nrows(), jump.matrix.ncols()))
                .copy_from(&jump.matrix);
            JumpSpec { matrix, transitions: jump.transitions.clone() }
        })
        .collect();

    Ok(HybridSystemSpec { epsilon: spec.epsilon, modes, jumps })
}

/// A single switching instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEvent {
    /// Event time in seconds.
    pub t: f64,
    /// Mode active from this event (until the next one).
    pub mode: usize,
    /// Jump applied to the state at this event. `None` only for the initial
    /// event at `t = 0`, which sets the starting mode without a reset.
    pub jump: Option<usize>,
}

/// A finite switching and impulse schedule over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSchedule {
    /// Events in strictly increasing time order; the first is at `t = 0`.
    pub events: Vec<ScheduleEvent>,
    /// End of the simulated window, at or after the last event.
    pub horizon: f64,
}

impl EventSchedule {
    /// Wraps an explicit event list after checking the ordering rules.
    ///
    /// Compatibility with a concrete system (mode and jump indices, declared
    /// transitions) is checked separately by [`EventSchedule::validate_for`].
    pub fn from_events(events: Vec<ScheduleEvent>, horizon: f64) -> Result<Self, ModelError> {
        let first = events.first().ok_or(ModelError::EmptySchedule)?;
        if first.t != 0.0 {
            return Err(ModelError::BadScheduleStart { t0: first.t });
        }
        if first.jump.is_some() {
            return Err(ModelError::InitialJump);
        }
        for (index, pair) in events.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(ModelError::NonIncreasingTime { index: index + 1, t: pair[1].t });
            }
            if pair[1].jump.is_none() {
                return Err(ModelError::MissingJump { index: index + 1 });
            }
        }
        let last = events.last().map(|e| e.t).unwrap_or(0.0);
        if !(horizon >= last) {
            return Err(ModelError::HorizonTooShort { horizon, last });
        }
        Ok(EventSchedule { events, horizon })
    }

    /// Periodic schedule with dwell time `tau`, starting in `start_mode`.
    ///
    /// At each event the next transition is chosen round-robin among the
    /// declared transitions leaving the current mode, so a two-mode system
    /// with one jump in each direction simply alternates.
    pub fn periodic(
        spec: &HybridSystemSpec,
        tau: f64,
        horizon: f64,
        start_mode: usize,
    ) -> Result<Self, ModelError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ModelError::BadDwell(tau));
        }
        let mut counter = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Self::generate(
            spec,
            horizon,
            start_mode,
            move |_, options| {
                let choice = options[counter % options.len()];
                counter += 1;
                (tau, choice)
            },
            &mut rng,
        )
    }

    /// Seeded random schedule with all gaps at least `min_gap`.
    ///
    /// Gap `k` is `min_gap * (1 + u_k * spread)` with `u_k` uniform on
    /// [0, 1); the transition out of each mode is chosen uniformly among the
    /// declared ones. The same seed always yields the same schedule.
    pub fn random(
        spec: &HybridSystemSpec,
        min_gap: f64,
        spread: f64,
        horizon: f64,
        start_mode: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if !(min_gap > 0.0 && min_gap.is_finite()) {
            return Err(ModelError::BadDwell(min_gap));
        }
        let spread = spread.max(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate(
            spec,
            horizon,
            start_mode,
            move |rng, options| {
                let gap = min_gap * (1.0 + rng.gen::<f64>() * spread);
                let choice = options[rng.gen_range(0..options.len())];
                (gap, choice)
            },
            &mut rng,
        )
    }

    fn generate(
        spec: &HybridSystemSpec,
        horizon: f64,
        start_mode: usize,
        mut step: impl FnMut(&mut ChaCha8Rng, &[(usize, usize)]) -> (f64, (usize, usize)),
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ModelError> {
        if start_mode >= spec.modes.len() {
            return Err(ModelError::UnknownMode {
                index: 0,
                mode: start_mode,
                count: spec.modes.len(),
            });
        }
        let mut events = vec![ScheduleEvent { t: 0.0, mode: start_mode, jump: None }];
        let mut t = 0.0;
        let mut mode = start_mode;
        loop {
            let options = spec.transitions_from(mode);
            if options.is_empty() {
                return Err(ModelError::NoTransitionFrom { mode });
            }
            let (gap, (jump, target)) = step(rng, &options);
            t += gap;
            if t > horizon {
                break;
            }
            events.push(ScheduleEvent { t, mode: target, jump: Some(jump) });
            mode = target;
        }
        Ok(EventSchedule { events, horizon })
    }

    /// Smallest gap between consecutive events, or `None` with fewer than two
    /// events.
    pub fn min_gap(&self) -> Option<f64> {
        self.events
            .windows(2)
            .map(|pair| pair[1].t - pair[0].t)
            .min_by(f64::total_cmp)
    }

    /// Checks that every event is realizable on `spec`: valid mode and jump
    /// indices and, for each event after the first, a declared transition
    /// from the previous mode to the event's mode under the event's jump.
    pub fn validate_for(&self, spec: &HybridSystemSpec) -> Result<(), ModelError> {
        let first = self.events.first().ok_or(ModelError::EmptySchedule)?;
        if first.mode >= spec.modes.len() {
            return Err(ModelError::UnknownMode {
                index: 0,
                mode: first.mode,
                count: spec.modes.len(),
            });
        }
        let mut previous = first.mode;
        for (index, event) in self.events.iter().enumerate().skip(1) {
            if event.mode >= spec.modes.len() {
                return Err(ModelError::UnknownMode {
                    index,
                    mode: event.mode,
                    count: spec.modes.len(),
                });
            }
            let jump = event.jump.ok_or(ModelError::MissingJump { index })?;
            let declared = spec
                .jumps
                .get(jump)
                .ok_or(ModelError::UnknownJump { index, jump, count: spec.jumps.len() })?;
            if !declared.transitions.contains(&(previous, event.mode)) {
                return Err(ModelError::UndeclaredTransition {
                    index,
                    jump,
                    from: previous,
                    to: event.mode,
                });
            }
            previous = event.mode;
        }
        Ok(())
    }
}

/// Flow generators and jump maps in one fixed coordinate frame, the common
/// input format of the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDynamics {
    /// Per-mode generators `G^i` of `d/dt u = G^i u` (the time scaling is
    /// already folded in).
    pub generators: Vec<Mat>,
    /// Jump maps keyed by `(source mode, jump index, target mode)`.
    pub jumps: BTreeMap<(usize, usize, usize), Mat>,
}

impl HybridDynamics {
    /// Dynamics in original coordinates: mode `i` evolves as
    /// `du/dt = D^{-1} F^i u`, i.e. fast rows of the flow are divided by
    /// `epsilon`, and jumps apply the declared matrices unchanged.
    pub fn from_spec(spec: &HybridSystemSpec) -> Result<Self, ModelError> {
        let findings = spec.validate();
        // Varying dimensions are fine here: each jump map mediates them.
        let blocking: Vec<Finding> = findings
            .into_iter()
            .filter(|f| {
                !matches!(
                    f,
                    Finding::NonConstantSlowCount { .. } | Finding::NonConstantFastCount { .. }
                )
            })
            .collect();
        if !blocking.is_empty() {
            return Err(ModelError::Invalid(blocking));
        }
        let generators = spec
            .modes
            .iter()
            .map(|mode| {
                let mut g = mode.flow.clone();
                for (row, &fast) in mode.fast_mask.iter().enumerate() {
                    if fast {
                        for col in 0..g.ncols() {
                            g[(row, col)] /= spec.epsilon;
                        }
                    }
                }
                g
            })
            .collect();
        let mut jumps = BTreeMap::new();
        for (j, jump) in spec.jumps.iter().enumerate() {
            for &(source, target) in &jump.transitions {
                jumps.insert((source, j, target), jump.matrix.clone());
            }
        }
        Ok(HybridDynamics { generators, jumps })
    }

    /// State dimension while mode `i` is active.
    pub fn dim(&self, mode: usize) -> usize {
        self.generators[mode].nrows()
    }
}
