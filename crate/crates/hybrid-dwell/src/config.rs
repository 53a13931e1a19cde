//! Text-based run configuration, schedule files, and certificate records.
//!
//! Configurations are TOML: matrices as row-major nested arrays, time-scale
//! masks as arrays of `"slow"` / `"fast"` strings, everything optional under
//! `[options]`. Certificate records are JSON so downstream tooling can
//! re-verify a stored certificate. Emitting and re-parsing either format
//! reproduces the value exactly.

use serde::{Deserialize, Serialize};

use crate::certify::{
    CertifyError, DwellTimeCertificate, LyapOverride, LyapunovData,
};
use crate::linalg::Mat;
use crate::model::{
    EventSchedule, HybridSystemSpec, JumpSpec, ModeSpec, ModelError, ScheduleEvent,
};
use crate::tol;

/// Errors raised while reading or converting configuration files.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("configuration does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("configuration does not serialize: {0}")]
    TomlOut(#[from] toml::ser::Error),
    #[error("record does not parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: row {row} has {got} entries, expected {want}")]
    RaggedMatrix { context: String, row: usize, got: usize, want: usize },
    #[error("mode {mode}: scale {index} is {value:?}, expected \"slow\" or \"fast\"")]
    BadScale { mode: usize, index: usize, value: String },
    #[error("lyapunov override for mode {mode}: the {block} block needs both the weight matrix and the rate")]
    OverrideIncomplete { mode: usize, block: &'static str },
    #[error("schedule rejected: {0}")]
    Model(#[from] ModelError),
}

/// One mode: a flow matrix and the per-coordinate time scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    /// Row-major flow matrix.
    pub flow: Vec<Vec<f64>>,
    /// One `"slow"` or `"fast"` per coordinate.
    pub scales: Vec<String>,
}

/// One jump map and the mode transitions it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    /// Row-major jump matrix.
    pub matrix: Vec<Vec<f64>>,
    /// `[source, target]` mode pairs.
    pub transitions: Vec<(usize, usize)>,
}

/// Optional per-mode Lyapunov data supplied by the user instead of the
/// automatic construction. Each block needs both its weight and its rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapOverrideConfig {
    pub mode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_slow: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_slow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_fast: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_fast: Option<f64>,
}

fn default_sample_dt() -> f64 {
    0.01
}

fn default_kappa() -> f64 {
    tol::KAPPA_DEFAULT
}

fn default_divergence_factor() -> f64 {
    tol::DIVERGENCE_FACTOR_DEFAULT
}

fn default_converge_threshold() -> f64 {
    tol::CONVERGE_THRESHOLD_DEFAULT
}

fn is_false(v: &bool) -> bool {
    !*v
}

fn is_true(v: &bool) -> bool {
    *v
}

fn default_true() -> bool {
    true
}

/// Command options shared by the front-end commands; every field has a
/// default so the section may be omitted entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Epsilon values for certification sweeps; empty means "use the
    /// system's own epsilon".
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    /// Simulation horizon in seconds; derived from the slow rate when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub sample_dt: f64,
    /// Initial state in original coordinates; defaults to all ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Output directory; the command line and environment can override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Keep the fast weight inside the b3 norm instead of the plain product
    /// bound.
    #[serde(skip_serializing_if = "is_false")]
    pub strict_b3: bool,
    /// Fraction of each block's spectral abscissa claimed as its decay rate.
    pub kappa: f64,
    /// Balance the scalar two-mode weights automatically when the structure
    /// allows it.
    #[serde(skip_serializing_if = "is_true", default = "default_true")]
    pub optimize_scalar_q: bool,
    /// Seed for randomized schedules.
    pub seed: u64,
    /// Mode active at t = 0.
    pub start_mode: usize,
    /// Pad modes with artificial coordinates until slow/fast counts match.
    #[serde(skip_serializing_if = "is_false")]
    pub augment: bool,
    /// Decay rate for artificial coordinates; derived from epsilon when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment_lambda: Option<f64>,
    /// A trajectory counts as diverged beyond this multiple of the initial
    /// norm.
    pub divergence_factor: f64,
    /// Relative norm threshold for the converging classification.
    pub converge_threshold: f64,
    /// Per-mode Lyapunov data overrides.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lyapunov: Vec<LyapOverrideConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            eps: Vec::new(),
            horizon: None,
            sample_dt: default_sample_dt(),
            x0: None,
            out_dir: None,
            strict_b3: false,
            kappa: default_kappa(),
            optimize_scalar_q: true,
            seed: 0,
            start_mode: 0,
            augment: false,
            augment_lambda: None,
            divergence_factor: default_divergence_factor(),
            converge_threshold: default_converge_threshold(),
            lyapunov: Vec::new(),
        }
    }
}

/// A full run configuration: the hybrid system plus command options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<JumpConfig>,
    #[serde(default)]
    pub options: RunOptions,
}

fn mat_from_rows(rows: &[Vec<f64>], context: &str) -> Result<Mat, ConfigError> {
    let want = rows.first().map(Vec::len).unwrap_or(0);
    for (row, entries) in rows.iter().enumerate() {
        if entries.len() != want {
            return Err(ConfigError::RaggedMatrix {
                context: context.to_string(),
                row,
                got: entries.len(),
                want,
            });
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Mat::from_row_slice(rows.len(), want, &flat))
}

fn rows_from_mat(mat: &Mat) -> Vec<Vec<f64>> {
    (0..mat.nrows())
        .map(|r| (0..mat.ncols()).map(|c| mat[(r, c)]).collect())
        .collect()
}

impl RunConfig {
    /// Parses a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Emits TOML that parses back to an identical configuration.
    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Builds the system description. Structural problems beyond matrix
    /// shape (squareness, transition indices, epsilon range) are left to the
    /// model's own validation.
    pub fn to_spec(&self) -> Result<HybridSystemSpec, ConfigError> {
        let mut modes = Vec::with_capacity(self.modes.len());
        for (m, mode) in self.modes.iter().enumerate() {
            let flow = mat_from_rows(&mode.flow, &format!("mode {m} flow"))?;
            let mut fast_mask = Vec::with_capacity(mode.scales.len());
            for (index, scale) in mode.scales.iter().enumerate() {
                match scale.as_str() {
                    "slow" => fast_mask.push(false),
                    "fast" => fast_mask.push(true),
                    other => {
                        return Err(ConfigError::BadScale {
                            mode: m,
                            index,
                            value: other.to_string(),
                        })
                    }
                }
            }
            modes.push(ModeSpec { flow, fast_mask });
        }
        let mut jumps = Vec::with_capacity(self.jumps.len());
        for (j, jump) in self.jumps.iter().enumerate() {
            let matrix = mat_from_rows(&jump.matrix, &format!("jump {j} matrix"))?;
            jumps.push(JumpSpec { matrix, transitions: jump.transitions.clone() });
        }
        Ok(HybridSystemSpec { epsilon: self.epsilon, modes, jumps })
    }

    /// Builds the Lyapunov overrides declared under `[options]`.
    pub fn to_overrides(&self) -> Result<Vec<LyapOverride>, ConfigError> {
        let mut out = Vec::with_capacity(self.options.lyapunov.len());
        for entry in &self.options.lyapunov {
            let slow = match (&entry.q_slow, entry.lambda_slow) {
                (Some(rows), Some(rate)) => {
                    Some((mat_from_rows(rows, &format!("mode {} q_slow", entry.mode))?, rate))
                }
                (None, None) => None,
                _ => {
                    return Err(ConfigError::OverrideIncomplete {
                        mode: entry.mode,
                        block: "slow",
                    })
                }
            };
            let fast = match (&entry.q_fast, entry.lambda_fast) {
                (Some(rows), Some(rate)) => {
                    Some((mat_from_rows(rows, &format!("mode {} q_fast", entry.mode))?, rate))
                }
                (None, None) => None,
                _ => {
                    return Err(ConfigError::OverrideIncomplete {
                        mode: entry.mode,
                        block: "fast",
                    })
                }
            };
            out.push(LyapOverride { mode: entry.mode, slow, fast });
        }
        Ok(out)
    }

    /// Represents an existing system description as a configuration.
    pub fn from_spec(spec: &HybridSystemSpec) -> Self {
        let modes = spec
            .modes
            .iter()
            .map(|mode| ModeConfig {
                flow: rows_from_mat(&mode.flow),
                scales: mode
                    .fast_mask
                    .iter()
                    .map(|&fast| if fast { "fast" } else { "slow" }.to_string())
                    .collect(),
            })
            .collect();
        let jumps = spec
            .jumps
            .iter()
            .map(|jump| JumpConfig {
                matrix: rows_from_mat(&jump.matrix),
                transitions: jump.transitions.clone(),
            })
            .collect();
        RunConfig { epsilon: spec.epsilon, modes, jumps, options: RunOptions::default() }
    }
}

/// One event in a schedule file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    pub t: f64,
    pub mode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<usize>,
}

/// An explicit event schedule as a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub horizon: f64,
    pub events: Vec<EventConfig>,
}

impl ScheduleFile {
    /// Parses a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Emits TOML that parses back to an identical schedule.
    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Builds the validated event schedule.
    pub fn to_schedule(&self) -> Result<EventSchedule, ConfigError> {
        let events = self
            .events
            .iter()
            .map(|e| ScheduleEvent { t: e.t, mode: e.mode, jump: e.jump })
            .collect();
        Ok(EventSchedule::from_events(events, self.horizon)?)
    }

    /// Represents an existing schedule as a file.
    pub fn from_schedule(schedule: &EventSchedule) -> Self {
        ScheduleFile {
            horizon: schedule.horizon,
            events: schedule
                .events
                .iter()
                .map(|e| EventConfig { t: e.t, mode: e.mode, jump: e.jump })
                .collect(),
        }
    }
}

/// Case thresholds as stored in a certificate record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ThresholdRecord {
    pub eps3: Option<f64>,
    pub eps5: Option<f64>,
    pub eps6: Option<f64>,
    pub eps7_printed: Option<f64>,
    pub eps7_recomputed: Option<f64>,
    pub eps8: Option<f64>,
    pub eps_no_dwell: Option<f64>,
}

/// Machine-readable certificate: every constant entering the dwell-time
/// bounds, the bounds themselves, and a Schur verdict that can be recomputed
/// from the stored `(tau_check, epsilon)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub case: String,
    pub epsilon: f64,
    pub epsilon_star: f64,
    pub tau_closed_form: f64,
    pub tau_bisection: f64,
    pub a_param: f64,
    pub eta: f64,
    pub reduced_order_tau: f64,
    pub lambda_s: f64,
    pub lambda_f: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub gamma11: f64,
    pub gamma12: f64,
    pub gamma21: f64,
    pub gamma22: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub thresholds: ThresholdRecord,
    /// Dwell time at which the stored Schur verdict was computed.
    pub tau_check: f64,
    /// Spectral radius of the envelope gain at `tau_check`.
    pub schur_radius: f64,
    /// Whether the envelope gain at `tau_check` passed the Schur test.
    pub schur: bool,
}

impl CertificateRecord {
    /// Parses a JSON document.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Emits pretty JSON that parses back to an identical record.
    pub fn to_json_string(&self) -> Result<String, ConfigError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Assembles the record for a computed certificate, evaluating the Schur
    /// verdict slightly above the closed-form bound.
    pub fn from_certificate(
        cert: &DwellTimeCertificate,
        lyap: &LyapunovData,
    ) -> Result<Self, CertifyError> {
        let tau_check = cert.tau_closed_form + tol::CERT_CHECK_SHIFT;
        let gain = lyap.gamma_matrix() * crate::certify::build_m_tau(lyap, cert.epsilon, tau_check)?;
        let test = crate::linalg::is_schur_positive(&gain)?;
        let t = &cert.thresholds;
        Ok(CertificateRecord {
            case: cert.gamma11_case.to_string(),
            epsilon: cert.epsilon,
            epsilon_star: cert.epsilon_star,
            tau_closed_form: cert.tau_closed_form,
            tau_bisection: cert.tau_bisection,
            a_param: cert.a_param,
            eta: cert.eta,
            reduced_order_tau: cert.reduced_order_tau,
            lambda_s: lyap.lambda_s,
            lambda_f: lyap.lambda_f,
            b1: lyap.b1,
            b2: lyap.b2,
            b3: lyap.b3,
            epsilon1: lyap.epsilon1,
            epsilon2: lyap.epsilon2,
            beta1: lyap.beta1,
            beta2: lyap.beta2,
            beta3: lyap.beta3,
            gamma11: lyap.gamma11,
            gamma12: lyap.gamma12,
            gamma21: lyap.gamma21,
            gamma22: lyap.gamma22,
            delta1: lyap.delta1,
            delta2: lyap.delta2,
            delta3: lyap.delta3,
            delta4: lyap.delta4,
            thresholds: ThresholdRecord {
                eps3: t.eps3,
                eps5: t.eps5,
                eps6: t.eps6,
                eps7_printed: t.eps7_printed,
                eps7_recomputed: t.eps7_recomputed,
                eps8: t.eps8,
                eps_no_dwell: t.eps_no_dwell,
            },
            tau_check,
            schur_radius: test.radius,
            schur: test.schur,
        })
    }
}
