//! Implementations of the five commands and the error-to-exit-code policy.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use hybrid_dwell::certify::{
    build_lyapunov, closed_form_certificate, reduced_order_certificate, CertifyError,
    CertifyOptions, DwellTimeCertificate, LyapunovData,
};
use hybrid_dwell::config::{CertificateRecord, ConfigError, RunConfig, ScheduleFile};
use hybrid_dwell::decouple::{build_decoupled, DecoupleError, DecoupledSystem};
use hybrid_dwell::linalg::{spectral_abscissa, LinalgError, Vector};
use hybrid_dwell::model::{
    augment, default_augment_lambda, reorder, EventSchedule, HybridSystemSpec, ModelError,
    ReorderedSystem,
};
use hybrid_dwell::simulate::{
    classify, simulate_spec, witnesses, SimError, SimOptions, WitnessSample,
};
use hybrid_dwell::tol;

use crate::output;

/// Command failure carrying the exit-code class: usage and parse problems
/// exit with 2, domain failures (violated requirements, infeasibility,
/// incompatible schedules, i/o) with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Domain(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<DecoupleError> for CliError {
    fn from(e: DecoupleError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o failure: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Domain(format!("csv output failure: {e}"))
    }
}

struct Loaded {
    config: RunConfig,
    spec: HybridSystemSpec,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    load_str(&text)
}

fn load_str(text: &str) -> Result<Loaded, CliError> {
    let config = RunConfig::from_toml_str(text)?;
    let mut spec = config.to_spec()?;
    if config.options.augment {
        let lambda = config
            .options
            .augment_lambda
            .unwrap_or_else(|| default_augment_lambda(spec.epsilon, None));
        spec = augment(&spec, lambda)?;
    }
    Ok(Loaded { config, spec })
}

struct Analysis {
    reordered: ReorderedSystem,
    decoupled: DecoupledSystem,
    lyap: LyapunovData,
}

fn analyze(loaded: &Loaded, strict_b3: bool) -> Result<Analysis, CliError> {
    let reordered = reorder(&loaded.spec)?;
    let decoupled = build_decoupled(&reordered)?;
    let options = CertifyOptions {
        kappa: loaded.config.options.kappa,
        strict_b3: strict_b3 || loaded.config.options.strict_b3,
        optimize_scalar_q: loaded.config.options.optimize_scalar_q,
        overrides: loaded.config.to_overrides()?,
    };
    let lyap = build_lyapunov(&decoupled, &options)?;
    Ok(Analysis { reordered, decoupled, lyap })
}

fn initial_state(loaded: &Loaded, dim: usize) -> Vector {
    match &loaded.config.options.x0 {
        Some(values) => Vector::from_vec(values.clone()),
        None => Vector::from_element(dim, 1.0),
    }
}

fn sim_options(loaded: &Loaded) -> SimOptions {
    SimOptions {
        sample_dt: loaded.config.options.sample_dt,
        divergence_factor: loaded.config.options.divergence_factor,
        ..SimOptions::default()
    }
}

fn default_horizon(analysis: Option<&Analysis>) -> f64 {
    match analysis {
        Some(an) => tol::HORIZON_RATE_FACTOR / an.lyap.lambda_s,
        None => tol::HORIZON_FALLBACK,
    }
}

pub fn cmd_validate(config_path: &Path) -> Result<(), CliError> {
    let loaded = load(config_path)?;
    let findings = loaded.spec.validate();
    if !findings.is_empty() {
        for finding in &findings {
            println!("finding: {finding}");
        }
        return Err(CliError::Domain(format!(
            "configuration failed validation with {} finding(s)",
            findings.len()
        )));
    }

    let reordered = reorder(&loaded.spec)?;
    let mut violations = 0usize;
    match build_decoupled(&reordered) {
        Ok(decoupled) => {
            for (mode, data) in decoupled.modes.iter().enumerate() {
                let fast = spectral_abscissa(&data.a22)?;
                if fast >= 0.0 {
                    println!(
                        "finding: mode {mode}: fast block is not Hurwitz \
                         (spectral abscissa {fast})"
                    );
                    violations += 1;
                }
                let slow = spectral_abscissa(&data.a0)?;
                if slow >= 0.0 {
                    println!(
                        "finding: mode {mode}: slow complement is not Hurwitz \
                         (spectral abscissa {slow})"
                    );
                    violations += 1;
                }
            }
        }
        Err(e) => {
            println!("finding: the fast flow block must be non-singular for all modes: {e}");
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(CliError::Domain(format!(
            "system violates {violations} stability requirement(s)"
        )));
    }

    let transitions: usize = loaded.spec.jumps.iter().map(|j| j.transitions.len()).sum();
    println!(
        "ok: {} modes (slow dim {}, fast dim {}), {} declared transitions, epsilon = {}",
        loaded.spec.modes.len(),
        reordered.n_x,
        reordered.n_z,
        transitions,
        loaded.spec.epsilon
    );
    Ok(())
}

fn epsilon_list(cli: &[f64], loaded: &Loaded) -> Vec<f64> {
    if !cli.is_empty() {
        cli.to_vec()
    } else if !loaded.config.options.eps.is_empty() {
        loaded.config.options.eps.clone()
    } else {
        vec![loaded.spec.epsilon]
    }
}

fn print_constants(lyap: &LyapunovData) {
    println!("constants:");
    println!("  lambda_s          = {}", lyap.lambda_s);
    println!("  lambda_f          = {}", lyap.lambda_f);
    println!("  b1                = {}", lyap.b1);
    println!("  b2                = {}", lyap.b2);
    println!("  b3                = {}", lyap.b3);
    println!("  gamma11           = {}", lyap.gamma11);
    println!("  gamma12           = {}", lyap.gamma12);
    println!("  gamma21           = {}", lyap.gamma21);
    println!("  gamma22           = {}", lyap.gamma22);
    println!("  beta1             = {}", lyap.beta1);
    println!("  beta2             = {}", lyap.beta2);
    println!("  beta3             = {}", lyap.beta3);
    println!("  delta1            = {}", lyap.delta1);
    println!("  delta2            = {}", lyap.delta2);
    println!("  delta3            = {}", lyap.delta3);
    println!("  delta4            = {}", lyap.delta4);
    println!("  epsilon1          = {}", lyap.epsilon1);
    println!("  epsilon2          = {}", lyap.epsilon2);
    println!("  reduced_order_tau = {}", reduced_order_certificate(lyap));
}

fn print_certificate(cert: &DwellTimeCertificate, record: &CertificateRecord, file: &str) {
    println!("epsilon = {}", cert.epsilon);
    println!("  case              = {}", cert.gamma11_case);
    println!("  epsilon_star      = {}", cert.epsilon_star);
    println!("  tau_closed_form   = {}", cert.tau_closed_form);
    println!("  tau_bisection     = {}", cert.tau_bisection);
    println!("  a                 = {}", cert.a_param);
    println!("  eta               = {}", cert.eta);
    let t = &cert.thresholds;
    for (name, value) in [
        ("eps3", t.eps3),
        ("eps5", t.eps5),
        ("eps6", t.eps6),
        ("eps7_printed", t.eps7_printed),
        ("eps7_recomputed", t.eps7_recomputed),
        ("eps8", t.eps8),
        ("eps_no_dwell", t.eps_no_dwell),
    ] {
        if let Some(v) = value {
            println!("  {name:<17} = {v}");
        }
    }
    println!(
        "  schur check       = radius {} at tau {} ({})",
        record.schur_radius,
        record.tau_check,
        if record.schur { "pass" } else { "FAIL" }
    );
    println!("  record            = {file}");
}

pub fn cmd_certify(
    config_path: &Path,
    eps: &[f64],
    strict_b3: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let loaded = load(config_path)?;
    let analysis = analyze(&loaded, strict_b3)?;
    let out_dir = output::resolve_out_dir(out, loaded.config.options.out_dir.as_deref())?;
    let list = epsilon_list(eps, &loaded);

    print_constants(&analysis.lyap);
    for (index, &epsilon) in list.iter().enumerate() {
        let cert = closed_form_certificate(&analysis.lyap, epsilon)
            .map_err(|e| CliError::Domain(format!("epsilon = {epsilon}: {e}")))?;
        let record = CertificateRecord::from_certificate(&cert, &analysis.lyap)?;
        let file = format!("certificate-{index:02}.json");
        fs::write(out_dir.join(&file), record.to_json_string()?)?;
        print_certificate(&cert, &record, &file);
    }
    println!("wrote {} certificate record(s) to {}", list.len(), out_dir.display());
    Ok(())
}

fn build_schedule(
    loaded: &Loaded,
    tau: Option<f64>,
    schedule_path: Option<&Path>,
    horizon: f64,
) -> Result<EventSchedule, CliError> {
    match (tau, schedule_path) {
        (Some(tau), None) => {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--tau must be positive and finite, got {tau}"
                )));
            }
            Ok(EventSchedule::periodic(
                &loaded.spec,
                tau,
                horizon,
                loaded.config.options.start_mode,
            )?)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let file = ScheduleFile::from_toml_str(&text)?;
            let schedule = file.to_schedule()?;
            schedule.validate_for(&loaded.spec)?;
            Ok(schedule)
        }
        _ => Err(CliError::Usage(
            "exactly one of --tau and --schedule must be given".to_string(),
        )),
    }
}

pub fn cmd_simulate(
    config_path: &Path,
    tau: Option<f64>,
    schedule_path: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let loaded = load(config_path)?;
    let analysis = match analyze(&loaded, false) {
        Ok(an) => Some(an),
        Err(e) => {
            println!("note: witnesses unavailable ({e})");
            None
        }
    };
    let horizon = loaded
        .config
        .options
        .horizon
        .unwrap_or_else(|| default_horizon(analysis.as_ref()));
    let schedule = build_schedule(&loaded, tau, schedule_path, horizon)?;
    let horizon = schedule.horizon;

    let dynamics_dim = loaded.spec.modes[schedule.events[0].mode].flow.nrows();
    let x0 = initial_state(&loaded, dynamics_dim);
    let trajectory = simulate_spec(&loaded.spec, &schedule, &sim_options(&loaded), &x0)?;
    let wits: Option<Vec<WitnessSample>> = analysis
        .as_ref()
        .and_then(|an| witnesses(&trajectory, &an.reordered, &an.decoupled, &an.lyap.modes).ok());

    let out_dir = output::resolve_out_dir(out, loaded.config.options.out_dir.as_deref())?;
    let csv_name = "trajectory.csv";
    let state_dim =
        output::write_trajectory_csv(&out_dir.join(csv_name), &trajectory, wits.as_deref())?;
    output::write_plot_script(
        &out_dir.join("plot.gp"),
        csv_name,
        state_dim,
        wits.is_some(),
    )?;

    println!(
        "simulated {} events over {} s ({} samples)",
        schedule.events.len() - 1,
        horizon,
        trajectory.samples.len()
    );
    if let Some(t) = trajectory.diverged_at {
        println!("divergence threshold crossed at t = {t}");
    }
    let verdict = classify(&trajectory, horizon, loaded.config.options.converge_threshold);
    println!(
        "classification: {verdict} (threshold {} relative to the initial norm)",
        loaded.config.options.converge_threshold
    );
    println!("wrote {csv_name} and plot.gp to {}", out_dir.display());
    Ok(())
}

pub fn cmd_sweep(config_path: &Path, eps: &[f64], out: Option<PathBuf>) -> Result<(), CliError> {
    if eps.is_empty() {
        return Err(CliError::Usage("--eps needs at least one value".to_string()));
    }
    let loaded = load(config_path)?;
    let analysis = analyze(&loaded, false)?;
    let lyap = &analysis.lyap;

    let results: Vec<Result<DwellTimeCertificate, CertifyError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&epsilon| scope.spawn(move || closed_form_certificate(lyap, epsilon)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("certificate computation does not panic"))
            .collect()
    });

    let constant = reduced_order_certificate(lyap);
    println!("asymptote constant part = {constant} (dwell bound approaches it as eps -> 0)");
    println!(
        "{:>12}  {:>22}  {:>22}  {:>22}  {:>22}",
        "eps", "tau_closed_form", "tau_bisection", "residual", "residual/eps"
    );
    let mut rows = Vec::with_capacity(eps.len());
    for (&epsilon, result) in eps.iter().zip(results) {
        let cert =
            result.map_err(|e| CliError::Domain(format!("epsilon = {epsilon}: {e}")))?;
        let residual = cert.tau_closed_form - constant;
        let ratio = residual / epsilon;
        println!(
            "{:>12}  {:>22}  {:>22}  {:>22}  {:>22}",
            format!("{epsilon}"),
            format!("{}", cert.tau_closed_form),
            format!("{}", cert.tau_bisection),
            format!("{residual}"),
            format!("{ratio}")
        );
        rows.push((epsilon, cert.tau_closed_form, cert.tau_bisection, residual, ratio));
    }

    let out_dir = output::resolve_out_dir(out, loaded.config.options.out_dir.as_deref())?;
    output::write_sweep_csv(&out_dir.join("sweep.csv"), &rows)?;
    println!("wrote sweep.csv to {}", out_dir.display());
    Ok(())
}

struct Expectation {
    name: &'static str,
    computed: f64,
    reference: f64,
    tolerance: f64,
    note: &'static str,
}

impl Expectation {
    fn line(&self) -> String {
        let verdict = if (self.computed - self.reference).abs() <= self.tolerance {
            "agrees"
        } else {
            "DIFFERS"
        };
        format!(
            "  {:<18} computed {:<24} reference {:<24} {} {}",
            self.name,
            format!("{}", self.computed),
            format!("{} {}", self.reference, self.note),
            verdict,
            if verdict == "DIFFERS" {
                format!("(tolerance {})", self.tolerance)
            } else {
                String::new()
            }
        )
        .trim_end()
        .to_string()
    }
}

pub fn cmd_reproduce(id: u8, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = match id {
        1 => include_str!("../configs/example1.toml"),
        2 => include_str!("../configs/example2.toml"),
        _ => return Err(CliError::Usage(format!("unknown example id {id}"))),
    };
    let loaded = load_str(text)?;
    let out_dir = output::resolve_out_dir(out, None)?;
    fs::write(out_dir.join("config.toml"), text)?;

    let analysis = analyze(&loaded, false)?;
    let lyap = &analysis.lyap;
    let reduced = reduced_order_certificate(lyap);
    let mut summary = vec![format!("example {id} reproduction"), String::new()];

    summary.push("constants".to_string());
    let expectations: Vec<Expectation> = match id {
        1 => vec![
            Expectation {
                name: "gamma11",
                computed: lyap.gamma11,
                reference: (2.0f64 / 5.0).sqrt(),
                tolerance: 1e-9,
                note: "(sqrt(2/5))",
            },
            Expectation {
                name: "lambda_s",
                computed: lyap.lambda_s,
                reference: 1.25,
                tolerance: 0.0,
                note: "",
            },
            Expectation {
                name: "lambda_f",
                computed: lyap.lambda_f,
                reference: 2.0,
                tolerance: 0.0,
                note: "",
            },
        ],
        _ => vec![
            Expectation {
                name: "gamma11",
                computed: lyap.gamma11,
                reference: (12.0f64 / 5.0).sqrt(),
                tolerance: 1e-9,
                note: "(2 sqrt(3/5))",
            },
            Expectation {
                name: "lambda_s",
                computed: lyap.lambda_s,
                reference: 1.1,
                tolerance: 0.0,
                note: "",
            },
            Expectation {
                name: "reduced_order_tau",
                computed: reduced,
                reference: 0.3977,
                tolerance: 5e-4,
                note: "(ln(gamma11)/lambda_s, 4 digits)",
            },
        ],
    };
    for expectation in &expectations {
        summary.push(expectation.line());
    }

    summary.push(String::new());
    summary.push("certificates".to_string());
    let eps_list = epsilon_list(&[], &loaded);
    for (index, &epsilon) in eps_list.iter().enumerate() {
        let cert = closed_form_certificate(lyap, epsilon)
            .map_err(|e| CliError::Domain(format!("epsilon = {epsilon}: {e}")))?;
        let record = CertificateRecord::from_certificate(&cert, lyap)?;
        let file = format!("certificate-{index:02}.json");
        fs::write(out_dir.join(&file), record.to_json_string()?)?;
        let mut line = format!(
            "  eps = {:<8} tau_closed_form = {:<24} tau_bisection = {:<24} ({file})",
            format!("{epsilon}"),
            format!("{}", cert.tau_closed_form),
            format!("{}", cert.tau_bisection)
        );
        if id == 1 && epsilon == 1e-3 {
            let reference = 6.16e-4;
            let verdict = if cert.tau_bisection <= 1.5 * reference { "agrees" } else { "DIFFERS" };
            line.push_str(&format!(
                "  reference dwell {reference} (within 1.5x) {verdict}"
            ));
        }
        summary.push(line);
    }

    summary.push(String::new());
    summary.push("simulations".to_string());
    let runs: &[(f64, &str)] = if id == 1 {
        &[(6.16e-4, "converging"), (0.2, "converging")]
    } else {
        &[(0.16, "diverging"), (0.406, "converging")]
    };
    let horizon = loaded.config.options.horizon.unwrap_or(tol::HORIZON_FALLBACK);
    for (index, &(tau, expected)) in runs.iter().enumerate() {
        let start_mode = loaded.config.options.start_mode;
        let schedule = EventSchedule::periodic(&loaded.spec, tau, horizon, start_mode)?;
        let x0 = initial_state(&loaded, loaded.spec.modes[start_mode].flow.nrows());
        let trajectory = simulate_spec(&loaded.spec, &schedule, &sim_options(&loaded), &x0)?;
        let wits =
            witnesses(&trajectory, &analysis.reordered, &analysis.decoupled, &lyap.modes).ok();
        let csv_name = format!("trajectory-{index}.csv");
        let state_dim = output::write_trajectory_csv(
            &out_dir.join(&csv_name),
            &trajectory,
            wits.as_deref(),
        )?;
        output::write_plot_script(
            &out_dir.join(format!("plot-{index}.gp")),
            &csv_name,
            state_dim,
            wits.is_some(),
        )?;
        let verdict =
            classify(&trajectory, horizon, loaded.config.options.converge_threshold);
        let agreement = if verdict.to_string() == expected { "agrees" } else { "DIFFERS" };
        summary.push(format!(
            "  tau = {:<10} classified {:<12} expected {:<12} {agreement}  ({csv_name})",
            format!("{tau}"),
            verdict.to_string(),
            expected
        ));
    }

    let report = summary.join("\n") + "\n";
    fs::write(out_dir.join("summary.txt"), &report)?;
    print!("{report}");
    println!("wrote report bundle to {}", out_dir.display());
    Ok(())
}
