//! Artifact emission: output-directory resolution, trajectory and sweep CSV
//! files, and gnuplot scripts referencing them.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use hybrid_dwell::simulate::{Trajectory, WitnessSample};

use crate::commands::CliError;

/// Environment variable overriding the output directory (the `--out` flag
/// still wins over it).
pub const OUT_DIR_ENV: &str = "HYBRID_DWELL_OUT_DIR";

/// Picks the output directory: `--out`, then the environment override, then
/// the config's `out_dir`, then the working directory. Creates it.
pub fn resolve_out_dir(
    cli: Option<PathBuf>,
    config: Option<&str>,
) -> Result<PathBuf, CliError> {
    let dir = cli
        .or_else(|| env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| config.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Domain(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Writes the trajectory as CSV with columns
/// `t, mode, is_post_jump, u1..un, W_s, W_f` and returns the state column
/// count. Witness columns stay blank when no witness data is available;
/// states shorter than the widest mode leave their trailing columns blank.
pub fn write_trajectory_csv(
    path: &Path,
    trajectory: &Trajectory,
    wits: Option<&[WitnessSample]>,
) -> Result<usize, CliError> {
    let dim = trajectory.samples.iter().map(|s| s.state.len()).max().unwrap_or(0);
    let mut writer = csv::Writer::from_path(path)?;

    let mut header = vec!["t".to_string(), "mode".to_string(), "is_post_jump".to_string()];
    header.extend((1..=dim).map(|i| format!("u{i}")));
    header.push("W_s".to_string());
    header.push("W_f".to_string());
    writer.write_record(&header)?;

    for (index, sample) in trajectory.samples.iter().enumerate() {
        let mut row = vec![
            format!("{}", sample.t),
            format!("{}", sample.mode),
            if sample.is_post_jump { "1" } else { "0" }.to_string(),
        ];
        for i in 0..dim {
            row.push(
                sample
                    .state
                    .get(i)
                    .map(|v| format!("{v}"))
                    .unwrap_or_default(),
            );
        }
        match wits.and_then(|w| w.get(index)) {
            Some(w) => {
                row.push(format!("{}", w.w_s));
                row.push(format!("{}", w.w_f));
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| CliError::Domain(format!("csv output failure: {e}")))?;
    Ok(dim)
}

/// Writes a gnuplot script plotting the state components of `csv_name` and,
/// when available, the witness columns.
pub fn write_plot_script(
    path: &Path,
    csv_name: &str,
    state_dim: usize,
    has_witness: bool,
) -> Result<(), CliError> {
    let mut lines = vec![
        "# Render with: gnuplot -p <this file>".to_string(),
        "set datafile separator \",\"".to_string(),
        "set key autotitle columnhead".to_string(),
        "set xlabel \"t (s)\"".to_string(),
        "set ylabel \"state\"".to_string(),
    ];
    let state_plots: Vec<String> = (0..state_dim)
        .map(|i| format!("  \"{csv_name}\" using 1:{} with lines", 4 + i))
        .collect();
    lines.push(format!("plot \\\n{}", state_plots.join(", \\\n")));
    if has_witness {
        let w_s = 4 + state_dim;
        let w_f = 5 + state_dim;
        lines.push("pause -1 \"press enter for the witness plot\"".to_string());
        lines.push("set ylabel \"witness\"".to_string());
        lines.push(format!(
            "plot \\\n  \"{csv_name}\" using 1:{w_s} with lines, \\\n  \"{csv_name}\" using 1:{w_f} with lines"
        ));
    }
    fs::write(path, lines.join("\n") + "\n")?;
    Ok(())
}

/// Writes the sweep table as CSV with a stable header.
pub fn write_sweep_csv(
    path: &Path,
    rows: &[(f64, f64, f64, f64, f64)],
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "eps",
        "tau_closed_form",
        "tau_bisection",
        "residual",
        "residual_over_eps",
    ])?;
    for &(eps, tau_cf, tau_bis, residual, ratio) in rows {
        writer.write_record([
            format!("{eps}"),
            format!("{tau_cf}"),
            format!("{tau_bis}"),
            format!("{residual}"),
            format!("{ratio}"),
        ])?;
    }
    writer.flush().map_err(|e| CliError::Domain(format!("csv output failure: {e}")))?;
    Ok(())
}
