//! CSV and text output of an [`ObservabilityReport`], plus the exit-code
//! contract of the command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::runner::{ImRecord, ObservabilityReport, PmsmRecord, Samples};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Clean = 0,
    /// Unreadable or invalid scenario.
    Invalid = 2,
    /// Simulation or numeric breakdown.
    Diverged = 3,
    /// The numeric oracle disagrees with the closed form.
    OracleFailed = 4,
    Io = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(err: &Error) -> Self {
        match err {
            Error::Diverged { .. } | Error::NonFiniteGradient { .. } => ExitStatus::Diverged,
            Error::Io { .. } => ExitStatus::Io,
            _ => ExitStatus::Invalid,
        }
    }
}

const PMSM_COLUMNS: [&str; 18] = [
    "time [s]",
    "i_d [A]",
    "i_q [A]",
    "theta_e [rad]",
    "omega_e [rad/s]",
    "di_d [A/s]",
    "di_q [A/s]",
    "u_d [V]",
    "u_q [V]",
    "D [A^2/s]",
    "psi_od [Wb]",
    "psi_oq [Wb]",
    "theta_o [rad]",
    "theta_o_rate [rad/s]",
    "rate_margin [rad/s]",
    "observable [-]",
    "observable_det [-]",
    "degenerate [-]",
];

const MATRIX_COLUMNS: [&str; 4] = ["numeric_det [mixed]", "numeric_rank [-]", "relative_det [-]", "rank_agrees [-]"];

const IM_COLUMNS: [&str; 19] = [
    "time [s]",
    "i_s_alpha [A]",
    "i_s_beta [A]",
    "psi_r_alpha [Wb]",
    "psi_r_beta [Wb]",
    "omega_e [rad/s]",
    "load_torque [N*m]",
    "dpsi_r_alpha [Wb/s]",
    "dpsi_r_beta [Wb/s]",
    "domega_e [rad/s^2]",
    "u_s_alpha [V]",
    "u_s_beta [V]",
    "acceleration_term [Wb^2/s]",
    "cross_term [Wb^2/s]",
    "condition_6d [Wb^2/s]",
    "condition_5d [Wb^2/s]",
    "observable [-]",
    "observable_5d [-]",
    "degenerate [-]",
];

/// Twelve significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn pmsm_row(r: &PmsmRecord, with_matrix: bool) -> Vec<String> {
    let mut row: Vec<String> = [
        r.time,
        r.i_d,
        r.i_q,
        r.theta_e,
        r.omega_e,
        r.di_d,
        r.di_q,
        r.u_d,
        r.u_q,
        r.determinant,
        r.psi_od,
        r.psi_oq,
        r.theta_o,
        r.theta_o_rate,
        r.rate_margin,
    ]
    .iter()
    .map(|v| format_value(*v))
    .collect();
    row.extend([flag(r.observable), flag(r.observable_det), flag(r.degenerate)]);
    if with_matrix {
        match r.matrix {
            Some(m) => row.extend([
                format_value(m.numeric_det),
                m.numeric_rank.to_string(),
                format_value(m.relative_det),
                flag(m.agrees),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), MATRIX_COLUMNS.len())),
        }
    }
    row
}

fn im_row(r: &ImRecord) -> Vec<String> {
    let mut row: Vec<String> = [
        r.time,
        r.i_s_alpha,
        r.i_s_beta,
        r.psi_r_alpha,
        r.psi_r_beta,
        r.omega_e,
        r.load_torque,
        r.dpsi_r_alpha,
        r.dpsi_r_beta,
        r.domega_e,
        r.u_s_alpha,
        r.u_s_beta,
        r.acceleration_term,
        r.cross_term,
        r.condition_6d,
        r.condition_5d,
    ]
    .iter()
    .map(|v| format_value(*v))
    .collect();
    row.extend([flag(r.observable), flag(r.observable_5d), flag(r.degenerate)]);
    row
}

/// The CSV document as bytes.
pub fn render_csv(report: &ObservabilityReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    match &report.samples {
        Samples::Pmsm(records) => {
            let with_matrix = records.iter().any(|r| r.matrix.is_some());
            let mut header: Vec<&str> = PMSM_COLUMNS.to_vec();
            if with_matrix {
                header.extend(MATRIX_COLUMNS);
            }
            w.write_record(&header).map_err(csv_err)?;
            for r in records {
                w.write_record(pmsm_row(r, with_matrix)).map_err(csv_err)?;
            }
        }
        Samples::Im(records) => {
            w.write_record(IM_COLUMNS).map_err(csv_err)?;
            for r in records {
                w.write_record(im_row(r)).map_err(csv_err)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

pub fn emit_csv(report: &ObservabilityReport, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &render_csv(report)?)
}

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io {
            path: path.display().to_string(),
            message: "not a file path".into(),
        })?
        .to_string_lossy()
        .into_owned();
    tmp.set_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Human-readable summary and the exit status it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub status: ExitStatus,
}

pub fn emit_summary(report: &ObservabilityReport) -> Summary {
    let stats = report.stats();
    let sc = &report.scenario;
    let mut t = String::new();
    let pct = |n: usize| {
        if stats.samples == 0 {
            0.0
        } else {
            100.0 * n as f64 / stats.samples as f64
        }
    };
    let _ = writeln!(t, "scenario: {}", sc.name);
    let _ = writeln!(t, "tool: {} {}", report.metadata.tool, report.metadata.version);
    let _ = writeln!(t, "seed: {}", report.metadata.seed);
    let _ = writeln!(t, "samples: {}", stats.samples);
    let _ = writeln!(
        t,
        "observable {:.1}% ({} of {})",
        pct(stats.observable),
        stats.observable,
        stats.samples
    );
    match &report.samples {
        Samples::Pmsm(_) => {
            let det = stats.observable_det.unwrap_or(0);
            let _ = writeln!(t, "observable by determinant {:.1}% ({} of {})", pct(det), det, stats.samples);
            let _ = writeln!(t, "min |omega_e - dtheta_O/dt|: {:.6e} rad/s", stats.min_abs_value);
        }
        Samples::Im(_) => {
            let _ = writeln!(t, "min |6-state condition|: {:.6e} Wb^2/s", stats.min_abs_value);
        }
    }
    let _ = writeln!(t, "degenerate samples: {}", stats.degenerate);
    if stats.samples > 0 && stats.degenerate == stats.samples {
        let _ = writeln!(t, "warning: every sample is degenerate");
    }
    if let Some(e) = report.realization_error {
        let _ = writeln!(t, "voltage realisation error: {e:.3e} of peak current");
    }

    let mut status = ExitStatus::Clean;
    match &report.oracle {
        None => {
            let _ = writeln!(t, "oracle off");
        }
        Some(oracle) => {
            if let Some(m) = &oracle.matrix {
                let _ = writeln!(
                    t,
                    "rank agreement: {:.2}% ({} of {})",
                    100.0 * m.fraction(),
                    m.agreeing,
                    m.samples
                );
                if m.ratio_samples > 0 {
                    let _ = writeln!(
                        t,
                        "numeric/closed-form determinant ratio: [{:.9}, {:.9}] over {} samples (spread {:.3e})",
                        m.ratio_min,
                        m.ratio_max,
                        m.ratio_samples,
                        m.ratio_spread()
                    );
                } else {
                    let _ = writeln!(t, "numeric/closed-form determinant ratio: no samples away from the zero set");
                }
            }
            if let Some(g) = &oracle.gramian {
                let _ = writeln!(
                    t,
                    "gramian: window {} s, sigma min/max {:.6e}, condition {:.6e}",
                    g.window,
                    g.ratio(),
                    g.condition_number
                );
                let dir: Vec<String> = g.unobservable_direction.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(t, "gramian weakest direction: [{}]", dir.join(", "));
            }
            match oracle.passed() {
                Some(true) => {
                    let _ = writeln!(t, "oracle PASS");
                }
                Some(false) => {
                    let _ = writeln!(t, "oracle FAIL");
                    status = ExitStatus::OracleFailed;
                }
                None => {
                    let _ = writeln!(t, "oracle gramian only");
                }
            }
        }
    }
    let _ = writeln!(t, "exit: {}", status.code());
    let _ = writeln!(t, "--- scenario ---");
    t.push_str(&sc.to_toml());
    Summary { text: t, status }
}

/// Output file names for a scenario: `<name>.csv` and `<name>.summary.txt`.
pub fn output_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.csv")), dir.join(format!("{name}.summary.txt")))
}
