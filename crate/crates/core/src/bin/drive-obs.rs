use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drive_observability::report::{emit_csv, emit_summary, format_value, output_paths, write_atomic, ExitStatus};
use drive_observability::runner::{run_scenario, sweep_scenario, sweep_values};
use drive_observability::scenario::{load_scenario, Scenario};
use drive_observability::{Error, Result};

/// Default output directory when neither `--out` nor the scenario sets one.
const OUT_DIR_ENV: &str = "DRIVE_OBS_OUT";

#[derive(Parser)]
#[command(name = "drive-obs", version, about = "Observability analysis of sensorless PMSM and induction-machine drives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write <name>.csv and <name>.summary.txt.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Enable the numeric oracle (observability matrix and Gramian).
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a scenario, then print it with all defaults filled in.
    Validate { scenario: PathBuf },
    /// Re-run a scenario over a range of one parameter, e.g. `--param pmsm.mechanics.omega_e --range -200:200:401`.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        /// `START:END:COUNT`, inclusive.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            oracle,
            seed,
        } => run(&scenario, out, oracle, seed),
        Command::Validate { scenario } => load_scenario(&scenario).map(|s| {
            print!("{}", s.to_toml());
            ExitStatus::Clean
        }),
        Command::Sweep {
            scenario,
            param,
            range,
            out,
            oracle,
        } => sweep(&scenario, &param, &range, out, oracle),
    };
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::for_error(&e).code() as u8)
        }
    }
}

fn output_dir(flag: Option<PathBuf>, scenario: &Scenario) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| scenario.output.directory.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(dir)
}

fn run(path: &Path, out: Option<PathBuf>, oracle: bool, seed: Option<u64>) -> Result<ExitStatus> {
    let mut scenario = load_scenario(path)?;
    scenario.oracle.enabled |= oracle;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let dir = output_dir(out, &scenario)?;
    let report = run_scenario(&scenario)?;
    let (csv_path, summary_path) = output_paths(&dir, &scenario.name);
    emit_csv(&report, &csv_path)?;
    let summary = emit_summary(&report);
    write_atomic(&summary_path, summary.text.as_bytes())?;
    print!("{}", summary.text);
    Ok(summary.status)
}

fn parse_range(range: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::InvalidParameter {
        name: "range",
        reason: format!("expected START:END:COUNT, got `{range}`"),
    };
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
        n.trim().parse().map_err(|_| bad())?,
    ))
}

fn sweep(path: &Path, param: &str, range: &str, out: Option<PathBuf>, oracle: bool) -> Result<ExitStatus> {
    let mut scenario = load_scenario(path)?;
    scenario.oracle.enabled |= oracle;
    let (start, end, count) = parse_range(range)?;
    let values = sweep_values(start, end, count)?;
    let points = sweep_scenario(&scenario, param, &values)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record([
        param,
        "samples [-]",
        "observable [-]",
        "observable_fraction [-]",
        "degenerate [-]",
        "min_abs_value [cond]",
        "oracle [-]",
    ])
    .map_err(io)?;
    let mut status = ExitStatus::Clean;
    for p in &points {
        let oracle = match p.oracle_passed {
            Some(true) => "PASS",
            Some(false) => {
                status = ExitStatus::OracleFailed;
                "FAIL"
            }
            None => "",
        };
        w.write_record([
            format_value(p.value),
            p.stats.samples.to_string(),
            p.stats.observable.to_string(),
            format_value(p.stats.observable_fraction()),
            p.stats.degenerate.to_string(),
            format_value(p.stats.min_abs_value),
            oracle.to_string(),
        ])
        .map_err(io)?;
        println!(
            "{param} = {}: observable {:.1}%{}",
            format_value(p.value),
            100.0 * p.stats.observable_fraction(),
            if oracle.is_empty() { String::new() } else { format!(", oracle {oracle}") }
        );
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    let dir = output_dir(out, &scenario)?;
    write_atomic(&dir.join(format!("{}.sweep.csv", scenario.name)), &bytes)?;
    Ok(status)
}
