//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL` line
//! (written straight to stdout so it shows without `--nocapture`); the test
//! fails if any criterion fails.

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drive_observability::machine::{PmsmParams, PmsmState};
use drive_observability::observability::{
    extract_c, legacy_standstill_check, pmsm_determinant, pmsm_determinant_scale, theta_o_rate,
    theta_o_rate_arctan,
};
use drive_observability::oracle::{
    pmsm_observability_matrix, relative_determinant, FdSettings, DEFAULT_RANK_TOLERANCE,
};
use drive_observability::report::{emit_summary, render_csv};
use drive_observability::runner::{run_scenario, sweep_scenario, ObservabilityReport, Samples};
use drive_observability::scenario::{load_scenario, Scenario};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn bundled(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", &format!("{name}.toml")]
        .iter()
        .collect();
    load_scenario(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(name: &str) -> ObservabilityReport {
    run_scenario(&bundled(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn random_params(rng: &mut ChaCha8Rng, surface_mounted: bool) -> PmsmParams {
    let l_d = log_uniform(rng, 1e-3, 1e-1);
    let l_q = if surface_mounted { l_d } else { log_uniform(rng, 1e-3, 1e-1) };
    PmsmParams::new(
        l_d,
        l_q,
        log_uniform(rng, 0.01, 1.0),
        log_uniform(rng, 0.01, 5.0),
        rng.random_range(1..8),
        log_uniform(rng, 1e-4, 1e-1),
    )
    .unwrap()
}

struct Point {
    params: PmsmParams,
    state: PmsmState,
    di_d: f64,
    di_q: f64,
}

/// Operating points with a deliberate share on the unobservable set: speed
/// matched to the phase rate of `Ψ_O`, locked rotor with `Ψ_O` moving radially,
/// and surface-mounted machines at standstill.
fn random_point(rng: &mut ChaCha8Rng, k: usize) -> Point {
    let params = random_params(rng, k.is_multiple_of(10));
    let i_d = rng.random_range(-20.0..20.0);
    let i_q = rng.random_range(-20.0..20.0);
    let mut di_d = rng.random_range(-2e3..2e3);
    let mut di_q = rng.random_range(-2e3..2e3);
    let theta_e = rng.random_range(-3.1..3.1);
    let mut omega_e = rng.random_range(-500.0..500.0);
    match k % 8 {
        0 if params.is_surface_mounted() => omega_e = 0.0,
        0 => {
            let dl = params.delta_l();
            let (psi_d, psi_q) = (dl * i_d + params.K_e, dl * i_q);
            let c = rng.random_range(-2e3..2e3) / psi_d.hypot(psi_q);
            di_d = c * psi_d;
            di_q = c * psi_q;
            omega_e = 0.0;
        }
        2 | 5 => omega_e = theta_o_rate(i_d, i_q, di_d, di_q, &params).unwrap(),
        _ => {}
    }
    Point {
        params,
        state: PmsmState {
            i_d,
            i_q,
            theta_e,
            omega_e,
        },
        di_d,
        di_q,
    }
}

fn closed_form_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let n = 1000;
    let (mut agree, mut zero_set) = (0, 0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let p = random_point(&mut rng, k);
        let s = &p.state;
        let d = pmsm_determinant(s.i_d, s.i_q, p.di_d, p.di_q, s.omega_e, &p.params);
        let scale = pmsm_determinant_scale(s.i_d, s.i_q, p.di_d, p.di_q, s.omega_e, &p.params);
        let rel = relative_determinant(d, scale);
        let m = pmsm_observability_matrix(&p.params, s, p.di_d, p.di_q, FdSettings::default()).unwrap();
        let deficient = m.equilibrated_rank(DEFAULT_RANK_TOLERANCE) < 4;
        let closed_zero = rel < DEFAULT_RANK_TOLERANCE;
        zero_set += usize::from(closed_zero);
        agree += usize::from(deficient == closed_zero);
        if rel > 1e-3 {
            let ratio = m.determinant() / d;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    let fraction = agree as f64 / n as f64;
    let spread = (hi - lo) / (0.5 * (hi + lo)).abs();
    (
        fraction >= 0.999 && spread <= 0.01,
        format!(
            "rank agreement {:.2}% over {n} points ({zero_set} on the zero set), determinant ratio [{lo:.6}, {hi:.6}] spread {spread:.2e}",
            100.0 * fraction
        ),
    )
}

fn formulation_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 20_000;
    let (mut sign_mismatch, mut checked) = (0, 0);
    let mut worst_rate = 0.0f64;
    for _ in 0..n {
        let surface = rng.random_bool(0.1);
        let params = random_params(&mut rng, surface);
        let i_d = rng.random_range(-20.0..20.0);
        let i_q = rng.random_range(-20.0..20.0);
        let di_d = rng.random_range(-2e3..2e3);
        let di_q = rng.random_range(-2e3..2e3);
        let omega_e = rng.random_range(-500.0..500.0);
        let Ok(rate) = theta_o_rate(i_d, i_q, di_d, di_q, &params) else {
            continue;
        };
        checked += 1;
        let d = pmsm_determinant(i_d, i_q, di_d, di_q, omega_e, &params);
        if d.signum() != (omega_e - rate).signum() {
            sign_mismatch += 1;
        }
        if let Ok(arctan) = theta_o_rate_arctan(i_d, i_q, di_d, di_q, &params) {
            let denom = rate.abs().max(arctan.abs()).max(f64::MIN_POSITIVE);
            worst_rate = worst_rate.max((arctan - rate).abs() / denom);
        }
    }
    (
        sign_mismatch == 0 && worst_rate <= 1e-6,
        format!("{sign_mismatch} sign mismatches over {checked} points, worst rate deviation {worst_rate:.2e}"),
    )
}

fn pmsm_records(report: &ObservabilityReport) -> &[drive_observability::runner::PmsmRecord] {
    match &report.samples {
        Samples::Pmsm(r) => r,
        Samples::Im(_) => panic!("expected a PMSM report"),
    }
}

fn counterexample() -> Outcome {
    let counter = run("ipmsm-const-thetao");
    let baseline = run("ipmsm-rotating-baseline");
    let records = pmsm_records(&counter);

    let magnitudes: Vec<f64> = records.iter().map(|r| r.i_d.hypot(r.i_q)).collect();
    let directions: Vec<f64> = records.iter().map(|r| r.i_q.atan2(r.i_d)).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (m_lo, m_hi) = span(&magnitudes);
    let (a_lo, a_hi) = span(&directions);
    let magnitude_ratio = m_hi / m_lo;
    let turn = a_hi - a_lo;

    let unobservable = records.iter().all(|r| !r.observable && !r.observable_det);
    let max_d = records.iter().map(|r| r.determinant.abs()).fold(0.0, f64::max);

    let gramian = |r: &ObservabilityReport| r.oracle.as_ref().and_then(|o| o.gramian.as_ref()).map(|g| g.ratio());
    let (g_counter, g_base) = (gramian(&counter).unwrap(), gramian(&baseline).unwrap());

    let ok = magnitude_ratio >= 2.0 && turn >= 0.5 && unobservable && max_d < 1e-6 && g_counter * 1e3 <= g_base;
    (
        ok,
        format!(
            "|i| x{magnitude_ratio:.2}, direction turns {turn:.3} rad, unobservable on all {} samples (max |D| {max_d:.2e}), gramian ratio {g_counter:.2e} vs baseline {g_base:.2e}",
            records.len()
        ),
    )
}

fn surface_mounted_rule() -> Outcome {
    let mut scenario = bundled("spmsm-running");
    scenario.oracle.enabled = false;
    let eps = scenario.tolerances.eps_rate;
    let mut values: Vec<f64> = (0..=400).map(|k| -200.0 + k as f64).collect();
    values.extend([0.5 * eps, -0.5 * eps, eps, -eps, 2.0 * eps, -2.0 * eps]);
    let points = sweep_scenario(&scenario, "pmsm.mechanics.omega_e", &values).unwrap();
    let wrong: Vec<f64> = points
        .iter()
        .filter(|p| {
            let expected = if p.value.abs() > eps { 1.0 } else { 0.0 };
            p.stats.observable_fraction() != expected
        })
        .map(|p| p.value)
        .collect();
    (
        wrong.is_empty(),
        format!(
            "{} speeds in [-200, 200] rad/s, eps = {eps:e}: {} with the wrong verdict {wrong:?}",
            values.len(),
            wrong.len()
        ),
    )
}

fn im_records(report: &ObservabilityReport) -> &[drive_observability::runner::ImRecord] {
    match &report.samples {
        Samples::Im(r) => r,
        Samples::Pmsm(_) => panic!("expected an IM report"),
    }
}

fn induction_machine_reduction() -> Outcome {
    let steady = run("im-const-speed");
    let worst_steady = im_records(&steady)
        .iter()
        .map(|r| (r.condition_6d.abs() - r.condition_5d.abs()).abs())
        .fold(0.0, f64::max);

    let scenario = bundled("im-accel-ramp");
    let params = scenario.im.as_ref().unwrap().params;
    let xi2 = params.R_r / params.L_r;
    let ramp = run_scenario(&scenario).unwrap();
    let mut worst_term = 0.0f64;
    let mut worst_difference = 0.0f64;
    let mut accelerating = 0;
    for r in im_records(&ramp) {
        let flux_sq = r.psi_r_alpha.powi(2) + r.psi_r_beta.powi(2);
        let accel = xi2 / (r.omega_e.powi(2) + xi2 * xi2) * r.domega_e * flux_sq;
        let cross = r.dpsi_r_alpha * r.psi_r_beta - r.dpsi_r_beta * r.psi_r_alpha;
        let scale = accel.abs() + cross.abs() + f64::MIN_POSITIVE;
        worst_term = worst_term
            .max((r.acceleration_term - accel).abs() / scale)
            .max((r.cross_term - cross).abs() / scale)
            .max((r.condition_5d - cross).abs() / scale);
        worst_difference = worst_difference.max((r.condition_6d + r.condition_5d - accel).abs() / scale);
        accelerating += usize::from(accel.abs() > 1e-6);
    }
    let ok = worst_steady <= 1e-10 && worst_term <= 1e-12 && worst_difference <= 1e-12 && accelerating > 0;
    (
        ok,
        format!(
            "constant speed: max ||6d| - |5d|| {worst_steady:.2e}; ramp: terms within {worst_term:.2e}, 6d + 5d - accel within {worst_difference:.2e} (relative), {accelerating} samples with a nonzero accel term"
        ),
    )
}

fn legacy_boundary() -> Outcome {
    let scenario = bundled("ipmsm-const-thetao");
    let params = scenario.pmsm.as_ref().unwrap().params;
    let report = run_scenario(&scenario).unwrap();
    let currents: Vec<(f64, f64)> = pmsm_records(&report).iter().map(|r| (r.i_d, r.i_q)).collect();
    let c = extract_c(&currents, &params).unwrap();
    let worst = currents
        .iter()
        .map(|&(i_d, i_q)| legacy_standstill_check(i_d, i_q, c.mean, &params, 1e-9).unwrap().value.abs())
        .fold(0.0, f64::max);
    (
        c.max_deviation < 1e-9 && worst < 1e-9 && c.degenerate_count == 0,
        format!(
            "C = {:.12}, max deviation {:.2e}, max |legacy residual| {worst:.2e}",
            c.mean, c.max_deviation
        ),
    )
}

fn column(headers: &csv::StringRecord, name: &str) -> usize {
    headers
        .iter()
        .position(|h| h.split(' ').next() == Some(name))
        .unwrap_or_else(|| panic!("missing column {name}"))
}

/// Re-derive every verdict from the CSV columns and the tolerances echoed in
/// the summary; returns (rows, mismatches).
fn recheck_csv(csv_bytes: &[u8], summary: &str) -> (usize, usize) {
    let echo = summary.split("--- scenario ---\n").nth(1).expect("scenario echo");
    let tol = Scenario::from_toml(echo).unwrap().tolerances;
    let mut reader = csv::Reader::from_reader(csv_bytes);
    let headers = reader.headers().unwrap().clone();
    let f = |row: &csv::StringRecord, name: &str| -> f64 { row[column(&headers, name)].parse().unwrap() };
    let b = |row: &csv::StringRecord, name: &str| -> bool { &row[column(&headers, name)] == "1" };
    let (mut rows, mut bad) = (0, 0);
    let im = headers.iter().any(|h| h.starts_with("condition_6d"));
    for row in reader.records() {
        let row = row.unwrap();
        rows += 1;
        let degenerate = b(&row, "degenerate");
        let ok = if im {
            b(&row, "observable") == (!degenerate && f(&row, "condition_6d").abs() > tol.eps_im)
                && b(&row, "observable_5d") == (f(&row, "condition_5d").abs() > tol.eps_im)
        } else {
            b(&row, "observable") == (!degenerate && f(&row, "rate_margin").abs() > tol.eps_rate)
                && b(&row, "observable_det") == (!degenerate && f(&row, "D").abs() > tol.eps_det)
        };
        bad += usize::from(!ok);
    }
    (rows, bad)
}

fn determinism_and_round_trip() -> Outcome {
    let names = [
        "spmsm-standstill",
        "spmsm-running",
        "ipmsm-const-thetao",
        "ipmsm-rotating-baseline",
        "im-const-speed",
        "im-accel-ramp",
    ];
    let mut failures = Vec::new();
    let mut total_rows = 0;
    for name in names {
        let scenario = bundled(name);
        if Scenario::from_toml(&scenario.to_toml()).unwrap() != scenario {
            failures.push(format!("{name}: scenario round trip"));
        }
        let first = run_scenario(&scenario).unwrap();
        let second = run_scenario(&scenario).unwrap();
        let bytes = render_csv(&first).unwrap();
        if bytes != render_csv(&second).unwrap() {
            failures.push(format!("{name}: CSV differs between runs"));
        }
        let (rows, bad) = recheck_csv(&bytes, &emit_summary(&first).text);
        total_rows += rows;
        if rows != first.samples.len() || bad > 0 {
            failures.push(format!("{name}: {bad} of {rows} rows disagree"));
        }
    }
    (
        failures.is_empty(),
        format!(
            "{} scenarios, {total_rows} rows re-derived, byte-identical reruns{}",
            names.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("closed form vs observability-matrix rank", closed_form_oracle_agreement),
        ("determinant sign vs speed condition", formulation_equivalence),
        ("constant-phase counterexample", counterexample),
        ("surface-mounted machine standstill rule", surface_mounted_rule),
        ("induction machine reduction", induction_machine_reduction),
        ("constant-C standstill boundary", legacy_boundary),
        ("determinism and CSV round trip", determinism_and_round_trip),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        let verdict = if ok { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} criterion {}: {name}: {detail}", k + 1).unwrap();
        if !ok {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
