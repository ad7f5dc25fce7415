//! Scenario execution: per-sample condition records, optional oracle checks
//! and parameter sweeps.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lab::{realize_voltages, CurrentProfile, Excitation};
use crate::machine::{
    im_stator_currents, integrate, stator_currents, ImModel, ImState, PmsmParams, PmsmState, Trajectory,
};
use crate::observability::{
    im_condition_5d, im_condition_terms, observability_vector, pmsm_determinant,
    pmsm_determinant_scale, theta_o_rate,
};
use crate::oracle::{
    empirical_gramian, pmsm_observability_matrix, relative_determinant, FdSettings, GramianSummary,
};
use crate::scenario::{ImSetup, MachineKind, OracleSettings, PmsmSetup, Scenario, Tolerances};

/// Fraction of samples on which the matrix rank and the closed form must agree.
pub const REQUIRED_AGREEMENT: f64 = 0.999;
/// Largest relative spread of `numeric det / D` accepted away from the zero set.
pub const RATIO_SPREAD: f64 = 0.01;
/// Samples whose scale-free determinant is below this are too close to the
/// zero set for a meaningful ratio.
pub const RATIO_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
}

impl RunMetadata {
    fn new(seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
        }
    }
}

/// One PMSM sample. Rates are those of the prescribed current trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmsmRecord {
    pub time: f64,
    pub i_d: f64,
    pub i_q: f64,
    /// Wrapped to `[-π, π)`.
    pub theta_e: f64,
    pub omega_e: f64,
    pub di_d: f64,
    pub di_q: f64,
    pub u_d: f64,
    pub u_q: f64,
    pub determinant: f64,
    pub psi_od: f64,
    pub psi_oq: f64,
    pub theta_o: f64,
    /// NaN where `Ψ_O` vanishes.
    pub theta_o_rate: f64,
    /// `ω_e − dθ_O/dt`; NaN where `Ψ_O` vanishes.
    pub rate_margin: f64,
    /// `|ω_e − dθ_O/dt| > eps_rate` and not degenerate.
    pub observable: bool,
    /// `|D| > eps_det` and not degenerate.
    pub observable_det: bool,
    pub degenerate: bool,
    pub matrix: Option<MatrixCheck>,
}

/// Reconstructed observability matrix at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixCheck {
    pub numeric_det: f64,
    pub numeric_rank: usize,
    /// `|T₁ + T₂| / (|T₁| + |T₂|)` of the closed-form determinant terms.
    pub relative_det: f64,
    pub agrees: bool,
}

/// One induction-machine sample; derivatives are the model's at the stored state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImRecord {
    pub time: f64,
    pub i_s_alpha: f64,
    pub i_s_beta: f64,
    pub psi_r_alpha: f64,
    pub psi_r_beta: f64,
    pub omega_e: f64,
    pub load_torque: f64,
    pub dpsi_r_alpha: f64,
    pub dpsi_r_beta: f64,
    pub domega_e: f64,
    pub u_s_alpha: f64,
    pub u_s_beta: f64,
    pub acceleration_term: f64,
    pub cross_term: f64,
    /// NaN when degenerate.
    pub condition_6d: f64,
    pub condition_5d: f64,
    pub observable: bool,
    pub observable_5d: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Samples {
    Pmsm(Vec<PmsmRecord>),
    Im(Vec<ImRecord>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Pmsm(r) => r.len(),
            Samples::Im(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixAgreement {
    pub samples: usize,
    pub agreeing: usize,
    /// Samples used for the ratio check (away from the zero set).
    pub ratio_samples: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl MatrixAgreement {
    pub fn fraction(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.samples as f64
        }
    }

    /// `(max − min) / max(|min|, |max|)`; zero with fewer than two samples.
    pub fn ratio_spread(&self) -> f64 {
        if self.ratio_samples < 2 {
            return 0.0;
        }
        (self.ratio_max - self.ratio_min) / self.ratio_min.abs().max(self.ratio_max.abs())
    }

    pub fn passed(&self) -> bool {
        self.fraction() >= REQUIRED_AGREEMENT && self.ratio_spread() <= RATIO_SPREAD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub matrix: Option<MatrixAgreement>,
    pub gramian: Option<GramianSummary>,
}

impl OracleReport {
    /// `None` when there is nothing to cross-check (induction machine runs).
    pub fn passed(&self) -> Option<bool> {
        self.matrix.map(|m| m.passed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub scenario: Scenario,
    pub metadata: RunMetadata,
    pub samples: Samples,
    /// Prescribed vs open-loop simulated current error relative to the peak (PMSM).
    pub realization_error: Option<f64>,
    pub oracle: Option<OracleReport>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ObservabilityReport> {
    scenario.validate()?;
    let (samples, realization_error, oracle) = match scenario.machine {
        MachineKind::Pmsm => {
            let setup = scenario.pmsm.as_ref().expect("validated");
            run_pmsm(scenario, setup)?
        }
        MachineKind::Im => {
            let setup = scenario.im.as_ref().expect("validated");
            run_im(scenario, setup)?
        }
    };
    Ok(ObservabilityReport {
        scenario: scenario.clone(),
        metadata: RunMetadata::new(scenario.seed),
        samples,
        realization_error,
        oracle,
    })
}

type Run = (Samples, Option<f64>, Option<OracleReport>);

fn run_pmsm(scenario: &Scenario, setup: &PmsmSetup) -> Result<Run> {
    let params = setup.params;
    let n = scenario.n_steps();
    let profile = CurrentProfile::from_spec(&setup.profile, &params, scenario.duration)?;
    let excitation = realize_voltages(&profile, &params, setup.mechanics)?;
    let trajectory = excitation.simulate(scenario.dt, n)?;
    let realization_error = excitation.tracking_error(&trajectory);

    let mut records: Vec<PmsmRecord> = excitation
        .samples(scenario.dt, n)
        .iter()
        .map(|s| {
            let c = s.currents;
            let state = PmsmState {
                i_d: c.i_d,
                i_q: c.i_q,
                theta_e: s.theta_e,
                omega_e: s.omega_e,
            };
            pmsm_record(s.time, &state, c.di_d, c.di_q, (s.u_d, s.u_q), &params, &scenario.tolerances)
        })
        .collect();

    let oracle = if scenario.oracle.enabled {
        let agreement = check_matrices(&params, &params, &mut records, &scenario.oracle)?;
        let gramian = pmsm_gramian(&excitation, scenario)?;
        Some(OracleReport {
            matrix: Some(agreement),
            gramian,
        })
    } else {
        None
    };
    Ok((Samples::Pmsm(records), Some(realization_error), oracle))
}

/// Closed-form quantities and verdicts at one PMSM operating point.
pub fn pmsm_record(
    time: f64,
    state: &PmsmState,
    di_d: f64,
    di_q: f64,
    voltages: (f64, f64),
    params: &PmsmParams,
    tolerances: &Tolerances,
) -> PmsmRecord {
    let (i_d, i_q, omega_e) = (state.i_d, state.i_q, state.omega_e);
    let determinant = pmsm_determinant(i_d, i_q, di_d, di_q, omega_e, params);
    let psi = observability_vector(i_d, i_q, params);
    let (rate, degenerate) = match theta_o_rate(i_d, i_q, di_d, di_q, params) {
        Ok(r) => (r, false),
        Err(_) => (f64::NAN, true),
    };
    let rate_margin = omega_e - rate;
    PmsmRecord {
        time,
        i_d,
        i_q,
        theta_e: crate::machine::frames::wrap_angle(state.theta_e),
        omega_e,
        di_d,
        di_q,
        u_d: voltages.0,
        u_q: voltages.1,
        determinant,
        psi_od: psi.psi_d,
        psi_oq: psi.psi_q,
        theta_o: psi.theta_o,
        theta_o_rate: rate,
        rate_margin,
        observable: !degenerate && rate_margin.abs() > tolerances.eps_rate,
        observable_det: !degenerate && determinant.abs() > tolerances.eps_det,
        degenerate,
        matrix: None,
    }
}

/// Rebuild the observability matrix at every record with `numeric` parameters
/// and compare its rank with the closed-form zero set computed from
/// `closed_form` parameters. The two differ only when a fault is injected.
pub fn check_matrices(
    closed_form: &PmsmParams,
    numeric: &PmsmParams,
    records: &mut [PmsmRecord],
    settings: &OracleSettings,
) -> Result<MatrixAgreement> {
    let fd: FdSettings = settings.fd();
    let tol = settings.rank_tolerance;
    let checks: Vec<(MatrixCheck, f64)> = records
        .par_iter()
        .map(|r| {
            let state = PmsmState {
                i_d: r.i_d,
                i_q: r.i_q,
                theta_e: r.theta_e,
                omega_e: r.omega_e,
            };
            let m = pmsm_observability_matrix(numeric, &state, r.di_d, r.di_q, fd)?;
            let numeric_det = m.determinant();
            let numeric_rank = m.equilibrated_rank(tol);
            let det = pmsm_determinant(r.i_d, r.i_q, r.di_d, r.di_q, r.omega_e, closed_form);
            let scale = pmsm_determinant_scale(r.i_d, r.i_q, r.di_d, r.di_q, r.omega_e, closed_form);
            let relative_det = relative_determinant(det, scale);
            let agrees = (relative_det < tol) == (numeric_rank < 4);
            let ratio = if relative_det > RATIO_MARGIN {
                numeric_det / det
            } else {
                f64::NAN
            };
            Ok((
                MatrixCheck {
                    numeric_det,
                    numeric_rank,
                    relative_det,
                    agrees,
                },
                ratio,
            ))
        })
        .collect::<Result<_>>()?;

    let mut agreement = MatrixAgreement {
        samples: records.len(),
        agreeing: 0,
        ratio_samples: 0,
        ratio_min: f64::INFINITY,
        ratio_max: f64::NEG_INFINITY,
    };
    for (record, (check, ratio)) in records.iter_mut().zip(checks) {
        agreement.agreeing += usize::from(check.agrees);
        if ratio.is_finite() {
            agreement.ratio_samples += 1;
            agreement.ratio_min = agreement.ratio_min.min(ratio);
            agreement.ratio_max = agreement.ratio_max.max(ratio);
        }
        record.matrix = Some(check);
    }
    if agreement.ratio_samples == 0 {
        agreement.ratio_min = f64::NAN;
        agreement.ratio_max = f64::NAN;
    }
    Ok(agreement)
}

/// Empirical Gramian of the stator-fed machine over the start of the run,
/// driven by the realised stationary-frame voltages.
pub fn pmsm_gramian(excitation: &Excitation, scenario: &Scenario) -> Result<Option<GramianSummary>> {
    let Some(settings) = gramian_window(scenario) else {
        return Ok(None);
    };
    let model = excitation.model().stator_fed();
    let input = |t: f64| {
        let (a, b) = excitation.voltages_stator(t);
        DVector::from_vec(vec![a, b])
    };
    let x0 = excitation.initial_state().to_vector();
    empirical_gramian(&model, stator_currents, &x0, input, scenario.dt, &settings).map(Some)
}

fn gramian_window(scenario: &Scenario) -> Option<crate::oracle::GramianSettings> {
    let mut settings = scenario.oracle.gramian;
    settings.window = settings.window.min(scenario.duration);
    (settings.window >= scenario.dt).then_some(settings)
}

fn run_im(scenario: &Scenario, setup: &ImSetup) -> Result<Run> {
    let model = ImModel::new(setup.params, setup.mechanics);
    let supply = setup.supply;
    let input = |t: f64| {
        let (a, b) = supply.voltage(t);
        DVector::from_vec(vec![a, b])
    };
    let x0 = setup.initial.to_vector();
    let n = scenario.n_steps();
    let trajectory = if n == 0 {
        Trajectory::single(&model, x0.clone(), input, scenario.dt)?
    } else {
        integrate(&model, x0.clone(), input, scenario.dt, n)?
    };
    let eps = scenario.tolerances.eps_im;
    let records = trajectory
        .samples
        .iter()
        .map(|s| {
            let x = ImState::from_vector(&s.state);
            let dx = ImState::from_vector(&s.derivative);
            let psi = x.flux();
            let dpsi = dx.flux();
            let five = im_condition_5d(psi, dpsi, eps);
            let (acceleration_term, cross_term, condition_6d, observable, degenerate) =
                match im_condition_terms(psi, dpsi, x.omega_e, dx.omega_e, &setup.params) {
                    Ok(t) => {
                        let v = t.value();
                        (t.acceleration_term, t.cross_term, v, v.abs() > eps, false)
                    }
                    Err(_) => (f64::NAN, five.value, f64::NAN, false, true),
                };
            ImRecord {
                time: s.time,
                i_s_alpha: x.i_s_alpha,
                i_s_beta: x.i_s_beta,
                psi_r_alpha: x.psi_r_alpha,
                psi_r_beta: x.psi_r_beta,
                omega_e: x.omega_e,
                load_torque: x.load_torque,
                dpsi_r_alpha: dx.psi_r_alpha,
                dpsi_r_beta: dx.psi_r_beta,
                domega_e: dx.omega_e,
                u_s_alpha: s.input[0],
                u_s_beta: s.input[1],
                acceleration_term,
                cross_term,
                condition_6d,
                condition_5d: five.value,
                observable,
                observable_5d: five.observable,
                degenerate,
            }
        })
        .collect();

    let oracle = if scenario.oracle.enabled {
        let gramian = match gramian_window(scenario) {
            Some(settings) => Some(empirical_gramian(&model, im_stator_currents, &x0, input, scenario.dt, &settings)?),
            None => None,
        };
        Some(OracleReport { matrix: None, gramian })
    } else {
        None
    };
    Ok((Samples::Im(records), None, oracle))
}

/// Aggregate figures of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub samples: usize,
    pub observable: usize,
    pub degenerate: usize,
    /// Smallest `|condition value|` over non-degenerate samples.
    pub min_abs_value: f64,
    /// PMSM only: samples with `|D| > eps_det`.
    pub observable_det: Option<usize>,
}

impl RunStats {
    pub fn observable_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.observable as f64 / self.samples as f64
        }
    }
}

impl ObservabilityReport {
    pub fn stats(&self) -> RunStats {
        let min_abs = |vals: &mut dyn Iterator<Item = f64>| vals.map(f64::abs).fold(f64::INFINITY, f64::min);
        match &self.samples {
            Samples::Pmsm(r) => RunStats {
                samples: r.len(),
                observable: r.iter().filter(|s| s.observable).count(),
                degenerate: r.iter().filter(|s| s.degenerate).count(),
                min_abs_value: min_abs(&mut r.iter().filter(|s| !s.degenerate).map(|s| s.rate_margin)),
                observable_det: Some(r.iter().filter(|s| s.observable_det).count()),
            },
            Samples::Im(r) => RunStats {
                samples: r.len(),
                observable: r.iter().filter(|s| s.observable).count(),
                degenerate: r.iter().filter(|s| s.degenerate).count(),
                min_abs_value: min_abs(&mut r.iter().filter(|s| !s.degenerate).map(|s| s.condition_6d)),
                observable_det: None,
            },
        }
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: RunStats,
    pub oracle_passed: Option<bool>,
}

/// `count` evenly spaced values from `start` to `end` inclusive.
pub fn sweep_values(start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "range",
            reason: "expected finite bounds and at least one point".into(),
        });
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (end - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k == count - 1 { end } else { start + step * k as f64 })
        .collect())
}

/// Re-run `scenario` with the dotted key `param` (for example
/// `pmsm.mechanics.omega_e`) set to each value, in parallel.
pub fn sweep_scenario(scenario: &Scenario, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let base: toml::Table = toml::from_str(&scenario.to_toml()).expect("scenario echo is valid TOML");
    values
        .par_iter()
        .map(|&value| {
            let variant = with_parameter(&base, param, value)?;
            let report = run_scenario(&variant)?;
            Ok(SweepPoint {
                value,
                stats: report.stats(),
                oracle_passed: report.oracle.as_ref().and_then(|o| o.passed()),
            })
        })
        .collect()
}

/// Copy of the scenario with one dotted key replaced. Missing keys inside
/// existing tables are created; integer keys stay integers.
pub fn with_parameter(base: &toml::Table, param: &str, value: f64) -> Result<Scenario> {
    let mut table = base.clone();
    let mut keys: Vec<&str> = param.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| bad_param(param))?;
    let mut cursor = &mut table;
    for key in keys {
        cursor = cursor
            .get_mut(key)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| bad_param(param))?;
    }
    let new = match cursor.get(last) {
        Some(toml::Value::Integer(_)) => {
            if value.fract() != 0.0 {
                return Err(Error::Scenario(format!("`{param}` is an integer, got {value}")));
            }
            toml::Value::Integer(value as i64)
        }
        Some(toml::Value::Float(_)) | None => toml::Value::Float(value),
        Some(_) => return Err(bad_param(param)),
    };
    cursor.insert(last.to_string(), new);
    Scenario::from_toml(&toml::to_string(&table).expect("table serialises"))
}

fn bad_param(param: &str) -> Error {
    Error::Scenario(format!("`{param}` does not name a numeric scenario key"))
}
