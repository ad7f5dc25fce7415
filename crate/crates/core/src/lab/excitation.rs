use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::profile::{CurrentProfile, CurrentSample};
use super::scalar::hermite_segment;
use crate::error::{Error, Result};
use crate::machine::frames::inverse_park;
use crate::machine::{integrate, Mechanics, PmsmModel, PmsmParams, PmsmState, Trajectory};

/// How the rotor moves while the prescribed currents are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MechanicalMode {
    /// `ω_e ≡ 0`, `θ_e` fixed.
    LockedRotor {
        #[serde(default)]
        theta_e: f64,
    },
    /// Speed held at `omega_e` by an external drive.
    ConstantSpeed {
        omega_e: f64,
        #[serde(default)]
        theta_e: f64,
    },
    /// Rotor accelerates under the electromagnetic torque against a constant load.
    Free {
        #[serde(default)]
        omega_e: f64,
        #[serde(default)]
        theta_e: f64,
        #[serde(default)]
        load_torque: f64,
    },
}

impl Default for MechanicalMode {
    fn default() -> Self {
        MechanicalMode::LockedRotor { theta_e: 0.0 }
    }
}

impl MechanicalMode {
    pub fn mechanics(&self) -> Mechanics {
        match *self {
            MechanicalMode::LockedRotor { .. } | MechanicalMode::ConstantSpeed { .. } => Mechanics::HeldSpeed,
            MechanicalMode::Free { load_torque, .. } => Mechanics::Free { load_torque },
        }
    }

    pub fn initial_angle(&self) -> f64 {
        match *self {
            MechanicalMode::LockedRotor { theta_e }
            | MechanicalMode::ConstantSpeed { theta_e, .. }
            | MechanicalMode::Free { theta_e, .. } => theta_e,
        }
    }

    pub fn initial_speed(&self) -> f64 {
        match *self {
            MechanicalMode::LockedRotor { .. } => 0.0,
            MechanicalMode::ConstantSpeed { omega_e, .. } | MechanicalMode::Free { omega_e, .. } => omega_e,
        }
    }
}

/// Stator voltages that produce the given current rates:
///
/// ```text
/// u_d = L_d di_d/dt + R_s i_d - ω_e L_q i_q
/// u_q = L_q di_q/dt + R_s i_q + ω_e (L_d i_d + K_e)
/// ```
pub fn pmsm_voltages(params: &PmsmParams, i_d: f64, i_q: f64, di_d: f64, di_q: f64, omega_e: f64) -> (f64, f64) {
    let u_d = params.L_d * di_d + params.R_s * i_d - omega_e * params.L_q * i_q;
    let u_q = params.L_q * di_q + params.R_s * i_q + omega_e * (params.L_d * i_d + params.K_e);
    (u_d, u_q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSample {
    pub time: f64,
    pub currents: CurrentSample,
    pub omega_e: f64,
    pub theta_e: f64,
    pub u_d: f64,
    pub u_q: f64,
}

/// Planned rotor motion for a free rotor, tabulated on a fine grid and
/// interpolated with cubic Hermite segments.
#[derive(Debug, Clone, PartialEq)]
struct SpeedPlan {
    step: f64,
    omega: Vec<f64>,
    accel: Vec<f64>,
    theta: Vec<f64>,
}

const PLAN_STEPS: usize = 20_000;

impl SpeedPlan {
    fn build(profile: &CurrentProfile, params: &PmsmParams, omega0: f64, theta0: f64, load_torque: f64) -> Self {
        let accel = |t: f64| {
            let c = profile.eval(t);
            params.p as f64 * (params.torque(c.i_d, c.i_q) - load_torque) / params.J
        };
        let n = PLAN_STEPS;
        let step = (profile.duration / n as f64).max(f64::MIN_POSITIVE);
        let mut omega = Vec::with_capacity(n + 1);
        let mut acc = Vec::with_capacity(n + 1);
        let mut theta = Vec::with_capacity(n + 1);
        omega.push(omega0);
        acc.push(accel(0.0));
        theta.push(theta0);
        for k in 0..n {
            let t = k as f64 * step;
            let a_mid = accel(t + 0.5 * step);
            let a_end = accel(t + step);
            let w0 = omega[k];
            let w1 = w0 + step / 6.0 * (acc[k] + 4.0 * a_mid + a_end);
            let (w_mid, _) = hermite_segment(t, t + step, w0, w1, acc[k], a_end, t + 0.5 * step);
            theta.push(theta[k] + step / 6.0 * (w0 + 4.0 * w_mid + w1));
            omega.push(w1);
            acc.push(a_end);
        }
        Self {
            step,
            omega,
            accel: acc,
            theta,
        }
    }

    fn at(&self, t: f64) -> (f64, f64, f64) {
        let last = self.omega.len() - 1;
        let k = ((t / self.step).floor().max(0.0) as usize).min(last.saturating_sub(1));
        let (t0, t1) = (k as f64 * self.step, (k + 1) as f64 * self.step);
        let (w, a) = hermite_segment(t0, t1, self.omega[k], self.omega[k + 1], self.accel[k], self.accel[k + 1], t);
        let (th, _) = hermite_segment(t0, t1, self.theta[k], self.theta[k + 1], self.omega[k], self.omega[k + 1], t);
        (w, a, th)
    }
}

/// Prescribed currents together with the open-loop voltages that realise them.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation {
    pub profile: CurrentProfile,
    pub params: PmsmParams,
    pub mode: MechanicalMode,
    plan: Option<SpeedPlan>,
}

/// Invert the electrical equations along the profile.
pub fn realize_voltages(profile: &CurrentProfile, params: &PmsmParams, mode: MechanicalMode) -> Result<Excitation> {
    params.validate()?;
    let plan = match mode {
        MechanicalMode::Free {
            omega_e,
            theta_e,
            load_torque,
        } if profile.duration > 0.0 => Some(SpeedPlan::build(profile, params, omega_e, theta_e, load_torque)),
        _ => None,
    };
    let exc = Excitation {
        profile: profile.clone(),
        params: *params,
        mode,
        plan,
    };
    let (u_d, u_q) = exc.voltages_dq(0.0);
    if !(u_d.is_finite() && u_q.is_finite()) {
        return Err(Error::NonFinite("realised voltage"));
    }
    Ok(exc)
}

impl Excitation {
    pub fn currents(&self, t: f64) -> CurrentSample {
        self.profile.eval(t)
    }

    /// `(ω_e, θ_e)` of the planned rotor motion.
    pub fn rotor(&self, t: f64) -> (f64, f64) {
        match (&self.plan, self.mode) {
            (Some(plan), _) => {
                let (w, _, th) = plan.at(t);
                (w, th)
            }
            (None, MechanicalMode::ConstantSpeed { omega_e, theta_e }) => (omega_e, theta_e + omega_e * t),
            (None, mode) => (mode.initial_speed(), mode.initial_angle()),
        }
    }

    pub fn voltages_dq(&self, t: f64) -> (f64, f64) {
        let c = self.currents(t);
        let (omega, _) = self.rotor(t);
        pmsm_voltages(&self.params, c.i_d, c.i_q, c.di_d, c.di_q, omega)
    }

    /// Same voltages expressed in the stationary frame along the planned angle.
    pub fn voltages_stator(&self, t: f64) -> (f64, f64) {
        let (u_d, u_q) = self.voltages_dq(t);
        let (_, theta) = self.rotor(t);
        inverse_park(u_d, u_q, theta)
    }

    pub fn initial_state(&self) -> PmsmState {
        let c = self.currents(0.0);
        PmsmState {
            i_d: c.i_d,
            i_q: c.i_q,
            theta_e: self.mode.initial_angle(),
            omega_e: self.mode.initial_speed(),
        }
    }

    pub fn model(&self) -> PmsmModel {
        PmsmModel {
            params: self.params,
            mechanics: self.mode.mechanics(),
        }
    }

    pub fn samples(&self, dt: f64, n_steps: usize) -> Vec<ExcitationSample> {
        (0..=n_steps)
            .map(|k| {
                let t = k as f64 * dt;
                let (omega_e, theta_e) = self.rotor(t);
                let (u_d, u_q) = self.voltages_dq(t);
                ExcitationSample {
                    time: t,
                    currents: self.currents(t),
                    omega_e,
                    theta_e,
                    u_d,
                    u_q,
                }
            })
            .collect()
    }

    /// Open-loop simulation with the realised rotor-frame voltages.
    pub fn simulate(&self, dt: f64, n_steps: usize) -> Result<Trajectory> {
        let model = self.model();
        let input = |t: f64| {
            let (u_d, u_q) = self.voltages_dq(t);
            DVector::from_vec(vec![u_d, u_q])
        };
        if n_steps == 0 {
            return Trajectory::single(&model, self.initial_state().to_vector(), input, dt);
        }
        integrate(&model, self.initial_state().to_vector(), input, dt, n_steps)
    }

    /// Largest prescribed-vs-simulated current error relative to the peak current.
    pub fn tracking_error(&self, trajectory: &Trajectory) -> f64 {
        let mut peak: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for s in &trajectory.samples {
            let c = self.currents(s.time);
            peak = peak.max(c.magnitude());
            worst = worst.max((s.state[0] - c.i_d).hypot(s.state[1] - c.i_q));
        }
        if peak > 0.0 {
            worst / peak
        } else {
            worst
        }
    }
}
