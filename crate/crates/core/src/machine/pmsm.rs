//! dq-frame PMSM model.
//!
//! Electrical equations:
//!
//! ```text
//! L_d di_d/dt = u_d - R_s i_d + ω_e L_q i_q
//! L_q di_q/dt = u_q - R_s i_q - ω_e (L_d i_d + K_e)
//! ```
//!
//! State vector layout is `[i_d, i_q, θ_e, ω_e]`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::frames::{inverse_park, park, wrap_angle};
use super::integrate::Dynamics;
use super::params::PmsmParams;
use crate::error::{ensure_finite, Error, Result};

pub const PMSM_STATE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PmsmState {
    pub i_d: f64,
    pub i_q: f64,
    pub theta_e: f64,
    pub omega_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmDerivative {
    pub di_d: f64,
    pub di_q: f64,
    pub dtheta_e: f64,
    pub domega_e: f64,
}

impl PmsmState {
    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.i_d, self.i_q, self.theta_e, self.omega_e])
    }

    /// Reads a state vector; the angle is wrapped to `[-π, π)`.
    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self {
            i_d: x[0],
            i_q: x[1],
            theta_e: wrap_angle(x[2]),
            omega_e: x[3],
        }
    }
}

impl PmsmDerivative {
    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.di_d, self.di_q, self.dtheta_e, self.domega_e])
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self {
            di_d: x[0],
            di_q: x[1],
            dtheta_e: x[2],
            domega_e: x[3],
        }
    }
}

/// Rotor mechanics attached to the electrical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanics {
    /// Speed held by an external drive or a lock: `dω_e/dt = 0`, `dθ_e/dt = ω_e`.
    /// With `ω_e = 0` this is the locked rotor.
    HeldSpeed,
    /// `dω_e/dt = p (T_em - T_L) / J` with constant load torque.
    Free { load_torque: f64 },
}

pub fn pmsm_derivative(
    state: &PmsmState,
    u_d: f64,
    u_q: f64,
    params: &PmsmParams,
    mechanics: Mechanics,
) -> Result<PmsmDerivative> {
    ensure_finite("PMSM state", &[state.i_d, state.i_q, state.theta_e, state.omega_e])?;
    ensure_finite("PMSM input", &[u_d, u_q])?;
    let PmsmState {
        i_d, i_q, omega_e, ..
    } = *state;
    let di_d = (u_d - params.R_s * i_d + omega_e * params.L_q * i_q) / params.L_d;
    let di_q = (u_q - params.R_s * i_q - omega_e * (params.L_d * i_d + params.K_e)) / params.L_q;
    let domega_e = match mechanics {
        Mechanics::HeldSpeed => 0.0,
        Mechanics::Free { load_torque } => {
            ensure_finite("load torque", &[load_torque])?;
            params.p as f64 * (params.torque(i_d, i_q) - load_torque) / params.J
        }
    };
    Ok(PmsmDerivative {
        di_d,
        di_q,
        dtheta_e: omega_e,
        domega_e,
    })
}

/// PMSM driven by rotor-frame voltages `[u_d, u_q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmsmModel {
    pub params: PmsmParams,
    pub mechanics: Mechanics,
}

impl PmsmModel {
    pub fn new(params: PmsmParams, mechanics: Mechanics) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, mechanics })
    }

    pub fn stator_fed(self) -> StatorFedPmsm {
        StatorFedPmsm { model: self }
    }

    /// Stored magnetic plus kinetic energy, consistent with the 3/2 torque scaling.
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        let p = &self.params;
        let omega_m = x[3] / p.p as f64;
        0.75 * (p.L_d * x[0] * x[0] + p.L_q * x[1] * x[1]) + 0.5 * p.J * omega_m * omega_m
    }
}

impl Dynamics for PmsmModel {
    fn state_dim(&self) -> usize {
        PMSM_STATE_DIM
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims(x, u)?;
        let state = PmsmState {
            i_d: x[0],
            i_q: x[1],
            theta_e: x[2],
            omega_e: x[3],
        };
        Ok(pmsm_derivative(&state, u[0], u[1], &self.params, self.mechanics)?.to_vector())
    }
}

/// PMSM driven by stationary-frame voltages `[u_α, u_β]`; the rotor angle
/// enters through the Park transform, as it does for a sensorless drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatorFedPmsm {
    pub model: PmsmModel,
}

impl Dynamics for StatorFedPmsm {
    fn state_dim(&self) -> usize {
        PMSM_STATE_DIM
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims(x, u)?;
        let (u_d, u_q) = park(u[0], u[1], x[2]);
        self.model
            .derivative(x, &DVector::from_vec(vec![u_d, u_q]))
    }
}

/// Measured output of a sensorless drive: stator currents in the αβ frame.
pub fn stator_currents(x: &DVector<f64>) -> DVector<f64> {
    let (a, b) = inverse_park(x[0], x[1], x[2]);
    DVector::from_vec(vec![a, b])
}

fn check_dims(x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    if x.len() != PMSM_STATE_DIM {
        return Err(Error::DimensionMismatch {
            what: "PMSM state",
            expected: PMSM_STATE_DIM,
            actual: x.len(),
        });
    }
    if u.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "PMSM input",
            expected: 2,
            actual: u.len(),
        });
    }
    Ok(())
}
