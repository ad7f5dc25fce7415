//! Stationary-frame induction machine with load torque as a sixth state.
//!
//! State vector layout is `[i_sα, i_sβ, Ψ_rα, Ψ_rβ, ω_e, T_L]`:
//!
//! ```text
//! dΨ_r/dt = -ξ₂ Ψ_r + ω_e J Ψ_r + ξ₂ L_m i_s
//! σ L_s di_s/dt = u_s - R_s i_s - (L_m / L_r) dΨ_r/dt
//! dω_e/dt = p (T_em - T_L) / J_m,   dT_L/dt = 0
//! ```
//!
//! where `J` rotates by +90° and `T_em = 3p/2 · (L_m/L_r) · (Ψ_rα i_sβ - Ψ_rβ i_sα)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::integrate::Dynamics;
use super::params::ImParams;
use crate::error::{ensure_finite, Error, Result};

pub const IM_STATE_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImState {
    pub i_s_alpha: f64,
    pub i_s_beta: f64,
    pub psi_r_alpha: f64,
    pub psi_r_beta: f64,
    pub omega_e: f64,
    pub load_torque: f64,
}

impl ImState {
    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.i_s_alpha,
            self.i_s_beta,
            self.psi_r_alpha,
            self.psi_r_beta,
            self.omega_e,
            self.load_torque,
        ])
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self {
            i_s_alpha: x[0],
            i_s_beta: x[1],
            psi_r_alpha: x[2],
            psi_r_beta: x[3],
            omega_e: x[4],
            load_torque: x[5],
        }
    }

    pub fn flux(&self) -> (f64, f64) {
        (self.psi_r_alpha, self.psi_r_beta)
    }
}

/// How the rotor speed evolves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ImMechanics {
    /// Full mechanical equation with the load torque state.
    #[default]
    Free,
    /// Speed held constant by an external drive.
    ConstantSpeed,
    /// Speed ramps at a prescribed rate \[rad/s²\].
    SpeedRamp { acceleration: f64 },
}

pub fn im_derivative(
    state: &ImState,
    u_s_alpha: f64,
    u_s_beta: f64,
    params: &ImParams,
    mechanics: ImMechanics,
) -> Result<ImState> {
    let x = state.to_vector();
    ensure_finite("IM state", x.as_slice())?;
    ensure_finite("IM input", &[u_s_alpha, u_s_beta])?;

    let xi2 = params.xi2();
    let (psi_a, psi_b) = state.flux();
    let w = state.omega_e;
    let dpsi_a = -xi2 * psi_a - w * psi_b + xi2 * params.L_m * state.i_s_alpha;
    let dpsi_b = -xi2 * psi_b + w * psi_a + xi2 * params.L_m * state.i_s_beta;

    let k = params.L_m / params.L_r;
    let sigma_ls = params.sigma() * params.L_s;
    let di_a = (u_s_alpha - params.R_s * state.i_s_alpha - k * dpsi_a) / sigma_ls;
    let di_b = (u_s_beta - params.R_s * state.i_s_beta - k * dpsi_b) / sigma_ls;

    let domega = match mechanics {
        ImMechanics::Free => params.p as f64 * (im_torque(state, params) - state.load_torque) / params.J,
        ImMechanics::ConstantSpeed => 0.0,
        ImMechanics::SpeedRamp { acceleration } => acceleration,
    };

    Ok(ImState {
        i_s_alpha: di_a,
        i_s_beta: di_b,
        psi_r_alpha: dpsi_a,
        psi_r_beta: dpsi_b,
        omega_e: domega,
        load_torque: 0.0,
    })
}

pub fn im_torque(state: &ImState, params: &ImParams) -> f64 {
    1.5 * params.p as f64 * (params.L_m / params.L_r)
        * (state.psi_r_alpha * state.i_s_beta - state.psi_r_beta * state.i_s_alpha)
}

/// IM driven by stationary-frame stator voltages `[u_sα, u_sβ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImModel {
    pub params: ImParams,
    pub mechanics: ImMechanics,
}

impl ImModel {
    pub fn new(params: ImParams, mechanics: ImMechanics) -> Self {
        Self { params, mechanics }
    }
}

impl Dynamics for ImModel {
    fn state_dim(&self) -> usize {
        IM_STATE_DIM
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != IM_STATE_DIM {
            return Err(Error::DimensionMismatch {
                what: "IM state",
                expected: IM_STATE_DIM,
                actual: x.len(),
            });
        }
        if u.len() != 2 {
            return Err(Error::DimensionMismatch {
                what: "IM input",
                expected: 2,
                actual: u.len(),
            });
        }
        Ok(im_derivative(&ImState::from_vector(x), u[0], u[1], &self.params, self.mechanics)?.to_vector())
    }
}

/// Measured IM output: stator currents.
pub fn im_stator_currents(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[0], x[1]])
}
