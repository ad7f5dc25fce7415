//! Independent numerical checks of the closed-form conditions: observability
//! matrices rebuilt from finite-difference Lie derivatives, and empirical
//! observability Gramians from perturbed re-simulation.

mod gramian;
mod linalg;
mod matrix;

pub use gramian::{empirical_gramian, GramianSettings, GramianSummary};
pub use linalg::{determinant_and_rank, equilibrate, numerical_rank, singular_values, Equilibration};
pub use matrix::{build_observability_matrix, FdSettings, ObservabilityMatrix};

use nalgebra::DVector;

use crate::error::Result;
use crate::lab::pmsm_voltages;
use crate::machine::frames::inverse_park;
use crate::machine::{stator_currents, Mechanics, PmsmModel, PmsmParams, PmsmState};

/// Default relative singular-value threshold used to call an equilibrated
/// observability matrix rank deficient.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-4;

/// Observability matrix of the sensorless PMSM at one operating point.
///
/// Outputs are the stationary-frame currents, the state is
/// `[i_d, i_q, θ_e, ω_e]` and the stator voltage is held fixed in the
/// stationary frame at the value that produces the requested current rates.
/// Rows are ordered `(i_α, i_β, L_f i_α, L_f i_β)`.
pub fn pmsm_observability_matrix(
    params: &PmsmParams,
    state: &PmsmState,
    di_d: f64,
    di_q: f64,
    settings: FdSettings,
) -> Result<ObservabilityMatrix> {
    let (u_d, u_q) = pmsm_voltages(params, state.i_d, state.i_q, di_d, di_q, state.omega_e);
    let (u_a, u_b) = inverse_park(u_d, u_q, state.theta_e);
    let model = PmsmModel::new(*params, Mechanics::HeldSpeed)?.stator_fed();
    build_observability_matrix(
        &model,
        stator_currents,
        &state.to_vector(),
        &DVector::from_vec(vec![u_a, u_b]),
        2,
        settings,
    )
}

/// Scale-free size of a closed-form determinant, `|D| / scale` where `scale`
/// is the sum of the magnitudes of its summands. Zero on the unobservable set,
/// one when nothing cancels.
pub fn relative_determinant(determinant: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        determinant.abs() / scale
    }
}
