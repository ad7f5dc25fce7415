//! Continuous-time machine models and the fixed-step integrator they run on.

pub mod frames;
mod im;
mod integrate;
mod params;
mod pmsm;

pub use im::{im_derivative, im_stator_currents, im_torque, ImMechanics, ImModel, ImState, IM_STATE_DIM};
pub use integrate::{integrate, rk4_step, Dynamics, LinearSystem, Sample, Trajectory};
pub use params::{ImParams, PmsmParams};
pub use pmsm::{
    pmsm_derivative, stator_currents, Mechanics, PmsmDerivative, PmsmModel, PmsmState, StatorFedPmsm,
    PMSM_STATE_DIM,
};

/// Default integration step \[s\].
pub const DEFAULT_DT: f64 = 1e-5;
