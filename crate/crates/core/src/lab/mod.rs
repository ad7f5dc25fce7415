//! Excitation synthesis: constant-θ_O standstill trajectories, observable
//! baselines, IM supply profiles, and the open-loop voltages that realise
//! prescribed PMSM currents.

mod excitation;
mod im_supply;
mod profile;
mod scalar;

pub use excitation::{pmsm_voltages, realize_voltages, Excitation, ExcitationSample, MechanicalMode};
pub use im_supply::ImSupply;
pub use profile::{
    constant_theta_o_profile, constant_theta_o_with, sign_changing_pair, rotating_vector_profile, CurrentProfile,
    CurrentSample, LocusDriver, ProfileKind, ProfileSpec,
};
pub use scalar::ScalarProfile;
