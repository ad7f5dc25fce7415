//! Local observability of sensorless AC drives.
//!
//! * [`machine`]: dq PMSM and 6-state induction machine models, RK4 integrator,
//!   frame transforms.
//! * [`observability`]: closed-form conditions (determinant `D`, the
//!   observability vector `Ψ_O` and its phase rate, the standstill condition
//!   with constant `C`, and the IM flux conditions).
//! * [`oracle`]: finite-difference observability matrices and empirical
//!   Gramians that check those conditions without using them.
//! * [`lab`]: constant-θ_O and baseline excitations, voltage realisation.
//! * [`scenario`], [`report`], [`runner`]: scenario files, batch runs, CSV
//!   and summary output behind the `drive-obs` binary.

pub mod error;
pub mod lab;
pub mod machine;
pub mod observability;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};
