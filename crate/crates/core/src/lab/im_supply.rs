use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Balanced sinusoidal stator supply for the induction machine, optionally
/// soft-started with a smooth amplitude ramp.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImSupply {
    /// Voltage space-vector amplitude \[V\]
    pub amplitude: f64,
    /// Supply frequency \[Hz\]
    pub frequency: f64,
    /// Soft-start time \[s\]; zero applies full amplitude at t = 0.
    #[serde(default)]
    pub ramp_time: f64,
}

impl ImSupply {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!("must be finite and >= 0 (got {})", self.amplitude),
            });
        }
        if !self.frequency.is_finite() {
            return Err(Error::InvalidParameter {
                name: "frequency",
                reason: "must be finite".into(),
            });
        }
        if !(self.ramp_time.is_finite() && self.ramp_time >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "ramp_time",
                reason: format!("must be finite and >= 0 (got {})", self.ramp_time),
            });
        }
        Ok(())
    }

    /// `(u_sα, u_sβ)` at time `t`.
    pub fn voltage(&self, t: f64) -> (f64, f64) {
        let envelope = if self.ramp_time > 0.0 && t < self.ramp_time {
            let s = (t / self.ramp_time).max(0.0);
            s * s * (3.0 - 2.0 * s)
        } else {
            1.0
        };
        let (s, c) = (TAU * self.frequency * t).sin_cos();
        (self.amplitude * envelope * c, self.amplitude * envelope * s)
    }
}
