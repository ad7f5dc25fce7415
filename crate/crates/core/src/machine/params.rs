use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Permanent-magnet synchronous machine constants (dq model).
///
/// Field names keep the usual machine-design symbols so scenario files read
/// like a data sheet.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmsmParams {
    /// d-axis inductance \[H\]
    pub L_d: f64,
    /// q-axis inductance \[H\]
    pub L_q: f64,
    /// Permanent-magnet flux linkage \[Wb\], equal to the back-EMF constant per electrical rad/s.
    pub K_e: f64,
    /// Stator resistance \[Ω\]
    pub R_s: f64,
    /// Pole pairs
    pub p: u32,
    /// Rotor inertia \[kg·m²\]
    #[serde(default = "default_inertia")]
    pub J: f64,
}

fn default_inertia() -> f64 {
    1e-3
}

impl PmsmParams {
    #[allow(non_snake_case)]
    pub fn new(L_d: f64, L_q: f64, K_e: f64, R_s: f64, p: u32, J: f64) -> Result<Self> {
        let params = Self {
            L_d,
            L_q,
            K_e,
            R_s,
            p,
            J,
        };
        params.validate()?;
        Ok(params)
    }

    /// Laboratory-scale interior PMSM used by the bundled scenarios.
    pub fn default_ipmsm() -> Self {
        Self {
            L_d: 0.01,
            L_q: 0.02,
            K_e: 0.1,
            R_s: 0.5,
            p: 4,
            J: 1e-3,
        }
    }

    /// Same machine with the saliency removed (`L_q = L_d`).
    pub fn default_spmsm() -> Self {
        Self {
            L_q: 0.01,
            ..Self::default_ipmsm()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("L_d", self.L_d)?;
        positive("L_q", self.L_q)?;
        non_negative("K_e", self.K_e)?;
        non_negative("R_s", self.R_s)?;
        positive("J", self.J)?;
        if self.p < 1 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "pole-pair count must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Saliency `L_d - L_q`. Zero for a surface-mounted machine.
    pub fn delta_l(&self) -> f64 {
        self.L_d - self.L_q
    }

    pub fn is_surface_mounted(&self) -> bool {
        self.delta_l() == 0.0
    }

    /// Electromagnetic torque for the given dq currents.
    pub fn torque(&self, i_d: f64, i_q: f64) -> f64 {
        1.5 * self.p as f64 * (self.K_e + self.delta_l() * i_d) * i_q
    }
}

/// Induction machine constants for the stationary-frame current/rotor-flux model.
///
/// `xi2` is the inverse rotor time constant and is always derived as
/// `R_r / L_r`; it is not accepted from input.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImParamsSpec", into = "ImParamsSpec")]
pub struct ImParams {
    pub R_s: f64,
    pub R_r: f64,
    pub L_s: f64,
    pub L_r: f64,
    pub L_m: f64,
    pub J: f64,
    pub p: u32,
    xi2: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImParamsSpec {
    R_s: f64,
    R_r: f64,
    L_s: f64,
    L_r: f64,
    L_m: f64,
    J: f64,
    p: u32,
}

impl TryFrom<ImParamsSpec> for ImParams {
    type Error = Error;

    fn try_from(s: ImParamsSpec) -> Result<Self> {
        ImParams::new(s.R_s, s.R_r, s.L_s, s.L_r, s.L_m, s.J, s.p)
    }
}

impl From<ImParams> for ImParamsSpec {
    fn from(p: ImParams) -> Self {
        Self {
            R_s: p.R_s,
            R_r: p.R_r,
            L_s: p.L_s,
            L_r: p.L_r,
            L_m: p.L_m,
            J: p.J,
            p: p.p,
        }
    }
}

impl ImParams {
    #[allow(non_snake_case)]
    pub fn new(R_s: f64, R_r: f64, L_s: f64, L_r: f64, L_m: f64, J: f64, p: u32) -> Result<Self> {
        non_negative("R_s", R_s)?;
        non_negative("R_r", R_r)?;
        positive("L_s", L_s)?;
        positive("L_r", L_r)?;
        positive("L_m", L_m)?;
        positive("J", J)?;
        if p < 1 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "pole-pair count must be at least 1".into(),
            });
        }
        if L_m * L_m >= L_s * L_r {
            return Err(Error::InvalidParameter {
                name: "L_m",
                reason: format!("L_m² must be below L_s·L_r (got L_m = {L_m})"),
            });
        }
        Ok(Self {
            R_s,
            R_r,
            L_s,
            L_r,
            L_m,
            J,
            p,
            xi2: R_r / L_r,
        })
    }

    /// 4 kW-class machine used by the bundled scenarios.
    pub fn default_machine() -> Self {
        Self::new(1.4, 1.2, 0.17, 0.17, 0.16, 0.05, 2).expect("default IM parameters are valid")
    }

    /// Inverse rotor time constant `R_r / L_r` \[1/s\].
    pub fn xi2(&self) -> f64 {
        self.xi2
    }

    /// Leakage coefficient `1 - L_m² / (L_s L_r)`.
    pub fn sigma(&self) -> f64 {
        1.0 - self.L_m * self.L_m / (self.L_s * self.L_r)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0 (got {v})"),
        })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and >= 0 (got {v})"),
        })
    }
}
