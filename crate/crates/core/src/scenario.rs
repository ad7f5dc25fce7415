//! Scenario files (TOML): machine, parameters, excitation, integration
//! settings, tolerances and oracle switches.
//!
//! ```toml
//! name = "ipmsm-const-thetao"
//! machine = "pmsm"
//! duration = 0.05
//!
//! [pmsm.params]
//! L_d = 0.01
//! L_q = 0.02
//! K_e = 0.1
//! R_s = 0.5
//! p = 4
//!
//! [pmsm.mechanics]
//! mode = "locked-rotor"
//!
//! [pmsm.profile]
//! kind = "constant-theta-o"
//! theta_o = -0.3
//! driver = { by = "flux-magnitude", law = "hyperbolic", start = 0.4, end = 0.1, duration = 0.05 }
//! ```
//!
//! Every default is written back by [`Scenario::to_toml`], so the echo in a
//! report is a complete, reloadable description of the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{CurrentProfile, ImSupply, MechanicalMode, ProfileSpec};
use crate::machine::{ImMechanics, ImParams, ImState, PmsmParams, DEFAULT_DT};
use crate::observability::DEFAULT_EPSILON;
use crate::oracle::{FdSettings, GramianSettings, DEFAULT_RANK_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MachineKind {
    Pmsm,
    Im,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub machine: MachineKind,
    /// Integration step \[s\]
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Run length \[s\]; zero evaluates the initial point only.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Recorded in the report; the run itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmsm: Option<PmsmSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<ImSetup>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmsmSetup {
    pub params: PmsmParams,
    #[serde(default)]
    pub mechanics: MechanicalMode,
    #[serde(default = "zero_profile")]
    pub profile: ProfileSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImSetup {
    pub params: ImParams,
    #[serde(default)]
    pub mechanics: ImMechanics,
    #[serde(default)]
    pub initial: ImState,
    #[serde(default)]
    pub supply: ImSupply,
}

/// Decision thresholds, each in the natural units of its condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// On `|D|` (SI units of the determinant).
    #[serde(default = "default_eps")]
    pub eps_det: f64,
    /// On `|ω_e − dθ_O/dt|` \[rad/s\].
    #[serde(default = "default_eps")]
    pub eps_rate: f64,
    /// On the induction-machine flux conditions.
    #[serde(default = "default_eps")]
    pub eps_im: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_det: DEFAULT_EPSILON,
            eps_rate: DEFAULT_EPSILON,
            eps_im: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    #[serde(default)]
    pub enabled: bool,
    /// Relative singular-value threshold for the equilibrated matrix rank, also
    /// applied to the scale-free closed-form determinant.
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
    #[serde(default = "default_gradient_step")]
    pub gradient_step: f64,
    #[serde(default = "default_lie_step")]
    pub lie_step: f64,
    #[serde(default)]
    pub gramian: GramianSettings,
}

impl Default for OracleSettings {
    fn default() -> Self {
        let fd = FdSettings::default();
        Self {
            enabled: false,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            gradient_step: fd.gradient_step,
            lie_step: fd.lie_step,
            gramian: GramianSettings::default(),
        }
    }
}

impl OracleSettings {
    pub fn fd(&self) -> FdSettings {
        FdSettings {
            gradient_step: self.gradient_step,
            lie_step: self.lie_step,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Directory for `<name>.csv` and `<name>.summary.txt`; the CLI flag wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_duration() -> f64 {
    0.05
}

fn default_eps() -> f64 {
    DEFAULT_EPSILON
}

fn default_rank_tolerance() -> f64 {
    DEFAULT_RANK_TOLERANCE
}

fn default_gradient_step() -> f64 {
    FdSettings::default().gradient_step
}

fn default_lie_step() -> f64 {
    FdSettings::default().lie_step
}

fn zero_profile() -> ProfileSpec {
    ProfileSpec::PiecewiseHold {
        times: vec![0.0],
        i_d: vec![0.0],
        i_q: vec![0.0],
    }
}

/// Read, parse and validate a scenario file. A missing `name` is taken from
/// the file stem.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scenario = Scenario::from_toml(&text).map_err(|e| match e {
        Error::Parse { line, column, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            column,
            message,
        },
        other => other,
    })?;
    if scenario.name.is_empty() {
        scenario.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
    }
    Ok(scenario)
}

impl Scenario {
    /// Parse and validate. Parse errors carry 1-based line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((0, 0));
            Error::Parse {
                path: "<input>".into(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario values are always representable")
    }

    /// Integration steps covering `duration`.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0 (got {})", self.dt),
            });
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("must be finite and >= 0 (got {})", self.duration),
            });
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("must be a whole number of steps of {} s (got {})", self.dt, self.duration),
            });
        }
        if steps.round() > 1e8 {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("{} steps is more than the runner accepts", steps.round()),
            });
        }
        for (name, v) in [
            ("eps_det", self.tolerances.eps_det),
            ("eps_rate", self.tolerances.eps_rate),
            ("eps_im", self.tolerances.eps_im),
            ("rank_tolerance", self.oracle.rank_tolerance),
            ("gradient_step", self.oracle.gradient_step),
            ("lie_step", self.oracle.lie_step),
            ("delta", self.oracle.gramian.delta),
            ("window", self.oracle.gramian.window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0 (got {v})"),
                });
            }
        }

        match self.machine {
            MachineKind::Pmsm => {
                if self.im.is_some() {
                    return Err(Error::Scenario("`[im]` given for a pmsm scenario".into()));
                }
                let setup = self
                    .pmsm
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("machine = \"pmsm\" needs a `[pmsm.params]` table".into()))?;
                setup.params.validate()?;
                validate_mode(&setup.mechanics)?;
                CurrentProfile::from_spec(&setup.profile, &setup.params, self.duration)?;
            }
            MachineKind::Im => {
                if self.pmsm.is_some() {
                    return Err(Error::Scenario("`[pmsm]` given for an im scenario".into()));
                }
                let setup = self
                    .im
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("machine = \"im\" needs an `[im.params]` table".into()))?;
                setup.supply.validate()?;
                let s = &setup.initial;
                let values = [s.i_s_alpha, s.i_s_beta, s.psi_r_alpha, s.psi_r_beta, s.omega_e, s.load_torque];
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("im.initial"));
                }
                if let ImMechanics::SpeedRamp { acceleration } = setup.mechanics {
                    if !acceleration.is_finite() {
                        return Err(Error::NonFinite("acceleration"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_mode(mode: &MechanicalMode) -> Result<()> {
    let values: &[f64] = match mode {
        MechanicalMode::LockedRotor { theta_e } => &[*theta_e],
        MechanicalMode::ConstantSpeed { omega_e, theta_e } => &[*omega_e, *theta_e],
        MechanicalMode::Free {
            omega_e,
            theta_e,
            load_torque,
        } => &[*omega_e, *theta_e, *load_torque],
    };
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("mechanics"))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
