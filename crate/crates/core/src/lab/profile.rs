use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::scalar::{hermite_segment, ScalarProfile};
use crate::error::{Error, Result};
use crate::machine::PmsmParams;
use crate::observability::observability_vector;

/// Rotor-frame currents and their rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentSample {
    pub i_d: f64,
    pub i_q: f64,
    pub di_d: f64,
    pub di_q: f64,
}

impl CurrentSample {
    pub fn magnitude(&self) -> f64 {
        self.i_d.hypot(self.i_q)
    }

    pub fn direction(&self) -> f64 {
        self.i_q.atan2(self.i_d)
    }
}

/// What drives the position along a constant-θ_O locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "kebab-case")]
pub enum LocusDriver {
    /// `i_d(t)` given, `i_q` follows; needs `|θ_O| < π/2`.
    DAxisCurrent(ScalarProfile),
    /// `i_q(t)` given, `i_d` follows; covers the vertical locus.
    QAxisCurrent(ScalarProfile),
    /// `|Ψ_O|(t)` given along the ray at angle `θ_O`.
    FluxMagnitude(ScalarProfile),
}

/// Scenario-facing description of a current trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    ConstantThetaO {
        theta_o: f64,
        driver: LocusDriver,
    },
    RotatingVector {
        magnitude: f64,
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Holds `(i_d, i_q)` at each knot with smooth transitions in between.
    PiecewiseHold {
        times: Vec<f64>,
        i_d: Vec<f64>,
        i_q: Vec<f64>,
    },
    /// Arbitrary samples joined by shape-preserving cubics.
    CustomSamples {
        times: Vec<f64>,
        i_d: Vec<f64>,
        i_q: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    ConstantThetaO {
        theta_o: f64,
        driver: LocusDriver,
        delta_l: f64,
        k_e: f64,
    },
    RotatingVector {
        magnitude: f64,
        rate: f64,
        phase: f64,
    },
    PiecewiseHold {
        times: Vec<f64>,
        i_d: Vec<f64>,
        i_q: Vec<f64>,
    },
    CustomSamples {
        i_d: ScalarProfile,
        i_q: ScalarProfile,
    },
}

/// A differentiable rotor-frame current trajectory over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile {
    pub kind: ProfileKind,
    pub duration: f64,
}

impl CurrentProfile {
    pub fn from_spec(spec: &ProfileSpec, params: &PmsmParams, duration: f64) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::Profile(format!("duration must be finite and >= 0 (got {duration})")));
        }
        match spec {
            ProfileSpec::ConstantThetaO { theta_o, driver } => {
                constant_theta_o_with(params, *theta_o, driver.clone(), duration)
            }
            ProfileSpec::RotatingVector { magnitude, rate, phase } => {
                let mut p = rotating_vector_profile(*magnitude, *rate, duration)?;
                if let ProfileKind::RotatingVector { phase: ph, .. } = &mut p.kind {
                    *ph = *phase;
                }
                Ok(p)
            }
            ProfileSpec::PiecewiseHold { times, i_d, i_q } => {
                check_knots(times, &[i_d, i_q])?;
                Ok(Self {
                    kind: ProfileKind::PiecewiseHold {
                        times: times.clone(),
                        i_d: i_d.clone(),
                        i_q: i_q.clone(),
                    },
                    duration,
                })
            }
            ProfileSpec::CustomSamples { times, i_d, i_q } => {
                check_knots(times, &[i_d, i_q])?;
                Ok(Self {
                    kind: ProfileKind::CustomSamples {
                        i_d: ScalarProfile::Breakpoints {
                            times: times.clone(),
                            values: i_d.clone(),
                        },
                        i_q: ScalarProfile::Breakpoints {
                            times: times.clone(),
                            values: i_q.clone(),
                        },
                    },
                    duration,
                })
            }
        }
    }

    pub fn eval(&self, t: f64) -> CurrentSample {
        match &self.kind {
            ProfileKind::ConstantThetaO {
                theta_o,
                driver,
                delta_l,
                k_e,
            } => locus_point(*theta_o, driver, *delta_l, *k_e, t),
            ProfileKind::RotatingVector { magnitude, rate, phase } => {
                let (s, c) = (rate * t + phase).sin_cos();
                CurrentSample {
                    i_d: magnitude * c,
                    i_q: magnitude * s,
                    di_d: -magnitude * rate * s,
                    di_q: magnitude * rate * c,
                }
            }
            ProfileKind::PiecewiseHold { times, i_d, i_q } => {
                let (d, dd) = smooth_hold(times, i_d, t);
                let (q, dq) = smooth_hold(times, i_q, t);
                CurrentSample {
                    i_d: d,
                    i_q: q,
                    di_d: dd,
                    di_q: dq,
                }
            }
            ProfileKind::CustomSamples { i_d, i_q } => {
                let (d, dd) = i_d.eval(t);
                let (q, dq) = i_q.eval(t);
                CurrentSample {
                    i_d: d,
                    i_q: q,
                    di_d: dd,
                    di_q: dq,
                }
            }
        }
    }
}

/// Currents along the locus `ΔL i_q = tan θ_O · (ΔL i_d + K_e)`, restricted to
/// the ray where the phase of `Ψ_O` is exactly `θ_O`.
pub fn constant_theta_o_profile(
    params: &PmsmParams,
    theta_o: f64,
    i_d: ScalarProfile,
    duration: f64,
) -> Result<CurrentProfile> {
    constant_theta_o_with(params, theta_o, LocusDriver::DAxisCurrent(i_d), duration)
}

pub fn constant_theta_o_with(
    params: &PmsmParams,
    theta_o: f64,
    driver: LocusDriver,
    duration: f64,
) -> Result<CurrentProfile> {
    let delta_l = params.delta_l();
    if delta_l == 0.0 {
        return Err(Error::Profile(
            "constant-θ_O locus is undefined without saliency (L_d = L_q)".into(),
        ));
    }
    if !theta_o.is_finite() {
        return Err(Error::Profile("θ_O must be finite".into()));
    }
    let k_e = params.K_e;
    let sin_o = theta_o.sin();
    match &driver {
        LocusDriver::DAxisCurrent(p) => {
            p.validate()?;
            if theta_o.abs() >= FRAC_PI_2 {
                return Err(Error::Profile(format!(
                    "i_d parametrisation needs |θ_O| < π/2 (got {theta_o}); use the q-axis or flux-magnitude driver"
                )));
            }
            // Ψ_Od must stay positive for the phase to be θ_O rather than θ_O ± π.
            let (lo, hi) = p.extremes(duration);
            if (delta_l * lo + k_e).min(delta_l * hi + k_e) <= 0.0 {
                return Err(Error::Profile(
                    "i_d profile crosses the active-flux zero; the phase would flip by π".into(),
                ));
            }
        }
        LocusDriver::QAxisCurrent(p) => {
            p.validate()?;
            if sin_o == 0.0 {
                return Err(Error::Profile("i_q parametrisation needs θ_O ≠ 0, π".into()));
            }
            let (lo, hi) = p.extremes(duration);
            if (delta_l * lo * sin_o).min(delta_l * hi * sin_o) <= 0.0 {
                return Err(Error::Profile(
                    "i_q profile leaves the θ_O ray (ΔL·i_q must share the sign of sin θ_O)".into(),
                ));
            }
        }
        LocusDriver::FluxMagnitude(p) => {
            p.validate()?;
            let (lo, _) = p.extremes(duration);
            if lo <= 0.0 {
                return Err(Error::Profile("|Ψ_O| profile must stay positive".into()));
            }
        }
    }
    Ok(CurrentProfile {
        kind: ProfileKind::ConstantThetaO {
            theta_o,
            driver,
            delta_l,
            k_e,
        },
        duration,
    })
}

fn locus_point(theta_o: f64, driver: &LocusDriver, delta_l: f64, k_e: f64, t: f64) -> CurrentSample {
    let (sin_o, cos_o) = theta_o.sin_cos();
    match driver {
        LocusDriver::DAxisCurrent(p) => {
            let (i_d, di_d) = p.eval(t);
            let tan_o = sin_o / cos_o;
            CurrentSample {
                i_d,
                i_q: tan_o * (delta_l * i_d + k_e) / delta_l,
                di_d,
                di_q: tan_o * di_d,
            }
        }
        LocusDriver::QAxisCurrent(p) => {
            let (i_q, di_q) = p.eval(t);
            let cot_o = cos_o / sin_o;
            CurrentSample {
                i_d: (cot_o * delta_l * i_q - k_e) / delta_l,
                i_q,
                di_d: cot_o * di_q,
                di_q,
            }
        }
        LocusDriver::FluxMagnitude(p) => {
            let (r, dr) = p.eval(t);
            CurrentSample {
                i_d: (r * cos_o - k_e) / delta_l,
                i_q: r * sin_o / delta_l,
                di_d: dr * cos_o / delta_l,
                di_q: dr * sin_o / delta_l,
            }
        }
    }
}

/// `i = magnitude · e^{j·rate·t}`.
pub fn rotating_vector_profile(magnitude: f64, rate: f64, duration: f64) -> Result<CurrentProfile> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::Profile(format!("magnitude must be finite and >= 0 (got {magnitude})")));
    }
    if !rate.is_finite() {
        return Err(Error::Profile("rate must be finite".into()));
    }
    Ok(CurrentProfile {
        kind: ProfileKind::RotatingVector {
            magnitude,
            rate,
            phase: 0.0,
        },
        duration,
    })
}

/// Two current vectors on the same constant-θ_O ray, the first with
/// `i_d < 0, i_q > 0` and the second with `i_d > 0, i_q > 0`.
pub fn sign_changing_pair(params: &PmsmParams, theta_o: f64) -> Result<(CurrentSample, CurrentSample)> {
    let delta_l = params.delta_l();
    if delta_l == 0.0 {
        return Err(Error::Profile("no constant-θ_O locus without saliency".into()));
    }
    let (sin_o, cos_o) = theta_o.sin_cos();
    // along the ray Ψ_O = r e^{jθ_O}:  i_d = a + b r,  i_q = c r
    let a = -params.K_e / delta_l;
    let b = cos_o / delta_l;
    let c = sin_o / delta_l;
    if c <= 0.0 {
        return Err(Error::Profile(format!(
            "i_q > 0 needs sin θ_O to share the sign of ΔL = {delta_l}; θ_O = {theta_o} gives i_q ≤ 0 on the whole ray"
        )));
    }
    if a == 0.0 || b == 0.0 || a * b > 0.0 {
        return Err(Error::Profile(format!(
            "i_d keeps one sign along the θ_O = {theta_o} ray (K_e = {}, ΔL = {delta_l}); no pair with i_d of both signs",
            params.K_e
        )));
    }
    let r_cross = -a / b;
    let point = |r: f64| CurrentSample {
        i_d: a + b * r,
        i_q: c * r,
        di_d: 0.0,
        di_q: 0.0,
    };
    let (near, far) = (point(0.5 * r_cross), point(2.0 * r_cross));
    let (i1, i2) = if near.i_d < 0.0 { (near, far) } else { (far, near) };
    debug_assert!((observability_vector(i1.i_d, i1.i_q, params).theta_o - theta_o).abs() < 1e-9);
    Ok((i1, i2))
}

fn check_knots(times: &[f64], series: &[&Vec<f64>]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Profile("at least one knot is required".into()));
    }
    if series.iter().any(|s| s.len() != times.len()) {
        return Err(Error::Profile("knot series must have the same length as `times`".into()));
    }
    if times.iter().chain(series.iter().flat_map(|s| s.iter())).any(|v| !v.is_finite()) {
        return Err(Error::Profile("knots must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Profile("knot times must be strictly increasing".into()));
    }
    Ok(())
}

/// Zero-slope cubic between consecutive held values.
fn smooth_hold(times: &[f64], values: &[f64], t: f64) -> (f64, f64) {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return (values[0], 0.0);
    }
    if t >= times[n - 1] {
        return (values[n - 1], 0.0);
    }
    let k = times.partition_point(|x| *x <= t) - 1;
    hermite_segment(times[k], times[k + 1], values[k], values[k + 1], 0.0, 0.0, t)
}
