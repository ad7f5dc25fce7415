//! Closed-form local observability conditions for sensorless PMSM and IM drives.
//!
//! The PMSM conditions are all phrased around the observability vector
//!
//! ```text
//! Ψ_O = (ΔL i_d + K_e) + j ΔL i_q,      ΔL = L_d - L_q
//! ```
//!
//! whose d-component is the active flux. The machine is locally observable
//! when the phase rate of `Ψ_O` in the rotor frame differs from `ω_e`; the
//! observability-matrix determinant `D` is that speed difference scaled by
//! `|Ψ_O|² / (L_d L_q)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::machine::frames::cross;
use crate::machine::{ImParams, PmsmParams};

/// Default decision margin for every condition, in its own units.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityVector {
    pub psi_d: f64,
    pub psi_q: f64,
    pub magnitude: f64,
    /// Phase in the rotor frame, `atan2` convention.
    pub theta_o: f64,
}

impl ObservabilityVector {
    /// True when the phase is undefined: `Ψ_O` vanishes up to rounding of its terms.
    pub fn is_degenerate(&self, params: &PmsmParams, i_d: f64, i_q: f64) -> bool {
        let dl = params.delta_l().abs();
        let scale = params.K_e + dl * (i_d.abs() + i_q.abs());
        self.magnitude <= 4.0 * f64::EPSILON * scale
    }
}

/// Outcome of one condition evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityVerdict {
    pub value: f64,
    pub threshold: f64,
    pub observable: bool,
    pub degenerate: bool,
}

impl ObservabilityVerdict {
    pub fn new(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            observable: value.abs() > threshold,
            degenerate: false,
        }
    }

    pub fn degenerate(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            observable: false,
            degenerate: true,
        }
    }
}

pub fn observability_vector(i_d: f64, i_q: f64, params: &PmsmParams) -> ObservabilityVector {
    let dl = params.delta_l();
    let psi_d = dl * i_d + params.K_e;
    let psi_q = dl * i_q;
    ObservabilityVector {
        psi_d,
        psi_q,
        magnitude: psi_d.hypot(psi_q),
        theta_o: psi_q.atan2(psi_d),
    }
}

/// `dθ_O/dt = (Ψ_Od Ψ̇_Oq − Ψ_Oq Ψ̇_Od) / |Ψ_O|²`.
pub fn theta_o_rate(i_d: f64, i_q: f64, di_d: f64, di_q: f64, params: &PmsmParams) -> Result<f64> {
    ensure_finite("currents", &[i_d, i_q, di_d, di_q])?;
    let v = observability_vector(i_d, i_q, params);
    if v.is_degenerate(params, i_d, i_q) {
        return Err(Error::Degenerate("observability vector is zero, its phase is undefined"));
    }
    let dl = params.delta_l();
    let num = cross((v.psi_d, v.psi_q), (dl * di_d, dl * di_q));
    let den = v.psi_d * v.psi_d + v.psi_q * v.psi_q;
    Ok(num / den)
}

/// Phase rate taken through the arctangent of `ΔL i_q / (ΔL i_d + K_e)`:
/// `d/dt atan(z) = ż / (1 + z²)`. Undefined where the active flux is zero.
pub fn theta_o_rate_arctan(i_d: f64, i_q: f64, di_d: f64, di_q: f64, params: &PmsmParams) -> Result<f64> {
    ensure_finite("currents", &[i_d, i_q, di_d, di_q])?;
    let dl = params.delta_l();
    let psi_d = dl * i_d + params.K_e;
    if psi_d == 0.0 {
        return Err(Error::Degenerate("active flux is zero, arctangent argument undefined"));
    }
    let z = dl * i_q / psi_d;
    let dz = (dl * di_q * psi_d - dl * i_q * dl * di_d) / (psi_d * psi_d);
    Ok(dz / (1.0 + z * z))
}

/// Determinant of the PMSM observability matrix built from the currents and
/// their first derivatives:
///
/// ```text
/// D = [(ΔL i_d + K_e)² + ΔL² i_q²] ω_e / (L_d L_q)
///   + ΔL [ΔL (di_d/dt) i_q − (ΔL i_d + K_e) di_q/dt] / (L_d L_q)
/// ```
pub fn pmsm_determinant(i_d: f64, i_q: f64, di_d: f64, di_q: f64, omega_e: f64, params: &PmsmParams) -> f64 {
    let (speed, motion) = determinant_terms(i_d, i_q, di_d, di_q, omega_e, params);
    speed + motion
}

/// The two additive terms of [`pmsm_determinant`]: the speed term and the
/// current-motion term.
pub fn determinant_terms(
    i_d: f64,
    i_q: f64,
    di_d: f64,
    di_q: f64,
    omega_e: f64,
    params: &PmsmParams,
) -> (f64, f64) {
    let dl = params.delta_l();
    let ll = params.L_d * params.L_q;
    let active = dl * i_d + params.K_e;
    let speed = (active * active + dl * dl * i_q * i_q) * omega_e / ll;
    let motion = dl / ll * (dl * di_d * i_q - active * di_q);
    (speed, motion)
}

/// Sum of the magnitudes of every summand in [`pmsm_determinant`]. Cancellation
/// on the unobservable set is judged against this, since the current-motion term
/// cancels internally when the flux vector moves radially.
pub fn pmsm_determinant_scale(
    i_d: f64,
    i_q: f64,
    di_d: f64,
    di_q: f64,
    omega_e: f64,
    params: &PmsmParams,
) -> f64 {
    let dl = params.delta_l();
    let ll = params.L_d * params.L_q;
    let active = dl * i_d + params.K_e;
    let speed = (active * active + dl * dl * i_q * i_q) * omega_e.abs() / ll;
    speed + dl.abs() / ll * ((dl * di_d * i_q).abs() + (active * di_q).abs())
}

/// Speed condition `ω_e ≠ dθ_O/dt`. Degenerate (and unobservable) where `Ψ_O = 0`.
pub fn pmsm_condition(
    i_d: f64,
    i_q: f64,
    di_d: f64,
    di_q: f64,
    omega_e: f64,
    params: &PmsmParams,
    epsilon: f64,
) -> ObservabilityVerdict {
    match theta_o_rate(i_d, i_q, di_d, di_q, params) {
        Ok(rate) => ObservabilityVerdict::new(omega_e - rate, epsilon),
        Err(_) => ObservabilityVerdict::degenerate(0.0, epsilon),
    }
}

/// Standstill condition `|i_d + K_e/ΔL| |C| ≠ |i_q|`, residual
/// `|i_d + K_e/ΔL| |C| − |i_q|`. Meaningless without saliency.
pub fn legacy_standstill_check(
    i_d: f64,
    i_q: f64,
    c: f64,
    params: &PmsmParams,
    epsilon: f64,
) -> Result<ObservabilityVerdict> {
    ensure_finite("legacy check input", &[i_d, i_q, c])?;
    let dl = params.delta_l();
    if dl == 0.0 {
        return Err(Error::InvalidParameter {
            name: "L_d - L_q",
            reason: "standstill condition with constant C requires saliency".into(),
        });
    }
    let value = (i_d + params.K_e / dl).abs() * c.abs() - i_q.abs();
    Ok(ObservabilityVerdict::new(value, epsilon))
}

/// Per-sample ratios `|i_q| / |i_d + K_e/ΔL|` and how constant they are.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCEstimate {
    /// `None` where the denominator vanishes.
    pub ratios: Vec<Option<f64>>,
    pub mean: f64,
    pub max_deviation: f64,
    pub degenerate_count: usize,
}

pub fn extract_c(currents: &[(f64, f64)], params: &PmsmParams) -> Result<ConstantCEstimate> {
    let dl = params.delta_l();
    if dl == 0.0 {
        return Err(Error::InvalidParameter {
            name: "L_d - L_q",
            reason: "constant C is only defined for salient machines".into(),
        });
    }
    let offset = params.K_e / dl;
    let ratios: Vec<Option<f64>> = currents
        .iter()
        .map(|&(i_d, i_q)| {
            let den = (i_d + offset).abs();
            if den <= 4.0 * f64::EPSILON * (i_d.abs() + offset.abs()) {
                None
            } else {
                Some(i_q.abs() / den)
            }
        })
        .collect();
    let valid: Vec<f64> = ratios.iter().flatten().copied().collect();
    let degenerate_count = ratios.len() - valid.len();
    if valid.is_empty() {
        return Err(Error::Degenerate("no sample with a usable denominator"));
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let max_deviation = valid.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
    Ok(ConstantCEstimate {
        ratios,
        mean,
        max_deviation,
        degenerate_count,
    })
}

/// The two terms of the 6-state IM condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImConditionTerms {
    /// `ξ₂/(ω_e² + ξ₂²) · dω_e/dt · |Ψ_r|²`
    pub acceleration_term: f64,
    /// `dΨ_r/dt × Ψ_r`
    pub cross_term: f64,
}

impl ImConditionTerms {
    pub fn value(&self) -> f64 {
        self.acceleration_term - self.cross_term
    }
}

pub fn im_condition_terms(
    psi_r: (f64, f64),
    dpsi_r: (f64, f64),
    omega_e: f64,
    domega_e: f64,
    params: &ImParams,
) -> Result<ImConditionTerms> {
    ensure_finite("IM condition input", &[psi_r.0, psi_r.1, dpsi_r.0, dpsi_r.1, omega_e, domega_e])?;
    let xi2 = params.xi2();
    let den = omega_e * omega_e + xi2 * xi2;
    if den == 0.0 {
        return Err(Error::Degenerate("ω_e² + ξ₂² vanishes"));
    }
    let flux_sq = psi_r.0 * psi_r.0 + psi_r.1 * psi_r.1;
    Ok(ImConditionTerms {
        acceleration_term: xi2 / den * domega_e * flux_sq,
        cross_term: cross(dpsi_r, psi_r),
    })
}

/// Condition of the 6-state model (speed and load torque estimated).
pub fn im_condition_6d(
    psi_r: (f64, f64),
    dpsi_r: (f64, f64),
    omega_e: f64,
    domega_e: f64,
    params: &ImParams,
    epsilon: f64,
) -> Result<ObservabilityVerdict> {
    let terms = im_condition_terms(psi_r, dpsi_r, omega_e, domega_e, params)?;
    Ok(ObservabilityVerdict::new(terms.value(), epsilon))
}

/// Condition of the 5-state constant-speed model: `dΨ_r/dt × Ψ_r ≠ 0`.
pub fn im_condition_5d(psi_r: (f64, f64), dpsi_r: (f64, f64), epsilon: f64) -> ObservabilityVerdict {
    ObservabilityVerdict::new(cross(dpsi_r, psi_r), epsilon)
}
