//! Reference-frame conversions between phase (abc), stationary (αβ) and
//! rotor (dq) quantities. Amplitude-invariant Clarke scaling.

use std::f64::consts::PI;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// abc → αβ.
pub fn clarke(a: f64, b: f64, c: f64) -> (f64, f64) {
    let alpha = (2.0 / 3.0) * (a - 0.5 * b - 0.5 * c);
    let beta = (2.0 / 3.0) * SQRT3_2 * (b - c);
    (alpha, beta)
}

/// αβ → abc for a balanced (zero-sequence free) set.
pub fn inverse_clarke(alpha: f64, beta: f64) -> (f64, f64, f64) {
    let a = alpha;
    let b = -0.5 * alpha + SQRT3_2 * beta;
    let c = -0.5 * alpha - SQRT3_2 * beta;
    (a, b, c)
}

/// αβ → dq: rotation by `-theta`.
pub fn park(alpha: f64, beta: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * alpha + s * beta, -s * alpha + c * beta)
}

/// dq → αβ: rotation by `theta`.
pub fn inverse_park(d: f64, q: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * d - s * q, s * d + c * q)
}

/// Wrap an angle to `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Scalar planar cross product `a_x·b_y − a_y·b_x`.
pub fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}
