use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar signal of time with an analytic first derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarProfile {
    Constant { value: f64 },
    /// Shape-preserving cubic Hermite through the knots; held flat outside them.
    Breakpoints { times: Vec<f64>, values: Vec<f64> },
    /// `start · c / (t + c)`, with `c` chosen so the value reaches `end` at `duration`.
    Hyperbolic { start: f64, end: f64, duration: f64 },
}

impl ScalarProfile {
    pub fn ramp(t0: f64, v0: f64, t1: f64, v1: f64) -> Self {
        ScalarProfile::Breakpoints {
            times: vec![t0, t1],
            values: vec![v0, v1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarProfile::Constant { value } => finite("value", *value),
            ScalarProfile::Breakpoints { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Profile(format!(
                        "breakpoints need matching non-empty times/values (got {} and {})",
                        times.len(),
                        values.len()
                    )));
                }
                if times.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::Profile("breakpoints must be finite".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Profile("breakpoint times must be strictly increasing".into()));
                }
                Ok(())
            }
            ScalarProfile::Hyperbolic { start, end, duration } => {
                finite("start", *start)?;
                finite("end", *end)?;
                if !(*duration > 0.0 && duration.is_finite()) {
                    return Err(Error::Profile("hyperbolic law needs a positive duration".into()));
                }
                if start * end <= 0.0 || end.abs() >= start.abs() {
                    return Err(Error::Profile(format!(
                        "hyperbolic law decays toward zero: need |end| < |start| with equal signs (got {start} → {end})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Value and time derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            ScalarProfile::Constant { value } => (*value, 0.0),
            ScalarProfile::Breakpoints { times, values } => hermite(times, values, t),
            ScalarProfile::Hyperbolic { start, end, duration } => {
                let c = end * duration / (start - end);
                let v = start * c / (t + c);
                (v, -v / (t + c))
            }
        }
    }

    /// Values at which the signal attains its extremes over `[0, duration]`.
    /// The interpolant never overshoots its knots, so these bound it.
    pub fn extremes(&self, duration: f64) -> (f64, f64) {
        let pts: Vec<f64> = match self {
            ScalarProfile::Constant { value } => vec![*value],
            ScalarProfile::Breakpoints { times, values } => {
                let mut v: Vec<f64> = times
                    .iter()
                    .zip(values)
                    .filter(|(t, _)| **t > 0.0 && **t < duration)
                    .map(|(_, v)| *v)
                    .collect();
                v.push(self.eval(0.0).0);
                v.push(self.eval(duration).0);
                v
            }
            ScalarProfile::Hyperbolic { .. } => vec![self.eval(0.0).0, self.eval(duration).0],
        };
        let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Profile(format!("`{name}` must be finite")))
    }
}

/// Fritsch–Carlson slopes; end slopes are the adjacent secants so two knots
/// give an exact straight line.
fn slopes(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = values.windows(2).zip(&h).map(|(w, h)| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m
}

pub(crate) fn hermite(times: &[f64], values: &[f64], t: f64) -> (f64, f64) {
    let n = times.len();
    if n == 1 || t < times[0] {
        return (values[0], 0.0);
    }
    if t > times[n - 1] {
        return (values[n - 1], 0.0);
    }
    let k = (times.partition_point(|x| *x <= t) - 1).min(n - 2);
    let m = slopes(times, values);
    hermite_segment(times[k], times[k + 1], values[k], values[k + 1], m[k], m[k + 1], t)
}

pub(crate) fn hermite_segment(t0: f64, t1: f64, y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> (f64, f64) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let slope = d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1;
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_knots_are_a_line() {
        let p = ScalarProfile::ramp(0.0, -2.0, 0.05, 2.0);
        for k in 0..=10 {
            let t = 0.005 * k as f64;
            let (v, dv) = p.eval(t);
            assert_relative_eq!(v, -2.0 + 80.0 * t, epsilon = 1e-12);
            assert_relative_eq!(dv, 80.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn hyperbolic_endpoints() {
        let p = ScalarProfile::Hyperbolic {
            start: 0.4,
            end: 0.1,
            duration: 0.05,
        };
        p.validate().unwrap();
        assert_relative_eq!(p.eval(0.0).0, 0.4, max_relative = 1e-14);
        assert_relative_eq!(p.eval(0.05).0, 0.1, max_relative = 1e-14);
    }

    #[test]
    fn rejects_unsorted_knots() {
        let p = ScalarProfile::Breakpoints {
            times: vec![0.0, 0.2, 0.1],
            values: vec![0.0, 1.0, 2.0],
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_growing_hyperbola() {
        let p = ScalarProfile::Hyperbolic {
            start: 0.1,
            end: 0.4,
            duration: 0.05,
        };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            v in proptest::collection::vec(-5.0..5.0f64, 4),
            t in 0.01..0.29f64,
        ) {
            let p = ScalarProfile::Breakpoints { times: vec![0.0, 0.1, 0.2, 0.3], values: v };
            let h = 1e-7;
            let fd = (p.eval(t + h).0 - p.eval(t - h).0) / (2.0 * h);
            let (_, d) = p.eval(t);
            prop_assert!((fd - d).abs() < 1e-5 * d.abs().max(1.0));
        }

        #[test]
        fn no_overshoot(v in proptest::collection::vec(-5.0..5.0f64, 5), t in 0.0..0.4f64) {
            let p = ScalarProfile::Breakpoints { times: vec![0.0, 0.1, 0.2, 0.3, 0.4], values: v.clone() };
            let (lo, hi) = p.extremes(0.4);
            let x = p.eval(t).0;
            prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }
}
