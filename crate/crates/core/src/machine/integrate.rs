use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};

/// Time-invariant input-affine or general state model `dx/dt = f(x, u)`.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<T: Dynamics + ?Sized> Dynamics for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).derivative(x, u)
    }
}

/// `dx/dt = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                what: "A must be square",
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "rows of B",
                expected: a.nrows(),
                actual: b.nrows(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn autonomous(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, DMatrix::zeros(n, 0))
    }
}

impl Dynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.a * x + &self.b * u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: DVector<f64>,
    pub derivative: DVector<f64>,
    pub input: DVector<f64>,
}

/// Uniformly sampled simulation record. Sample `k` sits at `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// A zero-length run holding only the initial record.
    pub fn single<M, U>(model: &M, x0: DVector<f64>, input: U, dt: f64) -> Result<Self>
    where
        M: Dynamics + ?Sized,
        U: Fn(f64) -> DVector<f64>,
    {
        let u = input(0.0);
        let derivative = model.derivative(&x0, &u)?;
        Ok(Self {
            dt,
            samples: vec![Sample {
                time: 0.0,
                state: x0,
                derivative,
                input: u,
            }],
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }
}

/// One classical RK4 step of length `h` starting at time `t`.
pub fn rk4_step<M, U>(model: &M, x: &DVector<f64>, t: f64, h: f64, input: &U) -> Result<DVector<f64>>
where
    M: Dynamics + ?Sized,
    U: Fn(f64) -> DVector<f64>,
{
    let u0 = input(t);
    let um = input(t + 0.5 * h);
    let u1 = input(t + h);
    let k1 = model.derivative(x, &u0)?;
    let k2 = model.derivative(&(x + &k1 * (0.5 * h)), &um)?;
    let k3 = model.derivative(&(x + &k2 * (0.5 * h)), &um)?;
    let k4 = model.derivative(&(x + &k3 * h), &u1)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Fixed-step RK4 integration over `n_steps` steps of `dt`.
///
/// Every sample stores the state, the model derivative at that state and the
/// input applied there, so the derivative record can be re-evaluated exactly.
pub fn integrate<M, U>(model: &M, x0: DVector<f64>, input: U, dt: f64, n_steps: usize) -> Result<Trajectory>
where
    M: Dynamics + ?Sized,
    U: Fn(f64) -> DVector<f64>,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be finite and > 0 (got {dt})"),
        });
    }
    if n_steps < 1 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: "at least one step is required".into(),
        });
    }
    if x0.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: model.state_dim(),
            actual: x0.len(),
        });
    }
    ensure_finite("initial state", x0.as_slice())?;

    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let u = input(t);
        let derivative = model.derivative(&x, &u).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { step: k, time: t },
            other => other,
        })?;
        let next = if k < n_steps {
            Some(rk4_step(model, &x, t, dt, &input).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { step: k + 1, time: t + dt },
                other => other,
            })?)
        } else {
            None
        };
        samples.push(Sample {
            time: t,
            state: x,
            derivative,
            input: u,
        });
        if let Some(next) = next {
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step: k + 1,
                    time: t + dt,
                });
            }
            x = next;
        } else {
            break;
        }
    }
    Ok(Trajectory { dt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn oscillator(omega: f64) -> LinearSystem {
        LinearSystem::autonomous(dmatrix![0.0, 1.0; -omega * omega, 0.0]).unwrap()
    }

    #[test]
    fn equilibrium_stays_put() {
        let sys = oscillator(3.0);
        let traj = integrate(&sys, DVector::zeros(2), |_| DVector::zeros(0), 1e-3, 50).unwrap();
        assert!(traj.samples.iter().all(|s| s.state.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_step_gives_two_samples() {
        let sys = oscillator(1.0);
        let traj = integrate(&sys, DVector::from_vec(vec![1.0, 0.0]), |_| DVector::zeros(0), 0.1, 1).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.samples[1].time, 0.1);
    }

    #[test]
    fn rejects_bad_step() {
        let sys = oscillator(1.0);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        assert!(integrate(&sys, x0.clone(), |_| DVector::zeros(0), 0.0, 1).is_err());
        assert!(integrate(&sys, x0, |_| DVector::zeros(0), 0.1, 0).is_err());
    }

    #[test]
    fn divergence_names_step() {
        let sys = LinearSystem::autonomous(dmatrix![1e3]).unwrap();
        let err = integrate(&sys, DVector::from_vec(vec![1.0]), |_| DVector::zeros(0), 1.0, 1000).unwrap_err();
        match err {
            Error::Diverged { step, .. } => assert!(step > 1 && step < 1000),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // x'' = -ω² x, exact x = cos ωt
        let omega = 2.0;
        let sys = oscillator(omega);
        let t_end = 2.0;
        let err = |n: usize| {
            let dt = t_end / n as f64;
            let traj = integrate(&sys, DVector::from_vec(vec![1.0, 0.0]), |_| DVector::zeros(0), dt, n).unwrap();
            (traj.last().state[0] - (omega * t_end).cos()).abs()
        };
        let (e1, e2) = (err(40), err(80));
        let slope = (e1 / e2).log2();
        assert!((3.7..=4.3).contains(&slope), "observed order {slope}");
    }

    #[test]
    fn halving_step_against_fine_reference() {
        // Richardson-style check against a dt/8 reference run.
        let sys = LinearSystem::autonomous(dmatrix![0.0, 1.0; -4.0, -0.3]).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 0.5]);
        let run = |n: usize| {
            integrate(&sys, x0.clone(), |_| DVector::zeros(0), 1.0 / n as f64, n)
                .unwrap()
                .last()
                .state
                .clone()
        };
        let reference = run(20 * 8);
        let e1 = (run(20) - &reference).norm();
        let e2 = (run(40) - &reference).norm();
        let ratio = e1 / e2;
        assert!((13.0..=19.0).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn stored_derivative_is_model_derivative() {
        let sys = LinearSystem::new(dmatrix![0.0, 1.0; -4.0, -0.3], dmatrix![0.0; 1.0]).unwrap();
        let input = |t: f64| DVector::from_vec(vec![(3.0 * t).sin()]);
        let traj = integrate(&sys, DVector::from_vec(vec![0.2, 0.0]), input, 1e-2, 100).unwrap();
        for s in &traj.samples {
            assert_eq!(s.derivative, sys.derivative(&s.state, &s.input).unwrap());
            assert_eq!(s.input, input(s.time));
        }
    }
}
