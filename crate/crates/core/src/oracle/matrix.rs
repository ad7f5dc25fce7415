//! Observability matrix reconstructed by finite differences only.
//!
//! Row block `k` holds the state gradient of the `k`-th Lie derivative of the
//! output map along the vector field with the input held fixed. Nothing here
//! uses the closed-form conditions, so agreement with them is evidence rather
//! than tautology.

use nalgebra::{DMatrix, DVector};

use super::linalg::{determinant_and_rank, equilibrate, numerical_rank};
use crate::error::{ensure_finite, Error, Result};
use crate::machine::Dynamics;

/// Step controls for the nested finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSettings {
    /// Relative state step `h_i = gradient_step · max(1, |x_i|)` for the
    /// fourth-order central gradient stencil.
    pub gradient_step: f64,
    /// Relative state motion along the vector field used for Lie derivatives.
    pub lie_step: f64,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            gradient_step: 1e-4,
            lie_step: 1e-2,
        }
    }
}

impl FdSettings {
    pub fn with_gradient_step(self, gradient_step: f64) -> Self {
        Self { gradient_step, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityMatrix {
    pub entries: DMatrix<f64>,
    pub state_dim: usize,
    /// Number of derivative orders stacked (order 0 is the output itself).
    pub orders: usize,
}

impl ObservabilityMatrix {
    pub fn determinant_and_rank(&self, tolerance: f64) -> Result<(f64, usize)> {
        determinant_and_rank(&self.entries, tolerance)
    }

    /// Rank after row/column equilibration; insensitive to the mixed units of
    /// the state components.
    pub fn equilibrated_rank(&self, tolerance: f64) -> usize {
        numerical_rank(&equilibrate(&self.entries, 12).scaled, tolerance)
    }

    pub fn determinant(&self) -> f64 {
        self.entries.clone().full_piv_lu().determinant()
    }
}

pub fn build_observability_matrix<M, H>(
    model: &M,
    output: H,
    state: &DVector<f64>,
    input: &DVector<f64>,
    n_orders: usize,
    settings: FdSettings,
) -> Result<ObservabilityMatrix>
where
    M: Dynamics + ?Sized,
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = model.state_dim();
    if n_orders < 1 {
        return Err(Error::InvalidParameter {
            name: "n_orders",
            reason: "at least the output itself (order 0) is required".into(),
        });
    }
    if state.len() != n {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: n,
            actual: state.len(),
        });
    }
    ensure_finite("state", state.as_slice())?;
    let n_out = output(state).len();
    if n_out * n_orders != n {
        return Err(Error::DimensionMismatch {
            what: "outputs × orders must equal the state dimension",
            expected: n,
            actual: n_out * n_orders,
        });
    }

    let scales: Vec<f64> = state.iter().map(|v| v.abs().max(1.0)).collect();
    let f0 = model.derivative(state, input)?;
    let speed = f0
        .iter()
        .zip(&scales)
        .map(|(f, s)| f.abs() / s)
        .fold(0.0, f64::max);
    let tau = if speed > 0.0 { settings.lie_step / speed } else { settings.lie_step };

    let lie = LieDerivatives {
        model,
        output: &output,
        input,
        tau,
    };

    let mut entries = DMatrix::zeros(n, n);
    for order in 0..n_orders {
        for col in 0..n {
            let h = settings.gradient_step * scales[col];
            let at = |s: f64| {
                let mut x = state.clone();
                x[col] += s * h;
                lie.eval(order, &x)
            };
            let grad = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h);
            for out in 0..n_out {
                let row = order * n_out + out;
                if !grad[out].is_finite() {
                    return Err(Error::NonFiniteGradient { row, col });
                }
                entries[(row, col)] = grad[out];
            }
        }
    }
    Ok(ObservabilityMatrix {
        entries,
        state_dim: n,
        orders: n_orders,
    })
}

struct LieDerivatives<'a, M: ?Sized, H> {
    model: &'a M,
    output: &'a H,
    input: &'a DVector<f64>,
    tau: f64,
}

impl<M, H> LieDerivatives<'_, M, H>
where
    M: Dynamics + ?Sized,
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    /// `L_f^k h(x)` by a fourth-order central stencil along `f(x)`.
    fn eval(&self, order: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if order == 0 {
            return Ok((self.output)(x));
        }
        let f = self.model.derivative(x, self.input)?;
        let at = |s: f64| self.eval(order - 1, &(x + &f * (s * self.tau)));
        let d = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * self.tau);
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::LinearSystem;
    use nalgebra::dmatrix;

    #[test]
    fn linear_system_rows_are_c_then_ca() {
        let a = dmatrix![0.0, 1.0, 0.0, 0.0;
                         -3.0, -0.5, 2.0, 0.0;
                         0.0, 0.0, 0.0, 1.0;
                         1.0, 0.0, -4.0, -0.2];
        let c = dmatrix![1.0, 0.0, 0.0, 0.0; 0.0, 0.0, 1.0, 0.5];
        let sys = LinearSystem::new(a.clone(), dmatrix![0.0; 1.0; 0.0; 1.0]).unwrap();
        let cc = c.clone();
        let output = move |x: &DVector<f64>| &cc * x;
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        let u = DVector::from_vec(vec![0.4]);
        let m = build_observability_matrix(&sys, output, &x, &u, 2, FdSettings::default()).unwrap();
        let expected = DMatrix::from_rows(&[c.row(0), c.row(1), (&c * &a).row(0), (&c * &a).row(1)]);
        assert!((&m.entries - &expected).amax() < 1e-8, "{} vs {}", m.entries, expected);
    }

    #[test]
    fn row_count_must_match_state() {
        let sys = LinearSystem::autonomous(DMatrix::identity(3, 3)).unwrap();
        let out = |x: &DVector<f64>| DVector::from_vec(vec![x[0]]);
        let err = build_observability_matrix(&sys, out, &DVector::zeros(3), &DVector::zeros(0), 2, FdSettings::default())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_finite_gradient_names_entry() {
        let sys = LinearSystem::autonomous(DMatrix::identity(2, 2)).unwrap();
        let out = |x: &DVector<f64>| x.clone();
        let err = build_observability_matrix(
            &sys,
            out,
            &DVector::from_vec(vec![0.0, 1.0]),
            &DVector::zeros(0),
            1,
            FdSettings::default().with_gradient_step(0.0),
        )
        .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { row: 0, col: 0 });
    }
}
