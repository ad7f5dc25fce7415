use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{integrate, Dynamics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramianSettings {
    /// Perturbation size relative to each state's scale `max(1, |x_i|)`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Integration window \[s\].
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_delta() -> f64 {
    1e-4
}

fn default_window() -> f64 {
    0.05
}

impl Default for GramianSettings {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            window: default_window(),
        }
    }
}

/// Spectrum of an empirical observability Gramian, expressed in scaled state
/// coordinates `x_i / max(1, |x0_i|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianSummary {
    pub window: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub min_singular_value: f64,
    pub max_singular_value: f64,
    /// `σ_max / σ_min`; infinite when singular.
    pub condition_number: f64,
    /// Direction of the smallest singular value, unit norm, largest component positive.
    pub unobservable_direction: Vec<f64>,
}

impl GramianSummary {
    /// `σ_min / σ_max`, zero for an all-zero Gramian.
    pub fn ratio(&self) -> f64 {
        if self.max_singular_value > 0.0 {
            self.min_singular_value / self.max_singular_value
        } else {
            0.0
        }
    }
}

/// Empirical observability Gramian from ±δ initial-state perturbations.
///
/// Each state component is perturbed in both directions, the model is
/// re-simulated with the same input, and the central output differences are
/// integrated (trapezoidal rule) as outer products over the window.
pub fn empirical_gramian<M, H, U>(
    model: &M,
    output: H,
    x0: &DVector<f64>,
    input: U,
    dt: f64,
    settings: &GramianSettings,
) -> Result<GramianSummary>
where
    M: Dynamics + Sync + ?Sized,
    H: Fn(&DVector<f64>) -> DVector<f64> + Sync,
    U: Fn(f64) -> DVector<f64> + Sync,
{
    if !(settings.delta > 0.0 && settings.delta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be finite and > 0 (got {})", settings.delta),
        });
    }
    if !(dt > 0.0 && settings.window >= dt) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window {} must cover at least one step of {dt}", settings.window),
        });
    }
    let n = model.state_dim();
    let steps = (settings.window / dt).round() as usize;

    let sensitivities: Vec<Vec<DVector<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let h = settings.delta * x0[i].abs().max(1.0);
            let run = |sign: f64| {
                let mut x = x0.clone();
                x[i] += sign * h;
                integrate(model, x, &input, dt, steps)
            };
            let plus = run(1.0)?;
            let minus = run(-1.0)?;
            Ok(plus
                .samples
                .iter()
                .zip(&minus.samples)
                .map(|(a, b)| (output(&a.state) - output(&b.state)) / (2.0 * settings.delta))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut w = DMatrix::zeros(n, n);
    for k in 0..=steps {
        let weight = if k == 0 || k == steps { 0.5 * dt } else { dt };
        for i in 0..n {
            for j in i..n {
                let v = weight * sensitivities[i][k].dot(&sensitivities[j][k]);
                w[(i, j)] += v;
                if i != j {
                    w[(j, i)] += v;
                }
            }
        }
    }
    Ok(summarize(&w, steps as f64 * dt))
}

fn summarize(w: &DMatrix<f64>, window: f64) -> GramianSummary {
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..w.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let singular_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].abs()).collect();
    let smallest = *order.last().expect("non-empty state");
    let mut direction: Vec<f64> = eig.eigenvectors.column(smallest).iter().copied().collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pivot = direction
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    direction.iter_mut().for_each(|v| *v *= sign / norm);

    let max = singular_values[0];
    let min = *singular_values.last().expect("non-empty state");
    GramianSummary {
        window,
        condition_number: if min > 0.0 { max / min } else { f64::INFINITY },
        singular_values,
        min_singular_value: min,
        max_singular_value: max,
        unobservable_direction: direction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::LinearSystem;
    use nalgebra::dmatrix;

    #[test]
    fn zero_output_gives_zero_spectrum() {
        let sys = LinearSystem::autonomous(dmatrix![0.0, 1.0; -1.0, 0.0]).unwrap();
        let g = empirical_gramian(
            &sys,
            |_: &DVector<f64>| DVector::zeros(1),
            &DVector::from_vec(vec![1.0, 0.0]),
            |_| DVector::zeros(0),
            1e-3,
            &GramianSettings::default(),
        )
        .unwrap();
        assert!(g.singular_values.iter().all(|s| *s == 0.0));
        assert_eq!(g.ratio(), 0.0);
        assert!((g.unobservable_direction.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unobserved_integrator_is_detected() {
        // x1 never reaches the output
        let sys = LinearSystem::autonomous(dmatrix![-1.0, 0.0; 0.0, -2.0]).unwrap();
        let g = empirical_gramian(
            &sys,
            |x: &DVector<f64>| DVector::from_vec(vec![x[0]]),
            &DVector::from_vec(vec![0.5, 0.5]),
            |_| DVector::zeros(0),
            1e-3,
            &GramianSettings { delta: 1e-4, window: 1.0 },
        )
        .unwrap();
        assert!(g.ratio() < 1e-12);
        assert!((g.unobservable_direction[1] - 1.0).abs() < 1e-10);
        let sorted = g.singular_values.windows(2).all(|w| w[0] >= w[1]);
        assert!(sorted);
    }

    #[test]
    fn matches_analytic_scalar_gramian() {
        // y = x, dx/dt = -a x  ->  W = ∫ e^{-2at} dt = (1 - e^{-2aT}) / 2a
        let a = 3.0;
        let sys = LinearSystem::autonomous(dmatrix![-a]).unwrap();
        let g = empirical_gramian(
            &sys,
            |x: &DVector<f64>| x.clone(),
            &DVector::from_vec(vec![0.0]),
            |_| DVector::zeros(0),
            1e-4,
            &GramianSettings { delta: 1e-3, window: 0.5 },
        )
        .unwrap();
        let exact = (1.0 - (-2.0 * a * 0.5f64).exp()) / (2.0 * a);
        assert!((g.max_singular_value - exact).abs() / exact < 1e-6);
    }
}
