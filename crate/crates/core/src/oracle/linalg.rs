use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Determinant (pivoted LU) and numerical rank (singular values above
/// `tolerance · σ_max`).
pub fn determinant_and_rank(matrix: &DMatrix<f64>, tolerance: f64) -> Result<(f64, usize)> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            what: "determinant needs a square matrix",
            expected: matrix.nrows(),
            actual: matrix.ncols(),
        });
    }
    let det = matrix.clone().full_piv_lu().determinant();
    Ok((det, numerical_rank(matrix, tolerance)))
}

/// Singular values in descending order.
pub fn singular_values(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn numerical_rank(matrix: &DMatrix<f64>, tolerance: f64) -> usize {
    let sv = singular_values(matrix);
    let Some(&largest) = sv.first() else {
        return 0;
    };
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tolerance * largest).count()
}

/// Row and column scaling factors that bring every row and column to unit
/// max-abs norm (alternating square-root scaling, then one exact pass). Scaling by positive
/// diagonals leaves the rank unchanged and multiplies the determinant by the
/// product of the factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibration {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub scaled: DMatrix<f64>,
}

pub fn equilibrate(matrix: &DMatrix<f64>, sweeps: usize) -> Equilibration {
    let (m, n) = matrix.shape();
    let mut rows = vec![1.0; m];
    let mut cols = vec![1.0; n];
    let mut a = matrix.clone();
    for _ in 0..sweeps {
        for i in 0..m {
            let r = a.row(i).amax();
            if r > 0.0 {
                let f = 1.0 / r.sqrt();
                a.row_mut(i).scale_mut(f);
                rows[i] *= f;
            }
        }
        for j in 0..n {
            let c = a.column(j).amax();
            if c > 0.0 {
                let f = 1.0 / c.sqrt();
                a.column_mut(j).scale_mut(f);
                cols[j] *= f;
            }
        }
    }
    for i in 0..m {
        let r = a.row(i).amax();
        if r > 0.0 {
            a.row_mut(i).scale_mut(1.0 / r);
            rows[i] /= r;
        }
    }
    for j in 0..n {
        let c = a.column(j).amax();
        if c > 0.0 {
            a.column_mut(j).scale_mut(1.0 / c);
            cols[j] /= c;
        }
    }
    Equilibration { rows, cols, scaled: a }
}
