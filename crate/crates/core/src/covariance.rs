use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Error covariance, either diagonal or a dense SPD matrix factored at
/// construction.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    Diagonal(Vec<f64>),
    Full(FullCovariance),
}

#[derive(Debug, Clone)]
pub struct FullCovariance {
    matrix: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl CovarianceSpec {
    pub fn diagonal(name: &str, variances: Vec<f64>) -> Result<Self> {
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { name: name.into() });
        }
        Ok(CovarianceSpec::Diagonal(variances))
    }

    pub fn scaled_identity(name: &str, n: usize, variance: f64) -> Result<Self> {
        Self::diagonal(name, vec![variance; n])
    }

    pub fn full(name: &str, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotPositiveDefinite { name: name.into() });
        }
        let n = matrix.nrows();
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite { name: name.into() });
                }
            }
        }
        let factor = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotPositiveDefinite { name: name.into() })?;
        Ok(CovarianceSpec::Full(FullCovariance { matrix, factor }))
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::Diagonal(v) => v.len(),
            CovarianceSpec::Full(f) => f.matrix.nrows(),
        }
    }

    /// `C^-1 v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        match self {
            CovarianceSpec::Diagonal(d) => v.iter().zip(d).map(|(x, s)| x / s).collect(),
            CovarianceSpec::Full(f) => f
                .factor
                .solve(&DVector::from_column_slice(v))
                .as_slice()
                .to_vec(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            CovarianceSpec::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            CovarianceSpec::Full(f) => f.matrix.clone(),
        }
    }

    /// Same covariance with rows and columns reordered: entry `i` of the
    /// result is entry `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        match self {
            CovarianceSpec::Diagonal(d) => Ok(CovarianceSpec::Diagonal(
                order.iter().map(|&i| d[i]).collect(),
            )),
            CovarianceSpec::Full(f) => {
                let n = order.len();
                let m = DMatrix::from_fn(n, n, |i, j| f.matrix[(order[i], order[j])]);
                Self::full("permuted", m)
            }
        }
    }
}
