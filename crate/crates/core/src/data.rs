//! The `n × p` observation matrix every estimator starts from.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::numerics::SymmetricMatrix;

/// Normalization of the sample covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `1/n` (maximum likelihood).
    Population,
    /// `1/(n − 1)` (unbiased).
    Unbiased,
}

/// `n` observations (rows) of `p` variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("data matrix must have at least one row and one column"));
        }
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                if !x[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(x))
    }

    pub fn from_row_slice(n: usize, p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", n * p),
                found: format!("{}", values.len()),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, values))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.0.column_iter().map(|c| c.sum() / n))
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let means = self.column_means();
        let mut xc = self.0.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        xc
    }

    /// Sample covariance of the column-centered data.
    pub fn covariance(&self, scaling: Scaling) -> SymmetricMatrix {
        let xc = self.centered();
        let denom = match scaling {
            Scaling::Population => self.n() as f64,
            Scaling::Unbiased => (self.n() as f64 - 1.0).max(1.0),
        };
        SymmetricMatrix::symmetrized(xc.transpose() * &xc / denom)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix(self.0.select_rows(rows))
    }

    /// `n × p` matrix of iid `N(0, 1)` entries.
    pub fn standard_normal(n: usize, p: usize, rng: &mut impl Rng) -> DataMatrix {
        DataMatrix(DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal)))
    }

    /// `n` draws from `N(0, Σ)` using the Cholesky factor of `Σ`.
    pub fn gaussian(n: usize, sigma: &SymmetricMatrix, rng: &mut impl Rng) -> Result<DataMatrix> {
        let chol = nalgebra::Cholesky::new(sigma.as_matrix().clone())
            .ok_or_else(|| Error::Singular("population covariance is not positive definite".into()))?;
        let z = DMatrix::from_fn(n, sigma.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(DataMatrix(z * chol.l().transpose()))
    }
}

/// Correlation matrix `D^{-1/2} S D^{-1/2}`; requires a positive diagonal.
pub fn correlation_from_covariance(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let d = s.diagonal_vec();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("variance of variable {i} is not positive")));
    }
    let inv_sd: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    Ok(s.map_entries(|i, j, x| if i == j { 1.0 } else { x * inv_sd[i] * inv_sd[j] }))
}
