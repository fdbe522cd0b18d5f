//! Shared numeric kernels: the symmetric-matrix newtype, a sorted symmetric
//! eigendecomposition, soft thresholding, a cyclic coordinate-descent lasso
//! solver for penalized quadratics, and projection onto the PSD cone.
//!
//! Everything here is a pure function of its inputs.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used to accept a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A square, finite, symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Validates squareness, finiteness and symmetry
    /// (`|m_ij - m_ji| <= 1e-12 * max(1, |m_ij|)`), then stores the exact
    /// symmetric average so downstream code sees bitwise symmetry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.nrows() == 0 {
            return Err(invalid("matrix must have positive dimension"));
        }
        let p = m.nrows();
        for j in 0..p {
            for i in 0..p {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for j in 0..p {
            for i in (j + 1)..p {
                let diff = (m[(i, j)] - m[(j, i)]).abs();
                if diff > SYMMETRY_TOL * m[(i, j)].abs().max(1.0) {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Replaces `m` by `(m + mᵀ)/2` without validation. Use only for matrices
    /// that are symmetric up to floating-point rounding by construction.
    pub fn symmetrized(mut m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrized: matrix must be square");
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self(m)
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigh(&self) -> EigenDecomposition {
        eigh_symmetric(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal_vec(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    /// Entrywise map that preserves symmetry when `f(i, j, x) == f(j, i, x)`.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let p = self.dim();
        let mut out = self.0.clone();
        for j in 0..p {
            for i in j..p {
                let v = f(i, j, self.0[(i, j)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SymmetricMatrix, b: f64) -> Self {
        Self(&self.0 * a + &other.0 * b)
    }
}

impl Deref for SymmetricMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Eigenvalues sorted in descending order with matching orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `P · diag(f(λ)) · Pᵀ`, symmetrized.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        SymmetricMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(|x| x)
    }
}

/// Symmetric eigendecomposition of a general matrix, rejecting inputs that are
/// not symmetric within [`SYMMETRY_TOL`].
pub fn eigh(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let s = SymmetricMatrix::new(m.clone())?;
    Ok(s.eigh())
}

fn eigh_symmetric(m: &DMatrix<f64>) -> EigenDecomposition {
    let p = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..p).collect();
    // stable: equal eigenvalues keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigenDecomposition { values, vectors }
}

/// `sign(x) · max(|x| − λ, 0)`.
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// `x · 1(|x| > λ)`.
#[inline]
pub fn hard_threshold(x: f64, lambda: f64) -> f64 {
    if x.abs() > lambda {
        x
    } else {
        0.0
    }
}

/// The problem `min_β ½βᵀAβ − βᵀb + λ‖β‖₁` with `A` symmetric PSD.
#[derive(Debug, Clone)]
pub struct PenalizedQuadraticProblem {
    quadratic: DMatrix<f64>,
    linear: DVector<f64>,
    penalty: f64,
}

impl PenalizedQuadraticProblem {
    pub fn new(quadratic: DMatrix<f64>, linear: DVector<f64>, penalty: f64) -> Result<Self> {
        if !(penalty >= 0.0) || !penalty.is_finite() {
            return Err(invalid(format!("lasso penalty must be finite and >= 0, got {penalty}")));
        }
        if quadratic.nrows() != linear.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("linear term of length {}", quadratic.nrows()),
                found: format!("{}", linear.len()),
            });
        }
        let a = SymmetricMatrix::new(quadratic)?;
        let min_eig = a.min_eigenvalue();
        if min_eig < -1e-10 {
            return Err(invalid(format!(
                "quadratic term must be PSD, smallest eigenvalue is {min_eig:e}"
            )));
        }
        Ok(Self { quadratic: a.into_inner(), linear, penalty })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.quadratic
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.quadratic * beta)) - beta.dot(&self.linear)
            + self.penalty * beta.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest violation of the lasso optimality conditions at `beta`.
    pub fn kkt_residual(&self, beta: &DVector<f64>) -> f64 {
        kkt_residual_raw(&self.quadratic, self.linear.as_slice(), self.penalty, beta.as_slice())
    }
}

pub(crate) fn kkt_residual_raw(a: &DMatrix<f64>, b: &[f64], lambda: f64, beta: &[f64]) -> f64 {
    let p = b.len();
    let mut worst = 0.0f64;
    for j in 0..p {
        let g: f64 = (0..p).map(|k| a[(j, k)] * beta[k]).sum::<f64>() - b[j];
        let r = if beta[j] != 0.0 {
            (g + lambda * beta[j].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub max_change: f64,
    pub kkt_residual: f64,
}

pub const LASSO_DEFAULT_TOL: f64 = 1e-8;
pub const LASSO_DEFAULT_MAX_ITER: usize = 10_000;

/// Cyclic coordinate descent for [`PenalizedQuadraticProblem`]. Converged
/// when the largest coordinate change in a full sweep is below `tol`.
pub fn lasso_cd(
    prob: &PenalizedQuadraticProblem,
    init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LassoSolution> {
    if init.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("initial point of length {}", prob.dim()),
            found: format!("{}", init.len()),
        });
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("lasso_cd requires tol > 0 and max_iter >= 1"));
    }
    let mut beta = init.as_slice().to_vec();
    let run = cd_solve(&prob.quadratic, prob.linear.as_slice(), prob.penalty, &mut beta, tol, max_iter)?;
    let kkt = kkt_residual_raw(&prob.quadratic, prob.linear.as_slice(), prob.penalty, &beta);
    if !run.converged {
        return Err(Error::NotConverged {
            routine: "lasso_cd",
            iterations: run.sweeps,
            residual: run.max_change,
            last_iterate: beta,
        });
    }
    Ok(LassoSolution { beta: DVector::from_vec(beta), sweeps: run.sweeps, max_change: run.max_change, kkt_residual: kkt })
}

pub(crate) struct CdRun {
    pub sweeps: usize,
    pub max_change: f64,
    pub converged: bool,
}

/// In-place coordinate descent on `½βᵀAβ − βᵀb + λ‖β‖₁`, warm-started from
/// `beta`. Callers are responsible for `A` being symmetric PSD.
pub(crate) fn cd_solve(
    a: &DMatrix<f64>,
    b: &[f64],
    lambda: f64,
    beta: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CdRun> {
    let p = b.len();
    // grad holds A·β
    let mut grad: Vec<f64> = (0..p).map(|j| (0..p).map(|k| a[(j, k)] * beta[k]).sum()).collect();
    let mut max_change = f64::INFINITY;
    for sweep in 1..=max_iter {
        max_change = 0.0;
        for j in 0..p {
            let ajj = a[(j, j)];
            let partial = b[j] - (grad[j] - ajj * beta[j]);
            let new = if ajj > 0.0 {
                soft_threshold(partial, lambda) / ajj
            } else if partial.abs() <= lambda {
                0.0
            } else {
                return Err(invalid(format!(
                    "penalized quadratic is unbounded below along coordinate {j}"
                )));
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                for k in 0..p {
                    grad[k] += a[(k, j)] * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return Ok(CdRun { sweeps: sweep, max_change, converged: true });
        }
    }
    Ok(CdRun { sweeps: max_iter, max_change, converged: false })
}

/// Projects onto `{X : X ⪰ floor·I}` by clipping eigenvalues from below.
/// Inputs already in the set are returned unchanged.
pub fn psd_project(s: &SymmetricMatrix, floor: f64) -> Result<SymmetricMatrix> {
    if !(floor >= 0.0) || !floor.is_finite() {
        return Err(invalid(format!("eigenvalue floor must be finite and >= 0, got {floor}")));
    }
    let eig = s.eigh();
    if eig.values.iter().all(|&v| v >= floor) {
        return Ok(s.clone());
    }
    Ok(eig.reconstruct_with(|v| v.max(floor)))
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// `log det` of a symmetric positive-definite matrix, or `None` when the
/// Cholesky factorization fails.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}
