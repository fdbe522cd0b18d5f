//! Element-wise regularization of the sample covariance (banding, tapering,
//! thresholding) and the low-rank-plus-sparse approximate factor estimator.
//!
//! Data-driven entry points use the `1/n` covariance.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::data::{DataMatrix, Scaling};
use crate::error::{invalid, Error, Result};
use crate::numerics::{hard_threshold, soft_threshold, SymmetricMatrix};
use crate::rng::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Hard,
    Soft,
}

impl ThresholdKind {
    pub fn apply(&self, x: f64, lambda: f64) -> f64 {
        match self {
            ThresholdKind::Hard => hard_threshold(x, lambda),
            ThresholdKind::Soft => soft_threshold(x, lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdLevel {
    Universal(f64),
    /// Entry-specific levels `λ_ij`, symmetric.
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub kind: ThresholdKind,
    pub level: ThresholdLevel,
    pub preserve_diagonal: bool,
}

impl ThresholdRule {
    pub fn universal(kind: ThresholdKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("threshold must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { kind, level: ThresholdLevel::Universal(lambda), preserve_diagonal: true })
    }

    pub fn adaptive(kind: ThresholdKind, lambda: DMatrix<f64>) -> Result<Self> {
        if lambda.nrows() != lambda.ncols() {
            return Err(invalid("threshold matrix must be square"));
        }
        if lambda.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("threshold matrix entries must be finite and >= 0"));
        }
        if lambda != lambda.transpose() {
            return Err(invalid("threshold matrix must be symmetric"));
        }
        Ok(Self { kind, level: ThresholdLevel::Matrix(lambda), preserve_diagonal: true })
    }

    pub fn with_diagonal_thresholded(mut self) -> Self {
        self.preserve_diagonal = false;
        self
    }

    fn lambda_at(&self, i: usize, j: usize) -> f64 {
        match &self.level {
            ThresholdLevel::Universal(l) => *l,
            ThresholdLevel::Matrix(m) => m[(i, j)],
        }
    }
}

/// Keeps entries with `|i − j| ≤ l`.
pub fn band(s: &SymmetricMatrix, l: usize) -> SymmetricMatrix {
    s.map_entries(|i, j, x| if i.abs_diff(j) <= l { x } else { 0.0 })
}

/// Indicator matrix of `|i − j| ≤ l`.
pub fn band_indicator(p: usize, l: usize) -> SymmetricMatrix {
    SymmetricMatrix::symmetrized(DMatrix::from_fn(p, p, |i, j| if i.abs_diff(j) <= l { 1.0 } else { 0.0 }))
}

/// Trapezoidal taper weights: 1 up to lag `k/2`, linear decay to 0 at lag `k`.
pub fn trapezoid_taper(p: usize, k: f64) -> Result<SymmetricMatrix> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid(format!("taper bandwidth must be positive, got {k}")));
    }
    Ok(SymmetricMatrix::symmetrized(DMatrix::from_fn(p, p, |i, j| {
        let d = i.abs_diff(j) as f64;
        (2.0 - 2.0 * d / k).clamp(0.0, 1.0)
    })))
}

/// Hadamard product `S ∘ T`.
pub fn taper(s: &SymmetricMatrix, t: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} taper", s.dim()),
            found: format!("{0}x{0}", t.dim()),
        });
    }
    Ok(s.map_entries(|i, j, x| x * t[(i, j)]))
}

pub fn threshold(s: &SymmetricMatrix, rule: &ThresholdRule) -> Result<SymmetricMatrix> {
    if let ThresholdLevel::Matrix(m) = &rule.level {
        if m.nrows() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} threshold matrix", s.dim()),
                found: format!("{0}x{0}", m.nrows()),
            });
        }
    }
    Ok(s.map_entries(|i, j, x| {
        if i == j && rule.preserve_diagonal {
            x
        } else {
            rule.kind.apply(x, rule.lambda_at(i, j))
        }
    }))
}

/// `θ̂_ij = (1/n)Σ_k [(x_ki − x̄_i)(x_kj − x̄_j) − s_ij]²` with the `1/n`
/// covariance `s_ij`.
pub fn entry_variances(x: &DataMatrix) -> DMatrix<f64> {
    let (n, p) = (x.n(), x.p());
    let xc = x.centered();
    let s = x.covariance(Scaling::Population);
    let mut theta = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = (0..n).map(|k| (xc[(k, i)] * xc[(k, j)] - s[(i, j)]).powi(2)).sum::<f64>() / n as f64;
            theta[(i, j)] = v;
            theta[(j, i)] = v;
        }
    }
    theta
}

/// Levels `λ_ij = δ·√((log p)/n · θ̂_ij)`.
pub fn adaptive_levels(x: &DataMatrix, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be finite and >= 0, got {delta}")));
    }
    let scale = (x.p() as f64).ln() / x.n() as f64;
    Ok(entry_variances(x).map(|t| delta * (scale * t).sqrt()))
}

pub const ADAPTIVE_DEFAULT_DELTA: f64 = 2.0;

pub fn adaptive_threshold(x: &DataMatrix, delta: f64, kind: ThresholdKind) -> Result<SymmetricMatrix> {
    if x.n() < 2 {
        return Err(invalid("adaptive_threshold needs n >= 2"));
    }
    let s = x.covariance(Scaling::Population);
    if x.p() == 1 {
        return Ok(s);
    }
    let rule = ThresholdRule::adaptive(kind, adaptive_levels(x, delta)?)?;
    threshold(&s, &rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMethod {
    /// Grid values are band lengths (rounded down to integers).
    Band,
    /// Grid values are universal thresholds.
    Threshold(ThresholdKind),
    /// Grid values are adaptive multipliers `δ`.
    Adaptive(ThresholdKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub num_splits: usize,
    pub train_fraction: f64,
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl CvConfig {
    pub fn new(grid: Vec<f64>, seed: u64) -> Self {
        Self { num_splits: 50, train_fraction: 0.5, grid, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub selected: f64,
    /// Mean validation loss per grid value, in grid order.
    pub scores: Vec<f64>,
}

fn regularize_with(method: CvMethod, x: &DataMatrix, value: f64) -> Result<SymmetricMatrix> {
    match method {
        CvMethod::Band => Ok(band(&x.covariance(Scaling::Population), value.max(0.0) as usize)),
        CvMethod::Threshold(kind) => {
            threshold(&x.covariance(Scaling::Population), &ThresholdRule::universal(kind, value)?)
        }
        CvMethod::Adaptive(kind) => adaptive_threshold(x, value, kind),
    }
}

/// Random-split cross-validation scored by the squared Frobenius distance
/// between the regularized training estimate and the raw validation
/// covariance. Ties go to the smallest grid value.
pub fn cv_tune(x: &DataMatrix, method: CvMethod, cfg: &CvConfig) -> Result<CvResult> {
    if cfg.grid.is_empty() {
        return Err(invalid("cross-validation grid is empty"));
    }
    if x.n() < 4 {
        return Err(invalid("cross-validation needs n >= 4"));
    }
    if cfg.num_splits == 0 || !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(invalid("cross-validation needs num_splits >= 1 and train_fraction in (0, 1)"));
    }
    let n = x.n();
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(2, n - 2);
    let tree = SeedTree::new(cfg.seed);
    let mut totals = vec![0.0; cfg.grid.len()];
    for split in 0..cfg.num_splits {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut tree.task_rng(split as u64));
        let train = x.select_rows(&idx[..n_train]);
        let valid = x.select_rows(&idx[n_train..]).covariance(Scaling::Population);
        for (g, &value) in cfg.grid.iter().enumerate() {
            let est = regularize_with(method, &train, value)?;
            totals[g] += crate::numerics::frobenius_sq(&(est.as_matrix() - valid.as_matrix()));
        }
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / cfg.num_splits as f64).collect();
    let mut best = 0;
    for g in 1..scores.len() {
        let better = scores[g] < scores[best] || (scores[g] == scores[best] && cfg.grid[g] < cfg.grid[best]);
        if better {
            best = g;
        }
    }
    Ok(CvResult { selected: cfg.grid[best], scores })
}

#[derive(Debug, Clone)]
pub struct FactorDecomposition {
    pub q: usize,
    /// `p × q`, column `i` is `√λ̂_i·ê_i`.
    pub loadings: DMatrix<f64>,
    pub residual_estimate: SymmetricMatrix,
    /// Low-rank part plus thresholded residual.
    pub estimate: SymmetricMatrix,
}

/// Leading `q` principal components plus a thresholded residual.
pub fn approx_factor(x: &DataMatrix, q: usize, rule: &ThresholdRule) -> Result<FactorDecomposition> {
    let p = x.p();
    if q > p {
        return Err(invalid(format!("number of factors {q} exceeds p = {p}")));
    }
    let s = x.covariance(Scaling::Population);
    let eig = s.eigh();
    let loadings = DMatrix::from_fn(p, q, |r, c| eig.values[c].max(0.0).sqrt() * eig.vectors[(r, c)]);
    let low_rank = SymmetricMatrix::symmetrized(&loadings * loadings.transpose());
    let residual = SymmetricMatrix::symmetrized(s.as_matrix() - low_rank.as_matrix());
    let residual_estimate = threshold(&residual, rule)?;
    let estimate = low_rank.combine(1.0, &residual_estimate, 1.0);
    Ok(FactorDecomposition { q, loadings, residual_estimate, estimate })
}
