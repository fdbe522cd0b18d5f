//! Rotation-equivariant (Stein) and linear shrinkage covariance estimators.
//!
//! Scaling: `haff_estimate`, `rblw_intensity`, `diag_target_intensity` and
//! `stein_shrink` take a covariance supplied by the caller; the data-driven
//! estimators build it themselves. `ledoit_wolf` uses `S = (1/n)·XᵀX`,
//! `schafer_strimmer` uses the unbiased `1/(n − 1)` covariance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::{DataMatrix, Scaling};
use crate::error::{invalid, Result};
use crate::numerics::{log_det_spd, EigenDecomposition, SymmetricMatrix};

/// Eigenvalue-shrunk covariance `P·diag(ψ)·Pᵀ`.
#[derive(Debug, Clone)]
pub struct SteinEstimate {
    /// Corrected eigenvalues, non-increasing and nonnegative.
    pub psi: Vec<f64>,
    /// Sample eigenvalues in descending order.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors (columns), matching `lambda`.
    pub vectors: DMatrix<f64>,
    /// Raw denominators `α_i` before pooling.
    pub alpha: Vec<f64>,
}

impl SteinEstimate {
    pub fn estimate(&self) -> SymmetricMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.psi[k];
        }
        SymmetricMatrix::symmetrized(scaled * self.vectors.transpose())
    }
}

/// Shrinkage target of a linear estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TargetKind {
    Identity,
    ScaledIdentity,
    DiagS,
    SsA,
    SsB,
    SsC,
    SsD,
    SsE,
    SsF,
}

impl TargetKind {
    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::Identity => "identity",
            TargetKind::ScaledIdentity => "scaled_identity",
            TargetKind::DiagS => "diag_s",
            TargetKind::SsA => "ss_a",
            TargetKind::SsB => "ss_b",
            TargetKind::SsC => "ss_c",
            TargetKind::SsD => "ss_d",
            TargetKind::SsE => "ss_e",
            TargetKind::SsF => "ss_f",
        }
    }
}

/// `intensity·T + (1 − intensity)·S`.
#[derive(Debug, Clone)]
pub struct LinearShrinkageEstimate {
    pub target_kind: TargetKind,
    pub intensity: f64,
    pub target: SymmetricMatrix,
    pub estimate: SymmetricMatrix,
}

impl LinearShrinkageEstimate {
    fn new(target_kind: TargetKind, intensity: f64, target: SymmetricMatrix, s: &SymmetricMatrix) -> Self {
        let estimate = target.combine(intensity, s, 1.0 - intensity);
        Self { target_kind, intensity, target, estimate }
    }
}

/// Ingredients of the Ledoit–Wolf estimator, with `‖A‖² = tr(AAᵀ)/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LwComponents {
    pub m: f64,
    pub d2: f64,
    pub b2: f64,
}

fn descending_eigen(s: &SymmetricMatrix) -> EigenDecomposition {
    s.eigh()
}

/// Stein's entropy-loss eigenvalue correction with pooling of adjacent
/// eigenvalues whenever a denominator is nonpositive or the order of the
/// corrected values is violated.
pub fn stein_shrink(s: &SymmetricMatrix, n: usize) -> Result<SteinEstimate> {
    if n < 2 {
        return Err(invalid("stein_shrink needs n >= 2"));
    }
    let p = s.dim();
    let eig = descending_eigen(s);
    let lambda: Vec<f64> = eig.values.iter().copied().collect();
    let mean = (lambda.iter().sum::<f64>() / p as f64).abs().max(f64::MIN_POSITIVE);

    let mut jittered = lambda.clone();
    for i in 1..p {
        if jittered[i - 1] - jittered[i] < 1e-12 {
            jittered[i] = jittered[i - 1] - 1e-10 * mean;
        }
    }
    let nf = n as f64;
    let alpha: Vec<f64> = (0..p)
        .map(|i| {
            let cross: f64 = (0..p).filter(|&j| j != i).map(|j| 1.0 / (jittered[i] - jittered[j])).sum();
            nf - p as f64 + 1.0 + 2.0 * jittered[i] * cross
        })
        .collect();
    let numer: Vec<f64> = lambda.iter().map(|&l| l.max(0.0)).collect();
    let psi = pool_adjacent(&numer, &alpha, nf);
    Ok(SteinEstimate { psi, lambda, vectors: eig.vectors, alpha })
}

#[derive(Clone, Copy)]
struct Block {
    len: usize,
    sum_lambda: f64,
    sum_alpha: f64,
}

impl Block {
    fn psi(&self, n: f64) -> f64 {
        n * self.sum_lambda / self.sum_alpha
    }
}

/// Stack-based pooling over `λ` sorted descending. Pooled values are
/// `n·Σλ / Σα` over each block.
fn pool_adjacent(lambda: &[f64], alpha: &[f64], n: f64) -> Vec<f64> {
    let mut blocks: Vec<Block> = Vec::with_capacity(lambda.len());
    for (&l, &a) in lambda.iter().zip(alpha) {
        blocks.push(Block { len: 1, sum_lambda: l, sum_alpha: a });
        while blocks.len() > 1 {
            let top = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            let merge = top.sum_alpha <= 0.0 || prev.sum_alpha <= 0.0 || prev.psi(n) < top.psi(n);
            if !merge {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            last.len += top.len;
            last.sum_lambda += top.sum_lambda;
            last.sum_alpha += top.sum_alpha;
        }
    }
    let mut psi = Vec::with_capacity(lambda.len());
    for b in &blocks {
        let v = if b.sum_alpha > 0.0 { b.psi(n) } else { 0.0 };
        psi.extend(std::iter::repeat_n(v.max(0.0), b.len));
    }
    psi
}

/// Empirical Bayes estimator.
#[derive(Debug, Clone)]
pub struct HaffEstimate {
    pub estimate: SymmetricMatrix,
    /// Leading coefficient `(np − 2n − 2)/(n²p)` after flooring at zero.
    pub coefficient: f64,
    /// `det(S)^{1/p}`, zero when `S` is singular.
    pub det_root: f64,
    /// Set when the raw coefficient was negative and floored.
    pub floored: bool,
}

pub fn haff_estimate(s: &SymmetricMatrix, n: usize) -> Result<HaffEstimate> {
    if n < 3 {
        return Err(invalid("haff_estimate needs n >= 3"));
    }
    let (nf, pf) = (n as f64, s.dim() as f64);
    let raw = (nf * pf - 2.0 * nf - 2.0) / (nf * nf * pf);
    let floored = raw < 0.0;
    let coefficient = raw.max(0.0);
    let det_root = log_det_spd(s.as_matrix()).map(|ld| (ld / pf).exp()).unwrap_or(0.0);
    let estimate = SymmetricMatrix::identity(s.dim()).combine(coefficient * det_root, s, nf / (nf + 1.0));
    Ok(HaffEstimate { estimate, coefficient, det_root, floored })
}

/// Ledoit–Wolf shrinkage toward `m·I`.
pub fn ledoit_wolf(x: &DataMatrix) -> Result<(LinearShrinkageEstimate, LwComponents)> {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return Err(invalid("ledoit_wolf needs n >= 2"));
    }
    let xc = x.centered();
    let s = SymmetricMatrix::symmetrized(xc.transpose() * &xc / n as f64);
    let pf = p as f64;
    let m = s.trace() / pf;
    let s_fro2: f64 = s.iter().map(|v| v * v).sum();
    // ‖S − mI‖² = (‖S‖_F² − 2m·tr S + m²p)/p
    let d2 = ((s_fro2 - 2.0 * m * s.trace() + m * m * pf) / pf).max(0.0);
    let mut bbar2 = 0.0;
    for k in 0..n {
        let row = xc.row(k).transpose();
        let sq = row.norm_squared();
        let quad = (s.as_matrix() * &row).dot(&row);
        bbar2 += (sq * sq - 2.0 * quad + s_fro2) / pf;
    }
    bbar2 = (bbar2 / (n * n) as f64).max(0.0);
    let b2 = bbar2.min(d2);
    let target = SymmetricMatrix::identity(p).scaled(m);
    let intensity = if d2 > 0.0 { b2 / d2 } else { 0.0 };
    let comps = LwComponents { m, d2, b2 };
    if d2 == 0.0 {
        return Ok((
            LinearShrinkageEstimate { target_kind: TargetKind::ScaledIdentity, intensity, target, estimate: s },
            comps,
        ));
    }
    Ok((LinearShrinkageEstimate::new(TargetKind::ScaledIdentity, intensity, target, &s), comps))
}

fn tr_sq(s: &SymmetricMatrix) -> f64 {
    s.iter().map(|v| v * v).sum()
}

/// Rao–Blackwellized intensity toward `(tr S/p)·I`.
pub fn rblw_intensity(s: &SymmetricMatrix, n: usize) -> Result<f64> {
    if n < 2 || s.dim() < 2 {
        return Err(invalid("rblw_intensity needs n >= 2 and p >= 2"));
    }
    let (nf, pf) = (n as f64, s.dim() as f64);
    let tr = s.trace();
    let t2 = tr_sq(s);
    let denom = (nf + 2.0) * (t2 - tr * tr / pf);
    if denom <= 1e-12 {
        return Ok(1.0);
    }
    Ok((((nf - 2.0) / nf * t2 + tr * tr) / denom).clamp(0.0, 1.0))
}

pub fn rblw_estimate(s: &SymmetricMatrix, n: usize) -> Result<LinearShrinkageEstimate> {
    let intensity = rblw_intensity(s, n)?;
    let target = SymmetricMatrix::identity(s.dim()).scaled(s.trace() / s.dim() as f64);
    Ok(LinearShrinkageEstimate::new(TargetKind::ScaledIdentity, intensity, target, s))
}

/// Optimal intensity toward `Diag(S)`.
pub fn diag_target_intensity(s: &SymmetricMatrix, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid("diag_target_intensity needs n >= 2"));
    }
    let (nf, pf) = (n as f64, s.dim() as f64);
    let tr = s.trace();
    let a1 = tr / pf;
    let a2 = nf * nf / ((nf - 1.0) * (nf + 2.0)) / pf * (tr_sq(s) - tr * tr / nf);
    let t2: f64 = s.diagonal_vec().iter().map(|v| v * v).sum();
    let a2_star = nf / (nf + 2.0) * t2 / pf;
    let num = (a2 + pf * a1 * a1) / nf - 2.0 / nf * a2_star;
    let denom = (nf + 1.0) / nf * a2 + pf / nf * a1 * a1 - (nf + 2.0) / nf * a2_star;
    if denom <= 1e-12 {
        return Ok(1.0);
    }
    Ok((num / denom).clamp(0.0, 1.0))
}

pub fn diag_target_estimate(s: &SymmetricMatrix, n: usize) -> Result<LinearShrinkageEstimate> {
    let intensity = diag_target_intensity(s, n)?;
    let target = SymmetricMatrix::from_diagonal(&s.diagonal_vec());
    Ok(LinearShrinkageEstimate::new(TargetKind::DiagS, intensity, target, s))
}

/// Targets of the Schäfer–Strimmer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsTarget {
    /// Diagonal, unit variance.
    A,
    /// Diagonal, common variance.
    B,
    /// Common variance and common covariance.
    C,
    /// Diagonal, unequal variance.
    D,
    /// Perfect positive correlation.
    E,
    /// Constant correlation.
    F,
}

impl SsTarget {
    pub fn kind(&self) -> TargetKind {
        match self {
            SsTarget::A => TargetKind::SsA,
            SsTarget::B => TargetKind::SsB,
            SsTarget::C => TargetKind::SsC,
            SsTarget::D => TargetKind::SsD,
            SsTarget::E => TargetKind::SsE,
            SsTarget::F => TargetKind::SsF,
        }
    }
}

impl std::str::FromStr for SsTarget {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(SsTarget::A),
            "B" => Ok(SsTarget::B),
            "C" => Ok(SsTarget::C),
            "D" => Ok(SsTarget::D),
            "E" => Ok(SsTarget::E),
            "F" => Ok(SsTarget::F),
            other => Err(invalid(format!("unknown target '{other}', expected one of A-F"))),
        }
    }
}

/// Unbiased estimates of `var(s_ij)` and `cov(s_ii, s_ij)` built from the
/// per-observation products `w_kij = (x_ki − x̄_i)(x_kj − x̄_j)`.
pub struct EntryMoments {
    n: usize,
    xc: DMatrix<f64>,
}

impl EntryMoments {
    pub fn new(x: &DataMatrix) -> Self {
        Self { n: x.n(), xc: x.centered() }
    }

    fn factor(&self) -> f64 {
        let nf = self.n as f64;
        nf / (nf - 1.0).powi(3)
    }

    /// `v̂ar(s_ij)`.
    pub fn var(&self, i: usize, j: usize) -> f64 {
        self.cov_pair((i, j), (i, j))
    }

    /// `ĉov(s_ab, s_cd)`.
    pub fn cov_pair(&self, (a, b): (usize, usize), (c, d): (usize, usize)) -> f64 {
        let n = self.n;
        let w1: Vec<f64> = (0..n).map(|k| self.xc[(k, a)] * self.xc[(k, b)]).collect();
        let w2: Vec<f64> = (0..n).map(|k| self.xc[(k, c)] * self.xc[(k, d)]).collect();
        let m1 = w1.iter().sum::<f64>() / n as f64;
        let m2 = w2.iter().sum::<f64>() / n as f64;
        self.factor() * w1.iter().zip(&w2).map(|(u, v)| (u - m1) * (v - m2)).sum::<f64>()
    }
}

/// Schäfer–Strimmer shrinkage with the closed-form intensity of the chosen
/// target, on the unbiased covariance.
pub fn schafer_strimmer(x: &DataMatrix, target: SsTarget) -> Result<LinearShrinkageEstimate> {
    let (n, p) = (x.n(), x.p());
    if n < 3 {
        return Err(invalid("schafer_strimmer needs n >= 3"));
    }
    let s = x.covariance(Scaling::Unbiased);
    let diag = s.diagonal_vec();
    if matches!(target, SsTarget::E | SsTarget::F) {
        if let Some(i) = diag.iter().position(|&v| !(v > 0.0)) {
            return Err(invalid(format!("target {target:?} needs positive variances; variable {i} has {}", diag[i])));
        }
    }
    let mom = EntryMoments::new(x);
    let pf = p as f64;
    let v = diag.iter().sum::<f64>() / pf;
    let off_pairs = (p * (p - 1)) as f64;
    let c = if p > 1 {
        (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| s[(i, j)]).sum::<f64>()
            / off_pairs
    } else {
        0.0
    };
    let rbar = if p > 1 && matches!(target, SsTarget::F) {
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    acc += s[(i, j)] / (diag[i] * diag[j]).sqrt();
                }
            }
        }
        acc / off_pairs
    } else {
        0.0
    };

    let t = match target {
        SsTarget::A => SymmetricMatrix::identity(p),
        SsTarget::B => SymmetricMatrix::identity(p).scaled(v),
        SsTarget::C => s.map_entries(|i, j, _| if i == j { v } else { c }),
        SsTarget::D => SymmetricMatrix::from_diagonal(&diag),
        SsTarget::E => s.map_entries(|i, j, x| if i == j { x } else { (diag[i] * diag[j]).sqrt() }),
        SsTarget::F => s.map_entries(|i, j, x| if i == j { x } else { rbar * (diag[i] * diag[j]).sqrt() }),
    };

    let mut var_off = 0.0;
    let mut var_diag = 0.0;
    let mut f_sum = 0.0;
    for i in 0..p {
        var_diag += mom.var(i, i);
        for j in (i + 1)..p {
            // ordered pairs (i, j) and (j, i) contribute equally
            var_off += 2.0 * mom.var(i, j);
            if matches!(target, SsTarget::E | SsTarget::F) {
                let cii = mom.cov_pair((i, i), (i, j));
                let cjj = mom.cov_pair((j, j), (i, j));
                let f = 0.5 * ((diag[j] / diag[i]).sqrt() * cii + (diag[i] / diag[j]).sqrt() * cjj);
                f_sum += 2.0 * f;
            }
        }
    }
    let off_sq = |f: &dyn Fn(usize, usize) -> f64| {
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    acc += (s[(i, j)] - f(i, j)).powi(2);
                }
            }
        }
        acc
    };
    let (num, denom) = match target {
        SsTarget::A => (var_off + var_diag, off_sq(&|_, _| 0.0) + diag.iter().map(|d| (d - 1.0).powi(2)).sum::<f64>()),
        SsTarget::B => (var_off + var_diag, off_sq(&|_, _| 0.0) + diag.iter().map(|d| (d - v).powi(2)).sum::<f64>()),
        SsTarget::C => (var_off + var_diag, off_sq(&|_, _| c) + diag.iter().map(|d| (d - v).powi(2)).sum::<f64>()),
        SsTarget::D => (var_off, off_sq(&|_, _| 0.0)),
        SsTarget::E => (var_off - f_sum, off_sq(&|i, j| (diag[i] * diag[j]).sqrt())),
        SsTarget::F => (var_off - rbar * f_sum, off_sq(&|i, j| rbar * (diag[i] * diag[j]).sqrt())),
    };
    let intensity = if denom <= 1e-300 { 1.0 } else { (num / denom).clamp(0.0, 1.0) };
    Ok(LinearShrinkageEstimate::new(target.kind(), intensity, t, &s))
}
