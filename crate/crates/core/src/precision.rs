//! Sparse precision-matrix estimation: graphical lasso, maximum likelihood
//! under a zero pattern, and partial correlations.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::numerics::{cd_solve, log_det_spd, SymmetricMatrix};

pub const GLASSO_DEFAULT_TOL: f64 = 1e-6;
pub const GLASSO_DEFAULT_MAX_SWEEPS: usize = 1_000;

#[derive(Debug, Clone)]
pub struct GlassoResult {
    /// Precision estimate `Θ`.
    pub theta: SymmetricMatrix,
    /// Covariance estimate `W ≈ Θ⁻¹`.
    pub w: SymmetricMatrix,
    pub lambda: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Add `λ` to the diagonal of `W`, which penalizes the diagonal of `Θ`.
    pub penalize_diagonal: bool,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self { tol: GLASSO_DEFAULT_TOL, max_sweeps: GLASSO_DEFAULT_MAX_SWEEPS, penalize_diagonal: true }
    }
}

/// `log|Θ| − tr(SΘ) − λ·Σ_ij|θ_ij|` (diagonal included), or `−∞` when `Θ`
/// is not PD.
pub fn glasso_objective(s: &SymmetricMatrix, theta: &DMatrix<f64>, lambda: f64) -> f64 {
    match log_det_spd(theta) {
        Some(ld) => ld - (s.as_matrix() * theta).trace() - lambda * theta.iter().map(|v| v.abs()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

pub fn graphical_lasso(s: &SymmetricMatrix, lambda: f64, tol: f64) -> Result<GlassoResult> {
    graphical_lasso_with(s, lambda, &GlassoOptions { tol, ..GlassoOptions::default() })
}

/// Block coordinate descent over the columns of `W`, each column solved as a
/// lasso in `β` with `A = W₁₁`, `b = s₁₂`.
pub fn graphical_lasso_with(s: &SymmetricMatrix, lambda: f64, opts: &GlassoOptions) -> Result<GlassoResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(opts.tol > 0.0) || opts.max_sweeps == 0 {
        return Err(invalid("graphical lasso needs tol > 0 and max_sweeps >= 1"));
    }
    let p = s.dim();
    if let Some(i) = s.diagonal_vec().iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("variance of variable {i} is not positive")));
    }
    let diag_shift = if opts.penalize_diagonal { lambda } else { 0.0 };
    if lambda == 0.0 && nalgebra::Cholesky::new(s.as_matrix().clone()).is_none() {
        return Err(Error::Singular("sample covariance is singular; use lambda > 0".into()));
    }
    let mut w = s.as_matrix().clone();
    for i in 0..p {
        w[(i, i)] += diag_shift;
    }
    if p == 1 {
        let theta = SymmetricMatrix::from_diagonal(&[1.0 / w[(0, 0)]]);
        return Ok(GlassoResult { theta, w: SymmetricMatrix::symmetrized(w), lambda, iterations: 0 });
    }
    let others: Vec<Vec<usize>> = (0..p).map(|j| (0..p).filter(|&k| k != j).collect()).collect();
    let mut betas: Vec<Vec<f64>> = vec![vec![0.0; p - 1]; p];
    let mean_abs_s = {
        let mut acc = 0.0;
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    acc += s[(i, j)].abs();
                }
            }
        }
        acc / (p * (p - 1)) as f64
    };
    let threshold = opts.tol * if mean_abs_s > 0.0 { mean_abs_s } else { 1.0 };
    let mut sweeps = 0;
    let mut mean_change = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut total_change = 0.0;
        for j in 0..p {
            let idx = &others[j];
            let w11 = w.select_rows(idx).select_columns(idx);
            let b: Vec<f64> = idx.iter().map(|&k| s[(k, j)]).collect();
            cd_solve(&w11, &b, lambda, &mut betas[j], opts.tol * 1e-3, 100_000)?;
            let bv = DMatrix::from_column_slice(p - 1, 1, &betas[j]);
            let w12 = &w11 * &bv;
            for (pos, &k) in idx.iter().enumerate() {
                total_change += (w12[(pos, 0)] - w[(k, j)]).abs();
                w[(k, j)] = w12[(pos, 0)];
                w[(j, k)] = w12[(pos, 0)];
            }
        }
        mean_change = total_change / (p * (p - 1)) as f64;
        if mean_change < threshold {
            break;
        }
    }
    if mean_change >= threshold {
        return Err(Error::NotConverged {
            routine: "graphical_lasso",
            iterations: sweeps,
            residual: mean_change,
            last_iterate: w.as_slice().to_vec(),
        });
    }
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let idx = &others[j];
        let beta = &betas[j];
        let w12_beta: f64 = idx.iter().zip(beta).map(|(&k, b)| w[(k, j)] * b).sum();
        let t22 = 1.0 / (w[(j, j)] - w12_beta);
        theta[(j, j)] = t22;
        for (pos, &k) in idx.iter().enumerate() {
            theta[(k, j)] = -beta[pos] * t22;
        }
    }
    Ok(GlassoResult {
        theta: SymmetricMatrix::symmetrized(theta),
        w: SymmetricMatrix::symmetrized(w),
        lambda,
        iterations: sweeps,
    })
}

/// Off-diagonal pairs `(i, j)`, `i < j`, constrained to `ω_ij = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ZeroPattern {
    forbidden: BTreeSet<(usize, usize)>,
}

impl ZeroPattern {
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut forbidden = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= p || b >= p {
                return Err(invalid(format!("invalid forbidden edge ({a}, {b}) for p = {p}")));
            }
            forbidden.insert((a.min(b), a.max(b)));
        }
        Ok(Self { forbidden })
    }

    /// Every off-diagonal pair forbidden.
    pub fn all_off_diagonal(p: usize) -> Self {
        Self { forbidden: (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect() }
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.forbidden.contains(&(i.min(j), i.max(j)))
    }

    pub fn forbidden_edges(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.forbidden.iter()
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedMle {
    pub omega: SymmetricMatrix,
    /// `Ω⁻¹`.
    pub sigma: SymmetricMatrix,
    pub sweeps: usize,
    /// Largest `|(Ω⁻¹)_ij − s_ij|` over free entries.
    pub kkt_residual: f64,
}

/// Maximizes `log|Ω| − tr(SΩ)` with `ω_ij = 0` on the forbidden pairs, by
/// exact cyclic coordinate ascent over the free entries. `W = Ω⁻¹` is
/// carried along with rank-one and rank-two updates and refreshed once per
/// sweep.
pub fn constrained_mle(s: &SymmetricMatrix, pattern: &ZeroPattern, tol: f64, max_sweeps: usize) -> Result<ConstrainedMle> {
    let p = s.dim();
    if pattern.forbidden_edges().any(|&(_, j)| j >= p) {
        return Err(invalid("zero pattern refers to variables beyond the matrix dimension"));
    }
    if nalgebra::Cholesky::new(s.as_matrix().clone()).is_none() {
        return Err(Error::Singular("constrained MLE needs a positive-definite S".into()));
    }
    if !(tol > 0.0) || max_sweeps == 0 {
        return Err(invalid("constrained_mle needs tol > 0 and max_sweeps >= 1"));
    }
    let mut omega = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 });
    let mut w = DMatrix::from_fn(p, p, |i, j| if i == j { s[(i, i)] } else { 0.0 });
    let free: Vec<(usize, usize)> =
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| !pattern.is_forbidden(i, j)).collect();
    let kkt = |w: &DMatrix<f64>| {
        let mut r = 0.0f64;
        for i in 0..p {
            r = r.max((w[(i, i)] - s[(i, i)]).abs());
        }
        for &(i, j) in &free {
            r = r.max((w[(i, j)] - s[(i, j)]).abs());
        }
        r
    };
    let mut residual = kkt(&w);
    let mut sweeps = 0;
    while residual >= tol && sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..p {
            // ω_ii += t with t = 1/s_ii − 1/w_ii
            let t = 1.0 / s[(i, i)] - 1.0 / w[(i, i)];
            let wi = w.column(i).clone_owned();
            let denom = 1.0 + t * wi[i];
            w -= (&wi * wi.transpose()) * (t / denom);
            omega[(i, i)] += t;
        }
        for &(i, j) in &free {
            let t = offdiag_step(w[(i, i)], w[(j, j)], w[(i, j)], s[(i, j)]);
            if t == 0.0 {
                continue;
            }
            // Ω += t(e_i e_jᵀ + e_j e_iᵀ); Woodbury with U = [e_i e_j], C = [[0,t],[t,0]]
            let u = DMatrix::from_columns(&[w.column(i).clone_owned(), w.column(j).clone_owned()]);
            let (wii, wjj, wij) = (w[(i, i)], w[(j, j)], w[(i, j)]);
            // K = (C⁻¹ + Uᵀ W U)⁻¹ with C⁻¹ = [[0, 1/t], [1/t, 0]]
            let m = DMatrix::from_row_slice(2, 2, &[wii, wij + 1.0 / t, wij + 1.0 / t, wjj]);
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let k = DMatrix::from_row_slice(2, 2, &[m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det]);
            w -= &u * k * u.transpose();
            omega[(i, j)] += t;
            omega[(j, i)] += t;
        }
        w = crate::numerics::spd_inverse(&omega).map_err(|_| {
            Error::Singular("coordinate ascent lost positive definiteness".into())
        })?;
        residual = kkt(&w);
    }
    if residual >= tol {
        return Err(Error::NotConverged {
            routine: "constrained_mle",
            iterations: sweeps,
            residual,
            last_iterate: omega.as_slice().to_vec(),
        });
    }
    Ok(ConstrainedMle {
        omega: SymmetricMatrix::symmetrized(omega),
        sigma: SymmetricMatrix::symmetrized(w),
        sweeps,
        kkt_residual: residual,
    })
}

/// Maximizer over `t` of `log((1 + t·w_ij)² − t²·w_ii·w_jj) − 2t·s_ij`, the
/// change in the log-likelihood from `ω_ij += t` (and `ω_ji += t`).
fn offdiag_step(wii: f64, wjj: f64, wij: f64, sij: f64) -> f64 {
    let g = |t: f64| {
        let q = (1.0 + t * wij).powi(2) - t * t * wii * wjj;
        if q > 0.0 && 1.0 + t * wij > 0.0 {
            q.ln() - 2.0 * t * sij
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut t = 0.0f64;
    for _ in 0..100 {
        let a = 1.0 + t * wij;
        let q = a * a - t * t * wii * wjj;
        let dq = 2.0 * a * wij - 2.0 * t * wii * wjj;
        let d2q = 2.0 * wij * wij - 2.0 * wii * wjj;
        let grad = dq / q - 2.0 * sij;
        let hess = d2q / q - (dq / q).powi(2);
        if grad.abs() < 1e-15 || hess >= 0.0 {
            break;
        }
        let mut step = -grad / hess;
        let base = g(t);
        while g(t + step) < base + 1e-4 * step * grad && step.abs() > 1e-300 {
            step *= 0.5;
        }
        t += step;
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// `ρ_ij = −ω_ij/√(ω_ii·ω_jj)`, unit diagonal.
pub fn partial_correlations(omega: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let d = omega.diagonal_vec();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("precision diagonal entry {i} is not positive")));
    }
    Ok(omega.map_entries(|i, j, x| if i == j { 1.0 } else { -x / (d[i] * d[j]).sqrt() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs_diff, soft_threshold, spd_inverse};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(p: usize, rng: &mut impl Rng) -> SymmetricMatrix {
        let a = DMatrix::from_fn(p, 2 * p, |_, _| rng.random_range(-1.0..1.0));
        SymmetricMatrix::symmetrized(&a * a.transpose() / (2 * p) as f64 + DMatrix::identity(p, p) * 0.05)
    }

    #[test]
    fn glasso_diagonal_input() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, 2.0, 4.0]);
        for lambda in [0.0, 0.3] {
            let res = graphical_lasso(&s, lambda, 1e-8).unwrap();
            let expected = SymmetricMatrix::from_diagonal(&[1.0 / (1.0 + lambda), 1.0 / (2.0 + lambda), 1.0 / (4.0 + lambda)]);
            assert!(max_abs_diff(res.theta.as_matrix(), expected.as_matrix()) < 1e-14);
        }
    }

    #[test]
    fn glasso_zero_lambda_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let s = random_pd(5, &mut rng);
        let res = graphical_lasso(&s, 0.0, 1e-10).unwrap();
        let inv = spd_inverse(s.as_matrix()).unwrap();
        assert!(max_abs_diff(res.theta.as_matrix(), &inv) < 1e-6);
        let singular = SymmetricMatrix::symmetrized(DMatrix::from_element(2, 2, 1.0));
        assert!(graphical_lasso(&singular, 0.0, 1e-8).is_err());
        assert!(graphical_lasso(&singular, 0.1, 1e-8).is_ok());
    }

    /// Proximal gradient ascent on the penalized likelihood with step halving
    /// to keep iterates PD and the objective non-decreasing.
    fn glasso_oracle(s: &SymmetricMatrix, lambda: f64) -> DMatrix<f64> {
        let p = s.dim();
        let mut x = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / (s[(i, i)] + lambda) } else { 0.0 });
        let smooth = |m: &DMatrix<f64>| log_det_spd(m).map(|ld| ld - (s.as_matrix() * m).trace());
        let mut step = 1.0;
        for _ in 0..20_000 {
            let grad = spd_inverse(&x).unwrap() - s.as_matrix();
            let fx = smooth(&x).unwrap();
            loop {
                let y = (&x + &grad * step).map(|v| soft_threshold(v, step * lambda));
                let d = &y - &x;
                if let Some(fy) = smooth(&y) {
                    if fy >= fx + grad.dot(&d) - crate::numerics::frobenius_sq(&d) / (2.0 * step) {
                        x = SymmetricMatrix::symmetrized(y).into_inner();
                        break;
                    }
                }
                step *= 0.5;
            }
            step = (step * 1.5).min(10.0);
        }
        x
    }

    #[test]
    fn glasso_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..4 {
            let s = random_pd(4, &mut rng);
            let res = graphical_lasso(&s, 0.1, 1e-8).unwrap();
            let oracle = glasso_oracle(&s, 0.1);
            let a = glasso_objective(&s, res.theta.as_matrix(), 0.1);
            let b = glasso_objective(&s, &oracle, 0.1);
            assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn glasso_diagonal_of_w_is_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let s = random_pd(4, &mut rng);
        let res = graphical_lasso(&s, 0.2, 1e-8).unwrap();
        for i in 0..4 {
            assert_eq!(res.w[(i, i)], s[(i, i)] + 0.2);
        }
    }

    #[test]
    fn constrained_trivial_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let s = random_pd(4, &mut rng);
        let all = constrained_mle(&s, &ZeroPattern::all_off_diagonal(4), 1e-10, 1000).unwrap();
        let expected = SymmetricMatrix::from_diagonal(&s.diagonal_vec().iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        assert!(max_abs_diff(all.omega.as_matrix(), expected.as_matrix()) < 1e-12);
        let none = constrained_mle(&s, &ZeroPattern::default(), 1e-11, 1000).unwrap();
        assert!(max_abs_diff(none.omega.as_matrix(), &spd_inverse(s.as_matrix()).unwrap()) < 1e-8);
    }

    #[test]
    fn constrained_matches_analytic_three_variable_case() {
        // with ω_13 = 0 the fitted covariance keeps s on free entries and
        // sets σ_13 = s_12·s_23/s_22 (conditional independence of 1 and 3)
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..5 {
            let s = random_pd(3, &mut rng);
            let res = constrained_mle(&s, &ZeroPattern::new(3, [(0, 2)]).unwrap(), 1e-12, 1000).unwrap();
            let mut sigma = s.as_matrix().clone();
            sigma[(0, 2)] = s[(0, 1)] * s[(1, 2)] / s[(1, 1)];
            sigma[(2, 0)] = sigma[(0, 2)];
            let oracle = spd_inverse(&sigma).unwrap();
            assert!(oracle[(0, 2)].abs() < 1e-12);
            assert!(max_abs_diff(res.omega.as_matrix(), &oracle) < 1e-5);
            assert_eq!(res.omega[(0, 2)], 0.0);
        }
    }

    #[test]
    fn partial_correlation_examples() {
        let om = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0])).unwrap();
        assert!((partial_correlations(&om).unwrap()[(0, 1)] - 0.5).abs() < 1e-15);
        let d = partial_correlations(&SymmetricMatrix::from_diagonal(&[2.0, 3.0])).unwrap();
        assert_eq!(d, SymmetricMatrix::identity(2));
        assert!(partial_correlations(&SymmetricMatrix::from_diagonal(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn chain_model_partial_correlation_vanishes() {
        // AR(1) chain 1–2–3 with coefficient 0.6
        let r = 0.6f64;
        let sigma = DMatrix::from_fn(3, 3, |i, j| r.powi(i.abs_diff(j) as i32));
        let omega = SymmetricMatrix::symmetrized(spd_inverse(&sigma).unwrap());
        let rho = partial_correlations(&omega).unwrap();
        assert!(rho[(0, 2)].abs() < 1e-10);
        assert!(sigma[(0, 2)].abs() > 0.3);
    }
}
