//! Sparse covariance estimators that stay positive definite: a log-barrier
//! penalized correlation estimator and an alternating-direction augmented
//! Lagrangian method with an eigenvalue floor.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::numerics::{cd_solve, psd_project, soft_threshold, SymmetricMatrix};

pub const LOGBARRIER_DEFAULT_TAU: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct LogBarrierResult {
    /// Covariance estimate `D^{1/2}·Θ·D^{1/2}` with `D = diag(S)`.
    pub sigma: SymmetricMatrix,
    /// Estimated correlation-scale matrix `Θ`.
    pub theta: SymmetricMatrix,
    pub sweeps: usize,
}

/// `‖Θ − R‖_F²/2 − τ·log|Θ| + λ·Σ_{i≠j}|θ_ij|`, or `+∞` when `Θ` is not PD.
pub fn logbarrier_objective(theta: &DMatrix<f64>, r: &DMatrix<f64>, lambda: f64, tau: f64) -> f64 {
    let Some(ld) = crate::numerics::log_det_spd(theta) else {
        return f64::INFINITY;
    };
    let p = theta.nrows();
    let mut off = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                off += theta[(i, j)].abs();
            }
        }
    }
    0.5 * crate::numerics::frobenius_sq(&(theta - r)) - tau * ld + lambda * off
}

/// Log-barrier estimator on the correlation scale, rescaled by the sample
/// standard deviations. Cyclic column updates starting from `Θ = Ω = I`.
pub fn logbarrier_estimate(
    s: &SymmetricMatrix,
    lambda: f64,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LogBarrierResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tau > 0.0 && tau.is_finite()) || !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("logbarrier needs tau > 0, tol > 0 and max_iter >= 1"));
    }
    let d = s.diagonal_vec();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("variance of variable {i} is not positive")));
    }
    let r = crate::data::correlation_from_covariance(s)?;
    let p = s.dim();
    let mut sig = DMatrix::<f64>::identity(p, p);
    let mut om = DMatrix::<f64>::identity(p, p);
    let others: Vec<Vec<usize>> = (0..p).map(|j| (0..p).filter(|&k| k != j).collect()).collect();
    let mut sweeps = 0;
    let mut converged = p == 1;
    let mut change = 0.0;
    if p == 1 {
        // scalar stationarity: θ² − r·θ − τ = 0 with r = 1
        sig[(0, 0)] = 0.5 * (1.0 + (1.0 + 4.0 * tau).sqrt());
    }
    while !converged && sweeps < max_iter {
        sweeps += 1;
        change = 0.0f64;
        for j in 0..p {
            let idx = &others[j];
            let sjj = r[(j, j)] + tau * om[(j, j)];
            let om_sub = om.select_rows(idx).select_columns(idx);
            let a = DMatrix::<f64>::identity(p - 1, p - 1) + &om_sub * (tau / sjj);
            let b: Vec<f64> = idx.iter().map(|&k| r[(k, j)]).collect();
            let mut beta: Vec<f64> = idx.iter().map(|&k| sig[(k, j)]).collect();
            cd_solve(&a, &b, lambda, &mut beta, tol * 1e-2, 10_000)?;
            change = change.max((sjj - sig[(j, j)]).abs());
            sig[(j, j)] = sjj;
            for (pos, &k) in idx.iter().enumerate() {
                change = change.max((beta[pos] - sig[(k, j)]).abs());
                sig[(k, j)] = beta[pos];
                sig[(j, k)] = beta[pos];
            }
            let bv = DMatrix::from_column_slice(p - 1, 1, &beta);
            let om_col = -(&om_sub * &bv) / sjj;
            let dot: f64 = (0..p - 1).map(|k| beta[k] * om_col[(k, 0)]).sum();
            om[(j, j)] = (1.0 - dot) / sjj;
            for (pos, &k) in idx.iter().enumerate() {
                om[(k, j)] = om_col[(pos, 0)];
                om[(j, k)] = om_col[(pos, 0)];
            }
        }
        converged = change < tol;
    }
    if !converged {
        return Err(Error::NotConverged {
            routine: "logbarrier_estimate",
            iterations: sweeps,
            residual: change,
            last_iterate: sig.as_slice().to_vec(),
        });
    }
    let theta = SymmetricMatrix::symmetrized(sig);
    let sd: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let sigma = theta.map_entries(|i, j, x| x * sd[i] * sd[j]);
    Ok(LogBarrierResult { sigma, theta, sweeps })
}

#[derive(Debug, Clone)]
pub struct AdmmProblem {
    pub s: SymmetricMatrix,
    pub lambda: f64,
    /// Eigenvalue floor of the returned estimate.
    pub epsilon: f64,
    pub mu: f64,
    /// Also soft-threshold the diagonal.
    pub penalize_diagonal: bool,
}

impl AdmmProblem {
    /// Defaults: `μ = 1`, `ε = 1e-4·mean(diag S)`, off-diagonal penalty.
    pub fn new(s: SymmetricMatrix, lambda: f64) -> Self {
        let epsilon = 1e-4 * s.trace() / s.dim() as f64;
        Self { s, lambda, epsilon: epsilon.max(0.0), mu: 1.0, penalize_diagonal: false }
    }

    /// `‖M − S‖_F²/2 + λ|M|₁` over the configured penalty scope.
    pub fn objective(&self, m: &DMatrix<f64>) -> f64 {
        admm_objective(&self.s, m, self.lambda, self.penalize_diagonal)
    }
}

pub fn admm_objective(s: &SymmetricMatrix, m: &DMatrix<f64>, lambda: f64, penalize_diagonal: bool) -> f64 {
    let p = s.dim();
    let mut pen = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j || penalize_diagonal {
                pen += m[(i, j)].abs();
            }
        }
    }
    0.5 * crate::numerics::frobenius_sq(&(m - s.as_matrix())) + lambda * pen
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    /// The eigenvalue-floored iterate `Θ`.
    pub theta: SymmetricMatrix,
    /// The sparse iterate `Σ`.
    pub sigma: SymmetricMatrix,
    pub iterations: usize,
    /// `‖Θ − Σ‖_max` at termination.
    pub primal_residual: f64,
}

/// Alternating-direction iterations from `Σ⁰ = S`, `Λ⁰ = 0`. Stops once both
/// `‖Θ − Σ‖_max` and the change in `Σ` fall below `tol`.
pub fn admm_estimate(prob: &AdmmProblem, tol: f64, max_iter: usize) -> Result<AdmmResult> {
    if !(prob.mu > 0.0 && prob.mu.is_finite()) {
        return Err(invalid(format!("mu must be positive, got {}", prob.mu)));
    }
    if !(prob.epsilon >= 0.0) || !(prob.lambda >= 0.0 && prob.lambda.is_finite()) {
        return Err(invalid("admm needs epsilon >= 0 and lambda >= 0"));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("admm needs tol > 0 and max_iter >= 1"));
    }
    let mu = prob.mu;
    let p = prob.s.dim();
    let s = prob.s.as_matrix();
    let mut sigma = s.clone();
    let mut dual = DMatrix::<f64>::zeros(p, p);
    let mut theta = sigma.clone();
    let mut primal = f64::INFINITY;
    for it in 1..=max_iter {
        theta = psd_project(&SymmetricMatrix::symmetrized(&sigma + &dual * mu), prob.epsilon)?.into_inner();
        let z = (s - &dual) * mu + &theta;
        let mut next = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..p {
                let v = if i != j || prob.penalize_diagonal { soft_threshold(z[(i, j)], mu * prob.lambda) } else { z[(i, j)] };
                next[(i, j)] = v / (1.0 + mu);
            }
        }
        let step = crate::numerics::max_abs_diff(&next, &sigma);
        sigma = next;
        dual -= (&theta - &sigma) / mu;
        primal = crate::numerics::max_abs_diff(&theta, &sigma);
        if primal < tol && step < tol {
            return Ok(AdmmResult {
                theta: SymmetricMatrix::symmetrized(theta),
                sigma: SymmetricMatrix::symmetrized(sigma),
                iterations: it,
                primal_residual: primal,
            });
        }
    }
    Err(Error::NotConverged {
        routine: "admm_estimate",
        iterations: max_iter,
        residual: primal,
        last_iterate: theta.as_slice().to_vec(),
    })
}

fn soft_scope(m: &SymmetricMatrix, lambda: f64, penalize_diagonal: bool) -> SymmetricMatrix {
    m.map_entries(|i, j, x| if i != j || penalize_diagonal { soft_threshold(x, lambda) } else { x })
}

/// Baseline: clip eigenvalues at `ε`, then soft-threshold. The result is
/// sparse but need not satisfy the eigenvalue floor.
pub fn clip_then_threshold(prob: &AdmmProblem) -> Result<SymmetricMatrix> {
    let clipped = psd_project(&prob.s, prob.epsilon)?;
    Ok(soft_scope(&clipped, prob.lambda, prob.penalize_diagonal))
}

/// Baseline: soft-threshold, then clip eigenvalues at `ε`. Always feasible.
pub fn threshold_then_clip(prob: &AdmmProblem) -> Result<SymmetricMatrix> {
    psd_project(&soft_scope(&prob.s, prob.lambda, prob.penalize_diagonal), prob.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logbarrier_identity_scalar_root() {
        let tau = 0.01;
        let res = logbarrier_estimate(&SymmetricMatrix::identity(3), 0.0, tau, 1e-12, 10_000).unwrap();
        let theta = (1.0 + (1.0 + 4.0 * tau).sqrt()) / 2.0;
        assert!((theta * theta - theta - tau).abs() < 1e-15);
        for i in 0..3 {
            assert!((res.theta[(i, i)] - theta).abs() < 1e-10);
        }
        assert!((theta - 1.00990).abs() < 1e-5);
    }

    #[test]
    fn logbarrier_large_lambda_kills_off_diagonal() {
        let s = SymmetricMatrix::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.8, 0.3, 0.8, 1.0, 0.2, 0.3, 0.2, 3.0])).unwrap();
        let res = logbarrier_estimate(&s, 10.0, 1e-4, 1e-10, 10_000).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(res.theta[(i, j)], 0.0);
                }
            }
        }
        assert!(res.sigma.min_eigenvalue() > 0.0);
    }

    fn random_correlation(p: usize, rng: &mut impl Rng) -> SymmetricMatrix {
        let a = DMatrix::from_fn(p, p + 3, |_, _| rng.random_range(-1.0..1.0));
        let s = SymmetricMatrix::symmetrized(&a * a.transpose());
        crate::data::correlation_from_covariance(&s).unwrap()
    }

    /// Proximal gradient with backtracking that keeps iterates PD.
    fn prox_oracle(r: &DMatrix<f64>, lambda: f64, tau: f64) -> DMatrix<f64> {
        let p = r.nrows();
        let mut x = DMatrix::<f64>::identity(p, p);
        let smooth = |m: &DMatrix<f64>| {
            crate::numerics::log_det_spd(m).map(|ld| 0.5 * crate::numerics::frobenius_sq(&(m - r)) - tau * ld)
        };
        let mut step = 1.0;
        for _ in 0..20_000 {
            let inv = crate::numerics::spd_inverse(&x).unwrap();
            let grad = &x - r - inv * tau;
            let fx = smooth(&x).unwrap();
            loop {
                let mut y = &x - &grad * step;
                for j in 0..p {
                    for i in 0..p {
                        if i != j {
                            y[(i, j)] = soft_threshold(y[(i, j)], step * lambda);
                        }
                    }
                }
                let d = &y - &x;
                if let Some(fy) = smooth(&y) {
                    if fy <= fx + grad.dot(&d) + crate::numerics::frobenius_sq(&d) / (2.0 * step) {
                        x = y;
                        break;
                    }
                }
                step *= 0.5;
            }
            step = (step * 1.5).min(1.0);
        }
        x
    }

    #[test]
    fn logbarrier_matches_prox_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let r = random_correlation(3, &mut rng);
            let (lambda, tau) = (0.1, 0.05);
            let res = logbarrier_estimate(&r, lambda, tau, 1e-12, 100_000).unwrap();
            let oracle = prox_oracle(r.as_matrix(), lambda, tau);
            let a = logbarrier_objective(res.theta.as_matrix(), r.as_matrix(), lambda, tau);
            let b = logbarrier_objective(&oracle, r.as_matrix(), lambda, tau);
            assert!((a - b).abs() <= 1e-4 && a <= b + 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn logbarrier_rescaling_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let r = random_correlation(4, &mut rng);
        let d = [4.0f64, 0.25, 1.0, 9.0];
        let s = r.map_entries(|i, j, x| x * (d[i] * d[j]).sqrt());
        let on_s = logbarrier_estimate(&s, 0.1, 1e-3, 1e-12, 100_000).unwrap();
        let on_r = logbarrier_estimate(&r, 0.1, 1e-3, 1e-12, 100_000).unwrap();
        let rescaled = on_r.theta.map_entries(|i, j, x| x * (d[i] * d[j]).sqrt());
        assert!(max_abs_diff(on_s.sigma.as_matrix(), rescaled.as_matrix()) < 1e-10);
        assert!(logbarrier_estimate(&SymmetricMatrix::from_diagonal(&[1.0, 0.0]), 0.1, 1e-3, 1e-8, 10).is_err());
    }

    #[test]
    fn admm_diagonal_examples() {
        let s = SymmetricMatrix::from_diagonal(&[2.0, 3.0]);
        let mut prob = AdmmProblem::new(s.clone(), 0.0);
        prob.epsilon = 0.0;
        let res = admm_estimate(&prob, 1e-9, 10_000).unwrap();
        assert!(max_abs_diff(res.theta.as_matrix(), s.as_matrix()) < 1e-8);

        prob.lambda = 1.0;
        let res = admm_estimate(&prob, 1e-9, 10_000).unwrap();
        assert!(max_abs_diff(res.theta.as_matrix(), s.as_matrix()) < 1e-8);
        prob.penalize_diagonal = true;
        let res = admm_estimate(&prob, 1e-9, 10_000).unwrap();
        // 1-D: argmin (x − s)²/2 + |x| = s − 1
        let oracle: Vec<f64> = [2.0f64, 3.0]
            .iter()
            .map(|&sv| {
                (0..=40_000).map(|k| k as f64 * 1e-4).fold((f64::INFINITY, 0.0), |(best, arg), x| {
                    let f = 0.5 * (x - sv).powi(2) + x.abs();
                    if f < best { (f, x) } else { (best, arg) }
                }).1
            })
            .collect();
        assert!((res.theta[(0, 0)] - oracle[0]).abs() < 1e-3 && (res.theta[(1, 1)] - oracle[1]).abs() < 1e-3);
        assert!(max_abs_diff(res.theta.as_matrix(), SymmetricMatrix::from_diagonal(&[1.0, 2.0]).as_matrix()) < 1e-8);
    }

    #[test]
    fn admm_beats_baseline_on_correlated_pair() {
        let s = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0])).unwrap();
        let prob = AdmmProblem::new(s, 0.5);
        let res = admm_estimate(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(res.primal_residual < DEFAULT_TOL);
        assert!(res.theta.min_eigenvalue() >= prob.epsilon - 1e-8);
        let base = threshold_then_clip(&prob).unwrap();
        assert!(prob.objective(res.theta.as_matrix()) <= prob.objective(base.as_matrix()) + 1e-6);
        let literal = clip_then_threshold(&prob).unwrap();
        if literal.min_eigenvalue() >= prob.epsilon - 1e-8 {
            assert!(prob.objective(res.theta.as_matrix()) <= prob.objective(literal.as_matrix()) + 1e-6);
        }
    }

    #[test]
    fn admm_rejects_bad_mu() {
        let mut prob = AdmmProblem::new(SymmetricMatrix::identity(2), 0.1);
        prob.mu = 0.0;
        assert!(admm_estimate(&prob, 1e-7, 10).is_err());
    }
}
