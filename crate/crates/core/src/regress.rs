//! Multivariate regression `Y = XB + E`: least squares, reduced rank,
//! penalized fits, and joint sparse estimation of `B` and the error
//! precision matrix.
//!
//! No intercept is fitted; center the columns beforehand if one is wanted.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::numerics::{cd_solve, kkt_residual_raw, log_det_spd, SymmetricMatrix};
use crate::precision::{graphical_lasso_with, GlassoOptions};

#[derive(Debug, Clone)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} response rows", x.nrows()),
                found: format!("{}", y.nrows()),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(invalid("regression needs non-empty X and Y"));
        }
        for (name, m) in [("X", &x), ("Y", &y)] {
            if let Some(k) = m.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("{name} has a non-finite entry at ({}, {})", k % m.nrows(), k / m.nrows())));
            }
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    fn gram(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.x
    }

    fn cross(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.y
    }

    /// `tr[(Y − XB)ᵀ(Y − XB)]`.
    pub fn rss(&self, b: &DMatrix<f64>) -> f64 {
        crate::numerics::frobenius_sq(&(&self.y - &self.x * b))
    }

    /// `(1/n)(Y − XB)ᵀ(Y − XB)`.
    pub fn residual_covariance(&self, b: &DMatrix<f64>) -> SymmetricMatrix {
        let r = &self.y - &self.x * b;
        SymmetricMatrix::symmetrized(r.transpose() * &r / self.n() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub b: DMatrix<f64>,
    /// `(1/n)(Y − XB̂)ᵀ(Y − XB̂)`.
    pub sigma: SymmetricMatrix,
}

fn gram_cholesky(data: &RegressionData) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let gram = data.gram();
    let scale = gram.diagonal().amax();
    let singular = || Error::Singular("XᵀX is singular; use a penalized fit such as ridge or lasso".into());
    let chol = Cholesky::new(gram).ok_or_else(singular)?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * scale) {
        return Err(singular());
    }
    Ok(chol)
}

pub fn ols(data: &RegressionData) -> Result<OlsFit> {
    let chol = gram_cholesky(data)?;
    let b = chol.solve(&data.cross());
    let sigma = data.residual_covariance(&b);
    Ok(OlsFit { b, sigma })
}

/// `B̂_r = B̂_OLS·H·Hᵀ` with `H` the top-`r` eigenvectors of
/// `YᵀX(XᵀX)⁻¹XᵀY`.
pub fn reduced_rank(data: &RegressionData, r: usize) -> Result<DMatrix<f64>> {
    let max_rank = data.p().min(data.q());
    if r == 0 || r > max_rank {
        return Err(invalid(format!("rank must lie in 1..={max_rank}, got {r}")));
    }
    let b_ols = ols(data)?.b;
    let m = SymmetricMatrix::symmetrized(data.cross().transpose() * &b_ols);
    let eig = m.eigh();
    let h = eig.vectors.columns(0, r).clone_owned();
    Ok(b_ols * &h * h.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Lasso,
    Ridge,
    /// `α·Σ|b| + (1 − α)/2·Σb²`, `α ∈ (0, 1)`.
    ElasticNet { alpha: f64 },
    /// `Σ|b|^γ`, `γ ∈ [1, 2]`.
    Bridge { gamma: f64 },
    /// `Σ_j ‖B_j·‖₂` over rows.
    GroupLasso,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        match kind {
            PenaltyKind::ElasticNet { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(invalid(format!("elastic net alpha must lie in (0, 1), got {alpha}")))
            }
            PenaltyKind::Bridge { gamma } if !(1.0..=2.0).contains(&gamma) => {
                Err(invalid(format!("bridge gamma must lie in [1, 2], got {gamma}")))
            }
            _ => Ok(Self { kind, lambda }),
        }
    }

    /// `λ·C(B)`.
    pub fn value(&self, b: &DMatrix<f64>) -> f64 {
        let l = self.lambda;
        match self.kind {
            PenaltyKind::Lasso => l * b.iter().map(|v| v.abs()).sum::<f64>(),
            PenaltyKind::Ridge => l * b.iter().map(|v| v * v).sum::<f64>(),
            PenaltyKind::ElasticNet { alpha } => {
                l * b.iter().map(|v| alpha * v.abs() + 0.5 * (1.0 - alpha) * v * v).sum::<f64>()
            }
            PenaltyKind::Bridge { gamma } => l * b.iter().map(|v| v.abs().powf(gamma)).sum::<f64>(),
            PenaltyKind::GroupLasso => l * b.row_iter().map(|r| r.norm()).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub b: DMatrix<f64>,
    pub iterations: usize,
    /// Largest violation of the optimality conditions, on the scale of the
    /// gradient of `tr[(Y − XB)ᵀ(Y − XB)]`.
    pub kkt_residual: f64,
}

/// Minimizes `tr[(Y − XB)ᵀ(Y − XB)] + λ·C(B)`.
pub fn penalized(data: &RegressionData, pen: &PenaltySpec, tol: f64, max_iter: usize) -> Result<PenalizedFit> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("penalized fit needs tol > 0 and max_iter >= 1"));
    }
    match pen.kind {
        PenaltyKind::Ridge => ridge(data, pen.lambda),
        PenaltyKind::Lasso => columnwise_cd(data, 0.0, pen.lambda / 2.0, tol, max_iter),
        PenaltyKind::ElasticNet { alpha } => {
            columnwise_cd(data, pen.lambda * (1.0 - alpha) / 2.0, pen.lambda * alpha / 2.0, tol, max_iter)
        }
        PenaltyKind::Bridge { gamma: 1.0 } => columnwise_cd(data, 0.0, pen.lambda / 2.0, tol, max_iter),
        PenaltyKind::Bridge { gamma } => bridge(data, pen.lambda, gamma, tol, max_iter),
        PenaltyKind::GroupLasso => group_lasso(data, pen.lambda, tol, max_iter),
    }
}

pub fn ridge(data: &RegressionData, lambda: f64) -> Result<PenalizedFit> {
    let mut a = data.gram();
    for i in 0..data.p() {
        a[(i, i)] += lambda;
    }
    let chol = Cholesky::new(a).ok_or_else(|| Error::Singular("XᵀX + λI is singular; increase lambda".into()))?;
    let b = chol.solve(&data.cross());
    let grad = (data.gram() * &b - data.cross()) * 2.0 + &b * (2.0 * lambda);
    Ok(PenalizedFit { b, iterations: 1, kkt_residual: grad.amax() })
}

/// Per-response coordinate descent on `½bᵀ(XᵀX + ρI)b − bᵀXᵀy + κ‖b‖₁`,
/// which is half of the penalized residual sum of squares.
fn columnwise_cd(data: &RegressionData, diag_add: f64, l1_half: f64, tol: f64, max_iter: usize) -> Result<PenalizedFit> {
    let mut a = data.gram();
    for i in 0..data.p() {
        a[(i, i)] += diag_add;
    }
    let g = data.cross();
    let mut b = DMatrix::zeros(data.p(), data.q());
    let mut iterations = 0;
    let mut kkt = 0.0f64;
    for k in 0..data.q() {
        let rhs: Vec<f64> = g.column(k).iter().copied().collect();
        let mut beta = vec![0.0; data.p()];
        let run = cd_solve(&a, &rhs, l1_half, &mut beta, tol, max_iter)?;
        if !run.converged {
            return Err(Error::NotConverged {
                routine: "penalized coordinate descent",
                iterations: run.sweeps,
                residual: run.max_change,
                last_iterate: beta,
            });
        }
        iterations = iterations.max(run.sweeps);
        kkt = kkt.max(2.0 * kkt_residual_raw(&a, &rhs, l1_half, &beta));
        b.set_column(k, &DVector::from_vec(beta));
    }
    Ok(PenalizedFit { b, iterations, kkt_residual: kkt })
}

/// `argmin_x ½(x − v)² + c·|x|^γ` for `γ ∈ (1, 2]`, by bisection on the
/// monotone stationarity condition over `[0, |v|]`.
fn bridge_prox(v: f64, c: f64, gamma: f64) -> f64 {
    if v == 0.0 || c == 0.0 {
        return v;
    }
    let target = v.abs();
    let (mut lo, mut hi) = (0.0f64, target);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid - target + c * gamma * mid.powf(gamma - 1.0) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-17 * target {
            break;
        }
    }
    v.signum() * 0.5 * (lo + hi)
}

/// Accelerated proximal gradient with function-value restarts.
fn bridge(data: &RegressionData, lambda: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<PenalizedFit> {
    let h = data.gram();
    let g = data.cross();
    let lmax = h.clone().symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return Ok(PenalizedFit { b: DMatrix::zeros(data.p(), data.q()), iterations: 0, kkt_residual: 0.0 });
    }
    let step = 1.0 / (2.0 * lmax);
    let spec = PenaltySpec { kind: PenaltyKind::Bridge { gamma }, lambda };
    let objective = |b: &DMatrix<f64>| data.rss(b) + spec.value(b);
    let grad = |b: &DMatrix<f64>| (&h * b - &g) * 2.0;
    let mut b = DMatrix::zeros(data.p(), data.q());
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&b);
    let prox_step = |from: &DMatrix<f64>| (from - grad(from) * step).map(|v| bridge_prox(v, step * lambda, gamma));
    for it in 1..=max_iter {
        let mut next = prox_step(&z);
        let mut f_next = objective(&next);
        if f_next > f_prev {
            // momentum overshoot: fall back to a plain proximal step
            next = prox_step(&b);
            f_next = objective(&next);
            t = 1.0;
        }
        let change = (&next - &b).amax();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &b) * ((t - 1.0) / t_next);
        t = t_next;
        b = next;
        f_prev = f_next;
        if change < tol * 1e-2 {
            let gr = grad(&b);
            let kkt = b
                .iter()
                .zip(gr.iter())
                .map(|(&bv, &gv)| (gv + lambda * gamma * bv.abs().powf(gamma - 1.0) * bv.signum()).abs())
                .fold(0.0, f64::max);
            return Ok(PenalizedFit { b, iterations: it, kkt_residual: kkt });
        }
    }
    Err(Error::NotConverged {
        routine: "bridge proximal gradient",
        iterations: max_iter,
        residual: f_prev,
        last_iterate: b.as_slice().to_vec(),
    })
}

/// Row-block coordinate descent.
fn group_lasso(data: &RegressionData, lambda: f64, tol: f64, max_iter: usize) -> Result<PenalizedFit> {
    let h = data.gram();
    let g = data.cross();
    let (p, q) = (data.p(), data.q());
    let mut b = DMatrix::<f64>::zeros(p, q);
    let mut hb = DMatrix::<f64>::zeros(p, q);
    for sweep in 1..=max_iter {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let c = h[(j, j)];
            let old = b.row(j).clone_owned();
            // r = G_j − Σ_{k≠j} H_jk B_k
            let r = g.row(j) - hb.row(j) + &old * c;
            let norm = r.norm();
            let new = if c > 0.0 && norm > 0.0 {
                &r * ((1.0 - lambda / (2.0 * norm)).max(0.0) / c)
            } else if norm * 2.0 <= lambda {
                r.clone() * 0.0
            } else {
                return Err(invalid(format!("group lasso is unbounded along row {j}")));
            };
            let delta = &new - &old;
            let dmax = delta.amax();
            if dmax > 0.0 {
                for i in 0..p {
                    let hij = h[(i, j)];
                    if hij != 0.0 {
                        let mut row = hb.row_mut(i);
                        row += &delta * hij;
                    }
                }
                b.set_row(j, &new);
                max_change = max_change.max(dmax);
            }
        }
        if max_change < tol {
            let grad = (&hb - &g) * 2.0;
            let mut kkt = 0.0f64;
            for j in 0..p {
                let gj = grad.row(j);
                let bj = b.row(j);
                let nb = bj.norm();
                let v = if nb > 0.0 { (gj + bj * (lambda / nb)).norm() } else { (gj.norm() - lambda).max(0.0) };
                kkt = kkt.max(v);
            }
            return Ok(PenalizedFit { b, iterations: sweep, kkt_residual: kkt });
        }
    }
    Err(Error::NotConverged {
        routine: "group lasso",
        iterations: max_iter,
        residual: f64::NAN,
        last_iterate: b.as_slice().to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct MrceFit {
    pub b: DMatrix<f64>,
    pub omega: SymmetricMatrix,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Objective after the initialization and after every half-step.
    pub objective_trace: Vec<f64>,
    pub cycles: usize,
}

/// `tr[(1/n)(Y − XB)Ω(Y − XB)ᵀ] − log|Ω| + λ₁Σ_{j≠j'}|ω_jj'| + λ₂Σ|b_jk|`.
pub fn mrce_objective(data: &RegressionData, b: &DMatrix<f64>, omega: &DMatrix<f64>, lambda1: f64, lambda2: f64) -> f64 {
    let Some(ld) = log_det_spd(omega) else {
        return f64::INFINITY;
    };
    let sigma = data.residual_covariance(b);
    let q = omega.nrows();
    let mut off = 0.0;
    for j in 0..q {
        for i in 0..q {
            if i != j {
                off += omega[(i, j)].abs();
            }
        }
    }
    (sigma.as_matrix() * omega).trace() - ld + lambda1 * off + lambda2 * b.iter().map(|v| v.abs()).sum::<f64>()
}

fn omega_step(sigma: &SymmetricMatrix, lambda1: f64, tol: f64) -> Result<SymmetricMatrix> {
    let opts = GlassoOptions { tol, max_sweeps: 10_000, penalize_diagonal: false };
    Ok(graphical_lasso_with(sigma, lambda1, &opts)?.theta)
}

/// Coordinate descent for `B` with `Ω` fixed; maintains `HBΩ`.
fn b_step(
    h: &DMatrix<f64>,
    gomega: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    b: &mut DMatrix<f64>,
    n: f64,
    lambda2: f64,
    tol: f64,
) -> Result<()> {
    let (p, q) = (b.nrows(), b.ncols());
    let mut hbo = h * &*b * omega;
    let thresh = n * lambda2 / 2.0;
    for _ in 0..100_000 {
        let mut max_change = 0.0f64;
        for c in 0..q {
            for r in 0..p {
                let coef = h[(r, r)] * omega[(c, c)];
                if coef <= 0.0 {
                    continue;
                }
                let old = b[(r, c)];
                let u = hbo[(r, c)] - coef * old;
                let new = crate::numerics::soft_threshold(gomega[(r, c)] - u, thresh) / coef;
                let delta = new - old;
                if delta != 0.0 {
                    for cc in 0..q {
                        let oc = omega[(c, cc)] * delta;
                        if oc != 0.0 {
                            for rr in 0..p {
                                hbo[(rr, cc)] += h[(rr, r)] * oc;
                            }
                        }
                    }
                    b[(r, c)] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
        }
        if max_change < tol {
            return Ok(());
        }
    }
    Err(Error::NotConverged {
        routine: "mrce coefficient step",
        iterations: 100_000,
        residual: f64::NAN,
        last_iterate: b.as_slice().to_vec(),
    })
}

/// Alternating estimation of a sparse `B` and a sparse error precision `Ω`,
/// starting from `B = 0`. Terminates when `Σ|ΔB| ≤ tol·Σ|B_ridge(λ₂)|`.
pub fn mrce(data: &RegressionData, lambda1: f64, lambda2: f64, tol: f64, max_cycles: usize) -> Result<MrceFit> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
        return Err(invalid("mrce needs finite lambda1, lambda2 >= 0"));
    }
    if !(tol > 0.0) || max_cycles == 0 {
        return Err(invalid("mrce needs tol > 0 and max_cycles >= 1"));
    }
    let n = data.n() as f64;
    let h = data.gram();
    let g = data.cross();
    let ridge_scale: f64 = ridge(data, lambda2.max(1e-12))?.b.iter().map(|v| v.abs()).sum();
    let inner_tol = 1e-10;
    let mut b = DMatrix::zeros(data.p(), data.q());
    let mut omega = omega_step(&data.residual_covariance(&b), lambda1, inner_tol)?;
    let mut trace = vec![mrce_objective(data, &b, &omega, lambda1, lambda2)];
    for cycle in 1..=max_cycles {
        let prev_b = b.clone();
        let gomega = &g * omega.as_matrix();
        b_step(&h, &gomega, omega.as_matrix(), &mut b, n, lambda2, inner_tol)?;
        trace.push(mrce_objective(data, &b, &omega, lambda1, lambda2));
        let candidate = omega_step(&data.residual_covariance(&b), lambda1, inner_tol)?;
        let cand_obj = mrce_objective(data, &b, candidate.as_matrix(), lambda1, lambda2);
        let current = *trace.last().unwrap();
        if cand_obj <= current {
            omega = candidate;
            trace.push(cand_obj);
        } else {
            trace.push(current);
        }
        let moved: f64 = (&b - &prev_b).iter().map(|v| v.abs()).sum();
        if moved <= tol * ridge_scale {
            return Ok(MrceFit { b, omega, lambda1, lambda2, objective_trace: trace, cycles: cycle });
        }
    }
    Err(Error::NotConverged {
        routine: "mrce",
        iterations: max_cycles,
        residual: *trace.last().unwrap(),
        last_iterate: b.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs_diff, soft_threshold, spd_inverse};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    fn orthonormal_design(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        gaussian(n, p, rng).qr().q().columns(0, p).clone_owned()
    }

    #[test]
    fn ols_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let x = gaussian(20, 3, &mut rng);
        let fit = ols(&RegressionData::new(x.clone(), x.clone()).unwrap()).unwrap();
        assert!(max_abs_diff(&fit.b, &DMatrix::identity(3, 3)) < 1e-12);

        let q = orthonormal_design(20, 3, &mut rng);
        let y = gaussian(20, 2, &mut rng);
        let fit = ols(&RegressionData::new(q.clone(), y.clone()).unwrap()).unwrap();
        assert!(max_abs_diff(&fit.b, &(q.transpose() * &y)) < 1e-12);

        let truth = DMatrix::from_row_slice(3, 2, &[1.0, -0.5, 0.0, 2.0, 0.7, 0.3]);
        let x = gaussian(200, 3, &mut rng);
        let y = &x * &truth + gaussian(200, 2, &mut rng) * 0.5;
        let fit = ols(&RegressionData::new(x, y).unwrap()).unwrap();
        assert!(max_abs_diff(&fit.b, &truth) < 0.1);

        let dup = DMatrix::from_fn(10, 2, |i, _| i as f64);
        let err = ols(&RegressionData::new(dup, gaussian(10, 1, &mut rng)).unwrap()).unwrap_err();
        assert!(err.to_string().contains("penalized"));
    }

    #[test]
    fn rrr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let x = gaussian(40, 4, &mut rng);
        let y = gaussian(40, 3, &mut rng);
        let data = RegressionData::new(x.clone(), y).unwrap();
        let b_ols = ols(&data).unwrap().b;
        assert!(max_abs_diff(&reduced_rank(&data, 3).unwrap(), &b_ols) < 1e-8);
        let mut prev = f64::INFINITY;
        for r in 1..=3 {
            let rss = data.rss(&reduced_rank(&data, r).unwrap());
            assert!(rss <= prev + 1e-9);
            prev = rss;
        }
        assert!(reduced_rank(&data, 0).is_err() && reduced_rank(&data, 4).is_err());
        let one = RegressionData::new(x, gaussian(40, 1, &mut rng)).unwrap();
        assert!(max_abs_diff(&reduced_rank(&one, 1).unwrap(), &ols(&one).unwrap().b) < 1e-8);
    }

    #[test]
    fn penalized_orthonormal_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let x = orthonormal_design(30, 4, &mut rng);
        let y = gaussian(30, 2, &mut rng);
        let data = RegressionData::new(x.clone(), y.clone()).unwrap();
        let b0 = x.transpose() * &y;
        let lam = 0.6;
        let lasso = penalized(&data, &PenaltySpec::new(PenaltyKind::Lasso, lam).unwrap(), 1e-12, 1000).unwrap();
        // scalar oracle: argmin (b − b0)² + λ|b| by grid refinement
        for (got, &v0) in lasso.b.iter().zip(b0.iter()) {
            let mut best = (f64::INFINITY, 0.0);
            for k in -40_000..=40_000 {
                let b = k as f64 * 1e-4;
                let f = (b - v0).powi(2) + lam * b.abs();
                if f < best.0 {
                    best = (f, b);
                }
            }
            assert!((got - best.1).abs() < 2e-4);
            assert!((got - soft_threshold(v0, lam / 2.0)).abs() < 1e-10);
        }
        let ridge = penalized(&data, &PenaltySpec::new(PenaltyKind::Ridge, lam).unwrap(), 1e-12, 1000).unwrap();
        assert!(max_abs_diff(&ridge.b, &(&b0 / (1.0 + lam))) < 1e-12);
        // (b − b0)² + λ(α|b| + (1 − α)b²/2): soft(b0, λα/2)/(1 + λ(1 − α)/2)
        let alpha = 0.4;
        let enet = penalized(&data, &PenaltySpec::new(PenaltyKind::ElasticNet { alpha }, lam).unwrap(), 1e-12, 1000).unwrap();
        let expected = b0.map(|v| soft_threshold(v, lam * alpha / 2.0) / (1.0 + lam * (1.0 - alpha) / 2.0));
        assert!(max_abs_diff(&enet.b, &expected) < 1e-10);
    }

    #[test]
    fn zero_penalty_matches_ols_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let data = RegressionData::new(gaussian(50, 4, &mut rng), gaussian(50, 3, &mut rng)).unwrap();
        let b_ols = ols(&data).unwrap().b;
        for kind in [
            PenaltyKind::Lasso,
            PenaltyKind::Ridge,
            PenaltyKind::ElasticNet { alpha: 0.5 },
            PenaltyKind::Bridge { gamma: 1.0 },
            PenaltyKind::Bridge { gamma: 1.5 },
            PenaltyKind::GroupLasso,
        ] {
            let fit = penalized(&data, &PenaltySpec::new(kind, 0.0).unwrap(), 1e-10, 100_000).unwrap();
            assert!(max_abs_diff(&fit.b, &b_ols) < 1e-6, "{kind:?}");
        }
        let tiny = penalized(&data, &PenaltySpec::new(PenaltyKind::Ridge, 1e-10).unwrap(), 1e-10, 10).unwrap();
        assert!(max_abs_diff(&tiny.b, &b_ols) < 1e-6);
    }

    #[test]
    fn bridge_matches_scalar_oracle_on_orthonormal_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let x = orthonormal_design(25, 3, &mut rng);
        let y = gaussian(25, 1, &mut rng);
        let data = RegressionData::new(x.clone(), y.clone()).unwrap();
        let b0 = x.transpose() * &y;
        let (lam, gamma) = (0.8, 1.5);
        let fit = penalized(&data, &PenaltySpec::new(PenaltyKind::Bridge { gamma }, lam).unwrap(), 1e-10, 100_000).unwrap();
        for (got, &v0) in fit.b.iter().zip(b0.iter()) {
            // golden-section search on (b − b0)² + λ|b|^γ
            let f = |b: f64| (b - v0).powi(2) + lam * b.abs().powf(gamma);
            let (mut lo, mut hi) = (-5.0f64, 5.0f64);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let a = hi - r * (hi - lo);
                let b = lo + r * (hi - lo);
                if f(a) < f(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            assert!((got - 0.5 * (lo + hi)).abs() < 1e-6, "{got} vs {}", 0.5 * (lo + hi));
        }
        assert!(PenaltySpec::new(PenaltyKind::Bridge { gamma: 2.5 }, 1.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn elastic_net_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let data = RegressionData::new(gaussian(30, 6, &mut rng), gaussian(30, 2, &mut rng)).unwrap();
        let fit = penalized(&data, &PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 0.3 }, 5.0).unwrap(), 1e-12, 10_000).unwrap();
        assert!(fit.kkt_residual < 1e-8);
    }

    #[test]
    fn group_lasso_zeroes_whole_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let x = gaussian(40, 6, &mut rng);
        let truth = DMatrix::from_fn(6, 3, |r, _| if r < 2 { 1.0 } else { 0.0 });
        let y = &x * truth + gaussian(40, 3, &mut rng);
        let data = RegressionData::new(x, y).unwrap();
        let fit = penalized(&data, &PenaltySpec::new(PenaltyKind::GroupLasso, 30.0).unwrap(), 1e-12, 100_000).unwrap();
        let mut zero_rows = 0;
        for r in fit.b.row_iter() {
            let zeros = r.iter().filter(|v| **v == 0.0).count();
            assert!(zeros == 0 || zeros == 3);
            if zeros == 3 {
                zero_rows += 1;
            }
        }
        assert!(zero_rows > 0);
        assert!(fit.kkt_residual < 1e-8);
    }

    #[test]
    fn mrce_unpenalized_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let data = RegressionData::new(gaussian(60, 3, &mut rng), gaussian(60, 2, &mut rng)).unwrap();
        let fit = mrce(&data, 0.0, 0.0, 1e-10, 500).unwrap();
        let o = ols(&data).unwrap();
        assert!(max_abs_diff(&fit.b, &o.b) < 1e-5);
        assert!(max_abs_diff(fit.omega.as_matrix(), &spd_inverse(o.sigma.as_matrix()).unwrap()) < 1e-5);
    }

    #[test]
    fn mrce_large_lambda2_gives_zero_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let data = RegressionData::new(gaussian(30, 3, &mut rng), gaussian(30, 2, &mut rng)).unwrap();
        let fit = mrce(&data, 0.1, 1e6, 1e-6, 50).unwrap();
        assert!(fit.b.iter().all(|&v| v == 0.0));
        let marginal = SymmetricMatrix::symmetrized(data.y().transpose() * data.y() / 30.0);
        let expected = graphical_lasso_with(&marginal, 0.1, &GlassoOptions { tol: 1e-10, max_sweeps: 10_000, penalize_diagonal: false })
            .unwrap()
            .theta;
        assert!(max_abs_diff(fit.omega.as_matrix(), expected.as_matrix()) < 1e-8);
    }

    #[test]
    fn mrce_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let x = gaussian(50, 2, &mut rng);
        let y = &x * DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, -1.0]) + gaussian(50, 2, &mut rng);
        let fit = mrce(&RegressionData::new(x, y).unwrap(), 0.05, 0.05, 1e-8, 500).unwrap();
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}
