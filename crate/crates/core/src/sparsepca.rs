//! Sparse principal components from the penalized rank-one decomposition
//! `max uᵀXv` subject to `‖u‖₂ = 1`, `‖v‖₂ ≤ 1`, `‖v‖₁ ≤ c`.
//!
//! `X` is used as given; center its columns first for covariance-based
//! components.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{invalid, Error, Result};
use crate::numerics::soft_threshold;

#[derive(Debug, Clone)]
pub struct SparseFactor {
    /// Unit vector in observation space.
    pub u: DVector<f64>,
    /// Unit loading vector with `‖v‖₁ ≤ c`.
    pub v: DVector<f64>,
    /// `uᵀXv ≥ 0`.
    pub d: f64,
    pub iterations: usize,
    /// `uᵀXv` after every full iteration.
    pub objective_trace: Vec<f64>,
}

const POWER_ITERATIONS: usize = 20;
const BISECTION_STEPS: usize = 60;

fn initial_direction(x: &DMatrix<f64>) -> DVector<f64> {
    let p = x.ncols();
    let mut v = DVector::from_fn(p, |j, _| x.column(j).norm() + 1e-3 * (j + 1) as f64 / p as f64);
    v /= v.norm();
    for _ in 0..POWER_ITERATIONS {
        let w = x.tr_mul(&(x * &v));
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
    }
    v
}

/// Unit vector `S(z, Δ)/‖S(z, Δ)‖₂` with the smallest `Δ ≥ 0` (up to
/// bisection accuracy, rounding toward feasibility) giving `‖v‖₁ ≤ c`.
fn constrained_direction(z: &DVector<f64>, c: f64) -> DVector<f64> {
    let ratio = |delta: f64| {
        let s = z.map(|v| soft_threshold(v, delta));
        let n2 = s.norm();
        if n2 == 0.0 {
            (s, 0.0)
        } else {
            let r = s.iter().map(|v| v.abs()).sum::<f64>() / n2;
            (s / n2, r)
        }
    };
    let (v0, r0) = ratio(0.0);
    if r0 <= c {
        return v0;
    }
    let max_abs = z.amax();
    let (mut lo, mut hi) = (0.0f64, max_abs);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (s, r) = ratio(mid);
        if r <= c || s.norm() == 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (mut v, r) = ratio(hi);
    // entries below the resolution of the ratio test are rounding residue
    let floor = 4.0 * f64::EPSILON * v.amax();
    let mut trimmed = false;
    for e in v.iter_mut() {
        if e.abs() <= floor && *e != 0.0 {
            *e = 0.0;
            trimmed = true;
        }
    }
    if trimmed {
        let n = v.norm();
        v /= n;
    }
    if r == 0.0 {
        // everything thresholded away: put all weight on the largest entry
        let k = z.iamax();
        let mut one_hot = DVector::zeros(z.len());
        one_hot[k] = z[k].signum();
        return one_hot;
    }
    v
}

/// First sparse factor by alternating maximization.
pub fn sparse_pc1(x: &DataMatrix, c: f64, tol: f64, max_iter: usize) -> Result<SparseFactor> {
    pc1_matrix(x.as_matrix(), c, tol, max_iter)
}

fn pc1_matrix(x: &DMatrix<f64>, c: f64, tol: f64, max_iter: usize) -> Result<SparseFactor> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(invalid(format!("sparsity bound c must be >= 1, got {c}")));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("sparse PCA needs tol > 0 and max_iter >= 1"));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(invalid("sparse PCA of the zero matrix is undefined"));
    }
    let heaviest = (0..x.ncols()).max_by(|&a, &b| x.column(a).norm().total_cmp(&x.column(b).norm())).unwrap();
    let mut column_start = DVector::zeros(x.ncols());
    column_start[heaviest] = 1.0;
    let power_start = constrained_direction(&initial_direction(x), c);
    let from_power = if (x * &power_start).norm() > 0.0 {
        Some(alternate(x, power_start, c, tol, max_iter)?)
    } else {
        None
    };
    // the alternating scheme only finds a local maximum; a second start at the
    // heaviest column covers the highly sparse regime
    let from_column = alternate(x, column_start, c, tol, max_iter)?;
    Ok(match from_power {
        Some(f) if f.d >= from_column.d => f,
        _ => from_column,
    })
}

fn alternate(x: &DMatrix<f64>, mut v: DVector<f64>, c: f64, tol: f64, max_iter: usize) -> Result<SparseFactor> {
    let xv = x * &v;
    let mut u = &xv / xv.norm();
    let mut trace = vec![u.dot(&(x * &v))];
    for it in 1..=max_iter {
        let z = x.tr_mul(&u);
        let mut next_v = constrained_direction(&z, c);
        if z.dot(&next_v) < z.dot(&v) {
            next_v = v.clone();
        }
        let change = (&next_v - &v).amax();
        v = next_v;
        let xv = x * &v;
        let norm = xv.norm();
        if norm > 0.0 {
            u = xv / norm;
        }
        trace.push(u.dot(&(x * &v)));
        if change < tol {
            let d = *trace.last().unwrap();
            return Ok(SparseFactor { u, v, d, iterations: it, objective_trace: trace });
        }
    }
    Err(Error::NotConverged {
        routine: "sparse_pc1",
        iterations: max_iter,
        residual: f64::NAN,
        last_iterate: v.iter().copied().collect(),
    })
}

/// Up to `k` factors, deflating `X ← X − d·u·vᵀ` after each one. Stops early
/// once the deflated matrix vanishes.
pub fn sparse_pca(x: &DataMatrix, c: f64, k: usize, tol: f64, max_iter: usize) -> Result<Vec<SparseFactor>> {
    if k == 0 || k > x.n().min(x.p()) {
        return Err(invalid(format!("number of factors must lie in 1..={}, got {k}", x.n().min(x.p()))));
    }
    let mut resid = x.as_matrix().clone();
    let base = resid.norm();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        if resid.norm() <= 1e-12 * base {
            break;
        }
        let f = pc1_matrix(&resid, c, tol, max_iter)?;
        resid -= &f.u * f.v.transpose() * f.d;
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn data(m: DMatrix<f64>) -> DataMatrix {
        DataMatrix::new(m).unwrap()
    }

    #[test]
    fn slack_constraint_gives_top_singular_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let x = DMatrix::from_fn(30, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = sparse_pc1(&data(x.clone()), 6f64.sqrt() + 0.01, 1e-12, 10_000).unwrap();
        let svd = x.clone().svd(false, true);
        let (k, s1) = svd.singular_values.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        let top = svd.v_t.unwrap().row(k).transpose();
        assert!((f.d - s1).abs() < 1e-8);
        assert!(top.dot(&f.v).abs() > 1.0 - 1e-8);
    }

    #[test]
    fn axis_aligned_case() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let f = sparse_pc1(&data(x), 2.0, 1e-12, 1000).unwrap();
        assert!((f.v[0].abs() - 1.0).abs() < 1e-12 && f.v[1].abs() < 1e-12);
        assert!((f.u[0].abs() - 1.0).abs() < 1e-12);
        assert!((f.d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_bound_selects_heaviest_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for _ in 0..20 {
            let x = DMatrix::from_fn(15, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = sparse_pc1(&data(x.clone()), 1.0, 1e-12, 10_000).unwrap();
            // brute force over basis vectors: uᵀXe_j is maximized by ‖X·j‖₂
            let best = (0..5).max_by(|&a, &b| x.column(a).norm().total_cmp(&x.column(b).norm())).unwrap();
            let nonzero: Vec<usize> = (0..5).filter(|&j| f.v[j] != 0.0).collect();
            assert_eq!(nonzero, vec![best]);
            assert!((f.d - x.column(best).norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn constraints_and_monotone_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for &c in &[1.2, 1.8, 2.5] {
            let x = DMatrix::from_fn(40, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = sparse_pc1(&data(x), c, 1e-12, 10_000).unwrap();
            assert!((f.v.norm() - 1.0).abs() < 1e-10);
            assert!(f.v.iter().map(|v| v.abs()).sum::<f64>() <= c + 1e-8);
            assert!((f.u.norm() - 1.0).abs() < 1e-10);
            assert!(f.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(f.d >= 0.0);
        }
    }

    #[test]
    fn multi_factor_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let fs = sparse_pca(&data(x), 2.0, 2, 1e-12, 1000).unwrap();
        assert_eq!(fs.len(), 2);
        assert!((fs[0].d - 3.0).abs() < 1e-10 && (fs[1].d - 1.0).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(84);
        let a = DMatrix::from_fn(20, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(2, 7, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &a * &b;
        let fs = sparse_pca(&data(x.clone()), 10.0, 2, 1e-13, 100_000).unwrap();
        let recon = fs.iter().fold(DMatrix::zeros(20, 7), |acc, f| acc + &f.u * f.v.transpose() * f.d);
        assert!((recon - &x).amax() < 1e-6);

        let single = sparse_pca(&data(x.clone()), 1.5, 1, 1e-12, 10_000).unwrap();
        let direct = sparse_pc1(&data(x), 1.5, 1e-12, 10_000).unwrap();
        assert_eq!(single[0].v, direct.v);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sparse_pc1(&data(DMatrix::zeros(3, 2)), 1.5, 1e-8, 10).is_err());
        assert!(sparse_pc1(&data(DMatrix::identity(3, 2)), 0.5, 1e-8, 10).is_err());
        assert!(sparse_pca(&data(DMatrix::identity(3, 2)), 1.5, 3, 1e-8, 10).is_err());
    }
}
