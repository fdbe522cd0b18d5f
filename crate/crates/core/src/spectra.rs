//! Random-matrix diagnostics for sample covariance spectra.
//!
//! Conventions: the sample covariance used here is `S = (1/n)·XᵀX` on
//! column-centered data, which is the scaling under which the
//! Marchenko–Pastur law with scale `σ²` describes the eigenvalues. The
//! Tracy–Widom centering and scaling apply to the largest eigenvalue of the
//! unnormalized Gram matrix `XᵀX = n·S`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::SymmetricMatrix;

/// Relative tolerance of the adaptive quadrature behind [`mp_cdf`].
pub const MP_CDF_TOL: f64 = 1e-9;

/// Marchenko–Pastur law with scale `σ` and aspect ratio `y = p/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpLaw {
    pub sigma: f64,
    pub y: f64,
    /// Lower support edge `σ²(1 − √y)²`.
    pub a: f64,
    /// Upper support edge `σ²(1 + √y)²`.
    pub b: f64,
    /// Point mass at zero, `max(0, 1 − 1/y)`.
    pub mass_at_zero: f64,
}

pub fn mp_law(sigma: f64, y: f64) -> Result<MpLaw> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(y > 0.0 && y.is_finite()) {
        return Err(invalid(format!("MP law needs sigma > 0 and y > 0 (got {sigma}, {y})")));
    }
    let s2 = sigma * sigma;
    let ry = y.sqrt();
    Ok(MpLaw {
        sigma,
        y,
        a: s2 * (1.0 - ry).powi(2),
        b: s2 * (1.0 + ry).powi(2),
        mass_at_zero: (1.0 - 1.0 / y).max(0.0),
    })
}

/// Density of the continuous part; the atom at zero (when `y > 1`) is
/// reported only through `mass_at_zero`.
pub fn mp_density(x: f64, law: &MpLaw) -> f64 {
    if x <= law.a || x >= law.b || x <= 0.0 {
        return 0.0;
    }
    let s2 = law.sigma * law.sigma;
    ((law.b - x) * (x - law.a)).sqrt() / (2.0 * PI * s2 * law.y * x)
}

/// Integrand of the continuous part after substituting
/// `x = c − h·cos θ`, which removes the square-root edge singularities.
fn mp_theta_integrand(theta: f64, law: &MpLaw) -> f64 {
    let h = 0.5 * (law.b - law.a);
    let s2y = law.sigma * law.sigma * law.y;
    let u = 2.0 * (0.5 * theta).sin().powi(2); // 1 − cos θ
    let one_plus_cos = 1.0 + theta.cos();
    if law.a == 0.0 {
        // sin²θ / (h(1 − cos θ)) = (1 + cos θ)/h
        return h * one_plus_cos / (2.0 * PI * s2y);
    }
    h * h * u * one_plus_cos / (2.0 * PI * s2y * (law.a + h * u))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson_rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
        + adaptive_simpson_rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    adaptive_simpson_rec(&f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Distribution function of the MP law, atom at zero included.
pub fn mp_cdf(x: f64, law: &MpLaw) -> f64 {
    let atom = if x >= 0.0 { law.mass_at_zero } else { 0.0 };
    if x <= law.a {
        return atom;
    }
    if x >= law.b {
        return 1.0;
    }
    let c = 0.5 * (law.a + law.b);
    let h = 0.5 * (law.b - law.a);
    let theta = ((c - x) / h).clamp(-1.0, 1.0).acos();
    let cont = adaptive_simpson(|t| mp_theta_integrand(t, law), 0.0, theta, MP_CDF_TOL);
    (atom + cont).min(1.0)
}

/// Semicircle density `(1/(2πσ²))·√(4σ² − x²)` on `|x| ≤ 2σ`.
pub fn semicircle_density(x: f64, sigma: f64) -> f64 {
    let r2 = 4.0 * sigma * sigma;
    if x * x >= r2 {
        return 0.0;
    }
    (r2 - x * x).sqrt() / (2.0 * PI * sigma * sigma)
}

/// Closed-form distribution function of the semicircle law.
pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let r = 2.0 * sigma;
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    0.5 + x * (r * r - x * x).sqrt() / (4.0 * PI * sigma * sigma) + (x / r).asin() / PI
}

/// Empirical spectral distribution: eigenvalues in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Esd {
    eigenvalues: Vec<f64>,
}

impl Esd {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(invalid("ESD needs a non-empty set of finite eigenvalues"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

pub fn esd(s: &SymmetricMatrix) -> Esd {
    let values = s.as_matrix().clone().symmetric_eigenvalues();
    Esd::from_eigenvalues(values.iter().copied().collect()).expect("symmetric matrix has finite spectrum")
}

/// `#{λ ≤ x} / p`.
pub fn esd_cdf(e: &Esd, x: f64) -> f64 {
    let count = e.eigenvalues.partition_point(|&v| v <= x);
    count as f64 / e.len() as f64
}

/// Kolmogorov distance between an ESD and a reference law. `cdf(x, left)`
/// returns `F(x)` or, with `left = true`, the left limit `F(x−)`. Both sides
/// of every ESD jump are compared. Eigenvalues within `zero_tol` of zero are
/// treated as exact zeros.
fn ks_against(e: &Esd, cdf: impl Fn(f64, bool) -> f64, zero_tol: f64) -> f64 {
    let p = e.len() as f64;
    let values: Vec<f64> = e.eigenvalues.iter().map(|&v| if v.abs() <= zero_tol { 0.0 } else { v }).collect();
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < values.len() {
        let v = values[i];
        let mut j = i;
        while j < values.len() && values[j] == v {
            j += 1;
        }
        worst = worst
            .max((cdf(v, true) - i as f64 / p).abs())
            .max((cdf(v, false) - j as f64 / p).abs());
        i = j;
    }
    worst
}

/// Sup-distance between the ESD and the MP distribution function.
pub fn ks_distance(e: &Esd, law: &MpLaw) -> f64 {
    ks_against(
        e,
        |x, left| {
            if left && x == 0.0 {
                mp_cdf(x, law) - law.mass_at_zero
            } else {
                mp_cdf(x, law)
            }
        },
        1e-9 * law.b.max(1.0),
    )
}

/// Sup-distance between the ESD and the semicircle distribution function.
pub fn ks_distance_semicircle(e: &Esd, sigma: f64) -> f64 {
    ks_against(e, |x, _| semicircle_cdf(x, sigma), 0.0)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Centering and scaling for the largest eigenvalue of `XᵀX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwScaling {
    pub mu_np: f64,
    pub sigma_np: f64,
}

impl TwScaling {
    pub fn standardize(&self, lambda1: f64) -> f64 {
        (lambda1 - self.mu_np) / self.sigma_np
    }
}

pub fn tw_scaling(n: usize, p: usize) -> Result<TwScaling> {
    if n == 0 || p == 0 {
        return Err(invalid("Tracy-Widom scaling needs n, p >= 1"));
    }
    let (rn, rp) = ((n as f64).sqrt(), (p as f64).sqrt());
    Ok(TwScaling {
        mu_np: (rn + rp).powi(2),
        sigma_np: (rn + rp) * (1.0 / rn + 1.0 / rp).cbrt(),
    })
}

/// Largest eigenvalue of `XᵀX` by Lanczos with full reorthogonalization.
/// Small problems fall back to a dense eigensolve.
pub fn largest_gram_eigenvalue(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    if p <= 48 {
        let g = x.transpose() * x;
        return g.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let max_steps = p.min(300);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps);
    let mut v = DVector::from_fn(p, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut estimate = f64::NAN;
    for k in 0..max_steps {
        let xv = x * &v;
        let mut w = x.tr_mul(&xv);
        let alpha = w.dot(&v);
        alphas.push(alpha);
        basis.push(v.clone());
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = w.dot(q);
                w.axpy(-c, q, 1.0);
            }
        }
        let beta = w.norm();
        let check = k + 1 == max_steps || (k >= 20 && k % 10 == 0) || beta <= 1e-12 * alpha.abs().max(1.0);
        if check {
            let top = tridiagonal_top_eigenvalue(&alphas, &betas);
            let converged = (top - estimate).abs() <= 1e-13 * top.abs();
            estimate = top;
            if converged || beta <= 1e-12 * top.abs().max(1.0) {
                break;
            }
        }
        betas.push(beta);
        v = w / beta;
    }
    estimate
}

fn tridiagonal_top_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
