//! Edge-wise hypothesis tests for correlation networks: Fisher-z p-values,
//! Bonferroni and Benjamini–Hochberg decisions, and network assembly.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::data::{correlation_from_covariance, DataMatrix, Scaling};
use crate::error::{invalid, Error, Result};
use crate::numerics::{spd_inverse, SymmetricMatrix};
use crate::precision::partial_correlations;

/// P-values for the upper-triangle pairs `(i, j)`, `i < j`, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSet {
    pub values: Vec<f64>,
    pub labels: Vec<(usize, usize)>,
    /// The tested (partial) correlation of each pair.
    pub estimates: Vec<f64>,
}

impl PValueSet {
    pub fn new(values: Vec<f64>, labels: Vec<(usize, usize)>, estimates: Vec<f64>) -> Result<Self> {
        if values.len() != labels.len() || values.len() != estimates.len() {
            return Err(invalid("p-values, labels and estimates must have equal length"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("p-value {v} outside [0, 1]")));
        }
        Ok(Self { values, labels, estimates })
    }

    /// Unlabeled p-values, as for a generic multiple-testing problem.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, (0..n).map(|k| (k, k)).collect(), vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestDecision {
    pub rejected: Vec<bool>,
    /// Number of rejections (the largest passing rank for BH).
    pub j_star: usize,
    pub alpha: f64,
}

impl TestDecision {
    pub fn num_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

/// Two-sided normal p-value of a Fisher z statistic.
pub fn fisher_z_pvalue(r: f64, dof: f64) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let z = r.atanh() * dof.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Fisher-z p-values for every pair of variables. Marginal tests use
/// `√(n − 3)`, partial tests (conditioning on the other `p − 2` variables)
/// use `√(n − (p − 2) − 3)`.
pub fn correlation_pvalues(x: &DataMatrix, partial: bool) -> Result<PValueSet> {
    let (n, p) = (x.n(), x.p());
    if p < 2 {
        return Err(invalid("need at least two variables"));
    }
    let s = x.covariance(Scaling::Unbiased);
    let (r, dof) = if partial {
        if n <= p + 3 {
            return Err(invalid(format!("partial-correlation tests need n > p + 3 (n = {n}, p = {p})")));
        }
        let omega = spd_inverse(s.as_matrix())
            .map_err(|_| Error::Singular("sample covariance is not invertible".into()))?;
        (partial_correlations(&SymmetricMatrix::symmetrized(omega))?, (n - (p - 2) - 3) as f64)
    } else {
        if n <= 3 {
            return Err(invalid(format!("correlation tests need n > 3 (n = {n})")));
        }
        (correlation_from_covariance(&s)?, (n - 3) as f64)
    };
    let mut values = Vec::with_capacity(p * (p - 1) / 2);
    let mut labels = Vec::with_capacity(values.capacity());
    let mut estimates = Vec::with_capacity(values.capacity());
    for i in 0..p {
        for j in (i + 1)..p {
            values.push(fisher_z_pvalue(r[(i, j)], dof));
            labels.push((i, j));
            estimates.push(r[(i, j)]);
        }
    }
    PValueSet::new(values, labels, estimates)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Benjamini–Hochberg step-up procedure.
pub fn bh_procedure(p: &PValueSet, alpha: f64) -> Result<TestDecision> {
    check_alpha(alpha)?;
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.values[a].total_cmp(&p.values[b]));
    let mut j_star = 0;
    for (rank, &k) in order.iter().enumerate() {
        if p.values[k] <= (rank + 1) as f64 / n as f64 * alpha {
            j_star = rank + 1;
        }
    }
    let mut rejected = vec![false; n];
    for &k in &order[..j_star] {
        rejected[k] = true;
    }
    Ok(TestDecision { rejected, j_star, alpha })
}

/// Rejects where `p_i ≤ α/N`.
pub fn bonferroni(p: &PValueSet, alpha: f64) -> Result<TestDecision> {
    check_alpha(alpha)?;
    let cutoff = alpha / p.len().max(1) as f64;
    let rejected: Vec<bool> = p.values.iter().map(|&v| v <= cutoff).collect();
    let j_star = rejected.iter().filter(|&&r| r).count();
    Ok(TestDecision { rejected, j_star, alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    /// Absent for networks built by thresholding.
    pub pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinancialNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

/// One edge per rejected hypothesis, weighted by the tested correlation.
pub fn network_from_decisions(tickers: &[String], p: &PValueSet, d: &TestDecision) -> Result<FinancialNetwork> {
    if d.rejected.len() != p.len() {
        return Err(invalid("decision and p-value set differ in length"));
    }
    let mut edges = Vec::new();
    for (k, &rej) in d.rejected.iter().enumerate() {
        if !rej {
            continue;
        }
        let (i, j) = p.labels[k];
        if i == j || i >= tickers.len() || j >= tickers.len() {
            return Err(invalid(format!("edge label ({i}, {j}) is not a valid pair of nodes")));
        }
        edges.push(Edge { i: i.min(j), j: i.max(j), weight: p.estimates[k], pvalue: Some(p.values[k]) });
    }
    Ok(FinancialNetwork { nodes: tickers.to_vec(), edges })
}

/// Edges where `|r_ij| > threshold` (or `r_ij > threshold` when `signed`).
pub fn threshold_network(tickers: &[String], r: &SymmetricMatrix, threshold: f64, signed: bool) -> Result<FinancialNetwork> {
    if tickers.len() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} node names", r.dim()),
            found: format!("{}", tickers.len()),
        });
    }
    let mut edges = Vec::new();
    for i in 0..r.dim() {
        for j in (i + 1)..r.dim() {
            let v = r[(i, j)];
            let keep = if signed { v > threshold } else { v.abs() > threshold };
            if keep {
                edges.push(Edge { i, j, weight: v, pvalue: None });
            }
        }
    }
    Ok(FinancialNetwork { nodes: tickers.to_vec(), edges })
}

impl FinancialNetwork {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (i, j) = (a.min(b), a.max(b));
        self.edges.iter().any(|e| e.i == i && e.j == j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_z_pvalue(0.0, 25.0), 1.0);
        assert_eq!(fisher_z_pvalue(1.0, 25.0), 0.0);
        let z = 0.5f64.atanh() * 5.0;
        assert!((z - 2.7465).abs() < 1e-4);
        // Φ via a series-free oracle: Simpson integration of the normal density
        let m = 100_000;
        let h = z / m as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = phi(0.0) + phi(z);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(i as f64 * h);
        }
        let oracle = 2.0 * (0.5 - acc * h / 3.0);
        let got = fisher_z_pvalue(0.5, 25.0);
        assert!((got - oracle).abs() < 1e-10);
        assert!((got - 0.00602).abs() < 1e-5);
    }

    #[test]
    fn null_pvalues_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut ps = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let x = DataMatrix::standard_normal(30, 2, &mut rng);
            ps.push(correlation_pvalues(&x, false).unwrap().values[0]);
        }
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let ks = ps
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - k as f64 / n).abs().max(((k + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "ks = {ks}");
    }

    #[test]
    fn partial_requires_enough_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let x = DataMatrix::standard_normal(8, 5, &mut rng);
        assert!(correlation_pvalues(&x, true).is_err());
        let x = DataMatrix::standard_normal(9, 5, &mut rng);
        let pv = correlation_pvalues(&x, true).unwrap();
        assert_eq!(pv.len(), 10);
        assert_eq!(pv.labels[0], (0, 1));
        assert_eq!(pv.labels[9], (3, 4));
    }

    #[test]
    fn bh_examples() {
        let p = PValueSet::from_values(vec![0.001, 0.02, 0.04, 0.8]).unwrap();
        let d = bh_procedure(&p, 0.05).unwrap();
        assert_eq!(d.j_star, 2);
        assert_eq!(d.rejected, vec![true, true, false, false]);
        let ones = PValueSet::from_values(vec![1.0; 5]).unwrap();
        assert_eq!(bh_procedure(&ones, 0.1).unwrap().j_star, 0);
        let zeros = PValueSet::from_values(vec![0.0; 5]).unwrap();
        assert_eq!(bh_procedure(&zeros, 0.1).unwrap().j_star, 5);
        assert!(bh_procedure(&ones, 1.0).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        let p = PValueSet::from_values((0..100).map(|k| if k == 0 { 5e-4 } else { 5.1e-4 }).collect()).unwrap();
        let d = bonferroni(&p, 0.05).unwrap();
        assert_eq!(d.num_rejected(), 1);
        let single = PValueSet::from_values(vec![0.04]).unwrap();
        assert!(bonferroni(&single, 0.05).unwrap().rejected[0]);
        assert!(!bonferroni(&single, 0.03).unwrap().rejected[0]);
    }

    #[test]
    fn bonferroni_subset_of_bh() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..500 {
            let n = rng.random_range(1..40);
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
            let p = PValueSet::from_values(v).unwrap();
            let a = bonferroni(&p, 0.1).unwrap();
            let b = bh_procedure(&p, 0.1).unwrap();
            assert!(a.rejected.iter().zip(&b.rejected).all(|(x, y)| !x || *y));
        }
    }

    #[test]
    fn network_assembly() {
        let tickers: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let p = PValueSet::new(vec![0.01, 0.5, 0.02], vec![(0, 1), (0, 2), (1, 2)], vec![0.4, 0.1, -0.3]).unwrap();
        let none = TestDecision { rejected: vec![false; 3], j_star: 0, alpha: 0.1 };
        assert_eq!(network_from_decisions(&tickers, &p, &none).unwrap().num_edges(), 0);
        let all = TestDecision { rejected: vec![true; 3], j_star: 3, alpha: 0.1 };
        let net = network_from_decisions(&tickers, &p, &all).unwrap();
        assert_eq!(net.num_edges(), 3);
        assert!(net.has_edge(2, 1));
        let r = SymmetricMatrix::new(nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 1.0, -0.3, 0.1, -0.3, 1.0])).unwrap();
        assert_eq!(threshold_network(&tickers, &r, 0.2, false).unwrap().num_edges(), 2);
        assert_eq!(threshold_network(&tickers, &r, 0.2, true).unwrap().num_edges(), 1);
    }
}
