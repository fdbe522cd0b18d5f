//! Classifiers for labelled high-dimensional data: Fisher (Mahalanobis)
//! discriminant, Gaussian naive Bayes, nearest centroid, k-nearest
//! neighbours, a linear hinge-loss SVM, and discrete and real AdaBoost with
//! decision stumps.
//!
//! Labels are `1..=K`. Binary learners map class 1 to `-1` and class 2 to
//! `+1`. Every tie resolves to the smaller class index.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Floor applied to per-class feature variances in naive Bayes.
pub const NB_VARIANCE_FLOOR: f64 = 1e-9;
/// Clamp for the weighted error of a discrete boosting round.
pub const ERROR_CLAMP: f64 = 1e-6;
/// Clamp for leaf probabilities in real boosting.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    x: DMatrix<f64>,
    y: Vec<usize>,
    k: usize,
}

impl LabeledDataset {
    /// `K` is the largest label; every class in `1..=K` must appear.
    pub fn new(x: DMatrix<f64>, y: Vec<usize>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: format!("{} labels", x.nrows()), found: y.len().to_string() });
        }
        if y.is_empty() || x.ncols() == 0 {
            return Err(invalid("dataset needs at least one observation and one feature"));
        }
        if let Some((idx, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: idx % x.nrows(), col: idx / x.nrows() });
        }
        if y.contains(&0) {
            return Err(invalid("labels start at 1"));
        }
        let k = *y.iter().max().unwrap();
        for class in 1..=k {
            if !y.contains(&class) {
                return Err(invalid(format!("class {class} has no observations")));
            }
        }
        Ok(Self { x, y, k })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    /// Labels as `±1`; requires exactly two classes.
    pub fn signs(&self) -> Result<Vec<f64>> {
        if self.k != 2 {
            return Err(invalid(format!("binary learner needs exactly 2 classes, found {}", self.k)));
        }
        Ok(self.y.iter().map(|&c| if c == 1 { -1.0 } else { 1.0 }).collect())
    }

    fn class_rows(&self, class: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y[i] == class).collect()
    }

    fn class_mean(&self, rows: &[usize]) -> DVector<f64> {
        let mut m = DVector::zeros(self.p());
        for &i in rows {
            m += self.x.row(i).transpose();
        }
        m / rows.len() as f64
    }
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn sign_to_class(v: f64) -> usize {
    if v > 0.0 { 2 } else { 1 }
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherModel {
    pub means: Vec<Vec<f64>>,
    #[serde(skip)]
    pub precision: DMatrix<f64>,
    /// True when the pooled covariance was singular and a pseudo-inverse
    /// stands in for its inverse.
    pub pseudo_inverse: bool,
}

/// `sqrt((x-μ)ᵀ P (x-μ))`, clamped at zero for numerically indefinite `P`.
pub fn mahalanobis(x: &DVector<f64>, mu: &DVector<f64>, precision: &DMatrix<f64>) -> f64 {
    let d = x - mu;
    d.dot(&(precision * &d)).max(0.0).sqrt()
}

/// Class means and the inverse of the pooled within-class covariance
/// (divisor `n - K`).
pub fn fisher_train(data: &LabeledDataset) -> Result<FisherModel> {
    let p = data.p();
    let mut means = Vec::with_capacity(data.k);
    let mut pooled = DMatrix::zeros(p, p);
    for class in 1..=data.k {
        let rows = data.class_rows(class);
        let mu = data.class_mean(&rows);
        for &i in &rows {
            let d = data.x.row(i).transpose() - &mu;
            pooled += &d * d.transpose();
        }
        means.push(mu);
    }
    let dof = data.n().saturating_sub(data.k).max(1);
    pooled /= dof as f64;
    let scale = pooled.diagonal().amax().max(f64::MIN_POSITIVE);
    let (precision, pseudo_inverse) = match pooled.clone().cholesky() {
        Some(ch) if ch.l().diagonal().iter().all(|&l| l * l > 1e-12 * scale) => (ch.inverse(), false),
        _ => {
            let pinv = pooled
                .pseudo_inverse(1e-10 * scale)
                .map_err(|e| Error::Singular(format!("pseudo-inverse failed: {e}")))?;
            (pinv, true)
        }
    };
    Ok(FisherModel {
        means: means.iter().map(|m| m.iter().copied().collect()).collect(),
        precision,
        pseudo_inverse,
    })
}

pub fn fisher_classify(model: &FisherModel, x: &DVector<f64>) -> usize {
    1 + argmin_first(model.means.iter().map(|m| mahalanobis(x, &DVector::from_column_slice(m), &model.precision)))
}

#[derive(Debug, Clone, Serialize)]
pub struct NaiveBayesModel {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

impl NaiveBayesModel {
    /// Replaces the empirical class frequencies.
    pub fn with_priors(mut self, priors: Vec<f64>) -> Result<Self> {
        let total: f64 = priors.iter().sum();
        if priors.len() != self.priors.len() || priors.iter().any(|&v| !(v > 0.0)) || !total.is_finite() {
            return Err(invalid("priors must be positive, one per class"));
        }
        self.priors = priors.iter().map(|v| v / total).collect();
        Ok(self)
    }

    /// `log π(k) + Σ_j log N(x_j; μ_kj, σ²_kj)` for each class.
    pub fn log_posteriors(&self, x: &DVector<f64>) -> Vec<f64> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        (0..self.priors.len())
            .map(|k| {
                let ll: f64 = x
                    .iter()
                    .zip(&self.means[k])
                    .zip(&self.variances[k])
                    .map(|((&xv, &m), &v)| -0.5 * (ln2pi + v.ln() + (xv - m).powi(2) / v))
                    .sum();
                self.priors[k].ln() + ll
            })
            .collect()
    }
}

/// Per-class Gaussian marginals with maximum-likelihood variances.
pub fn naive_bayes_train(data: &LabeledDataset) -> NaiveBayesModel {
    let mut means = Vec::with_capacity(data.k);
    let mut variances = Vec::with_capacity(data.k);
    let mut priors = Vec::with_capacity(data.k);
    for class in 1..=data.k {
        let rows = data.class_rows(class);
        let mu = data.class_mean(&rows);
        let mut var = DVector::zeros(data.p());
        for &i in &rows {
            let d = data.x.row(i).transpose() - &mu;
            var += d.component_mul(&d);
        }
        var /= rows.len() as f64;
        means.push(mu.iter().copied().collect());
        variances.push(var.iter().map(|&v| v.max(NB_VARIANCE_FLOOR)).collect());
        priors.push(rows.len() as f64 / data.n() as f64);
    }
    NaiveBayesModel { means, variances, priors }
}

pub fn naive_bayes_classify(model: &NaiveBayesModel, x: &DVector<f64>) -> usize {
    1 + argmin_first(model.log_posteriors(x).into_iter().map(|v| -v))
}

#[derive(Debug, Clone, Serialize)]
pub struct CentroidModel {
    pub centroids: Vec<Vec<f64>>,
}

pub fn centroid_train(data: &LabeledDataset) -> CentroidModel {
    let centroids = (1..=data.k)
        .map(|class| data.class_mean(&data.class_rows(class)).iter().copied().collect())
        .collect();
    CentroidModel { centroids }
}

pub fn centroid_classify(model: &CentroidModel, x: &DVector<f64>) -> usize {
    1 + argmin_first(
        model
            .centroids
            .iter()
            .map(|c| c.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()),
    )
}

/// Majority vote among the `k` nearest training points. For two classes
/// this is the sign of the mean `±1` label. Distance ties go to the smaller
/// training index.
pub fn knn_classify(train: &LabeledDataset, x: &DVector<f64>, k: usize) -> Result<usize> {
    if k == 0 || k > train.n() {
        return Err(invalid(format!("k must lie in 1..={}, got {k}", train.n())));
    }
    if x.len() != train.p() {
        return Err(Error::DimensionMismatch { expected: format!("{} features", train.p()), found: x.len().to_string() });
    }
    let mut dist: Vec<(f64, usize)> = (0..train.n())
        .map(|i| ((train.x.row(i).transpose() - x).norm_squared(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; train.k];
    for &(_, i) in &dist[..k] {
        votes[train.y[i] - 1] += 1;
    }
    Ok(1 + argmin_first(votes.iter().map(|&v| -(v as f64))))
}

pub fn hinge(x: f64) -> f64 {
    (1.0 - x).max(0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearSvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    /// Objective at the returned iterate.
    pub objective: f64,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &DVector<f64>) -> f64 {
        self.w.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    pub fn classify(&self, x: &DVector<f64>) -> usize {
        sign_to_class(self.decision(x))
    }
}

/// `(1/n) Σ H(y_i (wᵀx_i + b)) + λ‖w‖²`.
pub fn svm_objective(data: &LabeledDataset, w: &DVector<f64>, b: f64, lambda: f64) -> Result<f64> {
    let y = data.signs()?;
    let loss: f64 = (0..data.n())
        .map(|i| hinge(y[i] * (data.x.row(i).transpose().dot(w) + b)))
        .sum::<f64>()
        / data.n() as f64;
    Ok(loss + lambda * w.norm_squared())
}

/// Full-batch subgradient descent with step `1/(λt)`, returning the best
/// iterate seen (the start `w = 0, b = 0` included).
pub fn svm_train(data: &LabeledDataset, lambda: f64, epochs: usize) -> Result<LinearSvmModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let y = data.signs()?;
    let n = data.n() as f64;
    let mut w = DVector::zeros(data.p());
    let mut b = 0.0;
    let mut best = (svm_objective(data, &w, b, lambda)?, w.clone(), b);
    for t in 1..=epochs {
        let mut gw = &w * (2.0 * lambda);
        let mut gb = 0.0;
        for i in 0..data.n() {
            let xi = data.x.row(i).transpose();
            if y[i] * (xi.dot(&w) + b) < 1.0 {
                gw -= xi * (y[i] / n);
                gb -= y[i] / n;
            }
        }
        let step = 1.0 / (lambda * t as f64);
        w -= gw * step;
        b -= gb * step;
        let obj = svm_objective(data, &w, b, lambda)?;
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    Ok(LinearSvmModel { w: best.1.iter().copied().collect(), b: best.2, lambda, objective: best.0 })
}

/// `polarity` if `x_feature > split`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stump {
    pub feature: usize,
    pub split: f64,
    pub polarity: f64,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.split { self.polarity } else { -self.polarity }
    }
}

/// Candidate splits for one feature: midpoints between consecutive
/// distinct values, with the weight sums of each label below the split.
fn feature_splits(data: &LabeledDataset, y: &[f64], w: &[f64], j: usize) -> Vec<(f64, f64, f64)> {
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| data.x[(a, j)].total_cmp(&data.x[(b, j)]).then(a.cmp(&b)));
    let mut out = Vec::new();
    let (mut neg, mut pos) = (0.0, 0.0);
    for idx in 0..order.len() {
        let i = order[idx];
        if y[i] > 0.0 { pos += w[i] } else { neg += w[i] }
        if let Some(&next) = order.get(idx + 1) {
            let (a, b) = (data.x[(i, j)], data.x[(next, j)]);
            if b > a {
                out.push((0.5 * (a + b), neg, pos));
            }
        }
    }
    out
}

/// Stump with minimal weighted error over every feature, midpoint split and
/// polarity. Exact ties (within 1e-12) keep the earliest candidate in
/// feature, split, then polarity (`+1` first) order.
pub fn fit_stump(data: &LabeledDataset, y: &[f64], w: &[f64]) -> (Stump, f64) {
    let total: f64 = w.iter().sum();
    let total_pos: f64 = (0..y.len()).filter(|&i| y[i] > 0.0).map(|i| w[i]).sum();
    let mut best: Option<(Stump, f64)> = None;
    for j in 0..data.p() {
        for (split, neg_below, pos_below) in feature_splits(data, y, w, j) {
            let neg_above = total - total_pos - neg_below;
            // polarity +1 errs on positives below and negatives above
            let err_plus = pos_below + neg_above;
            let err_minus = total - err_plus;
            for (polarity, err) in [(1.0, err_plus), (-1.0, err_minus)] {
                if best.as_ref().is_none_or(|b| err < b.1 - 1e-12) {
                    best = Some((Stump { feature: j, split, polarity }, err));
                }
            }
        }
    }
    best.unwrap_or_else(|| {
        // every feature is constant: predict the heavier label everywhere
        let polarity = if total_pos > total - total_pos { 1.0 } else { -1.0 };
        let split = data.x[(0, 0)] - 1.0;
        (Stump { feature: 0, split, polarity }, total.min(total - total_pos).min(total_pos))
    })
}

/// Real-valued stump: `left` if `x_feature ≤ split`, else `right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealStump {
    pub feature: usize,
    pub split: f64,
    pub left: f64,
    pub right: f64,
    /// Weighted class-`+1` fractions in each leaf, after clamping.
    pub p_left: f64,
    pub p_right: f64,
}

impl RealStump {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.split { self.right } else { self.left }
    }
}

/// `½ log(p / (1 - p))` with `p` clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn half_logit(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    0.5 * (p / (1.0 - p)).ln()
}

fn leaf_probability(pos: f64, neg: f64) -> f64 {
    if pos + neg > 0.0 { (pos / (pos + neg)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP) } else { 0.5 }
}

/// Split minimizing `Z = 2 Σ_leaves sqrt(W₊ W₋)`, the normalizer of the
/// next round's weights.
pub fn fit_real_stump(data: &LabeledDataset, y: &[f64], w: &[f64]) -> RealStump {
    let total_pos: f64 = (0..y.len()).filter(|&i| y[i] > 0.0).map(|i| w[i]).sum();
    let total_neg: f64 = w.iter().sum::<f64>() - total_pos;
    let mut best: Option<(f64, RealStump)> = None;
    for j in 0..data.p() {
        for (split, neg_below, pos_below) in feature_splits(data, y, w, j) {
            let (pos_above, neg_above) = (total_pos - pos_below, total_neg - neg_below);
            let z = 2.0 * ((pos_below * neg_below).max(0.0).sqrt() + (pos_above * neg_above).max(0.0).sqrt());
            if best.as_ref().is_none_or(|b| z < b.0 - 1e-12) {
                let p_left = leaf_probability(pos_below, neg_below);
                let p_right = leaf_probability(pos_above, neg_above);
                let stump = RealStump {
                    feature: j,
                    split,
                    left: half_logit(p_left),
                    right: half_logit(p_right),
                    p_left,
                    p_right,
                };
                best = Some((z, stump));
            }
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| {
        let p = leaf_probability(total_pos, total_neg);
        let f = half_logit(p);
        RealStump { feature: 0, split: data.x[(0, 0)], left: f, right: f, p_left: p, p_right: p }
    })
}

#[derive(Debug, Clone, Serialize)]
pub enum BaseLearner {
    Discrete { stump: Stump, coefficient: f64, error: f64 },
    Real(RealStump),
}

impl BaseLearner {
    /// Contribution to `F(x)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            BaseLearner::Discrete { stump, coefficient, .. } => coefficient * stump.predict(x),
            BaseLearner::Real(s) => s.predict(x),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoostRound {
    pub learner: BaseLearner,
    /// Normalized weights after this round's update.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaBoostModel {
    pub rounds: Vec<BoostRound>,
}

impl AdaBoostModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.score_first(x, self.rounds.len())
    }

    /// `F` built from the first `m` rounds.
    pub fn score_first(&self, x: &[f64], m: usize) -> f64 {
        self.rounds[..m].iter().map(|r| r.learner.score(x)).sum()
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        sign_to_class(self.score(x))
    }

    pub fn classify_first(&self, x: &[f64], m: usize) -> usize {
        sign_to_class(self.score_first(x, m))
    }
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= s;
    }
}

fn row(data: &LabeledDataset, i: usize) -> Vec<f64> {
    data.x.row(i).iter().copied().collect()
}

/// `c = log((1 - e) / e)` with `e` clamped to `[ERROR_CLAMP, 1 - ERROR_CLAMP]`.
pub fn discrete_coefficient(e: f64) -> f64 {
    let e = e.clamp(ERROR_CLAMP, 1.0 - ERROR_CLAMP);
    ((1.0 - e) / e).ln()
}

pub fn discrete_adaboost(data: &LabeledDataset, m: usize) -> Result<AdaBoostModel> {
    if m == 0 {
        return Err(invalid("number of rounds must be at least 1"));
    }
    let y = data.signs()?;
    let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| row(data, i)).collect();
    let mut w = vec![1.0 / data.n() as f64; data.n()];
    let mut rounds = Vec::with_capacity(m);
    for _ in 0..m {
        let (stump, _) = fit_stump(data, &y, &w);
        let miss: Vec<bool> = rows.iter().zip(&y).map(|(x, &yi)| stump.predict(x) != yi).collect();
        let error: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        let coefficient = discrete_coefficient(error);
        for (v, &mi) in w.iter_mut().zip(&miss) {
            if mi {
                *v *= coefficient.exp();
            }
        }
        normalize(&mut w);
        rounds.push(BoostRound { learner: BaseLearner::Discrete { stump, coefficient, error }, weights: w.clone() });
    }
    Ok(AdaBoostModel { rounds })
}

pub fn real_adaboost(data: &LabeledDataset, m: usize) -> Result<AdaBoostModel> {
    if m == 0 {
        return Err(invalid("number of rounds must be at least 1"));
    }
    let y = data.signs()?;
    let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| row(data, i)).collect();
    let mut w = vec![1.0 / data.n() as f64; data.n()];
    let mut rounds = Vec::with_capacity(m);
    for _ in 0..m {
        let stump = fit_real_stump(data, &y, &w);
        for ((v, x), &yi) in w.iter_mut().zip(&rows).zip(&y) {
            *v *= (-yi * stump.predict(x)).exp();
        }
        normalize(&mut w);
        rounds.push(BoostRound { learner: BaseLearner::Real(stump), weights: w.clone() });
    }
    Ok(AdaBoostModel { rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ds(rows: &[&[f64]], y: &[usize]) -> LabeledDataset {
        let p = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        LabeledDataset::new(DMatrix::from_row_slice(rows.len(), p, &flat), y.to_vec()).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(DMatrix::zeros(2, 1), vec![1, 3]).is_err());
        assert!(LabeledDataset::new(DMatrix::zeros(2, 1), vec![0, 1]).is_err());
        assert!(LabeledDataset::new(DMatrix::from_element(2, 1, f64::NAN), vec![1, 2]).is_err());
        assert!(ds(&[&[0.0], &[1.0], &[2.0]], &[1, 2, 3]).signs().is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        let prec = DMatrix::from_diagonal(&v(&[1.0, 0.25]));
        assert!((mahalanobis(&v(&[0.0, 2.0]), &v(&[0.0, 0.0]), &prec) - 1.0).abs() < 1e-15);
        let model = FisherModel {
            means: vec![vec![0.0, 0.0], vec![4.0, 0.0]],
            precision: DMatrix::identity(2, 2),
            pseudo_inverse: false,
        };
        assert_eq!(fisher_classify(&model, &v(&[1.0, 3.0])), 1);
        assert_eq!(fisher_classify(&model, &v(&[3.0, -1.0])), 2);
        assert_eq!(fisher_classify(&model, &v(&[2.0, 5.0])), 1);
    }

    #[test]
    fn fisher_flags_singular_pooled_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let x = DMatrix::from_fn(6, 10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = LabeledDataset::new(x, vec![1, 1, 1, 2, 2, 2]).unwrap();
        assert!(fisher_train(&data).unwrap().pseudo_inverse);
        let x = DMatrix::from_fn(60, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..60).map(|i| 1 + i % 2).collect();
        assert!(!fisher_train(&LabeledDataset::new(x, y).unwrap()).unwrap().pseudo_inverse);
    }

    #[test]
    fn naive_bayes_boundaries() {
        let model = NaiveBayesModel { means: vec![vec![0.0], vec![2.0]], variances: vec![vec![1.0], vec![1.0]], priors: vec![0.5, 0.5] };
        assert_eq!(naive_bayes_classify(&model, &v(&[0.999])), 1);
        assert_eq!(naive_bayes_classify(&model, &v(&[1.001])), 2);
        assert_eq!(naive_bayes_classify(&model, &v(&[1.0])), 1);
        // equal unit variances, gap 2: boundary moves to 1 + log(π₁/π₂)/2
        let model = model.with_priors(vec![0.8, 0.2]).unwrap();
        let boundary = 1.0 + (0.8f64 / 0.2).ln() / 2.0;
        assert_eq!(naive_bayes_classify(&model, &v(&[boundary - 1e-6])), 1);
        assert_eq!(naive_bayes_classify(&model, &v(&[boundary + 1e-6])), 2);
    }

    #[test]
    fn naive_bayes_training_floors_variance() {
        let data = ds(&[&[1.0, 0.0], &[1.0, 2.0], &[3.0, 1.0], &[5.0, 1.0]], &[1, 1, 2, 2]);
        let m = naive_bayes_train(&data);
        assert_eq!(m.variances[0][0], NB_VARIANCE_FLOOR);
        assert!((m.variances[0][1] - 1.0).abs() < 1e-15);
        assert!((m.priors.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centroid_examples() {
        let model = CentroidModel { centroids: vec![vec![0.0, 0.0], vec![4.0, 0.0]] };
        assert_eq!(centroid_classify(&model, &v(&[1.0, 0.0])), 1);
        assert_eq!(centroid_classify(&model, &v(&[2.0, 7.0])), 1);
        assert_eq!(centroid_classify(&model, &v(&[2.5, 0.0])), 2);
    }

    #[test]
    fn knn_examples() {
        let data = ds(&[&[0.0], &[1.0], &[2.0], &[3.0], &[10.0]], &[2, 2, 1, 1, 1]);
        assert_eq!(knn_classify(&data, &v(&[0.2]), 1).unwrap(), 2);
        // neighbours of 0.9: 1.0 (+1), 0.0 (+1), 2.0 (-1)
        assert_eq!(knn_classify(&data, &v(&[0.9]), 3).unwrap(), 2);
        for x in [-5.0, 0.0, 1.0, 50.0] {
            assert_eq!(knn_classify(&data, &v(&[x]), 5).unwrap(), 1);
        }
        // distance tie between indices 1 and 2 keeps index 1
        assert_eq!(knn_classify(&data, &v(&[1.5]), 1).unwrap(), 2);
        assert!(knn_classify(&data, &v(&[0.0]), 6).is_err());
    }

    #[test]
    fn svm_examples() {
        assert_eq!(hinge(0.5), 0.5);
        assert_eq!(hinge(2.0), 0.0);
        let data = ds(&[&[-2.0], &[2.0]], &[1, 2]);
        let m = svm_train(&data, 1e-3, 200).unwrap();
        assert_eq!(m.classify(&v(&[-2.0])), 1);
        assert_eq!(m.classify(&v(&[2.0])), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let x = DMatrix::from_fn(80, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<usize> = (0..80).map(|i| if x[(i, 0)] + 0.5 * x[(i, 1)] + 0.3 * rng.sample::<f64, _>(StandardNormal) > 0.0 { 2 } else { 1 }).collect();
        let data = LabeledDataset::new(x, y).unwrap();
        let m = svm_train(&data, 0.05, 300).unwrap();
        let base = svm_objective(&data, &DVector::zeros(4), 0.0, 0.05).unwrap();
        assert!(m.objective <= base);
        assert!(svm_train(&ds(&[&[0.0], &[1.0]], &[1, 1]), 0.1, 10).is_err());
    }

    #[test]
    fn boosting_formulas() {
        assert!((discrete_coefficient(0.25) - 3f64.ln()).abs() < 1e-15);
        assert!((half_logit(0.75) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(half_logit(0.5), 0.0);
        assert!(discrete_coefficient(0.0).is_finite());
    }

    #[test]
    fn discrete_adaboost_hand_trace() {
        // worked by hand: splits at 1.5, 2.5, 3.5; ties keep the earliest candidate
        let data = ds(&[&[1.0], &[2.0], &[3.0], &[4.0]], &[2, 1, 2, 2]);
        let model = discrete_adaboost(&data, 3).unwrap();
        let expected = [
            (2.5, 1.0, 0.25, 3f64.ln(), [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]),
            (1.5, -1.0, 1.0 / 3.0, 2f64.ln(), [0.375, 0.125, 0.25, 0.25]),
            (2.5, 1.0, 0.375, (5.0f64 / 3.0).ln(), [0.5, 0.1, 0.2, 0.2]),
        ];
        for (round, (split, pol, e, c, w)) in model.rounds.iter().zip(expected) {
            match &round.learner {
                BaseLearner::Discrete { stump, coefficient, error } => {
                    assert_eq!((stump.feature, stump.split, stump.polarity), (0, split, pol));
                    assert!((error - e).abs() < 1e-14);
                    assert!((coefficient - c).abs() < 1e-14);
                }
                _ => unreachable!(),
            }
            for (a, b) in round.weights.iter().zip(w) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reweighting_equalizes_last_learner() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<usize> = (0..40).map(|i| if x[(i, 0)] * x[(i, 1)] > 0.0 { 2 } else { 1 }).collect();
        let data = LabeledDataset::new(x, y).unwrap();
        let signs = data.signs().unwrap();
        let model = discrete_adaboost(&data, 10).unwrap();
        for r in &model.rounds {
            let BaseLearner::Discrete { stump, .. } = &r.learner else { unreachable!() };
            let err: f64 = (0..40).filter(|&i| stump.predict(&row(&data, i)) != signs[i]).map(|i| r.weights[i]).sum();
            assert!((err - 0.5).abs() < 1e-10);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn real_adaboost_separates_linear_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        let x = DMatrix::from_fn(50, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<usize> = (0..50).map(|i| if x[(i, 0)] - 0.7 * x[(i, 1)] > 0.0 { 2 } else { 1 }).collect();
        let data = LabeledDataset::new(x, y.clone()).unwrap();
        let model = real_adaboost(&data, 50).unwrap();
        let pred: Vec<usize> = (0..50).map(|i| model.classify(&row(&data, i))).collect();
        assert_eq!(accuracy(&pred, &y), 1.0);
        for r in &model.rounds {
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn balanced_leaves_leave_weights_unchanged() {
        let data = ds(&[&[0.0], &[0.0], &[1.0], &[1.0]], &[1, 2, 1, 2]);
        let model = real_adaboost(&data, 1).unwrap();
        let BaseLearner::Real(s) = &model.rounds[0].learner else { unreachable!() };
        assert_eq!((s.left, s.right), (0.0, 0.0));
        assert!(model.rounds[0].weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));
    }
}
