use hdcov::classify::{self, LabeledDataset};
use hdcov::inference::{bh_procedure, correlation_pvalues};
use hdcov::regularize::{approx_factor, cv_tune, CvConfig, CvMethod, ThresholdKind, ThresholdRule};
use hdcov::rng::SeedTree;
use hdcov::{DataMatrix, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn band_cv_picks_zero_for_diagonal_covariance() {
    let tree = SeedTree::new(201);
    let sigma = SymmetricMatrix::from_diagonal(&(0..10).map(|j| 1.0 + 0.1 * j as f64).collect::<Vec<_>>());
    let mut zero = 0;
    for r in 0..100 {
        let x = DataMatrix::gaussian(100, &sigma, &mut tree.task_rng(r)).unwrap();
        let cfg = CvConfig::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], r);
        zero += (cv_tune(&x, CvMethod::Band, &cfg).unwrap().selected == 0.0) as usize;
    }
    assert!(zero >= 80, "{zero}/100");
}

#[test]
fn one_factor_loading_recovers_spike() {
    let (n, p) = (500, 50);
    let mut rng = SeedTree::new(202).rng();
    let beta = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = &beta * (10f64.sqrt() / beta.norm());
    let sigma = SymmetricMatrix::symmetrized(&beta * beta.transpose() + DMatrix::identity(p, p));
    let x = DataMatrix::gaussian(n, &sigma, &mut rng).unwrap();
    let rule = ThresholdRule::universal(ThresholdKind::Soft, 0.1).unwrap();
    let f = approx_factor(&x, 1, &rule).unwrap();
    let loading = f.loadings.column(0);
    let cos = loading.dot(&beta).abs() / (loading.norm() * beta.norm());
    assert!(cos >= 0.95, "{cos}");
}

#[test]
fn chain_fdr_network_omits_the_indirect_edge_at_rate_one_minus_alpha() {
    // X1 → X2 → X3 with X3 independent of X1 given X2; both true edges are
    // always found, so the indirect one enters at level alpha
    let tree = SeedTree::new(203);
    let reps = 2000;
    let mut absent = 0;
    for r in 0..reps {
        let mut rng = tree.task_rng(r);
        let x = DMatrix::from_fn(500, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut chain = x.clone();
        for i in 0..500 {
            chain[(i, 1)] = 0.6 * chain[(i, 0)] + 0.8 * x[(i, 1)];
            chain[(i, 2)] = 0.6 * chain[(i, 1)] + 0.8 * x[(i, 2)];
        }
        let pv = correlation_pvalues(&DataMatrix::new(chain).unwrap(), true).unwrap();
        let d = bh_procedure(&pv, 0.1).unwrap();
        let k = pv.labels.iter().position(|&l| l == (0, 2)).unwrap();
        absent += !d.rejected[k] as usize;
    }
    let rate = absent as f64 / reps as f64;
    let sd = (0.9 * 0.1 / reps as f64).sqrt();
    assert!(rate >= 0.9 - 3.0 * sd, "{absent}/{reps}");
    assert!(rate <= 0.9 + 3.0 * sd, "{absent}/{reps}");
}

fn centroid_accuracy(p: usize, tree: &SeedTree) -> f64 {
    let (n_per, test_per, gap) = (20, 200, 0.25);
    let mut total = 0.0;
    for r in 0..20 {
        let mut rng = tree.task_rng(r);
        let mut draw = |rows: usize, shift: f64| DMatrix::from_fn(rows, p, |_, _| rng.sample::<f64, _>(StandardNormal) + shift);
        let train = DMatrix::from_rows(&draw(n_per, 0.0).row_iter().chain(draw(n_per, gap).row_iter()).map(|r| r.into_owned()).collect::<Vec<_>>());
        let labels: Vec<usize> = (0..2 * n_per).map(|i| 1 + i / n_per).collect();
        let model = classify::centroid_train(&LabeledDataset::new(train, labels).unwrap());
        let (a, b) = (draw(test_per, 0.0), draw(test_per, gap));
        let correct = (0..test_per)
            .filter(|&i| classify::centroid_classify(&model, &a.row(i).transpose()) == 1)
            .count()
            + (0..test_per).filter(|&i| classify::centroid_classify(&model, &b.row(i).transpose()) == 2).count();
        total += correct as f64 / (2 * test_per) as f64;
    }
    total / 20.0
}

#[test]
fn centroid_accuracy_grows_with_dimension() {
    let tree = SeedTree::new(204);
    let acc: Vec<f64> = [10, 100, 1000].iter().map(|&p| centroid_accuracy(p, &tree.child(p as u64))).collect();
    assert!(acc[0] < acc[1] && acc[1] < acc[2], "{acc:?}");
    assert!(acc[2] >= 0.99, "{acc:?}");
}
