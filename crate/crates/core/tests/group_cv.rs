mod common;

use fwelnet::group::{penalty_gap, GroupWeights};
use fwelnet::{
    cv_elastic_net, fit_elastic_net, make_folds, optimal_group_weights, penalty_equivalence_check,
    Dataset, Family, GroupStructure, Metric, PathOptions,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grouped_beta() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    proptest::collection::vec(0usize..5, 1..25).prop_flat_map(|labels| {
        let p = labels.len();
        (Just(labels), proptest::collection::vec(prop_oneof![Just(0.0), -4.0..4.0f64], p))
    })
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn optimal_weights_attain_the_bound(
        (labels, beta) in grouped_beta(),
        alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0)],
        lambda in 0.01..5.0f64,
    ) {
        let groups = GroupStructure::new(relabel(&labels)).unwrap();
        let check = penalty_equivalence_check(&beta, &groups, alpha, lambda).unwrap();
        prop_assert!(check.gap.abs() <= 1e-12 * check.rhs.max(1.0), "{check:?}");
        let v = optimal_group_weights(&beta, &groups, alpha).unwrap();
        let total: f64 = v.v.iter().zip(groups.sizes()).map(|(a, s)| a * *s as f64).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn feasible_weights_never_beat_the_bound(
        (labels, beta) in grouped_beta(),
        raw in proptest::collection::vec(0.01..10.0f64, 5),
        alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0)],
    ) {
        let groups = GroupStructure::new(relabel(&labels)).unwrap();
        let u = &raw[..groups.k()];
        let norm: f64 = u.iter().zip(groups.sizes()).map(|(a, s)| a * *s as f64).sum();
        let v = GroupWeights { v: u.iter().map(|a| a / norm).collect() };
        let check = penalty_gap(&beta, &groups, alpha, 1.0, &v).unwrap();
        prop_assert!(check.gap >= -1e-12 * check.rhs.max(1.0), "{check:?}");
    }
}

#[test]
fn cv_curve_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = common::normal_matrix(&mut rng, 47, 8);
    let y = common::gaussian_response(&mut rng, &x, 2.0);
    let data = Dataset::new(x, y.clone(), Family::Gaussian).unwrap();
    let folds = make_folds(47, 5, None, 9).unwrap();
    let opts = PathOptions {
        n_lambda: 15,
        ..PathOptions::default()
    };
    let (full, cv) = cv_elastic_net(&data, None, &opts, Metric::Mse, &folds).unwrap();
    let lambdas = full.path.lambdas.clone();
    assert_eq!(cv.lambdas, lambdas);

    let mut table = vec![vec![0.0; lambdas.len()]; 5];
    for (f, row) in table.iter_mut().enumerate() {
        let train: Vec<usize> = (0..47).filter(|i| folds.fold_of[*i] != f).collect();
        let test: Vec<usize> = (0..47).filter(|i| folds.fold_of[*i] == f).collect();
        let scale = train.len() as f64 / 47.0;
        let o = PathOptions {
            lambdas: Some(lambdas.iter().map(|l| l * scale).collect()),
            ..opts.clone()
        };
        let m = fit_elastic_net(&data.subset(&train), None, &o).unwrap();
        for (i, cell) in row.iter_mut().enumerate() {
            let b = m.path.beta(i);
            *cell = test
                .iter()
                .map(|&r| {
                    let pred = m.path.intercepts[i] + (0..8).map(|j| data.x()[[r, j]] * b[j]).sum::<f64>();
                    (y[r] - pred).powi(2)
                })
                .sum::<f64>()
                / test.len() as f64;
        }
    }
    for i in 0..lambdas.len() {
        let vals: Vec<f64> = table.iter().map(|r| r[i]).collect();
        let mean = vals.iter().sum::<f64>() / 5.0;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((cv.mean[i] - mean).abs() <= 1e-10 * mean);
        assert!((cv.se[i] - sd / 5f64.sqrt()).abs() <= 1e-10 * mean);
    }
    let best = (0..lambdas.len())
        .min_by(|a, b| cv.mean[*a].partial_cmp(&cv.mean[*b]).unwrap())
        .unwrap();
    assert_eq!(cv.index_min, best);
    let bound = cv.mean[best] + cv.se[best];
    let one_se = (0..lambdas.len()).find(|i| cv.mean[*i] <= bound).unwrap();
    assert_eq!(cv.index_1se, one_se);
}
