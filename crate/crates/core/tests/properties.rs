use harvest_core::dataset::{
    compute_quantiles, load_csv, stratified_kfold, CsvSchema, Dataset, FeatureGroup, FeatureMeta,
    QuantileSummary, Target,
};
use harvest_core::ensemble::{grow_forest, ForestParams, SplitTest};
use harvest_core::eval::{bootstrap_ci, roc_auc, BootstrapParams};
use harvest_core::interpret::ordinalize;
use harvest_core::nodeharvest::{
    harvest_candidates, CandidateParams, HarvestModel, NodeUid, Rule, TrainingSummary,
};
use proptest::prelude::*;

fn dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset<f64> {
    let meta = (0..rows[0].len())
        .map(|i| FeatureMeta {
            name: format!("f{i}"),
            group: FeatureGroup::Derived,
            index: i,
        })
        .collect();
    Dataset::new(rows, meta, "label", Target::Binary(labels), None).unwrap()
}

fn table(n_features: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8usize..60).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-50.0..50.0f64, n_features), n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec((0u32..25).prop_map(f64::from), n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

fn both_classes(y: &[u8]) -> bool {
    y.contains(&0) && y.contains(&1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantiles_are_ordered_and_span_the_data((rows, labels) in table(2)) {
        let d = dataset(rows, labels);
        for f in 0..2 {
            let q = compute_quantiles(&d, f);
            let p = q.points();
            prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
            let col = d.column(f);
            prop_assert_eq!(p[0], col.iter().copied().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(p[4], col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }

    #[test]
    fn auc_complement_is_exact((s, y) in scored()) {
        prop_assume!(both_classes(&y));
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let a = roc_auc(&s, &y).unwrap().auc;
        let b = roc_auc(&s, &flipped).unwrap().auc;
        prop_assert_eq!(a + b, 1.0);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_ignores_increasing_transforms((s, y) in scored(), shift in -5.0..5.0f64) {
        prop_assume!(both_classes(&y));
        let t: Vec<f64> = s.iter().map(|v| (v / 4.0 + shift).exp()).collect();
        prop_assert_eq!(roc_auc(&s, &y).unwrap().auc, roc_auc(&t, &y).unwrap().auc);
    }

    #[test]
    fn ordinal_labels_are_monotone(
        mut pts in prop::collection::vec(-10.0..10.0f64, 5),
        mut t in prop::collection::vec(-15.0..15.0f64, 2..20),
    ) {
        pts.sort_by(f64::total_cmp);
        let q = QuantileSummary {
            feature_index: 0,
            q0_min: pts[0],
            q1: pts[1],
            q2_median: pts[2],
            q3: pts[3],
            q4_max: pts[4],
        };
        t.sort_by(f64::total_cmp);
        let labels: Vec<_> = t.iter().map(|&v| ordinalize(v, &q)).collect();
        prop_assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn predictions_stay_in_unit_interval(
        rules in prop::collection::vec(
            (0usize..3, any::<bool>(), -1.0..1.0f64, 0.0..=1.0f64, prop_oneof![Just(0.0), 0.0..5.0f64]),
            0..10,
        ),
        root in (0.0..=1.0f64, prop_oneof![Just(0.0), 0.0..5.0f64]),
        xs in prop::collection::vec(prop::collection::vec(-1.5..1.5f64, 3), 1..20),
    ) {
        let mut all = vec![Rule {
            node_uid: NodeUid { tree: 0, node: 0 },
            conditions: vec![],
            mu: root.0,
            sample_count: 10,
            weight: root.1,
        }];
        for (i, (f, le, t, mu, w)) in rules.into_iter().enumerate() {
            let c = if le { SplitTest::le(f, t) } else { SplitTest::gt(f, t) };
            all.push(Rule {
                node_uid: NodeUid { tree: 1, node: i + 1 },
                conditions: vec![c],
                mu,
                sample_count: 5,
                weight: w,
            });
        }
        let m = HarvestModel {
            rules: all,
            features: vec![],
            quantiles: vec![],
            decision_threshold: 0.5,
            training: TrainingSummary {
                n_rows: 10,
                positive_fraction: root.0,
                n_candidates: 1,
                surrogate: String::new(),
                objective: 0.0,
                root_objective: 0.0,
                iterations: 0,
            },
        };
        for x in &xs {
            let p = m.predict(x);
            prop_assert!((0.0..=1.0).contains(&p), "p = {}", p);
            let e = m.explain(x, None);
            prop_assert!(!e.active.is_empty());
            prop_assert_eq!(e.probability.to_bits(), p.to_bits());
        }
    }

    #[test]
    fn folds_partition_rows_and_balance_classes((rows, labels) in table(1), k in 2usize..5, seed in 0u64..1000) {
        let d = dataset(rows, labels.clone());
        let plan = match stratified_kfold(&d, k, seed) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(plan.assignments.len(), d.n_rows());
        let mut seen = vec![0usize; d.n_rows()];
        for f in 0..k {
            for r in plan.test_rows(f) {
                seen[r] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for class in 0..2u8 {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| plan.test_rows(f).iter().filter(|&&r| labels[r] == class).count())
                .collect();
            let lo = per_fold.iter().min().unwrap();
            let hi = per_fold.iter().max().unwrap();
            prop_assert!(hi - lo <= 1, "{:?}", per_fold);
        }
        prop_assert_eq!(stratified_kfold(&d, k, seed).unwrap(), plan);
    }

    #[test]
    fn bootstrap_bounds_are_reproducible(xs in prop::collection::vec(0.0..1.0f64, 2..40), seed in 0u64..100) {
        let params = BootstrapParams { n_resamples: 50, level: 0.9, seed };
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap_ci(xs.len(), mean, &params).unwrap();
        let b = bootstrap_ci(xs.len(), mean, &params).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.lower <= a.upper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_specific_rules_have_fewer_members((rows, labels) in table(3), seed in 0u64..50) {
        prop_assume!(both_classes(&labels));
        let d = dataset(rows, labels);
        let forest = grow_forest(
            &d,
            &ForestParams { n_trees: 6, max_depth: 3, min_samples_leaf: 2, ..Default::default() },
            seed,
        )
        .unwrap();
        let params = CandidateParams { min_samples: 2, ..Default::default() };
        let set = harvest_candidates(&forest, &d, &params).unwrap();
        for (a, ra) in set.rules.iter().enumerate() {
            let members: Vec<u32> = (0..d.n_rows() as u32)
                .filter(|&r| ra.matches(d.row(r as usize)))
                .collect();
            prop_assert_eq!(&members, &set.members[a]);
            for (b, rb) in set.rules.iter().enumerate() {
                if a == b || !rb.conditions.iter().all(|c| ra.conditions.contains(c)) {
                    continue;
                }
                prop_assert!(set.members[a].iter().all(|r| set.members[b].binary_search(r).is_ok()));
                prop_assert!(ra.sample_count <= rb.sample_count);
            }
        }
    }

    #[test]
    fn csv_round_trip((rows, labels) in table(3)) {
        let d = dataset(rows, labels);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut bytes = Vec::new();
        d.write_csv(&mut bytes).unwrap();
        std::fs::write(&path, bytes).unwrap();
        let back: Dataset<f64> = load_csv(&path, &CsvSchema::new("label")).unwrap();
        prop_assert_eq!(back, d);
    }
}
