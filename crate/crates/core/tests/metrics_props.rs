use featfuse::data::{Dataset, FeatureSchema};
use featfuse::evaluation::{classification_metrics, confusion_matrix, evaluate_feature_subset, Averaging, ConfusionMatrix};
use featfuse::models::{train, Hyperparameters, ModelFamily};
use featfuse::seed;
use proptest::prelude::*;
use rand::Rng;

fn matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..6).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..30, k), k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_are_bounded(mut counts in matrix()) {
        counts[0][1] += 1;
        let k = counts.len();
        let cm = ConfusionMatrix::from_counts((0..k as u32).collect(), counts).unwrap();
        for conv in [Averaging::Macro, Averaging::Micro, Averaging::PositiveClass(1)] {
            let r = classification_metrics(&cm, conv).unwrap();
            for v in [r.accuracy, r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(r.accuracy, cm.trace() as f64 / cm.total() as f64);
        }
        let micro = classification_metrics(&cm, Averaging::Micro).unwrap();
        prop_assert_eq!(micro.precision, micro.accuracy);
        prop_assert_eq!(micro.recall, micro.accuracy);
    }
}

#[test]
fn confusion_counts_and_errors() {
    let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 1, 1], &[0, 1]).unwrap();
    assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 2]]);
    assert!(confusion_matrix(&[], &[], &[0, 1]).is_err());
    assert!(confusion_matrix(&[0, 2], &[0, 0], &[0, 1]).is_err());
    assert!(classification_metrics(&cm, Averaging::PositiveClass(7)).is_err());
}

fn toy(seed_value: u64, n: usize) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels = rows.iter().map(|r| u32::from(r[0] + 0.3 * r[3] > 0.0)).collect();
    Dataset::new(FeatureSchema::new(["a", "b", "c", "d"], "y").unwrap(), rows, labels).unwrap()
}

#[test]
fn subset_evaluation_ignores_feature_order_and_matches_full_training() {
    let train_set = toy(1, 300);
    let test_set = toy(2, 100);
    for family in ModelFamily::INDEPENDENT {
        let hp = Hyperparameters::default_for(family);
        let a = evaluate_feature_subset(&train_set, &test_set, &["d", "a"], family, &hp, 5).unwrap();
        let b = evaluate_feature_subset(&train_set, &test_set, &["a", "d"], family, &hp, 5).unwrap();
        assert_eq!(a, b);
        let all = evaluate_feature_subset(&train_set, &test_set, &["a", "b", "c", "d"], family, &hp, 5).unwrap();
        let model = train(family, &hp, &train_set, 5).unwrap();
        let cm = confusion_matrix(test_set.labels(), &model.predict(test_set.rows()).unwrap(), &[0, 1]).unwrap();
        assert_eq!(all, classification_metrics(&cm, Averaging::PositiveClass(1)).unwrap());
    }
    let empty: [&str; 0] = [];
    assert!(evaluate_feature_subset(&train_set, &test_set, &empty, ModelFamily::LogisticRegression, &Hyperparameters::default_for(ModelFamily::LogisticRegression), 1).is_err());
}
