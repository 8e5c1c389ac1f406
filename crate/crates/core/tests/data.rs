use std::collections::BTreeMap;

use featfuse::data::{
    clean, map_labels, read_csv, split_and_scale, undersample, violations, write_csv, Dataset, FeatureSchema,
    LabelMode, SamplerConfig, SensorGenerator, SENSOR_FEATURES,
};
use proptest::prelude::*;

fn labelled(labels: Vec<u32>) -> Dataset {
    let rows = (0..labels.len()).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
    Dataset::new(FeatureSchema::new(["a", "b"], "y").unwrap(), rows, labels).unwrap()
}

fn counts(labels: &[u32]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn undersampling_balances_to_the_minority(labels in proptest::collection::vec(0u32..3, 6..120), seed in any::<u64>()) {
        let before = counts(&labels);
        prop_assume!(before.len() >= 2);
        let d = labelled(labels);
        let out = undersample(&d, seed).unwrap();
        let after = counts(out.labels());
        let minority = *before.values().min().unwrap();
        prop_assert!(after.values().all(|&c| c == minority));
        prop_assert_eq!(after.len(), before.len());
        prop_assert_eq!(undersample(&d, seed).unwrap(), out);
    }

    #[test]
    fn split_is_stratified_and_scaled_on_train(n in 40usize..200, seed in any::<u64>()) {
        let labels: Vec<u32> = (0..n).map(|i| u32::from(i % 3 == 0)).collect();
        let d = labelled(labels);
        let split = split_and_scale(&d, &SamplerConfig::new(seed, 0.7).unwrap()).unwrap();
        prop_assert_eq!(split.train.n_rows() + split.test.n_rows(), n);
        let train = counts(split.train.labels());
        let all = counts(d.labels());
        for (class, total) in all {
            let expected = (total as f64 * 0.7).round() as i64;
            prop_assert!((train[&class] as i64 - expected).abs() <= 1);
        }
        for j in 0..2 {
            let col = split.train.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn cleaning_drops_missing_and_duplicate_rows() {
    let csv = "a,b,y\n1,2,0\n1,2,0\n1,,1\n3,4,1\n1,2,1\n";
    let d = read_csv(csv.as_bytes(), &FeatureSchema::new(["a", "b"], "y").unwrap()).unwrap();
    let c = clean(&d).unwrap();
    assert_eq!(c.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0], vec![1.0, 2.0]]);
    assert_eq!(c.labels(), &[0, 1, 1]);
}

#[test]
fn binary_mapping_collapses_attack_classes() {
    let d = labelled(vec![0, 1, 2, 4, 8, 16, 0]);
    assert_eq!(map_labels(&d, LabelMode::Binary).unwrap().labels(), &[0, 1, 1, 1, 1, 1, 0]);
    assert_eq!(map_labels(&d, LabelMode::Multiclass).unwrap().labels(), d.labels());
    assert!(map_labels(&labelled(vec![0, 3]), LabelMode::Binary).is_err());
}

#[test]
fn csv_round_trip_preserves_values() {
    let d = SensorGenerator::new(50, 0.5, 3).generate().unwrap();
    let mut buf = Vec::new();
    write_csv(&d, &mut buf).unwrap();
    assert_eq!(read_csv(buf.as_slice(), &FeatureSchema::sensor()).unwrap(), d);
}

#[test]
fn sensor_anomalies_violate_only_planted_ranges() {
    let planted = vec![0, 6];
    let d = SensorGenerator::new(400, 0.25, 9).with_planted(planted.clone()).generate().unwrap();
    assert_eq!(d.labels().iter().filter(|&&l| l == 1).count(), 100);
    for (row, &label) in d.rows().iter().zip(d.labels()) {
        let v = violations(row);
        if label == 0 {
            assert_eq!(v, 0);
        } else {
            assert!(v >= 1);
            for (j, f) in SENSOR_FEATURES.iter().enumerate() {
                if !planted.contains(&j) {
                    assert!(f.range.contains(row[j]));
                }
            }
        }
    }
    assert!(SensorGenerator::new(10, 0.5, 1).with_planted(vec![12]).generate().is_err());
}
