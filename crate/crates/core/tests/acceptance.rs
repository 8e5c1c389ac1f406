//! Acceptance criteria 1-8. Runs as a plain binary and prints one PASS/FAIL
//! line per criterion; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use featfuse::data::{split_and_scale, Dataset, FeatureSchema, SamplerConfig, ScalerParams};
use featfuse::evaluation::{classification_metrics, conformance_check, Averaging, ConfusionMatrix};
use featfuse::explainers::{
    lime_global, permutation_importance, shap_global, shap_values, to_ranks, ExplainerConfig, XaiMethod,
};
use featfuse::fixtures::{self, Setup};
use featfuse::fusion::{fuse_ranks, two_level_fuse, FusionSpec, RankTable};
use featfuse::models::mlp::Mlp;
use featfuse::models::{train, Hyperparameters, ModelFamily, ProbabilisticModel};
use featfuse::pipeline::{emit_report, run_pipeline, synthetic_sensor_config, RunArtifacts, ALL_FEATURES};
use featfuse::seed;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = FusionSpec::default();
    let binary = two_level_fuse(&fixtures::rank_tables(Setup::VeremiBinary).map_err(|e| e.to_string())?, &spec)
        .map_err(|e| e.to_string())?;
    let multi = two_level_fuse(
        &fixtures::rank_tables(Setup::VeremiMulticlass).map_err(|e| e.to_string())?,
        &spec,
    )
    .map_err(|e| e.to_string())?;
    let top = |f: &featfuse::fusion::FusedRanking, k: usize| -> Vec<String> {
        f.top_k(k).unwrap().into_iter().map(|t| t.name).collect()
    };
    let expected_set: BTreeSet<String> = names(&["pos_x", "pos_y", "spd_x", "spd_y"]).into_iter().collect();
    let b_set: BTreeSet<String> = top(&binary.leveled, 4).into_iter().collect();
    ensure(b_set == expected_set, || format!("binary leveled top-4 {b_set:?}"))?;
    let m_set: BTreeSet<String> = top(&multi.leveled, 4).into_iter().collect();
    ensure(m_set == expected_set, || format!("multiclass leveled top-4 {m_set:?}"))?;
    let lime = top(&binary.per_method[&XaiMethod::Lime], 4);
    ensure(lime == names(&["spd_y", "pos_x", "spd_x", "pos_y"]), || format!("binary LIME order {lime:?}"))?;
    let dalex = top(&binary.per_method[&XaiMethod::Permutation], 3);
    ensure(dalex == names(&["pos_x", "pos_y", "spd_x"]), || format!("binary DALEX top-3 {dalex:?}"))?;

    let mut computed = std::collections::BTreeMap::new();
    for setup in Setup::ALL {
        let spec = FusionSpec::with_top_k(setup.top_k());
        let tables = fixtures::rank_tables(setup).map_err(|e| e.to_string())?;
        computed.insert(setup, two_level_fuse(&tables, &spec).map_err(|e| e.to_string())?);
    }
    let report = conformance_check(&computed, &fixtures::published_columns().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(report.passed, || "conformance report has a failing required check".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("4 required cells match, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let tables = fixtures::rank_tables(Setup::VeremiBinary).map_err(|e| e.to_string())?;
    let shap = &tables[&XaiMethod::Shap];
    let fused = fuse_ranks(shap, &FusionSpec::default()).map_err(|e| e.to_string())?;
    let expected = [("pos_x", 13.0), ("spd_y", 11.0), ("pos_y", 9.0), ("spd_x", 3.0), ("pos_z", 0.0), ("spd_z", 0.0)];
    let raw: Vec<Vec<usize>> = (0..shap.feature_count())
        .map(|f| (0..shap.sources().len()).map(|s| shap.rank(f, s)).collect())
        .collect();
    let counted = place_counter(&raw, &[3.0, 2.0, 1.0]);
    for (name, score) in expected {
        let j = shap.feature_names().iter().position(|n| n == name).ok_or(format!("missing {name}"))?;
        ensure(fused.scores[j] == score && counted[j] == score, || {
            format!("{name}: fused {} counter {} expected {score}", fused.scores[j], counted[j])
        })?;
    }

    let mut rng = seed::rng(2024);
    let mut discrepancies = 0;
    let trials = 1000;
    for _ in 0..trials {
        let p = rng.random_range(2..=12);
        let m = rng.random_range(1..=8);
        let raw = random_rank_table(&mut rng, p, m);
        let n_points = rng.random_range(1..=p);
        let mut points: Vec<f64> = (0..n_points).map(|_| rng.random_range(0..6) as f64).collect();
        points.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let table = RankTable::new(
            (0..p).map(|j| format!("f{j}")).collect(),
            (0..m).map(|s| format!("s{s}")).collect(),
            raw.clone(),
        )
        .map_err(|e| e.to_string())?;
        let spec = FusionSpec {
            points: points.clone(),
            top_k: 1,
            ..FusionSpec::default()
        };
        let fused = fuse_ranks(&table, &spec).map_err(|e| e.to_string())?;
        let oracle = place_counter(&raw, &points);
        if fused.scores != oracle || fused.ordering != selection_order(&oracle) {
            discrepancies += 1;
        }
    }
    ensure(discrepancies == 0, || format!("{discrepancies} of {trials} random tables disagree"))?;
    Ok(format!("SHAP scores 13/11/9/3/0/0; {trials} random tables, 0 discrepancies"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(7);
    let mut worst: f64 = 0.0;
    let mut dummies = 0;
    let n_models = 60;
    for i in 0..n_models {
        let p = 2 + i % 3;
        let mut active: Vec<bool> = (0..p).map(|_| rng.random_bool(0.75)).collect();
        active[0] = true;
        let model = PolyModel::random(&mut rng, p, &active);
        let background = random_rows(&mut rng, 5, p);
        let instances = random_rows(&mut rng, 3, p);
        let sm = shap_values(&model, &instances, &background).map_err(|e| e.to_string())?;
        for (k, x) in instances.iter().enumerate() {
            let oracle = permutation_shapley(p, |mask| interventional_value(&model, x, &background, 1, mask));
            for j in 0..p {
                worst = worst.max((sm.phi(k, 0)[j] - oracle[j]).abs());
                if !active[j] {
                    dummies += 1;
                    ensure(sm.phi(k, 0)[j] == 0.0, || format!("dummy feature {j} got {}", sm.phi(k, 0)[j]))?;
                }
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation from permutation oracle {worst:e}"))?;
    ensure(dummies > 0, || "no dummy features were drawn".into())?;

    let mut efficiency: f64 = 0.0;
    let poly6 = PolyModel::random(&mut rng, 6, &[true; 6]);
    let bg6 = random_rows(&mut rng, 10, 6);
    let x6 = random_rows(&mut rng, 10, 6);
    efficiency = efficiency.max(shap_values(&poly6, &x6, &bg6).map_err(|e| e.to_string())?.max_efficiency_error());
    let poly10 = PolyModel::random(&mut rng, 10, &[true; 10]);
    let bg10 = random_rows(&mut rng, 8, 10);
    let x10 = random_rows(&mut rng, 6, 10);
    efficiency =
        efficiency.max(shap_values(&poly10, &x10, &bg10).map_err(|e| e.to_string())?.max_efficiency_error());
    let data = planted_dataset(&mut rng, 400, [1, 4, 7]);
    for family in [ModelFamily::RandomForest, ModelFamily::Mlp] {
        let model = train(family, &Hyperparameters::default_for(family), &data, 3).map_err(|e| e.to_string())?;
        let sm = shap_values(&model, &data.rows()[..6], &data.rows()[100..108]).map_err(|e| e.to_string())?;
        efficiency = efficiency.max(sm.max_efficiency_error());
    }
    ensure(efficiency <= 1e-9, || format!("efficiency error {efficiency:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{n_models} models, max |phi - oracle| {worst:.1e}, {dummies} dummy values exactly 0, efficiency {efficiency:.1e}, {elapsed:.1?}"
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let planted = [1usize, 4, 7];
    let mut rng = seed::rng(11);
    let data = planted_dataset(&mut rng, 2000, planted);
    let split = split_and_scale(&data, &SamplerConfig::new(5, 0.7).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let family = ModelFamily::RandomForest;
    let model = train(family, &Hyperparameters::default_for(family), &split.train, 9).map_err(|e| e.to_string())?;
    let cfg = ExplainerConfig {
        lime_samples_per_instance: 500,
        seed: 13,
        ..ExplainerConfig::default()
    };
    let test = split.test.rows();
    let shap = shap_global(&shap_values(&model, &test[..20], &split.train.rows()[..20]).map_err(|e| e.to_string())?);
    let stats = ScalerParams::fit(&split.train).map_err(|e| e.to_string())?;
    let lime = lime_global(&model, &test[..60], &stats, &cfg).map_err(|e| e.to_string())?;
    let perm = permutation_importance(&model, test, split.test.labels(), 3, 17).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (label, scores) in [("SHAP", shap), ("LIME", lime), ("DALEX", perm)] {
        let top4: Vec<usize> = to_ranks(&scores).ordering()[..4].to_vec();
        ensure(planted.iter().all(|j| top4.contains(j)), || format!("{label} top-4 {top4:?}"))?;
        detail.push(format!("{label} {top4:?}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("planted {planted:?}; {}; {elapsed:.1?}", detail.join(", ")))
}

fn sensor_run() -> Result<(RunArtifacts, Duration), String> {
    let mut cfg = synthetic_sensor_config(10_000, 42);
    cfg.explainer = ExplainerConfig {
        background_size: 16,
        shap_instances: 16,
        lime_instances: 40,
        lime_samples_per_instance: 400,
        permutation_rounds: 3,
        permutation_rows: 500,
        ..ExplainerConfig::default()
    };
    let start = Instant::now();
    let run = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    Ok((run, start.elapsed()))
}

fn criterion_5(run: &RunArtifacts, elapsed: Duration) -> Outcome {
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    let top: Vec<String> = run.fusion.leveled_top_k(5).map_err(|e| e.to_string())?.into_iter().map(|t| t.name).collect();
    let planted = run.planted.clone().unwrap_or_default();
    ensure(!planted.is_empty(), || "no planted features recorded".into())?;
    ensure(planted.iter().all(|p| top.contains(p)), || format!("leveled top-5 {top:?} misses some of {planted:?}"))?;
    let mut deltas = Vec::new();
    for (classifier, sets) in &run.subset_metrics {
        let leveled = sets["Leveled"].accuracy;
        let all = sets[ALL_FEATURES].accuracy;
        let delta = (leveled - all).abs();
        ensure(delta <= 0.03, || format!("{classifier}: leveled {leveled:.4} vs all {all:.4}"))?;
        deltas.push(format!("{classifier} {delta:.4}"));
    }
    ensure(deltas.len() == 3, || format!("expected 3 independent classifiers, got {}", deltas.len()))?;
    Ok(format!("leveled top-5 {top:?}; |delta acc| {}; {elapsed:.1?}", deltas.join(", ")))
}

fn cm(roster: &[u32], counts: &[&[u64]]) -> ConfusionMatrix {
    ConfusionMatrix::from_counts(roster.to_vec(), counts.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn criterion_6() -> Outcome {
    use Averaging::*;
    // (matrix, convention, accuracy, precision, recall, f1)
    let cases: Vec<(ConfusionMatrix, Averaging, [f64; 4])> = vec![
        (cm(&[0, 1], &[&[5, 1], &[1, 3]]), PositiveClass(1), [0.8, 0.75, 0.75, 0.75]),
        (cm(&[0, 1], &[&[10, 0], &[0, 10]]), PositiveClass(1), [1.0, 1.0, 1.0, 1.0]),
        (cm(&[0, 1], &[&[0, 5], &[0, 5]]), PositiveClass(1), [0.5, 0.5, 1.0, 2.0 / 3.0]),
        (cm(&[0, 1], &[&[5, 0], &[5, 0]]), PositiveClass(1), [0.5, 0.0, 0.0, 0.0]),
        (cm(&[0, 1], &[&[3, 2], &[4, 1]]), PositiveClass(1), [0.4, 1.0 / 3.0, 0.2, 0.25]),
        (cm(&[0, 1], &[&[7, 3], &[2, 8]]), PositiveClass(1), [0.75, 8.0 / 11.0, 0.8, 16.0 / 21.0]),
        (cm(&[0, 1], &[&[5, 1], &[1, 3]]), PositiveClass(0), [0.8, 5.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0]),
        (cm(&[0, 1], &[&[0, 4], &[6, 0]]), PositiveClass(1), [0.0, 0.0, 0.0, 0.0]),
        (
            cm(&[0, 1, 2], &[&[2, 0, 0], &[1, 1, 0], &[0, 0, 2]]),
            Macro,
            [5.0 / 6.0, 8.0 / 9.0, 5.0 / 6.0, 37.0 / 45.0],
        ),
        (
            cm(&[0, 1, 2], &[&[2, 0, 0], &[1, 1, 0], &[0, 0, 2]]),
            Micro,
            [5.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0],
        ),
        (
            cm(&[0, 1, 2], &[&[1, 1, 1], &[0, 3, 0], &[0, 0, 0]]),
            Macro,
            [2.0 / 3.0, 7.0 / 12.0, 4.0 / 9.0, 19.0 / 42.0],
        ),
        (
            cm(&[1, 2, 4, 8], &[&[1, 0, 0, 0], &[0, 2, 0, 0], &[0, 0, 3, 0], &[0, 0, 0, 4]]),
            Macro,
            [1.0, 1.0, 1.0, 1.0],
        ),
    ];
    let n_cases = cases.len();
    for (i, (m, conv, expected)) in cases.into_iter().enumerate() {
        let r = classification_metrics(&m, conv).map_err(|e| e.to_string())?;
        let got = [r.accuracy, r.precision, r.recall, r.f1];
        let ok = got.iter().zip(expected).all(|(g, e)| (g - e).abs() <= 1e-12);
        ensure(ok, || format!("case {i}: got {got:?}, expected {expected:?}"))?;
    }
    let zero = classification_metrics(&cm(&[0, 1], &[&[5, 0], &[5, 0]]), PositiveClass(1)).unwrap();
    ensure(zero.zero_division, || "undefined precision was not flagged".into())?;

    let mut rng = seed::rng(99);
    let trials = 1000;
    for t in 0..trials {
        let k = rng.random_range(2..=6);
        let mut counts: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..20)).collect()).collect();
        counts[0][0] += 1;
        let m = ConfusionMatrix::from_counts((0..k as u32).collect(), counts).map_err(|e| e.to_string())?;
        let r = classification_metrics(&m, Micro).map_err(|e| e.to_string())?;
        ensure(r.precision == r.accuracy && r.recall == r.accuracy, || format!("random matrix {t}"))?;
        ensure(r.accuracy == m.trace() as f64 / m.total() as f64, || format!("accuracy of matrix {t}"))?;
    }
    Ok(format!("{n_cases} hand-computed matrices; micro precision = accuracy on {trials} random matrices"))
}

fn gradient_error(hidden: &[usize], classes: usize, seed_value: u64) -> f64 {
    let mut rng = seed::rng(seed_value);
    let mut net = Mlp::init(5, hidden, classes, &mut rng);
    for w in net.params_mut() {
        *w += rng.random_range(-0.3..0.3);
    }
    let x = random_rows(&mut rng, 12, 5);
    let y: Vec<usize> = (0..12).map(|_| rng.random_range(0..classes)).collect();
    let (_, analytic) = net.loss_and_gradient(&x, &y);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let (up, _) = net.loss_and_gradient(&x, &y);
        net.params_mut()[i] = orig - h;
        let (down, _) = net.loss_and_gradient(&x, &y);
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let diff = (analytic[i] - numeric).abs();
        let scale = analytic[i].abs().max(numeric.abs());
        let rel = if diff <= 1e-9 { 0.0 } else { diff / scale };
        worst = worst.max(rel);
    }
    worst
}

fn three_class(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Dataset {
    let rows = random_rows(rng, n, 4);
    let labels = rows
        .iter()
        .map(|r| {
            let s = r[0] + 0.5 * r[2];
            if s < -0.7 {
                3
            } else if s < 0.7 {
                5
            } else {
                9
            }
        })
        .collect();
    Dataset::new(FeatureSchema::new(["a", "b", "c", "d"], "label").unwrap(), rows, labels).unwrap()
}

fn criterion_7() -> Outcome {
    let g_binary = gradient_error(&[6], 2, 1);
    let g_multi = gradient_error(&[5, 4], 4, 2);
    ensure(g_binary <= 1e-4 && g_multi <= 1e-4, || format!("gradient rel error {g_binary:e} / {g_multi:e}"))?;

    let mut rng = seed::rng(31);
    let binary = planted_dataset(&mut rng, 300, [0, 2, 5]);
    let multi = three_class(&mut rng, 300);
    let families = [
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::Knn,
        ModelFamily::SvmRbf,
        ModelFamily::AdaBoost,
        ModelFamily::Mlp,
        ModelFamily::LogisticRegression,
        ModelFamily::INDEPENDENT[0],
        ModelFamily::INDEPENDENT[1],
    ];
    let mut simplex: f64 = 0.0;
    for data in [&binary, &multi] {
        let probe = random_rows(&mut rng, 100, data.feature_count());
        for family in families {
            let hp = Hyperparameters::default_for(family);
            let a = train(family, &hp, data, 77).map_err(|e| e.to_string())?;
            let b = train(family, &hp, data, 77).map_err(|e| e.to_string())?;
            let pa = a.predict_proba(&probe).map_err(|e| e.to_string())?;
            let pb = b.predict_proba(&probe).map_err(|e| e.to_string())?;
            ensure(pa == pb, || format!("{family}: probabilities differ between identical runs"))?;
            ensure(a.predict(&probe).unwrap() == b.predict(&probe).unwrap(), || {
                format!("{family}: predictions differ between identical runs")
            })?;
            for row in &pa {
                ensure(row.len() == a.classes().len() && row.iter().all(|&q| q >= 0.0), || {
                    format!("{family}: invalid probability row {row:?}")
                })?;
                simplex = simplex.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    ensure(simplex <= 1e-9, || format!("probability sums off by {simplex:e}"))?;
    Ok(format!(
        "gradient rel error {:.1e}; simplex error {simplex:.1e}; 9 families deterministic on binary and 3-class probes",
        g_binary.max(g_multi)
    ))
}

fn criterion_8(run: &RunArtifacts) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_report(run, dir.path()).map_err(|e| e.to_string())?;
    let md = std::fs::read_to_string(dir.path().join("summary.md")).map_err(|e| e.to_string())?;
    for name in ["CatBoost", "LGBM", "LR"] {
        ensure(md.contains(&format!("(published {name})")), || format!("no reference rows for {name}"))?;
    }
    Ok("published numbers emitted as reference rows only; nothing asserted against them".into())
}

fn main() {
    let sensor = sensor_run();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("fusion conformance", criterion_1()),
        ("fusion score spot-check", criterion_2()),
        ("Shapley exactness", criterion_3()),
        ("explainer sanity on planted signal", criterion_4()),
        (
            "end-to-end synthetic sensor run",
            sensor.as_ref().map_err(Clone::clone).and_then(|(r, t)| criterion_5(r, *t)),
        ),
        ("metrics correctness", criterion_6()),
        ("model numerics", criterion_7()),
        (
            "reference numbers are report-only",
            sensor.as_ref().map_err(Clone::clone).and_then(|(r, _)| criterion_8(r)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
