use featfuse_demo::{compare_explainers_json, fuse_fixture_json, fuse_tables_json, sensor_names_json, shapley_playground_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn fixture_fusion_reports_the_leveled_top_four() {
    let v = parse(&fuse_fixture_json("veremi_binary", 4, "3,2,1", "weighted_points").unwrap());
    let mut top: Vec<String> = v["leveled"]["top"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
    top.sort();
    assert_eq!(top, ["pos_x", "pos_y", "spd_x", "spd_y"]);
    assert_eq!(v["methods"].as_array().unwrap().len(), 3);
    assert!(fuse_fixture_json("veremi_binary", 7, "3,2,1", "").is_err());
    assert!(fuse_fixture_json("nowhere", 4, "3,2,1", "").is_err());
}

#[test]
fn pasted_tables_are_fused() {
    let shap = "feature,m1,m2\na,1,2\nb,2,1\nc,3,3\n";
    let v = parse(&fuse_tables_json(shap, "", "", 2, "3,2,1", "weighted_points").unwrap());
    assert_eq!(v["methods"][0]["rows"][0]["feature"], "a");
    assert_eq!(v["methods"][0]["rows"][0]["score"], 5.0);
    assert!(fuse_tables_json("", "", "", 2, "3,2,1", "").is_err());
    assert!(fuse_tables_json(shap, "", "", 2, "3,x", "").is_err());
}

#[test]
fn playground_values_are_efficient() {
    let input = r#"{"model": {"weights": [1.0, -2.0, 0.0], "interaction": 0.5, "bias": 0.1},
                    "instance": [1.0, 0.5, 3.0], "background": [[0,0,0],[1,1,1],[-1,2,0]]}"#;
    let v = parse(&shapley_playground_json(input).unwrap());
    assert!(v["efficiency_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["phi"][2], 0.0);
    assert_eq!(v["coalitions"], 8);
}

#[test]
fn explainer_comparison_runs_end_to_end() {
    let v = parse(&compare_explainers_json(400, 3, "Location,Protocol", "decision_tree", 3).unwrap());
    assert_eq!(v["methods"].as_array().unwrap().len(), 3);
    assert_eq!(v["planted"], serde_json::json!(["Location", "Protocol"]));
    assert_eq!(parse(&sensor_names_json()).as_array().unwrap().len(), 10);
    assert!(compare_explainers_json(50, 3, "", "decision_tree", 3).is_err());
}
