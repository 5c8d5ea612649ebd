use proptest::prelude::*;
use rand::Rng;
use swimnet::benchmark::ExperimentRow;
use swimnet::dataio::{
    load_csv, load_csv_from, load_model, model_from_str, model_to_string, read_results,
    save_model, write_results, ColumnRef, CsvSchema, LabelMode,
};
use swimnet::sampler::layer_rng;
use swimnet::{fit, fit_random_features, ActivationKind, BaselineConfig, Error, FitConfig, Matrix};

fn trained(kind: ActivationKind) -> (swimnet::SampledNetwork, Matrix) {
    let mut rng = layer_rng(12, 0);
    let x = Matrix::from_fn(80, 3, |_, _| rng.random_range(-1.0..1.0));
    let y = Matrix::from_fn(80, 2, |i, j| (x.get(i, j) * 2.0).sin() + x.get(i, 2));
    let cfg = FitConfig::new(vec![20, 15], kind).with_seed(4);
    let probe = Matrix::from_fn(50, 3, |_, _| rng.random_range(-2.0..2.0));
    (fit(&x, &y, &cfg).unwrap(), probe)
}

#[test]
fn model_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Sine] {
        let (net, probe) = trained(kind);
        let path = dir.path().join(format!("{kind}.swim"));
        save_model(&net, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, net);
        let (a, b) = (net.forward(&probe).unwrap(), back.forward(&probe).unwrap());
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn random_feature_model_round_trips() {
    let x = Matrix::from_fn(30, 2, |i, j| ((i * 3 + j) % 7) as f64 * 0.3);
    let y = Matrix::from_fn(30, 1, |i, _| i as f64 * 0.01);
    let net = fit_random_features(&x, &y, &BaselineConfig::new(vec![12], 3)).unwrap();
    let back = model_from_str("m", &model_to_string(&net).unwrap()).unwrap();
    assert_eq!(back, net);
}

#[test]
fn truncated_model_rejected_with_offset() {
    let (net, _) = trained(ActivationKind::Tanh);
    let text = model_to_string(&net).unwrap();
    let cut = &text[..text.len() / 2];
    let err = model_from_str("m.swim", cut).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::ModelFormat { .. }));
    assert!(msg.contains("truncated") && msg.contains("byte offset"), "{msg}");
}

#[test]
fn mismatched_layer_shapes_rejected_naming_layers() {
    let (net, _) = trained(ActivationKind::Tanh);
    let mut v: serde_json::Value = serde_json::from_str(&model_to_string(&net).unwrap()).unwrap();
    v["hidden"][1]["cols"] = serde_json::json!(19);
    let msg = model_from_str("m", &v.to_string()).unwrap_err().to_string();
    assert!(msg.contains("hidden layer 2") && msg.contains("hidden layer 1"), "{msg}");

    let mut v: serde_json::Value = serde_json::from_str(&model_to_string(&net).unwrap()).unwrap();
    v["output"]["biases"] = serde_json::json!([0.0]);
    let msg = model_from_str("m", &v.to_string()).unwrap_err().to_string();
    assert!(msg.contains("output layer"), "{msg}");
}

#[test]
fn version_mismatch_rejected() {
    let (net, _) = trained(ActivationKind::Relu);
    let mut v: serde_json::Value = serde_json::from_str(&model_to_string(&net).unwrap()).unwrap();
    v["format_version"] = serde_json::json!(99);
    let msg = model_from_str("m", &v.to_string()).unwrap_err().to_string();
    assert!(msg.contains("version 99"), "{msg}");
}

#[test]
fn labels_survive_the_model_file() {
    let csv = "f1,f2,kind\n0,0,apple\n0.1,0,apple\n5,5,pear\n5.1,5,pear\n0,0.2,apple\n5,5.2,pear\n";
    let schema = CsvSchema::new(vec![ColumnRef::parse("kind")], LabelMode::Categorical);
    let ds = load_csv_from("d", csv.as_bytes(), &schema).unwrap();
    let mut net = fit(&ds.x, &ds.y, &FitConfig::new(vec![6], ActivationKind::Tanh)).unwrap();
    net.meta.labels = ds.labels.clone();
    net.meta.feature_names = Some(ds.feature_names.clone());
    let back = model_from_str("m", &model_to_string(&net).unwrap()).unwrap();
    let got = back.predict_labels(&ds.x).unwrap();
    assert_eq!(got, vec!["apple", "apple", "pear", "pear", "apple", "pear"]);
}

#[test]
fn results_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = vec![
        ExperimentRow {
            method: "swim".into(),
            depth: 1,
            width: 64,
            seed: 3,
            metric: "rel_l2".into(),
            value: 0.1 + 0.2,
            fit_seconds: 1.25e-3,
            failure: None,
        },
        ExperimentRow {
            method: "random_features".into(),
            depth: 2,
            width: 8,
            seed: 3,
            metric: "rel_l2".into(),
            value: f64::NAN,
            fit_seconds: 0.0,
            failure: Some("layer 1 is degenerate".into()),
        },
    ];
    write_results(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("method,depth,width,seed,metric,value,fit_seconds\n"));
    let back = read_results(&path).unwrap();
    assert_eq!(back[0], rows[0]);
    assert_eq!(back[1].failure, rows[1].failure);
    assert!(back[1].value.is_nan());
}

#[test]
fn missing_cell_names_row_and_column() {
    let schema = CsvSchema::new(vec![ColumnRef::parse("y")], LabelMode::Numeric);
    let msg = load_csv_from("d.csv", "a,b,y\n1,2,3\n4,,6\n".as_bytes(), &schema)
        .unwrap_err()
        .to_string();
    assert!(msg.contains("row 2") && msg.contains("column b"), "{msg}");
}

#[test]
fn numeric_targets_stay_single_column() {
    let schema = CsvSchema::new(vec![ColumnRef::Index(0)], LabelMode::Numeric);
    let ds = load_csv_from("d", "t,a\n1.5,2\n-3,4\n".as_bytes(), &schema).unwrap();
    assert_eq!(ds.y.shape(), (2, 1));
    assert_eq!(ds.y.as_slice(), &[1.5, -3.0]);
    assert!(ds.labels.is_none());
}

#[test]
fn unreadable_path_is_an_io_error() {
    let schema = CsvSchema::new(vec![ColumnRef::parse("y")], LabelMode::Numeric);
    assert!(matches!(load_csv("/nonexistent/x.csv", &schema), Err(Error::Io { .. })));
}

fn cell() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => (-1e6f64..1e6).prop_map(|v| v.to_string()),
        2 => (-100i64..100).prop_map(|v| v.to_string()),
        1 => Just(String::new()),
        1 => "[a-z]{1,4}",
        1 => Just("1e400".to_string()),
        1 => Just(" 2.5 ".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn csv_loader_loads_or_locates_the_problem(
        cols in 1usize..5,
        rows in prop::collection::vec(prop::collection::vec(cell(), 1..6), 0..8),
        header in any::<bool>(),
        target in 0usize..6,
        categorical in any::<bool>(),
    ) {
        let mut text = String::new();
        if header {
            let names: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
            text.push_str(&names.join(","));
            text.push('\n');
        }
        for r in &rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        let mode = if categorical { LabelMode::Categorical } else { LabelMode::Numeric };
        let schema = CsvSchema {
            has_header: header,
            ..CsvSchema::new(vec![ColumnRef::Index(target)], mode)
        };
        match load_csv_from("fuzz.csv", text.as_bytes(), &schema) {
            Ok(ds) => {
                prop_assert_eq!(ds.x.rows(), ds.y.rows());
                prop_assert!(ds.x.as_slice().iter().all(|v| v.is_finite()));
            }
            Err(Error::Csv { path, .. }) => prop_assert_eq!(path, "fuzz.csv"),
            Err(Error::InvalidArgument(_)) => {}
            Err(other) => prop_assert!(false, "unexpected error kind: {other}"),
        }
    }
}
