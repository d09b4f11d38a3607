mod common;

use mathonet::benchmarks::{generate_dataset, SystemSpec};
use mathonet::hybrid::StencilModel;
use mathonet::io::{read_dataset, sidecar_path, write_dataset};
use mathonet::{Error, MathONet, Model, UnaryKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(common::cases(64))]

    #[test]
    fn model_json_is_byte_identical_after_a_round_trip(seed in any::<u64>(), drop in 0.0..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MathONet::random(3, &[3, 2], &UnaryKind::ALL, 2.0, &mut rng);
        let layout = net.layout();
        let keep: Vec<bool> = (0..layout.n_params).map(|_| rng.random::<f64>() >= drop).collect();
        net.apply_masks(&keep, &vec![true; layout.groups.len()]);
        let text = net.to_json().unwrap();
        let back = MathONet::from_json(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn stencil_json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = StencilModel::random(0.04, &[3], &[UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos], 1.0, &mut rng);
        let text = m.to_json().unwrap();
        let back = StencilModel::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn dataset_csv_round_trips_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lorenz.csv");
    let ds = generate_dataset(&SystemSpec::lorenz(), 0.1, 9).unwrap();
    write_dataset(&ds, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn dataset_without_sidecar_has_no_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.csv");
    std::fs::write(&path, "x1,x2,y1\n1,2,3\n4,5,6\n").unwrap();
    let ds = read_dataset(&path).unwrap();
    assert_eq!(ds.x, vec![vec![1.0, 2.0], vec![4.0, 5.0]]);
    assert_eq!(ds.y, vec![vec![3.0], vec![6.0]]);
    assert!(ds.meta.is_none());
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("header.csv", "a,b\n1,2\n"),
        ("ragged.csv", "x1,y1\n1,2\n3\n"),
        ("text.csv", "x1,y1\n1,abc\n"),
        ("nan.csv", "x1,y1\n1,NaN\n"),
    ] {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Data(_) | Error::Csv(_)), "{name}: {err}");
    }
}

#[test]
fn malformed_model_json_is_rejected() {
    assert!(MathONet::from_json("{").is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = MathONet::random(2, &[2], &[UnaryKind::Identity], 0.5, &mut rng);
    let mut v: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
    v["layers"][0]["neurons"][0]["polys"][0]["w"] = serde_json::json!([1.0]);
    assert!(MathONet::from_json(&v.to_string()).is_err());
}
