//! Child-process models over the stdio protocol.

mod common;

use std::time::Duration;

use common::fv;
use fae_core::models::{predict, toy_schema, ExternalModel, ModelSpec};
use fae_core::toy::{toy_attribution, toy_dataset, toy_input, ToyGame};
use fae_core::{
    exact_shapley, unified_payoff, Error, FeatureKind, FeatureSchema, ModelHandle, ReferenceMode,
};
use fae_core::models::ToyKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

const SERVER: &str = env!("CARGO_BIN_EXE_fae-model-server");

fn server(args: &[&str], schema: FeatureSchema, timeout: Duration) -> fae_core::Result<ExternalModel> {
    let mut command = vec![SERVER.to_string()];
    command.extend(args.iter().map(|a| a.to_string()));
    ExternalModel::spawn(&command, schema, timeout)
}

#[test]
fn bridge_is_bit_identical_on_random_inputs() {
    let mut rng = ChaCha20Rng::seed_from_u64(1000);
    let m = 5;
    let spec = ModelSpec::Linear {
        weights: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
        bias: rng.random_range(-1.0..1.0),
        logistic: true,
        feature_names: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("linear.json");
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();

    let local = spec.build().unwrap();
    let schema = FeatureSchema::anonymous(m, FeatureKind::Continuous).unwrap();
    let remote = server(&[path.to_str().unwrap()], schema, Duration::from_secs(30)).unwrap();

    let inputs: Vec<_> = (0..1000)
        .map(|_| fv(&(0..m).map(|_| rng.random_range(-1e3..1e3) * rng.random::<f64>()).collect::<Vec<_>>()))
        .collect();
    let expected = predict(local.as_ref(), &inputs).unwrap();
    // Both one large batch and many single-row batches.
    let batched = predict(&remote, &inputs).unwrap();
    for (a, b) in expected.iter().zip(&batched) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (x, e) in inputs.iter().zip(&expected).take(100) {
        assert_eq!(predict(&remote, std::slice::from_ref(x)).unwrap()[0].to_bits(), e.to_bits());
    }
}

#[test]
fn external_f_male_behaves_like_builtin() {
    let remote = server(&["builtin:f_male"], toy_schema(), Duration::from_secs(30)).unwrap();
    let rows = [fv(&[0., 0.]), fv(&[0., 1.]), fv(&[1., 0.]), fv(&[1., 1.])];
    assert_eq!(predict(&remote, &rows).unwrap(), vec![0., 0., 1., 1.]);
}

#[test]
fn external_f_both_reproduces_uniform_row_exactly() {
    let remote: ModelHandle =
        Arc::new(server(&["builtin:f_both"], toy_schema(), Duration::from_secs(30)).unwrap());
    let src = ToyGame::Uniform.source(&toy_dataset()).unwrap().unwrap();
    let phi = exact_shapley(&unified_payoff(remote, toy_input(), &src, ReferenceMode::Exact).unwrap()).unwrap();
    assert_eq!(phi, toy_attribution(ToyGame::Uniform, ToyKind::Both).unwrap());
    assert_eq!(phi, vec![0.375, 0.375]);
}

#[test]
fn constant_external_model_gives_zero_attributions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.json");
    std::fs::write(&path, r#"{"type":"linear","weights":[0,0],"bias":0.5}"#).unwrap();
    let remote: ModelHandle =
        Arc::new(server(&[path.to_str().unwrap()], toy_schema(), Duration::from_secs(30)).unwrap());
    for game in [ToyGame::Empirical, ToyGame::JointMarginal, ToyGame::Uniform] {
        let src = game.source(&toy_dataset()).unwrap().unwrap();
        let phi = exact_shapley(&unified_payoff(remote.clone(), toy_input(), &src, ReferenceMode::Exact).unwrap())
            .unwrap();
        assert_eq!(phi, vec![0.0, 0.0]);
    }
}

#[test]
fn slow_child_times_out() {
    let remote = server(&["builtin:f_male", "--delay-ms", "2000"], toy_schema(), Duration::from_millis(100)).unwrap();
    let err = predict(&remote, &[fv(&[1., 1.])]).unwrap_err();
    assert!(matches!(err, Error::Timeout(_)), "{err:?}");
    assert_eq!(err.class(), "model-timeout");
}

#[test]
fn spawn_failure_is_a_transport_error() {
    let err = ExternalModel::spawn(
        &["/nonexistent/model-server".to_string()],
        toy_schema(),
        Duration::from_secs(1),
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::Transport(_)));
}

#[test]
fn child_error_responses_surface_as_model_errors() {
    // The server's schema has two features; a three-feature request fails
    // inside the child and comes back as an error response.
    let three = FeatureSchema::anonymous(3, FeatureKind::Discrete).unwrap();
    let remote = server(&["builtin:f_male"], three, Duration::from_secs(30)).unwrap();
    let err = predict(&remote, &[fv(&[1., 1., 1.])]).unwrap_err();
    assert!(matches!(err, Error::Model(_)), "{err:?}");
}
