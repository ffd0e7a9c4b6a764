use hawkeslab::io::{load_model, parse_model, read_event_log_csv, write_event_log_csv, IoError};
use hawkeslab::sim::simulate_paths;
use hawkeslab::{ExcitationMode, MarkDistribution, ServiceDistribution, StreamKey};

const SAMPLE_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sample_path.json");

#[test]
fn sample_path_config_parses() {
    let m = load_model(SAMPLE_PATH).unwrap();
    assert_eq!(m.d, 1);
    assert_eq!(m.lambda0, vec![1.0]);
    assert_eq!(m.marks[0][0], MarkDistribution::Beta { a: 3.5, b: 1.5 });
    assert_eq!(m.services[0], ServiceDistribution::Exponential { rate: 1.0 });
    assert_eq!(m.mode, ExcitationMode::Delayed);
    assert_eq!(parse_model(SAMPLE_PATH).unwrap(), m);
}

#[test]
fn simulated_log_survives_csv() {
    let m = load_model(SAMPLE_PATH).unwrap();
    let log = simulate_paths(&m, 30.0, StreamKey::new(3)).unwrap();
    assert!(!log.events.is_empty());
    let mut buf = Vec::new();
    write_event_log_csv(&log, &mut buf).unwrap();
    assert_eq!(read_event_log_csv(buf.as_slice()).unwrap(), log);
}

#[test]
fn bad_values_are_reported() {
    let text = r#"{"d": 1, "lambda0": [-1.0], "kernels": [[{"type": "zero"}]],
        "marks": [[{"type": "deterministic", "value": 1.0}]],
        "services": [{"type": "exponential", "rate": 1.0}], "mu": [1.0], "mu_route": [[0.0]], "mode": "hawkes"}"#;
    assert!(matches!(parse_model(text), Err(IoError::Validation(_))));
    let err = parse_model(r#"{"d": 1, "lambda0": [1.0], "kernels": [[{"type": "cubic"}]]}"#).unwrap_err();
    assert!(matches!(err, IoError::Parse { .. }), "{err}");
    assert!(matches!(load_model("/nonexistent/model.json"), Err(IoError::File { .. })));
}
