//! Runs each example's `run` so the examples cannot rot.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(flow_ingestion);
example!(static_dfa);
example!(rolling_regimes);
example!(surrogate_benchmarks);
example!(tail_diagnostics);
example!(volatility_regression);
example!(full_pipeline);

#[test]
fn flow_ingestion_runs() {
    let panel = flow_ingestion::run().unwrap();
    assert_eq!(panel.all_series().len(), 9);
}

#[test]
fn static_dfa_runs() {
    for (h, est) in static_dfa::run().unwrap() {
        assert!((est - h).abs() < 0.1, "{h}: {est}");
    }
}

#[test]
fn rolling_regimes_runs() {
    assert_eq!(rolling_regimes::run().unwrap().len(), 3);
}

#[test]
fn surrogate_benchmarks_runs() {
    let (h, bands) = surrogate_benchmarks::run().unwrap();
    assert!(bands[0].mean < h && (bands[1].mean - h).abs() < 0.15);
}

#[test]
fn tail_diagnostics_runs() {
    let (ols, hill) = tail_diagnostics::run().unwrap();
    assert!((ols - 2.5).abs() < 0.4 && (hill - 2.5).abs() < 0.4);
}

#[test]
fn volatility_regression_runs() {
    let fits = volatility_regression::run().unwrap();
    assert_eq!(fits[0].beta, fits[1].beta);
}

#[test]
fn full_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let report = full_pipeline::run(dir.path()).unwrap();
    assert_eq!(report.series.len(), 9);
    assert!(dir.path().join("report.json").exists());
}
