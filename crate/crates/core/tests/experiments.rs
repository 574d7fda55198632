use armle::experiments::{
    aggregate, read_raw_csv, run, run_clt, run_consistency, ExperimentConfig, ExperimentKind,
    ExperimentReport, RawRow, RunOptions, TaskOrder,
};
use armle::{CovarianceKernel, Error, ParamVector};

fn config(kind: ExperimentKind, sizes: &[usize], replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        theta: ParamVector::new(vec![0.3]).unwrap(),
        kernel: CovarianceKernel::ar1(0.5).unwrap(),
        sample_sizes: sizes.to_vec(),
        replicates,
        seed: 42,
        experiment: kind,
        alpha: 0.05,
    }
}

fn all_kinds() -> Vec<ExperimentConfig> {
    vec![
        config(ExperimentKind::Consistency, &[100, 200], 20),
        config(ExperimentKind::Clt, &[150], 30),
        config(ExperimentKind::Qsl, &[100, 400], 5),
        config(ExperimentKind::Lil { direction: None }, &[50, 300], 5),
        config(ExperimentKind::LanRemainder { u: vec![1.0] }, &[100, 300], 20),
        config(ExperimentKind::TestSize, &[120], 40),
        config(ExperimentKind::TestPower { u: vec![2.0] }, &[120], 40),
    ]
}

#[test]
fn reruns_are_bit_identical() {
    for cfg in all_kinds() {
        let a = run(&cfg, RunOptions::default()).unwrap();
        let b = run(&cfg, RunOptions::default()).unwrap();
        assert_eq!(a.without_runtime(), b.without_runtime(), "{}", a.experiment);
        assert_eq!(
            a.without_runtime().to_json().unwrap(),
            b.without_runtime().to_json().unwrap()
        );
    }
}

#[test]
fn scheduling_does_not_change_results() {
    for cfg in all_kinds() {
        let base = run(&cfg, RunOptions::default()).unwrap().without_runtime();
        for options in [
            RunOptions { jobs: 1, order: TaskOrder::Reversed },
            RunOptions { jobs: 1, order: TaskOrder::Shuffled(7) },
            RunOptions { jobs: 3, order: TaskOrder::Shuffled(99) },
        ] {
            let other = run(&cfg, options).unwrap().without_runtime();
            assert_eq!(base, other, "{} with {options:?}", base.experiment);
        }
    }
}

#[test]
fn aggregates_recompute_from_raw_csv() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in all_kinds() {
        let report = run(&cfg, RunOptions::default()).unwrap();
        let out = dir.path().join(&report.experiment);
        report.write_all(&out).unwrap();
        let (p, rows) = read_raw_csv(std::fs::File::open(out.join("raw.csv")).unwrap()).unwrap();
        assert_eq!(p, 1);
        assert_eq!(rows, report.raw);
        let again = aggregate(&cfg, &rows).unwrap();
        assert_eq!(again, report.aggregates, "{}", report.experiment);

        let text = std::fs::read_to_string(out.join("report.json")).unwrap();
        let parsed: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.aggregates, again);
        assert_eq!(parsed.config, cfg);
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["experiment"], report.experiment.as_str());
        assert!(json["checks"].as_array().is_some_and(|c| !c.is_empty()));
        let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
        assert!(curves.starts_with("series,n,value\n"));
    }
}

#[test]
fn one_row_per_replicate_per_size() {
    for cfg in all_kinds() {
        let report = run(&cfg, RunOptions::default()).unwrap();
        assert_eq!(report.raw.len(), cfg.replicates * cfg.sample_sizes.len());
        for &n in &cfg.sample_sizes {
            let mut reps: Vec<usize> =
                report.raw.iter().filter(|r| r.n == n).map(|r| r.replicate).collect();
            reps.sort_unstable();
            assert_eq!(reps, (0..cfg.replicates).collect::<Vec<_>>());
        }
    }
}

#[test]
fn white_noise_null_estimates_are_centred() {
    let mut cfg = config(ExperimentKind::Consistency, &[500, 2000], 60);
    cfg.theta = ParamVector::new(vec![0.0]).unwrap();
    cfg.kernel = CovarianceKernel::White;
    let report = run_consistency(&cfg, RunOptions::default()).unwrap();
    let at_2000 = &report.aggregates.per_n[1];
    assert!(at_2000.median_error.unwrap() < 0.05);
    assert!(at_2000.mean_theta_hat[0].abs() < 0.01);
}

#[test]
fn zero_shift_power_is_size() {
    let size = run(&config(ExperimentKind::TestSize, &[150], 50), RunOptions::default()).unwrap();
    let power = run(
        &config(ExperimentKind::TestPower { u: vec![0.0] }, &[150], 50),
        RunOptions::default(),
    )
    .unwrap();
    let a = &size.aggregates.per_n[0];
    let b = &power.aggregates.per_n[0];
    assert_eq!(a.rejection_rate, b.rejection_rate);
    assert!((b.predicted_rejection.unwrap() - 0.05).abs() < 1e-9);
}

#[test]
fn zero_shift_remainder_vanishes() {
    let cfg = config(ExperimentKind::LanRemainder { u: vec![0.0] }, &[100, 200], 10);
    let report = run(&cfg, RunOptions::default()).unwrap();
    assert!(report.raw.iter().all(|r| r.lan_remainder == Some(0.0)));
    assert!(report.passed);
}

#[test]
fn path_statistics_are_finite_and_positive() {
    let cfg = config(ExperimentKind::Qsl, &[20, 100, 1000], 4);
    let report = run(&cfg, RunOptions::default()).unwrap();
    for row in &report.raw {
        let r = row.qsl_ratio.unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
    assert!(report.curves.iter().any(|c| c.series == "qsl_path0"));

    let cfg = config(ExperimentKind::Lil { direction: Some(vec![2.0]) }, &[16, 500], 4);
    let report = run(&cfg, RunOptions::default()).unwrap();
    // v = 2 doubles the envelope: 2 sqrt(1 - theta^2)
    let env = report.aggregates.lil_envelope.unwrap();
    assert!((env - 2.0 * (1.0f64 - 0.09).sqrt()).abs() < 1e-12);
    for row in &report.raw {
        assert!(row.lil_value.unwrap().is_finite());
        assert!(row.lil_sup.unwrap() >= row.lil_value.unwrap().abs());
    }
}

#[test]
fn clt_reports_variance_ratio_and_ks() {
    let report = run_clt(&config(ExperimentKind::Clt, &[300], 80), RunOptions::default()).unwrap();
    let agg = &report.aggregates.per_n[0];
    assert_eq!(agg.variance_ratio.as_ref().unwrap().len(), 1);
    assert_eq!(agg.ks.len(), 1);
    assert_eq!(report.aggregates.checks.len(), 2);
}

#[test]
fn wrong_runner_and_invalid_config_are_rejected() {
    let cfg = config(ExperimentKind::TestSize, &[100], 5);
    assert!(matches!(run_clt(&cfg, RunOptions::default()), Err(Error::InvalidConfig(_))));
    let mut bad = cfg.clone();
    bad.replicates = 0;
    assert!(matches!(run(&bad, RunOptions::default()), Err(Error::InvalidConfig(_))));
}

#[test]
fn too_many_failures_is_an_error() {
    let cfg = config(ExperimentKind::Consistency, &[100, 200], 50);
    let mut rows: Vec<RawRow> = (0..100)
        .map(|i| RawRow {
            replicate: i % 50,
            n: if i < 50 { 100 } else { 200 },
            theta_hat: Some(vec![0.3]),
            error_norm: Some(0.01),
            ..RawRow::default()
        })
        .collect();
    assert!(aggregate(&cfg, &rows).is_ok());
    rows[0] = RawRow::failed(0, 100);
    let agg = aggregate(&cfg, &rows).unwrap();
    assert_eq!((agg.failures, agg.per_n[0].failed), (1, 1));
    rows[1] = RawRow::failed(1, 100);
    assert!(matches!(
        aggregate(&cfg, &rows),
        Err(Error::TooManyFailures { failed: 2, total: 100 })
    ));
}
