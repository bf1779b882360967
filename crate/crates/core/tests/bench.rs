use maxent_core::bench::{
    prepare, run_benchmark, run_tasks, summary_csv, tasks, BenchmarkConfig, ReportRow,
    REPORT_HEADER,
};
use maxent_core::Method;

fn small_config() -> BenchmarkConfig {
    BenchmarkConfig {
        spins: 3,
        hyperedges: vec![vec![1, 2], vec![2, 3]],
        sample_sizes: vec![100, 10_000, 1_000_000],
        realizations: 2,
        samples: 2,
        test_samples: 5,
        seed: 7,
        ..BenchmarkConfig::default()
    }
}

#[test]
fn report_does_not_depend_on_thread_count() {
    let cfg = small_config();
    let prep = prepare(&cfg).unwrap();
    let t = tasks(&cfg);
    let one = run_tasks(&prep, &t, 1).unwrap().to_csv();
    let three = run_tasks(&prep, &t, 3).unwrap().to_csv();
    assert_eq!(one, three);
    // Task order does not matter either.
    let mut reversed = t.clone();
    reversed.reverse();
    assert_eq!(run_tasks(&prep, &reversed, 2).unwrap().to_csv(), one);
}

#[test]
fn report_shape_and_round_trip() {
    let cfg = small_config();
    let report = run_benchmark(&BenchmarkConfig {
        threads: Some(2),
        ..cfg.clone()
    })
    .unwrap();
    let expected = cfg.realizations * cfg.samples * cfg.sample_sizes.len() * Method::ALL.len();
    assert_eq!(report.rows.len(), expected);
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    for (line, row) in lines.zip(&report.rows) {
        assert_eq!(&ReportRow::from_csv_line(line).unwrap(), row);
    }
    let summary = report.summary();
    assert_eq!(summary.len(), cfg.sample_sizes.len() * Method::ALL.len());
    assert!(summary
        .iter()
        .all(|s| s.rows == cfg.realizations * cfg.samples));
    assert_eq!(summary_csv(&summary).lines().count(), summary.len() + 1);
}

#[test]
fn consistent_methods_recover_small_truth() {
    let report = run_benchmark(&BenchmarkConfig {
        sample_sizes: vec![10_000_000],
        realizations: 3,
        threads: Some(1),
        ..small_config()
    })
    .unwrap();
    for s in report.summary() {
        if s.method != Method::Aic {
            assert_eq!(s.accuracy, 1.0, "{s:?}");
        }
        assert_eq!(s.fallback_rate, 0.0);
    }
}

#[test]
fn config_file_format() {
    let cfg: BenchmarkConfig = serde_json::from_str(
        r#"{"realizations": 5, "sample_sizes": [100, 1000], "methods": ["bic", "hyper_maxent_lrt"]}"#,
    )
    .unwrap();
    assert_eq!(cfg.realizations, 5);
    assert_eq!(cfg.spins, 5);
    assert_eq!(cfg.methods, vec![Method::Bic, Method::HyperMaxentLrt]);
    assert!(serde_json::from_str::<BenchmarkConfig>(r#"{"realisations": 5}"#).is_err());
}
