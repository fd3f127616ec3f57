use std::collections::BTreeMap;

use uvm_core::harness::{self, read_raw_csv, BeamSetting, ExperimentConfig, SummaryRow};
use uvm_core::{SelectorSpec, ShiftTag};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.world.shift_tag = ShiftTag::Rtn;
    cfg.world.train_problems = 20;
    cfg.world.test_problems = 20;
    cfg.train.paths_per_question = 10;
    cfg.beams = vec![BeamSetting { b: 2, k: 16 }, BeamSetting { b: 4, k: 32 }];
    cfg.selectors = vec![SelectorSpec::gts(), SelectorSpec::ucb(), SelectorSpec::Greedy];
    cfg
}

#[test]
fn summary_matches_recomputation_from_raw_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = harness::run_experiment(&small(), 3).unwrap();
    report.write(dir.path()).unwrap();
    let raw = read_raw_csv(dir.path().join("raw.csv")).unwrap();
    assert_eq!(raw, report.raw);
    assert_eq!(raw.len(), 3 * 2 * 3);

    let mut cells: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &raw {
        cells.entry((r.selector.clone(), r.b)).or_default().push((r.coverage, r.precision));
    }
    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<SummaryRow> = summary.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), cells.len());
    for row in rows {
        let vals = &cells[&(row.selector.clone(), row.b)];
        let n = vals.len() as f64;
        for (pick, mean, std) in [
            (0, row.coverage_mean, row.coverage_std),
            (1, row.precision_mean, row.precision_std),
        ] {
            let xs: Vec<f64> = vals.iter().map(|v| if pick == 0 { v.0 } else { v.1 }).collect();
            let m = xs.iter().sum::<f64>() / n;
            let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((m - mean).abs() < 1e-12 && (s - std).abs() < 1e-12);
        }
        assert_eq!(row.seeds, 3);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| harness::run_experiment(&cfg, 5).unwrap());
    let b = four.install(|| harness::run_experiment(&cfg, 5).unwrap());
    assert_eq!(harness::csv_bytes(&a.raw).unwrap(), harness::csv_bytes(&b.raw).unwrap());
    assert_eq!(a.artifacts, b.artifacts);
}

#[test]
fn config_toml_round_trip_and_validation() {
    let cfg = small();
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    let partial = ExperimentConfig::from_toml("repetitions = 2\n[world]\nshift_tag = \"ood\"\n").unwrap();
    assert_eq!(partial.repetitions, 2);
    assert_eq!(partial.world.shift_tag, ShiftTag::Ood);
    assert_eq!(partial.beams, ExperimentConfig::default().beams);
    for bad in ["repetitions = 0", "beams = [{ b = 3, k = 8 }]", "selectors = []"] {
        assert!(ExperimentConfig::from_toml(bad).is_err(), "{bad}");
    }
}

#[test]
fn failures_carry_the_stage_name() {
    let mut cfg = small();
    cfg.train.learning_rate = 1e300;
    cfg.train.optimizer = uvm_core::training::Optimizer::Sgd;
    let err = harness::run_experiment(&cfg, 1).unwrap_err();
    assert_eq!(err.stage(), Some("train"), "{err}");
}
