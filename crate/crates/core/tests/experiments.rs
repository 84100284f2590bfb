use camsim::config::RunConfig;
use camsim::experiments::{
    fixed_radius_experiment, variation_experiment, DatasetSource, ExperimentSpec,
};
use camsim::{ArrayConfig, ClockKind, ClockPolicy, MitigationConfig, TechProfile, VariationConfig};

fn spec(limit: usize, sigma: f64, trials: usize) -> ExperimentSpec {
    let profile = TechProfile::builtin("sot").unwrap();
    ExperimentSpec {
        array: ArrayConfig::new(128, 128, profile, MitigationConfig::baseline()).unwrap(),
        clock: ClockPolicy::new(ClockKind::Fixed, limit),
        queries: 4,
        variation: VariationConfig::new(sigma, 5, trials).unwrap(),
        dataset: DatasetSource::Synthetic {
            items: 4000,
            seed: 8,
        },
        outcome_log: None,
    }
}

// Fewer discharging cells average out less of the per-cell spread, so a tight
// limit loses more matches once the spread is large.
#[test]
fn tight_limits_lose_more_recall_under_strong_variation() {
    let tight = variation_experiment(&spec(5, 0.15, 20)).unwrap();
    let loose = variation_experiment(&spec(20, 0.15, 20)).unwrap();
    assert!(tight.recall < 100.0);
    assert!(
        tight.recall < loose.recall,
        "L5 {} vs L20 {}",
        tight.recall,
        loose.recall
    );
}

#[test]
fn variation_report_carries_nominal_reference() {
    let r = variation_experiment(&spec(20, 0.088, 6)).unwrap();
    let reference = r.reference.as_deref().expect("reference attached");
    assert_eq!(reference.trials, 1);
    assert_eq!(reference.sigma_isat_rel, 0.0);
    assert_eq!(reference.recall, 100.0);
    assert_eq!(r.trials, 6);
    let nominal = fixed_radius_experiment(&spec(20, 0.0, 1)).unwrap();
    assert_eq!(reference.precision, nominal.precision);
}

#[test]
fn outcome_log_has_one_line_per_query_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut s = spec(20, 0.05, 3);
    s.outcome_log = Some(path.clone());
    fixed_radius_experiment(&s).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4 * 3);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
    }
}

#[test]
fn config_file_drives_an_experiment() {
    let toml = "profile = \"fefet\"\nseed = 4\n[array]\nrows = 64\n[search]\nlimit = 10\nqueries = 2\nitems = 500\n";
    let cfg = RunConfig::from_toml(toml, &["array.rows=256".into()]).unwrap();
    let profile = cfg.load_profile().unwrap();
    let array = cfg.array_config(&profile).unwrap();
    assert_eq!(array.rows, 256);
    let s = ExperimentSpec {
        array,
        clock: cfg.clock_policy(),
        queries: cfg.search.queries,
        variation: cfg.variation(&profile).unwrap(),
        dataset: DatasetSource::Synthetic {
            items: cfg.search.items,
            seed: cfg.seed,
        },
        outcome_log: None,
    };
    let r = fixed_radius_experiment(&s).unwrap();
    assert_eq!(r.hdist_limit, 10);
    assert_eq!(r.recall, 100.0);
}
