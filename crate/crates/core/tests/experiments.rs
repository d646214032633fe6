use std::collections::{BTreeMap, HashSet};

use cubv_core::experiments::{
    emit_results, ingest_feature_reader, ingest_feature_table, load_bundle, run_scenario, verify_manifest, ExperimentConfig,
    MriProblem, ResultBundle, Scenario, MRI_FIXTURE,
};
use cubv_core::{CubvError, PowerMethod};

fn null_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig { scenario: Scenario::Null, trials: 10, permutations: 9, master_seed: 11, ..Default::default() };
    cfg.grid.n_samples = vec![30, 40];
    cfg
}

fn read_dir_sorted(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(name, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn empty_bundle_emits_only_its_json() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_results(&ResultBundle::empty(), dir.path()).unwrap();
    let names: Vec<&str> = manifest.files.iter().map(|e| e.file.as_str()).collect();
    assert_eq!(names, ["bundle.json"]);
    let (_, bad) = verify_manifest(dir.path()).unwrap();
    assert!(bad.is_empty());
}

#[test]
fn null_scenario_writes_every_table() {
    let bundle = run_scenario(&null_config()).unwrap();
    assert_eq!(bundle.settings.len(), 2);
    for s in &bundle.settings {
        assert_eq!(s.cv_records.len(), 10);
        assert_eq!(s.bounds.len(), 10);
        assert_eq!(s.permutations.len(), 10);
        assert!(s.permutations.iter().all(|p| p.m == 9 && (0.0..=1.0).contains(&p.p_value)));
        assert!(s.power_of(PowerMethod::Cubv).is_some() && s.power_of(PowerMethod::KfoldPerm).is_some());
        assert_eq!(s.cohens_d, 0.0);
    }
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_results(&bundle, dir.path()).unwrap();
    for f in ["power.csv", "mc.csv", "bounds.jsonl", "cumulative_power.csv", "bundle.json", "cv/cv_distribution_0000.csv"] {
        assert!(manifest.get(f).is_some(), "missing {f}");
        assert!(dir.path().join(f).exists());
    }
    let lines = std::fs::read_to_string(dir.path().join("bounds.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    let power = std::fs::read_to_string(dir.path().join("power.csv")).unwrap();
    assert_eq!(power.lines().count(), 1 + 2 * 2);
}

#[test]
fn trial_seeds_never_repeat() {
    let bundle = run_scenario(&null_config()).unwrap();
    let seeds: Vec<u64> = bundle.settings.iter().flat_map(|s| s.cv_records.iter().map(|r| r.seed)).collect();
    let unique: HashSet<u64> = seeds.iter().copied().collect();
    assert_eq!(unique.len(), seeds.len());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = null_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = emit_results(&run_scenario(&cfg).unwrap(), a.path()).unwrap();
    let mb = emit_results(&run_scenario(&cfg).unwrap(), b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));

    let other = ExperimentConfig { master_seed: 12, ..cfg };
    let c = tempfile::tempdir().unwrap();
    let mc = emit_results(&run_scenario(&other).unwrap(), c.path()).unwrap();
    assert_ne!(ma.get("bundle.json"), mc.get("bundle.json"));
}

#[test]
fn manifest_catches_edits_and_bundle_reloads() {
    let bundle = run_scenario(&null_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&bundle, dir.path()).unwrap();
    let mut loaded = load_bundle(dir.path()).unwrap();
    loaded.wall_time_seconds = bundle.wall_time_seconds;
    assert_eq!(loaded, bundle);

    let (_, bad) = verify_manifest(dir.path()).unwrap();
    assert!(bad.is_empty());
    std::fs::write(dir.path().join("mc.csv"), "tampered\n").unwrap();
    let (_, bad) = verify_manifest(dir.path()).unwrap();
    assert_eq!(bad, ["mc.csv"]);
}

#[test]
fn single_reshuffle_gives_one_record_and_one_bound() {
    let mut cfg = ExperimentConfig { scenario: Scenario::SingleSample, f: 1, methods: vec![PowerMethod::Cubv], master_seed: 3, ..Default::default() };
    cfg.grid.n_samples = vec![60];
    cfg.grid.cohens_d = vec![1.0];
    let bundle = run_scenario(&cfg).unwrap();
    let s = &bundle.settings[0];
    assert_eq!(s.cv_records.len(), 1);
    assert_eq!(s.bounds.len(), 1);
    assert!(s.permutations.is_empty());
    assert_eq!(s.bounds[0].report.empirical_risk, s.cv_records[0].cv_error);
}

#[test]
fn single_sample_with_intervals_and_permutations() {
    let mut cfg = ExperimentConfig {
        scenario: Scenario::SingleSample,
        f: 20,
        permutations: 19,
        nested_repetitions: 3,
        master_seed: 4,
        ..Default::default()
    };
    cfg.grid.n_samples = vec![60];
    cfg.grid.cohens_d = vec![2.0];
    let bundle = run_scenario(&cfg).unwrap();
    let s = &bundle.settings[0];
    assert_eq!(s.cv_records.len(), 20);
    assert_eq!(s.permutations.len(), 1);
    assert_eq!(s.permutations[0].permuted_errors.len(), 19);
    assert_eq!(s.intervals.len(), 2);
    for iv in &s.intervals {
        assert!(iv.lower <= iv.center && iv.center <= iv.upper);
    }
}

#[test]
fn multisample_errors_spread_around_their_mean() {
    let mut cfg = ExperimentConfig { scenario: Scenario::Multisample, m: 100, methods: vec![PowerMethod::Cubv], master_seed: 5, ..Default::default() };
    cfg.grid.n_samples = vec![20];
    cfg.grid.cohens_d = vec![2.0];
    let bundle = run_scenario(&cfg).unwrap();
    let acc: Vec<f64> = bundle.settings[0].cv_records.iter().map(|r| 1.0 - r.cv_error).collect();
    assert_eq!(acc.len(), 100);
    let mean = acc.iter().sum::<f64>() / 100.0;
    let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((0.75..=0.95).contains(&mean), "{mean}");
    assert!(hi - lo >= 0.08, "{lo}..{hi}");
}

#[test]
fn reference_risk_is_attached_on_request() {
    let mut cfg = ExperimentConfig { scenario: Scenario::SingleSample, f: 2, methods: vec![PowerMethod::Cubv], reference_risk: true, ..Default::default() };
    cfg.grid.n_samples = vec![40];
    cfg.grid.dimensions = vec![1];
    cfg.grid.cohens_d = vec![2.0];
    let bundle = run_scenario(&cfg).unwrap();
    let risk = bundle.settings[0].reference_risk.unwrap();
    assert!((risk - 0.1587).abs() < 0.02, "{risk}");
}

#[test]
fn invalid_configs_name_every_field() {
    let mut cfg = ExperimentConfig { k: 1, alpha: 1.5, methods: Vec::new(), ..Default::default() };
    cfg.grid.dimensions = vec![0];
    cfg.grid.imbalance_ratio = vec![0.0];
    match run_scenario(&cfg) {
        Err(CubvError::Config(fields)) => {
            for name in ["k:", "alpha:", "methods:", "grid.dimensions[0]", "grid.imbalance_ratio[0]"] {
                assert!(fields.iter().any(|f| f.starts_with(name)), "{name} missing from {fields:?}");
            }
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    let mut small = ExperimentConfig::default();
    small.grid.n_samples = vec![10];
    assert!(matches!(small.validate(), Err(CubvError::Config(_))));
    let nc = ExperimentConfig { assignment_id: 99, ..Default::default() };
    assert!(matches!(nc.validate(), Err(CubvError::Config(_))));
}

#[test]
fn toml_configs_round_trip_and_reject_unknown_keys() {
    let cfg = ExperimentConfig::from_toml_str("scenario = \"multisample\"\nm = 7\n[grid]\nn_samples = [40]\ncohens_d = [1.5]\n").unwrap();
    assert_eq!(cfg.scenario, Scenario::Multisample);
    assert_eq!(cfg.m, 7);
    assert_eq!(cfg.k, 10);
    assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap(), cfg);
    assert!(matches!(ExperimentConfig::from_toml_str("trails = 3\n"), Err(CubvError::Config(_))));
}

#[test]
fn fixture_problems_are_balanced() {
    for (problem, expected) in [(MriProblem::P1, (200, 200)), (MriProblem::P2, (200, 200)), (MriProblem::P3, (200, 200))] {
        let (data, names) = ingest_feature_reader(MRI_FIXTURE.as_bytes(), "diagnosis", &problem.group_map()).unwrap();
        assert_eq!(data.class_counts(), [expected.0, expected.1]);
        assert_eq!(names.len(), data.n_features());
        assert!(!names.contains(&"diagnosis".to_string()));
    }
}

#[test]
fn ingestion_rejects_bad_tables() {
    let map = MriProblem::P1.group_map();
    let one_class: BTreeMap<String, u8> = map.keys().map(|k| (k.clone(), 0)).collect();
    assert!(matches!(ingest_feature_reader(MRI_FIXTURE.as_bytes(), "diagnosis", &one_class), Err(CubvError::Ingestion(_))));
    assert!(matches!(ingest_feature_reader(MRI_FIXTURE.as_bytes(), "label", &map), Err(CubvError::Ingestion(_))));
    let text = "a,diagnosis\n1.0,HC\nfoo,AD\n";
    assert!(matches!(ingest_feature_reader(text.as_bytes(), "diagnosis", &map), Err(CubvError::Ingestion(_))));
    let unknown = "a,diagnosis\n1.0,HC\n2.0,XX\n";
    assert!(matches!(ingest_feature_reader(unknown.as_bytes(), "diagnosis", &map), Err(CubvError::Ingestion(_))));
    assert!(matches!(
        ingest_feature_table(std::path::Path::new("/nonexistent/table.csv"), "diagnosis", &map),
        Err(CubvError::Ingestion(_))
    ));
}

#[test]
fn tables_on_disk_match_the_embedded_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    std::fs::write(&path, MRI_FIXTURE).unwrap();
    let map = MriProblem::P2.group_map();
    let (a, _) = ingest_feature_table(&path, "diagnosis", &map).unwrap();
    let (b, _) = ingest_feature_reader(MRI_FIXTURE.as_bytes(), "diagnosis", &map).unwrap();
    assert_eq!(a.rows().collect::<Vec<_>>(), b.rows().collect::<Vec<_>>());
    assert_eq!(a.labels(), b.labels());
}

#[test]
fn small_mri_run_records_each_problem() {
    let mut cfg = ExperimentConfig { scenario: Scenario::Mri, permutations: 5, master_seed: 9, ..Default::default() };
    cfg.mri.problems = vec![MriProblem::P1, MriProblem::P3];
    cfg.mri.pls_components = vec![2];
    cfg.mri.sizes = vec![60];
    let bundle = run_scenario(&cfg).unwrap();
    assert_eq!(bundle.settings.len(), 2);
    let groups: Vec<&str> = bundle.settings.iter().map(|s| s.group.as_str()).collect();
    assert_eq!(groups, ["P1", "P3"]);
    for s in &bundle.settings {
        assert_eq!(s.n_samples, 60);
        assert_eq!(s.dimension, 2);
        assert_eq!(s.permutations[0].permuted_errors.len(), 5);
    }
}

#[test]
fn documented_config_example_parses() {
    let text = r#"
scenario = "null"
k = 10
trials = 200
m = 100
f = 100
permutations = 100
alpha = 0.05
epsilon = 0.1
methods = ["kfold_perm", "cubv"]
nested_repetitions = 0
reference_risk = false
master_seed = 0

[grid]
n_samples = [50, 100, 200]
dimensions = [2]
cohens_d = [0.0]
n_clusters = [2]
imbalance_ratio = [1.0]

[mri]
problems = ["P1", "P2", "P3"]
pls_components = [1, 2, 5, 10, 20]
sizes = [40, 80, 160, 400]
"#;
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.methods, [PowerMethod::KfoldPerm, PowerMethod::Cubv]);
    assert_eq!(cfg.mri.problems, [MriProblem::P1, MriProblem::P2, MriProblem::P3]);
}
