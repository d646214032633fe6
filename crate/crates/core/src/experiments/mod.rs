//! End-to-end experimental designs: null, multi-sample, single-sample and
//! the four-diagnosis MRI problems, plus ingestion and result emission.

mod config;
mod emit;
mod ingest;
mod run;

pub use config::{ExperimentConfig, Grid, MriConfig, Scenario};
pub use emit::{
    emit_results, load_bundle, power_curves, verify_manifest, write_cumulative_power, Manifest, ManifestEntry, MANIFEST_FILE,
};
pub use ingest::{
    ingest_feature_reader, ingest_feature_table, stratified_subsample, write_mri_fixture, MriProblem, DIAGNOSES,
    FIXTURE_EFFECT, FIXTURE_FEATURES, FIXTURE_SEED, MRI_FIXTURE,
};
pub use run::{
    analyse_dataset, run_scenario, BoundRecord, CvRecord, PermutationRecord, PowerRecord, ResultBundle, SettingRecord,
};
