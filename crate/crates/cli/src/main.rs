//! `cubv`: command-line front end for the CUBV library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cubv_core::bounds::cubv_test;
use cubv_core::capacity::{balanced_dichotomies, classify_assignments, hexagon_layout, vc_verify};
use cubv_core::dataset::Dataset;
use cubv_core::experiments::{
    emit_results, ingest_feature_table, load_bundle, run_scenario, verify_manifest, write_mri_fixture, ExperimentConfig,
    Manifest, MriProblem, ResultBundle, Scenario, FIXTURE_EFFECT, FIXTURE_FEATURES, FIXTURE_SEED,
};
use cubv_core::inference::{ratio_db, required_mc_trials};
use cubv_core::validate::{cv_error, nested_cv_interval, proportion_ci, repeated_cv};
use cubv_core::CubvError;
use serde_json::json;

#[derive(Parser)]
#[command(name = "cubv", version, about = "K-fold cross upper bound validation of linear classifiers")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (CUBV_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and emit its tables.
    Simulate {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
    },
    /// Cross-validate a labelled CSV (`label,f1,...`) and apply the CUBV test.
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Fold reshuffles for the CV distribution.
        #[arg(long, default_value_t = 0)]
        repetitions: usize,
        /// Nested-CV repetitions for the interval (0 disables).
        #[arg(long, default_value_t = 0)]
        nested: usize,
    },
    /// Power of the configured design; prints the power table.
    Power {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
    },
    /// Monte Carlo trials needed to estimate a detection probability.
    Mc {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Sample size for the M/N ratio.
        #[arg(long)]
        n: Option<usize>,
    },
    /// VC dimension check and balanced-dichotomy census.
    Shatter {
        #[arg(long, default_value_t = 2)]
        dimension: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Number of clusters for the census.
        #[arg(long)]
        clusters: Option<usize>,
        /// Classify the six-cluster hexagon layout.
        #[arg(long)]
        hexagon: bool,
    },
    /// Four-diagnosis problems on a feature table (bundled fixture by default).
    Mri {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        label_column: Option<String>,
        /// Write the synthetic fixture to this path and exit.
        #[arg(long)]
        write_fixture: Option<PathBuf>,
    },
    /// Summarize an output directory and verify its manifest.
    Report {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    match s {
        "null" => Ok(Scenario::Null),
        "multisample" => Ok(Scenario::Multisample),
        "single_sample" => Ok(Scenario::SingleSample),
        "mri" => Ok(Scenario::Mri),
        other => Err(format!("unknown scenario '{other}'")),
    }
}

fn exit_code(err: &CubvError) -> u8 {
    match err {
        CubvError::Config(_) => 2,
        CubvError::Ingestion(_) => 3,
        _ => 1,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CubvError> {
    match std::env::var("CUBV_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CubvError::Config(vec![format!("CUBV_THREADS: '{v}' is not a thread count")])),
        Err(_) => Ok(flag),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CubvError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("cubv_out"))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn run_and_emit(cfg: &ExperimentConfig) -> Result<(ResultBundle, Manifest), CubvError> {
    cfg.validate()?;
    let bundle = run_scenario(cfg)?;
    let dir = out_dir(cfg);
    let manifest = emit_results(&bundle, &dir)?;
    eprintln!("wrote {} files to {} in {:.1}s", manifest.files.len(), dir.display(), bundle.wall_time_seconds);
    Ok((bundle, manifest))
}

fn power_table(bundle: &ResultBundle) {
    println!("group,N,n,d,Nc,method,trials,power");
    for s in &bundle.settings {
        for p in &s.power {
            println!("{},{},{},{},{},{},{},{}", s.group, s.n_samples, s.dimension, s.cohens_d, s.n_clusters, p.method.tag(), p.trials, p.power);
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CubvError> {
    if let Some(n) = thread_count(cli.threads)? {
        // A pool can only be installed once per process; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Simulate { scenario } | Command::Power { scenario } => {
            let mut cfg = load_config(cli)?;
            if let Some(s) = scenario {
                cfg.scenario = *s;
            }
            let (bundle, manifest) = run_and_emit(&cfg)?;
            if matches!(cli.command, Command::Power { .. }) {
                power_table(&bundle);
            } else {
                print_json(&serde_json::to_value(&manifest).map_err(|e| CubvError::Serialization(e.to_string()))?);
            }
        }
        Command::Mri { table, label_column, write_fixture } => {
            if let Some(path) = write_fixture {
                let file = std::fs::File::create(path).map_err(|e| CubvError::Io { path: path.clone(), source: e })?;
                write_mri_fixture(std::io::BufWriter::new(file), FIXTURE_FEATURES, FIXTURE_EFFECT, FIXTURE_SEED)?;
                return Ok(());
            }
            let mut cfg = load_config(cli)?;
            cfg.scenario = Scenario::Mri;
            if table.is_some() {
                cfg.mri.table = table.clone();
            }
            if let Some(col) = label_column {
                cfg.mri.label_column = col.clone();
            }
            if let Some(path) = &cfg.mri.table {
                // Fail early, with the ingestion exit code, on an unreadable table.
                ingest_feature_table(path, &cfg.mri.label_column, &MriProblem::P1.group_map())?;
            }
            let (bundle, _) = run_and_emit(&cfg)?;
            power_table(&bundle);
        }
        Command::Validate { data, k, repetitions, nested } => {
            let cfg = load_config(cli)?;
            let file = std::fs::File::open(data).map_err(|e| CubvError::Ingestion(format!("{}: {e}", data.display())))?;
            let ds = Dataset::read_csv(std::io::BufReader::new(file))?;
            let seed = cfg.master_seed;
            let cv = cv_error(&ds, *k, seed, &cfg.trainer)?;
            let report = cubv_test(&cv, &cfg.bound)?;
            let naive = proportion_ci(cv.cv_error, ds.n_samples(), cfg.alpha)?;
            let mut out = json!({
                "n_samples": ds.n_samples(),
                "k": k,
                "cv_error": cv.cv_error,
                "per_fold_errors": cv.per_fold_errors,
                "bound": report,
                "naive_interval": naive,
            });
            if *repetitions > 0 {
                out["repeated_cv"] = json!(repeated_cv(&ds, *k, *repetitions, seed, &cfg.trainer)?);
            }
            if *nested > 0 {
                out["nested_interval"] = json!(nested_cv_interval(&ds, *k, *nested, cfg.alpha, seed, &cfg.trainer)?);
            }
            print_json(&out);
        }
        Command::Mc { p, epsilon, alpha, n } => {
            let required = match required_mc_trials(*p, *epsilon, *alpha) {
                Ok(m) => Some(m),
                Err(CubvError::InfiniteTrials) => None,
                Err(e) => return Err(e),
            };
            let mut out = json!({ "p": p, "epsilon": epsilon, "alpha": alpha, "required_m": required });
            if let Some(n) = n {
                out["ratio"] = json!(required.map(|m| m as f64 / *n as f64));
                out["ratio_db"] = json!(ratio_db(required, *n));
            }
            print_json(&out);
        }
        Command::Shatter { dimension, trials, clusters, hexagon } => {
            let seed = cli.seed.unwrap_or(0);
            let vc = vc_verify(*dimension, *trials, seed)?;
            let mut out = json!({ "vc": vc });
            if let Some(nc) = clusters {
                out["census"] = json!(balanced_dichotomies(*nc)?);
            }
            if *hexagon {
                out["hexagon"] = json!(classify_assignments(&hexagon_layout(4.0), 6)?);
            }
            print_json(&out);
        }
        Command::Report { dir } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => out_dir(&load_config(cli)?),
            };
            report(&dir)?;
        }
    }
    Ok(())
}

fn report(dir: &Path) -> Result<(), CubvError> {
    let (manifest, mismatched) = verify_manifest(dir)?;
    let bundle = load_bundle(dir)?;
    eprintln!("{} files, {} mismatched", manifest.files.len(), mismatched.len());
    power_table(&bundle);
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CubvError::InvalidArgument(format!("manifest mismatch: {}", mismatched.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
