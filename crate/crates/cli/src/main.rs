//! `dbi` — the pipeline driver.
//!
//! Subcommands chain into the full experiment:
//!   synth      generate a synthetic cohort (streams + manifest + ledger)
//!   extract    parse streams, segment trips, write features.csv
//!   report     time-of-day and quarterly aggregate tables
//!   train-eval the six random-forest model groups, metrics table
//!
//! Exit codes: 0 success, 1 pipeline error, 2 usage/config error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use dbi_core::extract::{extract_cohort, ExtractOutput};
use dbi_core::files::{read_features_csv, read_trips_jsonl, write_features_csv, write_trips_jsonl};
use dbi_core::forest::{render_table, run_model_suite_with_models};
use dbi_core::report::{quarterly_csv, quarterly_report, time_of_day_csv, time_of_day_report};
use dbi_core::synth::{generate_cohort, CohortSpec};

#[derive(Parser)]
#[command(name = "dbi", version, about = "Telematics driver-behavior pipeline")]
struct Cli {
    /// JSON pipeline configuration; omitted keys use the built-in defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the random seed from the spec / config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort directory from a cohort spec
    Synth {
        /// Cohort spec JSON; omitted keys use the built-in defaults
        #[arg(long)]
        spec: PathBuf,
        /// Output cohort directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a cohort directory into features.csv, trips.jsonl, and a
    /// parse-quality summary
    Extract {
        /// Cohort directory containing manifest.json
        #[arg(long)]
        data: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the time-of-day distribution and quarterly aggregate tables
    Report {
        /// features.csv produced by extract
        #[arg(long)]
        features: PathBuf,
        /// trips.jsonl produced by extract; defaults to the file next to
        /// features.csv
        #[arg(long)]
        trips: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the six model groups on a features file
    TrainEval {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run a single group (1..=6) instead of all six
        #[arg(long)]
        group: Option<u8>,
        /// Hold out whole participants instead of rows
        #[arg(long)]
        grouped_split: bool,
    },
}

enum AppError {
    /// Bad invocation, unreadable spec/config: exit 2.
    Config(String),
    /// The pipeline itself failed: exit 1.
    Pipeline(String),
}

impl AppError {
    fn report(self) -> ExitCode {
        match self {
            AppError::Config(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            AppError::Pipeline(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.forest.seed = seed;
    }
    match cli.command {
        Command::Synth { spec, out } => cmd_synth(&spec, &out, cli.seed),
        Command::Extract { data, out } => cmd_extract(&data, &out, &config),
        Command::Report { features, trips, out } => cmd_report(&features, trips.as_deref(), &out),
        Command::TrainEval {
            features,
            out,
            group,
            grouped_split,
        } => {
            if grouped_split {
                config.grouped_split = true;
            }
            cmd_train_eval(&features, &out, group, &config)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, AppError> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| AppError::Config(format!("cannot parse config {}: {e}", p.display())))
        }
    }
}

fn cmd_synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), AppError> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| AppError::Config(format!("cannot read spec {}: {e}", spec_path.display())))?;
    let mut spec: CohortSpec = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("cannot parse spec {}: {e}", spec_path.display())))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (manifest, ledger) =
        generate_cohort(&spec, out).map_err(|e| AppError::Pipeline(e.to_string()))?;
    println!("cohort: {}", out.display());
    println!("manifest: {}", out.join("manifest.json").display());
    println!(
        "participants: {}  trips: {}",
        manifest.participants.len(),
        ledger.trips.len()
    );
    Ok(())
}

fn cmd_extract(data: &Path, out: &Path, config: &PipelineConfig) -> Result<(), AppError> {
    let output: ExtractOutput = extract_cohort(data, &config.extract_config())
        .map_err(|e| AppError::Pipeline(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| AppError::Pipeline(format!("cannot create {}: {e}", out.display())))?;
    let features = out.join("features.csv");
    write_features_csv(&features, &output.records).map_err(|e| AppError::Pipeline(e.to_string()))?;
    write_trips_jsonl(&out.join("trips.jsonl"), &output.trips)
        .map_err(|e| AppError::Pipeline(e.to_string()))?;
    std::fs::write(
        out.join("parse_quality.json"),
        serde_json::to_string_pretty(&output.quality).expect("quality serializes"),
    )
    .map_err(|e| AppError::Pipeline(e.to_string()))?;
    println!("features: {}", features.display());
    println!(
        "rows: {}  trips: {}  skipped lines: {}  singletons dropped: {}",
        output.records.len(),
        output.trips.len(),
        output.quality.skipped(),
        output.quality.singleton_trips_dropped
    );
    Ok(())
}

fn cmd_report(features: &Path, trips: Option<&Path>, out: &Path) -> Result<(), AppError> {
    let records = read_features_csv(features).map_err(|e| AppError::Pipeline(e.to_string()))?;
    if records.is_empty() {
        return Err(AppError::Pipeline(format!("{}: no feature rows", features.display())));
    }
    let trips_path = match trips {
        Some(p) => p.to_path_buf(),
        None => features.with_file_name("trips.jsonl"),
    };
    let trip_meta = read_trips_jsonl(&trips_path).map_err(|e| AppError::Pipeline(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| AppError::Pipeline(format!("cannot create {}: {e}", out.display())))?;

    let windows = dbi_core::dbi::TimeWindows::default();
    let tod = time_of_day_report(&trip_meta, &windows);
    std::fs::write(out.join("time_of_day.csv"), time_of_day_csv(&tod))
        .map_err(|e| AppError::Pipeline(e.to_string()))?;
    for row in &tod {
        println!("{:<10} {:>8} trips  {:>6.1}%", row.window, row.trips, row.share * 100.0);
    }

    let quarterly = quarterly_report(&records);
    std::fs::write(out.join("quarterly.csv"), quarterly_csv(&quarterly))
        .map_err(|e| AppError::Pipeline(e.to_string()))?;
    println!("quarterly rows: {}", quarterly.len());
    Ok(())
}

fn cmd_train_eval(
    features: &Path,
    out: &Path,
    group: Option<u8>,
    config: &PipelineConfig,
) -> Result<(), AppError> {
    let records = read_features_csv(features).map_err(|e| AppError::Pipeline(e.to_string()))?;
    let matrix = dbi_core::dbi::build_matrix(&records).map_err(|e| AppError::Pipeline(e.to_string()))?;
    let suite_cfg = config.suite_config(group);
    let (report, models) =
        run_model_suite_with_models(&matrix, &suite_cfg).map_err(|e| AppError::Pipeline(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| AppError::Pipeline(format!("cannot create {}: {e}", out.display())))?;
    std::fs::write(
        out.join("results.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| AppError::Pipeline(e.to_string()))?;
    let table = render_table(&report);
    std::fs::write(out.join("results.txt"), &table).map_err(|e| AppError::Pipeline(e.to_string()))?;
    for (result, model) in report.groups.iter().zip(&models) {
        std::fs::write(
            out.join(format!("model_{}.json", result.group)),
            serde_json::to_string(model).expect("model serializes"),
        )
        .map_err(|e| AppError::Pipeline(e.to_string()))?;
    }
    print!("{table}");
    println!("results: {}", out.join("results.json").display());
    Ok(())
}
