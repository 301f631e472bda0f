use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nextsense_core::api::{default_workers, serve, ServeConfig};
use nextsense_core::channel::write_tap_file;
use nextsense_core::estimation::{reconstruct_taps, TapSelectionPolicy};
use nextsense_core::runner::{read_dataset, run_experiment, write_dataset};
use nextsense_core::scenario::{validate_spec, ExperimentSpec};
use nextsense_core::validation::{ensemble_report, magnitude_cdf_csv, waterfall, DEFAULT_MAX_LAG};
use nextsense_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nextsense", version, about = "Semi-synthetic sensing dataset generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its dataset.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a tap file from a recorded dataset.
    ReplayEstimate {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        ue: usize,
        #[arg(long, default_value_t = TapSelectionPolicy::default().max_taps)]
        max_taps: usize,
        #[arg(long, default_value_t = TapSelectionPolicy::default().power_floor_db, allow_hyphen_values = true)]
        power_floor_db: f64,
    },
    /// Check a spec and list every violation.
    ValidateSpec { spec: PathBuf },
    /// Compare the same UE across two datasets.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        ue: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LAG)]
        max_lag: usize,
        /// Also write cdf.csv, waterfall_a.csv and waterfall_b.csv here.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "NEXTSENSE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "NEXTSENSE_DATA_DIR", default_value = "nextsense-data")]
        data_dir: PathBuf,
        #[arg(long, env = "NEXTSENSE_WORKERS")]
        workers: Option<usize>,
        #[arg(long, env = "NEXTSENSE_TOKEN")]
        token: Option<String>,
    },
}

fn load_spec(path: &PathBuf) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    ExperimentSpec::from_json(&text)
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.clone(), source: e })
}

fn ue_index(ds: &nextsense_core::runner::RunDataset, ue: usize) -> Result<usize> {
    if ue < ds.ues.len() {
        Ok(ue)
    } else {
        Err(Error::Invalid { what: "ue", reason: format!("dataset has {} UEs", ds.ues.len()) })
    }
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { spec, out } => {
            let spec = load_spec(&spec)?;
            let digest = write_dataset(&run_experiment(&spec)?, &out)?;
            println!("{} iq_sha256={digest}", out.display());
        }
        Command::ReplayEstimate { dataset, out, ue, max_taps, power_floor_db } => {
            let ds = read_dataset(&dataset)?;
            let u = ue_index(&ds, ue)?;
            let policy = TapSelectionPolicy { max_taps, power_floor_db };
            let taps = reconstruct_taps(&ds.ues[u].iq, &ds.reference()?, &ds.manifest.snapshot_times(), policy)?;
            write_tap_file(&out, &taps)?;
            println!("{} taps -> {}", taps.len(), out.display());
        }
        Command::ValidateSpec { spec } => {
            let violations = validate_spec(&load_spec(&spec)?);
            if violations.is_empty() {
                println!("ok");
            } else {
                for v in &violations {
                    println!("{}: {}", v.field, v.reason);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Compare { a, b, out, ue, max_lag, csv_dir } => {
            let (da, db) = (read_dataset(&a)?, read_dataset(&b)?);
            let (ta, tb) = (&da.ues[ue_index(&da, ue)?].iq, &db.ues[ue_index(&db, ue)?].iq);
            let report = ensemble_report(ta, tb, max_lag)?;
            write(&out, &serde_json::to_string_pretty(&report)?)?;
            if let Some(dir) = csv_dir {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                write(&dir.join("cdf.csv"), &magnitude_cdf_csv(ta, tb, 200)?)?;
                write(&dir.join("waterfall_a.csv"), &waterfall(ta).to_csv())?;
                write(&dir.join("waterfall_b.csv"), &waterfall(tb).to_csv())?;
            }
            println!("ks_d={} ks_p={} wasserstein={}", report.ks_d, report.ks_p, report.wasserstein);
        }
        Command::Serve { port, data_dir, workers, token } => {
            let cfg = ServeConfig { data_dir, port, workers: workers.unwrap_or_else(default_workers), token };
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io { path: cfg.data_dir.clone(), source: e })?;
            eprintln!("listening on port {} with {} workers, data in {}", cfg.port, cfg.workers, cfg.data_dir.display());
            rt.block_on(serve(cfg))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
