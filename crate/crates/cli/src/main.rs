use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neighborspy_core::scenario::{self, report_json, summary_line, write_sweep_csv, RunError, Scenario, SweepAxis};
use neighborspy_core::{kyoto, AttackReport};
use thiserror::Error;

#[derive(Parser)]
#[command(
    name = "neighborspy",
    version,
    about = "Location-privacy attack simulator for distance-sorted proximity services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json and region.geojson.
    Run {
        scenario: PathBuf,
        /// Replaces the population and jitter seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the classic, neighbor-bound and hidden-full attacks on the built-in
    /// Kyoto scenario.
    DemoKyoto {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a parameter sweep and write one CSV row per (value, seed).
    Sweep {
        scenario: PathBuf,
        /// One of population_count, quantization_step, jitter_radius, epsilon.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 100,200,400.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Attack(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Attack(_) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(e) => CliError::Input(format!("invalid scenario: {e}")),
            RunError::Attack(e) => CliError::Attack(format!("attack failed: {e}")),
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    Scenario::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn geojson_text(report: &AttackReport) -> String {
    let mut text = serde_json::to_string(&report.geojson()).expect("geojson serializes");
    text.push('\n');
    text
}

fn run(path: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario = scenario.reseeded(seed);
    }
    let (_, report) = scenario.run()?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    write(&out.join("report.json"), &report_json(&scenario, seed, &report))?;
    write(&out.join("region.geojson"), &geojson_text(&report))?;
    println!("{} {}", scenario.name, summary_line(&report));
    Ok(())
}

fn demo_kyoto(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    for attack in kyoto::demo_attacks() {
        let scenario = kyoto::demo_scenario(attack);
        let (_, report) = scenario.run()?;
        let stem = attack.name();
        write(
            &out.join(format!("{stem}.report.json")),
            &report_json(&scenario, None, &report),
        )?;
        write(&out.join(format!("{stem}.geojson")), &geojson_text(&report))?;
        println!("{} {}", scenario.name, summary_line(&report));
    }
    Ok(())
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Input("values: at least one value is required".into()));
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("values: '{}' is not a number", v.trim())))
        })
        .collect()
}

fn sweep(path: &Path, axis: &str, values: &str, seeds: u64, out: &Path) -> Result<(), CliError> {
    let axis: SweepAxis = axis.parse().map_err(|e| CliError::Input(format!("{e}")))?;
    let values = parse_values(values)?;
    let scenario = load_scenario(path)?;
    let rows = scenario::sweep(&scenario, axis, &values, seeds).map_err(|e| CliError::Input(e.to_string()))?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(out, buf).map_err(CliError::io(out))?;
    let failed = rows.iter().filter(|r| r.region_area_m2.is_none()).count();
    println!(
        "{} rows written to {} ({failed} failed cells)",
        rows.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Run { scenario, seed, out } => run(scenario, *seed, out),
        Command::DemoKyoto { out } => demo_kyoto(out),
        Command::Sweep {
            scenario,
            axis,
            values,
            seeds,
            out,
        } => sweep(scenario, axis, values, *seeds, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
