use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use photon_echo::protocol::classify_areas_nearest;
use photon_echo::runner::{self, OutputFormat};
use photon_echo::scenario::{parse_scenario, Scenario, ScanSpec};
use photon_echo::Error;

#[derive(Parser)]
#[command(name = "photon-echo", version, about = "Phase-locked photon echo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,

    /// Worker threads for the detuning groups (default: all cores).
    #[arg(long, global = true, env = "SIM_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the time series, peaks and manifest.
    Run { scenario: PathBuf },
    /// Repeat a scenario over a list of parameter values.
    Scan {
        scenario: PathBuf,
        /// e.g. pulse.B2.area, pulse.B1.time, storage, system.gamma12
        #[arg(long, requires = "values")]
        param: Option<String>,
        /// Comma-separated, e.g. "1pi,2pi,3pi" or "15,30,45".
        #[arg(long, requires = "param")]
        values: Option<String>,
    },
    /// Parse and check a scenario without simulating it.
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Svg => OutputFormat::Svg,
            Format::Both => OutputFormat::Both,
        }
    }
}

fn load(path: &Path) -> photon_echo::Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario {
        key: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

fn validate(s: &Scenario) -> photon_echo::Result<()> {
    let seq = runner::resolved_sequence(s)?;
    for p in seq.pulses() {
        println!(
            "{:>4}  center {:>8.3} us  area {:.4} pi  duration {:.4} us",
            p.label,
            p.time,
            p.area(),
            p.duration()?
        );
    }
    let times = seq.times();
    if let Some(t) = times.expected_echo() {
        println!("expected echo at {t} us, window ends at {} us", seq.end());
    }
    if let (Some(r), Some(b1), Some(b2)) = (s.pulse("R"), s.pulse("B1"), s.pulse("B2")) {
        let (class, dist) = classify_areas_nearest(r.area(), b1.area(), b2.area());
        if dist > 1e-9 {
            println!("areas are {dist:.3} pi from integers; nearest rule: {class}");
        } else {
            println!("area rule: {class}");
        }
    }
    for w in seq.warnings() {
        println!("warning: {w}");
    }
    Ok(())
}

fn execute(cli: &Cli) -> photon_echo::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Validate { scenario } => validate(&load(scenario)?),
        Command::Run { scenario } => {
            let s = load(scenario)?;
            let out = runner::run(&s)?;
            for p in &out.peaks {
                println!(
                    "{} echo at {:.4} us, |S| = {:.6e}{}",
                    p.kind.as_str(),
                    p.peak.t_peak,
                    p.peak.magnitude,
                    p.efficiency.map(|e| format!(", efficiency {e:.2} %")).unwrap_or_default()
                );
            }
            for f in runner::write_run_artifacts(&cli.out, &s, &out, cli.format.into())? {
                info!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Scan { scenario, param, values } => {
            let s = load(scenario)?;
            let scan = match (param, values) {
                (Some(p), Some(v)) => ScanSpec::parse(p, v)?,
                _ => s.scan.clone().ok_or_else(|| Error::Scenario {
                    key: "scan".into(),
                    message: "no --param/--values given and the scenario has no [scan] table".into(),
                })?,
            };
            let out = runner::run_scan(&s, &scan)?;
            for r in &out.rows {
                match &r.peak {
                    Some(p) => println!(
                        "{} = {}: echo at {:.4} us, |S| = {:.6e}{}",
                        scan.param,
                        r.value,
                        p.peak.t_peak,
                        p.peak.magnitude,
                        p.efficiency.map(|e| format!(", efficiency {e:.2} %")).unwrap_or_default()
                    ),
                    None => println!("{} = {}: no echo", scan.param, r.value),
                }
            }
            for f in runner::write_scan_artifacts(&cli.out, &s, &scan, &out, cli.format.into())? {
                info!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
