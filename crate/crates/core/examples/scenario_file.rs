//! Loads a scenario file, runs it and a scan over the B2 area, and writes
//! the same CSV / SVG artifacts the `photon-echo` binary produces.
//!
//! `cargo run --release --example scenario_file -- [scenario.toml] [out_dir]`

use std::path::PathBuf;

use photon_echo::runner::{self, OutputFormat};
use photon_echo::scenario::{parse_scenario, ScanSpec};

fn main() -> photon_echo::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/locked.toml"));
    let out_dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("photon-echo-example"));

    let text = std::fs::read_to_string(&path)?;
    let scenario = parse_scenario(&text)?;
    scenario.validate()?;

    let out = runner::run(&scenario)?;
    for p in &out.peaks {
        println!("{} echo at {:.4} us, efficiency {:?}", p.kind.as_str(), p.peak.t_peak, p.efficiency);
    }
    for f in runner::write_run_artifacts(&out_dir.join("run"), &scenario, &out, OutputFormat::Both)? {
        println!("wrote {}", f.display());
    }

    let scan = ScanSpec::parse("pulse.B2.area", "1pi,2pi,3pi")?;
    let result = runner::run_scan(&scenario, &scan)?;
    for f in runner::write_scan_artifacts(&out_dir.join("scan"), &scenario, &scan, &result, OutputFormat::Both)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
