//! Single runs and parameter scans of a [`Scenario`], and the files they
//! produce.
//!
//! A run writes three artifacts:
//!
//! - `timeseries.csv`: `t_us, re_S, im_S, abs_S, pop1_avg, pop2_avg,
//!   pop3_avg`, then `re_rho13@<δ>, im_rho13@<δ>` for each requested group;
//! - `peaks.csv`: one row per detected echo;
//! - `manifest.toml`: the fully resolved scenario, which reproduces
//!   `peaks.csv` exactly when run again.
//!
//! Numbers are written in Rust's shortest round-trip form (`{:?}` for
//! `f64`), so every value parses back to the same bits. Missing values
//! are empty fields.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::analysis::{detect_echo, max_magnitude, signed_efficiency, EchoPeak, Window, DEFAULT_HALF_WINDOW};
use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleTrajectory};
use crate::error::{Error, Result};
use crate::integrator::Integrity;
use crate::protocol::PulseSequence;
use crate::scenario::{ParamPath, ScanSpec, Scenario};
use crate::svg::{emit_svg, ChartStyle, Series};

/// A locked echo must exceed this fraction of the conventional echo to be
/// reported after a late lock.
pub const LATE_LOCK_THRESHOLD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeakKind {
    Conventional,
    Locked,
}

impl PeakKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PeakKind::Conventional => "conventional",
            PeakKind::Locked => "locked",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "conventional" => Some(PeakKind::Conventional),
            "locked" => Some(PeakKind::Locked),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakRow {
    pub kind: PeakKind,
    /// Predicted echo time, when the timing law gives one.
    pub t_expected: Option<f64>,
    pub peak: EchoPeak,
    /// Signed efficiency against the two-pulse reference, in percent.
    pub efficiency: Option<f64>,
}

/// The two-pulse reference echo and the integrity of the run behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceEcho {
    pub peak: EchoPeak,
    pub integrity: Integrity,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub sequence: PulseSequence,
    pub trajectory: EnsembleTrajectory,
    pub reference: Option<ReferenceEcho>,
    pub peaks: Vec<PeakRow>,
    /// Detunings (kHz) whose coherence was recorded, in column order.
    pub coherence_deltas: Vec<f64>,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Analysis(format!("bad {what} value `{s}`")))
}

/// Builds the sequence actually simulated. After a late lock the window is
/// stretched past B2 by the D–R spacing so that any revived echo would be
/// inside it.
pub fn resolved_sequence(scenario: &Scenario) -> Result<PulseSequence> {
    let seq = scenario.sequence()?;
    if scenario.output.t_end.is_some() {
        return Ok(seq);
    }
    let times = seq.times();
    if let (true, Some(d), Some(r), Some(b2)) = (times.is_late_lock(), times.d, times.r, seq.get("B2")) {
        let need = b2.end() + (r - d) + DEFAULT_HALF_WINDOW;
        if need > seq.end() {
            return seq.with_end(need);
        }
    }
    Ok(seq)
}

fn simulate(scenario: &Scenario, seq: &PulseSequence) -> Result<EnsembleTrajectory> {
    let grid = scenario.detuning_grid()?;
    let opts = EnsembleOptions {
        cadence: scenario.output.cadence,
        ..EnsembleOptions::default()
    }
    .with_track(scenario.output.coherences.iter().copied());
    run_ensemble(seq, &grid, &scenario.system, &scenario.integrator, &opts)
}

/// Runs the two-pulse reference of `scenario` and returns its echo, or
/// `None` when the scenario has no D/R pair.
pub fn reference_echo(scenario: &Scenario) -> Result<Option<ReferenceEcho>> {
    if scenario.pulse("D").is_none() || scenario.pulse("R").is_none() {
        return Ok(None);
    }
    let reference = scenario.reference()?;
    let seq = reference.sequence()?;
    let traj = simulate(&reference, &seq)?;
    let te = seq
        .times()
        .conventional_echo()
        .ok_or_else(|| Error::Sequence("reference has no echo time".into()))?;
    let peak = detect_echo(&traj, Window::around(te), &seq.pulse_intervals())?;
    Ok(Some(ReferenceEcho {
        peak,
        integrity: traj.integrity,
    }))
}

fn is_own_reference(scenario: &Scenario) -> bool {
    scenario.system.gamma12 == 0.0
        && scenario.output.t_end.is_none()
        && scenario.pulses.len() == 2
        && scenario.pulse("D").is_some()
        && scenario.pulse("R").is_some()
}

/// Finds the echoes a scenario is expected to show.
///
/// - Without a timely lock (no B1, or B1 after the two-pulse echo) the
///   conventional echo is searched around 2·T_R − T_D.
/// - With a timely B1 and a B2 the locked echo is searched around the
///   predicted time.
/// - After a late lock, the stretch from the end of B2 to the end of the
///   window is searched and reported only above [`LATE_LOCK_THRESHOLD`] of
///   the conventional echo.
pub fn find_peaks(seq: &PulseSequence, traj: &EnsembleTrajectory) -> Result<Vec<(PeakKind, Option<f64>, EchoPeak)>> {
    let times = seq.times();
    let exclude = seq.pulse_intervals();
    let mut rows = Vec::new();

    let search = |window: Window| match detect_echo(traj, window, &exclude) {
        Ok(p) => Ok(Some(p)),
        Err(Error::NoEcho { lo, hi }) => {
            warn!("no echo above the noise floor in [{lo}, {hi}] us");
            Ok(None)
        }
        Err(e) => Err(e),
    };

    let mut conventional = None;
    if let Some(te) = times.conventional_echo() {
        if times.b1.is_none() || times.is_late_lock() {
            if let Some(p) = search(Window::around(te))? {
                conventional = Some(p.magnitude);
                rows.push((PeakKind::Conventional, Some(te), p));
            }
        }
    }

    if let (Some(_), Some(_), Some(_), Some(b2)) = (times.d, times.r, times.b1, seq.get("B2")) {
        if times.is_late_lock() {
            let window = Window::new(b2.end(), seq.end());
            let floor = LATE_LOCK_THRESHOLD * conventional.unwrap_or(0.0);
            match max_magnitude(traj, window, &exclude) {
                Some(m) if m > floor => {
                    if let Some(p) = search(window)? {
                        rows.push((PeakKind::Locked, None, p));
                    }
                }
                _ => info!("late lock: nothing above {floor:e} after B2"),
            }
        } else if let Some(te) = times.locked_echo() {
            if let Some(p) = search(Window::around(te))? {
                rows.push((PeakKind::Locked, Some(te), p));
            }
        }
    }
    Ok(rows)
}

/// Runs `scenario` once, including its two-pulse reference.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    run_with_reference(scenario, None)
}

/// Like [`run`], but reuses an already computed reference echo.
pub fn run_with_reference(scenario: &Scenario, reference: Option<&ReferenceEcho>) -> Result<RunOutput> {
    let seq = resolved_sequence(scenario)?;
    for w in seq.warnings() {
        warn!("{w}");
    }
    let trajectory = simulate(scenario, &seq)?;
    let found = find_peaks(&seq, &trajectory)?;

    let reference = match reference {
        Some(r) => Some(r.clone()),
        None if is_own_reference(scenario) => found
            .iter()
            .find(|(k, _, _)| *k == PeakKind::Conventional)
            .map(|(_, _, p)| ReferenceEcho {
                peak: *p,
                integrity: trajectory.integrity,
            }),
        None => reference_echo(scenario)?,
    };

    let peaks = found
        .into_iter()
        .map(|(kind, t_expected, peak)| {
            let efficiency = match &reference {
                Some(r) => Some(signed_efficiency(&peak, &r.peak)?),
                None => None,
            };
            Ok(PeakRow {
                kind,
                t_expected,
                peak,
                efficiency,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunOutput {
        sequence: seq,
        trajectory,
        reference,
        peaks,
        coherence_deltas: scenario.output.coherences.clone(),
    })
}

impl RunOutput {
    /// The echo of interest: the locked echo if there is one, otherwise the
    /// conventional echo.
    pub fn primary(&self) -> Option<&PeakRow> {
        self.peaks
            .iter()
            .find(|p| p.kind == PeakKind::Locked)
            .or_else(|| self.peaks.first())
    }

    pub fn write_timeseries<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["t_us", "re_S", "im_S", "abs_S", "pop1_avg", "pop2_avg", "pop3_avg"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut tracks = Vec::with_capacity(self.coherence_deltas.len());
        for &d in &self.coherence_deltas {
            header.push(format!("re_rho13@{d}"));
            header.push(format!("im_rho13@{d}"));
            tracks.push(
                self.trajectory
                    .tracked(d)
                    .ok_or_else(|| Error::Analysis(format!("group {d} kHz was not tracked")))?,
            );
        }
        wr.write_record(&header)?;
        let traj = &self.trajectory;
        for (k, &t) in traj.times.iter().enumerate() {
            let s = traj.signal[k];
            let p = traj.populations[k];
            let mut rec = vec![num(t), num(s.re), num(s.im), num(s.norm()), num(p[0]), num(p[1]), num(p[2])];
            for tr in &tracks {
                let c = tr.states[k].rho13();
                rec.push(num(c.re));
                rec.push(num(c.im));
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_peaks<W: Write>(&self, w: W) -> Result<()> {
        write_peaks(&self.peaks, w)
    }

    /// |S(t)| over the whole window.
    pub fn signal_svg(&self) -> Result<String> {
        let pts = self
            .trajectory
            .times
            .iter()
            .zip(&self.trajectory.signal)
            .map(|(&t, s)| (t, s.norm()))
            .collect();
        emit_svg(
            &[Series::new("|S(t)|", pts)],
            &ChartStyle::new("Macroscopic coherence", "t (us)", "|S|"),
        )
    }
}

pub const PEAKS_HEADER: [&str; 7] = [
    "kind",
    "t_expected_us",
    "t_peak_us",
    "re_amplitude",
    "im_amplitude",
    "magnitude",
    "efficiency_pct",
];

pub fn write_peaks<W: Write>(peaks: &[PeakRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PEAKS_HEADER)?;
    for p in peaks {
        wr.write_record([
            p.kind.as_str().to_string(),
            opt_num(p.t_expected),
            num(p.peak.t_peak),
            num(p.peak.amplitude.re),
            num(p.peak.amplitude.im),
            num(p.peak.magnitude),
            opt_num(p.efficiency),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a peaks CSV written by [`write_peaks`].
pub fn read_peaks<R: std::io::Read>(r: R) -> Result<Vec<PeakRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(PEAKS_HEADER.iter().copied()) {
        return Err(Error::Analysis(format!("unexpected peaks header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let kind = PeakKind::parse(&rec[0]).ok_or_else(|| Error::Analysis(format!("bad kind `{}`", &rec[0])))?;
        let req = |i: usize| -> Result<f64> {
            parse_opt(&rec[i], PEAKS_HEADER[i])?
                .ok_or_else(|| Error::Analysis(format!("missing {}", PEAKS_HEADER[i])))
        };
        let amplitude = num_complex::Complex64::new(req(3)?, req(4)?);
        out.push(PeakRow {
            kind,
            t_expected: parse_opt(&rec[1], PEAKS_HEADER[1])?,
            peak: EchoPeak {
                t_peak: req(2)?,
                amplitude,
                magnitude: req(5)?,
            },
            efficiency: parse_opt(&rec[6], PEAKS_HEADER[6])?,
        });
    }
    Ok(out)
}

/// The resolved scenario plus a `[manifest]` table.
pub fn manifest(scenario: &Scenario, out: Option<&RunOutput>) -> String {
    let mut text = scenario.to_toml(out.map(|o| o.sequence.end()));
    text.push_str(&format!(
        "\n[manifest]\ntool = \"{}\"\nversion = \"{}\"\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    text
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub value: f64,
    pub peak: Option<PeakRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanOutput {
    pub param: ParamPath,
    pub rows: Vec<ScanRow>,
}

/// One run per scan value, in value order. The reference echo is computed
/// once unless the parameter changes it.
pub fn run_scan(scenario: &Scenario, scan: &ScanSpec) -> Result<ScanOutput> {
    scenario.check_scan(scan)?;
    let shared = if scan.param.affects_reference() {
        None
    } else {
        reference_echo(scenario)?
    };
    let mut rows = Vec::with_capacity(scan.values.len());
    for &value in &scan.values {
        let s = scenario.with_param(&scan.param, value)?;
        s.validate()?;
        info!("scan {} = {value}", scan.param);
        let out = run_with_reference(&s, shared.as_ref())?;
        rows.push(ScanRow {
            value,
            peak: out.primary().cloned(),
        });
    }
    Ok(ScanOutput {
        param: scan.param.clone(),
        rows,
    })
}

impl ScanOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "value",
            "kind",
            "t_expected_us",
            "t_peak_us",
            "efficiency_pct",
            "magnitude",
            "re_amplitude",
            "im_amplitude",
        ])?;
        for r in &self.rows {
            let mut rec = vec![num(r.value)];
            match &r.peak {
                Some(p) => rec.extend([
                    p.kind.as_str().to_string(),
                    opt_num(p.t_expected),
                    num(p.peak.t_peak),
                    opt_num(p.efficiency),
                    num(p.peak.magnitude),
                    num(p.peak.amplitude.re),
                    num(p.peak.amplitude.im),
                ]),
                None => rec.extend(std::iter::repeat(String::new()).take(7)),
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Efficiency (or magnitude, when no reference exists) against the
    /// scanned value.
    pub fn svg(&self) -> Result<String> {
        let with_eff = self.rows.iter().any(|r| r.peak.as_ref().and_then(|p| p.efficiency).is_some());
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| {
                let p = r.peak.as_ref()?;
                Some((r.value, if with_eff { p.efficiency? } else { p.peak.magnitude }))
            })
            .collect();
        let y = if with_eff { "efficiency (%)" } else { "|S| at echo" };
        let name = self.param.to_string();
        emit_svg(&[Series::new(y, pts)], &ChartStyle::new(&format!("Scan of {name}"), &name, y).with_markers())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn svg(self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, fs::File)> {
    let path = dir.join(name);
    let f = fs::File::create(&path)?;
    Ok((path, f))
}

/// Writes the artifacts of a run into `dir` and returns their paths.
pub fn write_run_artifacts(dir: &Path, scenario: &Scenario, out: &RunOutput, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.csv() {
        let (p, f) = create(dir, "timeseries.csv")?;
        out.write_timeseries(std::io::BufWriter::new(f))?;
        written.push(p);
        let (p, f) = create(dir, "peaks.csv")?;
        out.write_peaks(f)?;
        written.push(p);
    }
    if format.svg() {
        let (p, mut f) = create(dir, "signal.svg")?;
        f.write_all(out.signal_svg()?.as_bytes())?;
        written.push(p);
    }
    let (p, mut f) = create(dir, "manifest.toml")?;
    f.write_all(manifest(scenario, Some(out)).as_bytes())?;
    written.push(p);
    Ok(written)
}

/// Writes the artifacts of a scan into `dir` and returns their paths.
pub fn write_scan_artifacts(
    dir: &Path,
    scenario: &Scenario,
    scan: &ScanSpec,
    out: &ScanOutput,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.csv() {
        let (p, f) = create(dir, "scan.csv")?;
        out.write_csv(f)?;
        written.push(p);
    }
    if format.svg() {
        let (p, mut f) = create(dir, "scan.svg")?;
        f.write_all(out.svg()?.as_bytes())?;
        written.push(p);
    }
    let mut s = scenario.clone();
    s.scan = Some(scan.clone());
    let (p, mut f) = create(dir, "manifest.toml")?;
    f.write_all(manifest(&s, None).as_bytes())?;
    written.push(p);
    Ok(written)
}
