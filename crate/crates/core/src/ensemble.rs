//! Inhomogeneously broadened ensemble: a Gaussian grid of detuning groups,
//! each evolved through the same pulse timeline, and the weighted coherent
//! sum S(t) = Σ w(δ)·ρ31(δ, t) that stands in for the emitted field.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bloch::{hamiltonian, AtomDetuning, DensityMatrix, SystemParams};
use crate::error::{Error, Result};
use crate::integrator::{advance, Integrity, IntegratorConfig, Trajectory};
use crate::protocol::{PulseSequence, TIME_EPS};

/// Default sample cadence for S(t), μs.
pub const DEFAULT_CADENCE: f64 = 0.01;

/// Evenly spaced detunings (kHz) with normalized Gaussian weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DetuningGrid {
    offsets: Vec<f64>,
    weights: Vec<f64>,
    fwhm: f64,
    spacing: f64,
}

impl DetuningGrid {
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Index of the group at detuning `delta` (kHz), if it is on the grid.
    pub fn index_of(&self, delta: f64) -> Option<usize> {
        let tol = 1e-6 * self.spacing.max(1.0);
        self.offsets.iter().position(|&d| (d - delta).abs() <= tol)
    }
}

/// Gaussian weight profile exp(−4 ln2 · δ² / FWHM²), unnormalized.
pub fn gaussian_profile(delta: f64, fwhm: f64) -> f64 {
    (-4.0 * std::f64::consts::LN_2 * delta * delta / (fwhm * fwhm)).exp()
}

/// `count` groups `spacing` kHz apart, centered on zero, weighted by a
/// Gaussian of full width `fwhm` kHz.
pub fn build_grid(fwhm: f64, spacing: f64, count: usize) -> Result<DetuningGrid> {
    if count % 2 == 0 {
        return Err(Error::Config(format!("grid count must be odd, got {count}")));
    }
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::Config(format!("grid fwhm must be > 0, got {fwhm}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!("grid spacing must be > 0, got {spacing}")));
    }
    let half = (count / 2) as i64;
    let offsets: Vec<f64> = (-half..=half).map(|k| k as f64 * spacing).collect();
    let raw: Vec<f64> = offsets.iter().map(|&d| gaussian_profile(d, fwhm)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(DetuningGrid {
        offsets,
        weights,
        fwhm,
        spacing,
    })
}

/// Weighted coherent sum Σ w·ρ31 over the groups, in ascending-δ order.
pub fn macroscopic_signal(states: &[DensityMatrix], grid: &DetuningGrid) -> Result<C64> {
    if states.len() != grid.len() {
        return Err(Error::Config(format!(
            "{} states for a grid of {} groups",
            states.len(),
            grid.len()
        )));
    }
    Ok(states
        .iter()
        .zip(&grid.weights)
        .fold(C64::new(0.0, 0.0), |acc, (s, &w)| acc + s.rho31() * w))
}

/// What to record besides S(t).
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOptions {
    /// Spacing of the common sample grid (μs).
    pub cadence: f64,
    /// Detunings (kHz) whose full state history is kept.
    pub track: Vec<f64>,
    /// Times (μs) at which every group's state is captured.
    pub snapshots: Vec<f64>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            cadence: DEFAULT_CADENCE,
            track: Vec::new(),
            snapshots: Vec::new(),
        }
    }
}

impl EnsembleOptions {
    pub fn with_track(mut self, deltas: impl IntoIterator<Item = f64>) -> Self {
        self.track.extend(deltas);
        self
    }

    pub fn with_snapshots(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.snapshots.extend(times);
        self
    }
}

/// Full history of one tracked group.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedGroup {
    pub delta: f64,
    pub trajectory: Trajectory,
}

/// Every group's state at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub states: Vec<DensityMatrix>,
}

/// Result of [`run_ensemble`].
#[derive(Clone, Debug)]
pub struct EnsembleTrajectory {
    pub grid: DetuningGrid,
    pub times: Vec<f64>,
    /// S(t) at each sample time.
    pub signal: Vec<C64>,
    /// Weighted mean populations (ρ11, ρ22, ρ33) at each sample time.
    pub populations: Vec<[f64; 3]>,
    pub tracked: Vec<TrackedGroup>,
    pub snapshots: Vec<Snapshot>,
    pub final_states: Vec<DensityMatrix>,
    /// Worst invariant residuals over every group and every sample.
    pub integrity: Integrity,
}

impl EnsembleTrajectory {
    pub fn abs_signal(&self) -> Vec<f64> {
        self.signal.iter().map(|z| z.norm()).collect()
    }

    pub fn tracked(&self, delta: f64) -> Option<&Trajectory> {
        let tol = 1e-6 * self.grid.spacing.max(1.0);
        self.tracked
            .iter()
            .find(|g| (g.delta - delta).abs() <= tol)
            .map(|g| &g.trajectory)
    }

    pub fn snapshot(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.time - time).abs() <= 1e-9)
    }

    /// Index of the sample closest to `t`.
    pub fn sample_index(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if t - self.times[i - 1] <= self.times[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// One stretch of the timeline with constant drives.
struct Segment {
    t0: f64,
    t1: f64,
    drive_part: Matrix3<C64>,
    driven: bool,
    /// Sample index reached at `t1`, if any.
    sample: Option<usize>,
    /// Snapshot index reached at `t1`, if any.
    snapshot: Option<usize>,
}

struct Timeline {
    sample_times: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Edge,
    Sample(usize),
    Snapshot(usize),
}

fn build_timeline(
    seq: &PulseSequence,
    cfg: &IntegratorConfig,
    opts: &EnsembleOptions,
) -> Result<Timeline> {
    let end = seq.end();
    let n_samples = (end / opts.cadence * (1.0 + 1e-12)).floor() as usize + 1;
    let sample_times: Vec<f64> = (0..n_samples).map(|k| k as f64 * opts.cadence).collect();

    let mut marks: Vec<(f64, Mark)> = Vec::new();
    marks.extend(sample_times.iter().enumerate().map(|(k, &t)| (t, Mark::Sample(k))));
    for (k, &t) in opts.snapshots.iter().enumerate() {
        if !(0.0..=end + TIME_EPS).contains(&t) {
            return Err(Error::Config(format!(
                "snapshot time {t} us is outside the window [0, {end}]"
            )));
        }
        marks.push((t, Mark::Snapshot(k)));
    }
    for (a, b) in seq.pulse_intervals() {
        marks.push((a, Mark::Edge));
        marks.push((b, Mark::Edge));
    }
    marks.push((end, Mark::Edge));
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Merge marks that coincide within TIME_EPS into one breakpoint. A
    // breakpoint carries at most one sample and any number of snapshots.
    let mut points: Vec<(f64, Option<usize>, Vec<usize>)> = Vec::new();
    for (t, m) in marks {
        if t < -TIME_EPS || t > end + TIME_EPS {
            continue;
        }
        match points.last_mut() {
            Some(last) if (t - last.0).abs() <= TIME_EPS => {
                match m {
                    Mark::Sample(k) => last.1 = Some(k),
                    Mark::Snapshot(k) => last.2.push(k),
                    Mark::Edge => {}
                }
            }
            _ => {
                let (s, snaps) = match m {
                    Mark::Sample(k) => (Some(k), vec![]),
                    Mark::Snapshot(k) => (None, vec![k]),
                    Mark::Edge => (None, vec![]),
                };
                points.push((t, s, snaps));
            }
        }
    }
    if points.first().map(|p| p.0.abs() > TIME_EPS).unwrap_or(true) {
        return Err(Error::Config("timeline must start at t = 0".into()));
    }

    let mut segments = Vec::with_capacity(points.len());
    // Zero-length segment at t = 0 carrying the initial sample and snapshots.
    let zero_snaps = points[0].2.clone();
    segments.push(Segment {
        t0: 0.0,
        t1: 0.0,
        drive_part: Matrix3::zeros(),
        driven: false,
        sample: points[0].1,
        snapshot: None,
    });
    for &k in &zero_snaps {
        segments.push(Segment {
            t0: 0.0,
            t1: 0.0,
            drive_part: Matrix3::zeros(),
            driven: false,
            sample: None,
            snapshot: Some(k),
        });
    }
    for w in points.windows(2) {
        let (t0, t1) = (w[0].0, w[1].0);
        let drives = seq.drives_at(0.5 * (t0 + t1));
        cfg.check_drives(&drives)?;
        let drive_part = hamiltonian(AtomDetuning(0.0), &drives)?.0;
        segments.push(Segment {
            t0,
            t1,
            drive_part,
            driven: !drives.is_empty(),
            sample: w[1].1,
            snapshot: None,
        });
        for &k in &w[1].2 {
            segments.push(Segment {
                t0: t1,
                t1,
                drive_part,
                driven: false,
                sample: None,
                snapshot: Some(k),
            });
        }
    }
    Ok(Timeline {
        sample_times,
        segments,
    })
}

struct GroupRun {
    rho31: Vec<C64>,
    pops: Vec<[f64; 3]>,
    snapshots: Vec<DensityMatrix>,
    tracked: Option<Trajectory>,
    last: DensityMatrix,
    integrity: Integrity,
}

fn run_group(
    delta: f64,
    timeline: &Timeline,
    params: &SystemParams,
    cfg: &IntegratorConfig,
    n_snapshots: usize,
    track: bool,
) -> Result<GroupRun> {
    let rates = params.angular();
    let n = timeline.sample_times.len();
    let mut out = GroupRun {
        rho31: vec![C64::new(0.0, 0.0); n],
        pops: vec![[0.0; 3]; n],
        snapshots: vec![DensityMatrix::ground(); n_snapshots],
        tracked: track.then(Trajectory::default),
        last: DensityMatrix::ground(),
        integrity: Integrity::default(),
    };
    let mut detuning = Matrix3::zeros();
    detuning[(2, 2)] = hamiltonian(AtomDetuning(delta), &[])?.0[(2, 2)];

    let mut rho = DensityMatrix::ground();
    for seg in &timeline.segments {
        if seg.t1 > seg.t0 {
            let h = seg.drive_part + detuning;
            advance(&mut rho, &h, &rates, seg.t0, seg.t1 - seg.t0, cfg.max_step(seg.driven))
                .map_err(|e| e.with_delta(delta))?;
        }
        if let Some(k) = seg.sample {
            out.rho31[k] = rho.rho31();
            out.pops[k] = rho.populations();
            out.integrity.observe(&rho);
            if let Some(tr) = out.tracked.as_mut() {
                tr.push(timeline.sample_times[k], rho);
            }
        }
        if let Some(k) = seg.snapshot {
            out.snapshots[k] = rho;
        }
    }
    out.last = rho;
    Ok(out)
}

/// Evolves every grid group from |1⟩ through `seq` and assembles S(t).
///
/// Groups run in parallel on the current rayon pool; the reduction over
/// groups always runs in ascending-δ order, so the output is bitwise
/// independent of the thread count.
pub fn run_ensemble(
    seq: &PulseSequence,
    grid: &DetuningGrid,
    params: &SystemParams,
    cfg: &IntegratorConfig,
    opts: &EnsembleOptions,
) -> Result<EnsembleTrajectory> {
    params.validate()?;
    cfg.validate()?;
    if !(opts.cadence > 0.0) {
        return Err(Error::Config(format!("sample cadence must be > 0, got {}", opts.cadence)));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty detuning grid".into()));
    }
    let mut track_idx = Vec::with_capacity(opts.track.len());
    for &d in &opts.track {
        let i = grid.index_of(d).ok_or_else(|| {
            Error::Config(format!("tracked detuning {d} kHz is not on the grid"))
        })?;
        track_idx.push(i);
    }

    let timeline = build_timeline(seq, cfg, opts)?;
    let n_snap = opts.snapshots.len();
    let groups: Vec<GroupRun> = grid
        .offsets
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| run_group(delta, &timeline, params, cfg, n_snap, track_idx.contains(&i)))
        .collect::<Result<_>>()?;

    let n = timeline.sample_times.len();
    let mut signal = vec![C64::new(0.0, 0.0); n];
    let mut populations = vec![[0.0; 3]; n];
    let mut integrity = Integrity::default();
    for (g, &w) in groups.iter().zip(&grid.weights) {
        for k in 0..n {
            signal[k] += g.rho31[k] * w;
            for l in 0..3 {
                populations[k][l] += g.pops[k][l] * w;
            }
        }
        integrity.merge(&g.integrity);
    }

    let snapshots = opts
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, &t)| Snapshot {
            time: t,
            states: groups.iter().map(|g| g.snapshots[k]).collect(),
        })
        .collect();
    let mut tracked = Vec::with_capacity(track_idx.len());
    let final_states = groups.iter().map(|g| g.last).collect();
    let mut groups = groups;
    for &i in &track_idx {
        if let Some(tr) = groups[i].tracked.take() {
            tracked.push(TrackedGroup {
                delta: grid.offsets[i],
                trajectory: tr,
            });
        }
    }

    Ok(EnsembleTrajectory {
        grid: grid.clone(),
        times: timeline.sample_times,
        signal,
        populations,
        tracked,
        snapshots,
        final_states,
        integrity,
    })
}
