//! Echo detection, signed efficiency, decay fitting and per-group phase
//! diagnostics.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bloch::DensityMatrix;
use crate::ensemble::EnsembleTrajectory;
use crate::error::{Error, Result};
use crate::integrator::Trajectory;

/// Peaks weaker than this are reported as no echo.
pub const NOISE_FLOOR: f64 = 1e-9;

/// Half-width of the default echo search window, μs.
pub const DEFAULT_HALF_WINDOW: f64 = 2.0;

/// Coherences smaller than this carry no usable phase.
pub const PHASE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EchoPeak {
    /// Peak time, refined between samples (μs).
    pub t_peak: f64,
    /// S at the peak sample.
    #[serde(skip)]
    pub amplitude: C64,
    pub magnitude: f64,
}

impl EchoPeak {
    pub fn new(t_peak: f64, amplitude: C64) -> Self {
        Self {
            t_peak,
            amplitude,
            magnitude: amplitude.norm(),
        }
    }
}

/// Search window [lo, hi] in μs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `center` ± [`DEFAULT_HALF_WINDOW`].
    pub fn around(center: f64) -> Self {
        Self::new(center - DEFAULT_HALF_WINDOW, center + DEFAULT_HALF_WINDOW)
    }
}

fn excluded(t: f64, exclude: &[(f64, f64)]) -> bool {
    exclude.iter().any(|&(a, b)| t >= a - 1e-9 && t <= b + 1e-9)
}

/// Indices of samples inside `window` and outside every `exclude` interval.
fn window_indices(times: &[f64], window: Window, exclude: &[(f64, f64)]) -> Vec<usize> {
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= window.lo - 1e-9 && t <= window.hi + 1e-9 && !excluded(t, exclude))
        .map(|(k, _)| k)
        .collect()
}

/// Largest |S| in the window, or `None` if the window holds no samples.
pub fn max_magnitude(
    traj: &EnsembleTrajectory,
    window: Window,
    exclude: &[(f64, f64)],
) -> Option<f64> {
    window_indices(&traj.times, window, exclude)
        .into_iter()
        .map(|k| traj.signal[k].norm())
        .reduce(f64::max)
}

/// Locates the maximum of |S(t)| inside `window`, skipping samples that fall
/// inside any of the `exclude` intervals (normally the pulses).
///
/// The peak time is refined with a parabola through the neighbouring
/// samples; the amplitude is the sample value itself.
pub fn detect_echo(
    traj: &EnsembleTrajectory,
    window: Window,
    exclude: &[(f64, f64)],
) -> Result<EchoPeak> {
    let idx = window_indices(&traj.times, window, exclude);
    let Some(&best) = idx
        .iter()
        .max_by(|&&a, &&b| traj.signal[a].norm().total_cmp(&traj.signal[b].norm()))
    else {
        return Err(Error::Analysis(format!(
            "echo window [{}, {}] contains no samples",
            window.lo, window.hi
        )));
    };
    let amp = traj.signal[best];
    if amp.norm() < NOISE_FLOOR {
        return Err(Error::NoEcho {
            lo: window.lo,
            hi: window.hi,
        });
    }

    let mut t_peak = traj.times[best];
    if best > 0 && best + 1 < traj.times.len() && idx.contains(&(best - 1)) && idx.contains(&(best + 1)) {
        let y0 = traj.signal[best - 1].norm();
        let y1 = amp.norm();
        let y2 = traj.signal[best + 1].norm();
        let curv = y0 - 2.0 * y1 + y2;
        if curv < 0.0 {
            let h = 0.5 * (traj.times[best + 1] - traj.times[best - 1]);
            let shift = 0.5 * (y0 - y2) / curv;
            t_peak += shift.clamp(-0.5, 0.5) * h;
        }
    }
    Ok(EchoPeak::new(t_peak, amp))
}

/// Phase-projected amplitude ratio in percent:
/// 100 · Re(A·conj(A_ref)) / |A_ref|². An echo with inverted sign reads −100.
pub fn signed_efficiency(echo: &EchoPeak, reference: &EchoPeak) -> Result<f64> {
    let r2 = reference.amplitude.norm_sqr();
    if !(r2 > 0.0) {
        return Err(Error::Analysis("reference echo has zero amplitude".into()));
    }
    Ok(100.0 * (echo.amplitude * reference.amplitude.conj()).re / r2)
}

/// Exponential decay A(t) = A0 · exp(−t / T2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub a0: f64,
    /// 1/e time, μs.
    pub t2: f64,
    /// RMS residual of the fit in ln A.
    pub residual: f64,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a0 * (-t / self.t2).exp()
    }
}

/// Least-squares line through (t, ln A).
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 2 {
        return Err(Error::Analysis(format!(
            "exponential fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(t, a)) = points.iter().find(|(_, a)| !(*a > 0.0)) {
        return Err(Error::Analysis(format!("non-positive amplitude {a} at t = {t}")));
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Analysis("all fit points share the same time".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1.ln() - mean_y)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Analysis(format!("amplitudes do not decay (slope {slope})")));
    }
    let intercept = mean_y - slope * mean_t;
    let residual = (points
        .iter()
        .map(|p| (p.1.ln() - (intercept + slope * p.0)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        a0: intercept.exp(),
        t2: -1.0 / slope,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlochPoint {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// (u, v) = (2 Re ρ13, 2 Im ρ13) along a single-group trajectory.
pub fn bloch_uv(traj: &Trajectory) -> Vec<BlochPoint> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| BlochPoint {
            t,
            u: 2.0 * s.rho13().re,
            v: 2.0 * s.rho13().im,
        })
        .collect()
}

/// Circular variance of arg ρ31 across groups: 1 − |Σ w e^{iφ}| / Σ w,
/// restricted to groups with |ρ31| above [`PHASE_THRESHOLD`].
pub fn phase_spread(states: &[DensityMatrix], weights: &[f64]) -> Result<f64> {
    if states.len() != weights.len() {
        return Err(Error::Analysis(format!(
            "{} states but {} weights",
            states.len(),
            weights.len()
        )));
    }
    let mut sum = C64::new(0.0, 0.0);
    let mut total = 0.0;
    let mut used = 0;
    for (s, &w) in states.iter().zip(weights) {
        let z = s.rho31();
        if z.norm() > PHASE_THRESHOLD {
            sum += C64::from_polar(w, z.arg());
            total += w;
            used += 1;
        }
    }
    if used < 2 || !(total > 0.0) {
        return Err(Error::Analysis(
            "fewer than two groups carry a measurable coherence".into(),
        ));
    }
    Ok(1.0 - sum.norm() / total)
}
