//! Fixed-step RK4 propagation of a single density matrix under piecewise
//! constant drives, and the decay-free exact propagator used to check it.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bloch::{
    hamiltonian, rhs_angular, validate_state, AngularRates, AtomDetuning, DensityMatrix,
    DriveField, Hamiltonian, SystemParams,
};
use crate::error::{Error, Result};

/// Trace error above which a step is rejected.
pub const STEP_TRACE_LIMIT: f64 = 1e-6;

/// Minimum number of steps per Rabi period of the fastest active drive.
pub const STEPS_PER_RABI_PERIOD: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Largest step while any drive is on (μs).
    pub dt_pulse: f64,
    /// Largest step during free evolution (μs).
    pub dt_free: f64,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_pulse: 0.0005,
            dt_free: 0.01,
            method: Method::Rk4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_pulse > 0.0 && self.dt_pulse.is_finite()) {
            return Err(Error::Config(format!("dt_pulse must be > 0, got {}", self.dt_pulse)));
        }
        if !(self.dt_free >= self.dt_pulse && self.dt_free.is_finite()) {
            return Err(Error::Config(format!(
                "dt_free ({}) must be >= dt_pulse ({})",
                self.dt_free, self.dt_pulse
            )));
        }
        Ok(())
    }

    /// Checks the pulse step against the Rabi period of the given drives.
    pub fn check_drives(&self, drives: &[DriveField]) -> Result<()> {
        let fastest = drives.iter().map(|d| d.rabi).fold(0.0, f64::max);
        if fastest > 0.0 {
            let limit = 1.0 / (fastest * STEPS_PER_RABI_PERIOD);
            if self.dt_pulse > limit {
                return Err(Error::Config(format!(
                    "dt_pulse = {} us is too coarse for a {fastest} MHz drive (max {limit} us)",
                    self.dt_pulse
                )));
            }
        }
        Ok(())
    }

    /// Step ceiling for an interval with or without drives.
    pub fn max_step(&self, driven: bool) -> f64 {
        if driven {
            self.dt_pulse
        } else {
            self.dt_free
        }
    }

    /// Both step limits divided by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            dt_pulse: self.dt_pulse / factor,
            dt_free: self.dt_free / factor,
            method: self.method,
        }
    }
}

/// Sampled history of one density matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    pub fn push(&mut self, t: f64, rho: DensityMatrix) {
        self.times.push(t);
        self.states.push(rho);
    }

    /// Worst invariant residuals over every stored state.
    pub fn integrity(&self) -> Integrity {
        self.states.iter().fold(Integrity::default(), |mut acc, s| {
            acc.observe(s);
            acc
        })
    }
}

/// Running worst-case of the state invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrity {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub samples: usize,
}

impl Default for Integrity {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            samples: 0,
        }
    }
}

impl Integrity {
    pub fn observe(&mut self, rho: &DensityMatrix) {
        let d = validate_state(rho);
        self.max_trace_error = self.max_trace_error.max(d.trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(d.hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(d.min_eigenvalue);
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &Integrity) {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.samples += other.samples;
    }
}

/// One classical RK4 step of length `dt` under a constant Hamiltonian,
/// followed by re-symmetrization.
pub fn step_rk4(
    rho: &DensityMatrix,
    h: &Hamiltonian,
    params: &SystemParams,
    dt: f64,
) -> Result<DensityMatrix> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be > 0, got {dt}")));
    }
    rk4_angular(rho, &h.0, &params.angular(), dt)
}

#[inline]
pub(crate) fn rk4_angular(
    rho: &DensityMatrix,
    h: &Matrix3<C64>,
    rates: &AngularRates,
    dt: f64,
) -> Result<DensityMatrix> {
    let y = &rho.0;
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let k1 = rhs_angular(y, h, rates);
    let k2 = rhs_angular(&(y + k1 * half), h, rates);
    let k3 = rhs_angular(&(y + k2 * half), h, rates);
    let k4 = rhs_angular(&(y + k3 * full), h, rates);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    let next = y + (k1 + k2 * two + k3 * two + k4) * sixth;

    let mut out = DensityMatrix(next);
    out.symmetrize();
    let trace_error = (out.trace() - C64::new(1.0, 0.0)).norm();
    if !(trace_error <= STEP_TRACE_LIMIT) {
        return Err(Error::Numerical {
            t_us: f64::NAN,
            delta_khz: None,
            detail: format!("trace error {trace_error:e} after step dt = {dt}"),
        });
    }
    Ok(out)
}

/// Advances `rho` by `duration` in equal substeps no longer than `max_dt`.
/// `t0` only labels errors.
pub(crate) fn advance(
    rho: &mut DensityMatrix,
    h: &Matrix3<C64>,
    rates: &AngularRates,
    t0: f64,
    duration: f64,
    max_dt: f64,
) -> Result<()> {
    if duration <= 0.0 {
        return Ok(());
    }
    let n = substeps(duration, max_dt);
    let dt = duration / n as f64;
    for k in 0..n {
        *rho = rk4_angular(rho, h, rates, dt).map_err(|e| match e {
            Error::Numerical { delta_khz, detail, .. } => Error::Numerical {
                t_us: t0 + (k + 1) as f64 * dt,
                delta_khz,
                detail,
            },
            other => other,
        })?;
    }
    Ok(())
}

/// Number of equal steps needed to cover `duration` with steps ≤ `max_dt`.
/// A relative slack of 1e-9 keeps exact multiples from gaining a step.
pub(crate) fn substeps(duration: f64, max_dt: f64) -> usize {
    ((duration / max_dt) * (1.0 - 1e-9)).ceil().max(1.0) as usize
}

/// Evolves `rho` from `t_start` for `duration` under constant `drives`.
///
/// With `cadence = Some(dt_s)` a sample is stored every `dt_s` μs after
/// `t_start`; the first and final states are always stored, and the final
/// time is exactly `t_start + duration`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_interval(
    rho: &DensityMatrix,
    t_start: f64,
    duration: f64,
    delta: AtomDetuning,
    drives: &[DriveField],
    params: &SystemParams,
    cfg: &IntegratorConfig,
    cadence: Option<f64>,
) -> Result<Trajectory> {
    if !(duration >= 0.0) {
        return Err(Error::Config(format!("duration must be >= 0, got {duration}")));
    }
    cfg.validate()?;
    cfg.check_drives(drives)?;
    if let Some(c) = cadence {
        if !(c > 0.0) {
            return Err(Error::Config(format!("sample cadence must be > 0, got {c}")));
        }
    }
    let h = hamiltonian(delta, drives)?;
    let rates = params.angular();
    let max_dt = cfg.max_step(drives.iter().any(|d| d.rabi > 0.0));

    let mut traj = Trajectory::default();
    let mut state = *rho;
    traj.push(t_start, state);
    if duration == 0.0 {
        return Ok(traj);
    }

    let t_end = t_start + duration;
    let mut marks: Vec<f64> = Vec::new();
    if let Some(c) = cadence {
        let n = substeps(duration, c);
        marks.extend((1..n).map(|k| t_start + k as f64 * c).filter(|&t| t < t_end - 1e-12));
    }
    marks.push(t_end);

    let mut t = t_start;
    for &m in &marks {
        advance(&mut state, &h.0, &rates, t, m - t, max_dt).map_err(|e| e.with_delta(delta.0))?;
        t = m;
        traj.push(t, state);
    }
    Ok(traj)
}

/// ρ(t) = U ρ U† with U = exp(−iHt), from the eigendecomposition of H.
/// Ignores every relaxation channel.
pub fn exact_unitary(rho: &DensityMatrix, h: &Hamiltonian, duration: f64) -> DensityMatrix {
    let u = unitary(h, duration);
    DensityMatrix(u * rho.0 * u.adjoint())
}

/// exp(−iHt) for Hermitian H.
pub fn unitary(h: &Hamiltonian, duration: f64) -> Matrix3<C64> {
    let eig = h.0.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = Matrix3::from_diagonal(
        &eig.eigenvalues
            .map(|lambda| C64::from_polar(1.0, -lambda * duration)),
    );
    v * phases * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{khz_to_angular, Transition};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn drive13() -> DriveField {
        DriveField::new(Transition::Opt13, 5.0)
    }

    #[test]
    fn pi_pulse_inverts() {
        let cfg = IntegratorConfig::default();
        let traj = evolve_interval(
            &DensityMatrix::ground(),
            0.0,
            0.1,
            AtomDetuning(0.0),
            &[drive13()],
            &SystemParams::decay_free(),
            &cfg,
            None,
        )
        .unwrap();
        // sin²(π/2) = 1
        assert_abs_diff_eq!(traj.last().unwrap().rho33(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn half_pi_pulse_splits_population() {
        let traj = evolve_interval(
            &DensityMatrix::ground(),
            0.0,
            0.05,
            AtomDetuning(0.0),
            &[drive13()],
            &SystemParams::decay_free(),
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        let end = traj.last().unwrap();
        assert_abs_diff_eq!(end.rho33(), 0.5, epsilon = 1e-6);
        // maximal coherence, purely imaginary in this frame
        assert_abs_diff_eq!(end.rho13().im.abs(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let h = hamiltonian(AtomDetuning(300.0), &[drive13()]).unwrap();
        let params = SystemParams {
            gamma13: 10.0,
            big_gamma31: 5.0,
            ..Default::default()
        };
        let rho0 = DensityMatrix::ground();
        let gap = |dt: f64| {
            let one = step_rk4(&rho0, &h, &params, dt).unwrap();
            let half = step_rk4(&rho0, &h, &params, dt / 2.0).unwrap();
            let two = step_rk4(&half, &h, &params, dt / 2.0).unwrap();
            (one.0 - two.0).norm()
        };
        let ratio = gap(0.004) / gap(0.002);
        // O(dt⁵) ⇒ ratio ≈ 32
        assert!((ratio - 32.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn zero_duration_is_identity() {
        let rho = DensityMatrix::pure([C64::new(0.3, 0.0), C64::new(0.0, 0.4), C64::new(0.5, 0.1)]);
        let traj = evolve_interval(
            &rho,
            3.0,
            0.0,
            AtomDetuning(10.0),
            &[],
            &SystemParams::decay_free(),
            &IntegratorConfig::default(),
            Some(0.01),
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.times[0], 3.0);
        assert_eq!(traj.states[0], rho);
    }

    #[test]
    fn free_coherence_decay() {
        let rho = DensityMatrix::pure([C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let params = SystemParams {
            gamma13: 10.0,
            ..Default::default()
        };
        let traj = evolve_interval(
            &rho,
            0.0,
            8.0,
            AtomDetuning(25.0),
            &[],
            &params,
            &IntegratorConfig::default(),
            Some(0.5),
        )
        .unwrap();
        assert_eq!(traj.len(), 17);
        assert_eq!(*traj.times.last().unwrap(), 8.0);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let expected = 0.5 * (-khz_to_angular(10.0) * t).exp();
            assert!((s.rho13().norm() / expected - 1.0).abs() < 1e-6);
        }
        let ratio = traj.last().unwrap().rho13().norm() / 0.5;
        assert_abs_diff_eq!(ratio, 0.6049, epsilon = 1e-4);
    }

    #[test]
    fn split_interval_composes() {
        let cfg = IntegratorConfig::default();
        let p = SystemParams::decay_free();
        let whole = evolve_interval(&DensityMatrix::ground(), 0.0, 0.1, AtomDetuning(70.0), &[drive13()], &p, &cfg, None)
            .unwrap();
        let first = evolve_interval(&DensityMatrix::ground(), 0.0, 0.05, AtomDetuning(70.0), &[drive13()], &p, &cfg, None)
            .unwrap();
        let second = evolve_interval(first.last().unwrap(), 0.05, 0.05, AtomDetuning(70.0), &[drive13()], &p, &cfg, None)
            .unwrap();
        let diff = (whole.last().unwrap().0 - second.last().unwrap().0).norm();
        assert!(diff < 1e-9, "diff {diff}");
    }

    #[test]
    fn coarse_pulse_step_is_rejected() {
        let cfg = IntegratorConfig {
            dt_pulse: 0.01,
            dt_free: 0.01,
            method: Method::Rk4,
        };
        let err = evolve_interval(
            &DensityMatrix::ground(),
            0.0,
            0.1,
            AtomDetuning(0.0),
            &[drive13()],
            &SystemParams::decay_free(),
            &cfg,
            None,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn config_ordering_enforced() {
        let bad = IntegratorConfig {
            dt_pulse: 0.02,
            dt_free: 0.01,
            method: Method::Rk4,
        };
        assert!(bad.validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }

    #[test]
    fn exact_unitary_reference_cases() {
        let rho = DensityMatrix::pure([C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.8)]);
        assert_abs_diff_eq!((exact_unitary(&rho, &Hamiltonian::zero(), 1.3).0 - rho.0).norm(), 0.0, epsilon = 1e-15);

        let h = hamiltonian(AtomDetuning(0.0), &[drive13()]).unwrap();
        let out = exact_unitary(&DensityMatrix::ground(), &h, 0.1);
        assert_abs_diff_eq!(out.rho33(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.rho11(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_free_evolution_preserves_purity() {
        let h = hamiltonian(
            AtomDetuning(200.0),
            &[drive13(), DriveField::new(Transition::Opt23, 3.0)],
        )
        .unwrap();
        let mut rho = DensityMatrix::ground();
        let rates = SystemParams::decay_free().angular();
        advance(&mut rho, &h.0, &rates, 0.0, 1.0, 0.0005).unwrap();
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rk4_matches_exact_unitary_on_random_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rates = SystemParams::decay_free().angular();
        for _ in 0..20 {
            let drives = [
                DriveField::new(Transition::Opt13, rng.gen_range(0.0..5.0)).with_phase(rng.gen_range(0.0..6.3)),
                DriveField::new(Transition::Opt23, rng.gen_range(0.0..5.0)).with_phase(rng.gen_range(0.0..6.3)),
            ];
            let h = hamiltonian(AtomDetuning(rng.gen_range(-800.0..800.0)), &drives).unwrap();
            let psi = [0, 1, 2].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let rho0 = DensityMatrix::pure(psi);
            let t = rng.gen_range(0.1..1.0);
            let mut rho = rho0;
            advance(&mut rho, &h.0, &rates, 0.0, t, 0.0005).unwrap();
            let exact = exact_unitary(&rho0, &h, t);
            assert!((rho.0 - exact.0).norm() < 1e-8);
        }
    }

    #[test]
    fn substep_count_respects_exact_multiples() {
        assert_eq!(substeps(0.1, 0.0005), 200);
        assert_eq!(substeps(0.01, 0.01), 1);
        assert_eq!(substeps(0.011, 0.01), 2);
        assert_eq!(substeps(1e-6, 0.01), 1);
    }
}
