//! Three-level Λ system in the rotating frame.
//!
//! Levels are |1⟩ and |2⟩ (ground and auxiliary spin state) and the shared
//! excited state |3⟩. Units at the public boundary follow the lab
//! conventions of the rest of the crate: times in μs, Rabi frequencies as
//! Ω/2π in MHz, detunings and decay rates in kHz. Everything is converted to
//! angular frequency (rad/μs) before it reaches the equations of motion.
//!
//! Matrix indices inside this module are zero-based (`m[(0, 2)]` is ρ₁₃).

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// kHz (ordinary frequency) to rad/μs.
#[inline]
pub fn khz_to_angular(khz: f64) -> f64 {
    TAU * khz * 1e-3
}

/// MHz (ordinary frequency) to rad/μs.
#[inline]
pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz
}

/// Population and coherence decay rates, all in kHz.
///
/// `gamma_ij` damps the coherence ρ_ij; `big_gamma_*` move population.
/// Only non-negativity is enforced: coherence rates are chosen independently
/// of the population rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma13: f64,
    pub gamma23: f64,
    pub gamma12: f64,
    /// |3⟩ → |1⟩
    #[serde(rename = "Gamma31")]
    pub big_gamma31: f64,
    /// |3⟩ → |2⟩
    #[serde(rename = "Gamma32")]
    pub big_gamma32: f64,
    /// |1⟩ ↔ |2⟩ spin population exchange
    #[serde(rename = "Gamma12")]
    pub big_gamma12: f64,
}

impl SystemParams {
    /// Every rate zero: purely coherent evolution.
    pub fn decay_free() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named_rates() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "decay rate {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn named_rates(&self) -> [(&'static str, f64); 6] {
        [
            ("gamma13", self.gamma13),
            ("gamma23", self.gamma23),
            ("gamma12", self.gamma12),
            ("Gamma31", self.big_gamma31),
            ("Gamma32", self.big_gamma32),
            ("Gamma12", self.big_gamma12),
        ]
    }

    pub fn angular(&self) -> AngularRates {
        AngularRates {
            g13: khz_to_angular(self.gamma13),
            g23: khz_to_angular(self.gamma23),
            g12: khz_to_angular(self.gamma12),
            p31: khz_to_angular(self.big_gamma31),
            p32: khz_to_angular(self.big_gamma32),
            p12: khz_to_angular(self.big_gamma12),
        }
    }
}

/// [`SystemParams`] converted to rad/μs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AngularRates {
    pub g13: f64,
    pub g23: f64,
    pub g12: f64,
    pub p31: f64,
    pub p32: f64,
    pub p12: f64,
}

impl AngularRates {
    fn is_zero(&self) -> bool {
        self.g13 == 0.0
            && self.g23 == 0.0
            && self.g12 == 0.0
            && self.p31 == 0.0
            && self.p32 == 0.0
            && self.p12 == 0.0
    }
}

/// Optical transition addressed by a drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    /// |1⟩–|3⟩, used by the data and rephasing pulses.
    #[serde(rename = "13")]
    Opt13,
    /// |2⟩–|3⟩, used by the locking and unlocking pulses.
    #[serde(rename = "23")]
    Opt23,
}

impl Transition {
    /// Zero-based index of the ground level coupled to |3⟩.
    fn lower(self) -> usize {
        match self {
            Transition::Opt13 => 0,
            Transition::Opt23 => 1,
        }
    }
}

/// A resonant carrier on one optical transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveField {
    pub transition: Transition,
    /// Ω/2π in MHz.
    pub rabi: f64,
    /// Carrier phase in rad.
    pub phase: f64,
}

impl DriveField {
    pub fn new(transition: Transition, rabi: f64) -> Self {
        Self {
            transition,
            rabi,
            phase: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }
}

/// Optical detuning δ of one atom group in kHz.
///
/// Both optical transitions shift together, so the two-photon detuning of
/// the spin transition is identically zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct AtomDetuning(pub f64);

impl AtomDetuning {
    pub fn khz(self) -> f64 {
        self.0
    }
}

/// H/ħ in rad/μs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hamiltonian(pub Matrix3<C64>);

impl Hamiltonian {
    pub fn zero() -> Self {
        Hamiltonian(Matrix3::zeros())
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    /// Largest |H_ij|, a cheap stand-in for the fastest frequency present.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Rotating-frame Hamiltonian for one detuning group under the given drives.
///
/// Diagonal is (0, 0, −δ). Each drive contributes H_{g3} = −(Ω/2)·e^{iφ}
/// with its Hermitian partner, where Ω = 2π·rabi, so a pulse of area
/// θ = ∫Ω dt inverts a resonant transition with probability sin²(θ/2).
pub fn hamiltonian(delta: AtomDetuning, drives: &[DriveField]) -> Result<Hamiltonian> {
    let mut h = Matrix3::<C64>::zeros();
    h[(2, 2)] = C64::new(-khz_to_angular(delta.0), 0.0);

    let mut seen = [false; 2];
    for d in drives {
        if !(d.rabi >= 0.0) || !d.rabi.is_finite() {
            return Err(Error::Config(format!(
                "Rabi frequency must be finite and >= 0, got {}",
                d.rabi
            )));
        }
        let g = d.transition.lower();
        if seen[g] {
            return Err(Error::Config(format!(
                "more than one simultaneous drive on transition {:?}",
                d.transition
            )));
        }
        seen[g] = true;
        let coupling = C64::from_polar(-0.5 * mhz_to_angular(d.rabi), d.phase);
        h[(g, 2)] = coupling;
        h[(2, g)] = coupling.conj();
    }
    Ok(Hamiltonian(h))
}

/// 3×3 density matrix of one atom group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(pub Matrix3<C64>);

impl DensityMatrix {
    /// All population in |1⟩.
    pub fn ground() -> Self {
        let mut m = Matrix3::zeros();
        m[(0, 0)] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) amplitude vector.
    pub fn pure(amplitudes: [C64; 3]) -> Self {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let m = Matrix3::from_fn(|i, j| amplitudes[i] * amplitudes[j].conj() / norm);
        DensityMatrix(m)
    }

    pub fn from_matrix(m: Matrix3<C64>) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn rho11(&self) -> f64 {
        self.0[(0, 0)].re
    }
    pub fn rho22(&self) -> f64 {
        self.0[(1, 1)].re
    }
    pub fn rho33(&self) -> f64 {
        self.0[(2, 2)].re
    }
    pub fn rho12(&self) -> C64 {
        self.0[(0, 1)]
    }
    pub fn rho13(&self) -> C64 {
        self.0[(0, 2)]
    }
    pub fn rho31(&self) -> C64 {
        self.0[(2, 0)]
    }
    pub fn rho23(&self) -> C64 {
        self.0[(1, 2)]
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.rho11(), self.rho22(), self.rho33()]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Purity tr(ρ²).
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        let adj = self.0.adjoint();
        self.0 = (self.0 + adj) * C64::new(0.5, 0.0);
    }
}

/// dρ/dt = −i[H, ρ] plus the relaxation channels of `params`, in 1/μs.
///
/// Relaxation: |3⟩ empties into |1⟩ and |2⟩ at Γ31 and Γ32, |1⟩ and |2⟩
/// exchange population at Γ12, and each coherence ρ_ij is damped at γ_ij.
/// The result is Hermitian and traceless for Hermitian input.
pub fn liouville_rhs(rho: &DensityMatrix, h: &Hamiltonian, params: &SystemParams) -> Matrix3<C64> {
    rhs_angular(&rho.0, &h.0, &params.angular())
}

#[inline]
pub(crate) fn rhs_angular(rho: &Matrix3<C64>, h: &Matrix3<C64>, r: &AngularRates) -> Matrix3<C64> {
    let comm = h * rho - rho * h;
    let mut d = comm * C64::new(0.0, -1.0);
    if r.is_zero() {
        return d;
    }

    let p33 = rho[(2, 2)];
    let x12 = (rho[(1, 1)] - rho[(0, 0)]) * r.p12;
    d[(0, 0)] += p33 * r.p31 + x12;
    d[(1, 1)] += p33 * r.p32 - x12;
    d[(2, 2)] -= p33 * (r.p31 + r.p32);

    for (i, j, g) in [(0, 2, r.g13), (1, 2, r.g23), (0, 1, r.g12)] {
        d[(i, j)] -= rho[(i, j)] * g;
        d[(j, i)] -= rho[(j, i)] * g;
    }
    d
}

/// Invariant residuals of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    /// |tr ρ − 1|
    pub trace_error: f64,
    /// max |ρ_ij − conj(ρ_ji)|
    pub hermiticity_error: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub const TRACE_TOL: f64 = 1e-9;
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const EIGENVALUE_FLOOR: f64 = -1e-8;

    pub fn is_valid(&self) -> bool {
        self.trace_error <= Self::TRACE_TOL
            && self.hermiticity_error <= Self::HERMITICITY_TOL
            && self.min_eigenvalue >= Self::EIGENVALUE_FLOOR
    }
}

pub fn validate_state(rho: &DensityMatrix) -> StateDiagnostics {
    let m = &rho.0;
    let trace_error = (m.trace() - C64::new(1.0, 0.0)).norm();
    let mut hermiticity_error = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            hermiticity_error = hermiticity_error.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let min_eigenvalue = hermitian_eigenvalues(&herm)[0];
    StateDiagnostics {
        trace_error,
        hermiticity_error,
        min_eigenvalue,
    }
}

/// Eigenvalues of a 3×3 Hermitian matrix, ascending.
///
/// Cyclic complex Jacobi rotations. Unlike the closed-form cubic this keeps
/// full absolute accuracy for repeated eigenvalues, which matters because
/// pure states have a doubly degenerate zero eigenvalue.
pub fn hermitian_eigenvalues(m: &Matrix3<C64>) -> [f64; 3] {
    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if scale == 0.0 {
        return [0.0; 3];
    }
    for _sweep in 0..16 {
        let off = a[(0, 1)].norm_sqr() + a[(0, 2)].norm_sqr() + a[(1, 2)].norm_sqr();
        if off <= 1e-34 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            let mag = apq.norm();
            if mag == 0.0 {
                continue;
            }
            let phase = apq / mag;
            let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
            let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // A ← J† A J with J = [[c, s·e^{iφ}], [−s·e^{−iφ}, c]] in the (p, q) plane
            let mut j = Matrix3::<C64>::identity();
            j[(p, p)] = C64::new(c, 0.0);
            j[(q, q)] = C64::new(c, 0.0);
            j[(p, q)] = phase * s;
            j[(q, p)] = -phase.conj() * s;
            a = j.adjoint() * a * j;
            a[(p, q)] = C64::new(0.0, 0.0);
            a[(q, p)] = C64::new(0.0, 0.0);
        }
    }
    let mut ev = [a[(0, 0)].re, a[(1, 1)].re, a[(2, 2)].re];
    ev.sort_by(f64::total_cmp);
    ev
}
