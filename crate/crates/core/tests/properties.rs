//! Ensemble-level properties of the simulator checked against independent
//! reasoning: free precession, phase swapping by R, the lock, and
//! thread-count determinism.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use photon_echo::analysis::{detect_echo, phase_spread, Window};
use photon_echo::bloch::{AtomDetuning, DensityMatrix, SystemParams};
use photon_echo::ensemble::{build_grid, run_ensemble, DetuningGrid, EnsembleOptions, EnsembleTrajectory};
use photon_echo::integrator::{evolve_interval, IntegratorConfig};
use photon_echo::protocol::{build_sequence, PulseEvent, PulseSequence};

const RABI: f64 = 5.0;

fn grid() -> DetuningGrid {
    build_grid(680.0, 10.0, 161).unwrap()
}

fn conventional() -> PulseSequence {
    build_sequence(vec![PulseEvent::data(0.5, RABI, 5.0), PulseEvent::rephase(1.0, RABI, 10.0)])
        .unwrap()
        .with_end(16.0)
        .unwrap()
}

fn locked(b2: f64, end: f64) -> PulseSequence {
    build_sequence(vec![
        PulseEvent::data(0.5, RABI, 5.0),
        PulseEvent::rephase(1.0, RABI, 10.0),
        PulseEvent::lock(1.0, RABI, 10.1),
        PulseEvent::unlock(3.0, RABI, b2),
    ])
    .unwrap()
    .with_end(end)
    .unwrap()
}

fn run(seq: &PulseSequence, params: &SystemParams, opts: &EnsembleOptions) -> EnsembleTrajectory {
    run_ensemble(seq, &grid(), params, &IntegratorConfig::default(), opts).unwrap()
}

fn k_angular(delta_khz: f64) -> f64 {
    2.0 * PI * delta_khz * 1e-3
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn free_precession_sign_follows_detuning() {
    // H = diag(0, 0, -δ) gives ρ13(t) = ρ13(0)·exp(-iδt).
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rho0 = DensityMatrix::pure([C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)]);
    for delta in [-40.0, 40.0, 300.0] {
        let tr = evolve_interval(
            &rho0,
            0.0,
            2.0,
            AtomDetuning(delta),
            &[],
            &SystemParams::decay_free(),
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        let want = rho0.rho13() * C64::from_polar(1.0, -k_angular(delta) * 2.0);
        // RK4 leaves a phase error of about (ωh)^5/120 per step.
        let h = IntegratorConfig::default().dt_free;
        let bound = 1e-12 + (2.0 / h) * (k_angular(delta) * h).abs().powi(5) / 120.0 * 2.0;
        let err = (tr.last().unwrap().rho13() - want).norm();
        assert!(err < bound.max(1e-9), "delta {delta}: {err} vs {bound}");
    }
}

#[test]
fn echo_peak_and_phase_alignment() {
    let seq = conventional();
    let t = run(&seq, &SystemParams::decay_free(), &EnsembleOptions::default());
    let p = detect_echo(&t, Window::around(15.0), &seq.pulse_intervals()).unwrap();
    assert!((p.t_peak - 15.0).abs() <= 0.01, "{}", p.t_peak);

    let snap = run(
        &seq,
        &SystemParams::decay_free(),
        &EnsembleOptions::default().with_snapshots([p.t_peak, 12.5]),
    );
    let at_echo = phase_spread(&snap.snapshot(p.t_peak).unwrap().states, snap.grid.weights()).unwrap();
    let midway = phase_spread(&snap.snapshot(12.5).unwrap().states, snap.grid.weights()).unwrap();
    assert!(at_echo <= 1e-3, "spread at echo {at_echo}");
    assert!(midway > 0.5, "spread between R and echo {midway}");
}

#[test]
fn rephasing_pulse_swaps_phases_of_mirror_groups() {
    let seq = conventional();
    let opts = EnsembleOptions::default().with_track([-40.0, 40.0]);
    let t = run(&seq, &SystemParams::decay_free(), &opts);
    let plus = t.tracked(40.0).unwrap();
    let minus = t.tracked(-40.0).unwrap();
    let arg_at = |tr: &photon_echo::integrator::Trajectory, time: f64| {
        let k = t.sample_index(time);
        assert!((t.times[k] - time).abs() < 1e-9);
        tr.states[k].rho13().arg()
    };
    let diffs: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&tau| wrap(arg_at(plus, 10.0 + tau) - arg_at(minus, 10.0 - tau)))
        .collect();
    for d in &diffs {
        assert!(wrap(d - diffs[0]).abs() < 1e-3, "{diffs:?}");
    }
}

#[test]
fn lock_freezes_spin_coherence() {
    let seq = locked(20.0, 21.0);
    let b1_end = seq.get("B1").unwrap().end();
    let b2_start = seq.get("B2").unwrap().start();
    let opts = EnsembleOptions::default().with_snapshots([b1_end, 0.5 * (b1_end + b2_start), b2_start]);
    let t = run(&seq, &SystemParams::decay_free(), &opts);
    let snaps: Vec<&[DensityMatrix]> = [b1_end, 0.5 * (b1_end + b2_start), b2_start]
        .iter()
        .map(|&x| t.snapshot(x).unwrap().states.as_slice())
        .collect();
    for (k, &delta) in t.grid.offsets().iter().enumerate() {
        let r12 = snaps[0][k].rho12().norm();
        for s in &snaps[1..] {
            assert!((s[k].rho12().norm() - r12).abs() <= 1e-6, "delta {delta}");
            // A rectangular π pulse leaves an O(δ/Ω) optical remainder off resonance.
            let bound = 1e-6 + (delta / (RABI * 1e3)).abs();
            assert!(s[k].rho13().norm() <= bound, "delta {delta}: {}", s[k].rho13().norm());
            assert!(s[k].rho23().norm() <= bound, "delta {delta}: {}", s[k].rho23().norm());
        }
    }
    let c = t.grid.index_of(0.0).unwrap();
    for s in &snaps {
        assert!(s[c].rho13().norm() <= 1e-6);
        assert!(s[c].rho23().norm() <= 1e-6);
        assert!(s[c].rho12().norm() > 0.49);
    }
}

#[test]
fn lock_decays_at_spin_dephasing_rate() {
    let gamma12 = 20.0;
    let seq = locked(40.0, 41.0);
    let b1_end = seq.get("B1").unwrap().end();
    let later = b1_end + 25.0;
    let opts = EnsembleOptions::default().with_snapshots([b1_end, later]);
    let params = SystemParams {
        gamma12,
        ..SystemParams::decay_free()
    };
    let t = run(&seq, &params, &opts);
    let a = &t.snapshot(b1_end).unwrap().states;
    let b = &t.snapshot(later).unwrap().states;
    let want = (-k_angular(gamma12) * 25.0).exp();
    for k in 0..t.grid.len() {
        let ratio = b[k].rho12().norm() / a[k].rho12().norm();
        assert!((ratio / want - 1.0).abs() <= 0.01, "group {k}: {ratio} vs {want}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let seq = conventional();
    let opts = EnsembleOptions::default().with_track([40.0]);
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&seq, &SystemParams::decay_free(), &opts))
    };
    let one = go(1);
    let four = go(4);
    assert_eq!(one.signal, four.signal);
    assert_eq!(one.populations, four.populations);
    assert_eq!(one.tracked(40.0).unwrap().states, four.tracked(40.0).unwrap().states);
}

#[test]
fn populations_stay_normalised_with_decay() {
    let params = SystemParams {
        gamma13: 10.0,
        gamma23: 10.0,
        gamma12: 2.0,
        big_gamma31: 5.0,
        big_gamma32: 5.0,
        big_gamma12: 2.0,
    };
    let t = run(&locked(20.0, 26.0), &params, &EnsembleOptions::default());
    for p in &t.populations {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| x >= -1e-9));
    }
    assert!(t.integrity.max_trace_error < 1e-9);
}
