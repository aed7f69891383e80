//! Phase-locked echo: B1 right after R parks the optical coherence in the
//! spin state, B2 at 55 μs brings it back. The B2 area decides the sign.
//!
//! Efficiency is measured against the two-pulse echo of the same D and R.

use photon_echo::analysis::{detect_echo, signed_efficiency, EchoPeak, Window};
use photon_echo::bloch::SystemParams;
use photon_echo::ensemble::{build_grid, run_ensemble, DetuningGrid, EnsembleOptions};
use photon_echo::integrator::IntegratorConfig;
use photon_echo::protocol::{build_sequence, classify_areas, predict_echo_time, PulseEvent, PulseSequence};

const RABI: f64 = 5.0;

fn echo(seq: &PulseSequence, grid: &DetuningGrid, params: &SystemParams, t: f64) -> photon_echo::Result<EchoPeak> {
    let traj = run_ensemble(seq, grid, params, &IntegratorConfig::default(), &EnsembleOptions::default())?;
    detect_echo(&traj, Window::around(t), &seq.pulse_intervals())
}

fn main() -> photon_echo::Result<()> {
    let grid = build_grid(680.0, 10.0, 161)?;
    let params = SystemParams {
        gamma13: 10.0,
        gamma23: 10.0,
        big_gamma31: 5.0,
        big_gamma32: 5.0,
        ..SystemParams::decay_free()
    };
    let d = PulseEvent::data(0.5, RABI, 5.0);
    let r = PulseEvent::rephase(1.0, RABI, 10.0);

    let reference = echo(&build_sequence(vec![d.clone(), r.clone()])?, &grid, &params, 15.0)?;
    let t_echo = predict_echo_time(5.0, 10.0, 10.1, 55.0)?;
    println!("reference |S| = {:.5}, locked echo expected at {t_echo:.2} us", reference.magnitude);

    for b2 in [1.0, 2.0, 3.0, 4.0] {
        let seq = build_sequence(vec![
            d.clone(),
            r.clone(),
            PulseEvent::lock(1.0, RABI, 10.1),
            PulseEvent::unlock(b2, RABI, 55.0),
        ])?;
        let rule = classify_areas(1.0, 1.0, b2).map(|c| c.to_string()).unwrap_or_default();
        match echo(&seq, &grid, &params, t_echo) {
            Ok(p) => println!(
                "B2 = {b2}π: t = {:.3} us, efficiency {:+7.2} %  ({rule})",
                p.t_peak,
                signed_efficiency(&p, &reference)?
            ),
            Err(e) => println!("B2 = {b2}π: {e}  ({rule})"),
        }
    }
    Ok(())
}
