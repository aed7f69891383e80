//! The locked echo moves with the B1 delay: delaying B1 by ΔT after R
//! brings the echo ΔT earlier, with B2 fixed.

use photon_echo::analysis::{detect_echo, Window};
use photon_echo::bloch::SystemParams;
use photon_echo::ensemble::{build_grid, run_ensemble, EnsembleOptions};
use photon_echo::integrator::IntegratorConfig;
use photon_echo::protocol::{build_sequence, predict_echo_time, PulseEvent};

fn main() -> photon_echo::Result<()> {
    let grid = build_grid(680.0, 10.0, 161)?;
    let params = SystemParams::decay_free();
    for b1 in [15.1, 20.0, 24.0] {
        let seq = build_sequence(vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 15.0),
            PulseEvent::lock(1.0, 5.0, b1),
            PulseEvent::unlock(3.0, 5.0, 55.0),
        ])?;
        let traj = run_ensemble(&seq, &grid, &params, &IntegratorConfig::default(), &EnsembleOptions::default())?;
        let expected = predict_echo_time(5.0, 15.0, b1, 55.0)?;
        let p = detect_echo(&traj, Window::around(expected), &seq.pulse_intervals())?;
        println!(
            "B1 at {b1:>5.1} us: expected {expected:.3}, found {:.4}, |S| = {:.5}",
            p.t_peak, p.magnitude
        );
    }
    Ok(())
}
