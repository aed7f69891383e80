//! Storage time in the spin state is limited by spin dephasing. The locked
//! echo decays as exp(−T / T2) with T2 = 1/(2π γ12).

use std::f64::consts::PI;

use photon_echo::analysis::{detect_echo, fit_exponential, Window};
use photon_echo::bloch::SystemParams;
use photon_echo::ensemble::{build_grid, run_ensemble, EnsembleOptions};
use photon_echo::integrator::IntegratorConfig;
use photon_echo::protocol::{build_sequence, predict_echo_time, PulseEvent};

fn main() -> photon_echo::Result<()> {
    let grid = build_grid(680.0, 10.0, 161)?;
    let gamma12 = 20.0;
    let params = SystemParams {
        gamma12,
        ..SystemParams::decay_free()
    };
    let mut points = Vec::new();
    for storage in [10.0, 20.0, 30.0, 40.0] {
        let b2 = 20.0 + storage;
        let seq = build_sequence(vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 15.0),
            PulseEvent::lock(1.0, 5.0, 20.0),
            PulseEvent::unlock(3.0, 5.0, b2),
        ])?;
        let traj = run_ensemble(&seq, &grid, &params, &IntegratorConfig::default(), &EnsembleOptions::default())?;
        let t = predict_echo_time(5.0, 15.0, 20.0, b2)?;
        let p = detect_echo(&traj, Window::around(t), &seq.pulse_intervals())?;
        println!("T = {storage:>4.0} us: |S| = {:.5e}", p.magnitude);
        points.push((storage, p.magnitude));
    }
    let fit = fit_exponential(&points)?;
    println!("fitted T2 = {:.3} us, 1/(2π γ12) = {:.3} us", fit.t2, 1e3 / (2.0 * PI * gamma12));
    Ok(())
}
