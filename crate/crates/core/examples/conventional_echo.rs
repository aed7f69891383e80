//! Two-pulse photon echo: a π/2 data pulse at 5 μs and a π rephasing pulse
//! at 10 μs. The echo comes back at 2·T_R − T_D.

use photon_echo::analysis::{detect_echo, Window};
use photon_echo::bloch::SystemParams;
use photon_echo::ensemble::{build_grid, run_ensemble, EnsembleOptions};
use photon_echo::integrator::IntegratorConfig;
use photon_echo::protocol::{build_sequence, predict_conventional_echo_time, PulseEvent};

fn main() -> photon_echo::Result<()> {
    let seq = build_sequence(vec![
        PulseEvent::data(0.5, 5.0, 5.0),
        PulseEvent::rephase(1.0, 5.0, 10.0),
    ])?;
    let grid = build_grid(680.0, 10.0, 161)?;
    let params = SystemParams {
        gamma13: 10.0,
        gamma23: 10.0,
        big_gamma31: 5.0,
        big_gamma32: 5.0,
        ..SystemParams::decay_free()
    };
    let traj = run_ensemble(&seq, &grid, &params, &IntegratorConfig::default(), &EnsembleOptions::default())?;

    let expected = predict_conventional_echo_time(5.0, 10.0)?;
    let peak = detect_echo(&traj, Window::around(expected), &seq.pulse_intervals())?;
    println!("expected echo  {expected:.3} us");
    println!("detected echo  {:.4} us", peak.t_peak);
    println!("|S| at echo    {:.5}", peak.magnitude);
    println!("max trace err  {:.2e}", traj.integrity.max_trace_error);
    Ok(())
}
