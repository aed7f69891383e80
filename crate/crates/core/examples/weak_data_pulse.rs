//! For weak data pulses the echo amplitude is linear in the data field and
//! the efficiency does not depend on it.
//!
//! The D pulse keeps its 0.05 μs length while its Rabi frequency is scaled.

use photon_echo::analysis::{detect_echo, signed_efficiency, Window};
use photon_echo::bloch::SystemParams;
use photon_echo::ensemble::{build_grid, run_ensemble, EnsembleOptions};
use photon_echo::integrator::IntegratorConfig;
use photon_echo::protocol::{build_sequence, PulseEvent};

fn main() -> photon_echo::Result<()> {
    let grid = build_grid(680.0, 10.0, 161)?;
    let params = SystemParams {
        gamma13: 10.0,
        gamma23: 10.0,
        gamma12: 2.0,
        big_gamma31: 5.0,
        big_gamma32: 5.0,
        ..SystemParams::decay_free()
    };
    let reference_params = SystemParams { gamma12: 0.0, ..params };
    let cfg = IntegratorConfig::default();
    let opts = EnsembleOptions::default();

    for scale in [1.0, 10.0, 100.0] {
        let d = PulseEvent::data(0.5, 5.0, 5.0).with_duration(0.05);
        let d = PulseEvent { rabi: 5.0 / scale, ..d };
        let r = PulseEvent::rephase(1.0, 5.0, 10.0);

        let ref_seq = build_sequence(vec![d.clone(), r.clone()])?;
        let ref_traj = run_ensemble(&ref_seq, &grid, &reference_params, &cfg, &opts)?;
        let reference = detect_echo(&ref_traj, Window::around(15.0), &ref_seq.pulse_intervals())?;

        let seq = build_sequence(vec![
            d,
            r,
            PulseEvent::lock(1.0, 5.0, 10.1),
            PulseEvent::unlock(3.0, 5.0, 55.0),
        ])?;
        let traj = run_ensemble(&seq, &grid, &params, &cfg, &opts)?;
        let p = detect_echo(&traj, Window::around(59.9), &seq.pulse_intervals())?;
        println!(
            "D area π/{:<5} |S| = {:.4e}  efficiency {:.2} %",
            2.0 * scale,
            p.magnitude,
            signed_efficiency(&p, &reference)?
        );
    }
    Ok(())
}
