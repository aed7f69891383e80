//! One detuning group through D and R, printed as the optical Bloch vector
//! (u, v) = (2 Re ρ13, 2 Im ρ13). Detuned groups precess in opposite senses
//! and R mirrors them.

use photon_echo::analysis::bloch_uv;
use photon_echo::bloch::{AtomDetuning, DensityMatrix, DriveField, SystemParams, Transition};
use photon_echo::integrator::{evolve_interval, exact_unitary, IntegratorConfig};
use photon_echo::protocol::area_to_duration;

fn main() -> photon_echo::Result<()> {
    let cfg = IntegratorConfig::default();
    let params = SystemParams::decay_free();
    let drive = DriveField::new(Transition::Opt13, 5.0);
    for delta in [-40.0, 40.0] {
        let det = AtomDetuning(delta);
        let half = area_to_duration(0.5, 5.0)?;
        let pi = area_to_duration(1.0, 5.0)?;

        let d = evolve_interval(&DensityMatrix::ground(), 0.0, half, det, &[drive], &params, &cfg, None)?;
        let wait = evolve_interval(d.last().unwrap(), half, 5.0, det, &[], &params, &cfg, Some(1.0))?;
        let r = evolve_interval(wait.last().unwrap(), half + 5.0, pi, det, &[drive], &params, &cfg, None)?;
        let after = evolve_interval(r.last().unwrap(), half + 5.0 + pi, 5.0, det, &[], &params, &cfg, Some(1.0))?;

        println!("delta = {delta:+} kHz");
        for p in bloch_uv(&wait).iter().chain(&bloch_uv(&after)) {
            println!("  t = {:6.3}  u = {:+.4}  v = {:+.4}", p.t, p.u, p.v);
        }

        // RK4 against the exact propagator for the data pulse.
        let h = photon_echo::bloch::hamiltonian(det, &[drive])?;
        let exact = exact_unitary(&DensityMatrix::ground(), &h, half);
        let err = (exact.matrix() - d.last().unwrap().matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!("  RK4 vs exact after D: {err:.1e}");
    }
    Ok(())
}
