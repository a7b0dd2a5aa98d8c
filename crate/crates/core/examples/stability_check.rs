//! Explicit upwind step bound for the two-phase problem versus the implicit
//! scheme at a step above it.

use drrnn::dynsys::{von_neumann_dt_bound, NewtonConfig, TimeGrid};
use drrnn::problems::two_phase::{fractional_flow, initial_saturation, solve_pressure};
use drrnn::problems::{sequential_implicit_run, TwoPhaseSpec};

fn main() -> drrnn::Result<()> {
    let spec = TwoPhaseSpec::default();
    let pressure = solve_pressure(initial_saturation(&spec).as_slice(), &spec)?;
    let bound = von_neumann_dt_bound(
        spec.porosity,
        spec.dx(),
        &pressure.velocity,
        |s| fractional_flow(s, &spec).1,
        spec.saturation_bounds(),
    )?;
    println!("explicit dt bound: {bound:.5e}");
    for dt in [0.5 * bound, 0.03, 0.1] {
        let grid = TimeGrid::new(dt, (0.6 / dt).round() as usize)?;
        let traj = sequential_implicit_run(&spec, &grid, &NewtonConfig::default(), 1)?;
        let last = traj.last();
        println!(
            "implicit dt = {dt:.4} ({:.1}x bound): {} steps, mean s {:.4}, max s {:.4} at t = {:.2}",
            dt / bound,
            grid.steps,
            last.mean(),
            last.max(),
            grid.final_time()
        );
    }
    Ok(())
}
