//! One Problem-1 trajectory with implicit Euler and Newton.

use drrnn::dynsys::{integrate_implicit_euler, NewtonConfig, TimeGrid};
use drrnn::problems::{build_problem123, OdeFamilySpec, OdeVariant};

fn main() -> drrnn::Result<()> {
    let x = std::env::args().nth(1).map_or(Ok(0.5), |s| s.parse()).unwrap_or(0.5);
    let (system, y0) = build_problem123(&OdeFamilySpec::new(OdeVariant::P1, vec![x])?)?;
    let grid = TimeGrid::new(0.1, 100)?;
    let traj = integrate_implicit_euler(&system, &y0, &grid, &NewtonConfig::default())?;
    println!("x = {x}");
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "y1", "y2", "y3");
    for k in (0..=grid.steps).step_by(10) {
        let y = traj.state(k);
        println!("{:>6.2} {:>12.6} {:>12.6} {:>12.6}", grid.time(k), y[0], y[1], y[2]);
    }
    Ok(())
}
