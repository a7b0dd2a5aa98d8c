//! Two-phase transport: POD-DEIM reduced models against the full model.

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::reduction::{assemble_snapshots, build_deim_operator, compute_pod_basis, deim_select};
use drrnn::uq::{ensemble_mse, sample_parameters};

fn main() -> drrnn::Result<()> {
    let cfg = parse_config_str(&format!(
        "problem = \"{}\"\n[ensemble]\ncount = 40\ntrain = 10\ntest = 30\n",
        ProblemId::P5
    ))?;
    let setup = cfg.setup()?;
    let samples = sample_parameters(&cfg.ensemble_spec())?;
    let fom = setup.fom_ensemble(&samples);
    let trajs = fom.ok_trajectories();
    println!("{} of {} full-order runs converged", trajs.len(), samples.len());

    let m = cfg.reduction.deim_m;
    let nonlinear = compute_pod_basis(&setup.nonlinear_snapshots(&trajs)?, m)?;
    let points = deim_select(&nonlinear.basis)?;
    println!("DEIM points (m = {m}): {points:?}");

    let full = compute_pod_basis(&assemble_snapshots(&trajs, None)?, 55)?;
    println!("{:>4} {:>14} {:>14} {:>12}", "r", "galerkin", "pod-deim", "cond");
    for r in cfg.reduction.ranks.clone() {
        let basis = full.truncate(r)?;
        let deim = build_deim_operator(&nonlinear.basis, &points, &basis)?;
        let galerkin = setup.rom_ensemble(&samples, &basis, None);
        let hyper = setup.rom_ensemble(&samples, &basis, Some(&deim));
        println!(
            "{r:>4} {:>14.6e} {:>14.6e} {:>12.3e}",
            ensemble_mse(&galerkin, &fom)?,
            ensemble_mse(&hyper, &fom)?,
            deim.condition
        );
    }
    Ok(())
}
