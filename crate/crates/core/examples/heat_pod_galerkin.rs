//! POD-Galerkin reduction of the heat problem across the rank sweep.

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::reduction::{assemble_snapshots, compute_pod_basis};
use drrnn::uq::{ensemble_mse, sample_parameters};

fn main() -> drrnn::Result<()> {
    let cfg = parse_config_str(&format!(
        "problem = \"{}\"\n[ensemble]\ncount = 100\ntrain = 20\ntest = 80\n",
        ProblemId::P4
    ))?;
    let setup = cfg.setup()?;
    let samples = sample_parameters(&cfg.ensemble_spec())?;
    let fom = setup.fom_ensemble(&samples);
    let snapshots = assemble_snapshots(&fom.ok_trajectories(), None)?;
    let full = compute_pod_basis(&snapshots, 15)?;
    println!("{} snapshots of dimension {}", snapshots.len(), snapshots.n());
    println!("{:>4} {:>14} {:>14}", "r", "sigma_r", "mse");
    for r in cfg.reduction.ranks.clone() {
        let basis = full.truncate(r)?;
        let rom = setup.rom_ensemble(&samples, &basis, None);
        println!(
            "{r:>4} {:>14.6e} {:>14.6e}",
            full.singular_values[r - 1],
            ensemble_mse(&rom, &fom)?
        );
    }
    Ok(())
}
