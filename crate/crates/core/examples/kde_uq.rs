//! Monte Carlo density of a heat-problem quantity of interest from the full
//! model and two reduced models.

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::reduction::{assemble_snapshots, compute_pod_basis};
use drrnn::uq::{compare_samples, sample_parameters};

fn main() -> drrnn::Result<()> {
    let cfg = parse_config_str(&format!("problem = \"{}\"", ProblemId::P4))?;
    let setup = cfg.setup()?;
    let samples = sample_parameters(&cfg.ensemble_spec())?;
    let fom = setup.fom_ensemble(&samples);
    let probe = setup.probe(cfg.uq.component, cfg.uq.x, cfg.uq.t);
    let fom_values: Vec<f64> = probe.values(&fom, 1).into_iter().map(|(_, v)| v).collect();
    let full = compute_pod_basis(&assemble_snapshots(&fom.ok_trajectories(), None)?, 4)?;
    println!("quantity: {}", probe.description);
    for r in [2, 4] {
        let rom = setup.rom_ensemble(&samples, &full.truncate(r)?, None);
        let values: Vec<f64> = probe.values(&rom, 1).into_iter().map(|(_, v)| v).collect();
        let (kde, reference, l1) = compare_samples(&values, &fom_values)?;
        let peak = |d: &[f64]| kde.grid[d.iter().enumerate().fold(0, |b, (i, v)| if *v > d[b] { i } else { b })];
        println!(
            "POD r={r}: L1 = {l1:.5}, mode {:.5} (full model {:.5}), bandwidth {:.3e}",
            peak(&kde.density),
            peak(&reference.density),
            kde.bandwidth
        );
    }
    Ok(())
}
