//! A DR-RNN driven by the POD-Galerkin residual of the heat problem.

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::net::{train_drrnn, DrRnn};
use drrnn::reduction::{assemble_snapshots, compute_pod_basis};
use drrnn::uq::{ensemble_mse, sample_parameters};

fn main() -> drrnn::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let cfg = parse_config_str(&format!(
        "problem = \"{}\"\n[ensemble]\ncount = 200\ntrain = 50\ntest = 150\n[training]\nepochs = {epochs}\n",
        ProblemId::P4
    ))?;
    let setup = cfg.setup()?;
    let spec = cfg.ensemble_spec();
    let samples = sample_parameters(&spec)?;
    let fom = setup.fom_ensemble(&samples);
    let basis = compute_pod_basis(&assemble_snapshots(&fom.ok_trajectories(), None)?, cfg.reduction.rank)?;

    let data = setup.reduced_dataset(&samples[spec.train_range()], &basis, None)?;
    let system = data.sequences[0].system.clone().expect("bound by reduced_dataset");
    let template = DrRnn::new(system, cfg.model.layers, cfg.grid.dt)?;
    let (model, history) = train_drrnn(&template, &data, None, &cfg.training_config())?;
    for r in history.iter().filter(|r| r.epoch % 50 == 0 || r.epoch == epochs) {
        println!("epoch {:>4}: reduced-space train mse {:.6e}", r.epoch, r.train_mse);
    }

    let test = fom.subset(spec.test_range());
    let pod = setup.rom_ensemble(&test.samples, &basis, None);
    let dr = setup.drrnn_rom_ensemble(&model, &test.samples, &basis, None);
    println!("test mse, POD r={}: {:.6e}", basis.rank(), ensemble_mse(&pod, &test)?);
    println!("test mse, DR-RNN{}: {:.6e}", cfg.model.layers, ensemble_mse(&dr, &test)?);
    Ok(())
}
