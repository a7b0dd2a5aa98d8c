//! DR-RNN with 1, 2 and 4 layers against a standard RNN on Problem 1.

use std::sync::Arc;

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::net::{evaluate_mse, train_drrnn, train_standard_rnn, Dataset, DrRnn};
use drrnn::uq::sample_parameters;

fn main() -> drrnn::Result<()> {
    let cfg = parse_config_str(&format!("problem = \"{}\"", ProblemId::P1))?;
    let setup = cfg.setup()?;
    let spec = cfg.ensemble_spec();
    let samples = sample_parameters(&spec)?;
    let fom = setup.fom_ensemble(&samples);
    let train = Dataset::from_trajectories(&fom.subset(spec.train_range()).ok_trajectories(), 1)?;
    let test = Dataset::from_trajectories(&fom.subset(spec.test_range()).ok_trajectories(), 1)?;
    let system = Arc::new(setup.system(&samples[0])?.0);
    let tcfg = cfg.training_config();

    println!("{:<10} {:>4} {:>14}", "model", "d", "test mse");
    for k in [1, 2, 4] {
        let template = DrRnn::new(system.clone(), k, cfg.grid.dt)?;
        let (model, _) = train_drrnn(&template, &train, None, &tcfg)?;
        println!("{:<10} {:>4} {:>14.6e}", format!("DR-RNN{k}"), model.count_parameters(), evaluate_mse(&model, &test)?);
    }
    let (rnn, _) = train_standard_rnn(cfg.model.hidden, &train, None, &tcfg)?;
    println!("{:<10} {:>4} {:>14.6e}", "RNN", rnn.count_parameters(), evaluate_mse(&rnn, &test)?);
    Ok(())
}
