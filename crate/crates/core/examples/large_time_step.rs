//! DR-RNN trained on every 2nd, 5th and 10th step of Problem 1, compared by
//! the density of y3(t=10).

use std::sync::Arc;

use drrnn::experiments::ProblemId;
use drrnn::io::parse_config_str;
use drrnn::net::{train_drrnn, Dataset, DrRnn};
use drrnn::uq::{compare_samples, sample_parameters};

fn main() -> drrnn::Result<()> {
    let cfg = parse_config_str(&format!("problem = \"{}\"", ProblemId::P1))?;
    let setup = cfg.setup()?;
    let spec = cfg.ensemble_spec();
    let samples = sample_parameters(&spec)?;
    let fom = setup.fom_ensemble(&samples);
    let test = fom.subset(spec.test_range());
    let probe = setup.probe(2, 0.0, 10.0);
    let reference: Vec<f64> = probe.values(&test, 1).into_iter().map(|(_, v)| v).collect();
    let system = Arc::new(setup.system(&samples[0])?.0);

    println!("{:<8} {:>6} {:>10} {:>10}", "model", "dt", "finite", "L1");
    for k in [2, 4] {
        for stride in [2, 5, 10] {
            let train = Dataset::from_trajectories(&fom.subset(spec.train_range()).ok_trajectories(), stride)?;
            let template = DrRnn::new(system.clone(), k, train.dt)?;
            let (model, _) = train_drrnn(&template, &train, None, &cfg.training_config())?;
            let ens = setup.drrnn_ensemble(&model, &test.samples, stride)?;
            let values: Vec<f64> = probe.values(&ens, stride).into_iter().map(|(_, v)| v).collect();
            let l1 = if values.len() == reference.len() {
                compare_samples(&values, &reference)?.2
            } else {
                f64::NAN
            };
            println!("{:<8} {:>6.2} {:>10} {:>10.4}", format!("DR-RNN{k}"), train.dt, ens.successes(), l1);
        }
    }
    Ok(())
}
