//! Mini-batch rmsprop training with backpropagation through time.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::data::{mse_loss, Dataset, Sequence};
use crate::net::dr_rnn::{initialize_model, DrRnn, InitConfig};
use crate::net::optim::{RmspropConfig, RmspropState};
use crate::net::rnn::StandardRnn;

/// A model trainable by gradient descent on sequence data.
pub trait Recurrent: Clone + Send + Sync {
    fn params(&self) -> DVector<f64>;
    fn set_params(&mut self, p: &DVector<f64>) -> Result<()>;
    /// Sum of squared errors over the sequence and its gradient.
    fn sequence_loss_and_gradient(&self, seq: &Sequence) -> Result<(f64, DVector<f64>)>;
    fn predict(&self, seq: &Sequence) -> Result<DMatrix<f64>>;
}

impl Recurrent for DrRnn {
    fn params(&self) -> DVector<f64> {
        DrRnn::params(self)
    }
    fn set_params(&mut self, p: &DVector<f64>) -> Result<()> {
        DrRnn::set_params(self, p)
    }
    fn sequence_loss_and_gradient(&self, seq: &Sequence) -> Result<(f64, DVector<f64>)> {
        DrRnn::sequence_loss_and_gradient(self, seq)
    }
    fn predict(&self, seq: &Sequence) -> Result<DMatrix<f64>> {
        DrRnn::predict(self, seq)
    }
}

impl Recurrent for StandardRnn {
    fn params(&self) -> DVector<f64> {
        StandardRnn::params(self)
    }
    fn set_params(&mut self, p: &DVector<f64>) -> Result<()> {
        StandardRnn::set_params(self, p)
    }
    fn sequence_loss_and_gradient(&self, seq: &Sequence) -> Result<(f64, DVector<f64>)> {
        StandardRnn::sequence_loss_and_gradient(self, seq)
    }
    fn predict(&self, seq: &Sequence) -> Result<DMatrix<f64>> {
        StandardRnn::predict(self, seq)
    }
}

/// Batch mse and its gradient. Sequences run in parallel; the reduction is
/// in batch order, so results do not depend on the thread count.
pub fn batch_loss_and_gradient<M: Recurrent>(model: &M, batch: &[&Sequence]) -> Result<(f64, DVector<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "must not be empty"));
    }
    let parts: Vec<(f64, DVector<f64>)> = batch
        .par_iter()
        .map(|seq| model.sequence_loss_and_gradient(seq))
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = DVector::zeros(parts[0].1.len());
    for (l, g) in &parts {
        loss += l;
        grad += g;
    }
    Ok((loss * scale, grad * scale))
}

/// Rollout mse of `model` over a whole dataset.
pub fn evaluate_mse<M: Recurrent>(model: &M, data: &Dataset) -> Result<f64> {
    let preds: Vec<DMatrix<f64>> = data.sequences.par_iter().map(|s| model.predict(s)).collect::<Result<_>>()?;
    let targets: Vec<DMatrix<f64>> = data.sequences.iter().map(|s| s.targets.clone()).collect();
    mse_loss(&preds, &targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: RmspropConfig,
    pub init: InitConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 15,
            epochs: 15,
            seed: 42,
            optimizer: RmspropConfig::default(),
            init: InitConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch rmsprop from the model's
/// current parameters, recording the train (and test) rollout mse after each.
pub fn fit<M: Recurrent>(
    mut model: M,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(M, Vec<LossRecord>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("train", "dataset is empty"));
    }
    let mut params = model.params();
    let mut opt = RmspropState::new(params.len(), cfg.optimizer);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &train.sequences[i]).collect();
            let (loss, grad) = batch_loss_and_gradient(&model, &batch)
                .map_err(|e| Error::NonFinite(format!("training diverged in epoch {epoch}: {e}")))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss in epoch {epoch}")));
            }
            opt.update(&mut params, &grad)?;
            model.set_params(&params)?;
        }
        let diverged = |e: Error| Error::NonFinite(format!("evaluation after epoch {epoch}: {e}"));
        let train_mse = evaluate_mse(&model, train).map_err(diverged)?;
        let test_mse = test.map(|t| evaluate_mse(&model, t)).transpose().map_err(diverged)?;
        if !train_mse.is_finite() || test_mse.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("loss after epoch {epoch}")));
        }
        log::info!("epoch {epoch}: train mse {train_mse:.3e} test mse {test_mse:?}");
        history.push(LossRecord {
            epoch,
            train_mse,
            test_mse,
        });
    }
    Ok((model, history))
}

/// Initializes a DR-RNN per `cfg.init` from `cfg.seed`, then trains it.
pub fn train_drrnn(
    template: &DrRnn,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainingConfig,
) -> Result<(DrRnn, Vec<LossRecord>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = initialize_model(template, &cfg.init, &mut rng)?;
    if (model.dt - train.dt).abs() > 1e-12 * train.dt {
        log::warn!("model dt {} differs from data dt {}; using the data's", model.dt, train.dt);
        model.dt = train.dt;
    }
    fit(model, train, test, cfg, &mut rng)
}

/// Glorot-initialized baseline with `hidden` units, trained like the DR-RNN.
pub fn train_standard_rnn(
    hidden: usize,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainingConfig,
) -> Result<(StandardRnn, Vec<LossRecord>)> {
    let n = train
        .sequences
        .first()
        .map(|s| s.n())
        .ok_or_else(|| Error::invalid("train", "dataset is empty"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = StandardRnn::random(hidden, n, n, &mut rng)?;
    fit(model, train, test, cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{integrate_implicit_euler, NewtonConfig, TimeGrid};
    use crate::problems::ode3::{build_problem123, OdeFamilySpec, OdeVariant};
    use std::sync::Arc;

    fn small_dataset(count: usize, seed: u64) -> (Arc<crate::dynsys::FomSystem>, Dataset) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = TimeGrid::new(0.1, 20).unwrap();
        let mut trajs = Vec::new();
        let mut system = None;
        for _ in 0..count {
            let x = rng.random_range(-1.0..1.0);
            let (sys, y0) = build_problem123(&OdeFamilySpec::new(OdeVariant::P1, vec![x]).unwrap()).unwrap();
            trajs.push(integrate_implicit_euler(&sys, &y0, &grid, &NewtonConfig::default()).unwrap());
            system = Some(sys);
        }
        (Arc::new(system.unwrap()), Dataset::from_trajectories(&trajs, 1).unwrap())
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let (sys, data) = small_dataset(5, 1);
        let template = DrRnn::new(sys, 2, 0.1).unwrap();
        let cfg = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        let (model, history) = train_drrnn(&template, &data, None, &cfg).unwrap();
        let init = initialize_model(&template, &cfg.init, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        assert_eq!(model.params(), init.params());
        assert!(history.is_empty());
    }

    #[test]
    fn training_is_finite_and_deterministic() {
        let (sys, data) = small_dataset(30, 2);
        let (_, test) = small_dataset(10, 3);
        let template = DrRnn::new(sys, 2, 0.1).unwrap();
        let cfg = TrainingConfig {
            epochs: 3,
            ..Default::default()
        };
        let (a, ha) = train_drrnn(&template, &data, Some(&test), &cfg).unwrap();
        let (b, hb) = train_drrnn(&template, &data, Some(&test), &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha, hb);
        assert!(ha.iter().all(|r| r.train_mse.is_finite() && r.test_mse.unwrap().is_finite()));
    }

    #[test]
    fn batch_gradient_independent_of_thread_count() {
        let (sys, data) = small_dataset(12, 4);
        let model = initialize_model(
            &DrRnn::new(sys, 3, 0.1).unwrap(),
            &InitConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let batch: Vec<&Sequence> = data.sequences.iter().collect();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| batch_loss_and_gradient(&model, &batch).unwrap());
        let b = four.install(|| batch_loss_and_gradient(&model, &batch).unwrap());
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
