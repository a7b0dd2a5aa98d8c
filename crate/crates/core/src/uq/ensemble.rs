//! Monte-Carlo ensembles over uniformly distributed parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// `U[lo, hi]` bounds, one per parameter.
    pub bounds: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
    /// Train / test sizes taken from the front of the sample list.
    pub split: (usize, usize),
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("count", "need at least one sample"));
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::invalid("bounds", format!("[{lo}, {hi}] is not ordered")));
        }
        if self.split.0 + self.split.1 > self.count {
            return Err(Error::invalid(
                "split",
                format!("{} + {} exceeds the {} samples", self.split.0, self.split.1, self.count),
            ));
        }
        Ok(())
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.split.0
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.split.0..self.split.0 + self.split.1
    }
}

/// Seeded uniform draws, sample-major.
pub fn sample_parameters(spec: &EnsembleSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dists = spec
        .bounds
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi).map_err(|e| Error::invalid("bounds", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..spec.count)
        .map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect())
        .collect())
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub samples: Vec<Vec<f64>>,
    /// `None` where the run failed.
    pub trajectories: Vec<Option<Trajectory>>,
    pub failures: Vec<(usize, String)>,
}

impl EnsembleResult {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn successes(&self) -> usize {
        self.trajectories.iter().filter(|t| t.is_some()).count()
    }

    /// `(sample index, y[component] at time index)` over successful runs.
    pub fn probe_values(&self, component: usize, time_index: usize) -> Vec<(usize, f64)> {
        self.trajectories
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().map(|t| (i, t.value(component, time_index))))
            .collect()
    }

    pub fn subset(&self, range: std::ops::Range<usize>) -> EnsembleResult {
        EnsembleResult {
            samples: self.samples[range.clone()].to_vec(),
            trajectories: self.trajectories[range.clone()].to_vec(),
            failures: self
                .failures
                .iter()
                .filter(|(i, _)| range.contains(i))
                .map(|(i, m)| (i - range.start, m.clone()))
                .collect(),
        }
    }

    /// Successful trajectories, in sample order.
    pub fn ok_trajectories(&self) -> Vec<Trajectory> {
        self.trajectories.iter().flatten().cloned().collect()
    }
}

/// Runs every sample in parallel. Failures are recorded per sample.
pub fn run_ensemble<F>(runner: F, samples: &[Vec<f64>]) -> EnsembleResult
where
    F: Fn(&[f64]) -> Result<Trajectory> + Sync,
{
    let outcomes: Vec<Result<Trajectory>> = samples.par_iter().map(|s| runner(s)).collect();
    let mut trajectories = Vec::with_capacity(samples.len());
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(t) => trajectories.push(Some(t)),
            Err(e) => {
                log::warn!("ensemble sample {i} failed: {e}");
                failures.push((i, e.to_string()));
                trajectories.push(None);
            }
        }
    }
    EnsembleResult {
        samples: samples.to_vec(),
        trajectories,
        failures,
    }
}

/// Trajectory mse over samples that succeeded in both ensembles, summing
/// over `t = 1..T` and components and averaging over those samples.
pub fn ensemble_mse(pred: &EnsembleResult, reference: &EnsembleResult) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::invalid(
            "pred",
            format!("{} samples vs {} in the reference", pred.len(), reference.len()),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, r) in pred.trajectories.iter().zip(&reference.trajectories) {
        let (Some(p), Some(r)) = (p, r) else { continue };
        if p.states().shape() != r.states().shape() {
            return Err(Error::invalid(
                "pred",
                format!("trajectory shape {:?} vs {:?}", p.states().shape(), r.states().shape()),
            ));
        }
        let steps = p.steps();
        total += (p.states().columns(1, steps) - r.states().columns(1, steps)).norm_squared();
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("pred", "no sample succeeded in both ensembles"));
    }
    Ok(total / count as f64)
}
