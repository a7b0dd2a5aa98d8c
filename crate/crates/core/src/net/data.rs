//! Sequence datasets and the trajectory mse loss.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynsys::{FomSystem, Trajectory};
use crate::error::{check_dim, Error, Result};

/// One training sequence: the state at `t = 0` and targets `y_1 .. y_T` as
/// columns. `system` overrides the model's residual binding, for ensembles
/// whose members have different parameters.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub initial: DVector<f64>,
    pub targets: DMatrix<f64>,
    pub system: Option<Arc<FomSystem>>,
}

impl Sequence {
    pub fn new(initial: DVector<f64>, targets: DMatrix<f64>) -> Result<Self> {
        check_dim("Sequence targets rows", initial.len(), targets.nrows())?;
        Ok(Sequence {
            initial,
            targets,
            system: None,
        })
    }

    pub fn with_system(mut self, system: Arc<FomSystem>) -> Self {
        self.system = Some(system);
        self
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let targets = traj.states().columns(1, traj.steps()).into_owned();
        Sequence {
            initial: traj.initial(),
            targets,
            system: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.targets.ncols()
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
    /// Sampling interval of the targets.
    pub dt: f64,
}

impl Dataset {
    pub fn new(sequences: Vec<Sequence>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if let Some(first) = sequences.first() {
            for s in &sequences {
                check_dim("Dataset sequence length", first.steps(), s.steps())?;
                check_dim("Dataset state dimension", first.n(), s.n())?;
            }
        }
        Ok(Dataset { sequences, dt })
    }

    /// Keeps every `stride`-th state of each trajectory, so the dataset's dt
    /// is `stride` times the generator's.
    pub fn from_trajectories(trajectories: &[Trajectory], stride: usize) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::invalid("trajectories", "need at least one"))?;
        let dt = first.grid().dt * stride as f64;
        let sequences = trajectories
            .iter()
            .map(|t| Ok(Sequence::from_trajectory(&t.subsample(stride)?)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(sequences, dt)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.steps())
    }

    /// Attaches one system per sequence (same order).
    pub fn with_systems(mut self, systems: &[Arc<FomSystem>]) -> Result<Self> {
        check_dim("Dataset::with_systems", self.sequences.len(), systems.len())?;
        for (s, sys) in self.sequences.iter_mut().zip(systems) {
            s.system = Some(sys.clone());
        }
        Ok(self)
    }
}

/// `(1/L) sum_l sum_t sum_i (pred - target)^2` over matching `n x T` blocks.
pub fn mse_loss(pred: &[DMatrix<f64>], target: &[DMatrix<f64>]) -> Result<f64> {
    check_dim("mse_loss sample count", target.len(), pred.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if p.shape() != t.shape() {
            return Err(Error::invalid(
                "pred",
                format!("shape {:?} does not match target {:?}", p.shape(), t.shape()),
            ));
        }
        total += (p - t).norm_squared();
    }
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::TimeGrid;

    #[test]
    fn mse_examples() {
        let a = DMatrix::from_element(2, 3, 0.7);
        assert_eq!(mse_loss(&[a.clone()], &[a]).unwrap(), 0.0);
        let p = DMatrix::from_element(1, 1, 0.5);
        let t = DMatrix::from_element(1, 1, 0.0);
        assert_eq!(mse_loss(&[p], &[t]).unwrap(), 0.25);
        let p1 = DMatrix::from_row_slice(1, 2, &[0.2f64.sqrt(), 0.0]);
        let p2 = DMatrix::from_row_slice(1, 2, &[0.0, 0.4f64.sqrt()]);
        let z = DMatrix::zeros(1, 2);
        let v = mse_loss(&[p1, p2], &[z.clone(), z]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert!(mse_loss(&[DMatrix::zeros(1, 2)], &[DMatrix::zeros(2, 1)]).is_err());
    }

    #[test]
    fn dataset_subsampling() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let traj = Trajectory::from_states(DMatrix::from_fn(2, 11, |i, j| (i * 100 + j) as f64), grid).unwrap();
        let data = Dataset::from_trajectories(&[traj.clone(), traj], 5).unwrap();
        assert!((data.dt - 0.5).abs() < 1e-15);
        assert_eq!(data.steps(), 2);
        assert_eq!(data.sequences[0].targets.column(1)[1], 110.0);
        assert_eq!(data.sequences[0].initial[1], 100.0);
    }
}
