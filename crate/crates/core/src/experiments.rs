//! End-to-end pipelines for the five benchmark problems: full-order
//! ensembles, reduced models over the same samples and recurrent emulators.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{integrate_implicit_euler, FomSystem, NewtonConfig, PointwiseMap, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::net::{Dataset, DrRnn, Recurrent, Sequence};
use crate::problems::two_phase::{reference_saturation_fom, sequential_implicit_run, FractionalFlow};
use crate::problems::{build_heat_fom, build_problem123, HeatProblemSpec, OdeFamilySpec, OdeVariant, TwoPhaseSpec};
use crate::reduction::{
    assemble_snapshots, build_pod_deim_rom, galerkin_project, DeimOperator, PodBasis, RomSystem, SnapshotMatrix,
};
use crate::uq::{run_ensemble, EnsembleResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [ProblemId::P1, ProblemId::P2, ProblemId::P3, ProblemId::P4, ProblemId::P5];

    pub fn ode_variant(self) -> Option<OdeVariant> {
        match self {
            ProblemId::P1 => Some(OdeVariant::P1),
            ProblemId::P2 => Some(OdeVariant::P2),
            ProblemId::P3 => Some(OdeVariant::P3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::P1 => "p1",
            ProblemId::P2 => "p2",
            ProblemId::P3 => "p3",
            ProblemId::P4 => "p4",
            ProblemId::P5 => "p5",
        }
    }

    /// Default uniform bounds of the uncertain inputs.
    pub fn default_bounds(self) -> Vec<(f64, f64)> {
        match self {
            ProblemId::P1 => vec![(-1.0, 1.0)],
            ProblemId::P2 => vec![(-1.0, 1.0); 2],
            ProblemId::P3 => vec![(-1.0, 1.0); 3],
            ProblemId::P4 => vec![(0.01, 0.08)],
            ProblemId::P5 => vec![(0.18, 0.38)],
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("problem", format!("unknown problem `{s}` (expected p1..p5)")))
    }
}

/// Everything needed to build and integrate one member of a problem family.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: ProblemId,
    pub grid: TimeGrid,
    pub newton: NewtonConfig,
    pub heat_dx: f64,
    pub two_phase: TwoPhaseSpec,
    /// Saturation steps between pressure solves.
    pub pressure_update_every: usize,
}

impl Setup {
    pub fn new(problem: ProblemId, grid: TimeGrid) -> Self {
        Setup {
            problem,
            grid,
            newton: NewtonConfig::default(),
            heat_dx: 0.01,
            two_phase: TwoPhaseSpec::default(),
            pressure_update_every: 1,
        }
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        Setup { grid, ..self.clone() }
    }

    /// The full-order system for one parameter draw and its initial state.
    pub fn system(&self, params: &[f64]) -> Result<(FomSystem, DVector<f64>)> {
        match self.problem {
            ProblemId::P4 => {
                let alpha = single(params, "alpha")?;
                build_heat_fom(&HeatProblemSpec {
                    dx: self.heat_dx,
                    ..HeatProblemSpec::new(alpha)
                })
            }
            ProblemId::P5 => {
                let phi = single(params, "porosity")?;
                reference_saturation_fom(&self.two_phase.clone().with_porosity(phi))
            }
            p => {
                let variant = p.ode_variant().expect("ODE problem");
                build_problem123(&OdeFamilySpec::new(variant, params.to_vec())?)
            }
        }
    }

    /// One full-order run. Two-phase runs use the sequential scheme.
    pub fn run_fom(&self, params: &[f64]) -> Result<Trajectory> {
        if self.problem == ProblemId::P5 {
            let phi = single(params, "porosity")?;
            let spec = self.two_phase.clone().with_porosity(phi);
            return sequential_implicit_run(&spec, &self.grid, &self.newton, self.pressure_update_every);
        }
        let (system, y0) = self.system(params)?;
        integrate_implicit_euler(&system, &y0, &self.grid, &self.newton)
    }

    pub fn fom_ensemble(&self, samples: &[Vec<f64>]) -> EnsembleResult {
        run_ensemble(|p| self.run_fom(p), samples)
    }

    /// Snapshots of the componentwise nonlinearity `f(s)` along the
    /// trajectories (two-phase problem only).
    pub fn nonlinear_snapshots(&self, trajectories: &[Trajectory]) -> Result<SnapshotMatrix> {
        if self.problem != ProblemId::P5 {
            return Err(Error::invalid(
                "problem",
                format!("{} has no componentwise nonlinearity to interpolate", self.problem),
            ));
        }
        let flow = FractionalFlow::new(&self.two_phase);
        let map = move |s: &DVector<f64>| s.map(|v| flow.value(v));
        assemble_snapshots(trajectories, Some(&map))
    }

    /// Galerkin ROM, or POD-DEIM when `deim` is given, for one draw.
    pub fn reduced_system(&self, params: &[f64], basis: &PodBasis, deim: Option<&DeimOperator>) -> Result<RomSystem> {
        let (system, _) = self.system(params)?;
        match deim {
            Some(d) => build_pod_deim_rom(&system, basis, d),
            None => galerkin_project(&system, basis),
        }
    }

    /// Reduced trajectories in POD coordinates, started from the projected
    /// initial state.
    pub fn reduced_run(&self, params: &[f64], basis: &PodBasis, deim: Option<&DeimOperator>) -> Result<Trajectory> {
        let rom = self.reduced_system(params, basis, deim)?;
        let (_, y0) = self.system(params)?;
        integrate_implicit_euler(&rom.system, &rom.project(&y0)?, &self.grid, &self.newton)
    }

    /// ROM ensemble lifted back to the full space.
    pub fn rom_ensemble(&self, samples: &[Vec<f64>], basis: &PodBasis, deim: Option<&DeimOperator>) -> EnsembleResult {
        run_ensemble(
            |p| self.reduced_run(p, basis, deim)?.map_linear(&basis.basis),
            samples,
        )
    }

    /// Training data for a DR-RNN emulating the reduced model: reduced
    /// trajectories, each bound to its own reduced system.
    pub fn reduced_dataset(
        &self,
        samples: &[Vec<f64>],
        basis: &PodBasis,
        deim: Option<&DeimOperator>,
    ) -> Result<Dataset> {
        let ens = run_ensemble(|p| self.reduced_run(p, basis, deim), samples);
        if let Some((i, msg)) = ens.failures.first() {
            return Err(Error::invalid("samples", format!("reduced run {i} failed: {msg}")));
        }
        let sequences = samples
            .iter()
            .zip(ens.ok_trajectories())
            .map(|(p, traj)| {
                let rom = self.reduced_system(p, basis, deim)?;
                Ok(Sequence::from_trajectory(&traj).with_system(Arc::new(rom.system)))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(sequences, self.grid.dt)
    }

    /// DR-RNN rollouts bound to each sample's reduced system, lifted to the
    /// full space.
    pub fn drrnn_rom_ensemble(
        &self,
        model: &DrRnn,
        samples: &[Vec<f64>],
        basis: &PodBasis,
        deim: Option<&DeimOperator>,
    ) -> EnsembleResult {
        run_ensemble(
            |p| {
                let rom = self.reduced_system(p, basis, deim)?;
                let (_, y0) = self.system(p)?;
                let mut bound = model.clone();
                bound.dt = self.grid.dt;
                bound
                    .rollout_with(&rom.system, &rom.project(&y0)?, self.grid.steps)?
                    .map_linear(&basis.basis)
            },
            samples,
        )
    }

    /// DR-RNN rollouts of the full-order ODE problems at `stride` times the
    /// configured step.
    pub fn drrnn_ensemble(&self, model: &DrRnn, samples: &[Vec<f64>], stride: usize) -> Result<EnsembleResult> {
        if stride == 0 || self.grid.steps % stride != 0 {
            return Err(Error::invalid(
                "dt_multiplier",
                format!("{stride} must divide the {} steps", self.grid.steps),
            ));
        }
        let steps = self.grid.steps / stride;
        let dt = self.grid.dt * stride as f64;
        let mut bound = model.clone();
        bound.dt = dt;
        Ok(run_ensemble(
            |p| {
                let (system, y0) = self.system(p)?;
                bound.rollout_with(&system, &y0, steps)
            },
            samples,
        ))
    }

    /// Rollouts of any trained recurrent model from each sample's initial
    /// state, `steps / stride` steps long.
    pub fn recurrent_ensemble<M: Recurrent>(
        &self,
        model: &M,
        samples: &[Vec<f64>],
        stride: usize,
    ) -> Result<EnsembleResult> {
        if stride == 0 || self.grid.steps % stride != 0 {
            return Err(Error::invalid(
                "dt_multiplier",
                format!("{stride} must divide the {} steps", self.grid.steps),
            ));
        }
        let steps = self.grid.steps / stride;
        let grid = TimeGrid::new(self.grid.dt * stride as f64, steps)?;
        Ok(run_ensemble(
            |p| {
                let (_, y0) = self.system(p)?;
                let n = y0.len();
                let seq = Sequence::new(y0.clone(), DMatrix::zeros(n, steps))?;
                let pred = model.predict(&seq)?;
                let mut states = DMatrix::zeros(n, steps + 1);
                states.set_column(0, &y0);
                states.columns_mut(1, steps).copy_from(&pred);
                if states.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("recurrent rollout".into()));
                }
                Trajectory::from_states(states, grid)
            },
            samples,
        ))
    }

    /// Where a scalar quantity of interest is read: a state component (ODE
    /// problems) or the grid node nearest to `x` (PDE problems), at the grid
    /// time nearest to `t`.
    pub fn probe(&self, component: usize, x: f64, t: f64) -> Probe {
        let time_index = self.grid.nearest_index(t);
        let (index, description) = match self.problem {
            ProblemId::P4 => {
                let spec = HeatProblemSpec {
                    dx: self.heat_dx,
                    ..HeatProblemSpec::new(1.0)
                };
                let node = spec.nearest_node(x).unwrap_or(0);
                (node, format!("y(x={:.4}) at node {node}", (node + 1) as f64 * self.heat_dx))
            }
            ProblemId::P5 => {
                let dx = self.two_phase.dx();
                let cell = ((x / dx).floor().max(0.0) as usize).min(self.two_phase.n_cells - 1);
                (cell, format!("s(x={:.4}) in cell {cell}", (cell as f64 + 0.5) * dx))
            }
            _ => (component, format!("y{}", component + 1)),
        };
        Probe {
            index,
            time_index,
            description: format!("{description}, t={:.4} (step {time_index})", self.grid.time(time_index)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// State component.
    pub index: usize,
    /// Time index on the configured grid.
    pub time_index: usize,
    pub description: String,
}

impl Probe {
    /// Probe values of an ensemble whose grid is `stride` times coarser.
    pub fn values(&self, ens: &EnsembleResult, stride: usize) -> Vec<(usize, f64)> {
        ens.probe_values(self.index, self.time_index / stride.max(1))
    }
}

fn single(params: &[f64], name: &str) -> Result<f64> {
    match params {
        [v] => Ok(*v),
        _ => Err(Error::invalid(name, format!("expected one parameter, got {}", params.len()))),
    }
}
