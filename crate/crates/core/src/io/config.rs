//! Run configuration in TOML (`key = value` lines under `[section]`
//! headers). Missing keys take the per-problem defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynsys::{NewtonConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::experiments::{ProblemId, Setup};
use crate::net::{InitConfig, RmspropConfig, TrainingConfig, UInit};
use crate::problems::{RelPermModel, TwoPhaseSpec};
use crate::uq::EnsembleSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 leaves the choice to the thread pool.
    pub threads: usize,
    pub grid: GridConfig,
    pub ensemble: EnsembleConfig,
    pub reduction: ReductionConfig,
    pub model: ModelConfig,
    pub training: TrainingSection,
    pub newton: NewtonConfig,
    pub heat: HeatConfig,
    pub two_phase: TwoPhaseConfig,
    pub uq: UqConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub count: usize,
    pub train: usize,
    pub test: usize,
    /// One `[lo, hi]` pair per uncertain input.
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    pub rank: usize,
    pub deim_m: usize,
    /// Ranks swept by the reduced-model study.
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UInitKind {
    Identity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    /// Hidden units of the baseline RNN.
    pub hidden: usize,
    pub dt_multiplier: usize,
    pub w_std: f64,
    pub eta_range: [f64; 2],
    pub u_init: UInitKind,
    pub u_range: [f64; 2],
    pub zeta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    pub dx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPhaseConfig {
    pub n_cells: usize,
    pub permeability: f64,
    pub mu_w: f64,
    pub mu_o: f64,
    pub s_or: f64,
    pub s_ow: f64,
    pub q_inj: f64,
    pub q_prod: f64,
    pub rho_w: f64,
    pub rel_perm: RelPermModel,
    pub pressure_update_every: usize,
    /// Porosity of the reference velocity field used by `stability-check`.
    pub reference_porosity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqConfig {
    /// State component probed in the ODE problems.
    pub component: usize,
    /// Probe location for the PDE problems.
    pub x: f64,
    pub t: f64,
    pub kde_points: usize,
}

impl RunConfig {
    /// Every setting at its default for `problem`.
    pub fn defaults(problem: ProblemId) -> Self {
        let ode = problem.ode_variant().is_some();
        let (dt, steps, count, train, test) = match problem {
            ProblemId::P4 => (0.03, 40, 500, 100, 400),
            ProblemId::P5 => (0.03, 100, 500, 100, 400),
            _ => (0.1, 100, 1500, 500, 1000),
        };
        let (rank, deim_m, ranks) = match problem {
            ProblemId::P5 => (35, 35, vec![15, 35, 55]),
            _ => (15, 35, vec![2, 4, 5, 7, 15]),
        };
        let tp = TwoPhaseSpec::default();
        RunConfig {
            problem,
            seed: 42,
            output_dir: PathBuf::from("out"),
            threads: 0,
            grid: GridConfig { dt, steps },
            ensemble: EnsembleConfig {
                count,
                train,
                test,
                bounds: problem.default_bounds().into_iter().map(|(a, b)| [a, b]).collect(),
            },
            reduction: ReductionConfig { rank, deim_m, ranks },
            model: ModelConfig {
                layers: 4,
                hidden: 3,
                dt_multiplier: 1,
                w_std: 0.1,
                eta_range: [0.1, 0.4],
                u_init: if ode { UInitKind::Identity } else { UInitKind::Uniform },
                u_range: [0.1, 0.5],
                zeta: 0.9,
                gamma: 0.1,
            },
            training: TrainingSection {
                batch_size: 15,
                epochs: if ode { 15 } else { 300 },
                learning_rate: if ode { 1e-3 } else { 1e-2 },
                decay: 0.9,
                eps: 1e-8,
            },
            newton: NewtonConfig::default(),
            heat: HeatConfig { dx: 0.01 },
            two_phase: TwoPhaseConfig {
                n_cells: tp.n_cells,
                permeability: 1.0,
                mu_w: tp.mu_w,
                mu_o: tp.mu_o,
                s_or: tp.s_or,
                s_ow: tp.s_ow,
                q_inj: tp.q_inj,
                q_prod: tp.q_prod,
                rho_w: tp.rho_w,
                rel_perm: tp.rel_perm,
                pressure_update_every: 1,
                reference_porosity: tp.porosity,
            },
            uq: UqConfig {
                component: 2,
                x: if problem == ProblemId::P5 { 0.2 } else { 0.45 },
                t: match problem {
                    ProblemId::P4 => 0.45,
                    ProblemId::P5 => 1.5,
                    _ => 10.0,
                },
                kde_points: crate::uq::kde::DEFAULT_GRID_POINTS,
            },
        }
    }

    /// Checks every numeric setting, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(range(key, format!("must be > 0, got {v}")))
            }
        }
        fn ordered(key: &str, r: [f64; 2]) -> Result<()> {
            if r[0] <= r[1] && r.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(range(key, format!("[{}, {}] is not an ordered range", r[0], r[1])))
            }
        }
        fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
            if v >= min {
                Ok(())
            } else {
                Err(range(key, format!("must be >= {min}, got {v}")))
            }
        }

        positive("grid.dt", self.grid.dt)?;
        at_least("ensemble.count", self.ensemble.count, 1)?;
        if self.ensemble.train + self.ensemble.test > self.ensemble.count {
            return Err(range(
                "ensemble.train",
                format!(
                    "train {} + test {} exceeds count {}",
                    self.ensemble.train, self.ensemble.test, self.ensemble.count
                ),
            ));
        }
        let dims = self.problem.default_bounds().len();
        if self.ensemble.bounds.len() != dims {
            return Err(range(
                "ensemble.bounds",
                format!("{} needs {dims} ranges, got {}", self.problem, self.ensemble.bounds.len()),
            ));
        }
        for b in &self.ensemble.bounds {
            ordered("ensemble.bounds", *b)?;
        }
        match self.problem {
            ProblemId::P4 if self.ensemble.bounds[0][0] <= 0.0 => {
                return Err(range("ensemble.bounds", "diffusivity must stay positive"));
            }
            ProblemId::P5 if self.ensemble.bounds[0][0] <= 0.0 || self.ensemble.bounds[0][1] > 1.0 => {
                return Err(range("ensemble.bounds", "porosity must lie in (0, 1]"));
            }
            _ => {}
        }
        // The ODE problems are never reduced.
        if self.problem.ode_variant().is_none() {
            let n = self.state_dim();
            if !(1..=n).contains(&self.reduction.rank) {
                return Err(range("reduction.rank", format!("must lie in 1..={n}, got {}", self.reduction.rank)));
            }
            if !(1..=n).contains(&self.reduction.deim_m) {
                return Err(range("reduction.deim_m", format!("must lie in 1..={n}, got {}", self.reduction.deim_m)));
            }
            if let Some(r) = self.reduction.ranks.iter().find(|r| !(1..=n).contains(*r)) {
                return Err(range("reduction.ranks", format!("{r} outside 1..={n}")));
            }
        }
        at_least("model.layers", self.model.layers, 1)?;
        at_least("model.hidden", self.model.hidden, 1)?;
        at_least("model.dt_multiplier", self.model.dt_multiplier, 1)?;
        if self.grid.steps % self.model.dt_multiplier != 0 {
            return Err(range(
                "model.dt_multiplier",
                format!("{} does not divide grid.steps = {}", self.model.dt_multiplier, self.grid.steps),
            ));
        }
        if !(self.model.w_std >= 0.0) {
            return Err(range("model.w_std", "must be >= 0"));
        }
        ordered("model.eta_range", self.model.eta_range)?;
        ordered("model.u_range", self.model.u_range)?;
        if !(self.model.zeta >= 0.0) {
            return Err(range("model.zeta", "must be >= 0"));
        }
        if !(self.model.gamma >= 0.0) {
            return Err(range("model.gamma", "must be >= 0"));
        }
        at_least("training.batch_size", self.training.batch_size, 1)?;
        positive("training.learning_rate", self.training.learning_rate)?;
        if !(0.0..1.0).contains(&self.training.decay) {
            return Err(range("training.decay", format!("must lie in [0, 1), got {}", self.training.decay)));
        }
        positive("training.eps", self.training.eps)?;
        positive("newton.tol", self.newton.tol)?;
        at_least("newton.max_iters", self.newton.max_iters, 1)?;
        if !(self.newton.damping > 0.0 && self.newton.damping <= 1.0) {
            return Err(range("newton.damping", format!("must lie in (0, 1], got {}", self.newton.damping)));
        }
        positive("heat.dx", self.heat.dx)?;
        let tp = &self.two_phase;
        at_least("two_phase.n_cells", tp.n_cells, 2)?;
        at_least("two_phase.pressure_update_every", tp.pressure_update_every, 1)?;
        positive("two_phase.permeability", tp.permeability)?;
        positive("two_phase.reference_porosity", tp.reference_porosity)?;
        self.two_phase_spec().validate().map_err(|e| range("two_phase", e.to_string()))?;
        if self.problem == ProblemId::P4 {
            crate::problems::HeatProblemSpec {
                dx: self.heat.dx,
                ..crate::problems::HeatProblemSpec::new(1.0)
            }
            .n()
            .map_err(|e| range("heat.dx", e.to_string()))?;
        }
        if self.problem.ode_variant().is_some() && self.uq.component >= 3 {
            return Err(range("uq.component", format!("must be < 3, got {}", self.uq.component)));
        }
        if !(0.0..=1.0).contains(&self.uq.x) {
            return Err(range("uq.x", format!("must lie in [0, 1], got {}", self.uq.x)));
        }
        if !(self.uq.t >= 0.0) {
            return Err(range("uq.t", "must be >= 0"));
        }
        at_least("uq.kde_points", self.uq.kde_points, 2)?;
        Ok(())
    }

    /// Dimension of the full-order state.
    pub fn state_dim(&self) -> usize {
        match self.problem {
            ProblemId::P4 => ((1.0 / self.heat.dx).round() as usize).saturating_sub(1).max(1),
            ProblemId::P5 => self.two_phase.n_cells,
            _ => 3,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.dt, self.grid.steps)
    }

    pub fn two_phase_spec(&self) -> TwoPhaseSpec {
        let tp = &self.two_phase;
        TwoPhaseSpec {
            n_cells: tp.n_cells,
            porosity: tp.reference_porosity,
            permeability: vec![tp.permeability; tp.n_cells],
            mu_w: tp.mu_w,
            mu_o: tp.mu_o,
            s_or: tp.s_or,
            s_ow: tp.s_ow,
            q_inj: tp.q_inj,
            q_prod: tp.q_prod,
            rho_w: tp.rho_w,
            rel_perm: tp.rel_perm,
        }
    }

    pub fn setup(&self) -> Result<Setup> {
        let mut setup = Setup::new(self.problem, self.grid()?);
        setup.newton = self.newton;
        setup.heat_dx = self.heat.dx;
        setup.two_phase = self.two_phase_spec();
        setup.pressure_update_every = self.two_phase.pressure_update_every;
        Ok(setup)
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            bounds: self.ensemble.bounds.iter().map(|b| (b[0], b[1])).collect(),
            count: self.ensemble.count,
            seed: self.seed,
            split: (self.ensemble.train, self.ensemble.test),
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            batch_size: self.training.batch_size,
            epochs: self.training.epochs,
            seed: self.seed,
            optimizer: RmspropConfig {
                learning_rate: self.training.learning_rate,
                decay: self.training.decay,
                eps: self.training.eps,
            },
            init: InitConfig {
                w_std: self.model.w_std,
                eta_range: (self.model.eta_range[0], self.model.eta_range[1]),
                u: match self.model.u_init {
                    UInitKind::Identity => UInit::Identity,
                    UInitKind::Uniform => UInit::Uniform(self.model.u_range[0], self.model.u_range[1]),
                },
            },
        }
    }

    /// Output directory of one pipeline stage.
    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.output_dir.join(self.problem.name()).join(stage)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn range(key: &str, reason: impl Into<String>) -> Error {
    Error::Config(format!("`{key}`: {}", reason.into()))
}

/// Parses TOML text, fills unset keys from the defaults of the declared
/// problem and validates the result.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let problem = match user.get("problem") {
        Some(toml::Value::String(s)) => s.parse::<ProblemId>().map_err(|e| Error::Config(e.to_string()))?,
        Some(other) => return Err(Error::Config(format!("`problem`: expected a string, got {other}"))),
        None => return Err(Error::Config("`problem` is required (p1..p5)".into())),
    };
    let defaults = toml::Table::try_from(RunConfig::defaults(problem)).map_err(|e| Error::Config(e.to_string()))?;
    let merged = merge(defaults, user, "")?;
    let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_config_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Overlays `user` on `base`; keys absent from `base` are unknown.
fn merge(mut base: toml::Table, user: toml::Table, prefix: &str) -> Result<toml::Table> {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (None, _) => return Err(Error::Config(format!("unknown key `{path}`"))),
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                let inner = std::mem::take(b);
                *b = merge(inner, u, &path)?;
            }
            (Some(toml::Value::Table(_)), other) => {
                return Err(Error::Config(format!("`{path}` must be a section, got {other}")));
            }
            (Some(slot), value) => *slot = value,
        }
    }
    Ok(base)
}
