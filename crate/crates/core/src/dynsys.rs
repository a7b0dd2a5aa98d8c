//! Semi-linear dynamical systems `dy/dt = A y + F(y) + b`, their implicit
//! Euler residual, Newton solves and time integration.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::lu_solve;

/// A general nonlinear vector field with an analytic Jacobian.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64>;
}

/// A scalar function applied to every component of a state.
pub trait PointwiseMap: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
}

/// The nonlinear part `F` of a system.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    Field(Arc<dyn VectorField>),
    /// `F(y) = C f(y)` with `f` acting componentwise. This is the shape DEIM
    /// can interpolate: only the entries of `f` at sampled rows are needed.
    Pointwise {
        coupling: DMatrix<f64>,
        map: Arc<dyn PointwiseMap>,
    },
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => write!(f, "Zero"),
            Nonlinearity::Field(field) => write!(f, "Field(dim = {})", field.dim()),
            Nonlinearity::Pointwise { coupling, .. } => {
                write!(f, "Pointwise(coupling {}x{})", coupling.nrows(), coupling.ncols())
            }
        }
    }
}

impl Nonlinearity {
    fn output_dim(&self) -> Option<usize> {
        match self {
            Nonlinearity::Zero => None,
            Nonlinearity::Field(field) => Some(field.dim()),
            Nonlinearity::Pointwise { coupling, .. } => Some(coupling.nrows()),
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonlinearity::Zero => DVector::zeros(y.len()),
            Nonlinearity::Field(field) => field.eval(y),
            Nonlinearity::Pointwise { coupling, map } => coupling * y.map(|s| map.value(s)),
        }
    }

    pub fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Nonlinearity::Zero => DMatrix::zeros(y.len(), y.len()),
            Nonlinearity::Field(field) => field.jacobian(y),
            Nonlinearity::Pointwise { coupling, map } => {
                let mut jac = coupling.clone();
                for (j, &s) in y.iter().enumerate() {
                    let d = map.derivative(s);
                    jac.column_mut(j).scale_mut(d);
                }
                jac
            }
        }
    }
}

/// A full-order system `dy/dt = A y + F(y) + b` with parameters `a`.
#[derive(Debug, Clone)]
pub struct FomSystem {
    linear_op: DMatrix<f64>,
    nonlinear: Nonlinearity,
    forcing: DVector<f64>,
    params: Vec<f64>,
    bounds: Option<(f64, f64)>,
}

impl FomSystem {
    /// A linear system `dy/dt = A y`; `A` must be square.
    pub fn new(linear_op: DMatrix<f64>) -> Result<Self> {
        check_dim("FomSystem linear_op (square)", linear_op.nrows(), linear_op.ncols())?;
        let n = linear_op.nrows();
        Ok(FomSystem {
            linear_op,
            nonlinear: Nonlinearity::Zero,
            forcing: DVector::zeros(n),
            params: Vec::new(),
            bounds: None,
        })
    }

    pub fn zero(n: usize) -> Self {
        FomSystem::new(DMatrix::zeros(n, n)).expect("square by construction")
    }

    pub fn with_nonlinearity(mut self, nonlinear: Nonlinearity) -> Result<Self> {
        if let Some(dim) = nonlinear.output_dim() {
            check_dim("FomSystem nonlinear_fn output", self.n(), dim)?;
        }
        if let Nonlinearity::Pointwise { coupling, .. } = &nonlinear {
            check_dim("FomSystem pointwise coupling (square)", coupling.nrows(), coupling.ncols())?;
        }
        self.nonlinear = nonlinear;
        Ok(self)
    }

    pub fn with_forcing(mut self, forcing: DVector<f64>) -> Result<Self> {
        check_dim("FomSystem forcing", self.n(), forcing.len())?;
        self.forcing = forcing;
        Ok(self)
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.params = params;
        self
    }

    /// Box constraints applied to every Newton iterate.
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.bounds = Some((lower, upper));
        self
    }

    pub fn n(&self) -> usize {
        self.linear_op.nrows()
    }

    pub fn linear_op(&self) -> &DMatrix<f64> {
        &self.linear_op
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinear
    }

    pub fn forcing(&self) -> &DVector<f64> {
        &self.forcing
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    fn check_state(&self, context: &'static str, y: &DVector<f64>) -> Result<()> {
        check_dim(context, self.n(), y.len())
    }

    /// `A y + F(y) + b`.
    pub fn eval_rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state("eval_rhs", y)?;
        Ok(&self.linear_op * y + self.nonlinear.eval(y) + &self.forcing)
    }

    /// Implicit Euler residual `y_next - y_prev - dt (A y_next + F(y_next) + b)`.
    pub fn assemble_residual(
        &self,
        y_next: &DVector<f64>,
        y_prev: &DVector<f64>,
        dt: f64,
    ) -> Result<DVector<f64>> {
        self.check_state("assemble_residual y_prev", y_prev)?;
        let rhs = self.eval_rhs(y_next)?;
        Ok(y_next - y_prev - rhs * dt)
    }

    /// `I - dt A - dt J_F(y_next)`.
    pub fn residual_jacobian(&self, y_next: &DVector<f64>, dt: f64) -> Result<DMatrix<f64>> {
        self.check_state("residual_jacobian", y_next)?;
        let n = self.n();
        let mut jac = DMatrix::identity(n, n);
        jac -= &self.linear_op * dt;
        if !matches!(self.nonlinear, Nonlinearity::Zero) {
            jac -= self.nonlinear.jacobian(y_next) * dt;
        }
        Ok(jac)
    }

    /// Transposed residual Jacobian applied to `v`: `v - dt (A^T v + J_F(y)^T v)`.
    pub fn residual_jacobian_tr_mul(&self, y: &DVector<f64>, v: &DVector<f64>, dt: f64) -> DVector<f64> {
        let mut out = v - self.linear_op.tr_mul(v) * dt;
        if !matches!(self.nonlinear, Nonlinearity::Zero) {
            out -= self.nonlinear.jacobian(y).tr_mul(v) * dt;
        }
        out
    }

    fn project_to_bounds(&self, y: &mut DVector<f64>) {
        if let Some((lo, hi)) = self.bounds {
            y.apply(|v| *v = v.clamp(lo, hi));
        }
    }

    /// Largest relative discrepancy between the analytic Jacobian of `F` and
    /// central differences at `y`, normalized by the largest Jacobian entry.
    pub fn jacobian_fd_error(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_state("jacobian_fd_error", y)?;
        let analytic = self.nonlinear.jacobian(y);
        let n = self.n();
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + y[j].abs());
            let mut plus = y.clone();
            let mut minus = y.clone();
            plus[j] += h;
            minus[j] -= h;
            let col = (self.nonlinear.eval(&plus) - self.nonlinear.eval(&minus)) / (2.0 * h);
            fd.set_column(j, &col);
        }
        let scale = analytic.amax().max(fd.amax()).max(1.0);
        Ok((analytic - fd).amax() / scale)
    }
}

/// Uniform time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        Ok(TimeGrid { dt, steps, t0: 0.0 })
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + self.dt * index as f64
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps)
    }

    /// Index of the grid time closest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let raw = ((t - self.t0) / self.dt).round();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.steps)
        }
    }
}

/// State snapshots `y_0 .. y_T` as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: DMatrix<f64>,
    grid: TimeGrid,
}

impl Trajectory {
    pub fn from_states(states: DMatrix<f64>, grid: TimeGrid) -> Result<Self> {
        check_dim("Trajectory columns", grid.steps + 1, states.ncols())?;
        Ok(Trajectory { states, grid })
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn state(&self, index: usize) -> DVector<f64> {
        self.states.column(index).into_owned()
    }

    pub fn initial(&self) -> DVector<f64> {
        self.state(0)
    }

    pub fn last(&self) -> DVector<f64> {
        self.state(self.grid.steps)
    }

    pub fn value(&self, component: usize, index: usize) -> f64 {
        self.states[(component, index)]
    }

    /// Keeps every `stride`-th state; the grid step grows accordingly.
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 || self.grid.steps % stride != 0 {
            return Err(Error::invalid(
                "stride",
                format!("{stride} does not divide {} steps", self.grid.steps),
            ));
        }
        let steps = self.grid.steps / stride;
        let states = DMatrix::from_fn(self.n(), steps + 1, |i, j| self.states[(i, j * stride)]);
        let grid = TimeGrid {
            dt: self.grid.dt * stride as f64,
            steps,
            t0: self.grid.t0,
        };
        Trajectory::from_states(states, grid)
    }

    /// Applies a linear map (e.g. a POD lift) to every state.
    pub fn map_linear(&self, op: &DMatrix<f64>) -> Result<Trajectory> {
        check_dim("Trajectory::map_linear", op.ncols(), self.n())?;
        Trajectory::from_states(op * &self.states, self.grid)
    }
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-9,
            max_iters: 50,
            damping: 1.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be > 0, got {}", self.tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", format!("must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_residual_norm: f64,
}

/// One implicit Euler step solved by Newton's method from `y_prev`.
pub fn newton_step_solve(
    system: &FomSystem,
    y_prev: &DVector<f64>,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<(DVector<f64>, SolveStats)> {
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let mut y = y_prev.clone();
    let mut norm = f64::INFINITY;
    for iteration in 0..=cfg.max_iters {
        let r = system.assemble_residual(&y, y_prev, dt)?;
        norm = r.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("Newton residual at iteration {iteration}")));
        }
        if norm <= cfg.tol {
            return Ok((
                y,
                SolveStats {
                    iterations: iteration,
                    final_residual_norm: norm,
                },
            ));
        }
        if iteration == cfg.max_iters {
            break;
        }
        let jac = system.residual_jacobian(&y, dt)?;
        let delta = lu_solve(&jac, &r, "Newton step")?;
        y = line_search(system, &y, y_prev, dt, &delta, norm, cfg.damping)?;
    }
    Err(Error::NewtonDiverged {
        last_iterate: y,
        stats: SolveStats {
            iterations: cfg.max_iters,
            final_residual_norm: norm,
        },
    })
}

const MAX_BACKTRACKS: usize = 30;

/// Backtracks from `damping` along the Newton direction until the residual
/// norm drops (Armijo with slope factor 1e-4). S-shaped flux functions at
/// large steps send undamped iterates into cycles otherwise. If no trial
/// decreases the residual the shortest one is taken.
fn line_search(
    system: &FomSystem,
    y: &DVector<f64>,
    y_prev: &DVector<f64>,
    dt: f64,
    delta: &DVector<f64>,
    norm: f64,
    damping: f64,
) -> Result<DVector<f64>> {
    let mut lambda = damping;
    let mut trial = y.clone();
    for _ in 0..MAX_BACKTRACKS {
        trial = y - delta * lambda;
        system.project_to_bounds(&mut trial);
        let trial_norm = system.assemble_residual(&trial, y_prev, dt)?.norm();
        if trial_norm.is_finite() && trial_norm <= (1.0 - 1e-4 * lambda) * norm {
            break;
        }
        lambda *= 0.5;
    }
    Ok(trial)
}

/// Backward Euler over `grid`, aborting on the first failed step.
pub fn integrate_implicit_euler(
    system: &FomSystem,
    y0: &DVector<f64>,
    grid: &TimeGrid,
    cfg: &NewtonConfig,
) -> Result<Trajectory> {
    check_dim("integrate_implicit_euler y0", system.n(), y0.len())?;
    let mut states = DMatrix::zeros(system.n(), grid.steps + 1);
    states.set_column(0, y0);
    let mut y = y0.clone();
    for step in 1..=grid.steps {
        let (next, _) =
            newton_step_solve(system, &y, grid.dt, cfg).map_err(|e| Error::at_step(step, e))?;
        states.set_column(step, &next);
        y = next;
    }
    Trajectory::from_states(states, *grid)
}

/// Largest explicit time step allowed by the transport CFL condition
/// `dt <= phi dx / max(v f'(s))`. Returns infinity when the flux is nowhere
/// positive (every explicit step is stable).
pub fn von_neumann_dt_bound(
    porosity: f64,
    dx: f64,
    velocity: &[f64],
    dflux_dsat: impl Fn(f64) -> f64,
    s_range: (f64, f64),
) -> Result<f64> {
    if !(porosity > 0.0) {
        return Err(Error::invalid("porosity", format!("must be > 0, got {porosity}")));
    }
    if !(dx > 0.0) {
        return Err(Error::invalid("dx", format!("must be > 0, got {dx}")));
    }
    const SAMPLES: usize = 10_000;
    let (lo, hi) = s_range;
    let max_slope = (0..=SAMPLES)
        .map(|i| dflux_dsat(lo + (hi - lo) * i as f64 / SAMPLES as f64))
        .fold(0.0_f64, f64::max);
    let max_speed = velocity.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let denom = max_speed * max_slope;
    if denom > 0.0 {
        Ok(porosity * dx / denom)
    } else {
        Ok(f64::INFINITY)
    }
}

/// Counts how many scalar evaluations go through the wrapped map.
pub struct CountingMap<M> {
    inner: M,
    values: AtomicUsize,
    derivatives: AtomicUsize,
}

impl<M: PointwiseMap> CountingMap<M> {
    pub fn new(inner: M) -> Self {
        CountingMap {
            inner,
            values: AtomicUsize::new(0),
            derivatives: AtomicUsize::new(0),
        }
    }

    pub fn value_calls(&self) -> usize {
        self.values.load(Ordering::Relaxed)
    }

    pub fn derivative_calls(&self) -> usize {
        self.derivatives.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.values.store(0, Ordering::Relaxed);
        self.derivatives.store(0, Ordering::Relaxed);
    }
}

impl<M: PointwiseMap> PointwiseMap for CountingMap<M> {
    fn value(&self, s: f64) -> f64 {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.inner.value(s)
    }

    fn derivative(&self, s: f64) -> f64 {
        self.derivatives.fetch_add(1, Ordering::Relaxed);
        self.inner.derivative(s)
    }
}

/// `f(s) = s`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl PointwiseMap for IdentityMap {
    fn value(&self, s: f64) -> f64 {
        s
    }

    fn derivative(&self, _s: f64) -> f64 {
        1.0
    }
}
