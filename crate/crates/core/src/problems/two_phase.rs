//! Incompressible two-phase (water/oil) displacement in a 1-D porous column.
//!
//! A sequential scheme alternates a finite-volume pressure solve (velocity
//! from Darcy's law) with implicit Euler saturation steps on a first-order
//! upwind discretization. Water is injected in the first cell and the fluid
//! mixture is produced from the last one.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{newton_step_solve, FomSystem, NewtonConfig, Nonlinearity, PointwiseMap, TimeGrid, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::linalg::lu_solve;

/// How the effective saturation `s*` is formed before the quadratic
/// Brooks-Corey powers are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelPermModel {
    /// `s* = s - s_or - s_ow`, clipped to `[0, 1]`.
    AsWritten,
    /// `s* = (s - s_ow) / (1 - s_or - s_ow)`, clipped to `[0, 1]`. Water
    /// becomes fully mobile exactly at `s = 1 - s_or`, so injected water
    /// never pushes a cell past the physical bound.
    #[default]
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseSpec {
    pub n_cells: usize,
    pub porosity: f64,
    /// Per-cell permeability.
    pub permeability: Vec<f64>,
    pub mu_w: f64,
    pub mu_o: f64,
    pub s_or: f64,
    pub s_ow: f64,
    /// Injection rate in the first cell (>= 0).
    pub q_inj: f64,
    /// Production rate in the last cell (<= 0).
    pub q_prod: f64,
    /// Water density; well rates enter as `q / rho_w`.
    pub rho_w: f64,
    pub rel_perm: RelPermModel,
}

impl Default for TwoPhaseSpec {
    fn default() -> Self {
        TwoPhaseSpec {
            n_cells: 64,
            porosity: 0.2,
            permeability: vec![1.0; 64],
            mu_w: 0.1,
            mu_o: 1.0,
            s_or: 0.2,
            s_ow: 0.2,
            q_inj: 0.1,
            q_prod: -0.1,
            rho_w: 1.0,
            rel_perm: RelPermModel::Normalized,
        }
    }
}

impl TwoPhaseSpec {
    pub fn with_porosity(mut self, porosity: f64) -> Self {
        self.porosity = porosity;
        self
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Cell-center coordinates.
    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }

    pub fn saturation_bounds(&self) -> (f64, f64) {
        (self.s_ow, 1.0 - self.s_or)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 2 {
            return Err(Error::invalid("n_cells", "need at least two cells"));
        }
        check_dim("TwoPhaseSpec permeability", self.n_cells, self.permeability.len())?;
        if self.permeability.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::invalid("permeability", "must be positive in every cell"));
        }
        for (name, value) in [("porosity", self.porosity), ("mu_w", self.mu_w), ("mu_o", self.mu_o), ("rho_w", self.rho_w)] {
            if !(value > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {value}")));
            }
        }
        if !(self.s_or >= 0.0 && self.s_ow >= 0.0 && self.s_or + self.s_ow < 1.0) {
            return Err(Error::invalid("s_or/s_ow", "residual saturations must be >= 0 and sum below 1"));
        }
        if self.q_inj < 0.0 || self.q_prod > 0.0 {
            return Err(Error::invalid("q_inj/q_prod", "injection must be >= 0 and production <= 0"));
        }
        Ok(())
    }

    /// Effective saturation and `ds*/ds` (zero where clipped).
    fn effective(&self, s: f64) -> (f64, f64) {
        let (raw, slope) = match self.rel_perm {
            RelPermModel::AsWritten => (s - self.s_or - self.s_ow, 1.0),
            RelPermModel::Normalized => {
                let span = 1.0 - self.s_or - self.s_ow;
                ((s - self.s_ow) / span, 1.0 / span)
            }
        };
        if raw <= 0.0 {
            (0.0, 0.0)
        } else if raw >= 1.0 {
            (1.0, 0.0)
        } else {
            (raw, slope)
        }
    }

    /// Total mobility `k_rw / mu_w + k_ro / mu_o`.
    pub fn total_mobility(&self, s: f64) -> f64 {
        let (krw, kro) = brooks_corey(s, self);
        krw / self.mu_w + kro / self.mu_o
    }
}

/// Relative permeabilities `(k_rw, k_ro) = (s*^2, (1 - s*)^2)`.
pub fn brooks_corey(s: f64, spec: &TwoPhaseSpec) -> (f64, f64) {
    let (e, _) = spec.effective(s);
    (e * e, (1.0 - e) * (1.0 - e))
}

/// Water fractional flow `f = lambda_w / (lambda_w + lambda_o)` and `df/ds`.
pub fn fractional_flow(s: f64, spec: &TwoPhaseSpec) -> (f64, f64) {
    let (e, de) = spec.effective(s);
    let lw = e * e / spec.mu_w;
    let lo = (1.0 - e) * (1.0 - e) / spec.mu_o;
    let dlw = 2.0 * e / spec.mu_w;
    let dlo = -2.0 * (1.0 - e) / spec.mu_o;
    let total = lw + lo;
    let f = lw / total;
    let df_de = (dlw * lo - lw * dlo) / (total * total);
    (f, df_de * de)
}

/// [`fractional_flow`] as a componentwise map.
#[derive(Debug, Clone)]
pub struct FractionalFlow {
    spec: TwoPhaseSpec,
}

impl FractionalFlow {
    pub fn new(spec: &TwoPhaseSpec) -> Self {
        FractionalFlow { spec: spec.clone() }
    }
}

impl PointwiseMap for FractionalFlow {
    fn value(&self, s: f64) -> f64 {
        fractional_flow(s, &self.spec).0
    }

    fn derivative(&self, s: f64) -> f64 {
        fractional_flow(s, &self.spec).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    /// Cell pressures, gauge `p[n - 1] = 0`.
    pub pressure: Vec<f64>,
    /// Darcy velocities on the `n + 1` cell edges; the outer edges are no-flow.
    pub velocity: Vec<f64>,
}

/// Volumetric well rates per cell (`q / rho_w`), zero away from the wells.
pub fn well_rates(spec: &TwoPhaseSpec) -> Vec<f64> {
    let mut q = vec![0.0; spec.n_cells];
    q[0] += spec.q_inj / spec.rho_w;
    q[spec.n_cells - 1] += spec.q_prod / spec.rho_w;
    q
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Finite-volume solve of `d/dx(lambda K dp/dx) + q = 0` with no-flow ends.
pub fn solve_pressure(s: &[f64], spec: &TwoPhaseSpec) -> Result<PressureField> {
    spec.validate()?;
    check_dim("solve_pressure saturation", spec.n_cells, s.len())?;
    let n = spec.n_cells;
    let dx = spec.dx();
    let mobility: Vec<f64> = s
        .iter()
        .zip(&spec.permeability)
        .map(|(&si, &k)| spec.total_mobility(si) * k)
        .collect();
    // Edge transmissibility for the interior edge between cells i-1 and i.
    let trans: Vec<f64> = (1..n).map(|i| harmonic(mobility[i - 1], mobility[i]) / dx).collect();
    if trans.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Singular("pressure system (zero interface mobility)".into()));
    }

    // v_e = -T_e (p_i - p_{i-1});  v_{i+1/2} - v_{i-1/2} = q_i.
    let q = well_rates(spec);
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::from_vec(q.clone());
    for i in 0..n {
        if i + 1 < n {
            let t = trans[i];
            mat[(i, i)] += t;
            mat[(i, i + 1)] -= t;
        }
        if i > 0 {
            let t = trans[i - 1];
            mat[(i, i)] += t;
            mat[(i, i - 1)] -= t;
        }
    }
    // Pure Neumann problem: replace the last balance (implied by the others
    // because the rates sum to zero) with the gauge p[n-1] = 0.
    mat.row_mut(n - 1).fill(0.0);
    mat[(n - 1, n - 1)] = 1.0;
    rhs[n - 1] = 0.0;
    let p = lu_solve(&mat, &rhs, "pressure system")?;

    let mut velocity = vec![0.0; n + 1];
    for i in 1..n {
        velocity[i] = -trans[i - 1] * (p[i] - p[i - 1]);
    }
    Ok(PressureField {
        pressure: p.iter().copied().collect(),
        velocity,
    })
}

/// Upwind flux matrix `C` (including producer outflow) and injector source
/// `b`, both divided by `phi dx`, so that `ds/dt = C f(s) + b`.
pub fn upwind_operator(velocity: &[f64], spec: &TwoPhaseSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    spec.validate()?;
    let n = spec.n_cells;
    check_dim("upwind_operator velocity", n + 1, velocity.len())?;
    let mut c = DMatrix::<f64>::zeros(n, n);
    for edge in 1..n {
        let v = velocity[edge];
        let (left, right) = (edge - 1, edge);
        // Flux v f(s_upwind) leaves `left` and enters `right`.
        let upwind = if v >= 0.0 { left } else { right };
        c[(right, upwind)] += v;
        c[(left, upwind)] -= v;
    }
    let mut b = DVector::<f64>::zeros(n);
    for (i, q) in well_rates(spec).into_iter().enumerate() {
        if q > 0.0 {
            // Injected fluid is pure water.
            b[i] += q;
        } else if q < 0.0 {
            // Produced water follows the cell's own fractional flow.
            c[(i, i)] += q;
        }
    }
    let scale = 1.0 / (spec.porosity * spec.dx());
    Ok((c * scale, b * scale))
}

/// The saturation system for a frozen velocity field; Newton iterates are
/// kept inside `[s_ow, 1 - s_or]`.
pub fn build_saturation_fom(vel: &PressureField, spec: &TwoPhaseSpec) -> Result<FomSystem> {
    let (coupling, forcing) = upwind_operator(&vel.velocity, spec)?;
    let (lo, hi) = spec.saturation_bounds();
    let system = FomSystem::zero(spec.n_cells)
        .with_nonlinearity(Nonlinearity::Pointwise {
            coupling,
            map: Arc::new(FractionalFlow::new(spec)),
        })?
        .with_forcing(forcing)?
        .with_params(vec![spec.porosity])
        .with_bounds(lo, hi);
    Ok(system)
}

pub fn initial_saturation(spec: &TwoPhaseSpec) -> DVector<f64> {
    DVector::from_element(spec.n_cells, spec.s_ow)
}

/// The saturation system at the initial state, i.e. the velocity field the
/// reduced models are built on.
pub fn reference_saturation_fom(spec: &TwoPhaseSpec) -> Result<(FomSystem, DVector<f64>)> {
    let s0 = initial_saturation(spec);
    let pressure = solve_pressure(s0.as_slice(), spec)?;
    Ok((build_saturation_fom(&pressure, spec)?, s0))
}

/// Sequential implicit scheme: a pressure solve every `pressure_update_every`
/// saturation steps, implicit Euler saturation steps in between.
pub fn sequential_implicit_run(
    spec: &TwoPhaseSpec,
    grid: &TimeGrid,
    cfg: &NewtonConfig,
    pressure_update_every: usize,
) -> Result<Trajectory> {
    if pressure_update_every == 0 {
        return Err(Error::invalid("pressure_update_every", "must be at least 1"));
    }
    spec.validate()?;
    let n = spec.n_cells;
    let mut states = DMatrix::zeros(n, grid.steps + 1);
    let mut s = initial_saturation(spec);
    states.set_column(0, &s);
    let mut system: Option<FomSystem> = None;
    for step in 1..=grid.steps {
        if (step - 1) % pressure_update_every == 0 || system.is_none() {
            let pressure = solve_pressure(s.as_slice(), spec).map_err(|e| Error::at_step(step, e))?;
            system = Some(build_saturation_fom(&pressure, spec)?);
        }
        let sys = system.as_ref().expect("set above");
        let (next, _) = newton_step_solve(sys, &s, grid.dt, cfg).map_err(|e| Error::at_step(step, e))?;
        states.set_column(step, &next);
        s = next;
    }
    Trajectory::from_states(states, *grid)
}

/// Water mass change and net well water flux over one implicit step, both in
/// pore-volume units: `phi dx sum(s_next - s_prev)` and
/// `dt (injected - produced)`, with production evaluated at `s_next`.
pub fn step_mass_balance(spec: &TwoPhaseSpec, s_prev: &DVector<f64>, s_next: &DVector<f64>, dt: f64) -> (f64, f64) {
    let stored = spec.porosity * spec.dx() * (s_next - s_prev).sum();
    let mut net = 0.0;
    for (i, q) in well_rates(spec).into_iter().enumerate() {
        if q > 0.0 {
            net += q;
        } else if q < 0.0 {
            net += q * fractional_flow(s_next[i], spec).0;
        }
    }
    (stored, dt * net)
}
