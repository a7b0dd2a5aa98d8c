//! Benchmark problems: the three-state ODE family, 1-D heat diffusion and
//! two-phase flow in a porous column.

pub mod heat;
pub mod ode3;
pub mod two_phase;

pub use heat::{build_heat_fom, HeatProblemSpec};
pub use ode3::{build_problem123, OdeFamilySpec, OdeVariant, ThreeModeField};
pub use two_phase::{
    brooks_corey, build_saturation_fom, fractional_flow, sequential_implicit_run, solve_pressure, FractionalFlow,
    PressureField, RelPermModel, TwoPhaseSpec,
};
