//! The three-state quadratic ODE with random initial conditions:
//!
//! ```text
//! dy1/dt = y1 y3,   dy2/dt = -y2 y3,   dy3/dt = -y1^2 + y2^2
//! ```
//!
//! The response jumps across the planes y1(0) = 0 and y2(0) = 0.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::{FomSystem, Nonlinearity, VectorField};
use crate::error::{Error, Result};

/// Which initial-condition entries are random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeVariant {
    /// `(1, 0.1 x, 0)`
    P1,
    /// `(1, 0.1 x1, x2)`
    P2,
    /// `(x1, x2, x3)`
    P3,
}

impl OdeVariant {
    pub fn stochastic_dim(self) -> usize {
        match self {
            OdeVariant::P1 => 1,
            OdeVariant::P2 => 2,
            OdeVariant::P3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeFamilySpec {
    pub variant: OdeVariant,
    pub inputs: Vec<f64>,
}

impl OdeFamilySpec {
    pub fn new(variant: OdeVariant, inputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != variant.stochastic_dim() {
            return Err(Error::invalid(
                "inputs",
                format!(
                    "{variant:?} takes {} random inputs, got {}",
                    variant.stochastic_dim(),
                    inputs.len()
                ),
            ));
        }
        Ok(OdeFamilySpec { variant, inputs })
    }

    pub fn initial_state(&self) -> DVector<f64> {
        let x = &self.inputs;
        match self.variant {
            OdeVariant::P1 => DVector::from_vec(vec![1.0, 0.1 * x[0], 0.0]),
            OdeVariant::P2 => DVector::from_vec(vec![1.0, 0.1 * x[0], x[1]]),
            OdeVariant::P3 => DVector::from_vec(vec![x[0], x[1], x[2]]),
        }
    }
}

/// `F(y) = (y1 y3, -y2 y3, -y1^2 + y2^2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThreeModeField;

impl VectorField for ThreeModeField {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            y[0] * y[2],
            -y[1] * y[2],
            -y[0] * y[0] + y[1] * y[1],
        ])
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                y[2], 0.0, y[0], //
                0.0, -y[2], -y[1], //
                -2.0 * y[0], 2.0 * y[1], 0.0,
            ],
        )
    }
}

/// The system (with `A = 0`) and its initial state.
pub fn build_problem123(spec: &OdeFamilySpec) -> Result<(FomSystem, DVector<f64>)> {
    let system = FomSystem::zero(3)
        .with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField)))?
        .with_params(spec.inputs.clone());
    Ok((system, spec.initial_state()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{integrate_implicit_euler, newton_step_solve, NewtonConfig, TimeGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p1(x: f64) -> (FomSystem, DVector<f64>) {
        build_problem123(&OdeFamilySpec::new(OdeVariant::P1, vec![x]).unwrap()).unwrap()
    }

    #[test]
    fn field_and_jacobian_examples() {
        let (sys, _) = p1(0.0);
        let f = sys.eval_rhs(&DVector::from_vec(vec![1.0, 0.1, 0.0])).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert!((f[2] + 0.99).abs() < 1e-15);
        assert_eq!(ThreeModeField.jacobian(&DVector::zeros(3)), DMatrix::zeros(3, 3));
    }

    #[test]
    fn initial_conditions_per_variant() {
        let (_, y0) = p1(-0.3);
        assert_eq!(y0[0], 1.0);
        assert!((y0[1] + 0.03).abs() < 1e-15);
        assert_eq!(y0[2], 0.0);
        let p2 = OdeFamilySpec::new(OdeVariant::P2, vec![0.5, -0.2]).unwrap();
        assert_eq!(p2.initial_state(), DVector::from_vec(vec![1.0, 0.05, -0.2]));
        let p3 = OdeFamilySpec::new(OdeVariant::P3, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(p3.initial_state(), DVector::from_vec(vec![0.1, 0.2, 0.3]));
        assert!(OdeFamilySpec::new(OdeVariant::P3, vec![0.1]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (sys, _) = p1(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let y = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            assert!(sys.jacobian_fd_error(&y).unwrap() < 1e-5);
        }
    }

    /// Fixed-point oracle for one backward Euler step: y = y_prev + dt F(y),
    /// iterated to 1e-12. The map is a contraction for dt = 0.1 near the data.
    fn fixed_point_step(y_prev: &DVector<f64>, dt: f64) -> DVector<f64> {
        let mut y = y_prev.clone();
        for _ in 0..10_000 {
            let next = y_prev + ThreeModeField.eval(&y) * dt;
            let done = (&next - &y).amax() < 1e-12;
            y = next;
            if done {
                break;
            }
        }
        y
    }

    #[test]
    fn newton_step_matches_fixed_point_oracle() {
        let (sys, _) = p1(0.5);
        let y_prev = DVector::from_vec(vec![1.0, 0.05, 0.0]);
        let (y, stats) = newton_step_solve(&sys, &y_prev, 0.1, &NewtonConfig::default()).unwrap();
        let oracle = fixed_point_step(&y_prev, 0.1);
        assert!((&y - &oracle).amax() < 1e-8);
        let r = sys.assemble_residual(&y, &y_prev, 0.1).unwrap();
        assert!(r.norm() <= 1e-9);
        assert_eq!(stats.final_residual_norm, r.norm());
    }

    #[test]
    fn half_step_refinement_converges() {
        // dt = 0.1 sits at the edge of the asymptotic regime for this switching
        // orbit, so the gap to the half-step run is about 0.107; successive
        // halvings must keep shrinking it.
        let (sys, y0) = p1(0.5);
        let cfg = NewtonConfig::default();
        let run = |refine: usize| {
            let grid = TimeGrid::new(0.1 / refine as f64, 100 * refine).unwrap();
            integrate_implicit_euler(&sys, &y0, &grid, &cfg).unwrap().subsample(refine).unwrap()
        };
        let (coarse, half, quarter) = (run(1), run(2), run(4));
        let d1 = (coarse.states() - half.states()).amax();
        let d2 = (half.states() - quarter.states()).amax();
        assert!((d1 - 0.107434).abs() < 1e-4, "dt 0.1 vs 0.05: {d1}");
        assert!(d2 < 0.65 * d1, "{d2} vs {d1}");
    }

    #[test]
    fn sign_of_y2_persists() {
        let cfg = NewtonConfig::default();
        let grid = TimeGrid::new(0.1, 100).unwrap();
        for x in [-1.0, -0.6, -0.1, 0.1, 0.35, 0.9] {
            let (sys, y0) = p1(x);
            let traj = integrate_implicit_euler(&sys, &y0, &grid, &cfg).unwrap();
            assert_eq!(traj.last()[1].signum(), y0[1].signum(), "x = {x}");
        }
    }
}
