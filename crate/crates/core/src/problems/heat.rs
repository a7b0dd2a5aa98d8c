//! One-dimensional heat diffusion on `[0, 1]` with a box heat source and
//! homogeneous Dirichlet ends, discretized by central differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynsys::FomSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatProblemSpec {
    pub dx: f64,
    pub alpha: f64,
    pub source_support: (f64, f64),
}

impl HeatProblemSpec {
    pub fn new(alpha: f64) -> Self {
        HeatProblemSpec {
            dx: 0.01,
            alpha,
            source_support: (0.4, 0.6),
        }
    }

    /// Number of interior nodes.
    pub fn n(&self) -> Result<usize> {
        let cells = (1.0 / self.dx).round();
        if !(self.dx > 0.0) || cells < 2.0 || ((cells * self.dx) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "dx",
                format!("{} does not divide [0, 1] evenly", self.dx),
            ));
        }
        Ok(cells as usize - 1)
    }

    /// Interior node coordinates `x_i = (i + 1) dx`.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        Ok((0..self.n()?).map(|i| (i + 1) as f64 * self.dx).collect())
    }

    /// Index of the interior node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> Result<usize> {
        let n = self.n()?;
        let idx = (x / self.dx).round() as isize - 1;
        Ok(idx.clamp(0, n as isize - 1) as usize)
    }
}

/// `dy/dt = A y + b` with `A = alpha L / dx^2`. The diffusion is dissipative:
/// `L` is the standard (1, -2, 1) stencil.
pub fn build_heat_fom(spec: &HeatProblemSpec) -> Result<(FomSystem, DVector<f64>)> {
    if !(spec.alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be > 0, got {}", spec.alpha)));
    }
    let n = spec.n()?;
    let scale = spec.alpha / (spec.dx * spec.dx);
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * scale
        } else if i.abs_diff(j) == 1 {
            scale
        } else {
            0.0
        }
    });
    let (lo, hi) = spec.source_support;
    // Nodes sit on multiples of dx, so a small slack keeps 0.4 and 0.6 inside.
    let slack = 1e-9 * spec.dx;
    let b = DVector::from_iterator(
        n,
        spec.nodes()?
            .into_iter()
            .map(|x| if x >= lo - slack && x <= hi + slack { 1.0 } else { 0.0 }),
    );
    let system = FomSystem::new(a)?.with_forcing(b)?.with_params(vec![spec.alpha]);
    Ok((system, DVector::zeros(n)))
}
