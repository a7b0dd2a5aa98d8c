//! Discrete empirical interpolation and the POD-DEIM reduced model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynsys::{FomSystem, Nonlinearity, PointwiseMap, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{condition_number, lu_solve, lu_solve_matrix};
use crate::reduction::pod::{PodBasis, RomKind, RomSystem};

/// Above this `cond(P^T V_m)` a warning is logged.
pub const DEIM_CONDITION_WARNING: f64 = 1e8;

fn argmax_abs(v: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in v.enumerate() {
        // strict comparison keeps the lowest index on ties
        if x.abs() > best_val {
            best = i;
            best_val = x.abs();
        }
    }
    best
}

fn sampled_rows(v: &DMatrix<f64>, rows: &[usize], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| v[(rows[i], j)])
}

/// Greedy DEIM row selection over the columns of `v`.
pub fn deim_select(v: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (n, m) = v.shape();
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("need 1 <= m <= n = {n}, got {m}")));
    }
    let mut indices = vec![argmax_abs(v.column(0).iter().copied())];
    for l in 1..m {
        let pv = sampled_rows(v, &indices, l);
        let rhs = DVector::from_iterator(l, indices.iter().map(|&i| v[(i, l)]));
        let c = lu_solve(&pv, &rhs, &format!("DEIM interim system at column {l}"))?;
        let residual = v.column(l) - v.columns(0, l) * c;
        let next = argmax_abs(residual.iter().copied());
        if indices.contains(&next) || residual[next] == 0.0 {
            return Err(Error::Singular(format!(
                "DEIM interim system at column {l} (column is dependent on the previous ones)"
            )));
        }
        indices.push(next);
    }
    Ok(indices)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeimOperator {
    pub indices: Vec<usize>,
    /// `V_m`, `n x m`.
    pub nonlinearity_basis: DMatrix<f64>,
    /// `D = V_m (P^T V_m)^-1`, `n x m`.
    pub deim_matrix: DMatrix<f64>,
    /// `P^T U_r`, `m x r`.
    pub sampling_rows_of_ur: DMatrix<f64>,
    /// `cond(P^T V_m)`.
    pub condition: f64,
}

impl DeimOperator {
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// `P^T f`.
    pub fn sample(&self, f: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.indices.iter().map(|&i| f[i]))
    }

    /// `D P^T f`: the interpolant of `f` from its sampled rows.
    pub fn interpolate(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.deim_matrix * self.sample(f)
    }
}

pub fn build_deim_operator(v_m: &DMatrix<f64>, indices: &[usize], basis: &PodBasis) -> Result<DeimOperator> {
    let (n, m) = v_m.shape();
    check_dim("build_deim_operator index count", m, indices.len())?;
    check_dim("build_deim_operator basis rows", n, basis.n())?;
    for (k, &i) in indices.iter().enumerate() {
        if i >= n || indices[..k].contains(&i) {
            return Err(Error::invalid("indices", format!("row {i} is out of range or repeated")));
        }
    }
    let ptv = sampled_rows(v_m, indices, m);
    let condition = condition_number(&ptv);
    if !condition.is_finite() {
        return Err(Error::Singular("P^T V_m".into()));
    }
    if condition > DEIM_CONDITION_WARNING {
        log::warn!("DEIM sampling matrix is ill-conditioned: cond(P^T V_m) = {condition:.3e}");
    }
    // D^T = (P^T V_m)^-T V_m^T
    let deim_matrix = lu_solve_matrix(&ptv.transpose(), &v_m.transpose(), "P^T V_m")?.transpose();
    Ok(DeimOperator {
        indices: indices.to_vec(),
        nonlinearity_basis: v_m.clone(),
        deim_matrix,
        sampling_rows_of_ur: sampled_rows(&basis.basis, indices, basis.rank()),
        condition,
    })
}

/// `y~ -> K f(B y~)` with `K = U_r^T C D` (`r x m`) and `B = P^T U_r` (`m x r`).
/// Only the `m` sampled entries of `f` are evaluated.
pub struct DeimField {
    reduced_coupling: DMatrix<f64>,
    sampling: DMatrix<f64>,
    map: Arc<dyn PointwiseMap>,
}

impl VectorField for DeimField {
    fn dim(&self) -> usize {
        self.reduced_coupling.nrows()
    }

    fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = &self.sampling * y;
        &self.reduced_coupling * z.map(|s| self.map.value(s))
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let z = &self.sampling * y;
        let mut scaled = self.sampling.clone();
        for (i, &s) in z.iter().enumerate() {
            let d = self.map.derivative(s);
            scaled.row_mut(i).scale_mut(d);
        }
        &self.reduced_coupling * scaled
    }
}

/// POD-DEIM reduced model of a system whose nonlinearity is `C f(y)` with a
/// componentwise `f`.
pub fn build_pod_deim_rom(system: &FomSystem, basis: &PodBasis, deim: &DeimOperator) -> Result<RomSystem> {
    check_dim("build_pod_deim_rom basis rows", system.n(), basis.n())?;
    check_dim("build_pod_deim_rom DEIM rows", system.n(), deim.deim_matrix.nrows())?;
    check_dim("build_pod_deim_rom DEIM sampling rank", basis.rank(), deim.sampling_rows_of_ur.ncols())?;
    let (coupling, map) = match system.nonlinearity() {
        Nonlinearity::Pointwise { coupling, map } => (coupling, map.clone()),
        other => {
            return Err(Error::invalid(
                "nonlinearity",
                format!("POD-DEIM needs a componentwise nonlinearity, got {other:?}"),
            ))
        }
    };
    let u = &basis.basis;
    let field = DeimField {
        reduced_coupling: u.tr_mul(&(coupling * &deim.deim_matrix)),
        sampling: deim.sampling_rows_of_ur.clone(),
        map,
    };
    let rom = FomSystem::new(u.tr_mul(&(system.linear_op() * u)))?
        .with_forcing(u.tr_mul(system.forcing()))?
        .with_params(system.params().to_vec())
        .with_nonlinearity(Nonlinearity::Field(Arc::new(field)))?;
    Ok(RomSystem {
        system: rom,
        basis: basis.clone(),
        kind: RomKind::PodDeim,
    })
}
