//! Snapshot matrices, POD bases and Galerkin projection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynsys::{FomSystem, Nonlinearity, Trajectory, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::thin_svd;

/// Column-stacked snapshots; `labels[j] = (run, time index)` of column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub labels: Vec<(usize, usize)>,
}

impl SnapshotMatrix {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }
}

/// Concatenates every state of every trajectory. With `map`, stores the
/// mapped columns instead (nonlinearity snapshots).
pub fn assemble_snapshots(
    trajectories: &[Trajectory],
    map: Option<&dyn Fn(&DVector<f64>) -> DVector<f64>>,
) -> Result<SnapshotMatrix> {
    let n = trajectories.first().map_or(0, |t| t.n());
    let mut cols = 0;
    for traj in trajectories {
        check_dim("assemble_snapshots state dimension", n, traj.n())?;
        cols += traj.steps() + 1;
    }
    let mut data = DMatrix::zeros(n, cols);
    let mut labels = Vec::with_capacity(cols);
    let mut j = 0;
    for (run, traj) in trajectories.iter().enumerate() {
        for t in 0..=traj.steps() {
            let column = traj.states().column(t);
            match map {
                Some(f) => {
                    let mapped = f(&column.into_owned());
                    check_dim("assemble_snapshots mapped column", n, mapped.len())?;
                    data.set_column(j, &mapped);
                }
                None => data.set_column(j, &column),
            }
            labels.push((run, t));
            j += 1;
        }
    }
    Ok(SnapshotMatrix { data, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `n x r`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// The full spectrum, non-increasing.
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// The leading `r` columns.
    pub fn truncate(&self, r: usize) -> Result<PodBasis> {
        if r == 0 || r > self.rank() {
            return Err(Error::invalid("rank", format!("{r} outside 1..={}", self.rank())));
        }
        Ok(PodBasis {
            basis: self.basis.columns(0, r).into_owned(),
            singular_values: self.singular_values.clone(),
        })
    }

    /// `sum_{i > r} sigma_i^2`, the squared Frobenius projection error.
    pub fn tail_energy(&self) -> f64 {
        self.singular_values.iter().skip(self.rank()).map(|s| s * s).sum()
    }

    /// Fraction of snapshot energy captured by the retained modes.
    pub fn energy_fraction(&self) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            1.0
        } else {
            1.0 - self.tail_energy() / total
        }
    }

    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(y)
    }

    pub fn lift(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.basis * coeffs
    }
}

/// Leading `r` left singular vectors of the (uncentered) snapshot matrix.
pub fn compute_pod_basis(x: &SnapshotMatrix, r: usize) -> Result<PodBasis> {
    let max_rank = x.n().min(x.len());
    if r == 0 || r > max_rank {
        return Err(Error::invalid("rank", format!("{r} outside 1..={max_rank}")));
    }
    let svd = thin_svd(&x.data);
    Ok(PodBasis {
        basis: svd.u.columns(0, r).into_owned(),
        singular_values: svd.singular_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RomKind {
    Galerkin,
    PodDeim,
}

/// A reduced system in POD coordinates plus the basis to lift back.
#[derive(Debug, Clone)]
pub struct RomSystem {
    pub system: FomSystem,
    pub basis: PodBasis,
    pub kind: RomKind,
}

impl RomSystem {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("RomSystem::project", self.basis.n(), y.len())?;
        Ok(self.basis.project(y))
    }

    pub fn lift(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("RomSystem::lift", self.rank(), coeffs.len())?;
        Ok(self.basis.lift(coeffs))
    }

    pub fn lift_trajectory(&self, reduced: &Trajectory) -> Result<Trajectory> {
        reduced.map_linear(&self.basis.basis)
    }
}

/// `y~ -> U^T F(U y~)` with Jacobian `U^T J_F(U y~) U`.
pub struct GalerkinField {
    inner: Nonlinearity,
    basis: DMatrix<f64>,
}

impl VectorField for GalerkinField {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(&self.inner.eval(&(&self.basis * y)))
    }

    fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        self.basis.tr_mul(&(self.inner.jacobian(&(&self.basis * y)) * &self.basis))
    }
}

pub fn galerkin_project(system: &FomSystem, basis: &PodBasis) -> Result<RomSystem> {
    check_dim("galerkin_project basis rows", system.n(), basis.n())?;
    let u = &basis.basis;
    let reduced_a = u.tr_mul(&(system.linear_op() * u));
    let mut rom = FomSystem::new(reduced_a)?
        .with_forcing(u.tr_mul(system.forcing()))?
        .with_params(system.params().to_vec());
    if !matches!(system.nonlinearity(), Nonlinearity::Zero) {
        rom = rom.with_nonlinearity(Nonlinearity::Field(Arc::new(GalerkinField {
            inner: system.nonlinearity().clone(),
            basis: u.clone(),
        })))?;
    }
    Ok(RomSystem {
        system: rom,
        basis: basis.clone(),
        kind: RomKind::Galerkin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{integrate_implicit_euler, NewtonConfig, TimeGrid};
    use crate::problems::heat::{build_heat_fom, HeatProblemSpec};
    use crate::problems::ode3::ThreeModeField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snapshots(data: DMatrix<f64>) -> SnapshotMatrix {
        let labels = (0..data.ncols()).map(|j| (0, j)).collect();
        SnapshotMatrix { data, labels }
    }

    #[test]
    fn snapshot_counting() {
        let grid = TimeGrid::new(0.1, 2).unwrap();
        let t = Trajectory::from_states(DMatrix::zeros(4, 3), grid).unwrap();
        assert_eq!(assemble_snapshots(&[t], None).unwrap().len(), 3);
        let grid = TimeGrid::new(0.01, 40).unwrap();
        let runs: Vec<_> = (0..2)
            .map(|_| Trajectory::from_states(DMatrix::zeros(99, 41), grid).unwrap())
            .collect();
        let x = assemble_snapshots(&runs, None).unwrap();
        assert_eq!(x.len(), 82);
        assert_eq!(x.labels[41], (1, 0));
        let other = Trajectory::from_states(DMatrix::zeros(5, 41), grid).unwrap();
        assert!(assemble_snapshots(&[runs[0].clone(), other], None).is_err());
    }

    #[test]
    fn mapped_snapshots() {
        let grid = TimeGrid::new(0.1, 1).unwrap();
        let t = Trajectory::from_states(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), grid).unwrap();
        let square = |y: &DVector<f64>| y.map(|v| v * v);
        let x = assemble_snapshots(&[t], Some(&square)).unwrap();
        assert_eq!(x.data, DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 9.0, 16.0]));
    }

    #[test]
    fn rank_one_snapshots() {
        let c = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        let x = snapshots(DMatrix::from_fn(3, 5, |i, _| c[i]));
        let pod = compute_pod_basis(&x, 1).unwrap();
        let u = pod.basis.column(0).into_owned();
        let aligned = if u[0] < 0.0 { -u } else { u };
        assert!((aligned - &c / 5.0).amax() < 1e-12);
        assert!((pod.singular_values[0] - 5.0 * 5f64.sqrt()).abs() < 1e-12);
        assert!(pod.singular_values[1..].iter().all(|s| *s == 0.0));
        assert!(compute_pod_basis(&x, 0).is_err());
        assert!(compute_pod_basis(&x, 4).is_err());
    }

    #[test]
    fn eckart_young_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // graded spectrum 2^-i so the tail stays well above roundoff
        let left = thin_svd(&DMatrix::from_fn(60, 20, |_, _| rng.random_range(-1.0..1.0))).u;
        let right = thin_svd(&DMatrix::from_fn(150, 20, |_, _| rng.random_range(-1.0..1.0))).u;
        let sigma = DMatrix::from_diagonal(&DVector::from_fn(20, |i, _| 0.5f64.powi(i as i32)));
        let x = snapshots(&left * sigma * right.transpose());
        for r in [1, 3, 7, 12] {
            let pod = compute_pod_basis(&x, r).unwrap();
            let u = &pod.basis;
            assert!((u.tr_mul(u) - DMatrix::identity(r, r)).amax() < 1e-10);
            let resid = (&x.data - u * u.tr_mul(&x.data)).norm_squared();
            let tail = pod.tail_energy();
            assert!(((resid - tail) / tail).abs() < 1e-8, "r={r}: {resid} vs {tail}");
        }
    }

    #[test]
    fn identity_projection_reproduces_fom() {
        let sys = FomSystem::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -2.0]))
            .unwrap()
            .with_forcing(DVector::from_vec(vec![1.0, -1.0]))
            .unwrap();
        let pod = PodBasis {
            basis: DMatrix::identity(2, 2),
            singular_values: vec![1.0, 1.0],
        };
        let rom = galerkin_project(&sys, &pod).unwrap();
        assert_eq!(rom.system.linear_op(), sys.linear_op());
        assert_eq!(rom.system.forcing(), sys.forcing());
        let y = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(rom.system.eval_rhs(&y).unwrap(), sys.eval_rhs(&y).unwrap());
    }

    #[test]
    fn nonlinear_galerkin_jacobian_matches_fd() {
        let sys = FomSystem::zero(3)
            .with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField)))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = thin_svd(&DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0))).u;
        let pod = PodBasis {
            basis,
            singular_values: vec![1.0, 1.0],
        };
        let rom = galerkin_project(&sys, &pod).unwrap();
        let y = DVector::from_vec(vec![0.4, -0.7]);
        assert!(rom.system.jacobian_fd_error(&y).unwrap() < 1e-6);
    }

    #[test]
    fn lift_project_is_identity_on_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = snapshots(DMatrix::from_fn(40, 10, |_, _| rng.random_range(-1.0..1.0)));
        let pod = compute_pod_basis(&x, 6).unwrap();
        let y = pod.lift(&DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)));
        assert!((pod.lift(&pod.project(&y)) - &y).amax() < 1e-10);
    }

    #[test]
    fn heat_rom_preserves_symmetry() {
        let spec = HeatProblemSpec::new(0.05);
        let (sys, y0) = build_heat_fom(&spec).unwrap();
        let grid = TimeGrid::new(0.01, 40).unwrap();
        let cfg = NewtonConfig::default();
        let runs: Vec<_> = [0.02, 0.05, 0.08]
            .iter()
            .map(|&alpha| {
                let (s, y) = build_heat_fom(&HeatProblemSpec::new(alpha)).unwrap();
                integrate_implicit_euler(&s, &y, &grid, &cfg).unwrap()
            })
            .collect();
        let pod = compute_pod_basis(&assemble_snapshots(&runs, None).unwrap(), 5).unwrap();
        let rom = galerkin_project(&sys, &pod).unwrap();
        let reduced = integrate_implicit_euler(&rom.system, &rom.project(&y0).unwrap(), &grid, &cfg).unwrap();
        let lifted = rom.lift_trajectory(&reduced).unwrap();
        let n = lifted.n();
        for t in 0..=grid.steps {
            for i in 0..n {
                assert!((lifted.value(i, t) - lifted.value(n - 1 - i, t)).abs() < 1e-8);
            }
        }
    }
}
