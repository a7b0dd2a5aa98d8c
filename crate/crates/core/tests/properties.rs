//! Randomized invariants across the library.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use drrnn::dynsys::{integrate_implicit_euler, newton_step_solve, FomSystem, NewtonConfig, Nonlinearity, TimeGrid};
use drrnn::io::table::{read_trajectory_csv, write_trajectory_csv};
use drrnn::net::{DrRnn, Sequence};
use drrnn::problems::two_phase::{initial_saturation, solve_pressure, step_mass_balance, well_rates};
use drrnn::problems::{build_problem123, sequential_implicit_run, OdeFamilySpec, OdeVariant, ThreeModeField, TwoPhaseSpec};
use drrnn::reduction::{build_deim_operator, compute_pod_basis, deim_select, PodBasis, SnapshotMatrix};
use drrnn::uq::{sample_parameters, EnsembleSpec};

fn matrix(n: usize, m: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(range, n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
}

fn vector(n: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(range, n).prop_map(DVector::from_vec)
}

fn three_mode() -> Arc<FomSystem> {
    Arc::new(
        FomSystem::zero(3)
            .with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField)))
            .unwrap(),
    )
}

/// Random linear system plus the three-mode field when n = 3.
fn system_strategy() -> impl Strategy<Value = FomSystem> {
    (1usize..=8).prop_flat_map(|n| {
        (matrix(n, n, -1.0..1.0), vector(n, -0.5..0.5)).prop_map(move |(a, b)| {
            let mut sys = FomSystem::new(a).unwrap();
            if n == 3 {
                sys = sys.with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField))).unwrap();
            }
            sys.with_forcing(b).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_jacobian_matches_central_differences(
        sys in system_strategy(),
        seed in vector(16, -1.0..1.0),
        dt in 0.01f64..0.5,
    ) {
        let n = sys.n();
        let y = seed.rows(0, n).into_owned();
        let y_prev = seed.rows(8, n).into_owned();
        let jac = sys.residual_jacobian(&y, dt).unwrap();
        for j in 0..n {
            let h = 1e-6 * y[j].abs().max(1.0);
            let mut plus = y.clone();
            plus[j] += h;
            let mut minus = y.clone();
            minus[j] -= h;
            let fd = (sys.assemble_residual(&plus, &y_prev, dt).unwrap()
                - sys.assemble_residual(&minus, &y_prev, dt).unwrap())
                / (2.0 * h);
            let err = (jac.column(j) - &fd).amax() / jac.column(j).amax().max(fd.amax()).max(1.0);
            prop_assert!(err < 1e-5, "column {j}: {err}");
        }
    }

    #[test]
    fn newton_success_meets_tolerance(sys in system_strategy(), y0 in vector(8, -1.0..1.0), dt in 0.01f64..0.2) {
        let y_prev = y0.rows(0, sys.n()).into_owned();
        let cfg = NewtonConfig::default();
        if let Ok((y, stats)) = newton_step_solve(&sys, &y_prev, dt, &cfg) {
            prop_assert!(stats.final_residual_norm <= cfg.tol);
            let r = sys.assemble_residual(&y, &y_prev, dt).unwrap().norm();
            prop_assert_eq!(r, stats.final_residual_norm);
        }
    }

    #[test]
    fn integration_is_deterministic(x in -1.0f64..1.0) {
        let (sys, y0) = build_problem123(&OdeFamilySpec::new(OdeVariant::P1, vec![x]).unwrap()).unwrap();
        let grid = TimeGrid::new(0.1, 30).unwrap();
        let a = integrate_implicit_euler(&sys, &y0, &grid, &NewtonConfig::default()).unwrap();
        let b = integrate_implicit_euler(&sys, &y0, &grid, &NewtonConfig::default()).unwrap();
        prop_assert_eq!(a.states(), b.states());
        prop_assert_eq!(a.initial(), y0);
    }

    #[test]
    fn pressure_divergence_matches_sources(
        s in prop::collection::vec(0.2f64..0.8, 64),
        k in prop::collection::vec(0.2f64..5.0, 64),
    ) {
        let spec = TwoPhaseSpec { permeability: k, ..TwoPhaseSpec::default() };
        let field = solve_pressure(&s, &spec).unwrap();
        let q = well_rates(&spec);
        for i in 0..64 {
            prop_assert!((field.velocity[i + 1] - field.velocity[i] - q[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn trajectory_csv_round_trip_is_bitwise(states in matrix(3, 6, -1e6..1e6), dt in 1e-3f64..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = drrnn::dynsys::Trajectory::from_states(states, TimeGrid::new(dt, 5).unwrap()).unwrap();
        write_trajectory_csv(&traj, &path).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        prop_assert_eq!(back.states(), traj.states());
    }

    #[test]
    fn pod_basis_is_orthonormal_and_sorted(data in matrix(12, 30, -1.0..1.0), r in 1usize..12) {
        let x = SnapshotMatrix { data, labels: (0..30).map(|j| (0, j)).collect() };
        let basis = compute_pod_basis(&x, r).unwrap();
        let gram = basis.basis.transpose() * &basis.basis;
        prop_assert!((gram - DMatrix::identity(r, r)).amax() < 1e-10);
        let sv = &basis.singular_values;
        prop_assert!(sv.iter().all(|s| *s >= 0.0));
        prop_assert!(sv.windows(2).all(|w| w[1] <= w[0]));
        let y = &basis.basis * DVector::from_fn(r, |i, _| i as f64 - 1.5);
        prop_assert!((basis.lift(&basis.project(&y)) - &y).amax() < 1e-10);
    }

    #[test]
    fn deim_interpolates_sampled_rows(raw in matrix(20, 6, -1.0..1.0), f in vector(20, -1.0..1.0), m in 1usize..=6) {
        let v = raw.columns(0, m).into_owned().qr().q();
        let indices = deim_select(&v).unwrap();
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), m);
        prop_assert!(indices.iter().all(|&i| i < 20));
        let identity = PodBasis { basis: DMatrix::identity(20, 20), singular_values: vec![1.0; 20] };
        let op = build_deim_operator(&v, &indices, &identity).unwrap();
        prop_assert!(op.condition.is_finite());
        let fi = op.interpolate(&f);
        for &i in &indices {
            prop_assert!((fi[i] - f[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn drrnn_preserves_fixed_points(
        w in vector(3, -1.0..1.0),
        eta in prop::collection::vec(0.01f64..1.0, 0..4),
        dt in 0.01f64..0.5,
    ) {
        let mut model = DrRnn::new(three_mode(), eta.len() + 1, dt).unwrap();
        model.w = w;
        model.eta = eta;
        // F vanishes where y3 = 0 and |y1| = |y2|.
        for y in [DVector::zeros(3), DVector::from_vec(vec![0.7, 0.7, 0.0]), DVector::from_vec(vec![-0.3, 0.3, 0.0])] {
            prop_assert_eq!(model.forward_step(&y).unwrap(), y);
        }
    }

    #[test]
    fn drrnn_step_multiplier_is_positive(y in vector(3, -1.0..1.0), eta in 1e-3f64..1.0, dt in 0.01f64..0.5) {
        let mut model = DrRnn::new(three_mode(), 2, dt).unwrap();
        model.eta = vec![eta];
        let y_prev = DVector::from_vec(vec![1.0, 0.1, 0.0]);
        let r = three_mode().assemble_residual(&y, &y_prev, dt).unwrap();
        let (next, g) = model.layer_update(&y, &y_prev, 2, 0.0).unwrap();
        prop_assert!(g >= 0.0);
        let scale = (&y - &next).dot(&r) / r.norm_squared().max(1e-300);
        prop_assert!(scale.is_finite());
        prop_assert!(r.norm() == 0.0 || scale > 0.0);
    }

    #[test]
    fn drrnn_parameter_count_formula(n in 1usize..6, k in 1usize..6) {
        let sys = Arc::new(FomSystem::zero(n));
        let model = DrRnn::new(sys.clone(), k, 0.1).unwrap();
        prop_assert_eq!(model.count_parameters(), n + k - 1);
        let trained_u = DrRnn::new(sys, k, 0.1).unwrap().with_trainable_u(true);
        prop_assert_eq!(trained_u.count_parameters(), n + k - 1 + n * n);
    }

    #[test]
    fn drrnn_rollout_is_pure(y0 in vector(3, -1.0..1.0), eta in prop::collection::vec(0.01f64..0.4, 3)) {
        let mut model = DrRnn::new(three_mode(), 4, 0.1).unwrap();
        model.eta = eta;
        let a = model.rollout(&y0, 20).unwrap();
        let b = model.rollout(&y0, 20).unwrap();
        prop_assert_eq!(a.states(), b.states());
        let seq = Sequence::new(y0.clone(), DMatrix::zeros(3, 20)).unwrap();
        prop_assert_eq!(model.predict(&seq).unwrap(), a.states().columns(1, 20).into_owned());
    }

    #[test]
    fn split_is_disjoint_and_reproducible(count in 1usize..200, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let train = (a * count as f64) as usize;
        let test = ((count - train) as f64 * b) as usize;
        let spec = EnsembleSpec { bounds: vec![(-1.0, 1.0), (0.0, 2.0)], count, seed, split: (train, test) };
        let first = sample_parameters(&spec).unwrap();
        prop_assert_eq!(&first, &sample_parameters(&spec).unwrap());
        prop_assert!(spec.train_range().end <= spec.test_range().start);
        prop_assert!(spec.test_range().end <= count);
        prop_assert!(first.iter().all(|p| (-1.0..=1.0).contains(&p[0]) && (0.0..=2.0).contains(&p[1])));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn two_phase_steps_conserve_mass_and_stay_in_bounds(phi in 0.18f64..0.38, dt in 0.01f64..0.06) {
        let spec = TwoPhaseSpec::default().with_porosity(phi);
        let cfg = NewtonConfig::default();
        let traj = sequential_implicit_run(&spec, &TimeGrid::new(dt, 30).unwrap(), &cfg, 1).unwrap();
        prop_assert_eq!(traj.initial(), initial_saturation(&spec));
        let (lo, hi) = spec.saturation_bounds();
        prop_assert!(traj.states().iter().all(|s| (lo..=hi).contains(s)));
        let tol = cfg.tol * (spec.n_cells as f64).sqrt() * phi * spec.dx();
        for k in 1..=30 {
            let (stored, net) = step_mass_balance(&spec, &traj.state(k - 1), &traj.state(k), dt);
            prop_assert!((stored - net).abs() <= tol, "step {k}: {stored} vs {net}");
        }
    }
}
