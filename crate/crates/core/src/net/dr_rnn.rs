//! The deep residual recurrent network.
//!
//! Each time step starts from `y^0 = y_t` and applies `K` layers that drive
//! the implicit Euler residual `r(y, y_t)` of a bound system towards zero:
//!
//! ```text
//! k = 1:  y^1 = y^0 - w * tanh(U r(y^0))
//! k > 1:  G_k = gamma |r(y^{k-1})|^2 + zeta G_{k-1}
//!         y^k = y^{k-1} - eta_k / sqrt(G_k + eps) r(y^{k-1})
//! ```
//!
//! `G_0 = 0` at every time step and the output matrix is the identity.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dynsys::{FomSystem, TimeGrid, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::net::data::Sequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrRnnHyper {
    pub zeta: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl Default for DrRnnHyper {
    fn default() -> Self {
        DrRnnHyper {
            zeta: 0.9,
            gamma: 0.1,
            eps: 1e-8,
        }
    }
}

impl DrRnnHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps", "must be > 0"));
        }
        if !(self.zeta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::invalid("zeta/gamma", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DrRnn {
    pub w: DVector<f64>,
    /// `eta_2 .. eta_K`.
    pub eta: Vec<f64>,
    pub u: DMatrix<f64>,
    pub train_u: bool,
    pub hyper: DrRnnHyper,
    pub dt: f64,
    system: Arc<FomSystem>,
}

/// Per-step forward record needed by the backward pass.
struct StepTape {
    /// `y^0 .. y^{K-1}`: the states each residual was evaluated at.
    inputs: Vec<DVector<f64>>,
    residuals: Vec<DVector<f64>>,
    /// `G_1 .. G_K`.
    g: Vec<f64>,
    /// `tanh(U r_1)`.
    act: DVector<f64>,
}

impl DrRnn {
    /// `layers` layers with `w = 0`, `eta = 0.1` and `U = I`.
    pub fn new(system: Arc<FomSystem>, layers: usize, dt: f64) -> Result<Self> {
        if layers == 0 {
            return Err(Error::invalid("layers", "need at least one layer"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        let n = system.n();
        Ok(DrRnn {
            w: DVector::zeros(n),
            eta: vec![0.1; layers - 1],
            u: DMatrix::identity(n, n),
            train_u: false,
            hyper: DrRnnHyper::default(),
            dt,
            system,
        })
    }

    pub fn with_trainable_u(mut self, train_u: bool) -> Self {
        self.train_u = train_u;
        self
    }

    pub fn with_hyper(mut self, hyper: DrRnnHyper) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn layers(&self) -> usize {
        self.eta.len() + 1
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn system(&self) -> &Arc<FomSystem> {
        &self.system
    }

    pub fn rebind(&mut self, system: Arc<FomSystem>) -> Result<()> {
        check_dim("DrRnn::rebind", self.n(), system.n())?;
        self.system = system;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let n = self.n();
        check_dim("DrRnn system dimension", n, self.system.n())?;
        check_dim("DrRnn U rows", n, self.u.nrows())?;
        check_dim("DrRnn U cols", n, self.u.ncols())?;
        Ok(())
    }

    /// Trainable scalars: `n + K - 1`, plus `n^2` when `U` is trained.
    pub fn count_parameters(&self) -> usize {
        let n = self.n();
        n + self.eta.len() + if self.train_u { n * n } else { 0 }
    }

    /// Flat parameter vector `[w, eta, vec(U)?]`.
    pub fn params(&self) -> DVector<f64> {
        let mut p = Vec::with_capacity(self.count_parameters());
        p.extend(self.w.iter());
        p.extend(self.eta.iter());
        if self.train_u {
            p.extend(self.u.iter());
        }
        DVector::from_vec(p)
    }

    pub fn set_params(&mut self, p: &DVector<f64>) -> Result<()> {
        check_dim("DrRnn::set_params", self.count_parameters(), p.len())?;
        let n = self.n();
        let k = self.eta.len();
        self.w.copy_from(&p.rows(0, n));
        for (i, e) in self.eta.iter_mut().enumerate() {
            *e = p[n + i];
        }
        if self.train_u {
            self.u.copy_from_slice(&p.as_slice()[n + k..]);
        }
        Ok(())
    }

    /// One layer applied to `y` given the step's starting state `y_prev`.
    /// Returns the new state and `G_k`.
    pub fn layer_update(
        &self,
        y: &DVector<f64>,
        y_prev: &DVector<f64>,
        k: usize,
        g_prev: f64,
    ) -> Result<(DVector<f64>, f64)> {
        self.layer_update_with(&self.system, y, y_prev, k, g_prev)
    }

    fn layer_update_with(
        &self,
        system: &FomSystem,
        y: &DVector<f64>,
        y_prev: &DVector<f64>,
        k: usize,
        g_prev: f64,
    ) -> Result<(DVector<f64>, f64)> {
        if k == 0 || k > self.layers() {
            return Err(Error::invalid("k", format!("layer {k} outside 1..={}", self.layers())));
        }
        let r = system.assemble_residual(y, y_prev, self.dt)?;
        let g = self.hyper.gamma * r.norm_squared() + self.hyper.zeta * g_prev;
        let next = if k == 1 {
            y - self.w.component_mul(&(&self.u * &r).map(f64::tanh))
        } else {
            y - r * (self.eta[k - 2] / (g + self.hyper.eps).sqrt())
        };
        Ok((next, g))
    }

    pub fn forward_step(&self, y_t: &DVector<f64>) -> Result<DVector<f64>> {
        self.forward_step_with(&self.system, y_t)
    }

    pub fn forward_step_with(&self, system: &FomSystem, y_t: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("DrRnn::forward_step", self.n(), y_t.len())?;
        let mut y = y_t.clone();
        let mut g = 0.0;
        for k in 1..=self.layers() {
            let (next, gk) = self.layer_update_with(system, &y, y_t, k, g)?;
            y = next;
            g = gk;
        }
        Ok(y)
    }

    /// Rolls the network forward `steps` times from `y0`; aborts on the first
    /// non-finite state.
    pub fn rollout(&self, y0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
        self.rollout_with(&self.system, y0, steps)
    }

    pub fn rollout_with(&self, system: &FomSystem, y0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
        check_dim("DrRnn::rollout", self.n(), y0.len())?;
        let mut states = DMatrix::zeros(self.n(), steps + 1);
        states.set_column(0, y0);
        let mut y = y0.clone();
        for step in 1..=steps {
            y = self.forward_step_with(system, &y).map_err(|e| Error::at_step(step, e))?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::at_step(step, Error::NonFinite("DR-RNN rollout state".into())));
            }
            states.set_column(step, &y);
        }
        Trajectory::from_states(states, TimeGrid::new(self.dt, steps)?)
    }

    fn forward_taped(&self, system: &FomSystem, y_t: &DVector<f64>) -> Result<(DVector<f64>, StepTape)> {
        let k_max = self.layers();
        let mut tape = StepTape {
            inputs: Vec::with_capacity(k_max),
            residuals: Vec::with_capacity(k_max),
            g: Vec::with_capacity(k_max),
            act: DVector::zeros(0),
        };
        let mut y = y_t.clone();
        let mut g = 0.0;
        for k in 1..=k_max {
            let r = system.assemble_residual(&y, y_t, self.dt)?;
            g = self.hyper.gamma * r.norm_squared() + self.hyper.zeta * g;
            let next = if k == 1 {
                let act = (&self.u * &r).map(f64::tanh);
                let next = &y - self.w.component_mul(&act);
                tape.act = act;
                next
            } else {
                &y - &r * (self.eta[k - 2] / (g + self.hyper.eps).sqrt())
            };
            tape.inputs.push(y);
            tape.residuals.push(r);
            tape.g.push(g);
            y = next;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DR-RNN forward state".into()));
        }
        Ok((y, tape))
    }

    /// Backward pass through one step. `y_bar` is the adjoint of the step's
    /// output; returns the adjoint of `y_t` and accumulates parameter
    /// gradients into `grad` (laid out as [`DrRnn::params`]).
    fn backward_step(&self, system: &FomSystem, tape: &StepTape, mut y_bar: DVector<f64>, grad: &mut DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let DrRnnHyper { gamma, zeta, eps } = self.hyper;
        let mut prev_bar = DVector::<f64>::zeros(n);
        let mut g_bar = 0.0;
        for k in (2..=self.layers()).rev() {
            let idx = k - 1;
            let r = &tape.residuals[idx];
            let g = tape.g[idx];
            let eta = self.eta[k - 2];
            let root = (g + eps).sqrt();
            let s = eta / root;
            let mut r_bar = &y_bar * (-s);
            let s_bar = -y_bar.dot(r);
            grad[n + k - 2] += s_bar / root;
            let g_total = g_bar + s_bar * eta * (-0.5) / (root * root * root);
            r_bar.axpy(2.0 * gamma * g_total, r, 1.0);
            g_bar = zeta * g_total;
            y_bar += system.residual_jacobian_tr_mul(&tape.inputs[idx], &r_bar, self.dt);
            prev_bar -= &r_bar;
        }
        let r1 = &tape.residuals[0];
        let a = &tape.act;
        for i in 0..n {
            grad[i] -= y_bar[i] * a[i];
        }
        let z_bar = DVector::from_fn(n, |i, _| -y_bar[i] * self.w[i] * (1.0 - a[i] * a[i]));
        if self.train_u {
            let offset = n + self.eta.len();
            for j in 0..n {
                for i in 0..n {
                    grad[offset + j * n + i] += z_bar[i] * r1[j];
                }
            }
        }
        let mut r_bar = self.u.tr_mul(&z_bar);
        r_bar.axpy(2.0 * gamma * g_bar, r1, 1.0);
        y_bar += system.residual_jacobian_tr_mul(&tape.inputs[0], &r_bar, self.dt);
        prev_bar -= &r_bar;
        y_bar + prev_bar
    }

    /// Sum of squared errors of one sequence and its gradient, by backprop
    /// through every step and layer.
    pub fn sequence_loss_and_gradient(&self, seq: &Sequence) -> Result<(f64, DVector<f64>)> {
        let system: &FomSystem = seq.system.as_deref().unwrap_or(&self.system);
        check_dim("DrRnn sequence state dimension", self.n(), seq.n())?;
        let steps = seq.steps();
        let mut grad = DVector::zeros(self.count_parameters());
        let mut tapes = Vec::with_capacity(steps);
        let mut errors = Vec::with_capacity(steps);
        let mut y = seq.initial.clone();
        let mut loss = 0.0;
        for t in 0..steps {
            let (next, tape) = self.forward_taped(system, &y).map_err(|e| Error::at_step(t + 1, e))?;
            let err = &next - seq.targets.column(t);
            loss += err.norm_squared();
            tapes.push(tape);
            errors.push(err);
            y = next;
        }
        let mut carry = DVector::zeros(self.n());
        for t in (0..steps).rev() {
            let y_bar = &carry + &errors[t] * 2.0;
            carry = self.backward_step(system, &tapes[t], y_bar, &mut grad);
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("DR-RNN gradient".into()));
        }
        Ok((loss, grad))
    }

    /// Predicted `y_1 .. y_T` for a sequence.
    pub fn predict(&self, seq: &Sequence) -> Result<DMatrix<f64>> {
        let system: &FomSystem = seq.system.as_deref().unwrap_or(&self.system);
        let traj = self.rollout_with(system, &seq.initial, seq.steps())?;
        Ok(traj.states().columns(1, seq.steps()).into_owned())
    }
}

/// How `U` starts out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UInit {
    /// Fixed identity, not trained.
    Identity,
    /// Trained, entries drawn from `U[lo, hi]`.
    Uniform(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub w_std: f64,
    pub eta_range: (f64, f64),
    pub u: UInit,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            w_std: 0.1,
            eta_range: (0.1, 0.4),
            u: UInit::Identity,
        }
    }
}

impl InitConfig {
    pub fn rom() -> Self {
        InitConfig {
            u: UInit::Uniform(0.1, 0.5),
            ..Default::default()
        }
    }
}

/// Draws `w ~ N(0, w_std^2)`, `eta_k ~ U[eta_range]` and `U` per `init`.
pub fn initialize_model<R: Rng + ?Sized>(template: &DrRnn, init: &InitConfig, rng: &mut R) -> Result<DrRnn> {
    let normal = Normal::new(0.0, init.w_std).map_err(|e| Error::invalid("w_std", e.to_string()))?;
    let (lo, hi) = init.eta_range;
    let eta_dist = Uniform::new_inclusive(lo, hi).map_err(|e| Error::invalid("eta_range", e.to_string()))?;
    let mut model = template.clone();
    let n = model.n();
    model.w = DVector::from_fn(n, |_, _| normal.sample(rng));
    for e in model.eta.iter_mut() {
        *e = eta_dist.sample(rng);
    }
    match init.u {
        UInit::Identity => {
            model.u = DMatrix::identity(n, n);
            model.train_u = false;
        }
        UInit::Uniform(a, b) => {
            let dist = Uniform::new_inclusive(a, b).map_err(|e| Error::invalid("u_range", e.to_string()))?;
            model.u = DMatrix::from_fn(n, n, |_, _| dist.sample(rng));
            model.train_u = true;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{newton_step_solve, NewtonConfig, Nonlinearity};
    use crate::problems::ode3::ThreeModeField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decay() -> Arc<FomSystem> {
        Arc::new(FomSystem::new(DMatrix::from_element(1, 1, -1.0)).unwrap())
    }

    fn three_mode() -> Arc<FomSystem> {
        Arc::new(
            FomSystem::zero(3)
                .with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField)))
                .unwrap(),
        )
    }

    fn v(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    #[test]
    fn zero_residual_layer_is_identity() {
        let model = DrRnn::new(FomSystem::zero(2).into(), 3, 0.1).unwrap();
        let mut model = model;
        model.w = v(&[0.7, -0.3]);
        let y = v(&[0.4, 1.2]);
        let (out, g) = model.layer_update(&y, &y, 1, 0.0).unwrap();
        assert_eq!(out, y);
        assert_eq!(g, 0.0);
        assert_eq!(model.forward_step(&y).unwrap(), y);
    }

    #[test]
    fn step_scale_arithmetic() {
        // |r|^2 = 4 with dt A = 0 and y - y_prev = (2, 0)
        let mut model = DrRnn::new(FomSystem::zero(2).into(), 2, 0.1).unwrap();
        model.eta = vec![0.2];
        let y = v(&[2.0, 0.0]);
        let y_prev = v(&[0.0, 0.0]);
        let (out, g) = model.layer_update(&y, &y_prev, 2, 0.0).unwrap();
        assert!((g - 0.4).abs() < 1e-15);
        let scale = 0.2 / (0.4f64 + 1e-8).sqrt();
        assert!((scale - 0.316228).abs() < 1e-6);
        assert!((out[0] - (2.0 - 2.0 * scale)).abs() < 1e-15);
    }

    #[test]
    fn two_layers_by_hand_on_scalar_decay() {
        let mut model = DrRnn::new(decay(), 2, 0.1).unwrap();
        model.w = v(&[0.3]);
        model.eta = vec![0.25];
        let y0 = 0.8f64;
        let r1 = 0.1 * y0; // y - y0 + dt y at y = y0
        let y1 = y0 - 0.3 * r1.tanh();
        let g1 = 0.1 * r1 * r1;
        let r2 = y1 - y0 + 0.1 * y1;
        let g2 = 0.1 * r2 * r2 + 0.9 * g1;
        let y2 = y1 - 0.25 / (g2 + 1e-8).sqrt() * r2;
        let out = model.forward_step(&v(&[y0])).unwrap();
        assert!((out[0] - y2).abs() < 1e-14);
    }

    #[test]
    fn many_small_layers_approach_implicit_euler() {
        // The k > 1 update has magnitude eta |r| / sqrt(G) ~ eta / sqrt(gamma),
        // independent of the residual's scale, so a constant eta settles into
        // a limit cycle; a decaying schedule converges.
        let (newton, _) = newton_step_solve(&decay(), &v(&[1.0]), 0.1, &NewtonConfig::default()).unwrap();
        let mut model = DrRnn::new(decay(), 64, 0.1).unwrap();
        model.eta = vec![0.1; 63];
        let constant = model.forward_step(&v(&[1.0])).unwrap()[0];
        assert!((constant - 0.860_585_043_636_892_7).abs() < 1e-12);
        model.eta = (0..63).map(|k| 0.1 * 0.9f64.powi(k)).collect();
        let decaying = model.forward_step(&v(&[1.0])).unwrap()[0];
        assert!((decaying - newton[0]).abs() < 1e-6, "{decaying} vs {}", newton[0]);
    }

    #[test]
    fn rollout_is_deterministic_and_handles_zero_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = initialize_model(&DrRnn::new(three_mode(), 4, 0.1).unwrap(), &InitConfig::default(), &mut rng).unwrap();
        let y0 = v(&[1.0, 0.05, 0.0]);
        assert_eq!(model.rollout(&y0, 0).unwrap().states().ncols(), 1);
        let a = model.rollout(&y0, 50).unwrap();
        let b = model.rollout(&y0, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rollout_reports_overflow_step() {
        let grow = Arc::new(FomSystem::new(DMatrix::from_element(1, 1, 1.0)).unwrap());
        let mut model = DrRnn::new(grow, 2, 1.0).unwrap();
        model.w = v(&[1e308]);
        let err = model.rollout(&v(&[1e308]), 5).unwrap_err();
        assert!(matches!(err, Error::AtStep { step: 1, .. }), "{err}");
    }

    #[test]
    fn parameter_counts() {
        let sys = three_mode();
        for (k, d) in [(1, 3), (2, 4), (4, 6)] {
            assert_eq!(DrRnn::new(sys.clone(), k, 0.1).unwrap().count_parameters(), d);
        }
        assert_eq!(DrRnn::new(sys, 1, 0.1).unwrap().with_trainable_u(true).count_parameters(), 12);
    }

    #[test]
    fn initialization_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let template = DrRnn::new(Arc::new(FomSystem::zero(1000)), 2, 0.1).unwrap();
        let mut w = Vec::with_capacity(100_000);
        for _ in 0..100 {
            let m = initialize_model(&template, &InitConfig::default(), &mut rng).unwrap();
            assert!(m.eta.iter().all(|e| (0.1..=0.4).contains(e)));
            w.extend(m.w.iter().copied());
        }
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let std = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64).sqrt();
        assert!((std - 0.1).abs() < 0.002, "{std}");

        let small = DrRnn::new(three_mode(), 50, 0.1).unwrap();
        let a = initialize_model(&small, &InitConfig::rom(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = initialize_model(&small, &InitConfig::rom(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(a.eta.iter().all(|e| (0.1..=0.4).contains(e)));
        assert!(a.u.iter().all(|e| (0.1..=0.5).contains(e)));
        assert!(a.train_u);
    }

    #[test]
    fn scalar_one_layer_one_step_gradient_by_hand() {
        // y1 = y0 - w tanh(u r), r = dt y0 (decay), loss = (y1 - target)^2
        let mut model = DrRnn::new(decay(), 1, 0.1).unwrap().with_trainable_u(true);
        model.w = v(&[0.4]);
        model.u = DMatrix::from_element(1, 1, 1.5);
        let (y0, target) = (0.9f64, 0.7f64);
        let seq = Sequence::new(v(&[y0]), DMatrix::from_element(1, 1, target)).unwrap();
        let (loss, grad) = model.sequence_loss_and_gradient(&seq).unwrap();
        let r = 0.1 * y0;
        let a = (1.5 * r).tanh();
        let y1 = y0 - 0.4 * a;
        let e = y1 - target;
        assert!((loss - e * e).abs() < 1e-12);
        assert!((grad[0] - (-2.0 * e * a)).abs() < 1e-12);
        let du = 2.0 * e * (-0.4) * (1.0 - a * a) * r;
        assert!((grad[1] - du).abs() < 1e-12);
    }

    fn random_system(n: usize, rng: &mut ChaCha8Rng) -> Arc<FomSystem> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut sys = FomSystem::new(a).unwrap();
        if n == 3 {
            sys = sys.with_nonlinearity(Nonlinearity::Field(Arc::new(ThreeModeField))).unwrap();
        }
        Arc::new(sys.with_forcing(DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5))).unwrap())
    }

    #[test]
    fn zero_length_sequence_has_zero_gradient() {
        let model = DrRnn::new(three_mode(), 3, 0.1).unwrap();
        let seq = Sequence::new(v(&[1.0, 0.0, 0.0]), DMatrix::zeros(3, 0)).unwrap();
        let (loss, grad) = model.sequence_loss_and_gradient(&seq).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    /// Worst relative discrepancy between BPTT and central differences.
    pub(crate) fn gradient_check_error(model: &DrRnn, seq: &Sequence) -> f64 {
        let (_, grad) = model.sequence_loss_and_gradient(seq).unwrap();
        let p = model.params();
        let mut worst: f64 = 0.0;
        let scale = grad.amax().max(1e-8);
        for i in 0..p.len() {
            let h = 1e-6 * p[i].abs().max(1.0);
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut pp = p.clone();
            pp[i] += h;
            plus.set_params(&pp).unwrap();
            pp[i] -= 2.0 * h;
            minus.set_params(&pp).unwrap();
            let fd = (plus.sequence_loss_and_gradient(seq).unwrap().0 - minus.sequence_loss_and_gradient(seq).unwrap().0)
                / (2.0 * h);
            let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3 * scale);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn bptt_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..25 {
            let n = 1 + trial % 3;
            let k = 1 + trial % 4;
            let steps = 1 + trial % 5;
            let sys = random_system(n, &mut rng);
            let template = DrRnn::new(sys, k, 0.1).unwrap();
            let init = if trial % 2 == 0 { InitConfig::rom() } else { InitConfig::default() };
            let model = initialize_model(&template, &init, &mut rng).unwrap();
            let seq = Sequence::new(
                DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
                DMatrix::from_fn(n, steps, |_, _| rng.random_range(-1.0..1.0)),
            )
            .unwrap();
            let err = gradient_check_error(&model, &seq);
            assert!(err < 1e-5, "trial {trial} (n={n}, K={k}, T={steps}): {err}");
        }
    }
}
