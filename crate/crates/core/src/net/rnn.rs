//! Baseline Elman network `h' = tanh(U h + V [a; 1])`, `y = W h'`.
//!
//! This is the transposed form of `h' = tanh(U^T h + V^T [a; 1])`. For the
//! autonomous problems the input is the initial state at the first step and
//! zero afterwards; the hidden state starts at zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{check_dim, Error, Result};
use crate::net::data::Sequence;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardRnn {
    /// `m x m`.
    pub u: DMatrix<f64>,
    /// `m x (input + 1)`, the last column is the bias.
    pub v: DMatrix<f64>,
    /// `output x m`.
    pub w: DMatrix<f64>,
}

impl StandardRnn {
    pub fn zeros(hidden: usize, input: usize, output: usize) -> Self {
        StandardRnn {
            u: DMatrix::zeros(hidden, hidden),
            v: DMatrix::zeros(hidden, input + 1),
            w: DMatrix::zeros(output, hidden),
        }
    }

    /// Glorot-uniform weights.
    pub fn random<R: Rng + ?Sized>(hidden: usize, input: usize, output: usize, rng: &mut R) -> Result<Self> {
        let mut glorot = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).map_err(|e| Error::invalid("rnn shape", e.to_string()))?;
            Ok(DMatrix::from_fn(rows, cols, |_, _| dist.sample(rng)))
        };
        Ok(StandardRnn {
            u: glorot(hidden, hidden)?,
            v: glorot(hidden, input + 1)?,
            w: glorot(output, hidden)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.u.nrows()
    }

    pub fn input(&self) -> usize {
        self.v.ncols() - 1
    }

    pub fn count_parameters(&self) -> usize {
        self.u.len() + self.v.len() + self.w.len()
    }

    pub fn params(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.count_parameters(),
            self.u.iter().chain(self.v.iter()).chain(self.w.iter()).copied(),
        )
    }

    pub fn set_params(&mut self, p: &DVector<f64>) -> Result<()> {
        check_dim("StandardRnn::set_params", self.count_parameters(), p.len())?;
        let (nu, nv) = (self.u.len(), self.v.len());
        let s = p.as_slice();
        self.u.copy_from_slice(&s[..nu]);
        self.v.copy_from_slice(&s[nu..nu + nv]);
        self.w.copy_from_slice(&s[nu + nv..]);
        Ok(())
    }

    fn augmented(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(a.len() + 1);
        x.rows_mut(0, a.len()).copy_from(a);
        x[a.len()] = 1.0;
        x
    }

    pub fn forward_step(&self, h: &DVector<f64>, a: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim("StandardRnn hidden", self.hidden(), h.len())?;
        check_dim("StandardRnn input", self.input(), a.len())?;
        let h_next = (&self.u * h + &self.v * self.augmented(a)).map(f64::tanh);
        let y = &self.w * &h_next;
        Ok((h_next, y))
    }

    fn input_at(&self, seq: &Sequence, t: usize) -> DVector<f64> {
        if t == 0 {
            seq.initial.clone()
        } else {
            DVector::zeros(self.input())
        }
    }

    pub fn predict(&self, seq: &Sequence) -> Result<DMatrix<f64>> {
        let mut h = DVector::zeros(self.hidden());
        let mut out = DMatrix::zeros(self.w.nrows(), seq.steps());
        for t in 0..seq.steps() {
            let (h_next, y) = self.forward_step(&h, &self.input_at(seq, t))?;
            out.set_column(t, &y);
            h = h_next;
        }
        Ok(out)
    }

    pub fn sequence_loss_and_gradient(&self, seq: &Sequence) -> Result<(f64, DVector<f64>)> {
        check_dim("StandardRnn output", self.w.nrows(), seq.targets.nrows())?;
        let steps = seq.steps();
        let mut hs = vec![DVector::zeros(self.hidden())];
        let mut errors = Vec::with_capacity(steps);
        let mut loss = 0.0;
        for t in 0..steps {
            let (h, y) = self.forward_step(&hs[t], &self.input_at(seq, t))?;
            let e = y - seq.targets.column(t);
            loss += e.norm_squared();
            errors.push(e);
            hs.push(h);
        }
        let mut du = DMatrix::zeros(self.u.nrows(), self.u.ncols());
        let mut dv = DMatrix::zeros(self.v.nrows(), self.v.ncols());
        let mut dw = DMatrix::zeros(self.w.nrows(), self.w.ncols());
        let mut carry = DVector::zeros(self.hidden());
        for t in (0..steps).rev() {
            let y_bar = &errors[t] * 2.0;
            let h = &hs[t + 1];
            dw.ger(1.0, &y_bar, h, 1.0);
            let h_bar = self.w.tr_mul(&y_bar) + &carry;
            let z_bar = h_bar.zip_map(h, |g, hv| g * (1.0 - hv * hv));
            du.ger(1.0, &z_bar, &hs[t], 1.0);
            dv.ger(1.0, &z_bar, &self.augmented(&self.input_at(seq, t)), 1.0);
            carry = self.u.tr_mul(&z_bar);
        }
        let grad = DVector::from_iterator(
            self.count_parameters(),
            du.iter().chain(dv.iter()).chain(dw.iter()).copied(),
        );
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("RNN gradient".into()));
        }
        Ok((loss, grad))
    }
}
