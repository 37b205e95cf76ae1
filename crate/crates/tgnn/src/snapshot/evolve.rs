//! Evolving-weight graph convolutions: the GCN weight matrix is advanced
//! through time by a recurrent cell instead of node embeddings.

use autodiff::{glorot_uniform, Ctx, ParamId, ParamStore, Value};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{Activation, DenseGru, DenseLstm};

use super::cells::{scale_by_tanh_scores, top_k_rows};

/// Weight evolution treating W as both input and output of an LSTM cell,
/// column-wise: each output column is one sequence element, with cell state
/// kept per column.
pub struct EvolveO {
    pub w0: ParamId,
    lstm: DenseLstm,
    pub f_in: usize,
    pub f_out: usize,
}

/// Evolution state carried across snapshots (transposed layout: one row per
/// output column).
pub struct EvolveOState {
    pub w_t: Value,
    pub cell: Value,
}

impl EvolveO {
    pub fn new(store: &mut ParamStore, name: &str, f_in: usize, f_out: usize, rng: &mut ChaCha8Rng) -> Self {
        EvolveO {
            w0: store.register(format!("{name}.w0"), &[f_in, f_out], glorot_uniform(f_in, f_out, rng)),
            lstm: DenseLstm::new(store, &format!("{name}.lstm"), f_in, f_in, rng),
            f_in,
            f_out,
        }
    }

    fn init_state(&self, ctx: &mut Ctx) -> Result<EvolveOState> {
        let w = ctx.param(self.w0)?;
        let w_t = ctx.tape.transpose(w)?;
        let cell = ctx.tape.zeros(&[self.f_out, self.f_in])?;
        Ok(EvolveOState { w_t, cell })
    }

    /// One step: evolve W, then `activation(A_hat X W_t)`.
    pub fn step(
        &self,
        ctx: &mut Ctx,
        x: Value,
        a_hat: Value,
        state: Option<EvolveOState>,
        activation: Option<Activation>,
    ) -> Result<(Value, EvolveOState)> {
        let prev = match state {
            Some(s) => s,
            None => self.init_state(ctx)?,
        };
        let (h_new, c_new) = self.lstm.step(ctx, prev.w_t, prev.w_t, prev.cell)?;
        let w_new = ctx.tape.transpose(h_new)?;
        let ax = ctx.tape.matmul(a_hat, x)?;
        let mut out = ctx.tape.matmul(ax, w_new)?;
        if let Some(act) = activation {
            out = act.apply(ctx, out);
        }
        Ok((
            out,
            EvolveOState {
                w_t: h_new,
                cell: c_new,
            },
        ))
    }
}

/// Weight evolution treating W as the hidden state of a GRU whose input is a
/// top-k summary of the node features.
pub struct EvolveH {
    pub w0: ParamId,
    gru: DenseGru,
    /// Scoring vector for the top-k summary.
    p: ParamId,
    pub f_in: usize,
    pub f_out: usize,
}

pub struct EvolveHState {
    pub w_t: Value,
}

impl EvolveH {
    pub fn new(store: &mut ParamStore, name: &str, f_in: usize, f_out: usize, rng: &mut ChaCha8Rng) -> Self {
        EvolveH {
            w0: store.register(format!("{name}.w0"), &[f_in, f_out], glorot_uniform(f_in, f_out, rng)),
            gru: DenseGru::new(store, &format!("{name}.gru"), f_in, f_in, rng),
            p: store.register(format!("{name}.p"), &[f_in, 1], glorot_uniform(f_in, 1, rng)),
            f_in,
            f_out,
        }
    }

    /// Summarize node features to `f_out` rows: scores `y = X p / |p|`,
    /// top-k rows scaled by `tanh(y)`; zero-padded when `N < f_out`.
    /// Gradients flow through the tanh scaling, not the selection.
    fn summarize(&self, ctx: &mut Ctx, x: Value) -> Result<Value> {
        let n = ctx.tape.shape(x)[0];
        let p = ctx.param(self.p)?;
        let xp = ctx.tape.matmul(x, p)?;
        let psq = ctx.tape.mul(p, p)?;
        let pnorm_sq = ctx.tape.sum(psq, None)?;
        let pnorm = ctx.tape.sqrt(pnorm_sq);
        let ones = ctx.tape.ones(&[n, 1])?;
        let pnorm_col = ctx.tape.matmul(ones, pnorm)?;
        let scores = ctx.tape.div(xp, pnorm_col)?;

        let idx = top_k_rows(ctx.tape.data(scores), self.f_out.min(n));
        let x_sel = ctx.tape.index_select(x, &idx)?;
        let s_sel = ctx.tape.index_select(scores, &idx)?;
        let mut z = scale_by_tanh_scores(ctx, x_sel, s_sel)?;
        if n < self.f_out {
            let pad = ctx.tape.zeros(&[self.f_out - n, self.f_in])?;
            z = ctx.tape.concat(0, &[z, pad])?;
        }
        Ok(z)
    }

    pub fn step(
        &self,
        ctx: &mut Ctx,
        x: Value,
        a_hat: Value,
        state: Option<EvolveHState>,
        activation: Option<Activation>,
    ) -> Result<(Value, EvolveHState)> {
        let w_t_prev = match state {
            Some(s) => s.w_t,
            None => {
                let w = ctx.param(self.w0)?;
                ctx.tape.transpose(w)?
            }
        };
        let z = self.summarize(ctx, x)?;
        let w_t_new = self.gru.step(ctx, z, w_t_prev)?;
        let w_new = ctx.tape.transpose(w_t_new)?;
        let ax = ctx.tape.matmul(a_hat, x)?;
        let mut out = ctx.tape.matmul(ax, w_new)?;
        if let Some(act) = activation {
            out = act.apply(ctx, out);
        }
        Ok((out, EvolveHState { w_t: w_t_new }))
    }
}
