//! Graph-convolutional recurrent cells: every dense map of the standard
//! GRU/LSTM cell is replaced by a Chebyshev graph filter.

use autodiff::{Ctx, ParamId, ParamStore, Value};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::scale_rows;

use super::graphconv::ChebFilter;

/// z = s(Cxz(X) + Chz(H)); r = s(Cxr(X) + Chr(H));
/// n = tanh(Cxn(X) + Chn(r.H)); H' = z.H + (1-z).n
pub struct GConvGruCell {
    xz: ChebFilter,
    hz: ChebFilter,
    xr: ChebFilter,
    hr: ChebFilter,
    xn: ChebFilter,
    hn: ChebFilter,
    pub hidden: usize,
}

impl GConvGruCell {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        k: usize,
        f_in: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(GConvGruCell {
            xz: ChebFilter::new(store, &format!("{name}.xz"), k, f_in, hidden, rng)?,
            hz: ChebFilter::new(store, &format!("{name}.hz"), k, hidden, hidden, rng)?,
            xr: ChebFilter::new(store, &format!("{name}.xr"), k, f_in, hidden, rng)?,
            hr: ChebFilter::new(store, &format!("{name}.hr"), k, hidden, hidden, rng)?,
            xn: ChebFilter::new(store, &format!("{name}.xn"), k, f_in, hidden, rng)?,
            hn: ChebFilter::new(store, &format!("{name}.hn"), k, hidden, hidden, rng)?,
            hidden,
        })
    }

    pub fn step(&self, ctx: &mut Ctx, x: Value, h: Value, l_hat: Value) -> Result<Value> {
        let xz = self.xz.apply(ctx, x, l_hat)?;
        let hz = self.hz.apply(ctx, h, l_hat)?;
        let z_pre = ctx.tape.add(xz, hz)?;
        let z = ctx.tape.sigmoid(z_pre);

        let xr = self.xr.apply(ctx, x, l_hat)?;
        let hr = self.hr.apply(ctx, h, l_hat)?;
        let r_pre = ctx.tape.add(xr, hr)?;
        let r = ctx.tape.sigmoid(r_pre);

        let rh = ctx.tape.mul(r, h)?;
        let xn = self.xn.apply(ctx, x, l_hat)?;
        let hn = self.hn.apply(ctx, rh, l_hat)?;
        let n_pre = ctx.tape.add(xn, hn)?;
        let n = ctx.tape.tanh(n_pre);

        let zh = ctx.tape.mul(z, h)?;
        let shape = ctx.tape.shape(z).to_vec();
        let ones = ctx.tape.ones(&shape)?;
        let omz = ctx.tape.sub(ones, z)?;
        let on = ctx.tape.mul(omz, n)?;
        Ok(ctx.tape.add(zh, on)?)
    }
}

/// Peephole graph LSTM:
/// i = s(Cxi(X) + Chi(H) + w_ci.C); f = s(Cxf(X) + Chf(H) + w_cf.C);
/// C' = f.C + i.tanh(Cxc(X) + Chc(H));
/// o = s(Cxo(X) + Cho(H) + w_co.C'); H' = o.tanh(C')
pub struct GConvLstmCell {
    xi: ChebFilter,
    hi: ChebFilter,
    xf: ChebFilter,
    hf: ChebFilter,
    xc: ChebFilter,
    hc: ChebFilter,
    xo: ChebFilter,
    ho: ChebFilter,
    w_ci: ParamId,
    w_cf: ParamId,
    w_co: ParamId,
    pub hidden: usize,
}

impl GConvLstmCell {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        k: usize,
        f_in: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(GConvLstmCell {
            xi: ChebFilter::new(store, &format!("{name}.xi"), k, f_in, hidden, rng)?,
            hi: ChebFilter::new(store, &format!("{name}.hi"), k, hidden, hidden, rng)?,
            xf: ChebFilter::new(store, &format!("{name}.xf"), k, f_in, hidden, rng)?,
            hf: ChebFilter::new(store, &format!("{name}.hf"), k, hidden, hidden, rng)?,
            xc: ChebFilter::new(store, &format!("{name}.xc"), k, f_in, hidden, rng)?,
            hc: ChebFilter::new(store, &format!("{name}.hc"), k, hidden, hidden, rng)?,
            xo: ChebFilter::new(store, &format!("{name}.xo"), k, f_in, hidden, rng)?,
            ho: ChebFilter::new(store, &format!("{name}.ho"), k, hidden, hidden, rng)?,
            w_ci: store.register(format!("{name}.w_ci"), &[hidden], vec![0.0; hidden]),
            w_cf: store.register(format!("{name}.w_cf"), &[hidden], vec![0.0; hidden]),
            w_co: store.register(format!("{name}.w_co"), &[hidden], vec![0.0; hidden]),
            hidden,
        })
    }

    /// Elementwise peephole term: rows of `c` scaled by the peephole vector
    /// (materialized across rows with the broadcast primitive).
    fn peephole(&self, ctx: &mut Ctx, w: ParamId, c: Value) -> Result<Value> {
        let rows = ctx.tape.shape(c)[0];
        let wv = ctx.param(w)?;
        let zeros = ctx.tape.zeros(&[rows, self.hidden])?;
        let wrow = ctx.tape.broadcast_add_bias(zeros, wv)?;
        Ok(ctx.tape.mul(wrow, c)?)
    }

    pub fn step(&self, ctx: &mut Ctx, x: Value, h: Value, c: Value, l_hat: Value) -> Result<(Value, Value)> {
        let xi = self.xi.apply(ctx, x, l_hat)?;
        let hi = self.hi.apply(ctx, h, l_hat)?;
        let ci = self.peephole(ctx, self.w_ci, c)?;
        let i_sum = ctx.tape.add(xi, hi)?;
        let i_pre = ctx.tape.add(i_sum, ci)?;
        let i = ctx.tape.sigmoid(i_pre);

        let xf = self.xf.apply(ctx, x, l_hat)?;
        let hf = self.hf.apply(ctx, h, l_hat)?;
        let cf = self.peephole(ctx, self.w_cf, c)?;
        let f_sum = ctx.tape.add(xf, hf)?;
        let f_pre = ctx.tape.add(f_sum, cf)?;
        let f = ctx.tape.sigmoid(f_pre);

        let xc = self.xc.apply(ctx, x, l_hat)?;
        let hc = self.hc.apply(ctx, h, l_hat)?;
        let g_pre = ctx.tape.add(xc, hc)?;
        let g = ctx.tape.tanh(g_pre);

        let fc = ctx.tape.mul(f, c)?;
        let ig = ctx.tape.mul(i, g)?;
        let c_new = ctx.tape.add(fc, ig)?;

        let xo = self.xo.apply(ctx, x, l_hat)?;
        let ho = self.ho.apply(ctx, h, l_hat)?;
        let co = self.peephole(ctx, self.w_co, c_new)?;
        let o_sum = ctx.tape.add(xo, ho)?;
        let o_pre = ctx.tape.add(o_sum, co)?;
        let o = ctx.tape.sigmoid(o_pre);

        let tc = ctx.tape.tanh(c_new);
        let h_new = ctx.tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }
}

/// Per-node regression head: `pred = activation(H) w + b`.
pub struct Readout {
    w: ParamId,
    b: ParamId,
    pub activation: crate::nn::Activation,
}

impl Readout {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        activation: crate::nn::Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Readout {
            w: store.register(format!("{name}.w"), &[hidden, 1], autodiff::glorot_uniform(hidden, 1, rng)),
            b: store.register(format!("{name}.b"), &[1], vec![0.0]),
            activation,
        }
    }

    pub fn apply(&self, ctx: &mut Ctx, h: Value) -> Result<Value> {
        let a = self.activation.apply(ctx, h);
        let w = ctx.param(self.w)?;
        let b = ctx.param(self.b)?;
        let hw = ctx.tape.matmul(a, w)?;
        Ok(ctx.tape.broadcast_add_bias(hw, b)?)
    }
}

/// Top-k rows of `x` by score, ties broken by lower row index; used by the
/// hidden-state weight evolution. Returns (indices, padded row count).
pub fn top_k_rows(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Scale selected rows by tanh of their scores (straight-through top-k).
pub fn scale_by_tanh_scores(ctx: &mut Ctx, rows: Value, scores: Value) -> Result<Value> {
    let t = ctx.tape.tanh(scores);
    scale_rows(ctx, rows, t)
}
