//! Dense building blocks shared across models: linear maps, two-layer
//! perceptrons, and row-batched GRU/LSTM cells on the tape.

use autodiff::{glorot_uniform, Ctx, ParamId, ParamStore, Value};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgnnError};

/// Pointwise nonlinearity selected by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, ctx: &mut Ctx, x: Value) -> Value {
        match self {
            Activation::Relu => ctx.tape.relu(x),
            Activation::Tanh => ctx.tape.tanh(x),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = TgnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(TgnnError::Config(format!("unknown activation '{}'", other))),
        }
    }
}

/// y = x W + b over row batches.
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            w: store.register(format!("{name}.w"), &[d_in, d_out], glorot_uniform(d_in, d_out, rng)),
            b: store.register(format!("{name}.b"), &[d_out], vec![0.0; d_out]),
        }
    }

    pub fn apply(&self, ctx: &mut Ctx, x: Value) -> Result<Value> {
        let w = ctx.param(self.w)?;
        let b = ctx.param(self.b)?;
        let xw = ctx.tape.matmul(x, w)?;
        Ok(ctx.tape.broadcast_add_bias(xw, b)?)
    }
}

/// Two-layer perceptron: relu hidden, linear output, optional inverted
/// dropout on the hidden activations during training.
pub struct Mlp2 {
    pub l1: Linear,
    pub l2: Linear,
    pub dropout: f64,
}

impl Mlp2 {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Mlp2 {
            l1: Linear::new(store, &format!("{name}.l1"), d_in, d_hidden, rng),
            l2: Linear::new(store, &format!("{name}.l2"), d_hidden, d_out, rng),
            dropout,
        }
    }

    pub fn apply(&self, ctx: &mut Ctx, x: Value, train: bool, rng: &mut ChaCha8Rng) -> Result<Value> {
        let h = self.l1.apply(ctx, x)?;
        let mut a = ctx.tape.relu(h);
        if train && self.dropout > 0.0 {
            a = ctx.tape.dropout(a, self.dropout, rng)?;
        }
        self.l2.apply(ctx, a)
    }
}

/// GRU cell over row batches: one row per sequence element.
///
/// z = sigmoid(xWxz + hWhz + bz); r = sigmoid(xWxr + hWhr + br);
/// n = tanh(xWxn + (r.h)Whn + bn); h' = z.h + (1-z).n
pub struct DenseGru {
    wxz: ParamId,
    whz: ParamId,
    bz: ParamId,
    wxr: ParamId,
    whr: ParamId,
    br: ParamId,
    wxn: ParamId,
    whn: ParamId,
    bn: ParamId,
    pub d_in: usize,
    pub d_hidden: usize,
}

impl DenseGru {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut mat = |suffix: &str, r: usize, c: usize, rng: &mut ChaCha8Rng| {
            store.register(format!("{name}.{suffix}"), &[r, c], glorot_uniform(r, c, rng))
        };
        let wxz = mat("wxz", d_in, d_hidden, rng);
        let whz = mat("whz", d_hidden, d_hidden, rng);
        let wxr = mat("wxr", d_in, d_hidden, rng);
        let whr = mat("whr", d_hidden, d_hidden, rng);
        let wxn = mat("wxn", d_in, d_hidden, rng);
        let whn = mat("whn", d_hidden, d_hidden, rng);
        let bz = store.register(format!("{name}.bz"), &[d_hidden], vec![0.0; d_hidden]);
        let br = store.register(format!("{name}.br"), &[d_hidden], vec![0.0; d_hidden]);
        let bn = store.register(format!("{name}.bn"), &[d_hidden], vec![0.0; d_hidden]);
        DenseGru {
            wxz,
            whz,
            bz,
            wxr,
            whr,
            br,
            wxn,
            whn,
            bn,
            d_in,
            d_hidden,
        }
    }

    fn gate(&self, ctx: &mut Ctx, x: Value, h: Value, wx: ParamId, wh: ParamId, b: ParamId) -> Result<Value> {
        let wxv = ctx.param(wx)?;
        let whv = ctx.param(wh)?;
        let bv = ctx.param(b)?;
        let xs = ctx.tape.matmul(x, wxv)?;
        let hs = ctx.tape.matmul(h, whv)?;
        let pre = ctx.tape.add(xs, hs)?;
        Ok(ctx.tape.broadcast_add_bias(pre, bv)?)
    }

    pub fn step(&self, ctx: &mut Ctx, x: Value, h: Value) -> Result<Value> {
        let z_pre = self.gate(ctx, x, h, self.wxz, self.whz, self.bz)?;
        let z = ctx.tape.sigmoid(z_pre);
        let r_pre = self.gate(ctx, x, h, self.wxr, self.whr, self.br)?;
        let r = ctx.tape.sigmoid(r_pre);
        let rh = ctx.tape.mul(r, h)?;
        let n_pre = self.gate(ctx, x, rh, self.wxn, self.whn, self.bn)?;
        let n = ctx.tape.tanh(n_pre);
        let zh = ctx.tape.mul(z, h)?;
        let ones = ctx.tape.ones(ctx.tape.shape(z).to_vec().as_slice())?;
        let one_minus_z = ctx.tape.sub(ones, z)?;
        let zn = ctx.tape.mul(one_minus_z, n)?;
        Ok(ctx.tape.add(zh, zn)?)
    }
}

/// LSTM cell over row batches (no peepholes).
pub struct DenseLstm {
    wx: [ParamId; 4], // i, f, g, o
    wh: [ParamId; 4],
    b: [ParamId; 4],
    pub d_in: usize,
    pub d_hidden: usize,
}

impl DenseLstm {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let gates = ["i", "f", "g", "o"];
        let wx = gates.map(|g| store.register(format!("{name}.wx{g}"), &[d_in, d_hidden], glorot_uniform(d_in, d_hidden, rng)));
        let wh = gates.map(|g| store.register(format!("{name}.wh{g}"), &[d_hidden, d_hidden], glorot_uniform(d_hidden, d_hidden, rng)));
        let b = gates.map(|g| store.register(format!("{name}.b{g}"), &[d_hidden], vec![0.0; d_hidden]));
        DenseLstm { wx, wh, b, d_in, d_hidden }
    }

    fn gate(&self, ctx: &mut Ctx, x: Value, h: Value, idx: usize) -> Result<Value> {
        let wx = ctx.param(self.wx[idx])?;
        let wh = ctx.param(self.wh[idx])?;
        let b = ctx.param(self.b[idx])?;
        let xs = ctx.tape.matmul(x, wx)?;
        let hs = ctx.tape.matmul(h, wh)?;
        let pre = ctx.tape.add(xs, hs)?;
        Ok(ctx.tape.broadcast_add_bias(pre, b)?)
    }

    /// Returns (h', c').
    pub fn step(&self, ctx: &mut Ctx, x: Value, h: Value, c: Value) -> Result<(Value, Value)> {
        let i_pre = self.gate(ctx, x, h, 0)?;
        let i = ctx.tape.sigmoid(i_pre);
        let f_pre = self.gate(ctx, x, h, 1)?;
        let f = ctx.tape.sigmoid(f_pre);
        let g_pre = self.gate(ctx, x, h, 2)?;
        let g = ctx.tape.tanh(g_pre);
        let o_pre = self.gate(ctx, x, h, 3)?;
        let o = ctx.tape.sigmoid(o_pre);
        let fc = ctx.tape.mul(f, c)?;
        let ig = ctx.tape.mul(i, g)?;
        let c_new = ctx.tape.add(fc, ig)?;
        let tc = ctx.tape.tanh(c_new);
        let h_new = ctx.tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }
}

/// Scale each row of `x` by the matching entry of column vector `s` (m x 1),
/// expressed with the primitive set (outer product against a ones row).
pub fn scale_rows(ctx: &mut Ctx, x: Value, s: Value) -> Result<Value> {
    let cols = ctx.tape.shape(x)[1];
    let ones = ctx.tape.ones(&[1, cols])?;
    let expanded = ctx.tape.matmul(s, ones)?;
    Ok(ctx.tape.mul(expanded, x)?)
}
