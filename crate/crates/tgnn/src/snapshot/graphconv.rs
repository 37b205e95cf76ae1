//! Symmetric-normalized adjacency and the Chebyshev graph filter backing the
//! graph-convolutional recurrent cells.

use autodiff::{glorot_uniform, Ctx, ParamId, ParamStore, Value};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TgnnError};

/// Dense symmetric-normalized adjacency.
///
/// Each listed edge `(s, d, w)` contributes `w` to both `A[s][d]` and
/// `A[d][s]` (self-edges once). With self-loops the result is
/// `D^-1/2 (A+I) D^-1/2`; without, `D^-1/2 A D^-1/2` with zero rows for
/// isolated nodes.
pub fn sym_norm_adjacency(
    edges: &[(usize, usize, f64)],
    num_nodes: usize,
    add_self_loops: bool,
) -> Result<Vec<f64>> {
    let n = num_nodes;
    let mut a = vec![0.0; n * n];
    for &(s, d, w) in edges {
        if s >= n || d >= n {
            return Err(TgnnError::Contract(format!(
                "edge ({}, {}) outside 0..{}",
                s, d, n
            )));
        }
        if w < 0.0 {
            return Err(TgnnError::Tensor(autodiff::TensorError::Domain(format!(
                "negative edge weight {}",
                w
            ))));
        }
        a[s * n + d] += w;
        if s != d {
            a[d * n + s] += w;
        }
    }
    if add_self_loops {
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
    }
    let mut dinv_sqrt = vec![0.0; n];
    for i in 0..n {
        let deg: f64 = a[i * n..(i + 1) * n].iter().sum();
        dinv_sqrt[i] = if deg > 0.0 { 1.0 / deg.sqrt() } else { 0.0 };
    }
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] *= dinv_sqrt[i] * dinv_sqrt[j];
        }
    }
    Ok(a)
}

/// Scaled Laplacian operand for the Chebyshev recurrence at `lambda_max = 2`:
/// `L_hat = -D^-1/2 A D^-1/2` (no self-loops).
pub fn cheb_operator(edges: &[(usize, usize, f64)], num_nodes: usize) -> Result<Vec<f64>> {
    let mut a = sym_norm_adjacency(edges, num_nodes, false)?;
    a.iter_mut().for_each(|v| *v = -*v);
    Ok(a)
}

/// Chebyshev graph filter: `out = sum_k T_k(L_hat) X theta_k + bias`
/// with `T_0 = I`, `T_1 = L_hat`, `T_k = 2 L_hat T_{k-1} - T_{k-2}`.
pub struct ChebFilter {
    pub k: usize,
    theta: Vec<ParamId>,
    bias: ParamId,
}

impl ChebFilter {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        k: usize,
        f_in: usize,
        f_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if k == 0 {
            return Err(TgnnError::Config("Chebyshev order must be >= 1".to_string()));
        }
        let theta = (0..k)
            .map(|j| store.register(format!("{name}.theta{j}"), &[f_in, f_out], glorot_uniform(f_in, f_out, rng)))
            .collect();
        let bias = store.register(format!("{name}.bias"), &[f_out], vec![0.0; f_out]);
        Ok(ChebFilter { k, theta, bias })
    }

    /// Apply to node features `x` (N x F_in) given the staged operator
    /// `l_hat` (N x N constant on the tape).
    pub fn apply(&self, ctx: &mut Ctx, x: Value, l_hat: Value) -> Result<Value> {
        let theta0 = ctx.param(self.theta[0])?;
        let mut out = ctx.tape.matmul(x, theta0)?;
        let mut z_prev2 = x; // T_0 X
        let mut z_prev1 = None; // T_1 X, lazily
        for j in 1..self.k {
            let zj = match z_prev1 {
                None => ctx.tape.matmul(l_hat, x)?,
                Some(z1) => {
                    let lz = ctx.tape.matmul(l_hat, z1)?;
                    let two_lz = ctx.tape.add(lz, lz)?;
                    ctx.tape.sub(two_lz, z_prev2)?
                }
            };
            let thetaj = ctx.param(self.theta[j])?;
            let term = ctx.tape.matmul(zj, thetaj)?;
            out = ctx.tape.add(out, term)?;
            if let Some(z1) = z_prev1 {
                z_prev2 = z1;
            }
            z_prev1 = Some(zj);
        }
        let bias = ctx.param(self.bias)?;
        Ok(ctx.tape.broadcast_add_bias(out, bias)?)
    }
}
