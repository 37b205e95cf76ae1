//! Learnable functional time encoding: cosine features of a time delta.

use autodiff::{Ctx, ParamId, ParamStore, Value};

use crate::error::Result;

/// phi(dt)_j = cos(omega_j * dt + b_j), with omega and b learnable.
///
/// Frequencies start on a geometric ladder omega_j = 10^(-9 j / d), spanning
/// unit scale down to 1e-9, so some channel resolves any time scale the
/// stream uses.
pub struct TimeEncoder {
    pub dim: usize,
    omega: ParamId,
    phase: ParamId,
}

impl TimeEncoder {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let omega: Vec<f64> = (0..dim).map(|j| 10f64.powf(-9.0 * j as f64 / dim as f64)).collect();
        TimeEncoder {
            dim,
            omega: store.register(format!("{name}.omega"), &[1, dim], omega),
            phase: store.register(format!("{name}.phase"), &[dim], vec![0.0; dim]),
        }
    }

    /// Encode a batch of deltas into an `m x dim` tensor.
    pub fn encode(&self, ctx: &mut Ctx, deltas: &[f64]) -> Result<Value> {
        let m = deltas.len();
        let dt = ctx.tape.constant(&[m, 1], deltas.to_vec())?;
        let omega = ctx.param(self.omega)?;
        let outer = ctx.tape.matmul(dt, omega)?;
        let phase = ctx.param(self.phase)?;
        let arg = ctx.tape.broadcast_add_bias(outer, phase)?;
        Ok(ctx.tape.cos(arg))
    }
}
