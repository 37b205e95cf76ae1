//! Task heads over event-model embeddings.

use autodiff::{Ctx, ParamStore, Value};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::Mlp2;

/// Link probability: sigmoid of a two-layer perceptron on `[z_src || z_dst]`.
/// Not symmetric in its arguments.
pub struct EdgeDecoder {
    mlp: Mlp2,
    pub d_emb: usize,
}

impl EdgeDecoder {
    pub fn new(store: &mut ParamStore, name: &str, d_emb: usize, rng: &mut ChaCha8Rng) -> Self {
        EdgeDecoder {
            mlp: Mlp2::new(store, name, 2 * d_emb, d_emb, 1, 0.0, rng),
            d_emb,
        }
    }

    /// Probabilities (`m x 1`) for row-aligned source/destination embeddings.
    pub fn prob(&self, ctx: &mut Ctx, z_src: Value, z_dst: Value, train: bool, rng: &mut ChaCha8Rng) -> Result<Value> {
        let cat = ctx.tape.concat(1, &[z_src, z_dst])?;
        let logits = self.mlp.apply(ctx, cat, train, rng)?;
        Ok(ctx.tape.sigmoid(logits))
    }
}

/// Scalar regression head: two-layer perceptron, linear output.
pub struct NodeRegressor {
    mlp: Mlp2,
}

impl NodeRegressor {
    pub fn new(store: &mut ParamStore, name: &str, d_emb: usize, rng: &mut ChaCha8Rng) -> Self {
        NodeRegressor {
            mlp: Mlp2::new(store, name, d_emb, d_emb, 1, 0.0, rng),
        }
    }

    pub fn predict(&self, ctx: &mut Ctx, z: Value, train: bool, rng: &mut ChaCha8Rng) -> Result<Value> {
        self.mlp.apply(ctx, z, train, rng)
    }
}
