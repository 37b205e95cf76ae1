//! Negative destination sampling for self-supervised link prediction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TgnnError};

/// Uniform sampler over a fixed candidate set, resampling collisions with
/// the true destination.
pub struct NegativeSampler {
    candidates: Vec<usize>,
}

impl NegativeSampler {
    pub fn new(candidates: Vec<usize>) -> Self {
        NegativeSampler { candidates }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// One negative destination distinct from `true_dst`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, true_dst: usize) -> Result<usize> {
        if self.candidates.is_empty() || (self.candidates.len() == 1 && self.candidates[0] == true_dst) {
            return Err(TgnnError::Contract(
                "negative sampling needs a candidate other than the true destination".to_string(),
            ));
        }
        loop {
            let pick = self.candidates[rng.random_range(0..self.candidates.len())];
            if pick != true_dst {
                return Ok(pick);
            }
        }
    }
}
