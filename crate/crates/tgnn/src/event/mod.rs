//! Event-based models: memory/mailbox state, temporal neighborhoods, time
//! encoding, attention stacks, and the task heads.

mod attn;
mod decoders;
mod neighbors;
mod state;
mod tgat;
mod tgn;
mod time;

pub use attn::{CombineMode, LayerKind, ScoreMode, TemporalLayer, TemporalLayerSpec, TemporalStack, TimeFeatures, TimeMode};
pub use decoders::{EdgeDecoder, NodeRegressor};
pub use neighbors::NeighborStore;
pub use state::{Memory, RawMessage, RawMessageStore, StoredVec};
pub use tgat::{Tgat, TgatConfig};
pub use tgn::{AggregatorMode, EmbeddingMode, Tgn, TgnConfig};
pub use time::TimeEncoder;

use autodiff::{Ctx, Tape, Value};
use rand_chacha::ChaCha8Rng;

use crate::data::Event;
use crate::error::Result;

/// One interchangeable event-stream encoder.
///
/// The per-batch protocol is: [`EventModel::refresh_memory`] applies pending
/// mail for nodes appearing in the batch, [`EventModel::embed`] answers
/// `(node, t)` queries from state strictly preceding each query time,
/// [`EventModel::ingest`] files the batch's mail and neighbor entries, and
/// [`EventModel::detach`] cuts gradient paths at the batch boundary.
pub trait EventModel {
    fn name(&self) -> &'static str;
    /// Embedding width fed to the task heads.
    fn out_dim(&self) -> usize;
    /// Prefix of this model's parameter names (used to scope checkpoints).
    fn params_prefix(&self) -> &'static str;
    /// Clear memory, mailboxes, neighbor history, and cached features.
    fn reset(&mut self);
    fn refresh_memory(&mut self, ctx: &mut Ctx, events: &[Event]) -> Result<()>;
    fn embed(&mut self, ctx: &mut Ctx, queries: &[(usize, f64)], train: bool, rng: &mut ChaCha8Rng) -> Result<Value>;
    fn ingest(&mut self, ctx: &mut Ctx, events: &[Event]) -> Result<()>;
    fn detach(&mut self, tape: &Tape);
}
