//! Models over snapshot sequences: graph-convolutional recurrences and
//! evolving-weight graph convolutions, rolled across time with a shared
//! regression readout.

mod cells;
mod evolve;
mod graphconv;

pub use cells::{top_k_rows, GConvGruCell, GConvLstmCell, Readout};
pub use evolve::{EvolveH, EvolveHState, EvolveO, EvolveOState};
pub use graphconv::{cheb_operator, sym_norm_adjacency, ChebFilter};

use autodiff::{Ctx, ParamStore, Tape, Value};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SnapshotSequence;
use crate::error::Result;
use crate::nn::Activation;

/// Shape hyperparameters shared by all snapshot models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotConfig {
    pub hidden: usize,
    pub cheb_k: usize,
    pub activation: Activation,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            hidden: 32,
            cheb_k: 2,
            activation: Activation::Relu,
        }
    }
}

/// A snapshot with its graph operators precomputed (they are reused across
/// every epoch).
pub struct PreparedSnapshot {
    pub features: Vec<f64>,
    pub target: Vec<f64>,
    /// Chebyshev operand, no self-loops, negated normalized adjacency.
    pub l_hat: Vec<f64>,
    /// GCN propagation operator with self-loops.
    pub a_hat: Vec<f64>,
}

pub fn prepare_snapshots(seq: &SnapshotSequence) -> Result<Vec<PreparedSnapshot>> {
    seq.snapshots
        .iter()
        .map(|s| {
            Ok(PreparedSnapshot {
                features: s.features.clone(),
                target: s.target.clone(),
                l_hat: cheb_operator(&s.edges, seq.num_nodes)?,
                a_hat: sym_norm_adjacency(&s.edges, seq.num_nodes, true)?,
            })
        })
        .collect()
}

/// One interchangeable snapshot-sequence regressor: advances internal
/// recurrent state per snapshot and emits per-node predictions.
pub trait SnapshotModel {
    fn name(&self) -> &'static str;
    /// Clear recurrent state; the next [`SnapshotModel::step`] starts a fresh
    /// rollout from zeros (or the initial weights).
    fn begin_rollout(&mut self);
    /// Predictions (`N x 1`) for one snapshot; advances state on the tape.
    fn step(&mut self, ctx: &mut Ctx, snap: &PreparedSnapshot, num_nodes: usize) -> Result<Value>;
    /// Cut the gradient path through the recurrent state and make it
    /// portable across tapes (used when stepping the optimizer inside a
    /// rollout).
    fn detach_state(&mut self, tape: &Tape);
}

fn stage(ctx: &mut Ctx, shape: &[usize], data: &[f64]) -> Result<Value> {
    Ok(ctx.tape.constant(shape, data.to_vec())?)
}

/// Recurrent state either on the active tape or detached between tapes.
enum Held {
    Live(Value),
    Buf(Vec<usize>, Vec<f64>),
}

impl Held {
    fn value(&self, tape: &mut Tape) -> Result<Value> {
        match self {
            Held::Live(v) => Ok(*v),
            Held::Buf(shape, data) => Ok(tape.constant(shape, data.clone())?),
        }
    }

    fn detach(&mut self, tape: &Tape) {
        if let Held::Live(v) = self {
            *self = Held::Buf(tape.shape(*v).to_vec(), tape.data(*v).to_vec());
        }
    }
}

// ---------------------------------------------------------------------------
// The four models
// ---------------------------------------------------------------------------

pub struct GConvGruModel {
    cell: GConvGruCell,
    readout: Readout,
    state: Option<Held>,
    hidden: usize,
}

impl GConvGruModel {
    pub fn new(store: &mut ParamStore, cfg: &SnapshotConfig, lag: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(GConvGruModel {
            cell: GConvGruCell::new(store, "gconv_gru", cfg.cheb_k, lag, cfg.hidden, rng)?,
            readout: Readout::new(store, "gconv_gru.readout", cfg.hidden, cfg.activation, rng),
            state: None,
            hidden: cfg.hidden,
        })
    }
}

impl SnapshotModel for GConvGruModel {
    fn name(&self) -> &'static str {
        "gconv_gru"
    }

    fn begin_rollout(&mut self) {
        self.state = None;
    }

    fn step(&mut self, ctx: &mut Ctx, snap: &PreparedSnapshot, n: usize) -> Result<Value> {
        let lag = snap.features.len() / n.max(1);
        let x = stage(ctx, &[n, lag], &snap.features)?;
        let l_hat = stage(ctx, &[n, n], &snap.l_hat)?;
        let h_prev = match &self.state {
            Some(h) => h.value(ctx.tape)?,
            None => ctx.tape.zeros(&[n, self.hidden])?,
        };
        let h = self.cell.step(ctx, x, h_prev, l_hat)?;
        self.state = Some(Held::Live(h));
        self.readout.apply(ctx, h)
    }

    fn detach_state(&mut self, tape: &Tape) {
        if let Some(h) = &mut self.state {
            h.detach(tape);
        }
    }
}

pub struct GConvLstmModel {
    cell: GConvLstmCell,
    readout: Readout,
    state: Option<(Held, Held)>,
    hidden: usize,
}

impl GConvLstmModel {
    pub fn new(store: &mut ParamStore, cfg: &SnapshotConfig, lag: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(GConvLstmModel {
            cell: GConvLstmCell::new(store, "gconv_lstm", cfg.cheb_k, lag, cfg.hidden, rng)?,
            readout: Readout::new(store, "gconv_lstm.readout", cfg.hidden, cfg.activation, rng),
            state: None,
            hidden: cfg.hidden,
        })
    }
}

impl SnapshotModel for GConvLstmModel {
    fn name(&self) -> &'static str {
        "gconv_lstm"
    }

    fn begin_rollout(&mut self) {
        self.state = None;
    }

    fn step(&mut self, ctx: &mut Ctx, snap: &PreparedSnapshot, n: usize) -> Result<Value> {
        let lag = snap.features.len() / n.max(1);
        let x = stage(ctx, &[n, lag], &snap.features)?;
        let l_hat = stage(ctx, &[n, n], &snap.l_hat)?;
        let (h_prev, c_prev) = match &self.state {
            Some((h, c)) => (h.value(ctx.tape)?, c.value(ctx.tape)?),
            None => (ctx.tape.zeros(&[n, self.hidden])?, ctx.tape.zeros(&[n, self.hidden])?),
        };
        let (h, c) = self.cell.step(ctx, x, h_prev, c_prev, l_hat)?;
        self.state = Some((Held::Live(h), Held::Live(c)));
        self.readout.apply(ctx, h)
    }

    fn detach_state(&mut self, tape: &Tape) {
        if let Some((h, c)) = &mut self.state {
            h.detach(tape);
            c.detach(tape);
        }
    }
}

pub struct EvolveOModel {
    layer: EvolveO,
    readout: Readout,
    state: Option<(Held, Held)>, // (w transposed, cell)
}

impl EvolveOModel {
    pub fn new(store: &mut ParamStore, cfg: &SnapshotConfig, lag: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(EvolveOModel {
            layer: EvolveO::new(store, "evolvegcn_o", lag, cfg.hidden, rng),
            readout: Readout::new(store, "evolvegcn_o.readout", cfg.hidden, cfg.activation, rng),
            state: None,
        })
    }
}

impl SnapshotModel for EvolveOModel {
    fn name(&self) -> &'static str {
        "evolvegcn_o"
    }

    fn begin_rollout(&mut self) {
        self.state = None;
    }

    fn step(&mut self, ctx: &mut Ctx, snap: &PreparedSnapshot, n: usize) -> Result<Value> {
        let lag = snap.features.len() / n.max(1);
        let x = stage(ctx, &[n, lag], &snap.features)?;
        let a_hat = stage(ctx, &[n, n], &snap.a_hat)?;
        let prev = match &self.state {
            Some((w, c)) => Some(EvolveOState {
                w_t: w.value(ctx.tape)?,
                cell: c.value(ctx.tape)?,
            }),
            None => None,
        };
        // The swept activation lives in the readout; the layer output stays
        // linear here.
        let (out, state) = self.layer.step(ctx, x, a_hat, prev, None)?;
        self.state = Some((Held::Live(state.w_t), Held::Live(state.cell)));
        self.readout.apply(ctx, out)
    }

    fn detach_state(&mut self, tape: &Tape) {
        if let Some((w, c)) = &mut self.state {
            w.detach(tape);
            c.detach(tape);
        }
    }
}

pub struct EvolveHModel {
    layer: EvolveH,
    readout: Readout,
    state: Option<Held>, // w transposed
}

impl EvolveHModel {
    pub fn new(store: &mut ParamStore, cfg: &SnapshotConfig, lag: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(EvolveHModel {
            layer: EvolveH::new(store, "evolvegcn_h", lag, cfg.hidden, rng),
            readout: Readout::new(store, "evolvegcn_h.readout", cfg.hidden, cfg.activation, rng),
            state: None,
        })
    }
}

impl SnapshotModel for EvolveHModel {
    fn name(&self) -> &'static str {
        "evolvegcn_h"
    }

    fn begin_rollout(&mut self) {
        self.state = None;
    }

    fn step(&mut self, ctx: &mut Ctx, snap: &PreparedSnapshot, n: usize) -> Result<Value> {
        let lag = snap.features.len() / n.max(1);
        let x = stage(ctx, &[n, lag], &snap.features)?;
        let a_hat = stage(ctx, &[n, n], &snap.a_hat)?;
        let prev = match &self.state {
            Some(w) => Some(EvolveHState {
                w_t: w.value(ctx.tape)?,
            }),
            None => None,
        };
        let (out, state) = self.layer.step(ctx, x, a_hat, prev, None)?;
        self.state = Some(Held::Live(state.w_t));
        self.readout.apply(ctx, out)
    }

    fn detach_state(&mut self, tape: &Tape) {
        if let Some(w) = &mut self.state {
            w.detach(tape);
        }
    }
}
