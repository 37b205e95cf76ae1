//! Per-node memory vectors and the pending-mail store.
//!
//! Rows live either on the current tape (gradients flow through the latest
//! update) or as detached plain buffers carried between batches. Nodes never
//! touched by an event have no entry and read as exact zeros.

use std::collections::BTreeMap;

use autodiff::{Tape, Value};

use crate::error::{Result, TgnnError};

/// A vector either recorded on the active tape or detached between traces.
#[derive(Debug, Clone)]
pub enum StoredVec {
    Detached(Vec<f64>),
    Live(Value),
}

impl StoredVec {
    /// Stage onto the given tape as a `1 x d` value (constants for detached).
    pub fn to_value(&self, tape: &mut Tape, dim: usize) -> Result<Value> {
        match self {
            StoredVec::Live(v) => Ok(*v),
            StoredVec::Detached(data) => Ok(tape.constant(&[1, dim], data.clone())?),
        }
    }

    fn detach(&mut self, tape: &Tape) {
        if let StoredVec::Live(v) = self {
            *self = StoredVec::Detached(tape.data(*v).to_vec());
        }
    }
}

/// Node memory: state vector plus time of last write, per node.
pub struct Memory {
    pub d_mem: usize,
    rows: BTreeMap<usize, StoredVec>,
    last_update: BTreeMap<usize, f64>,
}

impl Memory {
    pub fn new(d_mem: usize) -> Self {
        Memory {
            d_mem,
            rows: BTreeMap::new(),
            last_update: BTreeMap::new(),
        }
    }

    /// Memory row as a `1 x d` tape value; zeros for untouched nodes.
    pub fn row_value(&self, tape: &mut Tape, node: usize) -> Result<Value> {
        match self.rows.get(&node) {
            Some(sv) => sv.to_value(tape, self.d_mem),
            None => Ok(tape.zeros(&[1, self.d_mem])?),
        }
    }

    pub fn set_row_live(&mut self, node: usize, v: Value) {
        self.rows.insert(node, StoredVec::Live(v));
    }

    pub fn last_update(&self, node: usize) -> f64 {
        self.last_update.get(&node).copied().unwrap_or(0.0)
    }

    pub fn set_last_update(&mut self, node: usize, t: f64) {
        self.last_update.insert(node, t);
    }

    pub fn touched(&self, node: usize) -> bool {
        self.rows.contains_key(&node)
    }

    pub fn detach_all(&mut self, tape: &Tape) {
        for sv in self.rows.values_mut() {
            sv.detach(tape);
        }
    }

    /// Dense snapshot (tests and checkpoints); requires a fully detached state.
    pub fn dense(&self, num_nodes: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; self.d_mem]; num_nodes];
        for (&node, sv) in &self.rows {
            match sv {
                StoredVec::Detached(d) => out[node].copy_from_slice(d),
                StoredVec::Live(_) => {
                    return Err(TgnnError::Contract(
                        "dense memory snapshot requires detached state".to_string(),
                    ))
                }
            }
        }
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.last_update.clear();
    }
}

/// One pending mail: creation time, originating event, and the payload
/// computed at creation from batch-start memory.
#[derive(Debug, Clone)]
pub struct RawMessage {
    pub t: f64,
    pub event_idx: usize,
    pub payload: StoredVec,
}

/// Pending raw messages per node, cleared when the node's memory updates.
#[derive(Default)]
pub struct RawMessageStore {
    pending: BTreeMap<usize, Vec<RawMessage>>,
}

impl RawMessageStore {
    pub fn new() -> Self {
        RawMessageStore::default()
    }

    pub fn push(&mut self, node: usize, msg: RawMessage) {
        self.pending.entry(node).or_default().push(msg);
    }

    pub fn has_pending(&self, node: usize) -> bool {
        self.pending.contains_key(&node)
    }

    /// Remove and return the node's pending mail.
    pub fn take(&mut self, node: usize) -> Vec<RawMessage> {
        self.pending.remove(&node).unwrap_or_default()
    }

    pub fn pending_count(&self, node: usize) -> usize {
        self.pending.get(&node).map(|v| v.len()).unwrap_or(0)
    }

    pub fn detach_all(&mut self, tape: &Tape) {
        for msgs in self.pending.values_mut() {
            for m in msgs {
                m.payload.detach(tape);
            }
        }
    }

    pub fn reset(&mut self) {
        self.pending.clear();
    }
}
