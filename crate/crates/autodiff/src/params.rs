//! Persistent learnable parameters, independent of any single trace.
//!
//! Parameters live across epochs; a forward pass stages them onto the active
//! [`Tape`] as leaf tensors. [`Tape::backward`] accumulates leaf gradients
//! back into the store, keyed by the stable integer handle assigned at
//! registration.

use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Value};

/// Stable handle for a registered parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub u32);

struct Param {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    grad_populated: bool,
}

#[derive(Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn register(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> ParamId {
        let n: usize = shape.iter().product();
        assert_eq!(n, data.len(), "parameter data must fill its shape");
        self.params.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            data,
            grad_populated: false,
        });
        ParamId(self.params.len() as u32 - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len() as u32).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0 as usize].name
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.params[id.0 as usize].shape
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.params[id.0 as usize].data
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0 as usize].data
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0 as usize].grad
    }

    pub fn grad_populated(&self, id: ParamId) -> bool {
        self.params[id.0 as usize].grad_populated
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, contrib: &[f64]) {
        let p = &mut self.params[id.0 as usize];
        for (g, c) in p.grad.iter_mut().zip(contrib) {
            *g += c;
        }
        p.grad_populated = true;
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
            p.grad_populated = false;
        }
    }

    /// Ids whose gradient was populated by a backward pass since the last
    /// zeroing; the usual argument to an optimizer step.
    pub fn populated_ids(&self) -> Vec<ParamId> {
        (0..self.params.len() as u32)
            .map(ParamId)
            .filter(|&id| self.params[id.0 as usize].grad_populated)
            .collect()
    }

    /// Copy of all parameter data, for checkpointing.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| p.data.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            p.data.copy_from_slice(s);
        }
    }

    /// Order-sensitive digest of all parameter bits; cheap way to assert that
    /// evaluation does not touch weights.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in &self.params {
            for &x in &p.data {
                h ^= x.to_bits();
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Per-trace staging context: stages each parameter onto the tape at most
/// once, so fan-out gradients accumulate on a single leaf.
pub struct Ctx<'a> {
    pub tape: &'a mut Tape,
    pub store: &'a ParamStore,
    staged: HashMap<ParamId, Value>,
}

impl<'a> Ctx<'a> {
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore) -> Self {
        Ctx {
            tape,
            store,
            staged: HashMap::new(),
        }
    }

    /// Leaf tensor carrying the parameter's current data.
    pub fn param(&mut self, id: ParamId) -> Result<Value> {
        if let Some(&v) = self.staged.get(&id) {
            return Ok(v);
        }
        if id.0 as usize >= self.store.len() {
            return Err(TensorError::Contract(format!("unknown parameter id {}", id.0)));
        }
        let v = self.tape.leaf(self.store.shape(id), self.store.data(id).to_vec())?;
        self.tape.set_param(v, id);
        self.staged.insert(id, v);
        Ok(v)
    }
}
