//! Per-node temporal interaction history with strict-past sampling.

use crate::data::Event;
use crate::error::{Result, TgnnError};

/// Time-ordered `(neighbor, event index, t)` entries per node. Every event is
/// inserted under both endpoints, in stream order.
pub struct NeighborStore {
    lists: Vec<Vec<(usize, usize, f64)>>,
    max_t: Option<f64>,
}

impl NeighborStore {
    pub fn new(num_nodes: usize) -> Self {
        NeighborStore {
            lists: vec![Vec::new(); num_nodes],
            max_t: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.lists.len()
    }

    /// Append an event under both endpoints. Events must arrive in stream
    /// order (nondecreasing t).
    pub fn record_event(&mut self, ev: &Event) -> Result<()> {
        if let Some(mt) = self.max_t {
            if ev.t < mt {
                return Err(TgnnError::Contract(format!(
                    "out-of-order event at t={} after t={}",
                    ev.t, mt
                )));
            }
        }
        self.max_t = Some(ev.t);
        self.lists[ev.src].push((ev.dst, ev.idx, ev.t));
        if ev.dst != ev.src {
            self.lists[ev.dst].push((ev.src, ev.idx, ev.t));
        }
        Ok(())
    }

    /// The up-to-`k` most recent entries strictly before `t_query`,
    /// most-recent-last. Deterministic; empty when there is no strict past.
    pub fn sample_recent(&self, node: usize, t_query: f64, k: usize) -> &[(usize, usize, f64)] {
        let list = &self.lists[node];
        let end = list.partition_point(|e| e.2 < t_query);
        let start = end.saturating_sub(k);
        &list[start..end]
    }

    pub fn history_len(&self, node: usize) -> usize {
        self.lists[node].len()
    }
}
