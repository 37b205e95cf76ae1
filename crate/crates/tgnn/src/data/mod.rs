//! Temporal graph datasets: snapshot sequences (regular intervals, full
//! graph per step) and event streams (irregular timestamped interactions),
//! plus loaders, splits, and the snapshot-to-event converter.

mod convert;
mod dtdg;
mod events;
mod holdout;
pub mod synth;

pub use convert::{dtdg_to_ctdg, ConvertedStream, LabelRow};
pub use dtdg::{build_lag_windows, load_dtdg_json, parse_dtdg_json, temporal_split};
pub use events::{
    load_converted_csv, load_jodie_csv, load_labels_csv, save_converted_csv, save_jodie_csv, save_labels_csv,
};
pub use holdout::{inductive_holdout, HoldoutSplit};

/// One observed day: edges with nonnegative weights, per-node lagged
/// features, and the per-node regression target.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub edges: Vec<(usize, usize, f64)>,
    /// Row-major `num_nodes x lag`, standardized history.
    pub features: Vec<f64>,
    /// Standardized next-step value per node.
    pub target: Vec<f64>,
}

/// Discrete-time dynamic graph: time-ordered snapshots sharing a node set.
#[derive(Debug, Clone)]
pub struct SnapshotSequence {
    pub num_nodes: usize,
    pub lag: usize,
    pub snapshots: Vec<Snapshot>,
    /// Whole-series standardization used for features and targets.
    pub mu: f64,
    pub sigma: f64,
}

/// One timestamped interaction.
#[derive(Debug, Clone)]
pub struct Event {
    pub src: usize,
    pub dst: usize,
    pub t: f64,
    pub features: Vec<f64>,
    /// Ordinal position in the stream.
    pub idx: usize,
}

/// Continuous-time dynamic graph: events sorted by nondecreasing timestamp.
#[derive(Debug, Clone)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub num_nodes: usize,
    pub feature_dim: usize,
    /// For bipartite streams, nodes `0..num_sources` are sources and the
    /// rest are destinations (after global reindexing).
    pub num_sources: Option<usize>,
}

impl EventStream {
    /// Keep only the first `n` events (desk-scale truncation).
    pub fn truncate(&mut self, n: usize) {
        self.events.truncate(n);
    }

    /// Distinct destination-type candidates for negative sampling: the
    /// destination partition when bipartite, every node otherwise.
    pub fn negative_candidates(&self) -> Vec<usize> {
        match self.num_sources {
            Some(s) => (s..self.num_nodes).collect(),
            None => (0..self.num_nodes).collect(),
        }
    }
}
