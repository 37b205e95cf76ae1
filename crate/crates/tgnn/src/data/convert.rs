//! Snapshot-to-event conversion: each snapshot edge becomes one
//! edge-addition event at the snapshot's index, carrying the movement weight
//! and both endpoints' lagged histories as the event feature vector.

use crate::error::Result;

use super::{Event, EventStream, SnapshotSequence};

/// Per-node regression label attached to a converted timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub t: f64,
    pub node: usize,
    pub target: f64,
}

/// A converted stream plus its regression label sidecar.
#[derive(Debug, Clone)]
pub struct ConvertedStream {
    pub stream: EventStream,
    pub labels: Vec<LabelRow>,
}

/// Convert a snapshot sequence into an event stream.
///
/// Snapshot `i` emits one event per edge at `t = i`, in the snapshot's edge
/// order, with features `[w] || features_i[src] || features_i[dst]`
/// (length `1 + 2*lag`). `event_cap` keeps only the first so-many events of
/// each timestamp. Labels carry each node's target at every timestamp.
pub fn dtdg_to_ctdg(seq: &SnapshotSequence, event_cap: Option<usize>) -> Result<ConvertedStream> {
    let lag = seq.lag;
    let mut events = Vec::new();
    let mut labels = Vec::new();
    for (i, snap) in seq.snapshots.iter().enumerate() {
        let t = i as f64;
        let take = event_cap.unwrap_or(usize::MAX).min(snap.edges.len());
        for &(src, dst, w) in snap.edges.iter().take(take) {
            let mut features = Vec::with_capacity(1 + 2 * lag);
            features.push(w);
            features.extend_from_slice(&snap.features[src * lag..(src + 1) * lag]);
            features.extend_from_slice(&snap.features[dst * lag..(dst + 1) * lag]);
            let idx = events.len();
            events.push(Event { src, dst, t, features, idx });
        }
        for node in 0..seq.num_nodes {
            labels.push(LabelRow {
                t,
                node,
                target: snap.target[node],
            });
        }
    }
    Ok(ConvertedStream {
        stream: EventStream {
            events,
            num_nodes: seq.num_nodes,
            feature_dim: 1 + 2 * lag,
            num_sources: None,
        },
        labels,
    })
}
