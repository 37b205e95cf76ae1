//! Canonical DTDG JSON loading, lag windowing, and the chronological split.
//!
//! Standardization is a single z-score over the entire raw series, matching
//! the loader lineage this format comes from. Note this uses whole-series
//! statistics, so the test window contributes to the scale of training
//! features; splits stay chronological regardless.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, TgnnError};

use super::{Snapshot, SnapshotSequence};

#[derive(Deserialize)]
struct RawDtdg {
    time_periods: usize,
    y: Vec<Vec<f64>>,
    edge_mapping: RawEdgeMapping,
}

#[derive(Deserialize)]
struct RawEdgeMapping {
    edge_index: BTreeMap<String, Vec<Vec<usize>>>,
    edge_weight: BTreeMap<String, Vec<f64>>,
}

/// Load the canonical DTDG JSON document from `path`.
///
/// Targets are z-scored with whole-series mean/std. Snapshot `i` carries
/// features = standardized values over days `[i, i+lag)` per node, target =
/// day `i+lag`, and the edges recorded at day `i+lag-1` (the most recent
/// observed graph).
pub fn load_dtdg_json(path: &Path, lag: usize) -> Result<SnapshotSequence> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TgnnError::Format(format!("{}: {}", path.display(), e)))?;
    parse_dtdg_json(&text, lag).map_err(|e| match e {
        TgnnError::Format(msg) => TgnnError::Format(format!("{}: {}", path.display(), msg)),
        other => other,
    })
}

/// Parse the canonical DTDG JSON text. See [`load_dtdg_json`].
pub fn parse_dtdg_json(text: &str, lag: usize) -> Result<SnapshotSequence> {
    let raw: RawDtdg =
        serde_json::from_str(text).map_err(|e| TgnnError::Format(format!("invalid DTDG JSON: {}", e)))?;
    let t = raw.time_periods;
    if raw.y.len() != t {
        return Err(TgnnError::Format(format!(
            "key 'y': expected {} rows (time_periods), found {}",
            t,
            raw.y.len()
        )));
    }
    if t == 0 {
        return Err(TgnnError::Format("key 'time_periods': empty series".to_string()));
    }
    let n = raw.y[0].len();
    for (i, row) in raw.y.iter().enumerate() {
        if row.len() != n {
            return Err(TgnnError::Format(format!(
                "key 'y': ragged row {} (expected {} values, found {})",
                i,
                n,
                row.len()
            )));
        }
    }
    if lag == 0 || lag >= t {
        return Err(TgnnError::Contract(format!(
            "lag must satisfy 1 <= lag < time_periods, got lag={} with {} periods",
            lag, t
        )));
    }

    // Whole-series standardization.
    let count = (t * n) as f64;
    let mu = raw.y.iter().flatten().sum::<f64>() / count;
    let var = raw.y.iter().flatten().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / count;
    let sigma = var.sqrt();
    if sigma <= 0.0 {
        return Err(TgnnError::Format(
            "key 'y': constant series has zero standard deviation".to_string(),
        ));
    }
    let y_std: Vec<Vec<f64>> = raw
        .y
        .iter()
        .map(|row| row.iter().map(|&v| (v - mu) / sigma).collect())
        .collect();

    // Per-day edge lists, validated against the node count.
    let mut day_edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); t];
    for (key, pairs) in &raw.edge_mapping.edge_index {
        let day: usize = key
            .parse()
            .map_err(|_| TgnnError::Format(format!("key 'edge_index': non-integer day '{}'", key)))?;
        if day >= t {
            return Err(TgnnError::Format(format!(
                "key 'edge_index': day {} outside 0..{}",
                day, t
            )));
        }
        let weights = raw
            .edge_mapping
            .edge_weight
            .get(key)
            .ok_or_else(|| TgnnError::Format(format!("key 'edge_weight': missing day '{}'", key)))?;
        if weights.len() != pairs.len() {
            return Err(TgnnError::Format(format!(
                "key 'edge_weight': day '{}' has {} weights for {} edges",
                key,
                weights.len(),
                pairs.len()
            )));
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for (pair, &w) in pairs.iter().zip(weights) {
            if pair.len() != 2 {
                return Err(TgnnError::Format(format!(
                    "key 'edge_index': day '{}' has a non-pair entry {:?}",
                    key, pair
                )));
            }
            let (s, d) = (pair[0], pair[1]);
            if s >= n || d >= n {
                return Err(TgnnError::Format(format!(
                    "key 'edge_index': day '{}' references node {} outside 0..{}",
                    key,
                    s.max(d),
                    n
                )));
            }
            if w < 0.0 {
                return Err(TgnnError::Format(format!(
                    "key 'edge_weight': day '{}' has negative weight {}",
                    key, w
                )));
            }
            edges.push((s, d, w));
        }
        day_edges[day] = edges;
    }

    let windows = build_lag_windows(&y_std, lag)?;
    let snapshots = windows
        .into_iter()
        .enumerate()
        .map(|(i, (features, target))| Snapshot {
            edges: day_edges[i + lag - 1].clone(),
            features,
            target,
        })
        .collect();

    Ok(SnapshotSequence {
        num_nodes: n,
        lag,
        snapshots,
        mu,
        sigma,
    })
}

/// Slide a window of `lag` days over a standardized `T x N` series.
///
/// Produces exactly `T - lag` pairs; pair `i` has features
/// `f[n][k] = y[i+k][n]` (row-major per node) and target `y[i+lag][n]`.
pub fn build_lag_windows(y: &[Vec<f64>], lag: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let t = y.len();
    if t <= lag {
        return Err(TgnnError::Contract(format!(
            "need more time steps ({}) than lag ({})",
            t, lag
        )));
    }
    let n = y.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(t - lag);
    for i in 0..t - lag {
        let mut features = vec![0.0; n * lag];
        for node in 0..n {
            for k in 0..lag {
                features[node * lag + k] = y[i + k][node];
            }
        }
        out.push((features, y[i + lag].clone()));
    }
    Ok(out)
}

/// Chronological split: the first `floor(train_ratio * S)` snapshots train,
/// the rest test.
pub fn temporal_split(seq: &SnapshotSequence, train_ratio: f64) -> Result<(SnapshotSequence, SnapshotSequence)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(TgnnError::Contract(format!(
            "train_ratio must be in (0, 1), got {}",
            train_ratio
        )));
    }
    let s = seq.snapshots.len();
    let n_train = (train_ratio * s as f64).floor() as usize;
    if n_train == 0 || n_train == s {
        return Err(TgnnError::Contract(format!(
            "split of {} snapshots at ratio {} leaves one side empty",
            s, train_ratio
        )));
    }
    let mk = |snaps: &[Snapshot]| SnapshotSequence {
        num_nodes: seq.num_nodes,
        lag: seq.lag,
        snapshots: snaps.to_vec(),
        mu: seq.mu,
        sigma: seq.sigma,
    };
    Ok((mk(&seq.snapshots[..n_train]), mk(&seq.snapshots[n_train..])))
}
