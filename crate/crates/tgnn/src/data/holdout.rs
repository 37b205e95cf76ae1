//! Chronological train/val/test cut with inductive node masking.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TgnnError};

use super::{Event, EventStream};

/// Output partition of [`inductive_holdout`]. The union of all five event
/// lists is the original stream.
#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train: Vec<Event>,
    pub val: Vec<Event>,
    /// Test events touching no masked node.
    pub test_seen: Vec<Event>,
    /// Test events touching at least one masked node.
    pub test_unseen: Vec<Event>,
    /// Train/val events dropped because they touch a masked node.
    pub dropped: Vec<Event>,
    pub unseen_nodes: BTreeSet<usize>,
}

/// Cut the stream chronologically into train/val/test windows and mask a
/// fraction of nodes as unseen.
///
/// Masked nodes are drawn first from nodes appearing only after the train
/// cut, topped up at random from the rest. Any train- or val-window event
/// touching a masked node is dropped, so a masked node is first observed at
/// test time.
pub fn inductive_holdout(
    stream: &EventStream,
    unseen_fraction: f64,
    seed: u64,
    train_ratio: f64,
    val_ratio: f64,
) -> Result<HoldoutSplit> {
    if !(0.0..1.0).contains(&unseen_fraction) {
        return Err(TgnnError::Contract(format!(
            "unseen_fraction must be in [0, 1), got {}",
            unseen_fraction
        )));
    }
    if train_ratio <= 0.0 || val_ratio < 0.0 || train_ratio + val_ratio >= 1.0 {
        return Err(TgnnError::Contract(format!(
            "invalid split ratios {}/{}",
            train_ratio, val_ratio
        )));
    }
    let n = stream.events.len();
    let n_train = (train_ratio * n as f64).floor() as usize;
    let n_val = (val_ratio * n as f64).floor() as usize;
    if n_train == 0 || n_train + n_val >= n {
        return Err(TgnnError::DegenerateSplit(format!(
            "{} events leave an empty window at ratios {}/{}",
            n, train_ratio, val_ratio
        )));
    }

    let distinct: BTreeSet<usize> = stream
        .events
        .iter()
        .flat_map(|e| [e.src, e.dst])
        .collect();
    let train_nodes: BTreeSet<usize> = stream.events[..n_train]
        .iter()
        .flat_map(|e| [e.src, e.dst])
        .collect();

    let mut unseen_nodes = BTreeSet::new();
    if unseen_fraction > 0.0 {
        let target = ((unseen_fraction * distinct.len() as f64).floor() as usize).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Prefer nodes the training window never saw.
        let mut pool: Vec<usize> = distinct.iter().copied().filter(|v| !train_nodes.contains(v)).collect();
        pool.shuffle(&mut rng);
        unseen_nodes.extend(pool.into_iter().take(target));
        if unseen_nodes.len() < target {
            let mut topup: Vec<usize> = train_nodes.iter().copied().collect();
            topup.shuffle(&mut rng);
            for v in topup {
                if unseen_nodes.len() >= target {
                    break;
                }
                unseen_nodes.insert(v);
            }
        }
    }

    let touches_mask = |e: &Event| unseen_nodes.contains(&e.src) || unseen_nodes.contains(&e.dst);
    let mut split = HoldoutSplit {
        train: Vec::new(),
        val: Vec::new(),
        test_seen: Vec::new(),
        test_unseen: Vec::new(),
        dropped: Vec::new(),
        unseen_nodes,
    };
    for (i, ev) in stream.events.iter().enumerate() {
        if i < n_train {
            if touches_mask(ev) {
                split.dropped.push(ev.clone());
            } else {
                split.train.push(ev.clone());
            }
        } else if i < n_train + n_val {
            if touches_mask(ev) {
                split.dropped.push(ev.clone());
            } else {
                split.val.push(ev.clone());
            }
        } else if touches_mask(ev) {
            split.test_unseen.push(ev.clone());
        } else {
            split.test_seen.push(ev.clone());
        }
    }

    if split.test_seen.is_empty() && split.test_unseen.is_empty() {
        return Err(TgnnError::DegenerateSplit("no test events survive the cut".to_string()));
    }
    if !split.unseen_nodes.is_empty() && split.test_seen.is_empty() {
        return Err(TgnnError::DegenerateSplit(
            "node mask removes every seen test event".to_string(),
        ));
    }
    if split.train.is_empty() {
        return Err(TgnnError::DegenerateSplit(
            "node mask removes every training event".to_string(),
        ));
    }
    Ok(split)
}
