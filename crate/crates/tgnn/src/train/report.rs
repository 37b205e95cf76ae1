//! Experiment result records.

use serde::{Deserialize, Serialize};

/// Final test-side metrics; fields present iff the task produces them.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TestMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_per_snapshot: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_seen: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_unseen: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_seen: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_unseen: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// One experiment: resolved configuration echo, training curves, and final
/// metrics. Wall time is informational and excluded from determinism
/// guarantees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub train_loss: Vec<f64>,
    pub val_metric: Vec<f64>,
    pub test: TestMetrics,
    pub epochs_run: usize,
    pub wall_seconds: f64,
    pub seed: u64,
}
