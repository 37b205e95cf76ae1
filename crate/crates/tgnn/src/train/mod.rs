//! Training loops, losses, and the evaluation protocol.

mod event_run;
mod metrics;
mod negative;
mod report;
mod snapshot_run;

pub use event_run::{train_event_run, EventRunConfig, EventTask};
pub use metrics::{accuracy, average_precision, mse, roc_auc};
pub use negative::NegativeSampler;
pub use report::{RunReport, TestMetrics};
pub use snapshot_run::{train_snapshot_run, SnapshotRunConfig};

use autodiff::{Ctx, Optimizer, OptimizerKind, Value};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgnnError};

/// Optimizer choice as it appears in experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Adam,
    Sgd,
    Sgdm,
    Rmsprop,
}

impl std::str::FromStr for OptimizerName {
    type Err = TgnnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerName::Adam),
            "sgd" => Ok(OptimizerName::Sgd),
            "sgdm" => Ok(OptimizerName::Sgdm),
            "rmsprop" => Ok(OptimizerName::Rmsprop),
            other => Err(TgnnError::Config(format!("unknown optimizer '{}'", other))),
        }
    }
}

/// Optimizer plus the momentum field the momentum variant requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub name: OptimizerName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
}

impl OptimizerSpec {
    pub fn adam() -> Self {
        OptimizerSpec {
            name: OptimizerName::Adam,
            momentum: None,
        }
    }

    pub fn build(&self, lr: f64) -> Result<Optimizer> {
        if lr <= 0.0 {
            return Err(TgnnError::Config(format!("learning rate must be positive, got {}", lr)));
        }
        Ok(match self.name {
            OptimizerName::Adam => Optimizer::adam(lr),
            OptimizerName::Sgd => Optimizer::sgd(lr),
            OptimizerName::Sgdm => {
                let momentum = self.momentum.ok_or_else(|| {
                    TgnnError::Config("optimizer 'sgdm' requires a 'momentum' value".to_string())
                })?;
                if !(0.0..1.0).contains(&momentum) {
                    return Err(TgnnError::Config(format!("momentum must be in [0, 1), got {}", momentum)));
                }
                Optimizer::sgd_momentum(lr, momentum)
            }
            OptimizerName::Rmsprop => Optimizer::rmsprop(lr),
        })
    }

    /// Row label matching the source tables ("SGDM(0.5)" etc).
    pub fn label(&self) -> String {
        match self.name {
            OptimizerName::Adam => "Adam".to_string(),
            OptimizerName::Sgd => "SGD".to_string(),
            OptimizerName::Sgdm => format!("SGDM({})", self.momentum.unwrap_or(0.0)),
            OptimizerName::Rmsprop => "RMSProp".to_string(),
        }
    }
}

/// Numerically clamped binary cross-entropy of positive and negative
/// probability columns: mean over both.
pub(crate) fn bce_pos_neg(ctx: &mut Ctx, pos: Value, neg: Value) -> Result<Value> {
    const EPS: f64 = 1e-7;
    let clamp = |ctx: &mut Ctx, p: Value| -> Result<Value> {
        let shape = ctx.tape.shape(p).to_vec();
        let n: usize = shape.iter().product();
        let scale = ctx.tape.constant(&shape, vec![1.0 - 2.0 * EPS; n])?;
        let offset = ctx.tape.constant(&shape, vec![EPS; n])?;
        let scaled = ctx.tape.mul(p, scale)?;
        Ok(ctx.tape.add(scaled, offset)?)
    };
    let p = clamp(ctx, pos)?;
    let q = clamp(ctx, neg)?;
    let log_p = ctx.tape.log(p);
    let shape = ctx.tape.shape(q).to_vec();
    let n: usize = shape.iter().product();
    let ones = ctx.tape.constant(&shape, vec![1.0; n])?;
    let one_minus_q = ctx.tape.sub(ones, q)?;
    let log_nq = ctx.tape.log(one_minus_q);
    let pos_term = ctx.tape.mean(log_p, None)?;
    let neg_term = ctx.tape.mean(log_nq, None)?;
    let total = ctx.tape.add(pos_term, neg_term)?;
    let half = ctx.tape.constant(&[1, 1], vec![-0.5])?;
    Ok(ctx.tape.mul(total, half)?)
}

/// Mean squared error between a prediction column and targets, on the tape.
pub(crate) fn mse_loss(ctx: &mut Ctx, pred: Value, target: &[f64]) -> Result<Value> {
    let t = ctx.tape.constant(&[target.len(), 1], target.to_vec())?;
    let diff = ctx.tape.sub(pred, t)?;
    let sq = ctx.tape.mul(diff, diff)?;
    Ok(ctx.tape.mean(sq, None)?)
}
