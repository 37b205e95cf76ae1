//! Runtime model selection: every model variant sits behind a common trait
//! and registers a named factory; experiments pick one by string.

use std::collections::BTreeMap;

use autodiff::ParamStore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TgnnError};
use crate::event::{EventModel, Tgat, TgatConfig, Tgn, TgnConfig};
use crate::snapshot::{
    EvolveHModel, EvolveOModel, GConvGruModel, GConvLstmModel, SnapshotConfig, SnapshotModel,
};

/// Configuration for an event model, tagged by family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventConfig {
    Tgn(TgnConfig),
    Tgat(TgatConfig),
}

impl EventConfig {
    pub fn batch_size(&self) -> usize {
        match self {
            EventConfig::Tgn(c) => c.batch_size,
            EventConfig::Tgat(c) => c.batch_size,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            EventConfig::Tgn(_) => "tgn",
            EventConfig::Tgat(_) => "tgat",
        }
    }
}

/// Builds one snapshot-model variant.
pub trait SnapshotModelFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &SnapshotConfig,
        lag: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn SnapshotModel>>;
}

/// Builds one event-model variant.
pub trait EventModelFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &EventConfig,
        num_nodes: usize,
        d_edge: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn EventModel>>;
}

/// Name-keyed collection of model factories.
pub struct ModelRegistry {
    snapshot: BTreeMap<&'static str, Box<dyn SnapshotModelFactory>>,
    event: BTreeMap<&'static str, Box<dyn EventModelFactory>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry {
            snapshot: BTreeMap::new(),
            event: BTreeMap::new(),
        }
    }

    /// All built-in variants registered.
    pub fn with_builtins() -> Self {
        let mut r = ModelRegistry::empty();
        r.register_snapshot(Box::new(GConvGruFactory));
        r.register_snapshot(Box::new(GConvLstmFactory));
        r.register_snapshot(Box::new(EvolveOFactory));
        r.register_snapshot(Box::new(EvolveHFactory));
        r.register_event(Box::new(TgnFactory));
        r.register_event(Box::new(TgatFactory));
        r
    }

    pub fn register_snapshot(&mut self, f: Box<dyn SnapshotModelFactory>) {
        self.snapshot.insert(f.name(), f);
    }

    pub fn register_event(&mut self, f: Box<dyn EventModelFactory>) {
        self.event.insert(f.name(), f);
    }

    pub fn snapshot_names(&self) -> Vec<&'static str> {
        self.snapshot.keys().copied().collect()
    }

    pub fn event_names(&self) -> Vec<&'static str> {
        self.event.keys().copied().collect()
    }

    pub fn snapshot_factory(&self, name: &str) -> Result<&dyn SnapshotModelFactory> {
        self.snapshot.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            TgnnError::Config(format!(
                "unknown snapshot model '{}'; available: {}",
                name,
                self.snapshot_names().join(", ")
            ))
        })
    }

    pub fn event_factory(&self, name: &str) -> Result<&dyn EventModelFactory> {
        self.event.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            TgnnError::Config(format!(
                "unknown event model '{}'; available: {}",
                name,
                self.event_names().join(", ")
            ))
        })
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        ModelRegistry::with_builtins()
    }
}

struct GConvGruFactory;
impl SnapshotModelFactory for GConvGruFactory {
    fn name(&self) -> &'static str {
        "gconv_gru"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &SnapshotConfig,
        lag: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn SnapshotModel>> {
        Ok(Box::new(GConvGruModel::new(store, cfg, lag, rng)?))
    }
}

struct GConvLstmFactory;
impl SnapshotModelFactory for GConvLstmFactory {
    fn name(&self) -> &'static str {
        "gconv_lstm"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &SnapshotConfig,
        lag: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn SnapshotModel>> {
        Ok(Box::new(GConvLstmModel::new(store, cfg, lag, rng)?))
    }
}

struct EvolveOFactory;
impl SnapshotModelFactory for EvolveOFactory {
    fn name(&self) -> &'static str {
        "evolvegcn_o"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &SnapshotConfig,
        lag: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn SnapshotModel>> {
        Ok(Box::new(EvolveOModel::new(store, cfg, lag, rng)?))
    }
}

struct EvolveHFactory;
impl SnapshotModelFactory for EvolveHFactory {
    fn name(&self) -> &'static str {
        "evolvegcn_h"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &SnapshotConfig,
        lag: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn SnapshotModel>> {
        Ok(Box::new(EvolveHModel::new(store, cfg, lag, rng)?))
    }
}

struct TgnFactory;
impl EventModelFactory for TgnFactory {
    fn name(&self) -> &'static str {
        "tgn"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &EventConfig,
        num_nodes: usize,
        d_edge: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn EventModel>> {
        match cfg {
            EventConfig::Tgn(c) => Ok(Box::new(Tgn::new(store, c.clone(), num_nodes, d_edge, rng)?)),
            other => Err(TgnnError::Config(format!(
                "model 'tgn' got a '{}' configuration",
                other.family()
            ))),
        }
    }
}

struct TgatFactory;
impl EventModelFactory for TgatFactory {
    fn name(&self) -> &'static str {
        "tgat"
    }
    fn build(
        &self,
        store: &mut ParamStore,
        cfg: &EventConfig,
        num_nodes: usize,
        d_edge: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn EventModel>> {
        match cfg {
            EventConfig::Tgat(c) => Ok(Box::new(Tgat::new(store, c.clone(), num_nodes, d_edge, rng)?)),
            other => Err(TgnnError::Config(format!(
                "model 'tgat' got a '{}' configuration",
                other.family()
            ))),
        }
    }
}
