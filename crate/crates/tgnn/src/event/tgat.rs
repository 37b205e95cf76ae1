//! Memoryless event model: stacked temporal attention over interaction
//! histories, with configurable scoring, combination, and time features.

use std::collections::HashMap;

use autodiff::{Ctx, ParamId, ParamStore, Tape, Value};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Event;
use crate::error::{Result, TgnnError};

use super::attn::{CombineMode, LayerKind, ScoreMode, TemporalLayer, TemporalLayerSpec, TemporalStack, TimeFeatures, TimeMode};
use super::neighbors::NeighborStore;
use super::time::TimeEncoder;
use super::EventModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TgatConfig {
    pub agg_method: CombineMode,
    pub attn_mode: ScoreMode,
    pub time_mode: TimeMode,
    pub num_layers: usize,
    pub hidden: usize,
    /// Width of the time feature; the source hyperparameter table leaves it
    /// unstated, so it defaults to the hidden size.
    pub d_time: usize,
    pub neighbors: usize,
    pub dropout: f64,
    pub heads: usize,
    pub batch_size: usize,
}

impl Default for TgatConfig {
    fn default() -> Self {
        TgatConfig {
            agg_method: CombineMode::Attn,
            attn_mode: ScoreMode::Prod,
            time_mode: TimeMode::Time,
            num_layers: 2,
            hidden: 64,
            d_time: 64,
            neighbors: 10,
            dropout: 0.5,
            heads: 2,
            batch_size: 256,
        }
    }
}

impl TgatConfig {
    /// The nine named ablation rows. Learning-rate-only rows reuse the base
    /// configuration (the rate itself lives in the training config).
    pub fn named(name: &str) -> Result<TgatConfig> {
        let mut cfg = TgatConfig::default();
        match name {
            "TGAT-attn" | "TGAT-0.00001" | "TGAT-0.001" | "TGAT-0.01" => {}
            "TGAT-lstm" => cfg.agg_method = CombineMode::Lstm,
            "TGAT-mean" => cfg.agg_method = CombineMode::Mean,
            "TGAT-map" => cfg.attn_mode = ScoreMode::Map,
            "TGAT-pos" => cfg.time_mode = TimeMode::Pos,
            "TGAT-empty" => cfg.time_mode = TimeMode::Empty,
            other => return Err(TgnnError::Config(format!("unknown TGAT configuration '{}'", other))),
        }
        Ok(cfg)
    }
}

pub struct Tgat {
    cfg: TgatConfig,
    num_nodes: usize,
    time_enc: Option<TimeEncoder>,
    pos_table: Option<ParamId>,
    stack: TemporalStack,
    neighbors: NeighborStore,
    event_feats: HashMap<usize, Vec<f64>>,
}

impl Tgat {
    pub fn new(
        store: &mut ParamStore,
        cfg: TgatConfig,
        num_nodes: usize,
        d_edge: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if cfg.num_layers < 1 {
            return Err(TgnnError::Config("num_layers must be >= 1".to_string()));
        }
        let time_enc = matches!(cfg.time_mode, TimeMode::Time).then(|| TimeEncoder::new(store, "tgat.time", cfg.d_time));
        let pos_table = matches!(cfg.time_mode, TimeMode::Pos).then(|| {
            let rows = cfg.neighbors + 1; // last row marks the query itself
            let data: Vec<f64> = (0..rows * cfg.d_time).map(|_| rng.random_range(-0.1..0.1)).collect();
            store.register("tgat.pos_table", &[rows, cfg.d_time], data)
        });
        let mut layers = Vec::new();
        for l in 1..=cfg.num_layers {
            // Streams here carry no raw node features, so level-0 reps have
            // width zero and everything enters through edges and time.
            let d_node = if l == 1 { 0 } else { cfg.hidden };
            layers.push(TemporalLayer::new(
                store,
                &format!("tgat.layer{l}"),
                TemporalLayerSpec {
                    kind: LayerKind::Attention {
                        score: cfg.attn_mode,
                        combine: cfg.agg_method,
                    },
                    d_node,
                    d_edge,
                    d_time: cfg.d_time,
                    d_out: cfg.hidden,
                    heads: cfg.heads,
                    dropout: cfg.dropout,
                },
                rng,
            )?);
        }
        Ok(Tgat {
            stack: TemporalStack {
                layers,
                neighbors_per_hop: cfg.neighbors,
            },
            cfg,
            num_nodes,
            time_enc,
            pos_table,
            neighbors: NeighborStore::new(num_nodes),
            event_feats: HashMap::new(),
        })
    }

    pub fn config(&self) -> &TgatConfig {
        &self.cfg
    }

    fn time_features(&self) -> TimeFeatures<'_> {
        match self.cfg.time_mode {
            TimeMode::Time => TimeFeatures::Encoder(self.time_enc.as_ref().expect("time mode")),
            TimeMode::Pos => TimeFeatures::PosTable(self.pos_table.expect("pos mode"), self.cfg.neighbors),
            TimeMode::Empty => TimeFeatures::Empty,
        }
    }
}

impl EventModel for Tgat {
    fn name(&self) -> &'static str {
        "tgat"
    }

    fn out_dim(&self) -> usize {
        self.cfg.hidden
    }

    fn params_prefix(&self) -> &'static str {
        "tgat."
    }

    fn reset(&mut self) {
        self.neighbors = NeighborStore::new(self.num_nodes);
        self.event_feats.clear();
    }

    fn refresh_memory(&mut self, _ctx: &mut Ctx, _events: &[Event]) -> Result<()> {
        Ok(())
    }

    fn embed(&mut self, ctx: &mut Ctx, queries: &[(usize, f64)], train: bool, rng: &mut ChaCha8Rng) -> Result<Value> {
        let mut level0 =
            |ctx: &mut Ctx, nodes: &[usize]| -> Result<Value> { Ok(ctx.tape.constant(&[nodes.len(), 0], Vec::new())?) };
        self.stack.embed(
            ctx,
            queries,
            &mut level0,
            &self.neighbors,
            &self.event_feats,
            &self.time_features(),
            train,
            rng,
        )
    }

    fn ingest(&mut self, _ctx: &mut Ctx, events: &[Event]) -> Result<()> {
        for ev in events {
            self.event_feats.insert(ev.idx, ev.features.clone());
            self.neighbors.record_event(ev)?;
        }
        Ok(())
    }

    fn detach(&mut self, _tape: &Tape) {}
}
