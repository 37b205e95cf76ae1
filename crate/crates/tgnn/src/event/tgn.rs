//! Memory-based event model: per-node memory updated by a GRU over
//! aggregated mail, with four interchangeable embedding modules.

use std::collections::HashMap;

use autodiff::{glorot_uniform, Ctx, ParamId, ParamStore, Tape, Value};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Event;
use crate::error::{Result, TgnnError};
use crate::nn::{DenseGru, Linear};

use super::attn::{CombineMode, LayerKind, ScoreMode, TemporalLayer, TemporalLayerSpec, TemporalStack, TimeFeatures};
use super::neighbors::NeighborStore;
use super::state::{Memory, RawMessage, RawMessageStore, StoredVec};
use super::time::TimeEncoder;
use super::EventModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    Identity,
    Time,
    Sum,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorMode {
    Last,
    Mean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TgnConfig {
    pub embedding: EmbeddingMode,
    pub aggregator: AggregatorMode,
    pub use_memory: bool,
    pub num_layers: usize,
    pub heads: usize,
    pub d_mem: usize,
    pub d_emb: usize,
    pub d_time: usize,
    pub neighbors: usize,
    pub dropout: f64,
    pub batch_size: usize,
}

impl Default for TgnConfig {
    fn default() -> Self {
        TgnConfig {
            embedding: EmbeddingMode::Attention,
            aggregator: AggregatorMode::Last,
            use_memory: true,
            num_layers: 1,
            heads: 2,
            d_mem: 172,
            d_emb: 100,
            d_time: 100,
            neighbors: 10,
            dropout: 0.1,
            batch_size: 200,
        }
    }
}

impl TgnConfig {
    /// The seven named ablation rows.
    pub fn named(name: &str) -> Result<TgnConfig> {
        let mut cfg = TgnConfig::default();
        match name {
            "TGN-attn" => {}
            "TGN-id" => cfg.embedding = EmbeddingMode::Identity,
            "TGN-time" => cfg.embedding = EmbeddingMode::Time,
            "TGN-sum" => cfg.embedding = EmbeddingMode::Sum,
            "TGN-mean" => cfg.aggregator = AggregatorMode::Mean,
            "TGN-l2" => cfg.num_layers = 2,
            "TGN-no mem" => cfg.use_memory = false,
            other => return Err(TgnnError::Config(format!("unknown TGN configuration '{}'", other))),
        }
        Ok(cfg)
    }
}

pub struct Tgn {
    cfg: TgnConfig,
    num_nodes: usize,
    d_edge: usize,
    time_enc: TimeEncoder,
    memory_gru: Option<DenseGru>,
    memory: Memory,
    mail: RawMessageStore,
    neighbors: NeighborStore,
    event_feats: HashMap<usize, Vec<f64>>,
    ident_proj: Option<Linear>,
    time_proj: Option<Linear>,
    time_w: Option<ParamId>,
    stack: Option<TemporalStack>,
}

impl Tgn {
    pub fn new(
        store: &mut ParamStore,
        cfg: TgnConfig,
        num_nodes: usize,
        d_edge: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(1..=2).contains(&cfg.num_layers) {
            return Err(TgnnError::Config(format!("num_layers must be 1 or 2, got {}", cfg.num_layers)));
        }
        if !cfg.use_memory && !matches!(cfg.embedding, EmbeddingMode::Attention) {
            return Err(TgnnError::Config(
                "the no-memory variant requires the attention embedding".to_string(),
            ));
        }
        let time_enc = TimeEncoder::new(store, "tgn.time", cfg.d_time);
        let payload_dim = 2 * cfg.d_mem + cfg.d_time + d_edge;
        let memory_gru = cfg
            .use_memory
            .then(|| DenseGru::new(store, "tgn.memory_gru", payload_dim, cfg.d_mem, rng));
        // Base rep width: memory rows, or raw node features (none here) when
        // memory is off.
        let d0 = if cfg.use_memory { cfg.d_mem } else { 0 };
        let mut ident_proj = None;
        let mut time_proj = None;
        let mut time_w = None;
        let mut stack = None;
        match cfg.embedding {
            EmbeddingMode::Identity => {
                ident_proj = Some(Linear::new(store, "tgn.ident_proj", cfg.d_mem, cfg.d_emb, rng));
            }
            EmbeddingMode::Time => {
                time_proj = Some(Linear::new(store, "tgn.time_proj", cfg.d_mem, cfg.d_emb, rng));
                time_w = Some(store.register("tgn.time_w", &[1, cfg.d_mem], glorot_uniform(1, cfg.d_mem, rng)));
            }
            EmbeddingMode::Sum | EmbeddingMode::Attention => {
                let kind = |_l: usize| match cfg.embedding {
                    EmbeddingMode::Sum => LayerKind::SumAggregate,
                    _ => LayerKind::Attention {
                        score: ScoreMode::Prod,
                        combine: CombineMode::Attn,
                    },
                };
                let mut layers = Vec::new();
                for l in 1..=cfg.num_layers {
                    let d_node = if l == 1 { d0 } else { cfg.d_emb };
                    layers.push(TemporalLayer::new(
                        store,
                        &format!("tgn.layer{l}"),
                        TemporalLayerSpec {
                            kind: kind(l),
                            d_node,
                            d_edge,
                            d_time: cfg.d_time,
                            d_out: cfg.d_emb,
                            heads: cfg.heads,
                            dropout: cfg.dropout,
                        },
                        rng,
                    )?);
                }
                stack = Some(TemporalStack {
                    layers,
                    neighbors_per_hop: cfg.neighbors,
                });
            }
        }
        Ok(Tgn {
            cfg,
            num_nodes,
            d_edge,
            time_enc,
            memory_gru,
            memory: Memory::new(if d0 > 0 { d0 } else { 1 }),
            mail: RawMessageStore::new(),
            neighbors: NeighborStore::new(num_nodes),
            event_feats: HashMap::new(),
            ident_proj,
            time_proj,
            time_w,
            stack,
        })
    }

    pub fn config(&self) -> &TgnConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    /// Aggregate one node's pending mail per the configured rule.
    fn aggregate(&self, tape: &mut Tape, mails: &[RawMessage]) -> Result<(Value, f64)> {
        if mails.is_empty() {
            return Err(TgnnError::Contract("aggregate of empty mail".to_string()));
        }
        let payload_dim = 2 * self.cfg.d_mem + self.cfg.d_time + self.d_edge;
        let t_agg = mails.iter().map(|m| m.t).fold(f64::NEG_INFINITY, f64::max);
        match self.cfg.aggregator {
            AggregatorMode::Last => {
                let best = mails
                    .iter()
                    .max_by(|a, b| a.t.partial_cmp(&b.t).unwrap().then(a.event_idx.cmp(&b.event_idx)))
                    .expect("non-empty");
                Ok((best.payload.to_value(tape, payload_dim)?, t_agg))
            }
            AggregatorMode::Mean => {
                let rows: Vec<Value> = mails
                    .iter()
                    .map(|m| m.payload.to_value(tape, payload_dim))
                    .collect::<Result<_>>()?;
                let stacked = tape.concat(0, &rows)?;
                Ok((tape.mean(stacked, Some(0))?, t_agg))
            }
        }
    }

    /// Memory rows for distinct `nodes` as one matrix.
    fn memory_matrix(&self, tape: &mut Tape, nodes: &[usize]) -> Result<Value> {
        let rows: Vec<Value> = nodes
            .iter()
            .map(|&n| self.memory.row_value(tape, n))
            .collect::<Result<_>>()?;
        tape.concat(0, &rows).map_err(Into::into)
    }
}

impl EventModel for Tgn {
    fn name(&self) -> &'static str {
        "tgn"
    }

    fn out_dim(&self) -> usize {
        self.cfg.d_emb
    }

    fn params_prefix(&self) -> &'static str {
        "tgn."
    }

    fn reset(&mut self) {
        self.memory.reset();
        self.mail.reset();
        self.neighbors = NeighborStore::new(self.num_nodes);
        self.event_feats.clear();
    }

    /// Apply pending mail for every node of the batch, in node order:
    /// aggregated message through the memory GRU, committed as live rows.
    fn refresh_memory(&mut self, ctx: &mut Ctx, events: &[Event]) -> Result<()> {
        if !self.cfg.use_memory {
            return Ok(());
        }
        let mut nodes: Vec<usize> = events.iter().flat_map(|e| [e.src, e.dst]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes.retain(|&n| self.mail.has_pending(n));
        if nodes.is_empty() {
            return Ok(());
        }
        let mut messages = Vec::with_capacity(nodes.len());
        let mut times = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            let mails = self.mail.take(n);
            let (msg, t_agg) = self.aggregate(ctx.tape, &mails)?;
            messages.push(msg);
            times.push(t_agg);
        }
        let m = ctx.tape.concat(0, &messages)?;
        let h = self.memory_matrix(ctx.tape, &nodes)?;
        let gru = self.memory_gru.as_ref().expect("memory enabled");
        let h_new = gru.step(ctx, m, h)?;
        for (i, &n) in nodes.iter().enumerate() {
            let row = ctx.tape.slice(h_new, 0, i, i + 1)?;
            self.memory.set_row_live(n, row);
            self.memory.set_last_update(n, times[i]);
        }
        Ok(())
    }

    fn embed(&mut self, ctx: &mut Ctx, queries: &[(usize, f64)], train: bool, rng: &mut ChaCha8Rng) -> Result<Value> {
        match self.cfg.embedding {
            EmbeddingMode::Identity => {
                let mut nodes: Vec<usize> = queries.iter().map(|&(v, _)| v).collect();
                nodes.sort_unstable();
                nodes.dedup();
                let row_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                let mat = self.memory_matrix(ctx.tape, &nodes)?;
                let rows: Vec<usize> = queries.iter().map(|&(v, _)| row_of[&v]).collect();
                let s = ctx.tape.index_select(mat, &rows)?;
                self.ident_proj.as_ref().expect("identity mode").apply(ctx, s)
            }
            EmbeddingMode::Time => {
                let mut nodes: Vec<usize> = queries.iter().map(|&(v, _)| v).collect();
                nodes.sort_unstable();
                nodes.dedup();
                let row_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                let mat = self.memory_matrix(ctx.tape, &nodes)?;
                let rows: Vec<usize> = queries.iter().map(|&(v, _)| row_of[&v]).collect();
                let s = ctx.tape.index_select(mat, &rows)?;
                // (1 + dt * w) elementwise, dt measured since the last write.
                let deltas: Vec<f64> = queries
                    .iter()
                    .map(|&(v, t)| t - self.memory.last_update(v))
                    .collect();
                let m = queries.len();
                let dt = ctx.tape.constant(&[m, 1], deltas)?;
                let w = ctx.param(self.time_w.expect("time mode"))?;
                let outer = ctx.tape.matmul(dt, w)?;
                let ones = ctx.tape.ones(&[m, self.cfg.d_mem])?;
                let factor = ctx.tape.add(ones, outer)?;
                let scaled = ctx.tape.mul(factor, s)?;
                self.time_proj.as_ref().expect("time mode").apply(ctx, scaled)
            }
            EmbeddingMode::Sum | EmbeddingMode::Attention => {
                let stack = self.stack.as_ref().expect("stacked modes");
                let use_memory = self.cfg.use_memory;
                let memory = &self.memory;
                let mut level0 = |ctx: &mut Ctx, nodes: &[usize]| -> Result<Value> {
                    if use_memory {
                        let rows: Vec<Value> = nodes
                            .iter()
                            .map(|&n| memory.row_value(ctx.tape, n))
                            .collect::<Result<_>>()?;
                        Ok(ctx.tape.concat(0, &rows)?)
                    } else {
                        // Featureless stream: width-zero base reps.
                        Ok(ctx.tape.constant(&[nodes.len(), 0], Vec::new())?)
                    }
                };
                stack.embed(
                    ctx,
                    queries,
                    &mut level0,
                    &self.neighbors,
                    &self.event_feats,
                    &TimeFeatures::Encoder(&self.time_enc),
                    train,
                    rng,
                )
            }
        }
    }

    /// Build raw mail for both endpoints of each event from batch-start
    /// memory, then record the events into the neighbor history.
    fn ingest(&mut self, ctx: &mut Ctx, events: &[Event]) -> Result<()> {
        if self.cfg.use_memory && !events.is_empty() {
            let mut nodes: Vec<usize> = events.iter().flat_map(|e| [e.src, e.dst]).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let row_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let mat = self.memory_matrix(ctx.tape, &nodes)?;

            // Mail order: (src of e0, dst of e0, src of e1, ...).
            let mut self_rows = Vec::with_capacity(2 * events.len());
            let mut other_rows = Vec::with_capacity(2 * events.len());
            let mut deltas = Vec::with_capacity(2 * events.len());
            let mut feat_rows = Vec::with_capacity(2 * events.len());
            let mut feat_data = Vec::with_capacity(events.len() * self.d_edge);
            for (j, ev) in events.iter().enumerate() {
                feat_data.extend_from_slice(&ev.features);
                for (me, other) in [(ev.src, ev.dst), (ev.dst, ev.src)] {
                    self_rows.push(row_of[&me]);
                    other_rows.push(row_of[&other]);
                    deltas.push(ev.t - self.memory.last_update(me));
                    feat_rows.push(j);
                }
            }
            let ef = ctx.tape.constant(&[events.len(), self.d_edge], feat_data)?;
            let s_self = ctx.tape.index_select(mat, &self_rows)?;
            let s_other = ctx.tape.index_select(mat, &other_rows)?;
            let phi = self.time_enc.encode(ctx, &deltas)?;
            let e2 = ctx.tape.index_select(ef, &feat_rows)?;
            let payload = ctx.tape.concat(1, &[s_self, s_other, phi, e2])?;
            for (j, ev) in events.iter().enumerate() {
                for (k, node) in [(2 * j, ev.src), (2 * j + 1, ev.dst)] {
                    let row = ctx.tape.slice(payload, 0, k, k + 1)?;
                    self.mail.push(
                        node,
                        RawMessage {
                            t: ev.t,
                            event_idx: ev.idx,
                            payload: StoredVec::Live(row),
                        },
                    );
                }
            }
        }
        for ev in events {
            self.event_feats.insert(ev.idx, ev.features.clone());
            self.neighbors.record_event(ev)?;
        }
        Ok(())
    }

    fn detach(&mut self, tape: &Tape) {
        self.memory.detach_all(tape);
        self.mail.detach_all(tape);
    }
}
