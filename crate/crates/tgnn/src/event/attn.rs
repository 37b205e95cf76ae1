//! Temporal neighborhood aggregation over `(node, time)` queries.
//!
//! Queries with the same neighbor count are batched together: per neighbor
//! slot, one row per query. Node-rep and edge-feature projections are
//! computed once per call and gathered per slot, which keeps the matmul work
//! proportional to distinct inputs rather than query-slot pairs.

use std::collections::BTreeMap;
use std::collections::HashMap;

use autodiff::{glorot_uniform, Ctx, ParamId, ParamStore, Value};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TgnnError};
use crate::nn::{Linear, Mlp2};

use super::neighbors::NeighborStore;
use super::time::TimeEncoder;

/// How neighbor entries are scored against the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Scaled dot product per head.
    Prod,
    /// Two-layer perceptron on the raw `[query || key]` pair, one score per head.
    Map,
}

/// How scored entries are combined into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// Softmax-weighted sum of value projections.
    Attn,
    /// Sequence cell over value projections in time order, final hidden.
    Lstm,
    /// Unweighted mean of value projections.
    Mean,
}

/// What the per-entry time feature is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    /// Learnable cosine encoding of the time delta.
    Time,
    /// Learned embedding of the recency rank (0 = most recent).
    Pos,
    /// Zero vector.
    Empty,
}

/// Layer flavor: attention-style aggregation or the plain summed messages.
pub enum LayerKind {
    Attention {
        score: ScoreMode,
        combine: CombineMode,
    },
    /// h' = relu(W_self h + sum_j W_nbr [h_j || e_j || phi]) per query.
    SumAggregate,
}

/// Time-feature provider shared across layers of one model.
pub enum TimeFeatures<'a> {
    Encoder(&'a TimeEncoder),
    /// (table param `k_max+1 x d_time`, k_max); row `k_max` marks the query itself.
    PosTable(ParamId, usize),
    Empty,
}

impl TimeFeatures<'_> {
    /// Rank-`rank` rows broadcast over `m` queries (pos mode), or encoded
    /// deltas, or zeros.
    fn features(&self, ctx: &mut Ctx, deltas: &[f64], rank: usize, d_time: usize) -> Result<Value> {
        let m = deltas.len();
        match self {
            TimeFeatures::Encoder(enc) => enc.encode(ctx, deltas),
            TimeFeatures::PosTable(table, _) => {
                let tv = ctx.param(*table)?;
                let row = ctx.tape.index_select(tv, &[rank])?;
                let ones = ctx.tape.ones(&[m, 1])?;
                Ok(ctx.tape.matmul(ones, row)?)
            }
            TimeFeatures::Empty => Ok(ctx.tape.zeros(&[m, d_time])?),
        }
    }
}

/// One temporal aggregation layer.
pub struct TemporalLayer {
    pub kind: LayerKind,
    pub d_node: usize,
    pub d_edge: usize,
    pub d_time: usize,
    pub d_out: usize,
    pub heads: usize,
    wq: Option<Linear>,
    wk_node: ParamId,
    wk_edge: ParamId,
    wk_time: ParamId,
    bk: ParamId,
    wv_node: Option<ParamId>,
    wv_edge: Option<ParamId>,
    wv_time: Option<ParamId>,
    bv: Option<ParamId>,
    out_mlp: Option<Mlp2>,
    map_mlp: Option<Mlp2>,
    lstm: Option<crate::nn::DenseLstm>,
    w_self: Option<ParamId>,
    dropout: f64,
}

pub struct TemporalLayerSpec {
    pub kind: LayerKind,
    pub d_node: usize,
    pub d_edge: usize,
    pub d_time: usize,
    pub d_out: usize,
    pub heads: usize,
    pub dropout: f64,
}

impl TemporalLayer {
    pub fn new(store: &mut ParamStore, name: &str, spec: TemporalLayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let TemporalLayerSpec {
            kind,
            d_node,
            d_edge,
            d_time,
            d_out,
            heads,
            dropout,
        } = spec;
        if matches!(kind, LayerKind::Attention { .. }) && d_out % heads.max(1) != 0 {
            return Err(TgnnError::Config(format!(
                "attention width {} not divisible by {} heads",
                d_out, heads
            )));
        }
        let entry_dim = d_node + d_edge + d_time;
        let mat = |store: &mut ParamStore, suffix: &str, r: usize, c: usize, rng: &mut ChaCha8Rng| {
            store.register(format!("{name}.{suffix}"), &[r, c], glorot_uniform(r, c, rng))
        };
        let wk_node = mat(store, "wk_node", d_node, d_out, rng);
        let wk_edge = mat(store, "wk_edge", d_edge, d_out, rng);
        let wk_time = mat(store, "wk_time", d_time, d_out, rng);
        let bk = store.register(format!("{name}.bk"), &[d_out], vec![0.0; d_out]);
        match kind {
            LayerKind::Attention { score, combine } => {
                let wq = Linear::new(store, &format!("{name}.wq"), d_node + d_time, d_out, rng);
                let wv_node = mat(store, "wv_node", d_node, d_out, rng);
                let wv_edge = mat(store, "wv_edge", d_edge, d_out, rng);
                let wv_time = mat(store, "wv_time", d_time, d_out, rng);
                let bv = store.register(format!("{name}.bv"), &[d_out], vec![0.0; d_out]);
                let out_mlp = Mlp2::new(store, &format!("{name}.out"), d_out + d_node, d_out, d_out, dropout, rng);
                let map_mlp = match score {
                    ScoreMode::Map => Some(Mlp2::new(
                        store,
                        &format!("{name}.map"),
                        (d_node + d_time) + entry_dim,
                        d_out,
                        heads,
                        0.0,
                        rng,
                    )),
                    ScoreMode::Prod => None,
                };
                let lstm = match combine {
                    CombineMode::Lstm => Some(crate::nn::DenseLstm::new(store, &format!("{name}.lstm"), d_out, d_out, rng)),
                    _ => None,
                };
                Ok(TemporalLayer {
                    kind,
                    d_node,
                    d_edge,
                    d_time,
                    d_out,
                    heads,
                    wq: Some(wq),
                    wk_node,
                    wk_edge,
                    wk_time,
                    bk,
                    wv_node: Some(wv_node),
                    wv_edge: Some(wv_edge),
                    wv_time: Some(wv_time),
                    bv: Some(bv),
                    out_mlp: Some(out_mlp),
                    map_mlp,
                    lstm,
                    w_self: None,
                    dropout,
                })
            }
            LayerKind::SumAggregate => {
                let w_self = mat(store, "w_self", d_node, d_out, rng);
                Ok(TemporalLayer {
                    kind,
                    d_node,
                    d_edge,
                    d_time,
                    d_out,
                    heads,
                    wq: None,
                    wk_node,
                    wk_edge,
                    wk_time,
                    bk,
                    wv_node: None,
                    wv_edge: None,
                    wv_time: None,
                    bv: None,
                    out_mlp: None,
                    map_mlp: None,
                    lstm: None,
                    w_self: Some(w_self),
                    dropout,
                })
            }
        }
    }

    /// Apply over `queries` given their neighbor samples and the child
    /// representations computed one level down.
    ///
    /// `self_rows[q]` locates the query's own rep in `child_reps`;
    /// `slot_rows[q][s]` and the event/delta arrays locate each neighbor.
    #[allow(clippy::too_many_arguments)]
    pub fn apply(
        &self,
        ctx: &mut Ctx,
        queries: &[(usize, f64)],
        samples: &[Vec<(usize, usize, f64)>],
        child_reps: Value,
        self_rows: &[usize],
        child_row: &dyn Fn(usize, f64) -> usize,
        event_feats: &HashMap<usize, Vec<f64>>,
        time: &TimeFeatures,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Value> {
        let m = queries.len();
        debug_assert_eq!(samples.len(), m);

        // Deduped edge-feature matrix for every referenced event.
        let mut event_ids: Vec<usize> = samples.iter().flatten().map(|&(_, e, _)| e).collect();
        event_ids.sort_unstable();
        event_ids.dedup();
        let mut event_row: HashMap<usize, usize> = HashMap::with_capacity(event_ids.len());
        let mut ef_data = Vec::with_capacity(event_ids.len() * self.d_edge);
        for (row, &eid) in event_ids.iter().enumerate() {
            let feats = event_feats.get(&eid).ok_or_else(|| {
                TgnnError::Contract(format!("neighbor references unknown event {}", eid))
            })?;
            ef_data.extend_from_slice(feats);
            event_row.insert(eid, row);
        }
        let ef = ctx.tape.constant(&[event_ids.len(), self.d_edge], ef_data)?;

        // Shared projections.
        let wk_node = ctx.param(self.wk_node)?;
        let wk_edge = ctx.param(self.wk_edge)?;
        let wk_time = ctx.param(self.wk_time)?;
        let hk = ctx.tape.matmul(child_reps, wk_node)?;
        let ek = ctx.tape.matmul(ef, wk_edge)?;

        let self_reps = ctx.tape.index_select(child_reps, self_rows)?;

        // Group queries by neighbor count.
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (q, s) in samples.iter().enumerate() {
            groups.entry(s.len()).or_default().push(q);
        }

        match self.kind {
            LayerKind::SumAggregate => self.apply_sum(
                ctx, queries, samples, &groups, self_reps, child_row, hk, ek, wk_time, event_row, time,
            ),
            LayerKind::Attention { score, combine } => self.apply_attention(
                ctx, queries, samples, &groups, child_reps, self_reps, self_rows, child_row, hk, ek, wk_time, ef,
                event_row, time, score, combine, train, rng,
            ),
        }
    }

    /// Reassemble per-group row blocks back into query order.
    fn reorder(&self, ctx: &mut Ctx, groups: &BTreeMap<usize, Vec<usize>>, blocks: Vec<Value>, m: usize) -> Result<Value> {
        let stacked = ctx.tape.concat(0, &blocks)?;
        let mut row_of_query = vec![0usize; m];
        let mut row = 0;
        for qidx in groups.values() {
            for &q in qidx {
                row_of_query[q] = row;
                row += 1;
            }
        }
        Ok(ctx.tape.index_select(stacked, &row_of_query)?)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_sum(
        &self,
        ctx: &mut Ctx,
        queries: &[(usize, f64)],
        samples: &[Vec<(usize, usize, f64)>],
        groups: &BTreeMap<usize, Vec<usize>>,
        self_reps: Value,
        child_row: &dyn Fn(usize, f64) -> usize,
        hk: Value,
        ek: Value,
        wk_time: Value,
        event_row: HashMap<usize, usize>,
        time: &TimeFeatures,
    ) -> Result<Value> {
        let m = queries.len();
        let mut blocks = Vec::new();
        for (&n, qidx) in groups {
            let mg = qidx.len();
            if n == 0 {
                blocks.push(ctx.tape.zeros(&[mg, self.d_out])?);
                continue;
            }
            let mut acc: Option<Value> = None;
            for s in 0..n {
                let ks = self.slot_key(
                    ctx, queries, samples, qidx, s, n, hk, ek, wk_time, &event_row, time,
                    Some(child_row),
                )?;
                acc = Some(match acc {
                    None => ks,
                    Some(a) => ctx.tape.add(a, ks)?,
                });
            }
            blocks.push(acc.expect("n > 0"));
        }
        let combined = self.reorder(ctx, groups, blocks, m)?;
        let w_self = ctx.param(self.w_self.expect("sum kind"))?;
        let own = ctx.tape.matmul(self_reps, w_self)?;
        let pre = ctx.tape.add(own, combined)?;
        let bk = ctx.param(self.bk)?;
        let biased = ctx.tape.broadcast_add_bias(pre, bk)?;
        Ok(ctx.tape.relu(biased))
    }

    /// Projected key for one slot of one group (bias deferred to the caller
    /// for the attention path, included for the sum path).
    #[allow(clippy::too_many_arguments)]
    fn slot_key(
        &self,
        ctx: &mut Ctx,
        queries: &[(usize, f64)],
        samples: &[Vec<(usize, usize, f64)>],
        qidx: &[usize],
        s: usize,
        n: usize,
        hk: Value,
        ek: Value,
        wk_time: Value,
        event_row: &HashMap<usize, usize>,
        time: &TimeFeatures,
        child_row: Option<&dyn Fn(usize, f64) -> usize>,
    ) -> Result<Value> {
        let crow: Vec<usize> = match child_row {
            Some(f) => qidx.iter().map(|&q| f(samples[q][s].0, samples[q][s].2)).collect(),
            None => Vec::new(),
        };
        let erow: Vec<usize> = qidx.iter().map(|&q| event_row[&samples[q][s].1]).collect();
        let deltas: Vec<f64> = qidx.iter().map(|&q| queries[q].1 - samples[q][s].2).collect();
        // Rank 0 = most recent; sample order is most-recent-last.
        let rank = n - 1 - s;
        let tfeat = time.features(ctx, &deltas, rank, self.d_time)?;
        let tk = ctx.tape.matmul(tfeat, wk_time)?;
        let ekk = ctx.tape.index_select(ek, &erow)?;
        let mut ks = ctx.tape.add(ekk, tk)?;
        if self.d_node > 0 {
            let sel = match child_row {
                Some(_) => ctx.tape.index_select(hk, &crow)?,
                None => unreachable!("node reps require a child row map"),
            };
            ks = ctx.tape.add(ks, sel)?;
        }
        Ok(ks)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_attention(
        &self,
        ctx: &mut Ctx,
        queries: &[(usize, f64)],
        samples: &[Vec<(usize, usize, f64)>],
        groups: &BTreeMap<usize, Vec<usize>>,
        child_reps: Value,
        self_reps: Value,
        self_rows: &[usize],
        child_row: &dyn Fn(usize, f64) -> usize,
        hk: Value,
        ek: Value,
        wk_time: Value,
        ef: Value,
        event_row: HashMap<usize, usize>,
        time: &TimeFeatures,
        score: ScoreMode,
        combine: CombineMode,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Value> {
        let m = queries.len();
        let d_head = self.d_out / self.heads;

        // Query side: [self rep || T(query)], projected once for all queries.
        let zero_deltas = vec![0.0; m];
        let q_rank = match time {
            TimeFeatures::PosTable(_, k_max) => *k_max,
            _ => 0,
        };
        let q_time = time.features(ctx, &zero_deltas, q_rank, self.d_time)?;
        let q_in = ctx.tape.concat(1, &[self_reps, q_time])?;
        let wq = self.wq.as_ref().expect("attention kind");
        let mut qp = wq.apply(ctx, q_in)?;
        if matches!(score, ScoreMode::Prod) {
            // Fold the per-head 1/sqrt(d) into the query projection.
            let scale = ctx.tape.constant(&[m, self.d_out], vec![1.0 / (d_head as f64).sqrt(); m * self.d_out])?;
            qp = ctx.tape.mul(qp, scale)?;
        }

        let wv_node = ctx.param(self.wv_node.expect("attention kind"))?;
        let wv_edge = ctx.param(self.wv_edge.expect("attention kind"))?;
        let wv_time = ctx.param(self.wv_time.expect("attention kind"))?;
        let hv = ctx.tape.matmul(child_reps, wv_node)?;
        let ev = ctx.tape.matmul(ef, wv_edge)?;

        let mut blocks = Vec::new();
        for (&n, qidx) in groups {
            let mg = qidx.len();
            if n == 0 {
                blocks.push(ctx.tape.zeros(&[mg, self.d_out])?);
                continue;
            }
            let bk = ctx.param(self.bk)?;
            let bv = ctx.param(self.bv.expect("attention kind"))?;
            let qp_g = ctx.tape.index_select(qp, qidx)?;

            // Per-slot keys and values.
            let mut keys = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(n);
            for s in 0..n {
                let ks_raw = self.slot_key(
                    ctx, queries, samples, qidx, s, n, hk, ek, wk_time, &event_row, time,
                    Some(child_row),
                )?;
                keys.push(ctx.tape.broadcast_add_bias(ks_raw, bk)?);

                let crow: Vec<usize> = qidx.iter().map(|&q| child_row(samples[q][s].0, samples[q][s].2)).collect();
                let erow: Vec<usize> = qidx.iter().map(|&q| event_row[&samples[q][s].1]).collect();
                let deltas: Vec<f64> = qidx.iter().map(|&q| queries[q].1 - samples[q][s].2).collect();
                let tfeat = time.features(ctx, &deltas, n - 1 - s, self.d_time)?;
                let tv = ctx.tape.matmul(tfeat, wv_time)?;
                let evv = ctx.tape.index_select(ev, &erow)?;
                let mut vs = ctx.tape.add(evv, tv)?;
                if self.d_node > 0 {
                    let sel = ctx.tape.index_select(hv, &crow)?;
                    vs = ctx.tape.add(vs, sel)?;
                }
                vals.push(ctx.tape.broadcast_add_bias(vs, bv)?);
            }

            let combined = match combine {
                CombineMode::Lstm => {
                    let lstm = self.lstm.as_ref().expect("lstm combine");
                    let mut h = ctx.tape.zeros(&[mg, self.d_out])?;
                    let mut c = ctx.tape.zeros(&[mg, self.d_out])?;
                    for &v in &vals {
                        let (h2, c2) = lstm.step(ctx, v, h, c)?;
                        h = h2;
                        c = c2;
                    }
                    h
                }
                CombineMode::Mean => {
                    let mut acc = vals[0];
                    for &v in &vals[1..] {
                        acc = ctx.tape.add(acc, v)?;
                    }
                    let denom = ctx.tape.constant(&[mg, self.d_out], vec![n as f64; mg * self.d_out])?;
                    ctx.tape.div(acc, denom)?
                }
                CombineMode::Attn => {
                    // Scores per head and slot.
                    let mut head_weights: Vec<Value> = Vec::with_capacity(self.heads);
                    match score {
                        ScoreMode::Prod => {
                            let mut slot_scores: Vec<Vec<Value>> = vec![Vec::with_capacity(n); self.heads];
                            for key in keys.iter().take(n) {
                                let qk = ctx.tape.mul(qp_g, *key)?;
                                for h in 0..self.heads {
                                    let part = ctx.tape.slice(qk, 1, h * d_head, (h + 1) * d_head)?;
                                    let sc = ctx.tape.sum(part, Some(1))?;
                                    slot_scores[h].push(sc);
                                }
                            }
                            for scores in slot_scores {
                                let cat = ctx.tape.concat(1, &scores)?;
                                head_weights.push(ctx.tape.softmax(cat, 1)?);
                            }
                        }
                        ScoreMode::Map => {
                            let map_mlp = self.map_mlp.as_ref().expect("map score");
                            let q_in_g = ctx.tape.index_select(q_in, qidx)?;
                            let mut per_slot: Vec<Value> = Vec::with_capacity(n);
                            for s in 0..n {
                                // Raw entry [h_j || e_j || T], unprojected.
                                let erow: Vec<usize> =
                                    qidx.iter().map(|&q| event_row[&samples[q][s].1]).collect();
                                let deltas: Vec<f64> =
                                    qidx.iter().map(|&q| queries[q].1 - samples[q][s].2).collect();
                                let tfeat = time.features(ctx, &deltas, n - 1 - s, self.d_time)?;
                                let eraw = ctx.tape.index_select(ef, &erow)?;
                                let entry = if self.d_node > 0 {
                                    let crow: Vec<usize> = qidx
                                        .iter()
                                        .map(|&q| child_row(samples[q][s].0, samples[q][s].2))
                                        .collect();
                                    let hraw = ctx.tape.index_select(child_reps, &crow)?;
                                    ctx.tape.concat(1, &[hraw, eraw, tfeat])?
                                } else {
                                    ctx.tape.concat(1, &[eraw, tfeat])?
                                };
                                let pair = ctx.tape.concat(1, &[q_in_g, entry])?;
                                per_slot.push(map_mlp.apply(ctx, pair, train, rng)?);
                            }
                            for h in 0..self.heads {
                                let cols: Vec<Value> = per_slot
                                    .iter()
                                    .map(|&sc| ctx.tape.slice(sc, 1, h, h + 1))
                                    .collect::<std::result::Result<_, _>>()?;
                                let cat = ctx.tape.concat(1, &cols)?;
                                head_weights.push(ctx.tape.softmax(cat, 1)?);
                            }
                        }
                    }
                    // Weighted sums per head.
                    let mut head_outs = Vec::with_capacity(self.heads);
                    for (h, weights) in head_weights.iter().enumerate() {
                        let mut acc: Option<Value> = None;
                        for (s, v) in vals.iter().enumerate() {
                            let vh = ctx.tape.slice(*v, 1, h * d_head, (h + 1) * d_head)?;
                            let w_col = ctx.tape.slice(*weights, 1, s, s + 1)?;
                            let ones = ctx.tape.ones(&[1, d_head])?;
                            let w_full = ctx.tape.matmul(w_col, ones)?;
                            let contrib = ctx.tape.mul(w_full, vh)?;
                            acc = Some(match acc {
                                None => contrib,
                                Some(a) => ctx.tape.add(a, contrib)?,
                            });
                        }
                        head_outs.push(acc.expect("n > 0"));
                    }
                    ctx.tape.concat(1, &head_outs)?
                }
            };
            blocks.push(combined);
        }

        let combined_all = self.reorder(ctx, groups, blocks, m)?;
        let mlp_in = ctx.tape.concat(1, &[combined_all, self_reps])?;
        self.out_mlp
            .as_ref()
            .expect("attention kind")
            .apply(ctx, mlp_in, train, rng)
    }
}

/// Multi-layer recursion: layer `l` queries attend over neighbors whose
/// representations come from layer `l-1` evaluated at their event times.
pub struct TemporalStack {
    pub layers: Vec<TemporalLayer>,
    pub neighbors_per_hop: usize,
}

impl TemporalStack {
    /// Embed `queries`; `level0` maps distinct node ids to their base rep
    /// matrix (memory rows or raw features).
    #[allow(clippy::too_many_arguments)]
    pub fn embed(
        &self,
        ctx: &mut Ctx,
        queries: &[(usize, f64)],
        level0: &mut dyn FnMut(&mut Ctx, &[usize]) -> Result<Value>,
        neighbors: &NeighborStore,
        event_feats: &HashMap<usize, Vec<f64>>,
        time: &TimeFeatures,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Value> {
        self.embed_level(ctx, self.layers.len(), queries, level0, neighbors, event_feats, time, train, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn embed_level(
        &self,
        ctx: &mut Ctx,
        level: usize,
        queries: &[(usize, f64)],
        level0: &mut dyn FnMut(&mut Ctx, &[usize]) -> Result<Value>,
        neighbors: &NeighborStore,
        event_feats: &HashMap<usize, Vec<f64>>,
        time: &TimeFeatures,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Value> {
        assert!(level >= 1, "level 0 is a feature lookup");
        let samples: Vec<Vec<(usize, usize, f64)>> = queries
            .iter()
            .map(|&(node, t)| neighbors.sample_recent(node, t, self.neighbors_per_hop).to_vec())
            .collect();

        // Child queries: every sampled (node, t_event) plus each query itself.
        let (child_reps, self_rows, child_map) = if level == 1 {
            // Level-0 reps depend on the node only.
            let mut nodes: Vec<usize> = queries.iter().map(|&(v, _)| v).collect();
            nodes.extend(samples.iter().flatten().map(|&(v, _, _)| v));
            nodes.sort_unstable();
            nodes.dedup();
            let mut row_of: BTreeMap<usize, usize> = BTreeMap::new();
            for (i, &v) in nodes.iter().enumerate() {
                row_of.insert(v, i);
            }
            let reps = level0(ctx, &nodes)?;
            let self_rows: Vec<usize> = queries.iter().map(|&(v, _)| row_of[&v]).collect();
            (reps, self_rows, ChildMap::ByNode(row_of))
        } else {
            let mut keys: BTreeMap<(usize, u64), usize> = BTreeMap::new();
            for &(v, t) in queries {
                keys.entry((v, t.to_bits())).or_insert(0);
            }
            for s in samples.iter().flatten() {
                keys.entry((s.0, s.2.to_bits())).or_insert(0);
            }
            let mut child_queries = Vec::with_capacity(keys.len());
            for (i, (k, slot)) in keys.iter_mut().enumerate() {
                *slot = i;
                child_queries.push((k.0, f64::from_bits(k.1)));
            }
            let reps = self.embed_level(
                ctx,
                level - 1,
                &child_queries,
                level0,
                neighbors,
                event_feats,
                time,
                train,
                rng,
            )?;
            let self_rows: Vec<usize> = queries.iter().map(|&(v, t)| keys[&(v, t.to_bits())]).collect();
            (reps, self_rows, ChildMap::ByPair(keys))
        };

        let layer = &self.layers[level - 1];
        let lookup = |node: usize, t: f64| child_map.row(node, t);
        layer.apply(
            ctx,
            queries,
            &samples,
            child_reps,
            &self_rows,
            &lookup,
            event_feats,
            time,
            train,
            rng,
        )
    }
}

enum ChildMap {
    ByNode(BTreeMap<usize, usize>),
    ByPair(BTreeMap<(usize, u64), usize>),
}

impl ChildMap {
    fn row(&self, node: usize, t: f64) -> usize {
        match self {
            ChildMap::ByNode(m) => m[&node],
            ChildMap::ByPair(m) => m[&(node, t.to_bits())],
        }
    }
}
