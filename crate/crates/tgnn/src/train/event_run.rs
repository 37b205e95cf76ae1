//! Training and evaluation over event streams: self-supervised link
//! prediction with chronological splits and inductive node masking, and node
//! regression on converted streams.

use std::collections::HashMap;
use std::time::Instant;

use autodiff::{Ctx, Optimizer, ParamStore, Tape, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{inductive_holdout, Event, EventStream, LabelRow};
use crate::error::{Result, TgnnError};
use crate::event::{EdgeDecoder, EventModel, NodeRegressor};
use crate::registry::{EventConfig, ModelRegistry};
use crate::train::{average_precision, bce_pos_neg, mse_loss, roc_auc, OptimizerSpec, RunReport, TestMetrics};

const SPLIT_SALT: u64 = 0x5eed_5011;
const TRAIN_SALT: u64 = 0x5eed_7124;
const EVAL_SALT: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTask {
    Link,
    NodeRegression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRunConfig {
    pub lr: f64,
    pub optimizer: OptimizerSpec,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub unseen_fraction: f64,
}

impl Default for EventRunConfig {
    fn default() -> Self {
        EventRunConfig {
            lr: 1e-4,
            optimizer: OptimizerSpec::adam(),
            epochs: 100,
            patience: 10,
            seed: 0,
            train_ratio: 0.7,
            val_ratio: 0.15,
            unseen_fraction: 0.1,
        }
    }
}

/// Deduplicated `(node, t)` queries for a batch; returns the pair list and a
/// row lookup.
struct QueryIndex {
    pairs: Vec<(usize, f64)>,
    index: HashMap<(usize, u64), usize>,
}

impl QueryIndex {
    fn new() -> Self {
        QueryIndex {
            pairs: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn row(&mut self, node: usize, t: f64) -> usize {
        *self.index.entry((node, t.to_bits())).or_insert_with(|| {
            self.pairs.push((node, t));
            self.pairs.len() - 1
        })
    }
}

/// Embed a batch and decode positive and sampled-negative pairs.
fn score_link_batch(
    model: &mut dyn EventModel,
    decoder: &EdgeDecoder,
    ctx: &mut Ctx,
    events: &[Event],
    negatives: &[usize],
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Value, Value)> {
    let mut q = QueryIndex::new();
    let mut src_rows = Vec::with_capacity(events.len());
    let mut dst_rows = Vec::with_capacity(events.len());
    let mut neg_rows = Vec::with_capacity(events.len());
    for (ev, &neg) in events.iter().zip(negatives) {
        src_rows.push(q.row(ev.src, ev.t));
        dst_rows.push(q.row(ev.dst, ev.t));
        neg_rows.push(q.row(neg, ev.t));
    }
    let z = model.embed(ctx, &q.pairs, train, rng)?;
    let zs = ctx.tape.index_select(z, &src_rows)?;
    let zd = ctx.tape.index_select(z, &dst_rows)?;
    let zn = ctx.tape.index_select(z, &neg_rows)?;
    let pos = decoder.prob(ctx, zs, zd, train, rng)?;
    let neg = decoder.prob(ctx, zs, zn, train, rng)?;
    Ok((pos, neg))
}

/// Evaluation scoring over a window: advances model state, never trains.
fn score_window(
    model: &mut dyn EventModel,
    decoder: &EdgeDecoder,
    store: &ParamStore,
    events: &[Event],
    negatives: &[usize],
    batch: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // eval path never draws from it
    let mut pos_all = Vec::with_capacity(events.len());
    let mut neg_all = Vec::with_capacity(events.len());
    let mut offset = 0;
    for chunk in events.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let (pos, neg) = {
            let mut ctx = Ctx::new(&mut tape, store);
            model.refresh_memory(&mut ctx, chunk)?;
            let out = score_link_batch(
                model,
                decoder,
                &mut ctx,
                chunk,
                &negatives[offset..offset + chunk.len()],
                false,
                &mut rng,
            )?;
            model.ingest(&mut ctx, chunk)?;
            out
        };
        pos_all.extend_from_slice(tape.data(pos));
        neg_all.extend_from_slice(tape.data(neg));
        model.detach(&tape);
        offset += chunk.len();
    }
    Ok((pos_all, neg_all))
}

/// Advance model state over a window without scoring.
fn replay_window(model: &mut dyn EventModel, store: &ParamStore, events: &[Event], batch: usize) -> Result<()> {
    for chunk in events.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        {
            let mut ctx = Ctx::new(&mut tape, store);
            model.refresh_memory(&mut ctx, chunk)?;
            model.ingest(&mut ctx, chunk)?;
        }
        model.detach(&tape);
    }
    Ok(())
}

fn metric_option<F>(scores: &[f64], labels: &[bool], f: F) -> Option<f64>
where
    F: Fn(&[f64], &[bool]) -> Result<f64>,
{
    if scores.is_empty() {
        None
    } else {
        f(scores, labels).ok()
    }
}

/// Train an event model and evaluate per the chronological protocol:
/// early stopping on the validation slice, then memory and neighbor state
/// reset and replayed over train+val before test scoring.
pub fn train_event_run(
    registry: &ModelRegistry,
    model_name: &str,
    event_cfg: &EventConfig,
    stream: &EventStream,
    labels: Option<&[LabelRow]>,
    task: EventTask,
    cfg: &EventRunConfig,
) -> Result<RunReport> {
    let start = Instant::now();
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let mut model = registry.event_factory(model_name)?.build(
        &mut store,
        event_cfg,
        stream.num_nodes,
        stream.feature_dim,
        &mut init_rng,
    )?;
    let mut opt = cfg.optimizer.build(cfg.lr)?;
    let config_echo = serde_json::json!({ "model": event_cfg, "train": cfg, "task": task });

    let (train_loss, val_metric, test, epochs_run) = match task {
        EventTask::Link => {
            let decoder = EdgeDecoder::new(&mut store, "decoder", model.out_dim(), &mut init_rng);
            run_link(&mut *model, &decoder, &mut store, &mut opt, stream, cfg, event_cfg.batch_size())?
        }
        EventTask::NodeRegression => {
            let label_rows = labels.ok_or_else(|| {
                TgnnError::Config("node_regression requires the label sidecar".to_string())
            })?;
            let regressor = NodeRegressor::new(&mut store, "regressor", model.out_dim(), &mut init_rng);
            run_regression(
                &mut *model,
                &regressor,
                &mut store,
                &mut opt,
                stream,
                label_rows,
                cfg,
                event_cfg.batch_size(),
            )?
        }
    };

    Ok(RunReport {
        config: config_echo,
        train_loss,
        val_metric,
        test,
        epochs_run,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

type RunOutputs = (Vec<f64>, Vec<f64>, TestMetrics, usize);

#[allow(clippy::too_many_arguments)]
fn run_link(
    model: &mut dyn EventModel,
    decoder: &EdgeDecoder,
    store: &mut ParamStore,
    opt: &mut Optimizer,
    stream: &EventStream,
    cfg: &EventRunConfig,
    batch: usize,
) -> Result<RunOutputs> {
    let split = inductive_holdout(stream, cfg.unseen_fraction, cfg.seed ^ SPLIT_SALT, cfg.train_ratio, cfg.val_ratio)?;
    let sampler = super::NegativeSampler::new(stream.negative_candidates());

    // Fixed negatives for every evaluation pass.
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_SALT);
    let val_negs: Vec<usize> = split
        .val
        .iter()
        .map(|e| sampler.draw(&mut eval_rng, e.dst))
        .collect::<Result<_>>()?;
    // Test events scored chronologically with their partition tag.
    let mut test_events: Vec<(Event, bool)> = split
        .test_seen
        .iter()
        .map(|e| (e.clone(), false))
        .chain(split.test_unseen.iter().map(|e| (e.clone(), true)))
        .collect();
    test_events.sort_by_key(|(e, _)| e.idx);
    let test_stream: Vec<Event> = test_events.iter().map(|(e, _)| e.clone()).collect();
    let test_negs: Vec<usize> = test_stream
        .iter()
        .map(|e| sampler.draw(&mut eval_rng, e.dst))
        .collect::<Result<_>>()?;

    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ TRAIN_SALT);
    let mut train_loss_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut best: Option<(f64, Vec<Vec<f64>>, usize)> = None;
    let mut epochs_run = 0;

    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        model.reset();
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in split.train.chunks(batch.max(1)) {
            let negs: Vec<usize> = chunk
                .iter()
                .map(|e| sampler.draw(&mut train_rng, e.dst))
                .collect::<Result<_>>()?;
            let mut tape = Tape::new();
            let loss = {
                let mut ctx = Ctx::new(&mut tape, store);
                model.refresh_memory(&mut ctx, chunk)?;
                let (pos, neg) = score_link_batch(model, decoder, &mut ctx, chunk, &negs, true, &mut train_rng)?;
                let l = bce_pos_neg(&mut ctx, pos, neg)?;
                model.ingest(&mut ctx, chunk)?;
                l
            };
            epoch_loss += tape.data(loss)[0];
            batches += 1;
            tape.backward(loss, store)?;
            let ids = store.populated_ids();
            opt.step(store, &ids)?;
            model.detach(&tape);
        }
        train_loss_hist.push(epoch_loss / batches.max(1) as f64);

        // Validation continues from the post-training state of this epoch.
        if !split.val.is_empty() {
            let (vp, vn) = score_window(model, decoder, store, &split.val, &val_negs, batch)?;
            let scores: Vec<f64> = vp.iter().chain(&vn).copied().collect();
            let labels: Vec<bool> = vp.iter().map(|_| true).chain(vn.iter().map(|_| false)).collect();
            let val_ap = average_precision(&scores, &labels)?;
            val_hist.push(val_ap);

            match &best {
                Some((best_ap, _, _)) if val_ap <= *best_ap => {
                    let best_epoch = best.as_ref().expect("set").2;
                    if epoch - best_epoch >= cfg.patience {
                        break;
                    }
                }
                _ => best = Some((val_ap, store.snapshot(), epoch)),
            }
        }
    }
    if let Some((_, snapshot, _)) = &best {
        store.restore(snapshot);
    }

    // Test protocol: rebuild state over train+val with the best weights.
    model.reset();
    replay_window(model, store, &split.train, batch)?;
    replay_window(model, store, &split.val, batch)?;
    let (tp, tn) = score_window(model, decoder, store, &test_stream, &test_negs, batch)?;

    let mut seen_scores = Vec::new();
    let mut seen_labels = Vec::new();
    let mut unseen_scores = Vec::new();
    let mut unseen_labels = Vec::new();
    for (i, (_, is_unseen)) in test_events.iter().enumerate() {
        let (s, l) = if *is_unseen {
            (&mut unseen_scores, &mut unseen_labels)
        } else {
            (&mut seen_scores, &mut seen_labels)
        };
        s.push(tp[i]);
        l.push(true);
        s.push(tn[i]);
        l.push(false);
    }
    let all_scores: Vec<f64> = seen_scores.iter().chain(&unseen_scores).copied().collect();
    let all_labels: Vec<bool> = seen_labels.iter().chain(&unseen_labels).copied().collect();

    let test = TestMetrics {
        ap_seen: metric_option(&seen_scores, &seen_labels, average_precision),
        ap_unseen: metric_option(&unseen_scores, &unseen_labels, average_precision),
        auc_seen: metric_option(&seen_scores, &seen_labels, roc_auc),
        auc_unseen: metric_option(&unseen_scores, &unseen_labels, roc_auc),
        accuracy: metric_option(&all_scores, &all_labels, |s, l| super::accuracy(s, l)),
        ..TestMetrics::default()
    };
    Ok((train_loss_hist, val_hist, test, epochs_run))
}

/// Label times grouped and consumed in time order.
struct LabelFeed {
    times: Vec<f64>,
    groups: Vec<Vec<(usize, f64)>>,
    cursor: usize,
}

impl LabelFeed {
    fn new(labels: &[LabelRow]) -> Self {
        let mut by_t: std::collections::BTreeMap<u64, Vec<(usize, f64)>> = std::collections::BTreeMap::new();
        for row in labels {
            by_t.entry(row.t.to_bits()).or_default().push((row.node, row.target));
        }
        let times: Vec<f64> = by_t.keys().map(|&b| f64::from_bits(b)).collect();
        let groups = by_t.into_values().collect();
        LabelFeed { times, groups, cursor: 0 }
    }

    fn reset(&mut self) {
        self.cursor = 0;
    }

    /// Indices of label groups due before `next_event_t` (all remaining when
    /// `None`).
    fn due(&mut self, next_event_t: Option<f64>) -> Vec<usize> {
        let mut out = Vec::new();
        while self.cursor < self.times.len() {
            match next_event_t {
                Some(nt) if self.times[self.cursor] >= nt => break,
                _ => {
                    out.push(self.cursor);
                    self.cursor += 1;
                }
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn run_regression(
    model: &mut dyn EventModel,
    regressor: &NodeRegressor,
    store: &mut ParamStore,
    opt: &mut Optimizer,
    stream: &EventStream,
    labels: &[LabelRow],
    cfg: &EventRunConfig,
    batch: usize,
) -> Result<RunOutputs> {
    let n_events = stream.events.len();
    let n_train = (cfg.train_ratio * n_events as f64).floor() as usize;
    let n_val = (cfg.val_ratio * n_events as f64).floor() as usize;
    if n_train == 0 || n_train + n_val >= n_events {
        return Err(TgnnError::DegenerateSplit(format!(
            "{} events leave an empty window at ratios {}/{}",
            n_events, cfg.train_ratio, cfg.val_ratio
        )));
    }
    let train_ev = &stream.events[..n_train];
    let val_ev = &stream.events[n_train..n_train + n_val];
    let test_ev = &stream.events[n_train + n_val..];
    let num_nodes = stream.num_nodes;
    let mut feed = LabelFeed::new(labels);

    // Predict all nodes at a label time just after its events (t + 0.5 keeps
    // the query strictly past every event at t and before t + 1).
    let query_time = |t: f64| t + 0.5;

    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut best: Option<(f64, Vec<Vec<f64>>, usize)> = None;
    let mut epochs_run = 0;
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ TRAIN_SALT);

    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        model.reset();
        feed.reset();
        let mut epoch_loss = 0.0;
        let mut loss_terms = 0usize;

        let chunks: Vec<&[Event]> = train_ev.chunks(batch.max(1)).collect();
        for (ci, chunk) in chunks.iter().enumerate() {
            let next_t = chunks
                .get(ci + 1)
                .map(|c| c[0].t)
                .or_else(|| val_ev.first().map(|e| e.t))
                .or_else(|| test_ev.first().map(|e| e.t));
            let mut tape = Tape::new();
            let loss = {
                let mut ctx = Ctx::new(&mut tape, store);
                model.refresh_memory(&mut ctx, chunk)?;
                model.ingest(&mut ctx, chunk)?;
                let mut acc: Option<Value> = None;
                let due = feed.due(next_t);
                for gi in due {
                    let t = feed.times[gi];
                    let group = &feed.groups[gi];
                    let queries: Vec<(usize, f64)> = (0..num_nodes).map(|v| (v, query_time(t))).collect();
                    let z = model.embed(&mut ctx, &queries, true, &mut train_rng)?;
                    let pred = regressor.predict(&mut ctx, z, true, &mut train_rng)?;
                    // Align label rows to node order.
                    let mut target = vec![0.0; num_nodes];
                    for &(node, value) in group {
                        target[node] = value;
                    }
                    let l = mse_loss(&mut ctx, pred, &target)?;
                    acc = Some(match acc {
                        None => l,
                        Some(a) => ctx.tape.add(a, l)?,
                    });
                    loss_terms += 1;
                }
                acc
            };
            if let Some(l) = loss {
                epoch_loss += tape.data(l)[0];
                tape.backward(l, store)?;
                let ids = store.populated_ids();
                opt.step(store, &ids)?;
            }
            model.detach(&tape);
        }
        train_hist.push(epoch_loss / loss_terms.max(1) as f64);

        // Validation pass continues the stream.
        let (val_mse, _series) =
            regression_eval(model, regressor, store, val_ev, test_ev.first().map(|e| e.t), &mut feed, num_nodes, batch)?;
        val_hist.push(val_mse);
        if val_mse.is_finite() {
            match &best {
                Some((best_mse, _, _)) if val_mse >= *best_mse => {
                    let best_epoch = best.as_ref().expect("set").2;
                    if epoch - best_epoch >= cfg.patience {
                        break;
                    }
                }
                _ => best = Some((val_mse, store.snapshot(), epoch)),
            }
        }
    }
    if let Some((_, snapshot, _)) = &best {
        store.restore(snapshot);
    }

    // Test: reset and replay, consuming train+val label times silently.
    model.reset();
    feed.reset();
    replay_window(model, store, train_ev, batch)?;
    let _ = feed.due(val_ev.first().map(|e| e.t).or_else(|| test_ev.first().map(|e| e.t)));
    replay_window(model, store, val_ev, batch)?;
    let _ = feed.due(test_ev.first().map(|e| e.t));
    let (test_mse, series) = regression_eval(model, regressor, store, test_ev, None, &mut feed, num_nodes, batch)?;

    let test = TestMetrics {
        mse: Some(test_mse),
        mse_per_snapshot: Some(series),
        ..TestMetrics::default()
    };
    Ok((train_hist, val_hist, test, epochs_run))
}

/// Evaluate due label times over a window; returns (mean MSE, per-time series).
#[allow(clippy::too_many_arguments)]
fn regression_eval(
    model: &mut dyn EventModel,
    regressor: &NodeRegressor,
    store: &ParamStore,
    events: &[Event],
    t_after_window: Option<f64>,
    feed: &mut LabelFeed,
    num_nodes: usize,
    batch: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut series = Vec::new();
    let chunks: Vec<&[Event]> = events.chunks(batch.max(1)).collect();
    for (ci, chunk) in chunks.iter().enumerate() {
        let next_t = chunks.get(ci + 1).map(|c| c[0].t).or(t_after_window);
        let mut tape = Tape::new();
        {
            let mut ctx = Ctx::new(&mut tape, store);
            model.refresh_memory(&mut ctx, chunk)?;
            model.ingest(&mut ctx, chunk)?;
            for gi in feed.due(next_t) {
                let t = feed.times[gi];
                let group = &feed.groups[gi];
                let queries: Vec<(usize, f64)> = (0..num_nodes).map(|v| (v, t + 0.5)).collect();
                let z = model.embed(&mut ctx, &queries, false, &mut rng)?;
                let pred = regressor.predict(&mut ctx, z, false, &mut rng)?;
                let mut target = vec![0.0; num_nodes];
                for &(node, value) in group {
                    target[node] = value;
                }
                let pred_col: Vec<f64> = ctx.tape.data(pred).to_vec();
                series.push(super::metrics::mse(&pred_col, &target)?);
            }
        }
        model.detach(&tape);
    }
    let mean = if series.is_empty() {
        f64::NAN
    } else {
        series.iter().sum::<f64>() / series.len() as f64
    };
    Ok((mean, series))
}
