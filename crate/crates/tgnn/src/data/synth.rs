//! Seeded synthetic datasets.
//!
//! The generators mirror the shape and scale of the public datasets this
//! library targets (a 129-region / 61-day mobility-and-cases series, and a
//! bipartite user/page interaction log with 172-dim edit features) so every
//! experiment and test can run offline. Real files in the canonical formats
//! load through the same code paths.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Event, EventStream};

/// Standard normal via Box-Muller; keeps us off extra distribution deps.
fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Mobility-and-cases snapshot series in the canonical DTDG JSON format.
///
/// Regions sit in the unit square; mobility follows a gravity rule over
/// nearby pairs with weekday modulation; case counts ride a slow two-wave
/// curve with spatially correlated phases, short-memory autoregressive
/// noise, and a noise floor that grows toward the end of the series.
pub fn synth_dtdg_json(seed: u64, num_nodes: usize, days: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = num_nodes;
    let t_max = days;

    let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect();
    let pop: Vec<f64> = (0..n).map(|_| (0.6 + rng.random_range(0.0..1.0f64).powi(2) * 3.0)).collect();

    // Static skeleton: directed both ways between nearby pairs, self-loops everywhere.
    let mut skeleton: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        skeleton.push((i, i, pop[i] * 60.0));
        for j in i + 1..n {
            let dx = pos[i].0 - pos[j].0;
            let dy = pos[i].1 - pos[j].1;
            let d2 = dx * dx + dy * dy;
            if d2 < 0.017 {
                let w = pop[i] * pop[j] * 8.0 / (0.05 + 12.0 * d2);
                skeleton.push((i, j, w));
                skeleton.push((j, i, w * rng.random_range(0.7..1.3)));
            }
        }
    }

    // Case curve: slow wave with spatial phase, AR noise growing late.
    let phase: Vec<f64> = pos.iter().map(|&(x, y)| (x + y) * 6.0).collect();
    let amp: Vec<f64> = pop.iter().map(|&p| p * 55.0).collect();
    let wave = |t: f64, ph: f64| {
        let a = (-(t - 24.0 - ph) * (t - 24.0 - ph) / 260.0).exp();
        let b = 0.55 * (-(t - 57.0 - ph) * (t - 57.0 - ph) / 120.0).exp();
        a + b
    };
    let mut ar = vec![0.0f64; n];
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let tf = t as f64;
        let noise_scale = 0.10 + 0.55 * (tf / t_max as f64).powi(2);
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            ar[i] = 0.55 * ar[i] + randn(&mut rng) * noise_scale;
            let v = amp[i] * (wave(tf, phase[i]) + ar[i]).max(0.0);
            row.push(v.round());
        }
        y.push(row);
    }

    // Daily mobility: weekday dip plus multiplicative jitter.
    let mut edge_index = serde_json::Map::new();
    let mut edge_weight = serde_json::Map::new();
    for t in 0..t_max {
        let weekend = matches!(t % 7, 5 | 6);
        let day_mult = if weekend { 0.72 } else { 1.0 };
        let mut idx: Vec<serde_json::Value> = Vec::with_capacity(skeleton.len());
        let mut wts: Vec<serde_json::Value> = Vec::with_capacity(skeleton.len());
        for &(s, d, w) in &skeleton {
            let jitter = (randn(&mut rng) * 0.18).exp();
            let wt = (w * day_mult * jitter).round().max(1.0);
            idx.push(serde_json::json!([s, d]));
            wts.push(serde_json::json!(wt));
        }
        edge_index.insert(t.to_string(), serde_json::Value::Array(idx));
        edge_weight.insert(t.to_string(), serde_json::Value::Array(wts));
    }

    serde_json::json!({
        "time_periods": t_max,
        "y": y,
        "edge_mapping": {
            "edge_index": edge_index,
            "edge_weight": edge_weight,
        },
    })
    .to_string()
}

/// Bipartite interaction log shaped like the JODIE edit streams.
///
/// Users carry persistent page-affinity sets with session bursts and a
/// repeat-last-page recency habit; edit features blend a page signature, a
/// user signature, and noise, so both memory- and attention-based models
/// have something to learn from.
pub fn synth_wiki_stream(seed: u64, num_users: usize, num_pages: usize, num_events: usize) -> EventStream {
    const FEATURE_DIM: usize = 172;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Popularity-skewed page sampling.
    let page_weight: Vec<f64> = (0..num_pages).map(|j| 1.0 / (j as f64 + 8.0).powf(0.85)).collect();
    let total_pw: f64 = page_weight.iter().sum();
    let sample_page = |rng: &mut ChaCha8Rng| {
        let mut u = rng.random_range(0.0..total_pw);
        for (j, &w) in page_weight.iter().enumerate() {
            if u < w {
                return j;
            }
            u -= w;
        }
        num_pages - 1
    };

    // Per-user affinity sets, large enough that a 10-event window does not
    // cover them.
    let affinities: Vec<Vec<usize>> = (0..num_users)
        .map(|_| {
            let k = rng.random_range(4..=12usize);
            let mut set = Vec::with_capacity(k);
            while set.len() < k {
                let p = sample_page(&mut rng);
                if !set.contains(&p) {
                    set.push(p);
                }
            }
            set
        })
        .collect();
    let user_rate: Vec<f64> = (0..num_users).map(|_| rng.random_range(0.2..1.0f64).powi(2) + 0.05).collect();
    let total_rate: f64 = user_rate.iter().sum();

    let page_sig: Vec<Vec<f64>> = (0..num_pages)
        .map(|_| (0..FEATURE_DIM).map(|_| randn(&mut rng) * 0.45).collect())
        .collect();
    let user_sig: Vec<Vec<f64>> = (0..num_users)
        .map(|_| (0..FEATURE_DIM).map(|_| randn(&mut rng) * 0.18).collect())
        .collect();

    let horizon = 30.0 * 86_400.0;
    let mean_gap = horizon / num_events as f64;
    let mut t = 0.0f64;
    let mut last_page: Vec<Option<usize>> = vec![None; num_users];
    let mut cursor: Vec<usize> = vec![0; num_users]; // rotation through the affinity set
    let mut recent_users: Vec<usize> = Vec::new();
    let mut events = Vec::with_capacity(num_events);
    for idx in 0..num_events {
        t += -mean_gap * rng.random_range(1e-9..1.0f64).ln();
        // Session bursts: mostly recently active editors.
        let user = if !recent_users.is_empty() && rng.random::<f64>() < 0.45 {
            recent_users[rng.random_range(recent_users.len().saturating_sub(24)..recent_users.len())]
        } else {
            let mut u = rng.random_range(0.0..total_rate);
            let mut pick = num_users - 1;
            for (i, &w) in user_rate.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        };
        let roll: f64 = rng.random();
        let page = if roll < 0.22 {
            // Recency habit: return to the page just edited.
            last_page[user].unwrap_or_else(|| affinities[user][0])
        } else if roll < 0.82 {
            // Rotate through the persistent affinity set.
            let set = &affinities[user];
            let p = set[cursor[user] % set.len()];
            cursor[user] += 1;
            p
        } else {
            sample_page(&mut rng)
        };
        last_page[user] = Some(page);
        recent_users.push(user);
        if recent_users.len() > 64 {
            recent_users.remove(0);
        }

        let features: Vec<f64> = (0..FEATURE_DIM)
            .map(|d| page_sig[page][d] + user_sig[user][d] + randn(&mut rng) * 0.12)
            .collect();
        events.push(Event {
            src: user,
            dst: num_users + page,
            t,
            features,
            idx,
        });
    }

    EventStream {
        events,
        num_nodes: num_users + num_pages,
        feature_dim: FEATURE_DIM,
        num_sources: Some(num_users),
    }
}

/// Tiny stream with a planted rule: node `i` only ever interacts with
/// `i + 1 (mod n)`. Separable by any model that learns node identity from
/// interaction history.
pub fn planted_rule_stream(seed: u64, num_nodes: usize, num_events: usize) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(num_events);
    for idx in 0..num_events {
        let src = rng.random_range(0..num_nodes);
        let dst = (src + 1) % num_nodes;
        let t = idx as f64 + 1.0;
        // Endpoint tags make the rule visible through edge features.
        let features = vec![
            src as f64 / num_nodes as f64,
            dst as f64 / num_nodes as f64,
            1.0,
        ];
        events.push(Event { src, dst, t, features, idx });
    }
    EventStream {
        events,
        num_nodes,
        feature_dim: 3,
        num_sources: None,
    }
}

/// Small random stream for gradient checks and protocol tests.
pub fn toy_stream(seed: u64, num_nodes: usize, num_events: usize, feature_dim: usize) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(num_events);
    let mut t = 0.0;
    for idx in 0..num_events {
        t += rng.random_range(0.1..1.5);
        let src = rng.random_range(0..num_nodes);
        let mut dst = rng.random_range(0..num_nodes);
        if dst == src {
            dst = (dst + 1) % num_nodes;
        }
        let features = (0..feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        events.push(Event { src, dst, t, features, idx });
    }
    EventStream {
        events,
        num_nodes,
        feature_dim,
        num_sources: None,
    }
}
