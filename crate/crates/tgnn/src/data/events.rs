//! Event-stream CSV formats: the JODIE interaction format and the converted
//! snapshot-event format with its label sidecar.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, TgnnError};

use super::{Event, EventStream};

fn fmt_err(path: &Path, msg: impl std::fmt::Display) -> TgnnError {
    TgnnError::Format(format!("{}: {}", path.display(), msg))
}

/// Load a JODIE CSV: header, then `user_id,item_id,timestamp,state_label,f0,...`.
///
/// Item ids are offset by the user count so node ids are globally unique;
/// events are stably sorted by timestamp.
pub fn load_jodie_csv(path: &Path) -> Result<EventStream> {
    let file = std::fs::File::open(path).map_err(|e| fmt_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let _header = lines
        .next()
        .ok_or_else(|| fmt_err(path, "empty file (missing header)"))?
        .map_err(|e| fmt_err(path, e))?;

    let mut rows: Vec<(usize, usize, f64, Vec<f64>)> = Vec::new();
    let mut feature_dim: Option<usize> = None;
    let mut max_user = 0usize;
    let mut max_item = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| fmt_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2; // 1-based, after the header
        let mut fields = line.split(',');
        let parse_usize = |f: Option<&str>, what: &str| -> Result<usize> {
            f.ok_or_else(|| fmt_err(path, format!("line {}: missing {}", lineno, what)))?
                .trim()
                .parse()
                .map_err(|_| fmt_err(path, format!("line {}: invalid {}", lineno, what)))
        };
        let user = parse_usize(fields.next(), "user_id")?;
        let item = parse_usize(fields.next(), "item_id")?;
        let t: f64 = fields
            .next()
            .ok_or_else(|| fmt_err(path, format!("line {}: missing timestamp", lineno)))?
            .trim()
            .parse()
            .map_err(|_| fmt_err(path, format!("line {}: invalid timestamp", lineno)))?;
        let _state_label = fields
            .next()
            .ok_or_else(|| fmt_err(path, format!("line {}: missing state_label", lineno)))?;
        let features: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| fmt_err(path, format!("line {}: invalid feature value '{}'", lineno, f)))
            })
            .collect::<Result<_>>()?;
        match feature_dim {
            None => feature_dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(fmt_err(
                    path,
                    format!("line {}: expected {} features, found {}", lineno, d, features.len()),
                ));
            }
            _ => {}
        }
        max_user = max_user.max(user);
        max_item = max_item.max(item);
        rows.push((user, item, t, features));
    }
    if rows.is_empty() {
        return Err(fmt_err(path, "no event rows"));
    }

    let num_sources = max_user + 1;
    let num_nodes = num_sources + max_item + 1;
    rows.sort_by(|a, b| a.2.partial_cmp(&b.2).expect("finite timestamps"));
    let events = rows
        .into_iter()
        .enumerate()
        .map(|(idx, (user, item, t, features))| Event {
            src: user,
            dst: num_sources + item,
            t,
            features,
            idx,
        })
        .collect();
    Ok(EventStream {
        events,
        num_nodes,
        feature_dim: feature_dim.unwrap_or(0),
        num_sources: Some(num_sources),
    })
}

/// Write a bipartite stream back to the JODIE CSV format (state_label 0).
pub fn save_jodie_csv(path: &Path, stream: &EventStream) -> Result<()> {
    let num_sources = stream
        .num_sources
        .ok_or_else(|| TgnnError::Contract("JODIE format requires a bipartite stream".to_string()))?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header_feats: Vec<String> = (0..stream.feature_dim).map(|i| format!("f{}", i)).collect();
    writeln!(w, "user_id,item_id,timestamp,state_label,{}", header_feats.join(","))?;
    for ev in &stream.events {
        let feats: Vec<String> = ev.features.iter().map(|v| format!("{}", v)).collect();
        writeln!(w, "{},{},{},0,{}", ev.src, ev.dst - num_sources, ev.t, feats.join(","))?;
    }
    Ok(())
}

/// Write a converted event stream: header `src,dst,t,f0,...,fk`.
pub fn save_converted_csv(path: &Path, stream: &EventStream) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header_feats: Vec<String> = (0..stream.feature_dim).map(|i| format!("f{}", i)).collect();
    writeln!(w, "src,dst,t,{}", header_feats.join(","))?;
    for ev in &stream.events {
        let feats: Vec<String> = ev.features.iter().map(|v| format!("{}", v)).collect();
        writeln!(w, "{},{},{},{}", ev.src, ev.dst, ev.t, feats.join(","))?;
    }
    Ok(())
}

/// Load a converted event stream (`src,dst,t,f0,...`).
pub fn load_converted_csv(path: &Path) -> Result<EventStream> {
    let file = std::fs::File::open(path).map_err(|e| fmt_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let _header = lines
        .next()
        .ok_or_else(|| fmt_err(path, "empty file (missing header)"))?
        .map_err(|e| fmt_err(path, e))?;
    let mut events = Vec::new();
    let mut feature_dim: Option<usize> = None;
    let mut max_node = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| fmt_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(fmt_err(path, format!("line {}: expected src,dst,t,...", lineno)));
        }
        let src: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| fmt_err(path, format!("line {}: invalid src", lineno)))?;
        let dst: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| fmt_err(path, format!("line {}: invalid dst", lineno)))?;
        let t: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| fmt_err(path, format!("line {}: invalid t", lineno)))?;
        let features: Vec<f64> = fields[3..]
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| fmt_err(path, format!("line {}: invalid feature '{}'", lineno, f)))
            })
            .collect::<Result<_>>()?;
        match feature_dim {
            None => feature_dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(fmt_err(
                    path,
                    format!("line {}: expected {} features, found {}", lineno, d, features.len()),
                ));
            }
            _ => {}
        }
        max_node = max_node.max(src).max(dst);
        let idx = events.len();
        events.push(Event { src, dst, t, features, idx });
    }
    if events.is_empty() {
        return Err(fmt_err(path, "no event rows"));
    }
    for w in events.windows(2) {
        if w[1].t < w[0].t {
            return Err(fmt_err(path, "timestamps must be nondecreasing"));
        }
    }
    Ok(EventStream {
        num_nodes: max_node + 1,
        feature_dim: feature_dim.unwrap_or(0),
        num_sources: None,
        events,
    })
}

/// Write the regression label sidecar: header `t,node,target`.
pub fn save_labels_csv(path: &Path, labels: &[super::LabelRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,node,target")?;
    for row in labels {
        writeln!(w, "{},{},{}", row.t, row.node, row.target)?;
    }
    Ok(())
}

/// Load the regression label sidecar.
pub fn load_labels_csv(path: &Path) -> Result<Vec<super::LabelRow>> {
    let file = std::fs::File::open(path).map_err(|e| fmt_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let _header = lines
        .next()
        .ok_or_else(|| fmt_err(path, "empty file (missing header)"))?
        .map_err(|e| fmt_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| fmt_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(fmt_err(path, format!("line {}: expected t,node,target", lineno)));
        }
        out.push(super::LabelRow {
            t: fields[0]
                .trim()
                .parse()
                .map_err(|_| fmt_err(path, format!("line {}: invalid t", lineno)))?,
            node: fields[1]
                .trim()
                .parse()
                .map_err(|_| fmt_err(path, format!("line {}: invalid node", lineno)))?,
            target: fields[2]
                .trim()
                .parse()
                .map_err(|_| fmt_err(path, format!("line {}: invalid target", lineno)))?,
        });
    }
    Ok(out)
}
