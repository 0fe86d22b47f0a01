// SPDX-License-Identifier: Apache-2.0

//! Line-delimited interchange: one sample object per line, keys in the
//! canonical order `id`, `label`, [`level`], `nodes`, `edges`. The `level`
//! key is omitted for CFG samples. Lines starting with `#` are comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::{InstructionRecord, Label, Level, NodeId, SampleGraph, NUM_FEATURES};
use crate::error::{Error, Result};

/// Outcome of parsing one interchange line.
#[derive(Debug)]
pub enum ParsedLine {
    Sample(SampleGraph),
    /// Well-formed record describing an invalid graph (e.g. dangling edge).
    Rejected {
        id: String,
        reason: String,
    },
    Blank,
}

/// Canonical single-line rendering of a sample.
pub fn format_sample(g: &SampleGraph) -> String {
    let mut s = String::with_capacity(64 + g.instruction_count() * 60);
    s.push_str("{\"id\":");
    s.push_str(&serde_json::to_string(g.id()).expect("string serialises"));
    let _ = write!(s, ",\"label\":{}", g.label().index());
    if g.level() != Level::Cfg {
        let _ = write!(s, ",\"level\":\"{}\"", g.level().tag());
    }
    s.push_str(",\"nodes\":{");
    for (i, (node, instrs)) in g.nodes().iter().zip(g.payload()).enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "\"{node}\":[");
        for (j, ins) in instrs.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push('[');
            for (k, c) in ins.codes.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{c}");
            }
            s.push(']');
        }
        s.push(']');
    }
    s.push_str("},\"edges\":[");
    for (i, (a, b)) in g.edges().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "[{a},{b}]");
    }
    s.push_str("]}");
    s
}

/// Parse one line. `line_no` is 1-based and only used for error messages.
pub fn parse_sample_line(line: &str, line_no: usize) -> Result<ParsedLine> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(ParsedLine::Blank);
    }
    let err = |field: &str, reason: String| Error::Parse {
        line: line_no,
        field: field.to_string(),
        reason,
    };
    let value: Value = serde_json::from_str(trimmed).map_err(|e| err("<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| err("<record>", "expected an object".into()))?;

    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| err("id", "missing or not a string".into()))?
        .to_string();
    let label = obj
        .get("label")
        .and_then(Value::as_u64)
        .and_then(|v| Label::from_index(v as usize))
        .ok_or_else(|| err("label", "missing or not 0/1".into()))?;
    let level = match obj.get("level") {
        None => Level::Cfg,
        Some(v) => v
            .as_str()
            .and_then(Level::from_tag)
            .ok_or_else(|| err("level", format!("unknown level {v}")))?,
    };

    let node_obj = obj
        .get("nodes")
        .and_then(Value::as_object)
        .ok_or_else(|| err("nodes", "missing or not an object".into()))?;
    let mut nodes = Vec::with_capacity(node_obj.len());
    for (key, instrs) in node_obj {
        let node: u32 = key.parse().map_err(|_| {
            err(
                "nodes",
                format!("node id `{key}` is not a non-negative integer"),
            )
        })?;
        let field = format!("nodes.{key}");
        let list = instrs
            .as_array()
            .ok_or_else(|| err(&field, "instruction list must be an array".into()))?;
        let mut records = Vec::with_capacity(list.len());
        for (j, arr) in list.iter().enumerate() {
            let arr = arr
                .as_array()
                .filter(|a| a.len() == NUM_FEATURES)
                .ok_or_else(|| {
                    err(
                        &format!("{field}[{j}]"),
                        format!("instruction must be an array of {NUM_FEATURES} integers"),
                    )
                })?;
            let mut codes = [0u32; NUM_FEATURES];
            for (k, c) in arr.iter().enumerate() {
                codes[k] = c
                    .as_u64()
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or_else(|| err(&format!("{field}[{j}][{k}]"), format!("bad code {c}")))?;
            }
            records.push(InstructionRecord::new(codes));
        }
        nodes.push((NodeId(node), records));
    }

    let edge_arr = obj
        .get("edges")
        .and_then(Value::as_array)
        .ok_or_else(|| err("edges", "missing or not an array".into()))?;
    let mut edges = Vec::with_capacity(edge_arr.len());
    for (i, e) in edge_arr.iter().enumerate() {
        let pair = e
            .as_array()
            .filter(|p| p.len() == 2)
            .and_then(|p| Some((p[0].as_u64()?, p[1].as_u64()?)))
            .and_then(|(a, b)| Some((u32::try_from(a).ok()?, u32::try_from(b).ok()?)))
            .ok_or_else(|| {
                err(
                    &format!("edges[{i}]"),
                    format!("expected [src,dst], got {e}"),
                )
            })?;
        edges.push((NodeId(pair.0), NodeId(pair.1)));
    }

    match SampleGraph::new(id.clone(), level, label, nodes, edges) {
        Ok(g) => Ok(ParsedLine::Sample(g)),
        Err(Error::InvalidGraph { reason, .. }) => Ok(ParsedLine::Rejected { id, reason }),
        Err(e) => Err(e),
    }
}

/// Read every valid sample from an interchange file, keeping level tags.
/// Invalid graphs and repeated ids are logged and skipped; output is sorted
/// by sample id.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<SampleGraph>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        match parse_sample_line(line, i + 1)? {
            ParsedLine::Sample(g) => {
                if seen.insert(g.id().to_string()) {
                    out.push(g);
                } else {
                    log::warn!(
                        "{}:{}: duplicate sample id `{}` skipped",
                        path.display(),
                        i + 1,
                        g.id()
                    );
                }
            }
            ParsedLine::Rejected { id, reason } => {
                log::warn!(
                    "{}:{}: sample `{id}` rejected: {reason}",
                    path.display(),
                    i + 1
                );
            }
            ParsedLine::Blank => {}
        }
    }
    out.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(out)
}

/// Load CFG-level input samples.
pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SampleGraph>> {
    let samples = read_samples(path)?;
    if let Some(g) = samples.iter().find(|g| g.level() != Level::Cfg) {
        return Err(Error::InvalidGraph {
            sample: g.id().to_string(),
            reason: format!("expected CFG input, found level {}", g.level().tag()),
        });
    }
    Ok(samples)
}

/// Write samples one per line, preceded by optional `#` header lines.
pub fn write_samples(
    path: impl AsRef<Path>,
    header: &[String],
    samples: &[SampleGraph],
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for h in header {
        for l in h.lines() {
            text.push_str("# ");
            text.push_str(l);
            text.push('\n');
        }
    }
    for g in samples {
        text.push_str(&format_sample(g));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
