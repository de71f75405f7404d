//! JSON-lines dataset IO.
//!
//! One record per scene:
//! `{"objects": [{"category": "...", "attributes": {...}}, ...],
//!   "edges": [[i, relation_name, j], ...],
//!   "boxes": [[x0, y0, x1, y1], ...]}`   (boxes optional)
//!
//! Weighted graphs use four-element edges `[i, relation_name, j, w]`.
//! All names are resolved against the vocabulary at load time. Writing is
//! canonical (fixed key order, sorted edge sets), so write-read-write is
//! byte-for-byte stable.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, Layout, SceneGraph, SceneObject, WeightedSceneGraph};
use crate::vocab::RelationVocab;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObjectRecord {
    category: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneRecord {
    objects: Vec<ObjectRecord>,
    edges: Vec<(usize, String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightedSceneRecord {
    objects: Vec<ObjectRecord>,
    edges: Vec<(usize, String, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<Vec<[f64; 4]>>,
}

fn objects_from_records(
    records: &[ObjectRecord],
    vocab: &RelationVocab,
    line: usize,
) -> Result<Vec<SceneObject>> {
    records
        .iter()
        .map(|o| {
            let category = vocab
                .category_id(&o.category)
                .map_err(|e| at_line(e, line))?;
            for (name, value) in &o.attributes {
                vocab.check_attribute(name, value).map_err(|e| at_line(e, line))?;
            }
            Ok(SceneObject { category, attributes: o.attributes.clone() })
        })
        .collect()
}

fn objects_to_records(objects: &[SceneObject], vocab: &RelationVocab) -> Result<Vec<ObjectRecord>> {
    objects
        .iter()
        .map(|o| {
            Ok(ObjectRecord {
                category: vocab.category_name(o.category)?.to_string(),
                attributes: o.attributes.clone(),
            })
        })
        .collect()
}

fn at_line(err: Error, line: usize) -> Error {
    match err {
        Error::Vocab(msg) => Error::Vocab(format!("line {line}: {msg}")),
        other => other,
    }
}

fn parse_layout(boxes: Option<Vec<[f64; 4]>>, n_nodes: usize, line: usize) -> Result<Option<Layout>> {
    match boxes {
        None => Ok(None),
        Some(b) => {
            let layout = Layout::new(b).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            layout.check_matches(n_nodes).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            Ok(Some(layout))
        }
    }
}

/// Read scene graphs (optionally with layouts) from a JSON-lines file.
pub fn read_graphs(path: &Path, vocab: &RelationVocab) -> Result<Vec<(SceneGraph, Option<Layout>)>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: SceneRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let objects = objects_from_records(&record.objects, vocab, line_no)?;
        let n = objects.len();
        let edges = record
            .edges
            .iter()
            .map(|(i, name, j)| {
                let r = vocab.relation_id(name).map_err(|e| at_line(e, line_no))?;
                Ok(EdgeKey::new(*i, r, *j))
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = SceneGraph::new(objects, edges, vocab).map_err(|e| match e {
            Error::Graph(msg) => Error::Parse { line: line_no, msg },
            other => at_line(other, line_no),
        })?;
        let layout = parse_layout(record.boxes, n, line_no)?;
        out.push((graph, layout));
    }
    Ok(out)
}

/// Write scene graphs to a JSON-lines file (canonical ordering).
pub fn write_graphs(
    path: &Path,
    items: &[(SceneGraph, Option<Layout>)],
    vocab: &RelationVocab,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for (graph, layout) in items {
        let record = SceneRecord {
            objects: objects_to_records(graph.objects(), vocab)?,
            edges: graph
                .edges()
                .map(|e| Ok((e.subject, vocab.relation_name(e.relation)?.to_string(), e.object)))
                .collect::<Result<Vec<_>>>()?,
            boxes: layout.as_ref().map(|l| l.boxes().to_vec()),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read weighted scene graphs from a JSON-lines file.
pub fn read_weighted_graphs(
    path: &Path,
    vocab: &RelationVocab,
) -> Result<Vec<(WeightedSceneGraph, Option<Layout>)>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: WeightedSceneRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let objects = objects_from_records(&record.objects, vocab, line_no)?;
        let n = objects.len();
        let edges = record
            .edges
            .iter()
            .map(|(i, name, j, w)| {
                let r = vocab.relation_id(name).map_err(|e| at_line(e, line_no))?;
                Ok((EdgeKey::new(*i, r, *j), *w))
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = WeightedSceneGraph::new(objects, edges, (n, vocab.n_relations()))
            .map_err(|e| match e {
                Error::Graph(msg) | Error::Domain(msg) | Error::Shape(msg) => {
                    Error::Parse { line: line_no, msg }
                }
                other => at_line(other, line_no),
            })?;
        let layout = parse_layout(record.boxes, n, line_no)?;
        out.push((graph, layout));
    }
    Ok(out)
}

/// Write weighted scene graphs to a JSON-lines file.
pub fn write_weighted_graphs(
    path: &Path,
    items: &[(WeightedSceneGraph, Option<Layout>)],
    vocab: &RelationVocab,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for (graph, layout) in items {
        let record = WeightedSceneRecord {
            objects: objects_to_records(graph.objects(), vocab)?,
            edges: graph
                .edges()
                .map(|(e, weight)| {
                    Ok((e.subject, vocab.relation_name(e.relation)?.to_string(), e.object, weight))
                })
                .collect::<Result<Vec<_>>>()?,
            boxes: layout.as_ref().map(|l| l.boxes().to_vec()),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
