//! JSON graph and model files, and JSONL trajectory logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use ips_core::model::make_builtin;
use ips_core::sim::Event;
use ips_core::{Graph, Mark, MarkedGraph, RateModel, State, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Core(#[from] ips_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn field_error(field: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEntry {
    pub id: usize,
    #[serde(default)]
    pub mark: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<VertexEntry>,
    pub edges: Vec<[usize; 2]>,
}

impl GraphFile {
    pub fn from_marked_graph(g: &MarkedGraph) -> Self {
        GraphFile {
            vertices: g
                .marks()
                .iter()
                .enumerate()
                .map(|(id, m)| VertexEntry { id, mark: m.0 })
                .collect(),
            edges: g.graph().edges().map(|(a, b)| [a, b]).collect(),
        }
    }

    /// Vertex ids must be exactly `0..n` in any order.
    pub fn into_marked_graph(self) -> Result<MarkedGraph> {
        let n = self.vertices.len();
        let mut marks = vec![None; n];
        for (i, v) in self.vertices.iter().enumerate() {
            let field = format!("vertices[{i}].id");
            if v.id >= n {
                return Err(field_error(
                    field,
                    format!("id {} is not below the vertex count {n}", v.id),
                ));
            }
            if marks[v.id].replace(Mark(v.mark)).is_some() {
                return Err(field_error(field, format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, &[a, b]) in self.edges.iter().enumerate() {
            let field = format!("edges[{i}]");
            if a >= n || b >= n {
                return Err(field_error(field, format!("unknown endpoint in [{a}, {b}]")));
            }
            if a == b {
                return Err(field_error(field, format!("self-loop at vertex {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(field_error(field, format!("duplicate edge [{a}, {b}]")));
            }
        }
        let graph = Graph::new(n, self.edges.iter().map(|e| (e[0], e[1])))?;
        let marks = marks.into_iter().map(|m| m.expect("ids cover 0..n")).collect();
        Ok(MarkedGraph::new(graph, marks)?)
    }
}

pub fn parse_graph(text: &str) -> Result<MarkedGraph> {
    serde_json::from_str::<GraphFile>(text)?.into_marked_graph()
}

pub fn read_graph(path: &Path) -> Result<MarkedGraph> {
    parse_graph(&read_text(path)?)
}

pub fn graph_to_json(g: &MarkedGraph) -> String {
    serde_json::to_string(&GraphFile::from_marked_graph(g)).expect("graph serializes")
}

/// Parameter names accepted by each built-in model.
const MODEL_PARAMS: &[(&str, &[&str])] = &[
    ("counterexample", &[]),
    ("contact", &["lambda", "mu"]),
    ("sir", &["beta", "gamma"]),
    ("delayed_sir", &["beta", "gamma", "delay"]),
    ("glauber_ising", &["beta", "h"]),
    ("voter_rate", &["nu"]),
    ("constant_birth_death", &["a", "b"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelFile {
    pub fn build(&self) -> Result<Box<dyn RateModel>> {
        let known = MODEL_PARAMS
            .iter()
            .find(|(name, _)| *name == self.name)
            .ok_or_else(|| field_error("name", format!("unknown model \"{}\"", self.name)))?
            .1;
        if let Some(extra) = self.params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(field_error(
                format!("params.{extra}"),
                format!("not a parameter of model {}", self.name),
            ));
        }
        make_builtin(&self.name, &self.params).map_err(|e| field_error("params", e.to_string()))
    }
}

pub fn parse_model(text: &str) -> Result<Box<dyn RateModel>> {
    serde_json::from_str::<ModelFile>(text)?.build()
}

pub fn read_model(path: &Path) -> Result<Box<dyn RateModel>> {
    parse_model(&read_text(path)?)
}

/// A trajectory log: the path plus the replicate seed and marks when known.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: Option<u64>,
    pub marks: Option<Vec<Mark>>,
    pub trajectory: Trajectory,
}

fn indexed_object(values: impl Iterator<Item = i64>) -> Value {
    let map: Map<String, Value> = values
        .enumerate()
        .map(|(i, x)| (i.to_string(), Value::from(x)))
        .collect();
    Value::Object(map)
}

/// Header line followed by one line per event, each terminated by `\n`.
pub fn trajectory_to_jsonl(x: &Trajectory, seed: u64, marks: Option<&[Mark]>) -> String {
    let mut header = Map::new();
    header.insert("horizon".into(), Value::from(x.horizon()));
    header.insert("initial".into(), indexed_object(x.initial().iter().copied()));
    header.insert("seed".into(), Value::from(seed));
    if let Some(marks) = marks {
        header.insert("marks".into(), indexed_object(marks.iter().map(|m| m.0)));
    }
    let mut out = Value::Object(header).to_string();
    out.push('\n');
    for e in x.events() {
        let line = serde_json::json!({"t": e.time, "v": e.vertex, "j": e.jump, "s": e.state});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

fn indexed_values(value: &Value, field: &str) -> Result<Vec<i64>> {
    let int = |v: &Value, f: String| v.as_i64().ok_or_else(|| field_error(f, "expected an integer"));
    match value {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| int(v, format!("{field}[{i}]")))
            .collect(),
        Value::Object(map) => {
            let mut out = vec![None; map.len()];
            for (key, v) in map {
                let f = format!("{field}.{key}");
                let i: usize = key
                    .parse()
                    .ok()
                    .filter(|&i| i < map.len())
                    .ok_or_else(|| field_error(f.clone(), "keys must be the vertex ids 0..n"))?;
                out[i] = Some(int(v, f)?);
            }
            Ok(out.into_iter().map(|v| v.expect("keys are distinct")).collect())
        }
        _ => Err(field_error(field, "expected an object keyed by vertex id")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    t: f64,
    v: usize,
    j: i64,
    s: State,
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryRecord> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| field_error("line 1", "missing header"))?;
    let header: Map<String, Value> = serde_json::from_str(first)?;
    for key in header.keys() {
        if !["horizon", "initial", "seed", "marks"].contains(&key.as_str()) {
            return Err(field_error(format!("header.{key}"), "unknown field"));
        }
    }
    let horizon = header
        .get("horizon")
        .and_then(Value::as_f64)
        .ok_or_else(|| field_error("header.horizon", "expected a number"))?;
    let initial = indexed_values(
        header
            .get("initial")
            .ok_or_else(|| field_error("header.initial", "missing"))?,
        "header.initial",
    )?;
    let seed = match header.get("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| field_error("header.seed", "expected a 64-bit unsigned integer"))?,
        ),
    };
    let marks = match header.get("marks") {
        None => None,
        Some(v) => Some(indexed_values(v, "header.marks")?.into_iter().map(Mark).collect()),
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let e: EventLine =
            serde_json::from_str(line).map_err(|err| field_error(format!("line {}", i + 1), err.to_string()))?;
        events.push(Event {
            time: e.t,
            vertex: e.v,
            jump: e.j,
            state: e.s,
        });
    }
    Ok(TrajectoryRecord {
        seed,
        marks,
        trajectory: Trajectory::new(horizon, initial, events)?,
    })
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryRecord> {
    parse_trajectory(&read_text(path)?)
}
