use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde_json::Value;

use super::{DualGraph, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphFormat {
    #[default]
    Json,
}

/// Reads a dual graph.
///
/// The JSON layout is
/// `{"vertices": [{"id": "a", "population": 3, "dem_votes": 1, ...}], "edges": [["a", "b"], ...]}`.
/// Every key other than `id` must be numeric; `population` is mandatory and
/// any other key must appear on every vertex. Vertex order in the file defines
/// the dense vertex index.
pub fn load_dual_graph<R: Read>(mut source: R, format: GraphFormat) -> Result<DualGraph, GraphError> {
    match format {
        GraphFormat::Json => {
            let mut text = String::new();
            source.read_to_string(&mut text)?;
            let value: Value = serde_json::from_str(&text)?;
            from_json(&value)
        }
    }
}

fn from_json(value: &Value) -> Result<DualGraph, GraphError> {
    let root = value
        .as_object()
        .ok_or_else(|| GraphError::Malformed("top level must be an object".into()))?;
    let vertices = root
        .get("vertices")
        .and_then(Value::as_array)
        .ok_or_else(|| GraphError::Malformed("missing \"vertices\" array".into()))?;
    let edges = root
        .get("edges")
        .and_then(Value::as_array)
        .ok_or_else(|| GraphError::Malformed("missing \"edges\" array".into()))?;

    let mut ids = Vec::with_capacity(vertices.len());
    let mut index = HashMap::with_capacity(vertices.len());
    let mut population = Vec::with_capacity(vertices.len());
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for (v, vertex) in vertices.iter().enumerate() {
        let object = vertex
            .as_object()
            .ok_or_else(|| GraphError::Malformed(format!("vertex #{v} is not an object")))?;
        let id = match object.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(GraphError::Malformed(format!("vertex #{v} has no string id"))),
        };
        if index.insert(id.clone(), v).is_some() {
            return Err(GraphError::DuplicateVertexId(id));
        }
        for (key, raw) in object {
            if key == "id" {
                continue;
            }
            let x = raw.as_f64().ok_or_else(|| GraphError::InvalidAttribute {
                vertex: id.clone(),
                name: key.clone(),
            })?;
            if key == "population" {
                population.push(x);
            } else {
                let column = columns.entry(key.clone()).or_default();
                if column.len() != v {
                    return Err(GraphError::IncompleteAttribute {
                        name: key.clone(),
                        vertex: ids.get(column.len()).cloned().unwrap_or_else(|| id.clone()),
                    });
                }
                column.push(x);
            }
        }
        if population.len() != v + 1 {
            return Err(GraphError::MissingPopulation(id));
        }
        ids.push(id);
    }
    for (name, column) in &columns {
        if column.len() != ids.len() {
            return Err(GraphError::IncompleteAttribute {
                name: name.clone(),
                vertex: ids[column.len()].clone(),
            });
        }
    }

    let mut pairs = Vec::with_capacity(edges.len());
    for (k, edge) in edges.iter().enumerate() {
        let ends = edge
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| GraphError::Malformed(format!("edge #{k} is not a pair")))?;
        let mut resolved = [0usize; 2];
        for (slot, end) in resolved.iter_mut().zip(ends) {
            let key = match end {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                _ => return Err(GraphError::Malformed(format!("edge #{k} has a non-id endpoint"))),
            };
            *slot = *index.get(&key).ok_or(GraphError::UnknownVertex(key))?;
        }
        pairs.push((resolved[0], resolved[1]));
    }

    DualGraph::from_parts(ids, population, columns, &pairs)
}

/// Reads a district assignment for `g`: either a JSON array of labels in
/// vertex order, or an object mapping vertex ids to labels. Labels may be
/// integers or strings; they are returned as dense integers in order of first
/// appearance.
pub fn load_assignment<R: Read>(mut source: R, g: &DualGraph) -> Result<Vec<usize>, GraphError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: Value = serde_json::from_str(&text)?;
    let n = g.vertex_count();
    let raw: Vec<&Value> = match &value {
        Value::Array(items) => {
            if items.len() != n {
                return Err(GraphError::Malformed(format!(
                    "assignment has {} labels for {n} vertices",
                    items.len()
                )));
            }
            items.iter().collect()
        }
        Value::Object(map) => {
            let index: HashMap<&str, usize> = g.ids().iter().enumerate().map(|(v, id)| (id.as_str(), v)).collect();
            let mut slots: Vec<Option<&Value>> = vec![None; n];
            for (id, label) in map {
                let v = *index.get(id.as_str()).ok_or_else(|| GraphError::UnknownVertex(id.clone()))?;
                slots[v] = Some(label);
            }
            slots
                .into_iter()
                .enumerate()
                .map(|(v, l)| l.ok_or_else(|| GraphError::Malformed(format!("vertex {:?} has no label", g.id(v)))))
                .collect::<Result<_, _>>()?
        }
        _ => return Err(GraphError::Malformed("assignment must be an array or an object".into())),
    };
    let mut dense: HashMap<String, usize> = HashMap::new();
    raw.into_iter()
        .enumerate()
        .map(|(v, label)| {
            let key = match label {
                Value::String(s) => s.clone(),
                Value::Number(n) if n.is_u64() || n.is_i64() => n.to_string(),
                _ => return Err(GraphError::Malformed(format!("vertex {:?} has a non-label value", g.id(v)))),
            };
            let next = dense.len();
            Ok(*dense.entry(key).or_insert(next))
        })
        .collect()
}
