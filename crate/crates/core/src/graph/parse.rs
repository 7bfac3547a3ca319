use std::collections::HashMap;
use std::io::BufRead;

use super::{Arc, GraphError, InfluenceGraph};

/// Largest number of distinct node labels accepted by the loader.
pub const MAX_NODES: usize = u32::MAX as usize;

/// A graph read from an edge list together with the original node labels.
/// `labels[i]` is the label of dense node id `i`.
#[derive(Debug, Clone)]
pub struct ParsedGraph {
    pub graph: InfluenceGraph,
    pub labels: Vec<String>,
}

/// Reads a whitespace-separated edge list.
///
/// Each non-empty line is `src dst` or `src dst weight`; lines starting with
/// `#` (or `%`) are comments. Labels are remapped to dense ids in order of first
/// appearance. Undirected input produces both arc directions. When `weighted`
/// is false any weight column is ignored and every arc has weight 1. Weights are
/// left unnormalized.
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    directed: bool,
    weighted: bool,
) -> Result<ParsedGraph, GraphError> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut arcs = Vec::new();

    let mut intern = |label: &str| -> Result<usize, GraphError> {
        if let Some(&id) = ids.get(label) {
            return Ok(id);
        }
        if labels.len() >= MAX_NODES {
            return Err(GraphError::NodeCountOverflow { max: MAX_NODES });
        }
        let id = labels.len();
        ids.insert(label.to_owned(), id);
        labels.push(label.to_owned());
        Ok(id)
    };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| GraphError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(GraphError::Malformed {
                line: lineno,
                message: format!("expected `src dst [weight]`, found {} fields", fields.len()),
            });
        }
        let weight = match (weighted, fields.get(2)) {
            (true, Some(w)) => {
                let w: f64 = w.parse().map_err(|_| GraphError::Malformed {
                    line: lineno,
                    message: format!("cannot parse weight `{w}`"),
                })?;
                if !w.is_finite() {
                    return Err(GraphError::Malformed {
                        line: lineno,
                        message: format!("non-finite weight `{w}`"),
                    });
                }
                if w < 0.0 {
                    return Err(GraphError::NegativeWeight {
                        line: lineno,
                        weight: w,
                    });
                }
                w
            }
            _ => 1.0,
        };
        let src = intern(fields[0])?;
        let dst = intern(fields[1])?;
        arcs.push(Arc {
            source: src,
            target: dst,
            weight,
        });
        if !directed && src != dst {
            arcs.push(Arc {
                source: dst,
                target: src,
                weight,
            });
        }
    }

    let graph = InfluenceGraph::from_arcs(labels.len(), arcs)?;
    Ok(ParsedGraph { graph, labels })
}
