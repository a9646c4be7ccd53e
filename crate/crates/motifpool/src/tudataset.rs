//! TUDataset flat-file ingestion and the matching writer.
//!
//! Format: `{name}_A.txt` lists directed edge pairs "i, j" with 1-indexed
//! global node ids, `{name}_graph_indicator.txt` maps each node to its
//! graph, `{name}_graph_labels.txt` holds one label per graph. Optional
//! `{name}_node_labels.txt` and `{name}_node_attributes.txt` provide node
//! features; when neither exists, degree one-hot features are synthesized.
//! LF and CRLF line endings are both accepted.

use crate::error::DataError;
use crate::graph::{degree_onehot, Dataset, Graph, Matrix};
use std::collections::BTreeMap;
use std::path::Path;

/// Upper bound on feature-matrix cells, guarding against degenerate inputs
/// that would request absurd allocations.
const MAX_FEATURE_CELLS: usize = 1 << 26;

/// Raw file contents of one dataset, before parsing.
pub struct TuSources<'a> {
    pub adjacency: &'a str,
    pub indicator: &'a str,
    pub graph_labels: &'a str,
    pub node_labels: Option<&'a str>,
    pub node_attributes: Option<&'a str>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_int(file: &str, line: usize, field: &str) -> Result<i64, DataError> {
    field.trim().parse::<i64>().map_err(|_| DataError::Parse {
        file: file.into(),
        line,
        msg: format!("expected integer, got '{}'", field.trim()),
    })
}

fn parse_float(file: &str, line: usize, field: &str) -> Result<f64, DataError> {
    let v: f64 = field.trim().parse().map_err(|_| DataError::Parse {
        file: file.into(),
        line,
        msg: format!("expected number, got '{}'", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(DataError::Parse {
            file: file.into(),
            line,
            msg: format!("non-finite attribute '{}'", field.trim()),
        });
    }
    Ok(v)
}

/// Parse a dataset from in-memory file contents.
pub fn parse_tudataset(src: &TuSources, name: &str) -> Result<Dataset, DataError> {
    let ind_file = format!("{name}_graph_indicator.txt");
    let a_file = format!("{name}_A.txt");
    let gl_file = format!("{name}_graph_labels.txt");

    // Node -> graph assignment; graph ids must be 1..=G with no gaps.
    let mut node_graph: Vec<usize> = Vec::new();
    for (ln, l) in lines(src.indicator) {
        let gid = parse_int(&ind_file, ln, l)?;
        if gid < 1 {
            return Err(DataError::Parse {
                file: ind_file.clone(),
                line: ln,
                msg: format!("graph id must be positive, got {gid}"),
            });
        }
        node_graph.push(gid as usize - 1);
    }
    let n_nodes = node_graph.len();
    if n_nodes == 0 {
        return Err(DataError::Invalid("graph indicator file is empty".into()));
    }
    let n_graphs = node_graph.iter().max().unwrap() + 1;
    if n_graphs > n_nodes {
        return Err(DataError::Invalid(format!(
            "indicator names {n_graphs} graphs but only {n_nodes} nodes exist"
        )));
    }

    // Local node id = order of appearance within its graph.
    let mut graph_sizes = vec![0usize; n_graphs];
    let mut local_id = Vec::with_capacity(n_nodes);
    for &g in &node_graph {
        local_id.push(graph_sizes[g]);
        graph_sizes[g] += 1;
    }
    if let Some(g) = graph_sizes.iter().position(|&s| s == 0) {
        return Err(DataError::Invalid(format!("graph {} has no nodes", g + 1)));
    }

    // Edges: global 1-indexed pairs, both endpoints in the same graph.
    // Directed duplicates merge; self-loops are dropped.
    let mut graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (ln, l) in lines(src.adjacency) {
        let mut parts = l.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(DataError::Parse {
                    file: a_file.clone(),
                    line: ln,
                    msg: format!("expected 'i, j', got '{l}'"),
                })
            }
        };
        let u = parse_int(&a_file, ln, a)?;
        let v = parse_int(&a_file, ln, b)?;
        for e in [u, v] {
            if e < 1 || e as usize > n_nodes {
                return Err(DataError::Parse {
                    file: a_file.clone(),
                    line: ln,
                    msg: format!("node {e} outside indicator range 1..={n_nodes}"),
                });
            }
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        if u == v {
            continue;
        }
        if node_graph[u] != node_graph[v] {
            return Err(DataError::Parse {
                file: a_file.clone(),
                line: ln,
                msg: format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    u + 1,
                    v + 1,
                    node_graph[u] + 1,
                    node_graph[v] + 1
                ),
            });
        }
        graph_edges[node_graph[u]].push((local_id[u], local_id[v]));
    }

    // Graph labels, remapped onto a dense 0..C range by sorted value.
    let mut raw_labels = Vec::with_capacity(n_graphs);
    for (ln, l) in lines(src.graph_labels) {
        raw_labels.push(parse_int(&gl_file, ln, l)?);
    }
    if raw_labels.len() != n_graphs {
        return Err(DataError::Invalid(format!(
            "{} graph labels for {} graphs",
            raw_labels.len(),
            n_graphs
        )));
    }
    let mut label_map = BTreeMap::new();
    for &l in &raw_labels {
        let next = label_map.len();
        label_map.entry(l).or_insert(next);
    }
    // BTreeMap iteration is sorted; reassign dense codes in value order.
    for (rank, (_, code)) in label_map.iter_mut().enumerate() {
        *code = rank;
    }
    let labels: Vec<usize> = raw_labels.iter().map(|l| label_map[l]).collect();

    // Optional node-level features.
    let node_label_onehot = match src.node_labels {
        Some(text) => {
            let nl_file = format!("{name}_node_labels.txt");
            let mut raw = Vec::with_capacity(n_nodes);
            for (ln, l) in lines(text) {
                raw.push(parse_int(&nl_file, ln, l)?);
            }
            if raw.len() != n_nodes {
                return Err(DataError::Invalid(format!(
                    "{} node labels for {} nodes",
                    raw.len(),
                    n_nodes
                )));
            }
            let mut map = BTreeMap::new();
            for &l in &raw {
                let next = map.len();
                map.entry(l).or_insert(next);
            }
            for (rank, (_, code)) in map.iter_mut().enumerate() {
                *code = rank;
            }
            let width = map.len();
            if n_nodes.saturating_mul(width) > MAX_FEATURE_CELLS {
                return Err(DataError::Invalid(format!(
                    "node label one-hot would need {n_nodes} x {width} cells"
                )));
            }
            let mut m = Matrix::zeros((n_nodes, width));
            for (i, l) in raw.iter().enumerate() {
                m[[i, map[l]]] = 1.0;
            }
            Some(m)
        }
        None => None,
    };

    let node_attrs = match src.node_attributes {
        Some(text) => {
            let na_file = format!("{name}_node_attributes.txt");
            let mut flat = Vec::new();
            let mut width = None;
            let mut rows = 0usize;
            for (ln, l) in lines(text) {
                let mut count = 0usize;
                for field in l.split(',') {
                    flat.push(parse_float(&na_file, ln, field)?);
                    count += 1;
                }
                match width {
                    None => width = Some(count),
                    Some(w) if w != count => {
                        return Err(DataError::Parse {
                            file: na_file.clone(),
                            line: ln,
                            msg: format!("row has {count} attributes, expected {w}"),
                        })
                    }
                    _ => {}
                }
                rows += 1;
            }
            if rows != n_nodes {
                return Err(DataError::Invalid(format!(
                    "{rows} attribute rows for {n_nodes} nodes"
                )));
            }
            let width = width.unwrap_or(0);
            if width == 0 {
                return Err(DataError::Invalid("attribute rows are empty".into()));
            }
            Some(Matrix::from_shape_vec((n_nodes, width), flat).expect("attr shape"))
        }
        None => None,
    };

    // Combine: node-label one-hot first, continuous attributes after.
    let features: Option<Matrix> = match (node_label_onehot, node_attrs) {
        (Some(oh), Some(at)) => {
            let width = oh.ncols() + at.ncols();
            let mut m = Matrix::zeros((n_nodes, width));
            for i in 0..n_nodes {
                for c in 0..oh.ncols() {
                    m[[i, c]] = oh[[i, c]];
                }
                for c in 0..at.ncols() {
                    m[[i, oh.ncols() + c]] = at[[i, c]];
                }
            }
            Some(m)
        }
        (Some(oh), None) => Some(oh),
        (None, Some(at)) => Some(at),
        (None, None) => None,
    };

    // Assemble per-graph structures.
    let mut graphs = Vec::with_capacity(n_graphs);
    let mut node_cursor = vec![Vec::new(); n_graphs];
    if let Some(f) = &features {
        for (i, &g) in node_graph.iter().enumerate() {
            node_cursor[g].push(f.row(i).to_vec());
        }
    }
    for gi in 0..n_graphs {
        let n = graph_sizes[gi];
        let feats = if let Some(_f) = &features {
            let rows = &node_cursor[gi];
            let width = rows[0].len();
            let mut m = Matrix::zeros((n, width));
            for (r, row) in rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    m[[r, c]] = *v;
                }
            }
            m
        } else {
            Matrix::zeros((n, 1)) // replaced by degree features below
        };
        graphs.push(Graph::new(
            n,
            graph_edges[gi].clone(),
            feats,
            Some(labels[gi]),
        )?);
    }

    if features.is_none() {
        let cap = graphs
            .iter()
            .flat_map(|g| g.degrees())
            .max()
            .unwrap_or(0)
            .max(1);
        let n_total: usize = graphs.iter().map(|g| g.n()).sum();
        if n_total.saturating_mul(cap + 1) > MAX_FEATURE_CELLS {
            return Err(DataError::Invalid(format!(
                "degree one-hot would need {n_total} x {} cells",
                cap + 1
            )));
        }
        for g in &mut graphs {
            let f = degree_onehot(g, cap);
            g.set_features(f)?;
        }
    }

    Dataset::new(graphs, label_map.len(), name.into())
}

fn read_file(dir: &Path, file: &str) -> Result<String, DataError> {
    let path = dir.join(file);
    std::fs::read_to_string(&path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a dataset from `dir`, expecting the standard TUDataset file names.
pub fn load_tudataset(dir: &Path, name: &str) -> Result<Dataset, DataError> {
    for mandatory in ["A", "graph_indicator", "graph_labels"] {
        let file = format!("{name}_{mandatory}.txt");
        if !dir.join(&file).exists() {
            return Err(DataError::MissingFile(dir.join(file).display().to_string()));
        }
    }
    let adjacency = read_file(dir, &format!("{name}_A.txt"))?;
    let indicator = read_file(dir, &format!("{name}_graph_indicator.txt"))?;
    let graph_labels = read_file(dir, &format!("{name}_graph_labels.txt"))?;
    let node_labels = if dir.join(format!("{name}_node_labels.txt")).exists() {
        Some(read_file(dir, &format!("{name}_node_labels.txt"))?)
    } else {
        None
    };
    let node_attributes = if dir.join(format!("{name}_node_attributes.txt")).exists() {
        Some(read_file(dir, &format!("{name}_node_attributes.txt"))?)
    } else {
        None
    };
    parse_tudataset(
        &TuSources {
            adjacency: &adjacency,
            indicator: &indicator,
            graph_labels: &graph_labels,
            node_labels: node_labels.as_deref(),
            node_attributes: node_attributes.as_deref(),
        },
        name,
    )
}

/// Write a dataset back out as TUDataset files. Features are emitted as
/// node attributes with round-trip-exact decimal formatting, so loading
/// the result reproduces the dataset bit for bit.
pub fn save_tudataset(ds: &Dataset, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let name = &ds.name;
    let mut a = String::new();
    let mut ind = String::new();
    let mut gl = String::new();
    let mut na = String::new();
    let mut offset = 1usize; // global ids are 1-indexed
    for (gi, g) in ds.graphs.iter().enumerate() {
        for i in 0..g.n() {
            ind.push_str(&format!("{}\n", gi + 1));
            let row: Vec<String> = g
                .features()
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            na.push_str(&row.join(", "));
            na.push('\n');
        }
        for &(i, j) in g.edges() {
            a.push_str(&format!("{}, {}\n", offset + i, offset + j));
            a.push_str(&format!("{}, {}\n", offset + j, offset + i));
        }
        gl.push_str(&format!("{}\n", g.label().expect("dataset graphs are labeled")));
        offset += g.n();
    }
    for (file, content) in [
        (format!("{name}_A.txt"), a),
        (format!("{name}_graph_indicator.txt"), ind),
        (format!("{name}_graph_labels.txt"), gl),
        (format!("{name}_node_attributes.txt"), na),
    ] {
        let path = dir.join(&file);
        std::fs::write(&path, content).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}
