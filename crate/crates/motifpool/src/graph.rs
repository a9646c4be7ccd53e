//! Graph and dataset representations plus synthetic generators.
//!
//! Graphs are simple and undirected: no self-loops, no duplicate edges,
//! 0-indexed nodes. Construction normalizes edge direction and rejects
//! anything that would violate those invariants.

use crate::error::{DataError, TrainError};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Matrix = Array2<f64>;

/// A single attributed graph, the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Undirected edges stored as (i, j) with i < j, sorted, deduplicated.
    edges: Vec<(usize, usize)>,
    /// Dense node features, one row per node.
    features: Matrix,
    label: Option<usize>,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        features: Matrix,
        label: Option<usize>,
    ) -> Result<Self, DataError> {
        if n == 0 {
            return Err(DataError::Invalid("graph must have at least one node".into()));
        }
        if features.nrows() != n {
            return Err(DataError::Invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite node feature".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(DataError::Invalid(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(DataError::Invalid(format!(
                    "edge ({a}, {b}) references node outside 0..{n}"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Graph {
            n,
            edges: norm,
            features,
            label,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn set_features(&mut self, features: Matrix) -> Result<(), DataError> {
        if features.nrows() != self.n {
            return Err(DataError::Invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.n
            )));
        }
        self.features = features;
        Ok(())
    }

    /// Dense symmetric 0/1 adjacency with zero diagonal.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    /// Sorted neighbor lists.
    pub fn adjacency_list(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Relabel nodes: new node `perm[i]` is old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph, DataError> {
        if perm.len() != self.n {
            return Err(DataError::Invalid("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(DataError::Invalid("not a permutation".into()));
            }
            seen[p] = true;
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (perm[i], perm[j]))
            .collect();
        let mut feats = Matrix::zeros((self.n, self.features.ncols()));
        for i in 0..self.n {
            for c in 0..self.features.ncols() {
                feats[[perm[i], c]] = self.features[[i, c]];
            }
        }
        Graph::new(self.n, edges, feats, self.label)
    }
}

/// A labeled graph collection with a shared feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, num_classes: usize, name: String) -> Result<Self, DataError> {
        if graphs.is_empty() {
            return Err(DataError::Invalid("dataset has no graphs".into()));
        }
        if num_classes < 2 {
            return Err(DataError::Invalid(format!(
                "dataset must have at least 2 classes, got {num_classes}"
            )));
        }
        let feature_dim = graphs[0].features().ncols();
        for (gi, g) in graphs.iter().enumerate() {
            if g.features().ncols() != feature_dim {
                return Err(DataError::Invalid(format!(
                    "graph {gi} has feature width {} but dataset width is {feature_dim}",
                    g.features().ncols()
                )));
            }
            match g.label() {
                Some(l) if l < num_classes => {}
                Some(l) => {
                    return Err(DataError::Invalid(format!(
                        "graph {gi} label {l} outside 0..{num_classes}"
                    )))
                }
                None => {
                    return Err(DataError::Invalid(format!("graph {gi} has no label")));
                }
            }
        }
        Ok(Dataset {
            graphs,
            num_classes,
            feature_dim,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.graphs
            .iter()
            .flat_map(|g| g.degrees())
            .max()
            .unwrap_or(0)
    }

    pub fn avg_nodes(&self) -> f64 {
        self.graphs.iter().map(|g| g.n() as f64).sum::<f64>() / self.graphs.len() as f64
    }
}

/// Seeded train/val/test split fractions.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub seed: u64,
    pub fractions: (f64, f64, f64),
}

/// Deterministic shuffle-and-cut split. Sizes are floor(f * n) for train
/// and val; the remainder goes to test.
pub fn split(
    ds: &Dataset,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), TrainError> {
    let (ft, fv, fe) = spec.fractions;
    let sum = ft + fv + fe;
    if ft < 0.0 || fv < 0.0 || fe < 0.0 || (sum - 1.0).abs() > 1e-9 {
        return Err(TrainError::BadFractions(ft, fv, fe));
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_train = (ft * n as f64).floor() as usize;
    let n_val = (fv * n as f64).floor() as usize;
    let train = order[..n_train].to_vec();
    let val = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..].to_vec();
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }
    if test.is_empty() {
        return Err(TrainError::EmptySplit("test"));
    }
    Ok((train, val, test))
}

/// One-hot encoding of min(degree, max_degree) over max_degree + 1 bins.
pub fn degree_onehot(g: &Graph, max_degree: usize) -> Matrix {
    assert!(max_degree >= 1, "max_degree must be at least 1");
    let mut feats = Matrix::zeros((g.n(), max_degree + 1));
    for (i, d) in g.degrees().into_iter().enumerate() {
        feats[[i, d.min(max_degree)]] = 1.0;
    }
    feats
}

/// Cycle graph with 2-D coordinates on the unit circle as features.
pub fn make_ring(n: usize) -> Graph {
    assert!(n >= 3, "ring needs at least 3 nodes");
    let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let mut feats = Matrix::zeros((n, 2));
    for i in 0..n {
        let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        feats[[i, 0]] = t.cos();
        feats[[i, 1]] = t.sin();
    }
    Graph::new(n, edges, feats, None).expect("ring construction")
}

/// Lattice with 4-neighborhood edges and normalized integer coordinates.
pub fn make_grid(rows: usize, cols: usize) -> Graph {
    assert!(rows >= 2 && cols >= 2, "grid needs at least 2x2 nodes");
    let n = rows * cols;
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
            }
        }
    }
    let mut feats = Matrix::zeros((n, 2));
    for r in 0..rows {
        for c in 0..cols {
            feats[[idx(r, c), 0]] = r as f64 / (rows - 1) as f64;
            feats[[idx(r, c), 1]] = c as f64 / (cols - 1) as f64;
        }
    }
    Graph::new(n, edges, feats, None).expect("grid construction")
}

/// Erdos-Renyi G(n, p) with degree one-hot features, for verification sweeps.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let placeholder = Matrix::zeros((n, 1));
    let mut g = Graph::new(n, edges, placeholder, None).expect("er construction");
    let cap = g.degrees().into_iter().max().unwrap_or(0).max(1);
    let feats = degree_onehot(&g, cap);
    g.set_features(feats).expect("er features");
    g
}

/// Sparse random graph with a fixed expected average degree, used for
/// scaling measurements.
pub fn sparse_random(n: usize, avg_degree: f64, rng: &mut impl Rng) -> Graph {
    let m = ((avg_degree * n as f64) / 2.0).round() as usize;
    let mut edges = std::collections::BTreeSet::new();
    while edges.len() < m {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    let placeholder = Matrix::zeros((n, 1));
    let mut g = Graph::new(n, edges.into_iter().collect(), placeholder, None)
        .expect("sparse construction");
    let cap = g.degrees().into_iter().max().unwrap_or(0).max(1);
    let feats = degree_onehot(&g, cap);
    g.set_features(feats).expect("sparse features");
    g
}

/// Cycle of length `cycle` with a path of `tail` extra nodes hanging off
/// one cycle node. Degree multiset is {3, 2 x (cycle + tail - 2), 1},
/// which depends only on cycle + tail.
pub fn make_tadpole(cycle: usize, tail: usize, label: Option<usize>) -> Graph {
    assert!(cycle >= 3 && tail >= 1);
    let n = cycle + tail;
    let mut edges: Vec<(usize, usize)> = (0..cycle).map(|i| (i, (i + 1) % cycle)).collect();
    edges.push((0, cycle));
    for t in 0..tail - 1 {
        edges.push((cycle + t, cycle + t + 1));
    }
    let placeholder = Matrix::zeros((n, 1));
    let mut g = Graph::new(n, edges, placeholder, label).expect("tadpole construction");
    let feats = degree_onehot(&g, 3);
    g.set_features(feats).expect("tadpole features");
    g
}

/// Paired dataset of triangle-rich vs triangle-free graphs where every
/// matched pair shares its degree sequence: a 3-cycle with a tail of
/// length p vs a 5-cycle with a tail of length p - 2, both on p + 3 nodes.
/// Label 1 marks the triangle-rich class.
pub fn separable_dataset(tail_lengths: &[usize]) -> Dataset {
    let mut graphs = Vec::new();
    for &p in tail_lengths {
        assert!(p >= 3, "tail length must be at least 3");
        graphs.push(make_tadpole(3, p, Some(1)));
        graphs.push(make_tadpole(5, p - 2, Some(0)));
    }
    Dataset::new(graphs, 2, "separable-triangles".into()).expect("separable dataset")
}
