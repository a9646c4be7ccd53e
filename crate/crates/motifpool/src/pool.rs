//! The two pooling channels: motif-attention top-k selection, and motif
//! spectral clustering with cut and orthogonality losses.

use crate::autodiff::{Matrix, Parameter, Value};
use crate::gnn::glorot;
use crate::motif::MotifAdjacency;
use rand::Rng;

/// Output of one pooling step. The coarsened adjacency is detached from
/// the differentiation graph: gradients never flow into adjacency.
pub struct PoolResult {
    pub adj_out: Matrix,
    pub x_out: Value,
    pub selected: Option<Vec<usize>>,
    pub assignment: Option<Value>,
    pub aux_loss: Value,
}

/// Selection channel: one attention weight column and a pooling ratio.
pub struct SelectionPool {
    theta_att: Parameter,
    ratio: f64,
}

impl SelectionPool {
    pub fn new(name: impl Into<String>, d: usize, ratio: f64, rng: &mut impl Rng) -> Self {
        assert!(ratio > 0.0 && ratio <= 1.0, "pooling ratio must be in (0, 1]");
        SelectionPool {
            theta_att: Parameter::new(name, glorot(d, 1, rng)),
            ratio,
        }
    }

    pub fn theta_att(&self) -> &Parameter {
        &self.theta_att
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Motif attention scores: tanh(m_norm * x * theta_att), one per node.
    pub fn attention(&self, m_norm: &Value, x: &Value) -> Value {
        m_norm.matmul(x).matmul(self.theta_att.value()).tanh()
    }
}

/// k = max(1, ceil(alpha * n)).
pub fn pooled_count(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64).ceil() as usize).clamp(1, n)
}

/// Indices of the k highest scores, ordered by descending score with ties
/// broken toward the lower original index.
pub fn topk_indices(scores: &Matrix, alpha: f64) -> Vec<usize> {
    let n = scores.nrows();
    let k = pooled_count(n, alpha);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[[b, 0]]
            .partial_cmp(&scores[[a, 0]])
            .expect("scores must be comparable")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Keep the top-k scoring nodes: features are gated by their scores, the
/// plain adjacency is row/column indexed. Gradients flow through both the
/// gate and the selected feature rows.
pub fn select_topk(scores: &Value, x: &Value, adj: &Matrix, alpha: f64) -> PoolResult {
    let (n, one) = scores.shape();
    assert_eq!(one, 1, "scores must be Nx1");
    assert_eq!(n, x.rows(), "scores and features disagree on node count");
    let idx = topk_indices(&scores.data(), alpha);
    let x_out = x.gather_rows(&idx).col_scale(&scores.gather_rows(&idx));
    let k = idx.len();
    let mut adj_out = Matrix::zeros((k, k));
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            adj_out[[r, c]] = adj[[i, j]];
        }
    }
    PoolResult {
        adj_out,
        x_out,
        selected: Some(idx),
        assignment: None,
        aux_loss: Value::scalar(0.0),
    }
}

/// Clustering channel: the assignment MLP softmax(relu(x W1) W2).
pub struct ClusterPool {
    w1: Parameter,
    w2: Parameter,
    k: usize,
}

impl ClusterPool {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        hidden: usize,
        k: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(k >= 1, "cluster count must be positive");
        let name = name.into();
        ClusterPool {
            w1: Parameter::new(format!("{name}.w1"), glorot(d, hidden, rng)),
            w2: Parameter::new(format!("{name}.w2"), glorot(hidden, k, rng)),
            k,
        }
    }

    pub fn w1(&self) -> &Parameter {
        &self.w1
    }

    pub fn w2(&self) -> &Parameter {
        &self.w2
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Soft assignment matrix with rows on the simplex.
    pub fn assign(&self, x: &Value) -> Value {
        x.matmul(self.w1.value())
            .relu()
            .matmul(self.w2.value())
            .softmax_rows()
    }
}

/// Cut loss -Tr(S'MS)/Tr(S'DS) and orthogonality loss
/// ||S'S/||S'S||_F - I/sqrt(K)||_F. An all-zero motif adjacency makes the
/// cut ratio degenerate, in which case the cut loss is defined as 0.
pub fn mincut_losses(s: &Value, m: &MotifAdjacency) -> (Value, Value) {
    let (_, k) = s.shape();
    let l_c = if m.is_all_zero() {
        Value::scalar(0.0)
    } else {
        let n = m.n();
        let dense = m.to_dense();
        let mut deg = Matrix::zeros((n, n));
        for i in 0..n {
            deg[[i, i]] = dense.row(i).sum();
        }
        let mv = Value::constant(dense);
        let dv = Value::constant(deg);
        let st = s.transpose();
        let num = st.matmul(&mv.matmul(s)).trace();
        let den = st.matmul(&dv.matmul(s)).trace();
        num.div(&den).scalar_mul(-1.0)
    };

    let gram = s.transpose().matmul(s);
    let mut target = Matrix::zeros((k, k));
    let inv_sqrt_k = 1.0 / (k as f64).sqrt();
    for i in 0..k {
        target[[i, i]] = inv_sqrt_k;
    }
    let l_o = gram
        .div_scalar(&gram.frobenius_norm())
        .sub(&Value::constant(target))
        .frobenius_norm();
    (l_c, l_o)
}

/// Coarsen through the assignment: adj_out = S'MS, x_out = S'X, with the
/// cut and orthogonality losses attached for the training objective.
pub fn cluster_coarsen(s: &Value, m: &MotifAdjacency, x: &Value) -> PoolResult {
    let (n, _) = s.shape();
    assert_eq!(n, m.n(), "assignment and motif adjacency disagree on nodes");
    assert_eq!(n, x.rows(), "assignment and features disagree on nodes");
    let (l_c, l_o) = mincut_losses(s, m);
    let aux = l_c.add(&l_o);
    let s_data = s.data().clone();
    let adj_out = s_data.t().dot(&m.to_dense()).dot(&s_data);
    let x_out = s.transpose().matmul(x);
    PoolResult {
        adj_out,
        x_out,
        selected: None,
        assignment: Some(s.clone()),
        aux_loss: aux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_ring, Graph};
    use crate::motif::{motif_adjacency, normalize_motif, MotifKind};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn two_triangles() -> Graph {
        Graph::new(
            6,
            vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            Matrix::zeros((6, 1)),
            None,
        )
        .unwrap()
    }

    fn simplex_rows(n: usize, k: usize, rng: &mut impl Rng) -> Matrix {
        let mut s = Matrix::zeros((n, k));
        for i in 0..n {
            let mut row: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
            let z: f64 = row.iter().sum();
            for v in &mut row {
                *v /= z;
            }
            for (c, v) in row.into_iter().enumerate() {
                s[[i, c]] = v;
            }
        }
        s
    }

    #[test]
    fn zero_attention_weights_give_zero_scores() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let pool = SelectionPool::new("att", 3, 0.5, &mut rng);
        pool.theta_att.set_data(Matrix::zeros((3, 1)));
        let x = Value::constant(Matrix::from_shape_fn((4, 3), |(i, j)| (i + j) as f64));
        let m_norm = Value::constant(Matrix::from_shape_fn((4, 4), |_| 0.25));
        let z = pool.attention(&m_norm, &x);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_attention_is_tanh_of_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pool = SelectionPool::new("att", 1, 1.0, &mut rng);
        pool.theta_att.set_data(Matrix::from_elem((1, 1), 1.0));
        let x = Value::constant(Matrix::from_elem((1, 1), 2.0));
        let m_norm = Value::constant(Matrix::from_elem((1, 1), 1.0));
        let z = pool.attention(&m_norm, &x);
        assert!((z.data()[[0, 0]] - 2f64.tanh()).abs() < 1e-15);
        assert!((z.data()[[0, 0]] - 0.9640).abs() < 1e-4);
    }

    #[test]
    fn automorphic_ring_nodes_score_identically() {
        let g = make_ring(4);
        let mut feats = Matrix::zeros((4, 2));
        for i in 0..4 {
            feats[[i, 0]] = 1.0;
            feats[[i, 1]] = -0.5;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pool = SelectionPool::new("att", 2, 0.5, &mut rng);
        let m_norm = Value::constant(normalize_motif(&motif_adjacency(&g, MotifKind::TwoStar)));
        let z = pool.attention(&m_norm, &Value::constant(feats));
        for i in 1..4 {
            assert!((z.data()[[i, 0]] - z.data()[[0, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn topk_order_and_tiebreak() {
        let scores = Matrix::from_shape_vec((3, 1), vec![0.9, 0.1, 0.5]).unwrap();
        assert_eq!(topk_indices(&scores, 0.5), vec![0, 2]);

        let equal = Matrix::from_elem((3, 1), 0.3);
        assert_eq!(topk_indices(&equal, 2.0 / 3.0), vec![0, 1]);
    }

    #[test]
    fn full_ratio_sorts_descending_and_conjugates_adjacency() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let g = crate::graph::erdos_renyi(6, 0.5, &mut rng);
        let scores_m = Matrix::from_shape_fn((6, 1), |_| rng.random_range(-1.0..1.0));
        let scores = Value::constant(scores_m.clone());
        let x = Value::constant(g.features().clone());
        let adj = g.adjacency();
        let res = select_topk(&scores, &x, &adj, 1.0);
        let idx = res.selected.unwrap();
        for w in idx.windows(2) {
            assert!(scores_m[[w[0], 0]] >= scores_m[[w[1], 0]]);
        }
        // adj_out = P adj P' for the permutation P mapping rank -> node
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                assert_eq!(res.adj_out[[r, c]], adj[[i, j]]);
            }
        }
    }

    #[test]
    fn selection_k_has_floor_one() {
        let scores = Value::constant(Matrix::from_elem((1, 1), 0.2));
        let x = Value::constant(Matrix::from_elem((1, 2), 1.0));
        let res = select_topk(&scores, &x, &Matrix::zeros((1, 1)), 0.25);
        assert_eq!(res.x_out.rows(), 1);
    }

    #[test]
    fn gate_multiplies_selected_rows() {
        let scores = Value::constant(Matrix::from_shape_vec((2, 1), vec![0.5, -0.25]).unwrap());
        let x = Value::constant(Matrix::from_shape_vec((2, 2), vec![2.0, 4.0, 8.0, 16.0]).unwrap());
        let res = select_topk(&scores, &x, &Matrix::zeros((2, 2)), 1.0);
        let out = res.x_out.data();
        assert_eq!(out[[0, 0]], 1.0); // 2 * 0.5
        assert_eq!(out[[1, 1]], -4.0); // 16 * -0.25
    }

    #[test]
    fn zero_w2_gives_uniform_assignments() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let pool = ClusterPool::new("c", 3, 5, 4, &mut rng);
        pool.w2.set_data(Matrix::zeros((5, 4)));
        let x = Value::constant(Matrix::from_shape_fn((6, 3), |(i, j)| (i * j) as f64));
        let s = pool.assign(&x);
        for i in 0..6 {
            for c in 0..4 {
                assert!((s.data()[[i, c]] - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_feature_rows_get_identical_assignments() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pool = ClusterPool::new("c", 2, 4, 3, &mut rng);
        let x = Value::constant(Matrix::from_shape_vec((2, 2), vec![0.7, -0.2, 0.7, -0.2]).unwrap());
        let s = pool.assign(&x);
        for c in 0..3 {
            assert_eq!(s.data()[[0, c]], s.data()[[1, c]]);
        }
    }

    #[test]
    fn assignment_rows_sum_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let pool = ClusterPool::new("c", 3, 4, 2, &mut rng);
        let x = Value::constant(Matrix::from_shape_fn((6, 3), |_| rng.random_range(-2.0..2.0)));
        let s = pool.assign(&x);
        for i in 0..6 {
            let sum: f64 = (0..2).map(|c| s.data()[[i, c]]).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_partition_extremes() {
        // hard assignment of two disjoint triangles: all motif weight is
        // intra-cluster and clusters are balanced
        let g = two_triangles();
        let m = motif_adjacency(&g, MotifKind::Triangle);
        let mut s = Matrix::zeros((6, 2));
        for i in 0..3 {
            s[[i, 0]] = 1.0;
            s[[i + 3, 1]] = 1.0;
        }
        let (l_c, l_o) = mincut_losses(&Value::constant(s), &m);
        assert!((l_c.item() + 1.0).abs() < 1e-12);
        assert!(l_o.item().abs() < 1e-12);
    }

    #[test]
    fn uniform_assignment_games_the_cut_loss_but_not_orthogonality() {
        // uniform rows drive L_c to -1 on any nonempty motif adjacency;
        // L_o stays away from zero and penalizes the degeneracy
        let g = two_triangles();
        let m = motif_adjacency(&g, MotifKind::Triangle);
        let s4 = Matrix::from_elem((4, 2), 0.5);
        let g4 = Graph::new(
            4,
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            Matrix::zeros((4, 1)),
            None,
        )
        .unwrap();
        let m4 = motif_adjacency(&g4, MotifKind::TwoStar);
        let (l_c4, l_o4) = mincut_losses(&Value::constant(s4), &m4);
        assert!((l_c4.item() + 1.0).abs() < 1e-12);
        // hand computation for N=4, K=2: S'S = J, ||J||_F = 2, so
        // l_o =||J/2 - I/sqrt(2)||_F
        let x = 1.0 / 2f64.sqrt();
        let expected = (2.0 * (0.5 - x).powi(2) + 2.0 * 0.25).sqrt();
        assert!((l_o4.item() - expected).abs() < 1e-12);

        let s6 = Matrix::from_elem((6, 2), 0.5);
        let (l_c6, _) = mincut_losses(&Value::constant(s6), &m);
        assert!((l_c6.item() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_bounds_hold_for_random_simplex_matrices() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(3..9);
            let k = rng.random_range(2..5);
            let g = crate::graph::erdos_renyi(n, 0.5, &mut rng);
            let m = motif_adjacency(&g, MotifKind::TwoStar);
            let s = Value::constant(simplex_rows(n, k, &mut rng));
            let (l_c, l_o) = mincut_losses(&s, &m);
            assert!(l_c.item() <= 1e-12 && l_c.item() >= -1.0 - 1e-12);
            assert!(l_o.item() >= -1e-12 && l_o.item() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn all_zero_motif_defines_cut_loss_as_zero() {
        let g = make_ring(5); // triangle-free
        let m = motif_adjacency(&g, MotifKind::Triangle);
        assert!(m.is_all_zero());
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let s = Value::constant(simplex_rows(5, 2, &mut rng));
        let (l_c, l_o) = mincut_losses(&s, &m);
        assert_eq!(l_c.item(), 0.0);
        assert!(l_o.item().is_finite());
    }

    #[test]
    fn identity_assignment_is_identity_pooling() {
        let g = two_triangles();
        let m = motif_adjacency(&g, MotifKind::Triangle);
        let n = 6;
        let mut eye = Matrix::zeros((n, n));
        for i in 0..n {
            eye[[i, i]] = 1.0;
        }
        let x = Value::constant(Matrix::from_shape_fn((n, 2), |(i, j)| (i + j) as f64));
        let res = cluster_coarsen(&Value::constant(eye), &m, &x);
        assert_eq!(res.adj_out, m.to_dense());
        assert_eq!(*res.x_out.data(), *x.data());
    }

    #[test]
    fn hard_partition_coarsens_to_diag_six() {
        let g = two_triangles();
        let m = motif_adjacency(&g, MotifKind::Triangle);
        let mut s = Matrix::zeros((6, 2));
        for i in 0..3 {
            s[[i, 0]] = 1.0;
            s[[i + 3, 1]] = 1.0;
        }
        let x = Value::constant(Matrix::zeros((6, 1)));
        let res = cluster_coarsen(&Value::constant(s), &m, &x);
        assert_eq!(res.adj_out[[0, 0]], 6.0);
        assert_eq!(res.adj_out[[1, 1]], 6.0);
        assert_eq!(res.adj_out[[0, 1]], 0.0);
        assert_eq!(res.adj_out[[1, 0]], 0.0);
    }

    #[test]
    fn coarsening_conserves_total_weight() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(3..9);
            let k = rng.random_range(2..5);
            let g = crate::graph::erdos_renyi(n, 0.6, &mut rng);
            let m = motif_adjacency(&g, MotifKind::TwoStarPlusTriangle);
            let s = Value::constant(simplex_rows(n, k, &mut rng));
            let x = Value::constant(Matrix::zeros((n, 1)));
            let res = cluster_coarsen(&s, &m, &x);
            let coarse: f64 = res.adj_out.iter().sum();
            let fine = m.total_weight();
            let rel = (coarse - fine).abs() / fine.max(1.0);
            assert!(rel < 1e-12, "weight {coarse} vs {fine}");
        }
    }

    #[test]
    fn permutation_assignment_conjugates() {
        let g = two_triangles();
        let m = motif_adjacency(&g, MotifKind::Triangle);
        let perm = vec![3, 0, 5, 1, 4, 2];
        let mut p = Matrix::zeros((6, 6));
        for (i, &pi) in perm.iter().enumerate() {
            p[[i, pi]] = 1.0;
        }
        let x = Value::constant(Matrix::zeros((6, 1)));
        let res = cluster_coarsen(&Value::constant(p.clone()), &m, &x);
        let dense = m.to_dense();
        let expect = p.t().dot(&dense).dot(&p);
        for (a, b) in res.adj_out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
