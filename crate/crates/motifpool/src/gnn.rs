//! Graph convolution over an arbitrary symmetric nonnegative adjacency.

use crate::autodiff::{Matrix, Parameter, Value};
use crate::motif::sym_normalize;
use rand::Rng;

/// D^{-1/2} (adj + I) D^{-1/2}, the self-looped symmetric normalization
/// used for feature propagation. The self-loop keeps row sums positive.
pub fn normalize_adjacency(adj: &Matrix) -> Matrix {
    let n = adj.nrows();
    assert_eq!(n, adj.ncols(), "adjacency must be square");
    let mut a = adj.clone();
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    sym_normalize(&a)
}

/// Glorot uniform initialization over +-sqrt(6 / (fan_in + fan_out)).
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// One graph convolution: sigma(propagation * h * theta), no bias.
pub struct GcnLayer {
    theta: Parameter,
    activation: Activation,
}

impl GcnLayer {
    pub fn new(
        name: impl Into<String>,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        GcnLayer {
            theta: Parameter::new(name, glorot(d_in, d_out, rng)),
            activation,
        }
    }

    pub fn theta(&self) -> &Parameter {
        &self.theta
    }

    /// Forward through a precomputed normalized propagation matrix,
    /// entering the graph as a constant leaf.
    pub fn forward(&self, propagation: &Value, h: &Value) -> Value {
        let z = propagation.matmul(h).matmul(self.theta.value());
        match self.activation {
            Activation::Relu => z.relu(),
            Activation::None => z,
        }
    }
}

/// Convenience entry point that normalizes the raw adjacency first.
pub fn gcn_forward(layer: &GcnLayer, adj: &Matrix, h: &Value) -> Value {
    let prop = Value::constant(normalize_adjacency(adj));
    layer.forward(&prop, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, Graph};
    use crate::motif::{motif_adjacency, normalize_motif, MotifKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ident(n: usize) -> Matrix {
        Matrix::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn isolated_node_passes_through_theta() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let layer = GcnLayer::new("t", 2, 3, Activation::None, &mut rng);
        let x = Value::constant(Matrix::from_shape_vec((1, 2), vec![0.3, -1.1]).unwrap());
        let out = gcn_forward(&layer, &Matrix::zeros((1, 1)), &x);
        let direct = x.data().dot(&*layer.theta().data());
        for (a, b) in out.data().iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn disconnected_identical_nodes_get_identical_rows() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let layer = GcnLayer::new("t", 2, 4, Activation::Relu, &mut rng);
        let x = Value::constant(Matrix::from_shape_vec((2, 2), vec![1.0, 2.0, 1.0, 2.0]).unwrap());
        let out = gcn_forward(&layer, &Matrix::zeros((2, 2)), &x);
        for c in 0..4 {
            assert_eq!(out.data()[[0, c]], out.data()[[1, c]]);
        }
    }

    #[test]
    fn identity_theta_reproduces_direct_normalized_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let g = erdos_renyi(5, 0.5, &mut rng);
        let d = g.features().ncols();
        let mut layer = GcnLayer::new("t", d, d, Activation::None, &mut rng);
        layer.theta.set_data(ident(d));
        let x = Value::constant(g.features().clone());
        let out = gcn_forward(&layer, &g.adjacency(), &x);
        let direct = normalize_adjacency(&g.adjacency()).dot(g.features());
        for (a, b) in out.data().iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let g = erdos_renyi(7, 0.4, &mut rng);
        let perm = vec![4, 2, 6, 0, 3, 5, 1];
        let pg = g.permuted(&perm).unwrap();
        let d = g.features().ncols();
        let layer = GcnLayer::new("t", d, 3, Activation::Relu, &mut rng);

        let out = gcn_forward(&layer, &g.adjacency(), &Value::constant(g.features().clone()));
        let pout = gcn_forward(
            &layer,
            &pg.adjacency(),
            &Value::constant(pg.features().clone()),
        );
        for i in 0..7 {
            for c in 0..3 {
                let diff = (out.data()[[i, c]] - pout.data()[[perm[i], c]]).abs();
                assert!(diff < 1e-12);
            }
        }
    }

    #[test]
    fn edge_motif_normalization_matches_plain_gcn() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let g = erdos_renyi(6, 0.5, &mut rng);
        let via_motif = normalize_motif(&motif_adjacency(&g, MotifKind::Edge));
        let direct = normalize_adjacency(&g.adjacency());
        for (a, b) in via_motif.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn components_are_independent() {
        // two disjoint edges; perturbing one component's features must not
        // change the other component's output
        let g = Graph::new(
            4,
            vec![(0, 1), (2, 3)],
            Matrix::from_shape_fn((4, 2), |(i, j)| (i + j) as f64),
            None,
        )
        .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let layer = GcnLayer::new("t", 2, 3, Activation::Relu, &mut rng);
        let base = gcn_forward(&layer, &g.adjacency(), &Value::constant(g.features().clone()));
        let mut bumped = g.features().clone();
        bumped[[0, 0]] += 5.0;
        bumped[[1, 1]] -= 2.0;
        let out = gcn_forward(&layer, &g.adjacency(), &Value::constant(bumped));
        for i in 2..4 {
            for c in 0..3 {
                assert_eq!(base.data()[[i, c]], out.data()[[i, c]]);
            }
        }
    }
}
