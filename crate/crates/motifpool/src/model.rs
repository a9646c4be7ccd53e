//! The hierarchical classifier: per block one graph convolution and one
//! pooling layer, readouts concatenated across blocks, then an MLP head.
//!
//! Three channels exist. Selection ranks nodes by motif attention and
//! keeps the top k. Clustering soft-assigns nodes to clusters over the
//! motif adjacency and coarsens through the assignment. Combined runs
//! both stacks and concatenates their graph embeddings.

use crate::autodiff::{Matrix, Parameter, Value};
use crate::error::TrainError;
use crate::gnn::{glorot, normalize_adjacency, Activation, GcnLayer};
use crate::graph::{Dataset, Graph};
use crate::motif::{motif_adjacency_of_matrix, normalize_motif, MotifKind};
use crate::pool::{cluster_coarsen, select_topk, ClusterPool, SelectionPool};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Selection,
    Clustering,
    Combined,
}

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Selection => "selection",
            Channel::Clustering => "clustering",
            Channel::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "selection" | "s" => Ok(Channel::Selection),
            "clustering" | "c" => Ok(Channel::Clustering),
            "combined" | "cmb" => Ok(Channel::Combined),
            other => Err(format!(
                "unknown channel '{other}' (expected selection, clustering, or combined)"
            )),
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for one model instance.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub channel: Channel,
    pub motif: MotifKind,
    pub hidden_dim: usize,
    pub blocks: usize,
    pub alpha: f64,
    /// Per-block cluster counts; empty means derive from the dataset.
    pub k_schedule: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channel: Channel::Selection,
            motif: MotifKind::Triangle,
            hidden_dim: 128,
            blocks: 3,
            alpha: 0.5,
            k_schedule: Vec::new(),
            lr: 1e-3,
            weight_decay: 1e-4,
            patience: 50,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.blocks < 1 || self.hidden_dim < 1 {
            return Err(TrainError::Data(crate::error::DataError::Invalid(
                "blocks and hidden_dim must be at least 1".into(),
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(TrainError::Data(crate::error::DataError::Invalid(
                format!("alpha must be in (0, 1], got {}", self.alpha),
            )));
        }
        Ok(())
    }

    /// Cluster counts per block: max(2, ceil(avg_nodes / 4)), halved per
    /// block, unless an explicit schedule was configured.
    pub fn resolve_k_schedule(&self, avg_nodes: f64) -> Vec<usize> {
        if !self.k_schedule.is_empty() {
            let mut ks = self.k_schedule.clone();
            ks.resize(self.blocks, *ks.last().unwrap());
            return ks;
        }
        let mut ks = Vec::with_capacity(self.blocks);
        let mut k = ((avg_nodes / 4.0).ceil() as usize).max(2);
        for _ in 0..self.blocks {
            ks.push(k);
            k = (k.div_ceil(2)).max(2);
        }
        ks
    }
}

/// Permutation-invariant graph summary: column-wise mean and max,
/// concatenated into 1 x 2d.
pub fn readout(x: &Value) -> Value {
    x.row_mean().concat_cols(&x.row_max())
}

struct SelBlock {
    gcn: GcnLayer,
    pool: SelectionPool,
}

struct CluBlock {
    gcn: GcnLayer,
    gcn_motif: GcnLayer,
    pool: ClusterPool,
}

/// A plain MLP with relu between layers and a bias per layer.
pub struct Mlp {
    layers: Vec<(Parameter, Parameter)>,
}

impl Mlp {
    pub fn new(name: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2);
        let mut layers = Vec::new();
        for w in 0..dims.len() - 1 {
            layers.push((
                Parameter::new(format!("{name}.lin{w}.weight"), glorot(dims[w], dims[w + 1], rng)),
                Parameter::new(format!("{name}.lin{w}.bias"), Matrix::zeros((1, dims[w + 1]))),
            ));
        }
        Mlp { layers }
    }

    pub fn forward(&self, x: &Value) -> Value {
        let mut h = x.clone();
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(w.value()).add_row(b.value());
            if i + 1 < self.layers.len() {
                h = h.relu();
            }
        }
        h
    }

    pub fn params(&self) -> Vec<Parameter> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.clone(), b.clone()])
            .collect()
    }
}

/// The pooling encoder: the block stack of one or both channels, producing
/// a fixed-width graph embedding and the summed clustering losses.
pub struct Encoder {
    channel: Channel,
    motif: MotifKind,
    alpha: f64,
    in_dim: usize,
    hidden: usize,
    sel: Vec<SelBlock>,
    clu: Vec<CluBlock>,
}

impl Encoder {
    pub fn new(
        channel: Channel,
        motif: MotifKind,
        hidden: usize,
        blocks: usize,
        alpha: f64,
        k_schedule: &[usize],
        in_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sel = Vec::new();
        let mut clu = Vec::new();
        if matches!(channel, Channel::Selection | Channel::Combined) {
            for b in 0..blocks {
                let d_in = if b == 0 { in_dim } else { hidden };
                sel.push(SelBlock {
                    gcn: GcnLayer::new(
                        format!("sel.block{b}.gcn.theta"),
                        d_in,
                        hidden,
                        Activation::Relu,
                        rng,
                    ),
                    pool: SelectionPool::new(format!("sel.block{b}.theta_att"), hidden, alpha, rng),
                });
            }
        }
        if matches!(channel, Channel::Clustering | Channel::Combined) {
            assert_eq!(k_schedule.len(), blocks, "one cluster count per block");
            for b in 0..blocks {
                let d_in = if b == 0 { in_dim } else { hidden };
                clu.push(CluBlock {
                    gcn: GcnLayer::new(
                        format!("clu.block{b}.gcn.theta"),
                        d_in,
                        hidden,
                        Activation::Relu,
                        rng,
                    ),
                    gcn_motif: GcnLayer::new(
                        format!("clu.block{b}.gcn_motif.theta"),
                        hidden,
                        hidden,
                        Activation::Relu,
                        rng,
                    ),
                    pool: ClusterPool::new(
                        format!("clu.block{b}.pool"),
                        hidden,
                        hidden,
                        k_schedule[b],
                        rng,
                    ),
                });
            }
        }
        Encoder {
            channel,
            motif,
            alpha,
            in_dim,
            hidden,
            sel,
            clu,
        }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// Width of the embedding this encoder produces.
    pub fn embed_dim(&self) -> usize {
        let per_stack = 2 * self.hidden;
        match self.channel {
            Channel::Selection => per_stack * self.sel.len(),
            Channel::Clustering => per_stack * self.clu.len(),
            Channel::Combined => per_stack * (self.sel.len() + self.clu.len()),
        }
    }

    pub fn params(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        for b in &self.sel {
            out.push(b.gcn.theta().clone());
            out.push(b.pool.theta_att().clone());
        }
        for b in &self.clu {
            out.push(b.gcn.theta().clone());
            out.push(b.gcn_motif.theta().clone());
            out.push(b.pool.w1().clone());
            out.push(b.pool.w2().clone());
        }
        out
    }

    fn selection_stack(&self, g: &Graph) -> Value {
        let mut adj = g.adjacency();
        let mut h = Value::constant(g.features().clone());
        let mut embed: Option<Value> = None;
        for block in &self.sel {
            let prop = Value::constant(normalize_adjacency(&adj));
            h = block.gcn.forward(&prop, &h);
            // Motifs are recounted on the current (binary) coarsened graph.
            let m = motif_adjacency_of_matrix(&adj, self.motif);
            let m_norm = Value::constant(normalize_motif(&m));
            let scores = block.pool.attention(&m_norm, &h);
            let res = select_topk(&scores, &h, &adj, self.alpha);
            adj = res.adj_out;
            h = res.x_out;
            let r = readout(&h);
            embed = Some(match embed {
                Some(e) => e.concat_cols(&r),
                None => r,
            });
        }
        embed.expect("at least one block")
    }

    fn clustering_stack(&self, g: &Graph) -> (Value, Value) {
        let mut adj = g.adjacency();
        let mut h = Value::constant(g.features().clone());
        let mut embed: Option<Value> = None;
        let mut aux = Value::scalar(0.0);
        for block in &self.clu {
            let prop = Value::constant(normalize_adjacency(&adj));
            h = block.gcn.forward(&prop, &h);
            // Coarsened adjacency is weighted after the first block;
            // thresholding at > 0 recovers a simple graph for counting.
            let m = motif_adjacency_of_matrix(&adj, self.motif);
            let m_norm = Value::constant(normalize_motif(&m));
            let hm = block.gcn_motif.forward(&m_norm, &h);
            let s = block.pool.assign(&hm);
            let res = cluster_coarsen(&s, &m, &hm);
            aux = aux.add(&res.aux_loss);
            adj = res.adj_out;
            h = res.x_out;
            let r = readout(&h);
            embed = Some(match embed {
                Some(e) => e.concat_cols(&r),
                None => r,
            });
        }
        (embed.expect("at least one block"), aux)
    }

    /// Embed one graph: (embedding, summed unsupervised losses).
    pub fn embed(&self, g: &Graph) -> Result<(Value, Value), TrainError> {
        if g.features().ncols() != self.in_dim {
            return Err(TrainError::FeatureWidth {
                got: g.features().ncols(),
                expected: self.in_dim,
            });
        }
        Ok(match self.channel {
            Channel::Selection => (self.selection_stack(g), Value::scalar(0.0)),
            Channel::Clustering => self.clustering_stack(g),
            Channel::Combined => {
                let zs = self.selection_stack(g);
                let (zc, aux) = self.clustering_stack(g);
                (zs.concat_cols(&zc), aux)
            }
        })
    }
}

/// Encoder plus classifier head.
pub struct MPoolModel {
    pub cfg: ModelConfig,
    encoder: Encoder,
    classifier: Mlp,
    num_classes: usize,
    params: Vec<Parameter>,
}

impl MPoolModel {
    pub fn new(cfg: &ModelConfig, in_dim: usize, num_classes: usize, avg_nodes: f64) -> Self {
        cfg.validate().expect("invalid model config");
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let ks = cfg.resolve_k_schedule(avg_nodes);
        let encoder = Encoder::new(
            cfg.channel,
            cfg.motif,
            cfg.hidden_dim,
            cfg.blocks,
            cfg.alpha,
            &ks,
            in_dim,
            &mut rng,
        );
        let half = (cfg.hidden_dim / 2).max(1);
        let classifier = Mlp::new(
            "head",
            &[encoder.embed_dim(), cfg.hidden_dim, half, num_classes],
            &mut rng,
        );
        let mut params = encoder.params();
        params.extend(classifier.params());
        MPoolModel {
            cfg: cfg.clone(),
            encoder,
            classifier,
            num_classes,
            params,
        }
    }

    pub fn for_dataset(cfg: &ModelConfig, ds: &Dataset) -> Self {
        MPoolModel::new(cfg, ds.feature_dim, ds.num_classes, ds.avg_nodes())
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    /// Logits and the auxiliary (unsupervised) loss for one graph.
    pub fn forward(&self, g: &Graph) -> Result<(Value, Value), TrainError> {
        let (embed, aux) = self.encoder.embed(g)?;
        Ok((self.classifier.forward(&embed), aux))
    }

    /// Cross-entropy of the logits against the label.
    pub fn supervised_loss(logits: &Value, label: usize) -> Value {
        logits.cross_entropy_logits(label)
    }

    /// Predicted class: argmax of logits, ties to the lowest index.
    pub fn predict(&self, g: &Graph) -> Result<usize, TrainError> {
        let (logits, _) = self.forward(g)?;
        let d = logits.data();
        let mut best = 0usize;
        for c in 1..d.ncols() {
            if d[[0, c]] > d[[0, best]] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Fraction of graphs whose predicted label matches.
    pub fn evaluate(&self, ds: &Dataset, indices: &[usize]) -> Result<f64, TrainError> {
        if indices.is_empty() {
            return Err(TrainError::EmptyEvalSet);
        }
        let mut correct = 0usize;
        for &i in indices {
            let g = &ds.graphs[i];
            if self.predict(g)? == g.label().expect("labeled graph") {
                correct += 1;
            }
        }
        Ok(correct as f64 / indices.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_tadpole, separable_dataset};

    #[test]
    fn readout_hand_values() {
        let x = Value::constant(Matrix::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let r = readout(&x);
        assert_eq!(r.data().iter().cloned().collect::<Vec<_>>(), vec![2.0, 3.0, 3.0, 4.0]);

        let single = Value::constant(Matrix::from_shape_vec((1, 2), vec![5.0, -1.0]).unwrap());
        let r = readout(&single);
        assert_eq!(
            r.data().iter().cloned().collect::<Vec<_>>(),
            vec![5.0, -1.0, 5.0, -1.0]
        );
    }

    #[test]
    fn readout_is_permutation_invariant() {
        let x = Matrix::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 * 0.37);
        let mut perm_rows = Matrix::zeros((4, 3));
        let perm = [2, 0, 3, 1];
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..3 {
                perm_rows[[p, c]] = x[[i, c]];
            }
        }
        let a = readout(&Value::constant(x));
        let b = readout(&Value::constant(perm_rows));
        assert_eq!(*a.data(), *b.data());
    }

    fn small_cfg(channel: Channel) -> ModelConfig {
        ModelConfig {
            channel,
            motif: MotifKind::Triangle,
            hidden_dim: 6,
            blocks: 2,
            alpha: 0.5,
            k_schedule: vec![3, 2],
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn untrained_logits_normalize() {
        let ds = separable_dataset(&[3, 4]);
        for channel in [Channel::Selection, Channel::Clustering, Channel::Combined] {
            let model = MPoolModel::for_dataset(&small_cfg(channel), &ds);
            let (logits, aux) = model.forward(&ds.graphs[0]).unwrap();
            assert_eq!(logits.shape(), (1, 2));
            let p = logits.softmax_rows();
            let sum: f64 = p.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(aux.item().is_finite());
        }
    }

    #[test]
    fn combined_embedding_width_is_sum_of_channels() {
        let ds = separable_dataset(&[3, 4]);
        let sel = MPoolModel::for_dataset(&small_cfg(Channel::Selection), &ds);
        let clu = MPoolModel::for_dataset(&small_cfg(Channel::Clustering), &ds);
        let cmb = MPoolModel::for_dataset(&small_cfg(Channel::Combined), &ds);
        assert_eq!(
            cmb.encoder().embed_dim(),
            sel.encoder().embed_dim() + clu.encoder().embed_dim()
        );
    }

    #[test]
    fn feature_width_mismatch_is_reported() {
        let ds = separable_dataset(&[3, 4]);
        let model = MPoolModel::for_dataset(&small_cfg(Channel::Selection), &ds);
        let bad = Graph::new(3, vec![(0, 1)], Matrix::zeros((3, 9)), Some(0)).unwrap();
        let err = model.forward(&bad).unwrap_err();
        assert!(matches!(err, TrainError::FeatureWidth { .. }));
    }

    #[test]
    fn permuted_input_gives_identical_logits_at_full_ratio() {
        // alpha = 1 keeps every node; with distinct scores the only
        // order-dependence is the score ranking, which permutes with the
        // nodes
        let g = make_tadpole(3, 4, Some(0));
        let ds = separable_dataset(&[3, 4]);
        let cfg = ModelConfig {
            alpha: 1.0,
            ..small_cfg(Channel::Selection)
        };
        let model = MPoolModel::for_dataset(&cfg, &ds);
        let perm = vec![5, 2, 0, 6, 1, 4, 3];
        let pg = g.permuted(&perm).unwrap();
        let (a, _) = model.forward(&g).unwrap();
        let (b, _) = model.forward(&pg).unwrap();
        // guard: scores must actually be distinct for this property
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn evaluate_rejects_empty_index_list() {
        let ds = separable_dataset(&[3, 4]);
        let model = MPoolModel::for_dataset(&small_cfg(Channel::Selection), &ds);
        assert!(matches!(
            model.evaluate(&ds, &[]),
            Err(TrainError::EmptyEvalSet)
        ));
    }

    #[test]
    fn forward_is_deterministic() {
        let ds = separable_dataset(&[3, 4, 5]);
        let model = MPoolModel::for_dataset(&small_cfg(Channel::Combined), &ds);
        let (a, _) = model.forward(&ds.graphs[2]).unwrap();
        let (b, _) = model.forward(&ds.graphs[2]).unwrap();
        assert_eq!(*a.data(), *b.data());
    }
}
