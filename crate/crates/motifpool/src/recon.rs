//! Graph-reconstruction autoencoder: the pooling encoder feeds two MLP
//! decoder heads, one predicting the adjacency through a sigmoid, the
//! other predicting node attributes.

use crate::autodiff::{zero_grad, Adam, AdamConfig, Matrix, Value};
use crate::error::TrainError;
use crate::graph::Graph;
use crate::model::{Channel, Encoder, Mlp};
use crate::motif::MotifKind;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Autoencoder for a fixed node count.
pub struct ReconModel {
    encoder: Encoder,
    mlp_edge: Mlp,
    mlp_attr: Mlp,
    n_max: usize,
    feat_dim: usize,
    params: Vec<crate::autodiff::Parameter>,
}

pub struct ReconConfig {
    pub channel: Channel,
    pub motif: MotifKind,
    pub hidden_dim: usize,
    pub blocks: usize,
    pub alpha: f64,
    pub k_schedule: Vec<usize>,
    pub seed: u64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            channel: Channel::Selection,
            motif: MotifKind::TwoStar,
            hidden_dim: 32,
            blocks: 3,
            alpha: 0.5,
            k_schedule: Vec::new(),
            seed: 0,
        }
    }
}

impl ReconModel {
    pub fn new(cfg: &ReconConfig, n_max: usize, feat_dim: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let ks = if cfg.k_schedule.is_empty() {
            // same derivation as the classifier, from the fixed target size
            let mut ks = Vec::new();
            let mut k = ((n_max as f64 / 4.0).ceil() as usize).max(2);
            for _ in 0..cfg.blocks {
                ks.push(k);
                k = k.div_ceil(2).max(2);
            }
            ks
        } else {
            cfg.k_schedule.clone()
        };
        let encoder = Encoder::new(
            cfg.channel,
            cfg.motif,
            cfg.hidden_dim,
            cfg.blocks,
            cfg.alpha,
            &ks,
            feat_dim,
            &mut rng,
        );
        let embed = encoder.embed_dim();
        // decoder heads: two relu hidden layers sized 2x and 4x the embedding
        let mlp_edge = Mlp::new(
            "decoder.edge",
            &[embed, 2 * embed, 4 * embed, n_max * n_max],
            &mut rng,
        );
        let mlp_attr = Mlp::new(
            "decoder.attr",
            &[embed, 2 * embed, 4 * embed, n_max * feat_dim],
            &mut rng,
        );
        let mut params = encoder.params();
        params.extend(mlp_edge.params());
        params.extend(mlp_attr.params());
        ReconModel {
            encoder,
            mlp_edge,
            mlp_attr,
            n_max,
            feat_dim,
            params,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn params(&self) -> &[crate::autodiff::Parameter] {
        &self.params
    }

    pub fn channel(&self) -> Channel {
        self.encoder.channel()
    }

    /// Predicted adjacency probabilities (symmetric, zero diagonal) and
    /// raw attribute predictions.
    pub fn reconstruct(&self, g: &Graph) -> Result<(Value, Value, Value), TrainError> {
        if g.n() != self.n_max {
            return Err(TrainError::NodeCount {
                got: g.n(),
                expected: self.n_max,
            });
        }
        let (embed, aux) = self.encoder.embed(g)?;
        let n = self.n_max;
        let probs = self
            .mlp_edge
            .forward(&embed)
            .reshape(n, n)
            .sigmoid();
        // symmetrize the probabilities and force the diagonal to zero
        let sym = probs.add(&probs.transpose()).scalar_mul(0.5);
        let mut offdiag = Matrix::from_elem((n, n), 1.0);
        for i in 0..n {
            offdiag[[i, i]] = 0.0;
        }
        let a_hat = sym.hadamard(&Value::constant(offdiag));
        let x_hat = self.mlp_attr.forward(&embed).reshape(n, self.feat_dim);
        Ok((a_hat, x_hat, aux))
    }
}

/// Mean BCE over off-diagonal adjacency entries plus attribute MSE; the
/// clustering channel adds its unsupervised losses.
pub fn recon_loss(a_hat: &Value, x_hat: &Value, aux: &Value, g: &Graph) -> Value {
    let n = g.n();
    let target = g.adjacency();
    let mut mask = Matrix::from_elem((n, n), 1.0);
    for i in 0..n {
        mask[[i, i]] = 0.0;
    }
    let edge = a_hat.bce_mean(&target, &mask);
    let diff = x_hat.sub(&Value::constant(g.features().clone()));
    let attr = diff.hadamard(&diff).mean_all();
    edge.add(&attr).add(aux)
}

#[derive(Debug, Clone)]
pub struct ReconMetrics {
    pub steps_run: usize,
    pub edge_accuracy: f64,
    pub attr_mse_init: f64,
    pub attr_mse_final: f64,
    pub final_loss: f64,
}

/// Fraction of off-diagonal entries whose 0.5-thresholded prediction
/// matches the target adjacency.
pub fn edge_accuracy(a_hat: &Matrix, g: &Graph) -> f64 {
    let n = g.n();
    let target = g.adjacency();
    let mut correct = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            total += 1;
            let predicted = a_hat[[i, j]] > 0.5;
            if predicted == (target[[i, j]] > 0.5) {
                correct += 1;
            }
        }
    }
    correct as f64 / total as f64
}

fn attr_mse(x_hat: &Matrix, g: &Graph) -> f64 {
    let diff = x_hat - g.features();
    diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64
}

/// Overfit the autoencoder on a single target graph.
pub fn train_recon(
    model: &ReconModel,
    target: &Graph,
    steps: usize,
    lr: f64,
) -> Result<ReconMetrics, TrainError> {
    let mut adam = Adam::new(AdamConfig::with_lr(lr));
    let (a0, x0, _) = model.reconstruct(target)?;
    let _ = a0;
    let attr_mse_init = attr_mse(&x0.data(), target);
    let mut final_loss = f64::NAN;
    let mut steps_run = 0;
    for step in 1..=steps {
        steps_run = step;
        zero_grad(model.params());
        let (a_hat, x_hat, aux) = model.reconstruct(target)?;
        let loss = recon_loss(&a_hat, &x_hat, &aux, target);
        final_loss = loss.item();
        if !final_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch: step,
                graph: 0,
            });
        }
        loss.backward();
        adam.step(model.params())?;
    }
    let (a_hat, x_hat, _) = model.reconstruct(target)?;
    let edge_acc = edge_accuracy(&a_hat.data(), target);
    let attr_mse_final = attr_mse(&x_hat.data(), target);
    Ok(ReconMetrics {
        steps_run,
        edge_accuracy: edge_acc,
        attr_mse_init,
        attr_mse_final,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_grid, make_ring};

    fn small_model(channel: Channel, n: usize) -> ReconModel {
        ReconModel::new(
            &ReconConfig {
                channel,
                hidden_dim: 8,
                seed: 1,
                ..Default::default()
            },
            n,
            2,
        )
    }

    #[test]
    fn zero_edge_decoder_predicts_half_everywhere_off_diagonal() {
        let g = make_ring(6);
        let model = small_model(Channel::Selection, 6);
        for p in model.mlp_edge.params() {
            let (r, c) = p.value().shape();
            p.set_data(Matrix::zeros((r, c)));
        }
        let (a_hat, _, _) = model.reconstruct(&g).unwrap();
        let a = a_hat.data();
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    assert_eq!(a[[i, j]], 0.0);
                } else {
                    assert!((a[[i, j]] - 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn prediction_is_symmetric_open_unit_with_zero_diagonal() {
        let g = make_grid(2, 3);
        for channel in [Channel::Selection, Channel::Clustering] {
            let model = small_model(channel, 6);
            let (a_hat, _, _) = model.reconstruct(&g).unwrap();
            let a = a_hat.data();
            for i in 0..6 {
                assert_eq!(a[[i, i]], 0.0);
                for j in 0..6 {
                    assert_eq!(a[[i, j]], a[[j, i]]);
                    if i != j {
                        assert!(a[[i, j]] > 0.0 && a[[i, j]] < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bce_at_half_is_ln_two_and_perfect_attributes_cost_nothing() {
        let g = make_ring(5);
        let half = Value::constant(Matrix::from_shape_fn((5, 5), |(i, j)| {
            if i == j {
                0.0
            } else {
                0.5
            }
        }));
        let perfect = Value::constant(g.features().clone());
        let loss = recon_loss(&half, &perfect, &Value::scalar(0.0), &g);
        assert!((loss.item() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn recon_loss_is_nonnegative() {
        let g = make_ring(6);
        let model = small_model(Channel::Clustering, 6);
        let (a_hat, x_hat, aux) = model.reconstruct(&g).unwrap();
        // l_c can be negative, so compare against its floor
        let loss = recon_loss(&a_hat, &x_hat, &Value::scalar(0.0), &g);
        assert!(loss.item() >= 0.0);
        assert!(aux.item() >= -1.0 * 3.0); // 3 blocks, each l_c >= -1
    }

    #[test]
    fn node_count_mismatch_is_rejected() {
        let model = small_model(Channel::Selection, 6);
        let g = make_ring(7);
        assert!(matches!(
            model.reconstruct(&g),
            Err(TrainError::NodeCount { got: 7, expected: 6 })
        ));
    }

    #[test]
    fn short_training_improves_the_loss() {
        let g = make_ring(6);
        let model = small_model(Channel::Selection, 6);
        let before = {
            let (a, x, aux) = model.reconstruct(&g).unwrap();
            recon_loss(&a, &x, &aux, &g).item()
        };
        let metrics = train_recon(&model, &g, 60, 1e-2).unwrap();
        assert!(metrics.final_loss < before);
        assert!(metrics.edge_accuracy >= 0.5);
    }
}
