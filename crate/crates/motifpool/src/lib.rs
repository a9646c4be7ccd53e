//! Motif-based hierarchical graph pooling.
//!
//! The crate builds graph classifiers whose pooling layers see
//! higher-order structure through motif adjacency matrices: entry (i, j)
//! counts the motif instances containing both nodes. Two pooling channels
//! are provided, a top-k selection ranked by motif attention and a soft
//! spectral clustering trained with cut and orthogonality losses, plus a
//! combined channel that concatenates both graph embeddings. The same
//! encoder also drives a graph-reconstruction autoencoder.
//!
//! Everything trains on a small built-in reverse-mode autodiff engine
//! over dense f64 matrices; datasets load from TUDataset flat files.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod model;
pub mod motif;
pub mod pool;
pub mod recon;
pub mod train;
pub mod tudataset;
pub mod verify;

pub use error::{CheckpointError, ConfigError, DataError, MotifError, TrainError};
pub use graph::{Dataset, Graph, SplitSpec};
pub use model::{Channel, MPoolModel, ModelConfig};
pub use motif::{motif_adjacency, motif_oracle, normalize_motif, MotifAdjacency, MotifKind};
