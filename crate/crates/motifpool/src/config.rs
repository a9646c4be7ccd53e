//! Flat key=value experiment configuration files.
//!
//! Recognized keys: channel, motif, hidden_dim, blocks, alpha, clusters,
//! lr, weight_decay, patience, max_epochs, seeds, dataset_dir,
//! dataset_name. Lines starting with '#' are comments. Unknown keys are
//! rejected.

use crate::error::ConfigError;
use crate::model::{Channel, ModelConfig};
use crate::motif::MotifKind;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub channel: Channel,
    pub motif: MotifKind,
    pub hidden_dim: usize,
    pub blocks: usize,
    pub alpha: f64,
    /// Explicit per-block cluster counts; empty means auto.
    pub clusters: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seeds: Vec<u64>,
    pub dataset_dir: PathBuf,
    pub dataset_name: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channel: Channel::Selection,
            motif: MotifKind::Triangle,
            hidden_dim: 128,
            blocks: 3,
            alpha: 0.5,
            clusters: Vec::new(),
            lr: 1e-3,
            weight_decay: 1e-4,
            patience: 50,
            max_epochs: 2000,
            seeds: vec![0],
            dataset_dir: PathBuf::new(),
            dataset_name: String::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("invalid value '{v}' for key '{key}'"),
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut saw_dir = false;
        let mut saw_name = false;
        for (ln, raw) in text.split('\n').enumerate() {
            let ln = ln + 1;
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: ln,
                    msg: format!("expected key=value, got '{line}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "channel" => {
                    cfg.channel = value.parse().map_err(|e: String| ConfigError::Parse {
                        line: ln,
                        msg: e,
                    })?
                }
                "motif" => {
                    cfg.motif = value.parse().map_err(|e: String| ConfigError::Parse {
                        line: ln,
                        msg: e,
                    })?
                }
                "hidden_dim" => cfg.hidden_dim = parse_num(ln, key, value)?,
                "blocks" => cfg.blocks = parse_num(ln, key, value)?,
                "alpha" => cfg.alpha = parse_fraction(ln, value)?,
                "clusters" => {
                    if value.eq_ignore_ascii_case("auto") {
                        cfg.clusters = Vec::new();
                    } else {
                        cfg.clusters = value
                            .split(',')
                            .map(|v| parse_num(ln, key, v.trim()))
                            .collect::<Result<_, _>>()?;
                    }
                }
                "lr" => cfg.lr = parse_num(ln, key, value)?,
                "weight_decay" => cfg.weight_decay = parse_num(ln, key, value)?,
                "patience" => cfg.patience = parse_num(ln, key, value)?,
                "max_epochs" => cfg.max_epochs = parse_num(ln, key, value)?,
                "seeds" => {
                    cfg.seeds = value
                        .split(',')
                        .map(|v| parse_num(ln, key, v.trim()))
                        .collect::<Result<_, _>>()?;
                    if cfg.seeds.is_empty() {
                        return Err(ConfigError::Parse {
                            line: ln,
                            msg: "seeds must not be empty".into(),
                        });
                    }
                }
                "dataset_dir" => {
                    cfg.dataset_dir = PathBuf::from(value);
                    saw_dir = true;
                }
                "dataset_name" => {
                    cfg.dataset_name = value.to_string();
                    saw_name = true;
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if !saw_dir {
            return Err(ConfigError::MissingKey("dataset_dir"));
        }
        if !saw_name {
            return Err(ConfigError::MissingKey("dataset_name"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The fully resolved configuration, printed before every run.
    pub fn render(&self) -> String {
        let clusters = if self.clusters.is_empty() {
            "auto".to_string()
        } else {
            self.clusters
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "channel={}\nmotif={}\nhidden_dim={}\nblocks={}\nalpha={}\nclusters={}\nlr={}\nweight_decay={}\npatience={}\nmax_epochs={}\nseeds={}\ndataset_dir={}\ndataset_name={}\n",
            self.channel,
            self.motif,
            self.hidden_dim,
            self.blocks,
            self.alpha,
            clusters,
            self.lr,
            self.weight_decay,
            self.patience,
            self.max_epochs,
            seeds,
            self.dataset_dir.display(),
            self.dataset_name
        )
    }

    pub fn model_config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            channel: self.channel,
            motif: self.motif,
            hidden_dim: self.hidden_dim,
            blocks: self.blocks,
            alpha: self.alpha,
            k_schedule: self.clusters.clone(),
            lr: self.lr,
            weight_decay: self.weight_decay,
            patience: self.patience,
            max_epochs: self.max_epochs,
            seed,
        }
    }
}

/// Accepts plain decimals and simple fractions like 1/2 or 1/4.
fn parse_fraction(line: usize, v: &str) -> Result<f64, ConfigError> {
    if let Some((num, den)) = v.split_once('/') {
        let n: f64 = parse_num(line, "alpha", num.trim())?;
        let d: f64 = parse_num(line, "alpha", den.trim())?;
        if d == 0.0 {
            return Err(ConfigError::Parse {
                line,
                msg: "zero denominator".into(),
            });
        }
        Ok(n / d)
    } else {
        parse_num(line, "alpha", v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# experiment\nchannel = combined\nmotif = triangle\nhidden_dim = 64\nblocks = 3\nalpha = 1/2\nclusters = auto\nlr = 0.001\nweight_decay = 0.0001\npatience = 50\nmax_epochs = 500\nseeds = 0, 1, 2\ndataset_dir = ./data\ndataset_name = toy\n";

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.channel, Channel::Combined);
        assert_eq!(cfg.motif, MotifKind::Triangle);
        assert_eq!(cfg.hidden_dim, 64);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert!(cfg.clusters.is_empty());
        assert_eq!(cfg.dataset_name, "toy");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("bogus = 1\ndataset_dir=.\ndataset_name=x\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)));
    }

    #[test]
    fn missing_dataset_keys_are_reported() {
        let err = ExperimentConfig::parse("channel = selection\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey(_)));
    }

    #[test]
    fn render_roundtrips_through_parse() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        let again = ExperimentConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg.render(), again.render());
    }

    #[test]
    fn explicit_cluster_schedule() {
        let text = "clusters = 8, 4, 2\ndataset_dir=.\ndataset_name=x\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.clusters, vec![8, 4, 2]);
    }
}
