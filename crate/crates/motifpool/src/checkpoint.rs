//! Parameter checkpoints: named tensors in a text container with a shape
//! header per tensor. Entries are stored as hexadecimal f64 bit patterns,
//! so a reload is bit-exact.

use crate::autodiff::{Matrix, Parameter};
use crate::error::CheckpointError;
use std::path::Path;

const MAGIC: &str = "motifpool-checkpoint v1";

pub fn render_params(params: &[Parameter]) -> String {
    let mut out = String::from(MAGIC);
    out.push('\n');
    for p in params {
        let d = p.data();
        out.push_str(&format!("tensor {} {} {}\n", p.name(), d.nrows(), d.ncols()));
        for i in 0..d.nrows() {
            let row: Vec<String> = (0..d.ncols())
                .map(|j| format!("{:016x}", d[[i, j]].to_bits()))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn save_params(params: &[Parameter], path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, render_params(params)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a checkpoint into (name, tensor) pairs.
pub fn parse_checkpoint(text: &str) -> Result<Vec<(String, Matrix)>, CheckpointError> {
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let Some((_, first)) = lines.next() else {
        return Err(CheckpointError::Parse {
            line: 1,
            msg: "empty checkpoint".into(),
        });
    };
    if first.trim() != MAGIC {
        return Err(CheckpointError::Parse {
            line: 1,
            msg: format!("bad header '{}'", first.trim()),
        });
    }
    let mut tensors = Vec::new();
    let mut pending: Option<(String, usize, usize, Vec<f64>)> = None;
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            if let Some((name, rows, cols, vals)) = pending.take() {
                finish_tensor(ln, name, rows, cols, vals, &mut tensors)?;
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(CheckpointError::Parse {
                    line: ln,
                    msg: "expected 'tensor <name> <rows> <cols>'".into(),
                });
            }
            let rows: usize = parts[1].parse().map_err(|_| CheckpointError::Parse {
                line: ln,
                msg: format!("bad row count '{}'", parts[1]),
            })?;
            let cols: usize = parts[2].parse().map_err(|_| CheckpointError::Parse {
                line: ln,
                msg: format!("bad column count '{}'", parts[2]),
            })?;
            if rows == 0 || cols == 0 || rows.saturating_mul(cols) > (1 << 26) {
                return Err(CheckpointError::Parse {
                    line: ln,
                    msg: format!("unreasonable tensor shape {rows}x{cols}"),
                });
            }
            pending = Some((parts[0].to_string(), rows, cols, Vec::new()));
        } else {
            let Some((_, rows, cols, vals)) = pending.as_mut() else {
                return Err(CheckpointError::Parse {
                    line: ln,
                    msg: "data before any tensor header".into(),
                });
            };
            for word in line.split_whitespace() {
                let bits = u64::from_str_radix(word, 16).map_err(|_| CheckpointError::Parse {
                    line: ln,
                    msg: format!("bad hex word '{word}'"),
                })?;
                vals.push(f64::from_bits(bits));
                if vals.len() > *rows * *cols {
                    return Err(CheckpointError::Parse {
                        line: ln,
                        msg: "more entries than the shape header allows".into(),
                    });
                }
            }
        }
    }
    if let Some((name, rows, cols, vals)) = pending.take() {
        finish_tensor(0, name, rows, cols, vals, &mut tensors)?;
    }
    Ok(tensors)
}

fn finish_tensor(
    line: usize,
    name: String,
    rows: usize,
    cols: usize,
    vals: Vec<f64>,
    tensors: &mut Vec<(String, Matrix)>,
) -> Result<(), CheckpointError> {
    if vals.len() != rows * cols {
        return Err(CheckpointError::Parse {
            line,
            msg: format!(
                "tensor '{name}' has {} entries, expected {rows}x{cols}",
                vals.len()
            ),
        });
    }
    let m = Matrix::from_shape_vec((rows, cols), vals).expect("checked shape");
    tensors.push((name, m));
    Ok(())
}

/// Load a checkpoint into an existing parameter list, matching by name
/// and requiring identical shapes and an exact cover.
pub fn load_params(params: &[Parameter], path: &Path) -> Result<(), CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let tensors = parse_checkpoint(&text)?;
    apply_tensors(params, tensors)
}

pub fn apply_tensors(
    params: &[Parameter],
    tensors: Vec<(String, Matrix)>,
) -> Result<(), CheckpointError> {
    if tensors.len() != params.len() {
        return Err(CheckpointError::Mismatch(format!(
            "checkpoint has {} tensors, model has {}",
            tensors.len(),
            params.len()
        )));
    }
    let mut by_name: std::collections::BTreeMap<&str, &Matrix> =
        tensors.iter().map(|(n, m)| (n.as_str(), m)).collect();
    if by_name.len() != tensors.len() {
        return Err(CheckpointError::Mismatch("duplicate tensor names".into()));
    }
    for p in params {
        let Some(m) = by_name.remove(p.name()) else {
            return Err(CheckpointError::Mismatch(format!(
                "missing tensor '{}'",
                p.name()
            )));
        };
        let (r, c) = p.value().shape();
        if (m.nrows(), m.ncols()) != (r, c) {
            return Err(CheckpointError::Mismatch(format!(
                "tensor '{}' is {}x{}, model expects {r}x{c}",
                p.name(),
                m.nrows(),
                m.ncols()
            )));
        }
        p.set_data(m.clone());
    }
    Ok(())
}
