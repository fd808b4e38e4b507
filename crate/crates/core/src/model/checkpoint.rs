//! Versioned JSON checkpoints. Every matrix is stored as a shape-annotated
//! flat array in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{ModelParams, Network};
use crate::data_ingest::NormStats;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::reduce::PcaBasis;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

impl TensorRecord {
    fn new(name: impl Into<String>, m: &Matrix) -> Self {
        Self {
            name: name.into(),
            shape: [m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    fn into_matrix(self) -> Result<Matrix> {
        let [r, c] = self.shape;
        if r.checked_mul(c) != Some(self.data.len()) {
            return Err(Error::Integrity(format!(
                "tensor `{}` declares shape {r}x{c} but holds {} values",
                self.name,
                self.data.len()
            )));
        }
        Ok(Matrix::from_vec(r, c, self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PcaRecord {
    mean: Vec<f64>,
    components: TensorRecord,
    explained_variance: Vec<f64>,
    fitted_on: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Hyper {
    #[serde(flatten)]
    model: ModelConfig,
    seed: u64,
    embedding_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    hyper: Hyper,
    norm_stats: Vec<NormStats>,
    pca: Option<PcaRecord>,
    tensors: Vec<TensorRecord>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        hyper: Hyper {
            model: params.config,
            seed: params.seed,
            embedding_dim: params.embedding_dim,
        },
        norm_stats: params.norm_stats.clone(),
        pca: params.pca.as_ref().map(|p| PcaRecord {
            mean: p.mean.clone(),
            components: TensorRecord::new("pca.components", &p.components),
            explained_variance: p.explained_variance.clone(),
            fitted_on: p.fitted_on,
        }),
        tensors: params
            .net
            .named_tensors()
            .into_iter()
            .map(|(n, t)| TensorRecord::new(n, t))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| Error::Integrity(format!("unreadable checkpoint: {e}")))?;
    if probe.format_version != CHECKPOINT_VERSION {
        return Err(Error::Migration { found: probe.format_version, expected: CHECKPOINT_VERSION });
    }
    let file: CheckpointFile = serde_json::from_str(text)
        .map_err(|e| Error::Integrity(format!("malformed checkpoint: {e}")))?;
    let config = file.hyper.model;
    config
        .validate()
        .map_err(|e| Error::Integrity(format!("invalid hyperparameters: {e}")))?;

    let pca = match file.pca {
        Some(p) => {
            let basis = PcaBasis {
                mean: p.mean,
                components: p.components.into_matrix()?,
                explained_variance: p.explained_variance,
                fitted_on: p.fitted_on,
            };
            basis.validate()?;
            if basis.input_dim() != file.hyper.embedding_dim || basis.output_dim() != config.d_prime {
                return Err(Error::Integrity("PCA basis does not match hyperparameters".into()));
            }
            Some(basis)
        }
        None => None,
    };
    if pca.is_some() != config.variant.uses_pca() {
        return Err(Error::Integrity(format!(
            "variant {} {} a PCA basis",
            config.variant,
            if config.variant.uses_pca() { "requires" } else { "must not carry" }
        )));
    }

    // The expected layout comes from the hyperparameters; stored tensors must match it.
    let mut net = Network::zeros(&config, file.hyper.embedding_dim);
    let expected: Vec<(String, (usize, usize))> = net
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape()))
        .collect();
    if expected.len() != file.tensors.len() {
        return Err(Error::Integrity(format!(
            "expected {} tensors, found {}",
            expected.len(),
            file.tensors.len()
        )));
    }
    let mut flat = Vec::with_capacity(net.num_parameters());
    for ((name, shape), rec) in expected.iter().zip(file.tensors) {
        if &rec.name != name || (rec.shape[0], rec.shape[1]) != *shape {
            return Err(Error::Integrity(format!(
                "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                rec.name, rec.shape
            )));
        }
        let m = rec.into_matrix()?;
        if !m.is_finite() {
            return Err(Error::Integrity(format!("tensor `{name}` has non-finite values")));
        }
        flat.extend_from_slice(m.as_slice());
    }
    net.set_flat(&flat);
    net.head.dropout = config.dropout;

    Ok(ModelParams {
        config,
        seed: file.hyper.seed,
        embedding_dim: file.hyper.embedding_dim,
        pca,
        norm_stats: file.norm_stats,
        net,
    })
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    from_json(&std::fs::read_to_string(path)?)
}
