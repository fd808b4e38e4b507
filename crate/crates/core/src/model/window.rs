use serde::{Deserialize, Serialize};

use crate::data_ingest::AlignedDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_WINDOW: usize = 5;

/// k consecutive years of prices and raw news embeddings, labelled with the
/// spike indicator of the year after the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    /// Last year inside the window (t).
    pub anchor_year: i32,
    /// p_{t−k+1} … p_t
    pub prices: Vec<f64>,
    /// k × d raw embeddings e_{t−k+1} … e_t. Reduction happens inside the model.
    pub news: Matrix,
    /// y_{t+1}
    pub target: u8,
}

impl WindowedSample {
    pub fn window(&self) -> usize {
        self.prices.len()
    }

    pub fn first_year(&self) -> i32 {
        self.anchor_year - self.window() as i32 + 1
    }

    pub fn price_matrix(&self) -> Matrix {
        Matrix::from_vec(self.prices.len(), 1, self.prices.clone())
    }
}

/// Builds every window of `k` consecutive years whose following year is also
/// present. Without gaps in the dataset this yields exactly `T − k` samples.
pub fn make_windows(dataset: &AlignedDataset, k: usize) -> Result<Vec<WindowedSample>> {
    let t = dataset.len();
    if k == 0 {
        return Err(Error::Config("window size must be positive".into()));
    }
    if t <= k {
        return Err(Error::InsufficientData(format!(
            "{t} aligned years cannot fill a window of {k} plus a target"
        )));
    }
    let d = dataset.embedding_dim();
    let mut out = Vec::with_capacity(t - k);
    for anchor in (k - 1)..(t - 1) {
        let start = anchor + 1 - k;
        // contiguous years, including the target year
        if dataset.years[anchor + 1] - dataset.years[start] != k as i32 {
            continue;
        }
        let mut news = Matrix::zeros(k, d);
        for (r, idx) in (start..=anchor).enumerate() {
            news.row_mut(r).copy_from_slice(&dataset.embeddings[idx]);
        }
        out.push(WindowedSample {
            anchor_year: dataset.years[anchor],
            prices: dataset.prices[start..=anchor].to_vec(),
            news,
            target: dataset.labels[anchor + 1],
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no run of {} consecutive years in the aligned data",
            k + 1
        )));
    }
    Ok(out)
}
