//! PCA projection of news embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::news_agent::EmbeddingVector;

pub const DEFAULT_D_PRIME: usize = 16;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// d × d′, one principal direction per column.
    pub components: Matrix,
    /// Variance along each component (sample covariance, 1/(n−1)), non-increasing.
    pub explained_variance: Vec<f64>,
    pub fitted_on: usize,
}

impl PcaBasis {
    pub fn input_dim(&self) -> usize {
        self.components.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.cols()
    }

    pub fn transform(&self, e: &[f64]) -> Result<Vec<f64>> {
        if e.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "embedding has dim {}, basis expects {}",
                e.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = e.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.components.t_matvec(&centered))
    }

    pub fn transform_embedding(&self, e: &EmbeddingVector) -> Result<Vec<f64>> {
        self.transform(&e.values)
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, dp) = self.components.shape();
        if self.mean.len() != d || self.explained_variance.len() != dp || dp == 0 || dp >= d {
            return Err(Error::Integrity(format!(
                "PCA basis shapes inconsistent: mean {}, components {d}x{dp}, variance {}",
                self.mean.len(),
                self.explained_variance.len()
            )));
        }
        Ok(())
    }
}

pub fn fit_pca(train: &[EmbeddingVector], d_prime: usize) -> Result<PcaBasis> {
    if let Some(first) = train.first() {
        if let Some(bad) = train.iter().find(|e| e.values.len() != first.values.len()) {
            return Err(Error::Contract(format!(
                "embedding dims differ: {} vs {} (year {})",
                first.values.len(),
                bad.values.len(),
                bad.year
            )));
        }
    }
    let rows: Vec<Vec<f64>> = train.iter().map(|e| e.values.clone()).collect();
    fit_pca_rows(&rows, d_prime)
}

/// Fits the top-`d_prime` principal directions of `rows` by eigendecomposition
/// of the mean-centered sample covariance. Each component is signed so that its
/// largest-magnitude entry is positive.
pub fn fit_pca_rows(rows: &[Vec<f64>], d_prime: usize) -> Result<PcaBasis> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 rows, got {n}")));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Contract("rows have different dimensions".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numeric("pca", "non-finite embedding value"));
    }
    if d_prime == 0 || d_prime >= d || d_prime > n - 1 {
        return Err(Error::Rank(format!(
            "d' = {d_prime} must satisfy 1 <= d' < d = {d} and d' <= rows - 1 = {}",
            n - 1
        )));
    }

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = Matrix::zeros(n, d);
    for (i, r) in rows.iter().enumerate() {
        for (j, (x, m)) in r.iter().zip(&mean).enumerate() {
            centered[(i, j)] = x - m;
        }
    }
    let mut cov = centered.t_matmul(&centered);
    cov.scale(1.0 / (n - 1) as f64);
    // Jacobi keeps symmetry exactly only if the input is exactly symmetric.
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = symmetric_eigen(&cov);
    let top = eig.values[0];
    if top <= 0.0 || eig.values[d_prime - 1] <= RANK_TOLERANCE * top {
        return Err(Error::Rank(format!(
            "covariance has fewer than {d_prime} non-zero directions"
        )));
    }

    let mut components = Matrix::zeros(d, d_prime);
    for c in 0..d_prime {
        let mut col = eig.vectors.column(c);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv.abs() { (i, *v) } else { (bi, bv) })
            .0;
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.into_iter().enumerate() {
            components[(r, c)] = v;
        }
    }

    Ok(PcaBasis {
        mean,
        components,
        explained_variance: eig.values[..d_prime].iter().map(|v| v.max(0.0)).collect(),
        fitted_on: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_variances_pick_first_axis() {
        // x variance 4, y variance 1 (population); sign rule fixes +e1.
        let rows = vec![
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![2.0, 1.0],
            vec![-2.0, -1.0],
            vec![2.0, -1.0],
            vec![-2.0, 1.0],
        ];
        let b = fit_pca_rows(&rows, 1).unwrap();
        assert!((b.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(b.components[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn identical_rows_are_rank_deficient() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 5];
        assert!(matches!(fit_pca_rows(&rows, 1), Err(Error::Rank(_))));
    }

    #[test]
    fn d_prime_bounds() {
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(matches!(fit_pca_rows(&rows, 3), Err(Error::Rank(_))));
        assert!(matches!(fit_pca_rows(&rows[..2], 2), Err(Error::Rank(_))));
        assert!(fit_pca_rows(&rows, 2).is_ok());
    }

    #[test]
    fn transform_centers_and_projects() {
        let rows = vec![
            vec![1.0, 2.0, 0.5],
            vec![3.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![2.0, 1.0, -2.0],
        ];
        let b = fit_pca_rows(&rows, 2).unwrap();
        let z = b.transform(&b.mean).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let shifted: Vec<f64> =
            b.mean.iter().zip(b.components.column(0)).map(|(m, c)| m + c).collect();
        let z = b.transform(&shifted).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12 && z[1].abs() < 1e-12);

        assert!(matches!(b.transform(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn non_uniform_embeddings_are_contract_errors() {
        let a = EmbeddingVector { year: 1, dim: 2, values: vec![0.0, 1.0] };
        let b = EmbeddingVector { year: 2, dim: 3, values: vec![0.0, 1.0, 2.0] };
        assert!(matches!(fit_pca(&[a, b], 1), Err(Error::Contract(_))));
    }
}
