use rand::Rng;

use crate::linalg::Matrix;

/// Matrix with entries drawn from U(−1/√fan_in, 1/√fan_in).
pub fn uniform_fan_in(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data)
}
