//! Random Gaussian coding matrices and codewords.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::seeded;

/// An `m × n` coding matrix with i.i.d. `N(0, 1/m)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingMatrix {
    matrix: Matrix,
    seed: Option<u64>,
}

impl CodingMatrix {
    /// Draws the matrix row by row from a ChaCha8 stream seeded with `seed`.
    pub fn generate(m: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n >= m {
            return Err(Error::InvalidArgument(format!(
                "coding matrix needs 1 <= n < m, got m={m}, n={n}"
            )));
        }
        let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeded(seed);
        let data = (0..m * n).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self {
            matrix: Matrix::from_row_major(m, n, data)?,
            seed: Some(seed),
        })
    }

    /// Wraps a stored matrix (for instance one loaded from disk).
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.cols() >= matrix.rows() {
            return Err(Error::InvalidArgument(format!(
                "coding matrix must be tall, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { matrix, seed: None })
    }

    /// Codeword length.
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    /// Signal length.
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// The codeword `A x`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(x)
    }
}
