//! Block-permutation quality of a separation: the normalized Amari index.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fir::LinearMap;

/// Default relative threshold for block detection.
pub const BLOCK_TOLERANCE: f64 = 1e-3;

/// Square `D_s × D_s` matrix viewed as `M × M` blocks of size `d × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMatrix {
    matrix: DMatrix<f64>,
    block_dim: usize,
    num_blocks: usize,
}

impl GlobalMatrix {
    pub fn new(matrix: DMatrix<f64>, block_dim: usize) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::Dimension {
                context: "global matrix must be square",
                expected: n,
                actual: matrix.ncols(),
            });
        }
        if block_dim == 0 || n == 0 || n % block_dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{n}×{n} matrix cannot be split into {block_dim}×{block_dim} blocks"
            )));
        }
        Ok(GlobalMatrix {
            matrix,
            block_dim,
            num_blocks: n / block_dim,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// `M × M` matrix of per-block reductions.
    fn block_map(&self, f: impl Fn(nalgebra::DMatrixView<'_, f64>) -> f64) -> DMatrix<f64> {
        let (d, m) = (self.block_dim, self.num_blocks);
        DMatrix::from_fn(m, m, |i, j| f(self.matrix.view((i * d, j * d), (d, d))))
    }

    /// `g^{ij}`: sum of absolute values in block `(i, j)`.
    pub fn block_abs_sums(&self) -> DMatrix<f64> {
        self.block_map(|b| b.iter().map(|v| v.abs()).sum())
    }
}

/// `G = W_ISA · W_PCA · H₀`.
pub fn global_matrix(
    w_isa: &LinearMap,
    w_pca: &LinearMap,
    h0: &LinearMap,
    block_dim: usize,
) -> Result<GlobalMatrix> {
    check_dim("global matrix: W_ISA·W_PCA", w_isa.cols(), w_pca.rows())?;
    check_dim("global matrix: W_PCA·H0", w_pca.cols(), h0.rows())?;
    GlobalMatrix::new(w_isa.matrix() * w_pca.matrix() * h0.matrix(), block_dim)
}

/// Normalized Amari index in `[0, 1]`; zero exactly for block-permutation matrices.
///
/// `r(G) = 1/(2M(M−1)) · [Σ_i (Σ_j g^{ij} / max_j g^{ij} − 1) + Σ_j (Σ_i g^{ij} / max_i g^{ij} − 1)]`
pub fn amari_index(g: &GlobalMatrix) -> Result<f64> {
    let m = g.num_blocks();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "Amari index needs at least two blocks".into(),
        ));
    }
    let sums = g.block_abs_sums();
    let mut total = 0.0;
    for i in 0..m {
        let row = sums.row(i);
        let max = row.max();
        if !(max > 0.0) {
            return Err(Error::Degenerate(format!("block row {i} is zero")));
        }
        total += row.sum() / max - 1.0;
    }
    for j in 0..m {
        let col = sums.column(j);
        let max = col.max();
        if !(max > 0.0) {
            return Err(Error::Degenerate(format!("block column {j} is zero")));
        }
        total += col.sum() / max - 1.0;
    }
    Ok(total / (2.0 * m as f64 * (m as f64 - 1.0)))
}

/// Whether each block row and block column holds exactly one block whose
/// Frobenius norm exceeds `tol · (Σ norms) / M`.
pub fn is_block_permutation(g: &GlobalMatrix, tol: f64) -> bool {
    let m = g.num_blocks();
    let norms = g.block_map(|b| b.norm());
    let threshold = tol * norms.sum() / m as f64;
    let significant = norms.map(|v| v > threshold);
    (0..m).all(|i| significant.row(i).iter().filter(|&&s| s).count() == 1)
        && (0..m).all(|j| significant.column(j).iter().filter(|&&s| s).count() == 1)
}

/// Percent with two decimals, e.g. `0.0030 → "0.30"`.
pub fn format_percent(r: f64) -> String {
    format!("{:.2}", 100.0 * r)
}
