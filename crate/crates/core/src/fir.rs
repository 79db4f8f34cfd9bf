//! Instantaneous linear maps and causal polynomial-matrix (FIR) filters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::arfit::ArModel;
use crate::error::{check_dim, Error, Result};
use crate::series::TimeSeries;

/// A dense matrix applied sample by sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear map"));
        }
        Ok(LinearMap { matrix })
    }

    pub fn identity(n: usize) -> Self {
        LinearMap {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `self · rhs`.
    pub fn then_after(&self, rhs: &LinearMap) -> Result<LinearMap> {
        check_dim("linear map chain", self.cols(), rhs.rows())?;
        Ok(LinearMap {
            matrix: &self.matrix * &rhs.matrix,
        })
    }
}

/// Per-sample matrix product `map · input(t)`.
pub fn apply_linear(map: &LinearMap, input: &TimeSeries) -> Result<TimeSeries> {
    check_dim("apply_linear input", map.cols(), input.dim())?;
    Ok(TimeSeries::new(map.matrix() * input.values())?.with_transient(input.transient()))
}

/// Polynomial matrix `H[z] = Σ_l H_l z^{-l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    taps: Vec<DMatrix<f64>>,
}

impl FirFilter {
    pub fn new(taps: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::InvalidArgument("FIR filter needs at least one tap".into()))?;
        let shape = first.shape();
        for tap in &taps {
            if tap.shape() != shape {
                return Err(Error::InvalidArgument(format!(
                    "FIR taps must share one shape: {:?} vs {:?}",
                    shape,
                    tap.shape()
                )));
            }
            if tap.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("FIR tap"));
            }
        }
        Ok(FirFilter { taps })
    }

    pub fn from_linear(map: &LinearMap) -> Self {
        FirFilter {
            taps: vec![map.matrix().clone()],
        }
    }

    pub fn degree(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn taps(&self) -> &[DMatrix<f64>] {
        &self.taps
    }

    pub fn tap(&self, l: usize) -> &DMatrix<f64> {
        &self.taps[l]
    }
}

/// Causal convolution `y(t) = Σ_l H_l u(t−l)` with `u(τ) = 0` before the first
/// sample. The first `L` outputs are flagged as transient on top of any
/// transient already carried by the input.
pub fn apply_fir(filter: &FirFilter, input: &TimeSeries) -> Result<TimeSeries> {
    check_dim("apply_fir input", filter.cols(), input.dim())?;
    let len = input.len();
    let u = input.values();
    let mut out = DMatrix::zeros(filter.rows(), len);
    for (l, tap) in filter.taps().iter().enumerate() {
        if l >= len {
            break;
        }
        let mut dst = out.columns_mut(l, len - l);
        dst.gemm(1.0, tap, &u.columns(0, len - l), 1.0);
    }
    Ok(TimeSeries::new(out)?.with_transient(input.transient() + filter.degree()))
}

/// Demixing filter `W_ISA · W_PCA · W_AR[z]` where `W_AR[z] = I − Σ_q A_q z^{-q}`.
pub fn compose_demixer(
    w_isa: &LinearMap,
    w_pca: &LinearMap,
    w_ar: &ArModel,
) -> Result<FirFilter> {
    check_dim("demixer: W_ISA·W_PCA", w_isa.cols(), w_pca.rows())?;
    check_dim("demixer: W_PCA·W_AR", w_pca.cols(), w_ar.dim())?;
    let front = w_isa.matrix() * w_pca.matrix();
    let mut taps = Vec::with_capacity(w_ar.order() + 1);
    taps.push(front.clone());
    for a in w_ar.coeffs() {
        taps.push(-(&front * a));
    }
    FirFilter::new(taps)
}
