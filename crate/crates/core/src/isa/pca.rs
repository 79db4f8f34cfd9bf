use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fir::{apply_linear, LinearMap};
use crate::linalg::sym_eigen_desc;
use crate::series::TimeSeries;

/// Spectrum ratio `λ_{k+1}/λ_k` above which the retained subspace is flagged as
/// poorly separated from the discarded one.
pub const SPECTRUM_GAP_WARNING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaWhitening {
    pub map: LinearMap,
    pub whitened: TimeSeries,
    /// Full eigenvalue spectrum of the input covariance, descending.
    pub spectrum: Vec<f64>,
    /// Fraction of total variance in the discarded eigen-directions.
    pub discarded_mass: f64,
    pub ill_separated: bool,
}

/// Projects onto the top `target_dim` principal directions and scales them to
/// unit variance: `W = Λ^{-1/2} Uᵀ`.
pub fn pca_whiten(x: &TimeSeries, target_dim: usize) -> Result<PcaWhitening> {
    if target_dim == 0 || target_dim > x.dim() {
        return Err(Error::InvalidArgument(format!(
            "cannot reduce {} channels to {target_dim}",
            x.dim()
        )));
    }
    let cov = x.covariance();
    let (vals, vecs) = sym_eigen_desc(&cov);
    let kept = vals[target_dim - 1];
    if !(kept > vals[0] * 1e-14) {
        return Err(Error::Degenerate(format!(
            "covariance has rank below {target_dim}"
        )));
    }
    let mut w = DMatrix::zeros(target_dim, x.dim());
    for k in 0..target_dim {
        let scale = 1.0 / vals[k].sqrt();
        w.row_mut(k).copy_from(&(vecs.column(k).transpose() * scale));
    }
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let discarded: f64 = vals.iter().skip(target_dim).map(|v| v.max(0.0)).sum();
    let ill_separated = target_dim < x.dim() && vals[target_dim] > SPECTRUM_GAP_WARNING * kept;
    if ill_separated {
        log::warn!(
            "eigenvalue {} is {:.3} of eigenvalue {}: undercomplete reduction is doubtful",
            target_dim + 1,
            vals[target_dim] / kept,
            target_dim
        );
    }
    let map = LinearMap::new(w)?;
    let whitened = apply_linear(&map, x)?;
    Ok(PcaWhitening {
        map,
        whitened,
        spectrum: vals.iter().copied().collect(),
        discarded_mass: if total > 0.0 { discarded / total } else { 0.0 },
        ill_separated,
    })
}
