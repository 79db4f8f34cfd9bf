//! Independent subspace analysis on an undercomplete observation: PCA down to
//! `D_s` whitened channels, ICA, then grouping of the ICA outputs into
//! `d`-dimensional subspaces.

pub mod grouping;
pub mod ica;
pub mod pca;

use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::fir::{apply_linear, LinearMap};
use crate::model::Partition;
use crate::series::TimeSeries;

pub use grouping::{dependence_matrix, group_components, GroupingOutcome};
pub use ica::{ica, IcaConfig, IcaOutcome};
pub use pca::{pca_whiten, PcaWhitening};

const ISA_TAG: &[u8; 4] = b"ISAR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IsaDiagnostics {
    pub ica_iterations: usize,
    pub ica_converged: bool,
    pub ica_unidentifiable: bool,
    pub ica_contrast: f64,
    pub grouping_objective: f64,
    pub grouping_exhaustive: bool,
    pub discarded_mass: f64,
    pub ill_separated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsaResult {
    /// `D_s × D_x` whitening projection.
    pub w_pca: LinearMap,
    /// `D_s × D_s` orthogonal separation matrix, rows ordered group by group.
    pub w_isa: LinearMap,
    /// Grouping of the ICA output channels (before reordering).
    pub partition: Partition,
    /// `w_isa · w_pca · input`; group `k` occupies rows `[k·d, (k+1)·d)`.
    pub components: TimeSeries,
    pub diagnostics: IsaDiagnostics,
}

impl IsaResult {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(ISA_TAG);
        enc.matrix(self.w_pca.matrix());
        enc.matrix(self.w_isa.matrix());
        enc.u32(self.partition.num_groups());
        enc.u32(self.partition.group_dim());
        for &g in self.partition.assignment() {
            enc.u32(g);
        }
        enc.matrix(self.components.values());
        let diag = &self.diagnostics;
        enc.u32(diag.ica_iterations);
        enc.u8(diag.ica_converged as u8);
        enc.u8(diag.ica_unidentifiable as u8);
        enc.f64(diag.ica_contrast);
        enc.f64(diag.grouping_objective);
        enc.u8(diag.grouping_exhaustive as u8);
        enc.f64(diag.discarded_mass);
        enc.u8(diag.ill_separated as u8);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, ISA_TAG)?;
        let w_pca = LinearMap::new(dec.matrix()?)?;
        let w_isa = LinearMap::new(dec.matrix()?)?;
        let m = dec.u32()?;
        let d = dec.u32()?;
        let assignment = (0..m * d).map(|_| dec.u32()).collect::<Result<Vec<_>>>()?;
        let partition = Partition::new(m, d, assignment)?;
        let components = TimeSeries::new(dec.matrix()?)?;
        let diagnostics = IsaDiagnostics {
            ica_iterations: dec.u32()?,
            ica_converged: dec.u8()? != 0,
            ica_unidentifiable: dec.u8()? != 0,
            ica_contrast: dec.f64()?,
            grouping_objective: dec.f64()?,
            grouping_exhaustive: dec.u8()? != 0,
            discarded_mass: dec.f64()?,
            ill_separated: dec.u8()? != 0,
        };
        dec.finish()?;
        Ok(IsaResult {
            w_pca,
            w_isa,
            partition,
            components,
            diagnostics,
        })
    }
}

/// Solves ISA with `m` components of dimension `d` on a (possibly
/// undercomplete) observation.
pub fn solve_isa(x: &TimeSeries, d: usize, m: usize, config: &IcaConfig) -> Result<IsaResult> {
    let ds = d * m;
    if ds == 0 || ds > x.dim() {
        return Err(Error::InvalidArgument(format!(
            "{m} components of dimension {d} do not fit into {} channels",
            x.dim()
        )));
    }
    let pca = pca_whiten(x, ds).map_err(|e| e.in_stage("pca"))?;
    let ica_out = ica(&pca.whitened, config).map_err(|e| e.in_stage("ica"))?;
    let ica_components = apply_linear(&ica_out.unmixing, &pca.whitened)?;
    let grouping = group_components(&ica_components, d, m).map_err(|e| e.in_stage("grouping"))?;
    let w_isa = grouping.permutation.then_after(&ica_out.unmixing)?;
    let components = apply_linear(&grouping.permutation, &ica_components)?;
    Ok(IsaResult {
        w_pca: pca.map,
        w_isa,
        partition: grouping.partition,
        components,
        diagnostics: IsaDiagnostics {
            ica_iterations: ica_out.iterations,
            ica_converged: ica_out.converged,
            ica_unidentifiable: ica_out.unidentifiable,
            ica_contrast: ica_out.contrast,
            grouping_objective: grouping.objective,
            grouping_exhaustive: grouping.exhaustive,
            discarded_mass: pca.discarded_mass,
            ill_separated: pca.ill_separated,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonality_defect;
    use crate::metrics::{amari_index, global_matrix};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn letters_sources(t: usize, seed: u64) -> TimeSeries {
        crate::datagen::gen_letters(t, seed).unwrap()
    }

    #[test]
    fn pure_isa_letters_recovered() {
        let s = letters_sources(100_000, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h0 = DMatrix::<f64>::from_fn(8, 4, |_, _| rng.sample(StandardNormal));
        let x = TimeSeries::new(&h0 * s.values()).unwrap();
        let res = solve_isa(&x, 2, 2, &IcaConfig { seed: 3, ..Default::default() }).unwrap();
        assert!(orthogonality_defect(res.w_isa.matrix()) < 1e-8);
        assert!(
            (res.components.covariance() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-8
        );
        let g = global_matrix(&res.w_isa, &res.w_pca, &LinearMap::new(h0).unwrap(), 2).unwrap();
        let r = amari_index(&g).unwrap();
        assert!(r < 0.01, "Amari index {r}");
        let recomposed = apply_linear(&res.w_isa, &apply_linear(&res.w_pca, &x).unwrap()).unwrap();
        assert_eq!(recomposed.values(), res.components.values());
    }

    #[test]
    fn one_dimensional_components_reduce_to_ica() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let s = DMatrix::from_fn(3, n, |i, _| {
            let u: f64 = rng.random();
            match i {
                0 => (u - 0.5) * 12f64.sqrt(),
                1 => if u < 0.5 { -1.0 } else { 1.0 },
                _ => -(1.0 - u).ln() - 1.0,
            }
        });
        let a = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.sample(StandardNormal));
        let x = TimeSeries::new(&a * s).unwrap();
        let res = solve_isa(&x, 1, 3, &IcaConfig { seed: 5, ..Default::default() }).unwrap();
        let g = global_matrix(&res.w_isa, &res.w_pca, &LinearMap::new(a).unwrap(), 1).unwrap();
        assert!(amari_index(&g).unwrap() < 0.01);
    }

    #[test]
    fn deterministic_and_serializable() {
        let s = letters_sources(5000, 6);
        let x = TimeSeries::new(DMatrix::<f64>::identity(4, 4) * s.values()).unwrap();
        let cfg = IcaConfig { seed: 7, ..Default::default() };
        let a = solve_isa(&x, 2, 2, &cfg).unwrap();
        let b = solve_isa(&x, 2, 2, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(IsaResult::from_bytes(&a.to_bytes()).unwrap(), a);
    }
}
