//! Random convolutive mixing filters.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fir::FirFilter;
use crate::model::ModelDims;
use crate::seed::derive_seed;

pub const MAX_CONDITION: f64 = 1e6;
const MAX_ATTEMPTS: u64 = 64;

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 { f64::INFINITY } else { hi / lo }
}

/// `L+1` taps of shape `D_x × D_s` with i.i.d. standard normal entries, redrawn
/// while the leading tap has condition number `>= MAX_CONDITION`.
pub fn gen_mixing(dims: &ModelDims, seed: u64) -> Result<FirFilter> {
    dims.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[attempt]));
        let taps: Vec<_> = (0..=dims.l)
            .map(|_| DMatrix::from_fn(dims.dx, dims.ds(), |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        if condition_number(&taps[0]) < MAX_CONDITION {
            return FirFilter::new(taps);
        }
    }
    Err(Error::Degenerate(format!(
        "no well-conditioned leading tap in {MAX_ATTEMPTS} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_determinism_and_conditioning() {
        let dims = ModelDims::doubled(2, 3, 4, 1000).unwrap();
        let h = gen_mixing(&dims, 9).unwrap();
        assert_eq!(h.taps().len(), 5);
        assert_eq!((h.rows(), h.cols()), (12, 6));
        assert!(condition_number(h.tap(0)) < MAX_CONDITION);
        assert_eq!(h, gen_mixing(&dims, 9).unwrap());
        assert_ne!(h, gen_mixing(&dims, 10).unwrap());
    }

    #[test]
    fn entries_look_standard_normal() {
        let dims = ModelDims::doubled(2, 10, 30, 1000).unwrap();
        let h = gen_mixing(&dims, 1).unwrap();
        let all: Vec<f64> = h.taps().iter().flat_map(|t| t.iter().copied()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05, "{mean} {var}");
    }

    #[test]
    fn condition_number_of_singular_matrix_is_infinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(condition_number(&m) > MAX_CONDITION);
    }
}
