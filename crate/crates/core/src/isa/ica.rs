//! Symmetric fixed-point ICA with the `tanh` nonlinearity.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fir::LinearMap;
use crate::linalg::sym_decorrelate;
use crate::seed::derive_seed;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when `max_i |1 − |⟨w_i, w_i'⟩||` falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            restarts: 5,
            max_iter: 1000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaOutcome {
    /// Orthogonal unmixing matrix for whitened input.
    pub unmixing: LinearMap,
    /// Negentropy proxy `Σ_i (E G(y_i) − E G(ν))²`, `G = log cosh`.
    pub contrast: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Every output channel is statistically indistinguishable from Gaussian.
    pub unidentifiable: bool,
    /// Index of the restart that was kept.
    pub restart: usize,
}

/// `log cosh` without overflow.
fn log_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Mean and standard deviation of `log cosh ν` for `ν ~ N(0, 1)`, by Simpson
/// quadrature on `[-12, 12]`.
fn gaussian_log_cosh_moments() -> (f64, f64) {
    static MOMENTS: OnceLock<(f64, f64)> = OnceLock::new();
    *MOMENTS.get_or_init(|| {
        let (a, b, n) = (-12.0f64, 12.0f64, 8000usize);
        let h = (b - a) / n as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..=n {
            let x = a + h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = norm * (-0.5 * x * x).exp();
            let g = log_cosh(x);
            m1 += w * p * g;
            m2 += w * p * g * g;
        }
        m1 *= h / 3.0;
        m2 *= h / 3.0;
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    })
}

/// `tanh` through a single exponential; several times faster than the libm
/// routine and accurate to a few ulps.
#[inline]
fn fast_tanh(v: f64) -> f64 {
    if v.abs() > 20.0 {
        return v.signum();
    }
    let e = (2.0 * v).exp();
    (e - 1.0) / (e + 1.0)
}

/// Restarts are screened on at most this many (evenly strided) samples; only
/// the winner is refined on the full input.
pub const SCREENING_SAMPLES: usize = 20_000;

struct RestartResult {
    w: DMatrix<f64>,
    contrast: f64,
    iterations: usize,
    converged: bool,
    deviations: Vec<f64>,
}

fn initial_guess(dim: usize, seed: u64, restart: usize) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[restart as u64]));
    sym_decorrelate(&DMatrix::from_fn(dim, dim, |_, _| rng.sample(StandardNormal)))
}

fn fixed_point(
    z: &DMatrix<f64>,
    zt: &DMatrix<f64>,
    mut w: DMatrix<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<RestartResult> {
    let (dim, len) = z.shape();
    let tf = len as f64;
    let mut y = DMatrix::<f64>::zeros(dim, len);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        y.gemm(1.0, &w, z, 0.0);
        let mut deriv = vec![0.0; dim];
        for t in 0..len {
            let col = y.column_mut(t);
            for (i, v) in col.into_iter().enumerate() {
                let g = fast_tanh(*v);
                *v = g;
                deriv[i] += 1.0 - g * g;
            }
        }
        let mut w_next = &y * zt / tf;
        for i in 0..dim {
            let s = deriv[i] / tf;
            for j in 0..dim {
                w_next[(i, j)] -= s * w[(i, j)];
            }
        }
        let w_next = sym_decorrelate(&w_next)?;
        let overlap = &w_next * w.transpose();
        let lim = (0..dim)
            .map(|i| (1.0 - overlap[(i, i)].abs()).abs())
            .fold(0.0, f64::max);
        w = w_next;
        if lim < tol {
            converged = true;
            break;
        }
    }
    y.gemm(1.0, &w, z, 0.0);
    let (gauss_mean, _) = gaussian_log_cosh_moments();
    let deviations: Vec<f64> = (0..dim)
        .map(|i| y.row(i).iter().map(|&v| log_cosh(v)).sum::<f64>() / tf - gauss_mean)
        .collect();
    let contrast = deviations.iter().map(|d| d * d).sum();
    Ok(RestartResult {
        w,
        contrast,
        iterations,
        converged,
        deviations,
    })
}

/// Finds an orthogonal `W` making the channels of `W·white` maximally
/// non-Gaussian. Restarts run in parallel; the best contrast wins, ties going to
/// the lower restart index.
pub fn ica(white: &TimeSeries, config: &IcaConfig) -> Result<IcaOutcome> {
    if config.restarts == 0 || config.max_iter == 0 {
        return Err(Error::InvalidArgument("ICA needs at least one restart and iteration".into()));
    }
    let z = white.values();
    let zt = z.transpose();
    let (dim, len) = z.shape();
    let stride = len.div_ceil(SCREENING_SAMPLES).max(1);
    let screening = stride > 1 && config.restarts > 1;
    let (zs, zst) = if screening {
        let cols: Vec<usize> = (0..len).step_by(stride).collect();
        let zs = z.select_columns(&cols);
        let zst = zs.transpose();
        (zs, zst)
    } else {
        (z.clone(), zt.clone())
    };
    let mut results = (0..config.restarts)
        .into_par_iter()
        .map(|r| fixed_point(&zs, &zst, initial_guess(dim, config.seed, r)?, config.max_iter, config.tol))
        .collect::<Result<Vec<_>>>()?;
    let best_idx = results
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.contrast
                .partial_cmp(&b.contrast)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("at least one restart");
    let best = if screening {
        let start = results.swap_remove(best_idx).w;
        fixed_point(z, &zt, start, config.max_iter, config.tol)?
    } else {
        results.swap_remove(best_idx)
    };
    if !best.converged {
        log::warn!("ICA did not converge within {} iterations", config.max_iter);
    }
    let (_, gauss_sd) = gaussian_log_cosh_moments();
    let threshold = 4.0 * gauss_sd / (white.len() as f64).sqrt();
    let unidentifiable = best.deviations.iter().all(|d| d.abs() < threshold);
    Ok(IcaOutcome {
        unmixing: LinearMap::new(best.w.clone())?,
        contrast: best.contrast,
        iterations: best.iterations,
        converged: best.converged,
        unidentifiable,
        restart: best_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonality_defect;
    use rand_distr::Uniform;

    fn uniform_sources(seed: u64, d: usize, t: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-3f64.sqrt(), 3f64.sqrt()).unwrap();
        DMatrix::from_fn(d, t, |_, _| rng.sample(u))
    }

    fn laplace_sources(seed: u64, d: usize, t: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(d, t, |_, _| {
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / 2f64.sqrt()
        })
    }

    fn whiten(x: DMatrix<f64>) -> TimeSeries {
        let s = TimeSeries::new(x).unwrap();
        crate::isa::pca::pca_whiten(&s, s.dim()).unwrap().whitened
    }

    #[test]
    fn gaussian_log_cosh_constant() {
        let (m, sd) = gaussian_log_cosh_moments();
        // E log cosh ν for ν ~ N(0,1)
        assert!((m - 0.374567).abs() < 1e-5, "{m}");
        assert!(sd > 0.3 && sd < 0.6);
    }

    #[test]
    fn independent_channels_give_signed_permutation() {
        let n = 100_000;
        let u = uniform_sources(1, 2, n);
        let l = laplace_sources(2, 1, n);
        let z = TimeSeries::new(DMatrix::from_fn(3, n, |i, t| if i < 2 { u[(i, t)] } else { l[(0, t)] }))
            .unwrap();
        let out = ica(&z, &IcaConfig { seed: 3, ..Default::default() }).unwrap();
        let w = out.unmixing.matrix();
        assert!(orthogonality_defect(w) < 1e-8);
        assert!(out.converged);
        for row in w.row_iter() {
            assert_eq!(row.iter().filter(|v| v.abs() > 0.95).count(), 1, "{w}");
        }
        assert!(!out.unidentifiable);
    }

    #[test]
    fn recovers_planted_rotation() {
        let s = uniform_sources(4, 2, 100_000);
        let th = 30f64.to_radians();
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let x = TimeSeries::new(&rot * s).unwrap();
        let out = ica(&x, &IcaConfig { seed: 5, ..Default::default() }).unwrap();
        let g = out.unmixing.matrix() * &rot;
        // angle by which G deviates from a signed permutation
        let worst = g
            .row_iter()
            .map(|r| {
                let m = r.amax().min(1.0);
                m.acos().to_degrees()
            })
            .fold(0.0, f64::max);
        assert!(worst < 2.0, "deviation {worst} deg");
    }

    #[test]
    fn gaussian_input_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = DMatrix::from_fn(2, 20_000, |_, _| rng.sample(StandardNormal));
        let out = ica(&whiten(g), &IcaConfig { seed: 7, max_iter: 200, ..Default::default() }).unwrap();
        assert!(out.unidentifiable);
        assert!(orthogonality_defect(out.unmixing.matrix()) < 1e-8);
    }

    #[test]
    fn deterministic_given_seed() {
        let z = whiten(uniform_sources(8, 3, 5000));
        let cfg = IcaConfig { seed: 9, ..Default::default() };
        assert_eq!(ica(&z, &cfg).unwrap(), ica(&z, &cfg).unwrap());
    }
}
