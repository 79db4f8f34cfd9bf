//! Multivariate autoregressive fitting with Schwarz-criterion order selection,
//! and the innovation filter `x̃(t) = x(t) − Σ_q A_q x(t−q)`.
//!
//! All candidate orders share one orthogonal factorization of the lagged design
//! `K = [x(t−1)ᵀ … x(t−q_max)ᵀ x(t)ᵀ]` over `t = q_max+1 … T`. Because the lags are
//! laid out in increasing order, the regression of `x(t)` on the first `q` lags
//! reads its residual cross-products straight off the trailing rows of `R`.

mod qr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{check_dim, Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::series::TimeSeries;

use qr::TriangularAccumulator;

const ARMODEL_TAG: &[u8; 4] = b"ARMD";

/// Rows per block fed to the streaming QR.
const QR_BLOCK_ROWS: usize = 32;
/// Rows per independently factored partition. Fixed so that the result does
/// not depend on the number of worker threads.
const QR_PARTITION_ROWS: usize = 1 << 14;
/// Pivot ratio below which the lagged design is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-9;
/// Ridge strength relative to the mean regressor energy.
const RIDGE_SCALE: f64 = 1e-10;
/// Residual-covariance eigenvalues below this fraction of the largest one are
/// rounding noise and are clamped before taking the log-determinant.
const LOGDET_FLOOR: f64 = 1e-12;

/// Fitted AR(Q) model `x(t) = Σ_{q=1..Q} A_q x(t−q) + e(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    dim: usize,
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
    sbc_curve: Vec<(usize, f64)>,
    regularized: bool,
    effective_samples: usize,
}

impl ArModel {
    /// Wraps known coefficients, e.g. for a planted process.
    pub fn from_coeffs(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let dim = noise_cov.nrows();
        if noise_cov.ncols() != dim || dim == 0 {
            return Err(Error::InvalidArgument("noise covariance must be square".into()));
        }
        for a in &coeffs {
            if a.shape() != (dim, dim) {
                return Err(Error::Dimension {
                    context: "AR coefficient",
                    expected: dim,
                    actual: a.nrows().max(a.ncols()),
                });
            }
        }
        Ok(ArModel {
            dim,
            coeffs,
            noise_cov,
            sbc_curve: Vec::new(),
            regularized: false,
            effective_samples: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `[A_1, …, A_Q]`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// `(order, criterion)` for every candidate order, ascending in order.
    pub fn sbc_curve(&self) -> &[(usize, f64)] {
        &self.sbc_curve
    }

    /// Set when the lagged design was rank deficient and a ridge solve was used.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn effective_samples(&self) -> usize {
        self.effective_samples
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(ARMODEL_TAG);
        enc.u32(self.dim);
        enc.u32(self.coeffs.len());
        for a in &self.coeffs {
            enc.matrix(a);
        }
        enc.matrix(&self.noise_cov);
        enc.u32(self.sbc_curve.len());
        for &(q, v) in &self.sbc_curve {
            enc.u32(q);
            enc.f64(v);
        }
        enc.u8(self.regularized as u8);
        enc.u32(self.effective_samples);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, ARMODEL_TAG)?;
        let dim = dec.u32()?;
        let order = dec.u32()?;
        let coeffs = (0..order).map(|_| dec.matrix()).collect::<Result<Vec<_>>>()?;
        let noise_cov = dec.matrix()?;
        let n_sbc = dec.u32()?;
        let sbc_curve = (0..n_sbc)
            .map(|_| Ok((dec.u32()?, dec.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        let regularized = dec.u8()? != 0;
        let effective_samples = dec.u32()?;
        dec.finish()?;
        let mut model = ArModel::from_coeffs(coeffs, noise_cov)?;
        check_dim("ARMD dimension", dim, model.dim)?;
        model.sbc_curve = sbc_curve;
        model.regularized = regularized;
        model.effective_samples = effective_samples;
        Ok(model)
    }
}

/// Triangular factor of the lagged design for lags `1..=q_max`.
fn lagged_triangle(x: &TimeSeries, q_max: usize) -> DMatrix<f64> {
    let d = x.dim();
    let n = (q_max + 1) * d;
    let xs = x.values();
    let first = q_max;
    let total = x.len() - q_max;

    let fill_row = |t: usize, row: &mut [f64]| {
        for q in 1..=q_max {
            row[(q - 1) * d..q * d].copy_from_slice(xs.column(t - q).as_slice());
        }
        row[q_max * d..].copy_from_slice(xs.column(t).as_slice());
    };

    let partitions: Vec<(usize, usize)> = (0..total)
        .step_by(QR_PARTITION_ROWS)
        .map(|s| (first + s, (total - s).min(QR_PARTITION_ROWS)))
        .collect();
    let triangles: Vec<TriangularAccumulator> = partitions
        .par_iter()
        .map(|&(start, len)| {
            let mut acc = TriangularAccumulator::new(n);
            let mut block = vec![0.0; QR_BLOCK_ROWS * n];
            let mut t = start;
            while t < start + len {
                let b = (start + len - t).min(QR_BLOCK_ROWS);
                for r in 0..b {
                    fill_row(t + r, &mut block[r * n..(r + 1) * n]);
                }
                acc.absorb(&mut block[..b * n]);
                t += b;
            }
            acc
        })
        .collect();
    let mut iter = triangles.into_iter();
    let mut acc = iter.next().expect("at least one partition");
    for other in iter {
        acc.merge(&other);
    }
    acc.into_matrix()
}

/// `ln det` of a covariance with eigenvalues clamped at `LOGDET_FLOOR · λ_max`.
fn floored_log_det(cov: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = sym_eigen_desc(cov);
    let top = vals[0];
    if !(top > 0.0) {
        return Err(Error::Degenerate("residual covariance vanishes".into()));
    }
    Ok(vals.iter().map(|&v| v.max(top * LOGDET_FLOOR).ln()).sum())
}

fn is_rank_deficient(r: &DMatrix<f64>, p: usize) -> bool {
    if p == 0 {
        return false;
    }
    let diag: Vec<f64> = (0..p).map(|k| r[(k, k)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    !(min > RANK_TOLERANCE * max)
}

/// Solves for the stacked coefficients `B` (`p × d`, block `q` is `A_qᵀ`).
fn solve_coefficients(r: &DMatrix<f64>, p: usize, d: usize, ridge: bool) -> Result<DMatrix<f64>> {
    let n = r.nrows();
    let r11 = r.view((0, 0), (p, p));
    let r12 = r.view((0, n - d), (p, d));
    if !ridge {
        return r11
            .into_owned()
            .solve_upper_triangular(&r12.into_owned())
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()));
    }
    let energy = r.view((0, 0), (n, p)).norm_squared() / p as f64;
    let eps = RIDGE_SCALE * energy.max(f64::MIN_POSITIVE);
    let mut gram = r11.transpose() * r11;
    for k in 0..p {
        gram[(k, k)] += eps;
    }
    let rhs = r11.transpose() * r12;
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))
}

/// Least-squares AR fit over orders `q_min..=q_max`, keeping the order that
/// minimizes `SBC(q) = ln det Σ̂_q + ln(T′)·q·D²/T′` with `T′ = T − q_max`.
pub fn fit_ar(x: &TimeSeries, q_min: usize, q_max: usize) -> Result<ArModel> {
    if q_min > q_max {
        return Err(Error::InvalidArgument(format!(
            "order range [{q_min}, {q_max}] is empty"
        )));
    }
    let d = x.dim();
    let needed = q_max * d + d;
    if x.len() <= needed + q_max {
        return Err(Error::InsufficientSamples {
            needed: needed + q_max,
            available: x.len(),
        });
    }
    let t_eff = x.len() - q_max;
    let r = lagged_triangle(x, q_max);
    let n = r.nrows();

    let tf = t_eff as f64;
    let penalty_per_order = tf.ln() * (d * d) as f64 / tf;
    let mut sbc_curve = Vec::with_capacity(q_max - q_min + 1);
    for q in q_min..=q_max {
        let p = q * d;
        let tail = r.view((p, n - d), (n - p, d));
        let cov = tail.transpose() * tail / tf;
        let value = floored_log_det(&cov)? + penalty_per_order * q as f64;
        sbc_curve.push((q, value));
    }
    let (order, _) = sbc_curve
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .expect("non-empty order range");

    let p = order * d;
    let regularized = is_rank_deficient(&r, p);
    let (coeffs, noise_cov) = if p == 0 {
        let obs = r.view((0, n - d), (n, d));
        (Vec::new(), obs.transpose() * obs / tf)
    } else {
        let b = solve_coefficients(&r, p, d, regularized)?;
        let resid = r.view((0, n - d), (n, d)) - r.view((0, 0), (n, p)) * &b;
        let coeffs = (0..order)
            .map(|q| b.rows(q * d, d).transpose())
            .collect::<Vec<_>>();
        (coeffs, resid.transpose() * &resid / tf)
    };
    if regularized {
        log::warn!("lagged design rank deficient at order {order}; used ridge solve");
    }
    if coeffs.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("AR coefficients"));
    }

    Ok(ArModel {
        dim: d,
        coeffs,
        noise_cov: (&noise_cov + noise_cov.transpose()) * 0.5,
        sbc_curve,
        regularized,
        effective_samples: t_eff,
    })
}

/// Prediction error `x̃(t) = x(t) − Σ_{q=1..Q} A_q x(t−q)` for `t ≥ Q`
/// (zero-based); the output has `T − Q` samples.
pub fn innovation(x: &TimeSeries, model: &ArModel) -> Result<TimeSeries> {
    check_dim("innovation input", model.dim(), x.dim())?;
    let q_order = model.order();
    if x.len() <= q_order {
        return Err(Error::InsufficientSamples {
            needed: q_order,
            available: x.len(),
        });
    }
    let len = x.len() - q_order;
    let xs = x.values();
    let mut out = xs.columns(q_order, len).into_owned();
    for (i, a) in model.coeffs().iter().enumerate() {
        let q = i + 1;
        out.gemm(-1.0, a, &xs.columns(q_order - q, len), 1.0);
    }
    Ok(TimeSeries::new(out)?.with_transient(x.transient().saturating_sub(q_order)))
}

/// Simulates `x(t) = Σ_q A_q x(t−q) + e(t)` from zero initial state.
pub fn simulate_ar(coeffs: &[DMatrix<f64>], noise: &TimeSeries) -> Result<TimeSeries> {
    let d = noise.dim();
    let len = noise.len();
    let mut x = DMatrix::<f64>::zeros(d, len);
    for t in 0..len {
        let mut v: DVector<f64> = noise.values().column(t).into_owned();
        for (i, a) in coeffs.iter().enumerate() {
            let q = i + 1;
            if t >= q {
                v.gemv(1.0, a, &x.column(t - q), 1.0);
            }
        }
        x.set_column(t, &v);
    }
    TimeSeries::new(x)
}
