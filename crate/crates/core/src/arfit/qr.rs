//! Row-streaming Householder QR.
//!
//! Only the triangular factor of a tall regression matrix is needed for the AR
//! fit, so rows are folded into an `n × n` upper-triangular accumulator a small
//! block at a time. Each block update annihilates the block against the current
//! triangle with one Householder reflector per column, which keeps the working
//! set in cache while doing the same arithmetic as a full Householder QR.

use nalgebra::DMatrix;

/// Upper-triangular `R` with `RᵀR = KᵀK` for every row of `K` absorbed so far.
#[derive(Debug, Clone)]
pub(crate) struct TriangularAccumulator {
    n: usize,
    /// Row-major `n × n`; entries below the diagonal stay zero.
    r: Vec<f64>,
    w: Vec<f64>,
}

impl TriangularAccumulator {
    pub fn new(n: usize) -> Self {
        TriangularAccumulator {
            n,
            r: vec![0.0; n * n],
            w: vec![0.0; n],
        }
    }

    /// Folds `rows` (row-major, `rows.len() / n` rows of width `n`) into `R`.
    /// The block is overwritten.
    pub fn absorb(&mut self, rows: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(rows.len() % n, 0);
        let b = rows.len() / n;
        if b == 0 {
            return;
        }
        for k in 0..n {
            let scale = (0..b)
                .map(|i| rows[i * n + k].abs())
                .fold(self.r[k * n + k].abs(), f64::max);
            if scale < f64::MIN_POSITIVE {
                // nothing left to annihilate beyond subnormal noise
                for i in 0..b {
                    rows[i * n + k] = 0.0;
                }
                continue;
            }
            // reflector computed on the column scaled to unit max-norm so that
            // deeply dependent columns cannot underflow
            let inv = 1.0 / scale;
            for i in 0..b {
                rows[i * n + k] *= inv;
            }
            let sigma: f64 = (0..b).map(|i| rows[i * n + k].powi(2)).sum();
            if sigma == 0.0 {
                continue;
            }
            let x0 = self.r[k * n + k] * inv;
            let norm = (x0 * x0 + sigma).sqrt();
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let v0 = x0 - alpha;
            let tau = 2.0 / (v0 * v0 + sigma);

            let tail = k + 1..n;
            let (r_row, w) = (&mut self.r[k * n..(k + 1) * n], &mut self.w[..]);
            for (wj, rj) in w[tail.clone()].iter_mut().zip(&r_row[tail.clone()]) {
                *wj = v0 * rj;
            }
            for i in 0..b {
                let vi = rows[i * n + k];
                if vi != 0.0 {
                    let row = &rows[i * n + k + 1..(i + 1) * n];
                    for (wj, yj) in w[tail.clone()].iter_mut().zip(row) {
                        *wj += vi * yj;
                    }
                }
            }
            let s0 = tau * v0;
            for (rj, wj) in r_row[tail.clone()].iter_mut().zip(&w[tail.clone()]) {
                *rj -= s0 * wj;
            }
            for i in 0..b {
                let si = tau * rows[i * n + k];
                if si != 0.0 {
                    let row = &mut rows[i * n + k + 1..(i + 1) * n];
                    for (yj, wj) in row.iter_mut().zip(&w[tail.clone()]) {
                        *yj -= si * wj;
                    }
                }
                rows[i * n + k] = 0.0;
            }
            r_row[k] = alpha * scale;
        }
    }

    /// Absorbs another accumulator's triangle.
    pub fn merge(&mut self, other: &TriangularAccumulator) {
        assert_eq!(self.n, other.n);
        let mut rows = other.r.clone();
        self.absorb(&mut rows);
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| self.r[i * n + j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gram_of_r(r: &DMatrix<f64>) -> DMatrix<f64> {
        r.transpose() * r
    }

    #[test]
    fn reproduces_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, n) = (157, 11);
        let k = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let mut acc = TriangularAccumulator::new(n);
        let mut start = 0;
        for b in [1usize, 7, 32, 50, 67] {
            let mut rows: Vec<f64> = (start..start + b)
                .flat_map(|i| k.row(i).iter().copied().collect::<Vec<_>>())
                .collect();
            acc.absorb(&mut rows);
            start += b;
        }
        assert_eq!(start, m);
        let r = acc.into_matrix();
        for i in 0..n {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
        assert_abs_diff_eq!(gram_of_r(&r), k.transpose() * &k, epsilon = 1e-9);
        // |diag| agrees with nalgebra's Householder QR
        let r_ref = k.qr().r();
        for i in 0..n {
            assert_abs_diff_eq!(r[(i, i)].abs(), r_ref[(i, i)].abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn merge_matches_single_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (m, n) = (90, 6);
        let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
        let mut whole = TriangularAccumulator::new(n);
        whole.absorb(&mut data.clone());
        let mut a = TriangularAccumulator::new(n);
        let mut b = TriangularAccumulator::new(n);
        a.absorb(&mut data[..40 * n].to_vec());
        b.absorb(&mut data[40 * n..].to_vec());
        a.merge(&b);
        let (ra, rw) = (a.into_matrix(), whole.into_matrix());
        assert_abs_diff_eq!(gram_of_r(&ra), gram_of_r(&rw), epsilon = 1e-9);
    }

    #[test]
    fn dependent_columns_leave_tiny_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 60;
        let mut rows = Vec::new();
        for _ in 0..m {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.extend_from_slice(&[a, b, a + 2.0 * b]);
        }
        let mut acc = TriangularAccumulator::new(3);
        acc.absorb(&mut rows);
        let r = acc.into_matrix();
        assert!(r[(2, 2)].abs() < 1e-12 * r[(0, 0)].abs());
    }

    #[test]
    fn tiny_columns_do_not_underflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (m, n) = (64, 5);
        let k = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let run = |scale: f64| {
            let mut acc = TriangularAccumulator::new(n);
            for chunk in 0..(m / 16) {
                let mut rows: Vec<f64> = (chunk * 16..(chunk + 1) * 16)
                    .flat_map(|i| k.row(i).iter().map(|v| v * scale).collect::<Vec<_>>())
                    .collect();
                acc.absorb(&mut rows);
            }
            acc.into_matrix()
        };
        let reference = run(1.0);
        let tiny = run(1e-160);
        assert!(tiny.iter().all(|v| v.is_finite()));
        assert!((tiny * 1e160 - &reference).amax() < 1e-10 * reference.amax());
    }
}
