//! Multichannel sampled signals.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};

const SERIES_TAG: &[u8; 4] = b"BSSD";

/// A `dim × len` real signal; column `t` holds the sample at time `t`.
///
/// `transient` counts leading samples produced by zero-padded warm-up. They are
/// kept in the data but excluded from downstream statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: DMatrix<f64>,
    transient: usize,
}

impl TimeSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "time series must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(TimeSeries {
            values,
            transient: 0,
        })
    }

    /// Builds a series from per-channel rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::Dimension {
                context: "series row length",
                expected: len,
                actual: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(dim, len, |i, t| rows[i][t]))
    }

    pub fn with_transient(mut self, transient: usize) -> Self {
        self.transient = transient.min(self.len());
        self
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn transient(&self) -> usize {
        self.transient
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn sample(&self, t: usize) -> DVector<f64> {
        self.values.column(t).into_owned()
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Samples `[start, start + len)`; the transient count is shifted accordingly.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {}) outside series of length {}",
                start + len,
                self.len()
            )));
        }
        Ok(TimeSeries {
            values: self.values.columns(start, len).into_owned(),
            transient: self.transient.saturating_sub(start).min(len),
        })
    }

    /// Drops the flagged transient prefix.
    pub fn steady(&self) -> Result<Self> {
        self.slice(self.transient, self.len() - self.transient)
    }

    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&c) = channels.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::InvalidArgument(format!("channel {c} out of range")));
        }
        Ok(TimeSeries {
            values: self.values.select_rows(channels),
            transient: self.transient,
        })
    }

    /// Stacks channels of several equally long series.
    pub fn vstack(parts: &[TimeSeries]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        let len = first.len();
        let mut dim = 0;
        for p in parts {
            crate::error::check_dim("vstack length", len, p.len())?;
            dim += p.dim();
        }
        let mut values = DMatrix::zeros(dim, len);
        let mut row = 0;
        for p in parts {
            values.rows_mut(row, p.dim()).copy_from(&p.values);
            row += p.dim();
        }
        let transient = parts.iter().map(|p| p.transient).max().unwrap_or(0);
        Ok(TimeSeries { values, transient })
    }

    pub fn mean(&self) -> DVector<f64> {
        self.values.column_mean()
    }

    /// Subtracts the per-channel sample mean.
    pub fn centered(&self) -> Self {
        let mean = self.mean();
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            col -= &mean;
        }
        TimeSeries {
            values,
            transient: self.transient,
        }
    }

    /// Second-moment matrix `X Xᵀ / T`.
    ///
    /// Signals are zero-mean by convention, so this is used as the covariance
    /// throughout; linear maps built from it then carry no offset term.
    pub fn covariance(&self) -> DMatrix<f64> {
        let x = &self.values;
        let mut c = x * x.transpose();
        c /= self.len() as f64;
        c
    }

    /// Centered sample covariance.
    pub fn centered_covariance(&self) -> DMatrix<f64> {
        self.centered().covariance()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TimeSeries {
            values: &self.values * factor,
            transient: self.transient,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(SERIES_TAG);
        enc.matrix(&self.values);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, SERIES_TAG)?;
        let values = dec.matrix()?;
        dec.finish()?;
        Self::new(values)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Headerless CSV, one row per channel. Values use the shortest decimal
    /// representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.values.row_iter() {
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad number {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_series() -> impl Strategy<Value = TimeSeries> {
        (1usize..5, 1usize..20).prop_flat_map(|(d, t)| {
            proptest::collection::vec(
                prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64],
                d * t,
            )
            .prop_map(move |v| TimeSeries::new(DMatrix::from_vec(d, t, v)).unwrap())
        })
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(s in arb_series()) {
            let back = TimeSeries::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(s.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            back.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn csv_round_trip_is_bit_exact(s in arb_series()) {
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.dim(), s.dim());
            prop_assert_eq!(s.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            back.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn binary_layout() {
        let s = TimeSeries::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = s.to_bytes();
        assert_eq!(&b[..4], b"BSSD");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 2);
        // column-major: t=0 channel 0, t=0 channel 1, ...
        let first: Vec<f64> = b[14..]
            .chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(first, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(TimeSeries::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(TimeSeries::new(DMatrix::zeros(0, 3)).is_err());
        assert!(TimeSeries::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let s = TimeSeries::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let b = s.to_bytes();
        assert!(TimeSeries::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(TimeSeries::from_bytes(b"XXXX\x01\x00").is_err());
    }

    #[test]
    fn slicing_tracks_transient() {
        let s = TimeSeries::new(DMatrix::from_fn(1, 10, |_, t| t as f64))
            .unwrap()
            .with_transient(3);
        let st = s.steady().unwrap();
        assert_eq!(st.len(), 7);
        assert_eq!(st.values()[(0, 0)], 3.0);
        assert_eq!(st.transient(), 0);
        assert_eq!(s.slice(1, 5).unwrap().transient(), 2);
    }
}
