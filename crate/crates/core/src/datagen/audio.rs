//! Stereo recordings as two-dimensional sources.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::inv_sqrt_sym;

/// Reads `len` stereo frames starting at `offset` from a 16-bit PCM WAV file
/// as a `2 × len` block (left, right). No whitening is applied.
pub fn read_stereo(path: &Path, offset: usize, len: usize) -> Result<DMatrix<f64>> {
    let decode = |reason: String| Error::Decode { path: path.to_path_buf(), reason };
    let mut reader = hound::WavReader::open(path).map_err(|e| decode(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 2 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(decode(format!(
            "expected 16-bit integer stereo, found {} channel(s) of {}-bit {:?}",
            spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    let frames = reader.duration() as usize;
    if offset + len > frames {
        return Err(Error::InsufficientSamples { needed: offset + len, available: frames });
    }
    reader.seek(offset as u32).map_err(|e| decode(e.to_string()))?;
    let mut out = DMatrix::zeros(2, len);
    let mut samples = reader.samples::<i16>();
    for t in 0..len {
        for ch in 0..2 {
            let v = samples
                .next()
                .ok_or_else(|| decode("truncated sample data".into()))?
                .map_err(|e| decode(e.to_string()))?;
            out[(ch, t)] = v as f64;
        }
    }
    Ok(out)
}

/// Centres a block and applies the inverse square root of its covariance.
pub(crate) fn whiten_block(block: &mut DMatrix<f64>, what: &str) -> Result<()> {
    let n = block.ncols() as f64;
    let mean = block.column_mean();
    for mut col in block.column_iter_mut() {
        col -= &mean;
    }
    let cov = &*block * block.transpose() / n;
    let w = inv_sqrt_sym(&cov).map_err(|_| Error::Degenerate(format!("{what} has a singular covariance")))?;
    *block = w * &*block;
    Ok(())
}

pub fn load_audio(path: &Path, offset: usize, len: usize) -> Result<DMatrix<f64>> {
    let mut block = read_stereo(path, offset, len)?;
    whiten_block(&mut block, &path.display().to_string())?;
    Ok(block)
}
