//! Synthetic sources, mixing filters and complete mixing scenes.
//!
//! Every generated component is centred and whitened on its own, so the
//! stacked source has (empirically) identity covariance.

pub mod audio;
pub mod geom;
pub mod image;
pub mod mixing;

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fir::{apply_fir, FirFilter, LinearMap};
use crate::model::{ModelDims, Partition};
use crate::seed::derive_seed;
use crate::series::TimeSeries;

pub use audio::load_audio;
pub use geom::Shape;
pub use image::{letter_a, letter_b, stand_in_face, Bitmap, STAND_IN_FACES};
pub use mixing::{condition_number, gen_mixing};

use audio::whiten_block;

/// Which family of hidden components to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Uniform distributions on 3-D objects; `shapes` defaults to all six,
    /// cycled when `M` exceeds the list.
    Geom3d {
        #[serde(default)]
        shapes: Vec<Shape>,
    },
    /// Densities proportional to image intensity. Without files the built-in
    /// stand-in faces are used.
    ImageDensity {
        #[serde(default)]
        images: Vec<PathBuf>,
    },
    /// The letters A and B as two 2-D components.
    Letters,
    /// Stereo WAV files, one 2-D component each.
    Audio {
        files: Vec<PathBuf>,
        #[serde(default)]
        offset: usize,
    },
}

impl SourceSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SourceSpec::Geom3d { .. } => "geom3d",
            SourceSpec::ImageDensity { .. } => "image_density",
            SourceSpec::Letters => "letters",
            SourceSpec::Audio { .. } => "audio",
        }
    }

    /// Component dimension imposed by the family.
    pub fn component_dim(&self) -> usize {
        match self {
            SourceSpec::Geom3d { .. } => 3,
            _ => 2,
        }
    }

    /// Number of components, when the family fixes it.
    pub fn fixed_count(&self) -> Option<usize> {
        match self {
            SourceSpec::Letters => Some(2),
            SourceSpec::ImageDensity { images } if !images.is_empty() => Some(images.len()),
            SourceSpec::Audio { files, .. } => Some(files.len()),
            _ => None,
        }
    }

    pub fn check(&self, dims: &ModelDims) -> Result<()> {
        if dims.d != self.component_dim() {
            return Err(Error::InvalidArgument(format!(
                "{} components are {}-dimensional, not {}",
                self.name(),
                self.component_dim(),
                dims.d
            )));
        }
        match self.fixed_count() {
            Some(m) if m != dims.m => Err(Error::InvalidArgument(format!(
                "{} provides {m} components but M = {}",
                self.name(),
                dims.m
            ))),
            None if matches!(self, SourceSpec::ImageDensity { .. }) && dims.m > STAND_IN_FACES => {
                Err(Error::InvalidArgument(format!(
                    "only {STAND_IN_FACES} built-in images; supply files for M = {}",
                    dims.m
                )))
            }
            _ => Ok(()),
        }
    }
}

fn stack_components(blocks: Vec<DMatrix<f64>>) -> Result<TimeSeries> {
    let parts = blocks.into_iter().map(TimeSeries::new).collect::<Result<Vec<_>>>()?;
    TimeSeries::vstack(&parts)
}

fn component_rng(seed: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k as u64]))
}

/// `3M × len` source from the given shapes (cycled), one independent stream
/// per component.
pub fn gen_geom3d(shapes: &[Shape], m: usize, len: usize, seed: u64) -> Result<TimeSeries> {
    let shapes = if shapes.is_empty() { &Shape::ALL[..] } else { shapes };
    let blocks = (0..m)
        .map(|k| {
            let shape = shapes[k % shapes.len()];
            let mut block = shape.sample_block(len, &mut component_rng(seed, k));
            whiten_block(&mut block, shape.name())?;
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?;
    stack_components(blocks)
}

/// `2M × len` source, one component per bitmap.
pub fn gen_image_density(bitmaps: &[Bitmap], len: usize, seed: u64) -> Result<TimeSeries> {
    if bitmaps.is_empty() {
        return Err(Error::InvalidArgument("no bitmaps".into()));
    }
    let blocks = bitmaps
        .iter()
        .enumerate()
        .map(|(k, bmp)| {
            let mut block = bmp.sample_points(len, &mut component_rng(seed, k));
            whiten_block(&mut block, "bitmap")?;
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?;
    stack_components(blocks)
}

/// `4 × len` source: the letters A and B.
pub fn gen_letters(len: usize, seed: u64) -> Result<TimeSeries> {
    gen_image_density(&[letter_a(), letter_b()], len, seed)
}

/// Draws `len` samples of the family described by `spec`.
pub fn gen_sources(spec: &SourceSpec, m: usize, len: usize, seed: u64) -> Result<TimeSeries> {
    match spec {
        SourceSpec::Geom3d { shapes } => gen_geom3d(shapes, m, len, seed),
        SourceSpec::Letters => gen_letters(len, seed),
        SourceSpec::ImageDensity { images } => {
            let bitmaps = if images.is_empty() {
                (0..m).map(stand_in_face).collect()
            } else {
                images.iter().map(|p| Bitmap::load(p)).collect::<Result<Vec<_>>>()?
            };
            gen_image_density(&bitmaps, len, seed)
        }
        SourceSpec::Audio { files, offset } => {
            let blocks = files
                .iter()
                .map(|p| load_audio(p, *offset, len))
                .collect::<Result<Vec<_>>>()?;
            stack_components(blocks)
        }
    }
}

/// One fully specified mixing problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub dims: ModelDims,
    /// `D_s × T` hidden source aligned with `observation`.
    pub sources: TimeSeries,
    pub mixing: FirFilter,
    /// `D_x × T`; every sample is a full convolution (no start-up transient).
    pub observation: TimeSeries,
    pub partition: Partition,
}

impl Scene {
    /// Leading mixing tap `H_0`.
    pub fn h0(&self) -> LinearMap {
        LinearMap::new(self.mixing.tap(0).clone()).expect("mixing taps are finite")
    }

    /// SHA-256 over sources, taps and observation, for reproducibility checks.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.sources.to_bytes());
        for tap in self.mixing.taps() {
            for v in tap.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.update(self.observation.to_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draws sources and a mixing filter and convolves them. `L` extra source
/// samples are drawn as burn-in and discarded, so all `T` observations are
/// steady state.
pub fn make_scene(spec: &SourceSpec, dims: &ModelDims, seed: u64) -> Result<Scene> {
    dims.validate()?;
    spec.check(dims)?;
    let burn = dims.l;
    let raw = gen_sources(spec, dims.m, dims.t + burn, derive_seed(seed, &[1]))?;
    let mixing = gen_mixing(dims, derive_seed(seed, &[2]))?;
    let observation = apply_fir(&mixing, &raw)?.slice(burn, dims.t)?.with_transient(0);
    let sources = raw.slice(burn, dims.t)?.with_transient(0);
    Ok(Scene {
        dims: *dims,
        sources,
        mixing,
        observation,
        partition: Partition::contiguous(dims.m, dims.d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_cov(s: &TimeSeries) -> DMatrix<f64> {
        s.covariance()
    }

    #[test]
    fn components_whitened_and_centred() {
        let s = gen_geom3d(&[], 6, 20_000, 3).unwrap();
        assert_eq!(s.dim(), 18);
        let cov = block_cov(&s);
        for k in 0..6 {
            let b = cov.view((3 * k, 3 * k), (3, 3));
            assert!((b - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);
        }
        assert!(s.mean().amax() < 1e-10);
        // distinct components are (nearly) uncorrelated
        assert!(cov.view((0, 3), (3, 3)).amax() < 0.05);
    }

    #[test]
    fn letters_have_four_channels() {
        let s = gen_letters(5000, 1).unwrap();
        assert_eq!(s.dim(), 4);
        assert_eq!(s, gen_letters(5000, 1).unwrap());
        assert_ne!(s, gen_letters(5000, 2).unwrap());
    }

    #[test]
    fn scene_matches_direct_convolution() {
        let dims = ModelDims::doubled(2, 2, 3, 200).unwrap();
        let scene = make_scene(&SourceSpec::Letters, &dims, 11).unwrap();
        assert_eq!(scene.observation.dim(), 8);
        assert_eq!(scene.observation.len(), 200);
        assert_eq!(scene.observation.transient(), 0);
        // recompute sample t from the stored (aligned) sources for t >= L
        for t in [3usize, 50, 199] {
            let mut x = nalgebra::DVector::zeros(8);
            for l in 0..=3 {
                x += scene.mixing.tap(l) * scene.sources.sample(t - l);
            }
            assert!((x - scene.observation.sample(t)).amax() < 1e-12);
        }
        assert_eq!(scene.digest(), make_scene(&SourceSpec::Letters, &dims, 11).unwrap().digest());
        assert_ne!(scene.digest(), make_scene(&SourceSpec::Letters, &dims, 12).unwrap().digest());
    }

    #[test]
    fn spec_checks_dimensions() {
        let dims = ModelDims::doubled(2, 3, 1, 100).unwrap();
        assert!(make_scene(&SourceSpec::Letters, &dims, 0).is_err());
        assert!(make_scene(&SourceSpec::Geom3d { shapes: vec![] }, &dims, 0).is_err());
        let too_many = ModelDims::doubled(2, 11, 1, 100).unwrap();
        assert!(make_scene(&SourceSpec::ImageDensity { images: vec![] }, &too_many, 0).is_err());
        assert!(make_scene(&SourceSpec::ImageDensity { images: vec![] }, &dims, 0).is_ok());
    }

    #[test]
    fn spec_parses_from_toml() {
        let s: SourceSpec = toml::from_str("kind = \"geom3d\"\nshapes = [\"torus_surface\"]").unwrap();
        assert_eq!(s, SourceSpec::Geom3d { shapes: vec![Shape::TorusSurface] });
        let s: SourceSpec = toml::from_str("kind = \"letters\"").unwrap();
        assert_eq!(s, SourceSpec::Letters);
    }
}
