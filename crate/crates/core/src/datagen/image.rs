//! Two-dimensional sources whose density is proportional to pixel intensity.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Grayscale raster; `pixels[r * width + c]`, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDensity(format!(
                "{} pixel values for a {width}×{height} bitmap",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDensity("pixel intensities must be finite and non-negative".into()));
        }
        if pixels.iter().all(|p| *p == 0.0) {
            return Err(Error::InvalidDensity("bitmap has no mass".into()));
        }
        Ok(Bitmap { width, height, pixels })
    }

    /// Rows of `#` (full intensity) and anything else (empty).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidDensity("ragged ascii bitmap".into()));
        }
        let pixels = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| if b == b'#' { 1.0 } else { 0.0 }))
            .collect();
        Bitmap::new(width, rows.len(), pixels)
    }

    /// Reads any grayscale-convertible raster (PNG, PGM).
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })?
            .into_luma8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        Bitmap::new(w as usize, h as usize, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pixels
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// Pixel indices drawn with probability proportional to intensity.
    pub fn sample_pixels<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let cdf = self.cumulative();
        let total = *cdf.last().unwrap();
        (0..len)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            })
            .collect()
    }

    /// `2 × len` points; a chosen pixel is jittered uniformly within its cell and
    /// the vertical axis points up.
    pub fn sample_points<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> DMatrix<f64> {
        let idx = self.sample_pixels(len, rng);
        let mut out = DMatrix::zeros(2, len);
        for (t, &k) in idx.iter().enumerate() {
            let (r, c) = (k / self.width, k % self.width);
            out[(0, t)] = c as f64 + rng.random::<f64>();
            out[(1, t)] = (self.height - 1 - r) as f64 + rng.random::<f64>();
        }
        out
    }
}

const LETTER_A: [&str; 14] = [
    ".....####.....",
    "....######....",
    "...###..###...",
    "...###..###...",
    "..###....###..",
    "..###....###..",
    ".###......###.",
    ".############.",
    ".############.",
    "###........###",
    "###........###",
    "###........###",
    "###........###",
    "###........###",
];

const LETTER_B: [&str; 14] = [
    "##########....",
    "###########...",
    "###......###..",
    "###......###..",
    "###......###..",
    "##########....",
    "##########....",
    "###......####.",
    "###.......###.",
    "###.......###.",
    "###.......###.",
    "###......####.",
    "############..",
    "###########...",
];

pub fn letter_a() -> Bitmap {
    Bitmap::from_ascii(&LETTER_A).expect("built-in bitmap")
}

pub fn letter_b() -> Bitmap {
    Bitmap::from_ascii(&LETTER_B).expect("built-in bitmap")
}

pub const STAND_IN_FACES: usize = 10;

/// Built-in 32×32 cartoon faces used when no image files are supplied.
/// Each index varies the outline, eyes, mouth and shading so that all ten
/// densities differ.
pub fn stand_in_face(index: usize) -> Bitmap {
    assert!(index < STAND_IN_FACES, "only {STAND_IN_FACES} stand-in faces");
    const N: usize = 32;
    let k = index as f64;
    let centre = (N as f64 - 1.0) / 2.0;
    let radius = 13.0 + (index % 3) as f64;
    let ring = 1.2 + 0.5 * (index % 2) as f64;
    let fill = 0.1 + 0.05 * (index % 4) as f64;
    let eye_dx = 4.0 + (index % 3) as f64;
    let eye_y = centre - 4.0 - (index % 2) as f64;
    let eye_r = 1.5 + 0.5 * ((index / 2) % 3) as f64;
    // positive curvature smiles, negative frowns, zero is a straight mouth
    let curvature = [0.12, -0.1, 0.0, 0.18, -0.15, 0.08, 0.0, 0.2, -0.06, 0.14][index];
    let mouth_y = centre + 5.0 + (index % 3) as f64 - if curvature < 0.0 { 3.0 } else { 0.0 };
    let mouth_half = 5.0 + (index % 4) as f64;
    let mouth_w = 1.0 + 0.4 * ((index / 3) % 2) as f64;
    let nose = index % 3 == 1;

    let mut pixels = vec![0.0; N * N];
    for r in 0..N {
        for c in 0..N {
            let (y, x) = (r as f64, c as f64);
            let dist = (x - centre).hypot(y - centre);
            let mut v = 0.0_f64;
            if dist <= radius - ring {
                // gentle shading that changes direction per face
                v = fill * (1.0 + 0.3 * ((x - centre) * (k * 0.7).cos() + (y - centre) * (k * 0.7).sin()) / radius);
            }
            if (dist - radius).abs() <= ring {
                v = 1.0;
            }
            for side in [-1.0, 1.0] {
                if (x - centre - side * eye_dx).hypot(y - eye_y) <= eye_r {
                    v = 0.9;
                }
            }
            let mx = x - centre;
            if mx.abs() <= mouth_half {
                let my = mouth_y - curvature * (mouth_half * mouth_half - mx * mx) * 0.5;
                if (y - my).abs() <= mouth_w {
                    v = 0.8;
                }
            }
            if nose && mx.abs() <= 0.6 && (y - centre).abs() <= 2.0 {
                v = 0.6;
            }
            pixels[r * N + c] = v.max(0.0);
        }
    }
    Bitmap::new(N, N, pixels).expect("built-in bitmap")
}
