//! Uniform distributions on three-dimensional geometric objects.

use std::f64::consts::TAU;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    CubeSurface,
    SphereSurface,
    OrthogonalSegments,
    TetrahedronWireframe,
    CylinderSurface,
    TorusSurface,
}

impl Shape {
    pub const ALL: [Shape; 6] = [
        Shape::CubeSurface,
        Shape::SphereSurface,
        Shape::OrthogonalSegments,
        Shape::TetrahedronWireframe,
        Shape::CylinderSurface,
        Shape::TorusSurface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::CubeSurface => "cube_surface",
            Shape::SphereSurface => "sphere_surface",
            Shape::OrthogonalSegments => "orthogonal_segments",
            Shape::TetrahedronWireframe => "tetrahedron_wireframe",
            Shape::CylinderSurface => "cylinder_surface",
            Shape::TorusSurface => "torus_surface",
        }
    }

    /// One point drawn uniformly (w.r.t. length or area) from the object.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> [f64; 3] {
        match self {
            Shape::CubeSurface => {
                let face = rng.random_range(0..6);
                let a = rng.random_range(-1.0..1.0);
                let b = rng.random_range(-1.0..1.0);
                let s = if face % 2 == 0 { 1.0 } else { -1.0 };
                match face / 2 {
                    0 => [s, a, b],
                    1 => [a, s, b],
                    _ => [a, b, s],
                }
            }
            Shape::SphereSurface => loop {
                let v: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-12 {
                    break [v[0] / n, v[1] / n, v[2] / n];
                }
            },
            Shape::OrthogonalSegments => {
                let axis = rng.random_range(0..3);
                let mut p = [0.0; 3];
                p[axis] = rng.random_range(-1.0..1.0);
                p
            }
            Shape::TetrahedronWireframe => {
                const V: [[f64; 3]; 4] = [
                    [1.0, 1.0, 1.0],
                    [1.0, -1.0, -1.0],
                    [-1.0, 1.0, -1.0],
                    [-1.0, -1.0, 1.0],
                ];
                const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
                let (a, b) = EDGES[rng.random_range(0..6)];
                let s: f64 = rng.random();
                [0, 1, 2].map(|k| V[a][k] + s * (V[b][k] - V[a][k]))
            }
            Shape::CylinderSurface => {
                let th = rng.random::<f64>() * TAU;
                [th.cos(), th.sin(), rng.random_range(-1.5..1.5)]
            }
            Shape::TorusSurface => {
                const MAJOR: f64 = 1.0;
                const MINOR: f64 = 0.4;
                loop {
                    let u = rng.random::<f64>() * TAU;
                    let v = rng.random::<f64>() * TAU;
                    // area element ∝ MAJOR + MINOR·cos v
                    let accept = (MAJOR + MINOR * v.cos()) / (MAJOR + MINOR);
                    if rng.random::<f64>() < accept {
                        let ring = MAJOR + MINOR * v.cos();
                        break [ring * u.cos(), ring * u.sin(), MINOR * v.sin()];
                    }
                }
            }
        }
    }

    /// `3 × len` raw samples.
    pub fn sample_block<R: Rng + ?Sized>(self, len: usize, rng: &mut R) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(3, len);
        for t in 0..len {
            let p = self.sample(rng);
            out.column_mut(t).copy_from_slice(&p);
        }
        out
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown shape {s:?}")))
    }
}
