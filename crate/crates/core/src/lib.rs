//! Blind subspace deconvolution for the undercomplete case.
//!
//! An observation `x(t) = Σ_l H_l s(t−l)` with more channels than hidden
//! dimensions is reduced to an instantaneous ISA problem either by fitting an
//! AR model and separating its innovation ([`pipelines::lpa_deconvolve`]) or by
//! stacking lagged observations ([`pipelines::tcc_deconvolve`]). Quality is
//! measured with the normalized Amari index ([`metrics::amari_index`]).

mod codec;
pub mod error;

pub mod arfit;
pub mod datagen;
pub mod fir;
pub mod harness;
pub mod isa;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pipelines;
pub mod seed;
pub mod series;

pub use codec::FORMAT_VERSION;
pub use error::{Error, Result};
pub use fir::{FirFilter, LinearMap};
pub use model::{ModelDims, Partition};
pub use series::TimeSeries;
