//! End-to-end undercomplete deconvolution: linear prediction followed by ISA
//! (LPA), and temporal concatenation followed by ISA (TCC).

mod lpa;
mod tcc;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fir::{FirFilter, LinearMap};
use crate::isa::IsaDiagnostics;
use crate::model::ModelDims;
use crate::series::TimeSeries;

pub use lpa::lpa_deconvolve;
pub use tcc::{stacked_mixing, stacking_depth, tcc_deconvolve, LAG_AFFINITY_THRESHOLD, MAX_STACKING_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lpa,
    Tcc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lpa => "LPA",
            Method::Tcc => "TCC",
        }
    }

    pub fn run(
        self,
        x: &TimeSeries,
        dims: &ModelDims,
        seed: u64,
        truth: Option<&FirFilter>,
    ) -> Result<DeconvResult> {
        match self {
            Method::Lpa => lpa_deconvolve(x, dims, seed, truth),
            Method::Tcc => tcc_deconvolve(x, dims, seed, truth),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lpa" => Ok(Method::Lpa),
            "tcc" => Ok(Method::Tcc),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Default)]
pub(crate) struct Stopwatch {
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    /// Runs `f`, records its wall time and tags any error with the stage name.
    pub(crate) fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.stages.push(StageTiming { stage: stage.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub(crate) fn finish(self) -> Vec<StageTiming> {
        self.stages
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeconvDiagnostics {
    /// Selected AR order (LPA only).
    pub ar_order: Option<usize>,
    pub ar_regularized: bool,
    pub sbc_curve: Vec<(usize, f64)>,
    /// Stacking depth `L′` (TCC only).
    pub stacking_depth: Option<usize>,
    /// Stacked components kept as lag-0 estimates, in output order (TCC only).
    pub selected_components: Vec<usize>,
    /// Amari index of the full stacked global matrix (TCC with ground truth).
    pub stacked_amari: Option<f64>,
    /// Whether lag chains were resolved without falling back to ranking.
    pub lag_chains_resolved: Option<bool>,
    pub isa: IsaDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconvResult {
    pub method: Method,
    pub dims: ModelDims,
    pub seed: u64,
    /// `D_s × (T − trimmed)` source estimate.
    pub estimates: TimeSeries,
    /// Number of leading samples dropped from `estimates`.
    pub trimmed: usize,
    pub demixer: FirFilter,
    /// `D_s × D_s` global matrix, when the mixing filter was supplied.
    pub g_matrix: Option<LinearMap>,
    pub amari: Option<f64>,
    pub timings: Vec<StageTiming>,
    pub diagnostics: DeconvDiagnostics,
}

/// JSON-friendly view of a run without the large arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub dims: ModelDims,
    pub seed: u64,
    pub amari: Option<f64>,
    pub trimmed: usize,
    pub demixer_taps: usize,
    pub timings: Vec<StageTiming>,
    pub diagnostics: DeconvDiagnostics,
}

impl DeconvResult {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            method: self.method,
            dims: self.dims,
            seed: self.seed,
            amari: self.amari,
            trimmed: self.trimmed,
            demixer_taps: self.demixer.taps().len(),
            timings: self.timings.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

fn check_input(x: &TimeSeries, dims: &ModelDims, truth: Option<&FirFilter>) -> Result<()> {
    dims.validate()?;
    crate::error::check_dim("observation channels", dims.dx, x.dim())?;
    if let Some(h) = truth {
        crate::error::check_dim("mixing filter rows", dims.dx, h.rows())?;
        crate::error::check_dim("mixing filter columns", dims.ds(), h.cols())?;
        crate::error::check_dim("mixing filter taps", dims.l + 1, h.taps().len())?;
    }
    Ok(())
}
