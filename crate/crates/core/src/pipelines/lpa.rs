use crate::arfit::{fit_ar, innovation};
use crate::error::Result;
use crate::fir::{apply_fir, compose_demixer, FirFilter, LinearMap};
use crate::isa::{solve_isa, IcaConfig};
use crate::metrics::{amari_index, global_matrix};
use crate::model::ModelDims;
use crate::series::TimeSeries;

use super::{check_input, DeconvDiagnostics, DeconvResult, Method, Stopwatch};

/// Fits an AR model (orders `0..=2(L+1)`, chosen by SBC), runs ISA on the
/// innovation and composes the demixing filter. Leading transient samples of
/// `x` are dropped first. With `truth`, the global matrix and Amari index are
/// evaluated against its leading tap.
pub fn lpa_deconvolve(
    x: &TimeSeries,
    dims: &ModelDims,
    seed: u64,
    truth: Option<&FirFilter>,
) -> Result<DeconvResult> {
    check_input(x, dims, truth)?;
    let mut clock = Stopwatch::default();
    let x = x.steady()?;
    let ar = clock.stage("ar_fit", || fit_ar(&x, 0, dims.ar_order_cap()))?;
    let innov = clock.stage("innovation", || innovation(&x, &ar))?;
    let config = IcaConfig { seed, ..IcaConfig::default() };
    let isa = clock.stage("isa", || solve_isa(&innov, dims.d, dims.m, &config))?;
    let demixer = clock.stage("compose", || compose_demixer(&isa.w_isa, &isa.w_pca, &ar))?;
    let trimmed = ar.order().max(dims.l);
    let estimates = clock.stage("demix", || {
        let full = apply_fir(&demixer, &x)?;
        full.slice(trimmed, full.len() - trimmed)
    })?;
    let (g_matrix, amari) = match truth {
        Some(h) => {
            let (g, r) = clock.stage("evaluate", || {
                let h0 = LinearMap::new(h.tap(0).clone())?;
                let g = global_matrix(&isa.w_isa, &isa.w_pca, &h0, dims.d)?;
                let r = amari_index(&g)?;
                Ok((LinearMap::new(g.matrix().clone())?, r))
            })?;
            (Some(g), Some(r))
        }
        None => (None, None),
    };
    Ok(DeconvResult {
        method: Method::Lpa,
        dims: *dims,
        seed,
        estimates,
        trimmed,
        demixer,
        g_matrix,
        amari,
        timings: clock.finish(),
        diagnostics: DeconvDiagnostics {
            ar_order: Some(ar.order()),
            ar_regularized: ar.regularized(),
            sbc_curve: ar.sbc_curve().to_vec(),
            isa: isa.diagnostics,
            ..DeconvDiagnostics::default()
        },
    })
}
