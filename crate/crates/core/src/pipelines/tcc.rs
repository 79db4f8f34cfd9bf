use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fir::{apply_fir, FirFilter, LinearMap};
use crate::isa::{solve_isa, IcaConfig};
use crate::metrics::{amari_index, GlobalMatrix};
use crate::model::ModelDims;
use crate::series::TimeSeries;

use super::{check_input, DeconvDiagnostics, DeconvResult, Method, Stopwatch};

pub const MAX_STACKING_DEPTH: usize = 256;

/// Normalized lagged cross-covariance `‖E[y_a(t) y_b(t+δ)ᵀ]‖²_F / d` above
/// which `y_b` is taken to be a delayed copy of `y_a`. Whitened outputs give
/// one for an exact copy and about zero otherwise.
pub const LAG_AFFINITY_THRESHOLD: f64 = 0.5;

/// Smallest `L′ ≥ 1` with `D_x·L′ ≥ D_s·(L+L′)`.
pub fn stacking_depth(dims: &ModelDims) -> Result<usize> {
    let (dx, ds) = (dims.dx, dims.ds());
    if dx <= ds {
        return Err(Error::InfeasibleStacking(format!("D_x = {dx} does not exceed D_s = {ds}")));
    }
    let depth = (ds * dims.l).div_ceil(dx - ds).max(1);
    if depth > MAX_STACKING_DEPTH {
        return Err(Error::InfeasibleStacking(format!(
            "stacking depth {depth} exceeds {MAX_STACKING_DEPTH}"
        )));
    }
    debug_assert!(dx * depth >= ds * (dims.l + depth));
    Ok(depth)
}

/// `X(t) = [x(t); x(t−1); …; x(t−depth+1)]` for `t = depth−1, …, T−1`.
fn stack_lags(x: &TimeSeries, depth: usize) -> Result<TimeSeries> {
    let (dx, len) = (x.dim(), x.len());
    if len < depth + 1 {
        return Err(Error::InsufficientSamples { needed: depth + 1, available: len });
    }
    let n = len - depth + 1;
    let mut out = DMatrix::zeros(dx * depth, n);
    for i in 0..depth {
        out.view_mut((i * dx, 0), (dx, n))
            .copy_from(&x.values().columns(depth - 1 - i, n));
    }
    TimeSeries::new(out)
}

/// Block-Toeplitz mixing of the stacked problem: block `(i, j)` is `H_{j−i}`
/// (zero outside `0..=L`), mapping `[s(t); …; s(t−L−depth+1)]` to `X(t)`.
pub fn stacked_mixing(h: &FirFilter, depth: usize) -> DMatrix<f64> {
    let (dx, ds, l) = (h.rows(), h.cols(), h.degree());
    let mut out = DMatrix::zeros(dx * depth, ds * (l + depth));
    for i in 0..depth {
        for (k, tap) in h.taps().iter().enumerate() {
            out.view_mut((i * dx, (i + k) * ds), (dx, ds)).copy_from(tap);
        }
    }
    out
}

struct Selection {
    groups: Vec<usize>,
    resolved: bool,
}

/// Picks one lag-0 subspace per hidden component among the `k` estimated
/// stacked subspaces. Delayed copies of the same component show up as strong
/// lagged cross-covariance; within each chain of copies the member that no
/// other member leads is the most recent one.
fn select_lag_zero(y: &DMatrix<f64>, d: usize, m: usize, chain_len: usize) -> Selection {
    let k = y.nrows() / d;
    let n = y.ncols();
    let mut leads = DMatrix::from_element(k, k, false);
    for delta in 1..chain_len.min(n) {
        let cross = y.columns(0, n - delta) * y.columns(delta, n - delta).transpose() / (n - delta) as f64;
        for a in 0..k {
            for b in 0..k {
                if a != b && cross.view((a * d, b * d), (d, d)).norm_squared() / d as f64 > LAG_AFFINITY_THRESHOLD {
                    leads[(a, b)] = true;
                }
            }
        }
    }
    let lead_count: Vec<usize> = (0..k).map(|a| leads.row(a).iter().filter(|v| **v).count()).collect();
    let led_count: Vec<usize> = (0..k).map(|b| leads.column(b).iter().filter(|v| **v).count()).collect();

    // connected components of the "leads" relation
    let mut chain = (0..k).collect::<Vec<_>>();
    fn root(chain: &mut [usize], mut a: usize) -> usize {
        while chain[a] != a {
            chain[a] = chain[chain[a]];
            a = chain[a];
        }
        a
    }
    for a in 0..k {
        for b in 0..k {
            if leads[(a, b)] {
                let (ra, rb) = (root(&mut chain, a), root(&mut chain, b));
                chain[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let roots: Vec<usize> = (0..k).map(|a| root(&mut chain, a)).collect();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for a in 0..k {
        if roots[a] == a {
            chains.push((0..k).filter(|&b| roots[b] == a).collect());
        }
    }

    let score = |a: usize| (lead_count[a] as i64 - led_count[a] as i64, std::cmp::Reverse(a));
    let resolved = chains.len() == m
        && chains.iter().all(|c| c.len() == chain_len && c.iter().filter(|&&a| led_count[a] == 0).count() == 1);
    let mut groups: Vec<usize> = if resolved {
        chains
            .iter()
            .map(|c| *c.iter().find(|&&a| led_count[a] == 0).expect("checked above"))
            .collect()
    } else {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&a| std::cmp::Reverse(score(a)));
        let mut picked: Vec<usize> = Vec::with_capacity(m);
        for &a in &order {
            if picked.len() < m && !picked.iter().any(|&p| roots[p] == roots[a]) {
                picked.push(a);
            }
        }
        for &a in &order {
            if picked.len() < m && !picked.contains(&a) {
                picked.push(a);
            }
        }
        picked
    };
    groups.sort_unstable();
    Selection { groups, resolved }
}

fn block_rows(m: &DMatrix<f64>, groups: &[usize], d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(groups.len() * d, m.ncols());
    for (i, &g) in groups.iter().enumerate() {
        out.rows_mut(i * d, d).copy_from(&m.rows(g * d, d));
    }
    out
}

/// Temporal concatenation baseline: stacks `L′` lags of `x` so the stacked
/// mixture is an undercomplete instantaneous mixture of `M·(L+L′)` independent
/// components, solves ISA on it and keeps the `M` lag-0 subspaces.
///
/// With `truth`, `amari` is computed on the selected rows restricted to the
/// lag-0 source columns; the Amari index of the full stacked global matrix is
/// reported in the diagnostics.
pub fn tcc_deconvolve(
    x: &TimeSeries,
    dims: &ModelDims,
    seed: u64,
    truth: Option<&FirFilter>,
) -> Result<DeconvResult> {
    check_input(x, dims, truth)?;
    let mut clock = Stopwatch::default();
    let (d, ds, dx) = (dims.d, dims.ds(), dims.dx);
    let depth = stacking_depth(dims)?;
    let chain_len = dims.l + depth;
    let hidden = ds * chain_len;
    if dx * depth < hidden {
        return Err(Error::InfeasibleStacking(format!(
            "observed {} < hidden {hidden}",
            dx * depth
        )));
    }
    let x = x.steady()?;
    let stacked = clock.stage("stack", || stack_lags(&x, depth))?;
    let config = IcaConfig { seed, ..IcaConfig::default() };
    let isa = clock.stage("isa", || solve_isa(&stacked, d, dims.m * chain_len, &config))?;
    let selection = clock.stage("select", || {
        Ok(select_lag_zero(isa.components.values(), d, dims.m, chain_len))
    })?;
    let front = isa.w_isa.matrix() * isa.w_pca.matrix();
    let w_sel = block_rows(&front, &selection.groups, d);
    let demixer = FirFilter::new(
        (0..depth).map(|i| w_sel.columns(i * dx, dx).into_owned()).collect(),
    )?;
    let trimmed = (dims.l + depth).min(x.len() - 1);
    let estimates = clock.stage("demix", || {
        let full = apply_fir(&demixer, &x)?;
        full.slice(trimmed, full.len() - trimmed)
    })?;

    let (g_matrix, amari, stacked_amari) = match truth {
        Some(h) => {
            let (g, r, r_stacked) = clock.stage("evaluate", || {
                let g_stack = &front * stacked_mixing(h, depth);
                let r_stacked = amari_index(&GlobalMatrix::new(g_stack.clone(), d)?)?;
                let g_sel = block_rows(&g_stack, &selection.groups, d).columns(0, ds).into_owned();
                let r = amari_index(&GlobalMatrix::new(g_sel.clone(), d)?)?;
                Ok((LinearMap::new(g_sel)?, r, r_stacked))
            })?;
            (Some(g), Some(r), Some(r_stacked))
        }
        None => (None, None, None),
    };

    Ok(DeconvResult {
        method: Method::Tcc,
        dims: *dims,
        seed,
        estimates,
        trimmed,
        demixer,
        g_matrix,
        amari,
        timings: clock.finish(),
        diagnostics: DeconvDiagnostics {
            stacking_depth: Some(depth),
            selected_components: selection.groups,
            stacked_amari,
            lag_chains_resolved: Some(selection.resolved),
            isa: isa.diagnostics,
            ..DeconvDiagnostics::default()
        },
    })
}
