use crate::dataset::Dataset;
use crate::model::{FitMeta, PenaltyPair};
use crate::screening::{gap_radius, orthogonalize, project_scaled, Projection};

use super::{block_step, unpenalized_update, FitState, SolverConfig};

pub(crate) struct GapCheck {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub proj: Projection,
}

fn block_penalty(state: &FitState, pen: &PenaltyPair, i: usize) -> f64 {
    let t = state.coef.beta_gxe[i].abs();
    pen.lambda1 * state.coef.beta_g(i).abs().max(t) + pen.lambda2 * t
}

/// Penalty of every block outside `set` (which must be sorted).
pub(crate) fn outside_penalty(state: &FitState, pen: &PenaltyPair, set: &[usize]) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    for i in 0..state.coef.p() {
        if k < set.len() && set[k] == i {
            k += 1;
            continue;
        }
        if state.coef.beta_gxe[i] != 0.0 || state.coef.beta_g(i) != 0.0 {
            s += block_penalty(state, pen, i);
        }
    }
    s
}

/// Duality gap of the problem restricted to `blocks` (the full problem when
/// `None`). `outside` is the fixed penalty of the blocks left out.
pub(crate) fn check_gap(
    ds: &Dataset,
    state: &FitState,
    pen: &PenaltyPair,
    blocks: Option<&[usize]>,
    outside: f64,
    cfg: &SolverConfig,
) -> GapCheck {
    let n = ds.n() as f64;
    let mut dir: Vec<f64> = state.resid.iter().map(|r| r / n).collect();
    orthogonalize(ds, &mut dir);
    let proj = project_scaled(ds, &dir, pen, blocks, cfg.exec);
    let pen_sum: f64 = match blocks {
        Some(set) => set.iter().map(|&i| block_penalty(state, pen, i)).sum(),
        None => (0..ds.p()).map(|i| block_penalty(state, pen, i)).sum(),
    };
    let loss = state.resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    let primal = loss + pen_sum + outside;
    let dual = proj.dual;
    GapCheck {
        primal,
        dual,
        gap: primal - dual,
        proj,
    }
}

fn restricted<'a>(ds: &Dataset, set: &'a [usize]) -> Option<&'a [usize]> {
    if set.len() == ds.p() {
        None
    } else {
        Some(set)
    }
}

fn new_meta(tol: f64, ws: usize) -> FitMeta {
    FitMeta {
        primal: f64::NAN,
        dual: f64::NAN,
        gap: f64::INFINITY,
        tol_gap: tol,
        iters_outer: 0,
        iters_inner: 0,
        gap_checks: 0,
        ws_size_final: ws,
        converged: false,
        radii: Vec::new(),
    }
}

fn record(meta: &mut FitMeta, chk: &GapCheck, n: usize, full: bool) {
    meta.primal = chk.primal;
    meta.dual = chk.dual;
    meta.gap = chk.gap;
    meta.gap_checks += 1;
    if full {
        if let Ok(r) = gap_radius(chk.gap, n, chk.primal) {
            meta.radii.push(r);
        }
    }
}

/// Cyclic block updates over `index_set` (ascending order expected), with the
/// duality gap of the restricted problem checked before every cycle.
pub fn solve_inner(
    ds: &Dataset,
    state: &mut FitState,
    pen: &PenaltyPair,
    cfg: &SolverConfig,
    index_set: &[usize],
) -> FitMeta {
    let tol = cfg.abs_tol(ds);
    let blocks = restricted(ds, index_set);
    let outside = if blocks.is_some() {
        outside_penalty(state, pen, index_set)
    } else {
        0.0
    };
    let mut meta = new_meta(tol, index_set.len());
    for cycle in 0..=cfg.max_iter_inner {
        let chk = check_gap(ds, state, pen, blocks, outside, cfg);
        record(&mut meta, &chk, ds.n(), blocks.is_none());
        if chk.gap <= tol {
            meta.converged = true;
            break;
        }
        if cycle == cfg.max_iter_inner {
            break;
        }
        for &i in index_set {
            block_step(ds, state, pen, i);
        }
        unpenalized_update(ds, state);
        meta.iters_inner += 1;
    }
    meta
}

/// As [`solve_inner`], but the duality gap is only evaluated once the largest
/// weighted coefficient change of a cycle drops below an adaptive tolerance.
/// The tolerance starts at the gap tolerance and is divided by 10 after every
/// failed certification. Between full cycles, sweeps run over the blocks that
/// moved in the last full cycle when `cfg.use_active_set` is set.
pub fn solve_inner_optimized(
    ds: &Dataset,
    state: &mut FitState,
    pen: &PenaltyPair,
    cfg: &SolverConfig,
    index_set: &[usize],
) -> FitMeta {
    solve_inner_optimized_traced(ds, state, pen, cfg, index_set).0
}

/// Also returns the final proxy tolerance.
pub(crate) fn solve_inner_optimized_traced(
    ds: &Dataset,
    state: &mut FitState,
    pen: &PenaltyPair,
    cfg: &SolverConfig,
    index_set: &[usize],
) -> (FitMeta, f64) {
    let tol = cfg.abs_tol(ds);
    let blocks = restricted(ds, index_set);
    let outside = if blocks.is_some() {
        outside_penalty(state, pen, index_set)
    } else {
        0.0
    };
    let n = ds.n() as f64;
    let e_sq = ds.e_norm_sq();
    let mut meta = new_meta(tol, index_set.len());
    let mut eps = tol;
    let mut first = true;
    let mut cycles = 0usize;
    let mut active: Vec<usize> = Vec::with_capacity(index_set.len());

    let sweep = |state: &mut FitState, set: &[usize], active: Option<&mut Vec<usize>>| -> f64 {
        let mut max_diff = 0.0f64;
        let mut active = active;
        for &i in set {
            let (db, dt) = block_step(ds, state, pen, i);
            let ng = ds.col_norm_g(i);
            let nv = ds.col_norm_gxe(i);
            let diff = (db * db * ng * ng).max(dt * dt * nv * nv);
            max_diff = max_diff.max(diff);
            if diff > 0.0 {
                if let Some(a) = active.as_deref_mut() {
                    a.push(i);
                }
            }
        }
        let (b0, be) = (state.coef.beta0, state.coef.beta_e);
        unpenalized_update(ds, state);
        let d0 = state.coef.beta0 - b0;
        let de = state.coef.beta_e - be;
        max_diff.max(d0 * d0 * n).max(de * de * e_sq)
    };

    loop {
        let chk = check_gap(ds, state, pen, blocks, outside, cfg);
        record(&mut meta, &chk, ds.n(), blocks.is_none());
        if chk.gap <= tol {
            meta.converged = true;
            break;
        }
        if cycles >= cfg.max_iter_inner {
            break;
        }
        if !first {
            eps /= 10.0;
        }
        first = false;
        while cycles < cfg.max_iter_inner {
            active.clear();
            let max_diff = sweep(state, index_set, Some(&mut active));
            cycles += 1;
            if max_diff < eps {
                break;
            }
            if cfg.use_active_set && active.len() < index_set.len() {
                let act = active.clone();
                while cycles < cfg.max_iter_inner {
                    let md = sweep(state, &act, None);
                    cycles += 1;
                    if md < eps {
                        break;
                    }
                }
            }
        }
    }
    meta.iters_inner = cycles;
    (meta, eps)
}
