use std::cmp::Ordering;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::model::{Coefficients, FitMeta, PenaltyPair};
use crate::screening::{gap_radius, safe_test, score};

use super::inner::check_gap;
use super::{
    prepared, solve_inner, solve_inner_optimized, unpenalized_update, FitResult, FitState, SolverConfig,
};

/// Working-set block coordinate descent.
///
/// Each outer iteration certifies the full problem with the duality gap. If
/// the certificate fails, every block is scored against the Gap-SAFE ball,
/// blocks certified zero are dropped (with `use_screening`), and the working
/// set is rebuilt: on the first pass from the nonzero blocks of the warm start
/// (or the `ws_init_size` best-scored blocks), afterwards by keeping the
/// previous set and doubling its size with the next best-scored blocks.
pub fn solve_working_set(
    ds: &Dataset,
    pen: &PenaltyPair,
    cfg: &SolverConfig,
    warm: Option<&Coefficients>,
) -> Result<FitResult> {
    cfg.validate()?;
    let ds = prepared(ds, cfg);
    let ds = ds.as_ref();
    let p = ds.p();
    let n = ds.n();
    let tol = cfg.abs_tol(ds);

    let mut state = match warm {
        Some(w) => FitState::from_coefficients(ds, w)?,
        None => FitState::zeros(ds),
    };
    unpenalized_update(ds, &mut state);

    let mut meta = FitMeta {
        primal: f64::NAN,
        dual: f64::NAN,
        gap: f64::INFINITY,
        tol_gap: tol,
        iters_outer: 0,
        iters_inner: 0,
        gap_checks: 0,
        ws_size_final: 0,
        converged: false,
        radii: Vec::new(),
    };
    let mut ws: Vec<usize> = Vec::new();
    let mut ws_size = 0usize;
    let mut screened = vec![false; p];

    for outer in 0..=cfg.max_iter_outer {
        let chk = check_gap(ds, &state, pen, None, 0.0, cfg);
        meta.iters_outer += 1;
        meta.gap_checks += 1;
        meta.primal = chk.primal;
        meta.dual = chk.dual;
        meta.gap = chk.gap;
        let radius = gap_radius(chk.gap, n, chk.primal)?;
        meta.radii.push(radius);
        if chk.gap <= tol {
            meta.converged = true;
            break;
        }
        if outer == cfg.max_iter_outer {
            break;
        }

        // the ball center is scale * direction, so its inner products are rescaled
        let s = chk.proj.scale.abs();
        let mut d: Vec<f64> = (0..p)
            .map(|i| {
                score(
                    s * chk.proj.a[i],
                    s * chk.proj.b[i],
                    ds.col_norm_g(i),
                    ds.col_norm_gxe(i),
                    pen,
                )
            })
            .collect();

        if cfg.use_screening {
            for (i, done) in screened.iter_mut().enumerate() {
                let discard = ds.block_is_null(i)
                    || safe_test(
                        s * chk.proj.a[i],
                        s * chk.proj.b[i],
                        ds.col_norm_g(i),
                        ds.col_norm_gxe(i),
                        radius,
                        pen,
                    );
                if discard && !*done {
                    *done = true;
                    let b = state.coef.beta_g(i);
                    let t = state.coef.beta_gxe[i];
                    if b != 0.0 || t != 0.0 {
                        ds.block_axpy(i, b, t, &mut state.resid);
                        state.coef.set_block(i, 0.0, 0.0);
                    }
                }
            }
        }

        if outer == 0 {
            ws = state
                .coef
                .nonzero_blocks(0.0)
                .into_iter()
                .filter(|&i| !screened[i])
                .collect();
            if ws.is_empty() {
                ws = smallest(&d, &screened, cfg.ws_init_size.min(p));
            }
            ws_size = ws.len();
        } else {
            for &i in &ws {
                d[i] = f64::NEG_INFINITY;
            }
            ws_size = (2 * ws_size).max(1).min(p);
            ws = smallest(&d, &screened, ws_size);
        }
        ws.sort_unstable();
        meta.ws_size_final = ws.len();

        let inner = if cfg.use_adaptive_maxdiff {
            solve_inner_optimized(ds, &mut state, pen, cfg, &ws)
        } else {
            solve_inner(ds, &mut state, pen, cfg, &ws)
        };
        meta.iters_inner += inner.iters_inner;
        meta.gap_checks += inner.gap_checks;
    }

    Ok(FitResult {
        coefficients: state.coef,
        meta,
        pen: *pen,
    })
}

/// Indices of the `k` smallest scores among unscreened blocks; ties go to the
/// lower index.
fn smallest(d: &[f64], screened: &[bool], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).filter(|&i| !screened[i]).collect();
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &usize, b: &usize| -> Ordering { d[*a].total_cmp(&d[*b]).then(a.cmp(b)) };
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx
}
