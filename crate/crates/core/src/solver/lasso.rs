//! Ordinary lasso on `[G, G*E]` with the intercept and exposure unpenalized,
//! used as the selection baseline.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GessoError, Result};
use crate::model::FitMeta;
use crate::par;
use crate::screening::orthogonalize;

use super::block::soft;
use super::{prepared, unpenalized_on, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub lambda: f64,
    pub beta0: f64,
    pub beta_e: f64,
    pub beta_g: Vec<f64>,
    pub beta_gxe: Vec<f64>,
    pub meta: FitMeta,
}

struct LassoState {
    beta0: f64,
    beta_e: f64,
    beta_g: Vec<f64>,
    beta_gxe: Vec<f64>,
    resid: Vec<f64>,
}

/// Smallest penalty at which every penalized coefficient is zero.
pub fn lasso_lambda_max(ds: &Dataset) -> f64 {
    let mut resid = ds.y().to_vec();
    let (mut b0, mut be) = (0.0, 0.0);
    unpenalized_on(ds, &mut resid, &mut b0, &mut be);
    let n = ds.n() as f64;
    (0..ds.p())
        .map(|i| {
            let (a, b) = ds.block_dots(i, &resid);
            a.abs().max(b.abs()) / n
        })
        .fold(0.0, f64::max)
}

/// Lasso fit at one penalty, certified by the duality gap.
pub fn solve_lasso_baseline(ds: &Dataset, lambda: f64, cfg: &SolverConfig) -> Result<LassoFit> {
    solve_lasso_warm(ds, lambda, cfg, None)
}

/// Warm-started lasso fits along a decreasing sequence of penalties.
pub fn lasso_path(ds: &Dataset, lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<LassoFit>> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let fit = solve_lasso_warm(ds, l, cfg, out.last())?;
        out.push(fit);
    }
    Ok(out)
}

pub fn solve_lasso_warm(ds: &Dataset, lambda: f64, cfg: &SolverConfig, warm: Option<&LassoFit>) -> Result<LassoFit> {
    cfg.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GessoError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let ds = prepared(ds, cfg);
    let ds = ds.as_ref();
    let (n, p) = (ds.n(), ds.p());
    let nf = n as f64;
    let mut st = LassoState {
        beta0: 0.0,
        beta_e: 0.0,
        beta_g: vec![0.0; p],
        beta_gxe: vec![0.0; p],
        resid: ds.y().to_vec(),
    };
    if let Some(w) = warm {
        if w.beta_g.len() != p {
            return Err(GessoError::Dimension("warm start has wrong length".into()));
        }
        st.beta0 = w.beta0;
        st.beta_e = w.beta_e;
        st.beta_g = w.beta_g.clone();
        st.beta_gxe = w.beta_gxe.clone();
        for (r, e) in st.resid.iter_mut().zip(ds.e()) {
            *r -= st.beta0 + st.beta_e * e;
        }
        for i in 0..p {
            if st.beta_g[i] != 0.0 || st.beta_gxe[i] != 0.0 {
                ds.block_axpy(i, -st.beta_g[i], -st.beta_gxe[i], &mut st.resid);
            }
        }
    }
    unpenalized_on(ds, &mut st.resid, &mut st.beta0, &mut st.beta_e);

    let tol = cfg.abs_tol(ds);
    let mut meta = FitMeta {
        primal: f64::NAN,
        dual: f64::NAN,
        gap: f64::INFINITY,
        tol_gap: tol,
        iters_outer: 1,
        iters_inner: 0,
        gap_checks: 0,
        ws_size_final: p,
        converged: false,
        radii: Vec::new(),
    };
    for cycle in 0..=cfg.max_iter_inner {
        let (primal, dual) = lasso_gap(ds, &st, lambda, cfg);
        meta.gap_checks += 1;
        meta.primal = primal;
        meta.dual = dual;
        meta.gap = primal - dual;
        if meta.gap <= tol {
            meta.converged = true;
            break;
        }
        if cycle == cfg.max_iter_inner {
            break;
        }
        for i in 0..p {
            let (dg, dv) = ds.block_dots(i, &st.resid);
            let ng2 = ds.col_norm_g(i).powi(2);
            let nv2 = ds.col_norm_gxe(i).powi(2);
            let cross = ds.cross(i);
            let b_old = st.beta_g[i];
            let b = if ng2 > 0.0 {
                soft((dg + ng2 * b_old) / nf, lambda) / (ng2 / nf)
            } else {
                0.0
            };
            let db = b - b_old;
            let dv = dv - cross * db;
            let t_old = st.beta_gxe[i];
            let t = if nv2 > 0.0 {
                soft((dv + nv2 * t_old) / nf, lambda) / (nv2 / nf)
            } else {
                0.0
            };
            let dt = t - t_old;
            if db != 0.0 || dt != 0.0 {
                ds.block_axpy(i, -db, -dt, &mut st.resid);
            }
            st.beta_g[i] = b;
            st.beta_gxe[i] = t;
        }
        unpenalized_on(ds, &mut st.resid, &mut st.beta0, &mut st.beta_e);
        meta.iters_inner += 1;
    }
    Ok(LassoFit {
        lambda,
        beta0: st.beta0,
        beta_e: st.beta_e,
        beta_g: st.beta_g,
        beta_gxe: st.beta_gxe,
        meta,
    })
}

fn lasso_gap(ds: &Dataset, st: &LassoState, lambda: f64, cfg: &SolverConfig) -> (f64, f64) {
    let n = ds.n() as f64;
    let loss = st.resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    let l1: f64 = st.beta_g.iter().chain(&st.beta_gxe).map(|b| b.abs()).sum();
    let primal = loss + lambda * l1;
    let mut dir: Vec<f64> = st.resid.iter().map(|r| r / n).collect();
    orthogonalize(ds, &mut dir);
    let max_corr = par::map_range(cfg.exec, ds.p(), ds.n(), |i| {
        let (a, b) = ds.block_dots(i, &dir);
        a.abs().max(b.abs())
    })
    .into_iter()
    .fold(0.0, f64::max);
    let nn: f64 = dir.iter().map(|v| v * v).sum();
    let scale = if nn == 0.0 {
        0.0
    } else {
        let x: f64 = ds.y().iter().zip(&dir).map(|(y, v)| y * v).sum::<f64>() / (n * nn);
        let bound = if max_corr > 0.0 { lambda / max_corr } else { f64::INFINITY };
        x.signum() * x.abs().min(bound)
    };
    let nu_sq = scale * scale * nn;
    let y_nu = scale * ds.y().iter().zip(&dir).map(|(y, v)| y * v).sum::<f64>();
    (primal, y_nu - 0.5 * n * nu_sq)
}
