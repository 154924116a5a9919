//! Block coordinate descent for the hierarchical interaction lasso.
//!
//! * [`solve_inner`]: plain cyclic updates, duality gap checked every cycle.
//! * [`solve_inner_optimized`]: gap checks gated by a max-difference proxy whose
//!   tolerance shrinks tenfold after each failed certification, with cheap
//!   sweeps over the active set in between.
//! * [`solve_working_set`]: outer loop that grows a working set of blocks ranked
//!   by their Gap-SAFE scores and certifies the full problem.
//! * [`solve_lasso_baseline`]: ordinary lasso on the same design.

mod block;
mod inner;
mod lasso;
mod working_set;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GessoError, Result};
use crate::model::{Coefficients, FitMeta, PenaltyPair};
use crate::par::Exec;

pub use block::BlockProblem;
pub use inner::{solve_inner, solve_inner_optimized};
pub use lasso::{lasso_lambda_max, lasso_path, solve_lasso_baseline, solve_lasso_warm, LassoFit};
pub use working_set::solve_working_set;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Duality-gap tolerance relative to `||y||^2 / 2n`.
    pub tol_gap: f64,
    pub max_iter_outer: usize,
    /// Cap on coordinate descent cycles per inner solve.
    pub max_iter_inner: usize,
    pub ws_init_size: usize,
    /// Grow a working set instead of cycling over every block.
    pub use_working_set: bool,
    /// Drop blocks certified zero by the Gap-SAFE test.
    pub use_screening: bool,
    pub use_active_set: bool,
    pub use_adaptive_maxdiff: bool,
    pub materialize_gxe: bool,
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gap: 1e-4,
            max_iter_outer: 50,
            max_iter_inner: 10_000,
            ws_init_size: 10,
            use_working_set: true,
            use_screening: true,
            use_active_set: true,
            use_adaptive_maxdiff: true,
            materialize_gxe: false,
            exec: Exec::default(),
        }
    }
}

impl SolverConfig {
    /// Absolute gap threshold for `ds`.
    pub fn abs_tol(&self, ds: &Dataset) -> f64 {
        let scale = ds.y_norm_sq() / (2.0 * ds.n() as f64);
        self.tol_gap * scale.max(f64::EPSILON)
    }

    pub fn with_tol(mut self, tol_gap: f64) -> Self {
        self.tol_gap = tol_gap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_gap > 0.0 && self.tol_gap.is_finite()) {
            return Err(GessoError::InvalidArgument(format!(
                "tol_gap must be positive, got {}",
                self.tol_gap
            )));
        }
        if self.max_iter_outer == 0 || self.max_iter_inner == 0 || self.ws_init_size == 0 {
            return Err(GessoError::InvalidArgument(
                "iteration caps and ws_init_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The four algorithm configurations compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Cyclic block descent over all blocks, gap checked every cycle.
    Bcd,
    /// Working sets with plain cyclic inner solves.
    WorkingSet,
    /// Working sets with max-difference gated gap checks.
    WorkingSetMaxDiff,
    /// Working sets, max-difference gating and active-set sweeps.
    WorkingSetActiveSet,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Bcd,
        Variant::WorkingSet,
        Variant::WorkingSetMaxDiff,
        Variant::WorkingSetActiveSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bcd => "bcd",
            Variant::WorkingSet => "ws",
            Variant::WorkingSetMaxDiff => "ws+maxdiff",
            Variant::WorkingSetActiveSet => "ws+maxdiff+as",
        }
    }

    pub fn configure(self, base: &SolverConfig) -> SolverConfig {
        let mut cfg = base.clone();
        let (ws, md, act) = match self {
            Variant::Bcd => (false, false, false),
            Variant::WorkingSet => (true, false, false),
            Variant::WorkingSetMaxDiff => (true, true, false),
            Variant::WorkingSetActiveSet => (true, true, true),
        };
        cfg.use_working_set = ws;
        cfg.use_adaptive_maxdiff = md;
        cfg.use_active_set = act;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Coefficients,
    pub meta: FitMeta,
    pub pen: PenaltyPair,
}

/// Coefficients plus the residual `y - X beta`, kept consistent by every update.
#[derive(Debug, Clone)]
pub struct FitState {
    pub coef: Coefficients,
    pub resid: Vec<f64>,
}

impl FitState {
    pub fn zeros(ds: &Dataset) -> Self {
        Self {
            coef: Coefficients::zeros(ds.p()),
            resid: ds.y().to_vec(),
        }
    }

    /// Starts from `warm`, recomputing the residual once.
    pub fn from_coefficients(ds: &Dataset, warm: &Coefficients) -> Result<Self> {
        let resid = warm.residual(ds)?;
        Ok(Self {
            coef: warm.clone(),
            resid,
        })
    }
}

/// Exact minimization over block `i` with every other coefficient fixed.
/// Returns the new `(beta_g_plus, beta_g_minus, beta_gxe)` and updates the
/// residual.
pub fn block_update(ds: &Dataset, state: &mut FitState, pen: &PenaltyPair, i: usize) -> (f64, f64, f64) {
    block_step(ds, state, pen, i);
    (
        state.coef.beta_g_plus[i],
        state.coef.beta_g_minus[i],
        state.coef.beta_gxe[i],
    )
}

/// Block update returning the changes `(db, dt)` of the signed coefficients.
#[inline]
pub(crate) fn block_step(ds: &Dataset, state: &mut FitState, pen: &PenaltyPair, i: usize) -> (f64, f64) {
    let n = ds.n() as f64;
    let b_old = state.coef.beta_g(i);
    let t_old = state.coef.beta_gxe[i];
    let (ng, nv) = (ds.col_norm_g(i), ds.col_norm_gxe(i));
    let (dg, dv) = ds.block_dots(i, &state.resid);
    let cross = ds.cross(i);
    // inner products with the partial residual (block i removed)
    let g1 = (dg + ng * ng * b_old + cross * t_old) / n;
    let g2 = (dv + cross * b_old + nv * nv * t_old) / n;
    let pb = BlockProblem {
        a11: ng * ng / n,
        a12: cross / n,
        a22: nv * nv / n,
        g1,
        g2,
    };
    let (b, t) = pb.solve(pen);
    let (db, dt) = (b - b_old, t - t_old);
    if db != 0.0 || dt != 0.0 {
        ds.block_axpy(i, -db, -dt, &mut state.resid);
    }
    state.coef.set_block(i, b, t);
    (db, dt)
}

/// Exact joint minimization over the intercept and exposure effect.
pub fn unpenalized_update(ds: &Dataset, state: &mut FitState) -> (f64, f64) {
    unpenalized_on(ds, &mut state.resid, &mut state.coef.beta0, &mut state.coef.beta_e);
    (state.coef.beta0, state.coef.beta_e)
}

pub(crate) fn unpenalized_on(ds: &Dataset, resid: &mut [f64], beta0: &mut f64, beta_e: &mut f64) {
    let n = ds.n() as f64;
    let se = ds.e_sum();
    let see = ds.e_norm_sq();
    let sr: f64 = resid.iter().sum();
    let ser: f64 = resid.iter().zip(ds.e()).map(|(r, e)| r * e).sum();
    let det = n * see - se * se;
    let (d0, de) = if det > 1e-12 * n * see.max(f64::MIN_POSITIVE) {
        ((see * sr - se * ser) / det, (n * ser - se * sr) / det)
    } else {
        // exposure carries no variation beyond the intercept: pin beta_e to 0
        let de = -*beta_e;
        let shifted = sr - de * se;
        (shifted / n, de)
    };
    for (r, e) in resid.iter_mut().zip(ds.e()) {
        *r -= d0 + de * e;
    }
    *beta0 += d0;
    *beta_e += de;
}

/// Fits one penalty pair with the algorithm selected by `cfg`.
pub fn fit(ds: &Dataset, pen: &PenaltyPair, cfg: &SolverConfig, warm: Option<&Coefficients>) -> Result<FitResult> {
    cfg.validate()?;
    let ds = prepared(ds, cfg);
    if cfg.use_working_set {
        return solve_working_set(&ds, pen, cfg, warm);
    }
    let mut state = match warm {
        Some(w) => FitState::from_coefficients(&ds, w)?,
        None => FitState::zeros(&ds),
    };
    unpenalized_update(&ds, &mut state);
    let all: Vec<usize> = (0..ds.p()).collect();
    let meta = if cfg.use_adaptive_maxdiff {
        solve_inner_optimized(&ds, &mut state, pen, cfg, &all)
    } else {
        solve_inner(&ds, &mut state, pen, cfg, &all)
    };
    Ok(FitResult {
        coefficients: state.coef,
        meta,
        pen: *pen,
    })
}

pub(crate) fn prepared<'a>(ds: &'a Dataset, cfg: &SolverConfig) -> Cow<'a, Dataset> {
    if cfg.materialize_gxe && !ds.is_materialized() {
        Cow::Owned(ds.clone().with_materialized_gxe())
    } else {
        Cow::Borrowed(ds)
    }
}
