//! Dual point construction and the SAFE / Gap-SAFE sphere tests.
//!
//! A dual point is built from the current residuals by rescaling them into the
//! feasible region, choosing the per-block slack `delta` to widen the range of
//! admissible scales as much as possible. The resulting dual value gives the
//! duality gap, and the gap gives a ball that contains the dual optimum.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ZERO_NORM};
use crate::error::{GessoError, Result};
use crate::model::{dot, dual_value, Coefficients, DualPoint, PenaltyPair};
use crate::par::{self, Exec};

/// Euclidean ball guaranteed to contain the dual optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Per-block inner products with the ball center and the working-set score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenScores {
    /// `|c . G_i|`
    pub a: Vec<f64>,
    /// `|c . (G_i * E)|`
    pub b: Vec<f64>,
    /// Working-set score; `d[i] > radius` iff block `i` is safely discarded.
    pub d: Vec<f64>,
}

/// Output of the scaled projection of a residual direction.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    /// Feasible dual vector `scale * nu_dir`.
    pub nu: Vec<f64>,
    pub scale: f64,
    /// Slack for each block in the index set (same order).
    pub delta: Vec<f64>,
    pub dual: f64,
    /// `|nu_dir . G_i|` and `|nu_dir . (G_i * E)|` over the index set.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// `(y - X beta) / n`.
pub fn residual_dual(ds: &Dataset, b: &Coefficients) -> Result<Vec<f64>> {
    let n = ds.n() as f64;
    Ok(b.residual(ds)?.into_iter().map(|r| r / n).collect())
}

/// Removes the components of `nu` along the intercept and exposure columns.
/// Dual points must be orthogonal to both unpenalized columns.
pub(crate) fn orthogonalize(ds: &Dataset, nu: &mut [f64]) {
    let n = ds.n() as f64;
    let mean = nu.iter().sum::<f64>() / n;
    nu.iter_mut().for_each(|v| *v -= mean);
    let e_mean = ds.e_sum() / n;
    let e_c_sq = ds.e_norm_sq() - n * e_mean * e_mean;
    if e_c_sq > ZERO_NORM * ZERO_NORM * n {
        let proj: f64 = nu.iter().zip(ds.e()).map(|(v, e)| v * (e - e_mean)).sum::<f64>() / e_c_sq;
        for (v, e) in nu.iter_mut().zip(ds.e()) {
            *v -= proj * (e - e_mean);
        }
    }
}

/// Slack maximizing the admissible scale range for one block.
#[inline]
pub(crate) fn optimal_delta(a: f64, b: f64, pen: &PenaltyPair) -> f64 {
    if a + b <= 0.0 {
        return 0.0;
    }
    ((b * pen.lambda1 - a * pen.lambda2) / (a + b)).clamp(0.0, pen.lambda1)
}

/// Largest admissible `|scale|` for one block given its slack.
#[inline]
pub(crate) fn block_scale_bound(a: f64, b: f64, delta: f64, pen: &PenaltyPair) -> f64 {
    let m1 = if a > 0.0 { (pen.lambda1 - delta) / a } else { f64::INFINITY };
    let m2 = if b > 0.0 { (pen.lambda2 + delta) / b } else { f64::INFINITY };
    m1.min(m2).max(0.0)
}

/// Clamps the unconstrained maximizer `y.nu / (n ||nu||^2)` to `[-bound, bound]`.
#[inline]
fn clamp_scale(y: &[f64], nu: &[f64], bound: f64) -> f64 {
    let nn = nu.iter().map(|v| v * v).sum::<f64>();
    if nn == 0.0 {
        return 0.0;
    }
    let x = dot(y, nu) / (y.len() as f64 * nn);
    x.signum() * x.abs().min(bound)
}

/// Projects `nu_res` (already orthogonalized) onto the dual region restricted
/// to `blocks` (all blocks when `None`).
pub(crate) fn project_scaled(
    ds: &Dataset,
    nu_dir: &[f64],
    pen: &PenaltyPair,
    blocks: Option<&[usize]>,
    exec: Exec,
) -> Projection {
    let dots = |i: usize| {
        let (a, b) = ds.block_dots(i, nu_dir);
        (a.abs(), b.abs())
    };
    let pairs: Vec<(f64, f64)> = match blocks {
        Some(idx) => par::map_slice(exec, idx, ds.n(), |&i| dots(i)),
        None => par::map_range(exec, ds.p(), ds.n(), dots),
    };
    let mut bound = f64::INFINITY;
    let mut delta = Vec::with_capacity(pairs.len());
    let (mut a, mut b) = (Vec::with_capacity(pairs.len()), Vec::with_capacity(pairs.len()));
    for &(ai, bi) in &pairs {
        let d = optimal_delta(ai, bi, pen);
        bound = bound.min(block_scale_bound(ai, bi, d, pen));
        delta.push(d);
        a.push(ai);
        b.push(bi);
    }
    let scale = clamp_scale(ds.y(), nu_dir, bound);
    let nu: Vec<f64> = nu_dir.iter().map(|v| v * scale).collect();
    let dual = dual_value(ds.y(), &nu);
    Projection {
        nu,
        scale,
        delta,
        dual,
        a,
        b,
    }
}

/// Rescales the residual dual vector into the feasible region, choosing each
/// block's slack to maximize the admissible range of scales.
pub fn optimal_naive_projection(ds: &Dataset, nu_res: &[f64], pen: &PenaltyPair) -> Result<DualPoint> {
    if nu_res.len() != ds.n() {
        return Err(GessoError::Dimension("nu_res length differs from n".into()));
    }
    let mut dir = nu_res.to_vec();
    orthogonalize(ds, &mut dir);
    let proj = project_scaled(ds, &dir, pen, None, Exec::default());
    Ok(DualPoint {
        nu: proj.nu,
        delta: proj.delta,
    })
}

/// Rescaling with all slacks fixed at zero.
pub fn naive_projection(ds: &Dataset, nu_res: &[f64], pen: &PenaltyPair) -> Result<DualPoint> {
    if nu_res.len() != ds.n() {
        return Err(GessoError::Dimension("nu_res length differs from n".into()));
    }
    let mut dir = nu_res.to_vec();
    orthogonalize(ds, &mut dir);
    let mut bound = f64::INFINITY;
    for i in 0..ds.p() {
        let (a, b) = ds.block_dots(i, &dir);
        bound = bound.min(block_scale_bound(a.abs(), b.abs(), 0.0, pen));
    }
    let scale = clamp_scale(ds.y(), &dir, bound);
    Ok(DualPoint {
        nu: dir.iter().map(|v| v * scale).collect(),
        delta: vec![0.0; ds.p()],
    })
}

/// Ball centered at `y/n` with radius `||y/n - nu0||`.
pub fn safe_ball(ds: &Dataset, nu0: &DualPoint) -> Result<ScreenBall> {
    if nu0.nu.len() != ds.n() {
        return Err(GessoError::Dimension("dual point length differs from n".into()));
    }
    let n = ds.n() as f64;
    let center: Vec<f64> = ds.y().iter().map(|y| y / n).collect();
    let radius = center
        .iter()
        .zip(&nu0.nu)
        .map(|(c, v)| (c - v) * (c - v))
        .sum::<f64>()
        .sqrt();
    Ok(ScreenBall { center, radius })
}

/// Radius `sqrt(2 gap / n)`. The gap is floored at the rounding level of the
/// objective so a ball around an exact optimum never collapses to a point.
pub(crate) fn gap_radius(gap: f64, n: usize, scale: f64) -> Result<f64> {
    if gap < -1e-10 * (1.0 + scale.abs()) {
        return Err(GessoError::Infeasible(format!(
            "negative duality gap {gap:e}: dual point infeasible or objective inconsistent"
        )));
    }
    let floor = 4.0 * f64::EPSILON * (1.0 + scale.abs());
    Ok((2.0 * gap.max(floor) / n as f64).sqrt())
}

/// Gap-SAFE ball centered at `nu0` with radius `sqrt((2/n) Gap(b, nu0))`.
pub fn gap_ball(ds: &Dataset, b: &Coefficients, pen: &PenaltyPair, nu0: &DualPoint) -> Result<ScreenBall> {
    let primal = crate::model::primal_objective(ds, b, pen)?;
    let gap = crate::model::duality_gap(ds, b, pen, nu0)?;
    Ok(ScreenBall {
        center: nu0.nu.clone(),
        radius: gap_radius(gap, ds.n(), primal)?,
    })
}

/// Sphere test for block `i` given `|c.G_i|` and `|c.(G_i*E)|`.
#[inline]
pub(crate) fn safe_test(a: f64, b: f64, norm_g: f64, norm_gxe: f64, r: f64, pen: &PenaltyPair) -> bool {
    let lhs = (r * norm_gxe + b - pen.lambda2).max(0.0);
    lhs < pen.lambda1 - r * norm_g - a
}

/// Working-set score for block `i`: the largest radius at which [`safe_test`]
/// still discards the block, so `d > r` exactly when the test holds for `r`.
/// Blocks on the boundary of either dual constraint score near zero.
#[inline]
pub(crate) fn score(a: f64, b: f64, norm_g: f64, norm_gxe: f64, pen: &PenaltyPair) -> f64 {
    if norm_g <= ZERO_NORM {
        return f64::INFINITY;
    }
    let main = (pen.lambda1 - a) / norm_g;
    let joint = (pen.lambda1 + pen.lambda2 - a - b) / (norm_g + norm_gxe);
    main.min(joint)
}

/// `true` guarantees both coefficients of block `i` vanish at every optimum.
pub fn safe_discard(ds: &Dataset, ball: &ScreenBall, pen: &PenaltyPair, i: usize) -> bool {
    if ds.block_is_null(i) {
        return true;
    }
    let (a, b) = ds.block_dots(i, &ball.center);
    safe_test(
        a.abs(),
        b.abs(),
        ds.col_norm_g(i),
        ds.col_norm_gxe(i),
        ball.radius,
        pen,
    )
}

/// Scores for every block against `ball`.
pub fn ws_scores(ds: &Dataset, ball: &ScreenBall, pen: &PenaltyPair) -> ScreenScores {
    ws_scores_with(ds, ball, pen, Exec::default())
}

pub fn ws_scores_with(ds: &Dataset, ball: &ScreenBall, pen: &PenaltyPair, exec: Exec) -> ScreenScores {
    let rows = par::map_range(exec, ds.p(), ds.n(), |i| {
        let (a, b) = ds.block_dots(i, &ball.center);
        let (a, b) = (a.abs(), b.abs());
        (a, b, score(a, b, ds.col_norm_g(i), ds.col_norm_gxe(i), pen))
    });
    let mut out = ScreenScores {
        a: Vec::with_capacity(rows.len()),
        b: Vec::with_capacity(rows.len()),
        d: Vec::with_capacity(rows.len()),
    };
    for (a, b, d) in rows {
        out.a.push(a);
        out.b.push(b);
        out.d.push(d);
    }
    out
}
