//! Coefficients, penalties, dual points, and the primal/dual objectives that
//! every solver result is measured against.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GessoError, Result};

/// The two regularization strengths: `lambda1` on the per-block max norm and
/// `lambda2` on the interaction magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltyPair {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(lambda1) || !ok(lambda2) {
            return Err(GessoError::InvalidArgument(format!(
                "penalties must be finite and positive, got ({lambda1}, {lambda2})"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// Feasibility slack used by every dual check.
    pub fn tol_feas(&self) -> f64 {
        1e-10 * (1.0 + self.lambda1 + self.lambda2)
    }
}

/// Model coefficients in the split parameterization `beta_g = plus - minus`
/// with `|beta_gxe[i]| <= plus[i] + minus[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub beta0: f64,
    pub beta_e: f64,
    pub beta_g_plus: Vec<f64>,
    pub beta_g_minus: Vec<f64>,
    pub beta_gxe: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Self {
            beta0: 0.0,
            beta_e: 0.0,
            beta_g_plus: vec![0.0; p],
            beta_g_minus: vec![0.0; p],
            beta_gxe: vec![0.0; p],
        }
    }

    /// Builds the split representation from signed main effects, choosing the
    /// tightest `plus + minus = max(|beta_g|, |beta_gxe|)`.
    pub fn from_effects(beta0: f64, beta_e: f64, beta_g: &[f64], beta_gxe: &[f64]) -> Result<Self> {
        if beta_g.len() != beta_gxe.len() {
            return Err(GessoError::Dimension(
                "main effect and interaction vectors differ in length".into(),
            ));
        }
        let mut c = Self::zeros(beta_g.len());
        c.beta0 = beta0;
        c.beta_e = beta_e;
        for i in 0..beta_g.len() {
            c.set_block(i, beta_g[i], beta_gxe[i]);
        }
        Ok(c)
    }

    pub fn p(&self) -> usize {
        self.beta_gxe.len()
    }

    /// Signed main effect `plus - minus`.
    #[inline]
    pub fn beta_g(&self, i: usize) -> f64 {
        self.beta_g_plus[i] - self.beta_g_minus[i]
    }

    pub fn main_effects(&self) -> Vec<f64> {
        (0..self.p()).map(|i| self.beta_g(i)).collect()
    }

    /// Writes block `i` from a signed main effect and interaction.
    #[inline]
    pub(crate) fn set_block(&mut self, i: usize, b: f64, t: f64) {
        let m = b.abs().max(t.abs());
        self.beta_g_plus[i] = 0.5 * (m + b);
        self.beta_g_minus[i] = 0.5 * (m - b);
        self.beta_gxe[i] = t;
    }

    pub fn satisfies_hierarchy(&self, tol: f64) -> bool {
        (0..self.p()).all(|i| {
            self.beta_g_plus[i] >= 0.0
                && self.beta_g_minus[i] >= 0.0
                && self.beta_gxe[i].abs() <= self.beta_g_plus[i] + self.beta_g_minus[i] + tol
        })
    }

    /// Blocks with either coefficient above `threshold` in magnitude.
    pub fn nonzero_blocks(&self, threshold: f64) -> Vec<usize> {
        (0..self.p())
            .filter(|&i| self.beta_g(i).abs() > threshold || self.beta_gxe[i].abs() > threshold)
            .collect()
    }

    pub fn n_nonzero_gxe(&self, threshold: f64) -> usize {
        self.beta_gxe.iter().filter(|b| b.abs() > threshold).count()
    }

    pub fn linear_predictor(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.check_dims(ds)?;
        let mut xb = vec![self.beta0; ds.n()];
        for (v, &e) in xb.iter_mut().zip(ds.e()) {
            *v += self.beta_e * e;
        }
        for i in 0..ds.p() {
            let b = self.beta_g(i);
            let t = self.beta_gxe[i];
            if b != 0.0 || t != 0.0 {
                ds.block_axpy(i, b, t, &mut xb);
            }
        }
        Ok(xb)
    }

    /// `y - X beta`.
    pub fn residual(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let xb = self.linear_predictor(ds)?;
        Ok(ds.y().iter().zip(&xb).map(|(y, f)| y - f).collect())
    }

    fn check_dims(&self, ds: &Dataset) -> Result<()> {
        let p = ds.p();
        if self.beta_g_plus.len() != p || self.beta_g_minus.len() != p || self.beta_gxe.len() != p {
            return Err(GessoError::Dimension(format!(
                "coefficients have length {} but dataset has p = {p}",
                self.beta_gxe.len()
            )));
        }
        let finite = self.beta0.is_finite()
            && self.beta_e.is_finite()
            && self.beta_g_plus.iter().chain(&self.beta_g_minus).chain(&self.beta_gxe).all(|v| v.is_finite());
        if !finite {
            return Err(GessoError::NonFinite("coefficients".into()));
        }
        Ok(())
    }
}

/// A candidate dual solution: `nu` over observations and `delta` over blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub nu: Vec<f64>,
    pub delta: Vec<f64>,
}

impl DualPoint {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            nu: vec![0.0; n],
            delta: vec![0.0; p],
        }
    }

    /// Checks membership in the dual feasible region, including orthogonality to
    /// the unpenalized intercept and exposure columns.
    pub fn check_feasible(&self, ds: &Dataset, pen: &PenaltyPair) -> Result<()> {
        if self.nu.len() != ds.n() || self.delta.len() != ds.p() {
            return Err(GessoError::Dimension("dual point dimensions".into()));
        }
        let tol = pen.tol_feas();
        let nu_norm = norm(&self.nu);
        let ortho_tol = 1e-9 * (1.0 + nu_norm * ((ds.n() as f64).sqrt() + ds.e_norm_sq().sqrt()));
        let s1: f64 = self.nu.iter().sum();
        let se: f64 = self.nu.iter().zip(ds.e()).map(|(a, b)| a * b).sum();
        if s1.abs() > ortho_tol || se.abs() > ortho_tol {
            return Err(GessoError::Infeasible(format!(
                "nu is not orthogonal to the unpenalized columns ({s1:e}, {se:e})"
            )));
        }
        for i in 0..ds.p() {
            let d = self.delta[i];
            if !(d >= -tol && d <= pen.lambda1 + tol) {
                return Err(GessoError::Infeasible(format!("delta[{i}] = {d} outside [0, lambda1]")));
            }
            let (a, b) = ds.block_dots(i, &self.nu);
            if a.abs() > pen.lambda1 - d + tol {
                return Err(GessoError::Infeasible(format!(
                    "|nu.G_{i}| = {} exceeds lambda1 - delta",
                    a.abs()
                )));
            }
            if b.abs() > pen.lambda2 + d + tol {
                return Err(GessoError::Infeasible(format!(
                    "|nu.(G_{i}*E)| = {} exceeds lambda2 + delta",
                    b.abs()
                )));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, ds: &Dataset, pen: &PenaltyPair) -> bool {
        self.check_feasible(ds, pen).is_ok()
    }
}

/// Convergence summary attached to every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    /// Absolute gap threshold the fit was asked to reach.
    pub tol_gap: f64,
    pub iters_outer: usize,
    /// Coordinate descent cycles, full and active-set.
    pub iters_inner: usize,
    /// Number of duality-gap evaluations, full and restricted.
    pub gap_checks: usize,
    pub ws_size_final: usize,
    pub converged: bool,
    /// Gap-ball radii at each full-problem gap check, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
}

/// Result of a KKT-based discard test on one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KktDiscard {
    pub can_zero_g: bool,
    pub can_zero_gxe: bool,
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Penalty part of the objective, with the block max norm.
pub(crate) fn penalty_value(b: &Coefficients, pen: &PenaltyPair) -> f64 {
    let mut s = 0.0;
    for i in 0..b.p() {
        let t = b.beta_gxe[i].abs();
        s += pen.lambda1 * b.beta_g(i).abs().max(t) + pen.lambda2 * t;
    }
    s
}

/// Primal objective given a precomputed residual `y - X beta`.
pub(crate) fn primal_from_residual(resid: &[f64], b: &Coefficients, pen: &PenaltyPair) -> f64 {
    let n = resid.len() as f64;
    resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + penalty_value(b, pen)
}

/// `(1/2n)||y - X beta||^2 + lambda1 sum_i max(|beta_g|, |beta_gxe|) + lambda2 ||beta_gxe||_1`.
pub fn primal_objective(ds: &Dataset, b: &Coefficients, pen: &PenaltyPair) -> Result<f64> {
    let resid = b.residual(ds)?;
    Ok(primal_from_residual(&resid, b, pen))
}

/// Objective of the constrained split formulation, `lambda1 sum(plus + minus)`
/// in place of the max norm. Equal to [`primal_objective`] whenever
/// `plus + minus = max(|beta_g|, |beta_gxe|)` for every block.
pub fn relaxed_objective(ds: &Dataset, b: &Coefficients, pen: &PenaltyPair) -> Result<f64> {
    let resid = b.residual(ds)?;
    let n = ds.n() as f64;
    let mut s = resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    for i in 0..b.p() {
        s += pen.lambda1 * (b.beta_g_plus[i] + b.beta_g_minus[i]) + pen.lambda2 * b.beta_gxe[i].abs();
    }
    Ok(s)
}

/// `(n/2)(||y/n||^2 - ||y/n - nu||^2)`.
pub fn dual_objective(ds: &Dataset, nu: &[f64]) -> Result<f64> {
    if nu.len() != ds.n() {
        return Err(GessoError::Dimension(format!(
            "nu has length {} but n = {}",
            nu.len(),
            ds.n()
        )));
    }
    Ok(dual_value(ds.y(), nu))
}

/// Dual objective written as `y.nu - (n/2)||nu||^2`, which avoids the
/// cancellation of the two squared norms.
pub(crate) fn dual_value(y: &[f64], nu: &[f64]) -> f64 {
    let n = y.len() as f64;
    dot(y, nu) - 0.5 * n * nu.iter().map(|v| v * v).sum::<f64>()
}

/// Primal minus dual. The dual point must be feasible for `pen`.
pub fn duality_gap(ds: &Dataset, b: &Coefficients, pen: &PenaltyPair, dp: &DualPoint) -> Result<f64> {
    dp.check_feasible(ds, pen)?;
    Ok(primal_objective(ds, b, pen)? - dual_objective(ds, &dp.nu)?)
}

/// Strict KKT tests for block `i`: each flag means the corresponding
/// coefficient vanishes if `dp` is dual optimal.
pub fn kkt_discard_check(ds: &Dataset, pen: &PenaltyPair, dp: &DualPoint, i: usize) -> Result<KktDiscard> {
    if i >= ds.p() {
        return Err(GessoError::Dimension(format!("block {i} out of range")));
    }
    dp.check_feasible(ds, pen)?;
    let (a, b) = ds.block_dots(i, &dp.nu);
    Ok(KktDiscard {
        can_zero_g: a.abs() < pen.lambda1 - dp.delta[i],
        can_zero_gxe: b.abs() < pen.lambda2 + dp.delta[i],
    })
}
