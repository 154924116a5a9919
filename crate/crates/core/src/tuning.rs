//! Penalty grids, warm-started paths over the 2-D grid, K-fold
//! cross-validation and repeated-CV selection rates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GessoError, Result};
use crate::model::{Coefficients, PenaltyPair};
use crate::par;
use crate::solver::{fit, unpenalized_on, FitResult, SolverConfig};

/// Coefficients below this magnitude count as not selected.
pub const SELECTION_THRESHOLD: f64 = 1e-8;

/// Smallest common penalty `lambda1 = lambda2` at which the null model
/// (intercept and exposure only) is optimal.
///
/// With `nu` the null-model residual over `n`, `A_i = |nu.G_i|` and
/// `B_i = |nu.(G_i*E)|`, the null dual point is feasible at `(l, l)` iff
/// `A_i <= l` and `(A_i + B_i) / 2 <= l` for every block.
pub fn lambda_max(ds: &Dataset) -> f64 {
    let mut resid = ds.y().to_vec();
    let (mut b0, mut be) = (0.0, 0.0);
    unpenalized_on(ds, &mut resid, &mut b0, &mut be);
    let n = ds.n() as f64;
    (0..ds.p())
        .map(|i| {
            let (a, b) = ds.block_dots(i, &resid);
            let (a, b) = (a.abs() / n, b.abs() / n);
            a.max(0.5 * (a + b))
        })
        .fold(0.0, f64::max)
}

/// Logarithmically spaced values from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..k)
        .map(|j| (lh + (ll - lh) * j as f64 / (k - 1) as f64).exp())
        .collect()
}

/// One grid cell in traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub i1: usize,
    pub i2: usize,
    pub pen: PenaltyPair,
    /// Traversal position of the cell whose solution warm-starts this one.
    pub warm_from: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyGrid {
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub lambda_max: f64,
}

impl PenaltyGrid {
    pub fn from_values(lambda1_values: Vec<f64>, lambda2_values: Vec<f64>) -> Result<Self> {
        for v in [&lambda1_values, &lambda2_values] {
            if v.is_empty() {
                return Err(GessoError::InvalidArgument("grid axis is empty".into()));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(GessoError::InvalidArgument("grid values must be positive".into()));
            }
            if v.windows(2).any(|w| w[1] >= w[0]) {
                return Err(GessoError::InvalidArgument("grid values must strictly decrease".into()));
            }
        }
        let lambda_max = lambda1_values[0].max(lambda2_values[0]);
        Ok(Self {
            lambda1_values,
            lambda2_values,
            lambda_max,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.lambda1_values.len() * self.lambda2_values.len()
    }

    /// Traversal position of cell `(i1, i2)`.
    pub fn position(&self, i1: usize, i2: usize) -> usize {
        i1 * self.lambda2_values.len() + i2
    }

    /// Row-major sweep: for each `lambda1` (descending) `lambda2` runs
    /// descending, each cell warm-started from its predecessor in the row; the
    /// first cell of a row starts from the first cell of the previous row.
    pub fn cells(&self) -> Vec<GridCell> {
        let n2 = self.lambda2_values.len();
        let mut out = Vec::with_capacity(self.n_cells());
        for (i1, &l1) in self.lambda1_values.iter().enumerate() {
            for (i2, &l2) in self.lambda2_values.iter().enumerate() {
                let warm_from = match (i1, i2) {
                    (0, 0) => None,
                    (_, 0) => Some((i1 - 1) * n2),
                    _ => Some(i1 * n2 + i2 - 1),
                };
                out.push(GridCell {
                    i1,
                    i2,
                    pen: PenaltyPair {
                        lambda1: l1,
                        lambda2: l2,
                    },
                    warm_from,
                });
            }
        }
        out
    }
}

/// Logarithmic grids from `lambda_max` down to `eps_ratio * lambda_max`.
pub fn build_grid(ds: &Dataset, n1: usize, n2: usize, eps_ratio: f64) -> Result<PenaltyGrid> {
    if n1 == 0 || n2 == 0 {
        return Err(GessoError::InvalidArgument("grid sizes must be at least 1".into()));
    }
    if !(eps_ratio > 0.0 && eps_ratio < 1.0) {
        return Err(GessoError::InvalidArgument(format!(
            "eps_ratio must lie in (0, 1), got {eps_ratio}"
        )));
    }
    let mut lmax = lambda_max(ds);
    if lmax.is_nan() || lmax <= 1e-12 {
        lmax = 1.0;
    }
    let mut grid = PenaltyGrid::from_values(
        log_spaced(lmax, lmax * eps_ratio, n1),
        log_spaced(lmax, lmax * eps_ratio, n2),
    )?;
    grid.lambda_max = lmax;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub cell: GridCell,
    pub fit: FitResult,
}

/// Warm-started fits over every grid cell, in traversal order.
pub fn fit_path(ds: &Dataset, grid: &PenaltyGrid, cfg: &SolverConfig) -> Result<Vec<PathPoint>> {
    let mut out: Vec<PathPoint> = Vec::with_capacity(grid.n_cells());
    for cell in grid.cells() {
        let warm = cell.warm_from.map(|k| &out[k].fit.coefficients);
        let fit = fit(ds, &cell.pen, cfg, warm)?;
        out.push(PathPoint { cell, fit });
    }
    Ok(out)
}

/// Held-out mean squared error of `coef` on `ds`.
pub fn mse(ds: &Dataset, coef: &Coefficients) -> Result<f64> {
    let r = coef.residual(ds)?;
    Ok(r.iter().map(|v| v * v).sum::<f64>() / ds.n() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub all_converged: bool,
    /// Held-out MSE per cell in traversal order.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean held-out MSE per cell in traversal order.
    pub mean_loss: Vec<f64>,
    pub se_loss: Vec<f64>,
    pub best_cell: usize,
    pub best_pair: PenaltyPair,
    pub folds: Vec<FoldSummary>,
}

/// Seeded fold labels in `0..k`, balanced to within one observation.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % k;
    }
    folds
}

pub fn cross_validate(
    ds: &Dataset,
    grid: &PenaltyGrid,
    k: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<CvResult> {
    if k < 2 || k > ds.n() {
        return Err(GessoError::InvalidArgument(format!(
            "number of folds must lie in [2, n], got {k}"
        )));
    }
    let folds = fold_assignment(ds.n(), k, seed);
    cross_validate_with_folds(ds, grid, &folds, cfg)
}

/// Cross-validation with explicit fold labels (`folds[row]` in `0..k`).
pub fn cross_validate_with_folds(
    ds: &Dataset,
    grid: &PenaltyGrid,
    folds: &[usize],
    cfg: &SolverConfig,
) -> Result<CvResult> {
    if folds.len() != ds.n() {
        return Err(GessoError::Dimension("fold labels must cover every row".into()));
    }
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let tasks: Vec<usize> = (0..k).collect();
    let summaries = par::map_tasks(cfg.exec, tasks, |f| -> Result<FoldSummary> {
        let train: Vec<usize> = (0..ds.n()).filter(|&r| folds[r] != f).collect();
        let test: Vec<usize> = (0..ds.n()).filter(|&r| folds[r] == f).collect();
        let train_ds = ds.subset_rows(&train)?;
        let test_ds = ds.subset_rows(&test)?;
        let path = fit_path(&train_ds, grid, cfg)?;
        let losses = path
            .iter()
            .map(|pt| mse(&test_ds, &pt.fit.coefficients))
            .collect::<Result<Vec<_>>>()?;
        Ok(FoldSummary {
            fold: f,
            n_train: train.len(),
            n_test: test.len(),
            all_converged: path.iter().all(|pt| pt.fit.meta.converged),
            losses,
        })
    });
    let summaries = summaries.into_iter().collect::<Result<Vec<_>>>()?;

    let cells = grid.cells();
    let kf = summaries.len() as f64;
    let mut mean_loss = vec![0.0; cells.len()];
    let mut se_loss = vec![0.0; cells.len()];
    for c in 0..cells.len() {
        let m = summaries.iter().map(|s| s.losses[c]).sum::<f64>() / kf;
        let var = if summaries.len() > 1 {
            summaries.iter().map(|s| (s.losses[c] - m).powi(2)).sum::<f64>() / (kf - 1.0)
        } else {
            0.0
        };
        mean_loss[c] = m;
        se_loss[c] = (var / kf).sqrt();
    }
    let best_cell = best_cell(&mean_loss);
    Ok(CvResult {
        best_pair: cells[best_cell].pen,
        best_cell,
        mean_loss,
        se_loss,
        folds: summaries,
    })
}

/// Minimal loss; ties go to the earlier traversal position, i.e. larger
/// `lambda1`, then larger `lambda2`.
fn best_cell(loss: &[f64]) -> usize {
    let mut best = 0;
    for (c, &l) in loss.iter().enumerate() {
        if l < loss[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRates {
    pub runs: usize,
    /// Fraction of runs in which each main effect was selected.
    pub main: Vec<f64>,
    /// Fraction of runs in which each interaction was selected.
    pub interaction: Vec<f64>,
    /// Rank 1 is the most frequently selected interaction; ties share the
    /// smallest rank.
    pub interaction_rank: Vec<usize>,
    pub main_rank: Vec<usize>,
    pub best_pairs: Vec<PenaltyPair>,
}

/// Repeats `k`-fold cross-validation `runs` times with different fold seeds,
/// refits each run's best pair on the full data and counts selections.
pub fn selection_rates(
    ds: &Dataset,
    grid: &PenaltyGrid,
    k: usize,
    runs: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<SelectionRates> {
    if runs == 0 {
        return Err(GessoError::InvalidArgument("runs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..runs).map(|_| rng.random()).collect();
    let outcomes = par::map_tasks(cfg.exec, seeds, |s| -> Result<(PenaltyPair, Coefficients)> {
        let cv = cross_validate(ds, grid, k, cfg, s)?;
        let refit = fit(ds, &cv.best_pair, cfg, None)?;
        Ok((cv.best_pair, refit.coefficients))
    });
    let p = ds.p();
    let mut main = vec![0.0; p];
    let mut inter = vec![0.0; p];
    let mut best_pairs = Vec::with_capacity(runs);
    for o in outcomes {
        let (pair, coef) = o?;
        best_pairs.push(pair);
        for i in 0..p {
            if coef.beta_g(i).abs() > SELECTION_THRESHOLD {
                main[i] += 1.0;
            }
            if coef.beta_gxe[i].abs() > SELECTION_THRESHOLD {
                inter[i] += 1.0;
            }
        }
    }
    let r = runs as f64;
    main.iter_mut().for_each(|v| *v /= r);
    inter.iter_mut().for_each(|v| *v /= r);
    Ok(SelectionRates {
        runs,
        interaction_rank: competition_rank(&inter),
        main_rank: competition_rank(&main),
        main,
        interaction: inter,
        best_pairs,
    })
}

/// `1 + #{j : v[j] > v[i]}`.
pub fn competition_rank(v: &[f64]) -> Vec<usize> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    v.iter()
        .map(|x| 1 + sorted.partition_point(|s| s > x))
        .collect()
}
