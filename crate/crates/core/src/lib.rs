//! Hierarchical lasso for gene-environment interactions.
//!
//! The model selects main effects `G_i` and interactions `G_i * E` with a single
//! exposure `E`, penalizing each pair with `lambda1 max(|b_i|, |t_i|) +
//! lambda2 |t_i|` so that an interaction only enters alongside its main effect.
//! Fits are certified by a duality gap; Gap-SAFE screening and working sets keep
//! the cost proportional to the number of relevant blocks.

pub mod dataset;
pub mod error;
pub mod io;
pub mod model;
pub mod par;
pub mod screening;
pub mod simdata;
pub mod solver;
pub mod tuning;

pub use dataset::{Dataset, StandardizeOptions};
pub use error::{GessoError, Result};
pub use model::{
    dual_objective, duality_gap, kkt_discard_check, primal_objective, relaxed_objective, Coefficients, DualPoint,
    FitMeta, KktDiscard, PenaltyPair,
};
pub use par::Exec;
pub use solver::{fit, FitResult, SolverConfig, Variant};
pub use tuning::{build_grid, cross_validate, fit_path, lambda_max, selection_rates, PenaltyGrid};
