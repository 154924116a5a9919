mod common;

use common::small_instance;
use gesso::simdata::{simulate, SimMode, SimSpec};
use gesso::tuning::{cross_validate_with_folds, mse, selection_rates, PenaltyGrid};
use gesso::{build_grid, cross_validate, fit, fit_path, lambda_max, Dataset, PenaltyPair, SolverConfig, StandardizeOptions};

#[test]
fn null_model_certified_at_lambda_max() {
    for seed in 0..30 {
        let ds = small_instance(seed, 25, 8);
        let lm = lambda_max(&ds);
        let f = fit(&ds, &PenaltyPair::new(lm, lm).unwrap(), &SolverConfig::default(), None).unwrap();
        assert!(f.meta.converged);
        assert!(f.coefficients.nonzero_blocks(0.0).is_empty());
    }
}

#[test]
fn cold_refits_match_path() {
    let ds = small_instance(3, 40, 12);
    let grid = build_grid(&ds, 6, 6, 0.02).unwrap();
    let cfg = SolverConfig::default();
    let path = fit_path(&ds, &grid, &cfg).unwrap();
    assert!(path.iter().all(|pt| pt.fit.meta.converged));
    let tol = cfg.abs_tol(&ds);
    for k in [3, 8, 17, 26, 35] {
        let cold = fit(&ds, &path[k].cell.pen, &cfg, None).unwrap();
        assert!((cold.meta.primal - path[k].fit.meta.primal).abs() <= 10.0 * tol);
    }
    assert!(path[0].fit.coefficients.nonzero_blocks(0.0).is_empty());
}

#[test]
fn leave_one_out_matches_brute_force() {
    let ds = small_instance(4, 12, 4);
    let grid = build_grid(&ds, 3, 3, 0.1).unwrap();
    let cfg = SolverConfig::default().with_tol(1e-8);
    let cv = cross_validate(&ds, &grid, 12, &cfg, 0).unwrap();
    let cells = grid.cells();
    let mut want = vec![0.0; cells.len()];
    for hold in 0..12 {
        let train: Vec<usize> = (0..12).filter(|&r| r != hold).collect();
        let tr = ds.subset_rows(&train).unwrap();
        let te = ds.subset_rows(&[hold]).unwrap();
        let mut prev: Vec<gesso::FitResult> = Vec::new();
        for c in &cells {
            let f = fit(&tr, &c.pen, &cfg, c.warm_from.map(|k| &prev[k].coefficients)).unwrap();
            want[prev.len()] += mse(&te, &f.coefficients).unwrap() / 12.0;
            prev.push(f);
        }
    }
    for (a, b) in cv.mean_loss.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b), "{a} vs {b}");
    }
}

#[test]
fn duplicated_rows_give_equal_fold_losses() {
    let base = small_instance(5, 15, 4);
    let mut y = base.y().to_vec();
    y.extend_from_slice(base.y());
    let mut e = base.e().to_vec();
    e.extend_from_slice(base.e());
    let mut g = Vec::new();
    for i in 0..4 {
        g.extend_from_slice(base.g_col(i));
        g.extend_from_slice(base.g_col(i));
    }
    let ds = Dataset::new(y, g, e, StandardizeOptions { standardize: false }).unwrap();
    let folds: Vec<usize> = (0..30).map(|r| r / 15).collect();
    let grid = build_grid(&ds, 3, 3, 0.1).unwrap();
    let cv = cross_validate_with_folds(&ds, &grid, &folds, &SolverConfig::default()).unwrap();
    for c in 0..9 {
        assert!((cv.folds[0].losses[c] - cv.folds[1].losses[c]).abs() <= 1e-10);
    }
}

#[test]
fn equal_losses_pick_larger_penalties() {
    // pure noise far above the signal level: every cell is the null model
    let ds = small_instance(6, 20, 3);
    let lm = lambda_max(&ds);
    let grid = PenaltyGrid::from_values(vec![4.0 * lm, 3.0 * lm], vec![4.0 * lm, 2.0 * lm]).unwrap();
    let cv = cross_validate(&ds, &grid, 4, &SolverConfig::default(), 1).unwrap();
    assert_eq!(cv.best_cell, 0);
    assert_eq!(cv.best_pair.lambda1, 4.0 * lm);
}

#[test]
fn losses_invariant_under_consistent_row_permutation() {
    let ds = small_instance(7, 24, 5);
    let perm: Vec<usize> = (0..24).rev().collect();
    let pds = ds.subset_rows(&perm).unwrap();
    let folds: Vec<usize> = (0..24).map(|r| r % 3).collect();
    let pfolds: Vec<usize> = perm.iter().map(|&r| folds[r]).collect();
    let grid = build_grid(&ds, 3, 3, 0.1).unwrap();
    let cfg = SolverConfig::default().with_tol(1e-10);
    let a = cross_validate_with_folds(&ds, &grid, &folds, &cfg).unwrap();
    let b = cross_validate_with_folds(&pds, &grid, &pfolds, &cfg).unwrap();
    for (x, y) in a.mean_loss.iter().zip(&b.mean_loss) {
        assert!((x - y).abs() <= 1e-8 * (1.0 + x));
    }
}

#[test]
fn noise_with_high_floor_selects_nothing() {
    let mut spec = SimSpec::new(SimMode::StrongHierarchical, 60, 30, 0, 0, 8);
    spec.beta_e = 0.0;
    let (raw, _) = simulate(&spec).unwrap();
    let ds = raw.to_standardized();
    let lm = lambda_max(&ds);
    let grid = PenaltyGrid::from_values(vec![1.5 * lm, 1.2 * lm], vec![1.5 * lm, 1.1 * lm]).unwrap();
    let s = selection_rates(&ds, &grid, 3, 3, &SolverConfig::default(), 9).unwrap();
    assert!(s.interaction.iter().all(|&r| r == 0.0));
}

#[test]
fn rates_follow_column_permutation_and_reproduce() {
    let spec = SimSpec::new(SimMode::StrongHierarchical, 50, 12, 3, 2, 10);
    let (raw, _) = simulate(&spec).unwrap();
    let ds = raw.to_standardized();
    let perm: Vec<usize> = vec![5, 0, 11, 3, 7, 1, 9, 2, 10, 4, 8, 6];
    let pds = ds.permute_columns(&perm).unwrap();
    let grid = build_grid(&ds, 4, 4, 0.05).unwrap();
    let cfg = SolverConfig::default().with_tol(1e-9);
    let a = selection_rates(&ds, &grid, 3, 4, &cfg, 77).unwrap();
    let b = selection_rates(&pds, &grid, 3, 4, &cfg, 77).unwrap();
    for (j, &i) in perm.iter().enumerate() {
        assert_eq!(a.interaction[i], b.interaction[j]);
        assert_eq!(a.main[i], b.main[j]);
    }
    assert_eq!(a, selection_rates(&ds, &grid, 3, 4, &cfg, 77).unwrap());
}
