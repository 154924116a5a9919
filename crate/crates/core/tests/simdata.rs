mod common;

use gesso::simdata::{auc, simulate, SimMode, SimSpec};
use rand::Rng;

/// Least squares on the true support by normal equations (Gaussian elimination).
fn ols(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = common::dot(&cols[i], &cols[j]);
        }
        a[i][k] = common::dot(&cols[i], y);
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &z| a[x][c].abs().total_cmp(&a[z][c].abs())).unwrap();
        a.swap(c, piv);
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (x, p) in row.iter_mut().zip(&pivot).skip(c) {
                    *x -= f * p;
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

#[test]
fn noiseless_limit_recovers_coefficients() {
    let mut spec = SimSpec::new(SimMode::StrongHierarchical, 80, 40, 4, 2, 3);
    spec.target_snr = 1e12;
    let (ds, truth) = simulate(&spec).unwrap();
    let n = ds.n();
    let mut cols = vec![vec![1.0; n], ds.e().to_vec()];
    let mut want = vec![0.0, truth.beta_e];
    for &i in &truth.main_support {
        cols.push(ds.g_col(i).to_vec());
        want.push(truth.beta_g[i]);
    }
    for &i in &truth.gxe_support {
        cols.push(common::interaction(&ds, i));
        want.push(truth.beta_gxe[i]);
    }
    let got = ols(&cols, ds.y());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-2, "{g} vs {w}");
    }
}

#[test]
fn random_scores_have_chance_auc() {
    let mut r = common::rng(12);
    let draws = 200;
    let p = 400;
    let mut mean = 0.0;
    for _ in 0..draws {
        let scores: Vec<f64> = (0..p).map(|_| r.random::<f64>()).collect();
        let labels: Vec<bool> = (0..p).map(|i| i < 40).collect();
        mean += auc(&scores, &labels).unwrap() / draws as f64;
    }
    // null standard error of one AUC with 40 positives and 360 negatives
    let se_one = ((40.0 + 360.0 + 1.0) / (12.0 * 40.0 * 360.0f64)).sqrt();
    let se = se_one / (draws as f64).sqrt();
    assert!((mean - 0.5).abs() <= 3.0 * se, "{mean}");
}

#[test]
fn realized_snr_on_every_draw() {
    for seed in 0..20 {
        for mode in [SimMode::StrongHierarchical, SimMode::Hierarchical, SimMode::AntiHierarchical] {
            let spec = SimSpec::new(mode, 60, 50, 6, 3, seed);
            let (_, t) = simulate(&spec).unwrap();
            assert!((t.realized_snr / 2.0 - 1.0).abs() <= 0.05);
        }
    }
}
