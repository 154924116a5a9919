mod common;

use common::{oracle_fit, rng, small_instance};
use gesso::model::primal_objective;
use gesso::screening::{gap_ball, optimal_naive_projection, residual_dual, safe_ball, safe_discard, ws_scores};
use gesso::solver::{solve_inner, FitState};
use gesso::{lambda_max, Coefficients, DualPoint, PenaltyPair, SolverConfig};
use rand::Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn residual_dual_at_least_squares_is_orthogonal() {
    // all predictors fitted exactly by the unpenalized solver on a wide lambda-free path
    let ds = small_instance(1, 30, 3);
    let p = PenaltyPair::new(1e-9, 1e-9).unwrap();
    let f = gesso::fit(&ds, &p, &SolverConfig::default().with_tol(1e-14), None).unwrap();
    let nu = residual_dual(&ds, &f.coefficients).unwrap();
    for i in 0..3 {
        assert!(common::dot(&nu, ds.g_col(i)).abs() <= 1e-8);
    }
}

#[test]
fn optimum_lies_in_safe_and_gap_balls() {
    for seed in 0..10 {
        let ds = small_instance(10 + seed, 30, 8);
        let lm = lambda_max(&ds);
        let p = PenaltyPair::new(0.25 * lm, 0.15 * lm).unwrap();
        let o = oracle_fit(&ds, &p, 1e-13, 1_000_000);
        let opt = Coefficients::from_effects(o.beta0, o.beta_e, &o.beta_g, &o.beta_gxe).unwrap();
        let nu_hat = optimal_naive_projection(&ds, &residual_dual(&ds, &opt).unwrap(), &p).unwrap().nu;

        // iterates of a plain cyclic run
        let mut st = FitState::zeros(&ds);
        let all: Vec<usize> = (0..8).collect();
        let cfg = SolverConfig {
            max_iter_inner: 1,
            ..SolverConfig::default().with_tol(1e-14)
        };
        for _ in 0..30 {
            let nu0 = optimal_naive_projection(&ds, &residual_dual(&ds, &st.coef).unwrap(), &p).unwrap();
            let sb = safe_ball(&ds, &nu0).unwrap();
            assert!(dist(&sb.center, &nu_hat) <= sb.radius + 1e-9);
            let gb = gap_ball(&ds, &st.coef, &p, &nu0).unwrap();
            assert!(dist(&gb.center, &nu_hat) <= gb.radius + 1e-9);
            for i in 0..8 {
                if safe_discard(&ds, &gb, &p, i) {
                    assert!(o.beta_g[i].abs() <= 1e-8 && o.beta_gxe[i].abs() <= 1e-8);
                }
            }
            solve_inner(&ds, &mut st, &p, &cfg, &all);
        }
        assert!(primal_objective(&ds, &st.coef, &p).unwrap() >= o.primal - 1e-9);
    }
}

#[test]
fn discards_at_optimum_ball_never_hit_support() {
    for seed in 0..20 {
        let ds = small_instance(40 + seed, 35, 10);
        let lm = lambda_max(&ds);
        let mut r = rng(seed);
        let p = PenaltyPair::new(lm * r.random_range(0.1..0.7), lm * r.random_range(0.1..0.7)).unwrap();
        let o = oracle_fit(&ds, &p, 1e-13, 1_000_000);
        let opt = Coefficients::from_effects(o.beta0, o.beta_e, &o.beta_g, &o.beta_gxe).unwrap();
        let nu0 = optimal_naive_projection(&ds, &residual_dual(&ds, &opt).unwrap(), &p).unwrap();
        let ball = gap_ball(&ds, &opt, &p, &nu0).unwrap();
        for i in 0..10 {
            if safe_discard(&ds, &ball, &p, i) {
                assert!(o.beta_g[i].abs() <= 1e-8 && o.beta_gxe[i].abs() <= 1e-8, "seed {seed} block {i}: {} {} gap {} radius {} oracle gap {}", o.beta_g[i], o.beta_gxe[i], o.gap, ball.radius, o.gap);
            }
        }
    }
}

#[test]
fn null_point_balls() {
    let ds = small_instance(3, 20, 4);
    let p = PenaltyPair::new(0.1, 0.1).unwrap();
    let zero = DualPoint::zeros(20, 4);
    let yn = ds.y_norm_sq().sqrt() / 20.0;
    assert!((safe_ball(&ds, &zero).unwrap().radius - yn).abs() <= 1e-14);
    assert!((gap_ball(&ds, &Coefficients::zeros(4), &p, &zero).unwrap().radius - yn).abs() <= 1e-14);
}

#[test]
fn scores_and_discards_agree_over_random_balls() {
    let mut r = rng(11);
    let ds = small_instance(11, 25, 30);
    for _ in 0..40 {
        let p = PenaltyPair::new(r.random_range(0.01..0.5), r.random_range(0.01..0.5)).unwrap();
        let nu: Vec<f64> = (0..25).map(|_| r.random_range(-0.1..0.1)).collect();
        let nu0 = optimal_naive_projection(&ds, &nu, &p).unwrap();
        let mut ball = safe_ball(&ds, &nu0).unwrap();
        ball.radius *= r.random_range(0.0..1.0);
        let sc = ws_scores(&ds, &ball, &p);
        for i in 0..30 {
            assert_eq!(sc.d[i] > ball.radius, safe_discard(&ds, &ball, &p, i));
        }
    }
}
