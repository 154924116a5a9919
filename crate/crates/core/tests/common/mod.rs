//! Reference implementations used as test oracles. None of them call into the
//! solver, screening or objective code of the library; they only read the raw
//! columns of a `Dataset`.
#![allow(dead_code)]

use gesso::solver::BlockProblem;
use gesso::{Dataset, PenaltyPair, StandardizeOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Standardized instance with a few hierarchical signals and correlated
/// neighbouring columns.
pub fn small_instance(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let rho = r.random_range(0.0..0.6);
    let mut g = vec![0.0; n * p];
    for k in 0..n {
        let mut prev = normal(&mut r);
        for i in 0..p {
            let z = rho * prev + (1.0 - rho * rho).sqrt() * normal(&mut r);
            g[i * n + k] = z;
            prev = z;
        }
    }
    let e: Vec<f64> = (0..n).map(|_| if r.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
    let n_main = r.random_range(1..=p.min(3));
    let y = (0..n)
        .map(|k| {
            let mut v = 0.5 * e[k] + normal(&mut r);
            for i in 0..n_main {
                let x = g[i * n + k];
                v += (1.5 - 0.4 * i as f64) * x + if i == 0 { 1.0 * x * e[k] } else { 0.0 };
            }
            v
        })
        .collect();
    Dataset::new(y, g, e, StandardizeOptions::default()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn interaction(ds: &Dataset, i: usize) -> Vec<f64> {
    ds.g_col(i).iter().zip(ds.e()).map(|(g, e)| g * e).collect()
}

/// Residual `y - 1 b0 - E be - sum G_i b_i - sum (G_i E) t_i`, row by row.
pub fn scalar_residual(ds: &Dataset, b0: f64, be: f64, b: &[f64], t: &[f64]) -> Vec<f64> {
    let n = ds.n();
    (0..n)
        .map(|k| {
            let mut fit = b0 + be * ds.e()[k];
            for i in 0..ds.p() {
                let x = ds.g_col(i)[k];
                fit += x * b[i] + x * ds.e()[k] * t[i];
            }
            ds.y()[k] - fit
        })
        .collect()
}

pub fn scalar_primal(ds: &Dataset, b0: f64, be: f64, b: &[f64], t: &[f64], pen: &PenaltyPair) -> f64 {
    let r = scalar_residual(ds, b0, be, b, t);
    let loss = dot(&r, &r) / (2.0 * ds.n() as f64);
    let mut penalty = 0.0;
    for i in 0..ds.p() {
        penalty += pen.lambda1 * b[i].abs().max(t[i].abs()) + pen.lambda2 * t[i].abs();
    }
    loss + penalty
}

/// Removes the span of `1` and `E` by modified Gram-Schmidt.
pub fn project_out_unpenalized(ds: &Dataset, v: &mut [f64]) {
    let n = ds.n();
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut q2: Vec<f64> = ds.e().to_vec();
    let c = dot(&q2, &ones);
    q2.iter_mut().zip(&ones).for_each(|(x, o)| *x -= c * o);
    let nq = dot(&q2, &q2).sqrt();
    let c1 = dot(v, &ones);
    v.iter_mut().zip(&ones).for_each(|(x, o)| *x -= c1 * o);
    if nq > 1e-10 {
        q2.iter_mut().for_each(|x| *x /= nq);
        let c2 = dot(v, &q2);
        v.iter_mut().zip(&q2).for_each(|(x, q)| *x -= c2 * q);
    }
}

/// Dual value reached by rescaling `dir` (already orthogonal to `1` and `E`)
/// to the largest feasible multiple closest to the unconstrained maximizer.
/// Per block the admissible scale is `min(l1 / A, (l1 + l2) / (A + B))`.
pub fn oracle_dual(ds: &Dataset, dir: &[f64], pen: &PenaltyPair) -> f64 {
    let n = ds.n() as f64;
    let nn = dot(dir, dir);
    if nn == 0.0 {
        return 0.0;
    }
    let mut m = f64::INFINITY;
    for i in 0..ds.p() {
        let a = dot(dir, ds.g_col(i)).abs();
        let b = dot(dir, &interaction(ds, i)).abs();
        if a > 0.0 {
            m = m.min(pen.lambda1 / a);
        }
        if a + b > 0.0 {
            m = m.min((pen.lambda1 + pen.lambda2) / (a + b));
        }
    }
    let yv = dot(ds.y(), dir);
    let x = (yv / (n * nn)).clamp(-m, m);
    x * yv - 0.5 * n * x * x * nn
}

/// Gap at `(b0, be, b, t)` from scalar re-evaluations only.
pub fn oracle_gap(ds: &Dataset, b0: f64, be: f64, b: &[f64], t: &[f64], pen: &PenaltyPair) -> (f64, f64) {
    let n = ds.n() as f64;
    let primal = scalar_primal(ds, b0, be, b, t, pen);
    let mut dir: Vec<f64> = scalar_residual(ds, b0, be, b, t).iter().map(|r| r / n).collect();
    project_out_unpenalized(ds, &mut dir);
    let dual = oracle_dual(ds, &dir, pen);
    (primal, primal - dual)
}

pub struct OracleFit {
    pub beta0: f64,
    pub beta_e: f64,
    pub beta_g: Vec<f64>,
    pub beta_gxe: Vec<f64>,
    pub primal: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Euclidean projection of `w` onto `{z >= 0, z[2] + z[3] <= z[0] + z[1]}`.
///
/// With multiplier `mu` for the coupling constraint the projection is
/// `max(w - mu a, 0)`, `a = (-1, -1, 1, 1)`; `a.z(mu)` is non-increasing and
/// piecewise linear in `mu`, so the root is found between breakpoints.
pub fn project_block(w: [f64; 4]) -> [f64; 4] {
    let a = [-1.0, -1.0, 1.0, 1.0];
    let at = |mu: f64| -> ([f64; 4], f64) {
        let mut z = [0.0; 4];
        let mut s = 0.0;
        for j in 0..4 {
            z[j] = (w[j] - mu * a[j]).max(0.0);
            s += a[j] * z[j];
        }
        (z, s)
    };
    let (z0, s0) = at(0.0);
    if s0 <= 0.0 {
        return z0;
    }
    // breakpoints where a coordinate hits zero
    let mut bps: Vec<f64> = (0..4)
        .map(|j| w[j] / a[j])
        .filter(|&m| m > 0.0)
        .collect();
    bps.sort_by(f64::total_cmp);
    let mut lo = 0.0;
    let mut s_lo = s0;
    for &bp in &bps {
        let (_, s_bp) = at(bp);
        if s_bp <= 0.0 {
            // linear on [lo, bp]
            let mu = lo + s_lo * (bp - lo) / (s_lo - s_bp);
            return at(mu).0;
        }
        lo = bp;
        s_lo = s_bp;
    }
    // beyond the last breakpoint the slope is -(number of positive coordinates among b+, b-)
    let (_, s) = at(lo);
    let (_, s1) = at(lo + 1.0);
    let slope = s1 - s;
    at(lo - s / slope).0
}

/// Accelerated projected gradient with adaptive restart on the split
/// formulation `(b+, b-, t+, t-) >= 0`, `t+ + t- <= b+ + b-`, penalty
/// `l1 (b+ + b-) + l2 (t+ + t-)`. Runs until the independent gap falls below
/// `gap_tol` or the iteration budget is spent.
pub fn oracle_fit(ds: &Dataset, pen: &PenaltyPair, gap_tol: f64, max_iter: usize) -> OracleFit {
    let (n, p) = (ds.n(), ds.p());
    let nf = n as f64;
    let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..p).map(|i| (ds.g_col(i).to_vec(), interaction(ds, i))).collect();
    let dim = 2 + 4 * p;

    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = ds.e().iter().map(|e| x[0] + x[1] * e).collect();
        for i in 0..p {
            let b = x[2 + 4 * i] - x[3 + 4 * i];
            let t = x[4 + 4 * i] - x[5 + 4 * i];
            for (k, o) in out.iter_mut().enumerate() {
                *o += cols[i].0[k] * b + cols[i].1[k] * t;
            }
        }
        out
    };
    let apply_t = |r: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        out[0] = r.iter().sum();
        out[1] = dot(r, ds.e());
        for i in 0..p {
            let gb = dot(r, &cols[i].0);
            let gt = dot(r, &cols[i].1);
            out[2 + 4 * i] = gb;
            out[3 + 4 * i] = -gb;
            out[4 + 4 * i] = gt;
            out[5 + 4 * i] = -gt;
        }
        out
    };

    // Lipschitz constant of the loss gradient by power iteration
    let mut v = vec![1.0; dim];
    let mut lip = 0.0;
    for _ in 0..200 {
        let w = apply_t(&apply(&v));
        let norm = dot(&w, &w).sqrt();
        lip = norm / dot(&v, &v).sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (1.02 * lip / nf);

    let lin: Vec<f64> = (0..dim)
        .map(|j| match j {
            0 | 1 => 0.0,
            _ if (j - 2) % 4 < 2 => pen.lambda1,
            _ => pen.lambda2,
        })
        .collect();
    let objective = |x: &[f64]| -> f64 {
        let fit = apply(x);
        let loss: f64 = ds.y().iter().zip(&fit).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / (2.0 * nf);
        loss + dot(&lin, x)
    };
    let project = |x: &mut [f64]| {
        for i in 0..p {
            let o = 2 + 4 * i;
            let z = project_block([x[o], x[o + 1], x[o + 2], x[o + 3]]);
            x[o..o + 4].copy_from_slice(&z);
        }
    };
    let effects = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let b = (0..p).map(|i| x[2 + 4 * i] - x[3 + 4 * i]).collect();
        let t = (0..p).map(|i| x[4 + 4 * i] - x[5 + 4 * i]).collect();
        (b, t)
    };

    let mut x = vec![0.0; dim];
    let mut yk = x.clone();
    let mut tk: f64 = 1.0;
    let mut gap = f64::INFINITY;
    let mut primal = objective(&x);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let fit = apply(&yk);
        let r: Vec<f64> = ds.y().iter().zip(&fit).map(|(y, f)| y - f).collect();
        let g = apply_t(&r);
        let mut xn: Vec<f64> = (0..dim).map(|j| yk[j] - step * (-g[j] / nf + lin[j])).collect();
        project(&mut xn);
        // gradient-based adaptive restart, insensitive to objective round-off
        let restart: f64 = (0..dim).map(|j| (yk[j] - xn[j]) * (xn[j] - x[j])).sum();
        if restart > 0.0 {
            tk = 1.0;
        }
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        let beta = (tk - 1.0) / tn;
        yk = (0..dim).map(|j| xn[j] + beta * (xn[j] - x[j])).collect();
        x = xn;
        tk = tn;
        if it % 50 == 0 {
            let (b, t) = effects(&x);
            let (pr, gp) = oracle_gap(ds, x[0], x[1], &b, &t, pen);
            primal = pr;
            gap = gp;
            if gap <= gap_tol {
                break;
            }
        }
    }
    let (b, t) = effects(&x);
    let (pr, gp) = oracle_gap(ds, x[0], x[1], &b, &t, pen);
    if gp < gap {
        gap = gp;
        primal = pr;
    }
    OracleFit {
        beta0: x[0],
        beta_e: x[1],
        beta_g: b,
        beta_gxe: t,
        primal,
        gap,
        iterations: it,
    }
}

/// Minimum of a block subproblem: the best point of a 2001 x 2001 grid,
/// refined by nested ternary search over a neighbourhood of it.
pub fn block_oracle(pb: &BlockProblem, pen: &PenaltyPair) -> (f64, f64, f64) {
    let f = |b: f64, t: f64| pb.value(b, t, pen);
    let gnorm = pb.g1.hypot(pb.g2);
    let tr = pb.a11 + pb.a22;
    let det = pb.a11 * pb.a22 - pb.a12 * pb.a12;
    let lmin = (tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt()).max(1e-12);
    let bmax = (2.0 * gnorm / lmin).max(1e-6);
    let m = 2001;
    let h = 2.0 * bmax / (m - 1) as f64;
    let mut best = (0.0, 0.0, f(0.0, 0.0));
    for j in 0..m {
        let b = -bmax + h * j as f64;
        for k in 0..m {
            let t = -bmax + h * k as f64;
            let v = f(b, t);
            if v < best.2 {
                best = (b, t, v);
            }
        }
    }
    let ternary = |lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) <= g(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    };
    let (b0, t0) = (best.0, best.1);
    let inner = |b: f64| -> (f64, f64) {
        let t = ternary(t0 - 20.0 * h, t0 + 20.0 * h, &|t| f(b, t));
        (t, f(b, t))
    };
    let b = ternary(b0 - 20.0 * h, b0 + 20.0 * h, &|b| inner(b).1);
    let (t, v) = inner(b);
    if v < best.2 {
        (b, t, v)
    } else {
        best
    }
}
