//! Exact minimization of one main-effect / interaction block.
//!
//! With the other blocks held fixed the block subproblem is
//!
//! ```text
//! min_{b,t} 1/2 [b t] A [b t]' - g.[b t] + lambda1 max(|b|, |t|) + lambda2 |t|
//! ```
//!
//! where `A` is the 2x2 Gram matrix of `(G_i, G_i * E)` scaled by `1/n` and `g`
//! holds the inner products of those columns with the partial residual. The
//! penalty is linear on six polyhedral cones (four where `|b| > |t|`, split by
//! the signs of `b` and `t`; two where `|t| > |b|`, split by the sign of `t`)
//! and the cones are separated by four lines through the origin. The global
//! minimizer is either a stationary point of one of the smooth pieces or the
//! minimizer along one of the separating lines, so it is the best of at most
//! eleven candidates.

use crate::dataset::ZERO_NORM;
use crate::model::PenaltyPair;

/// Data of one block subproblem.
#[derive(Debug, Clone, Copy)]
pub struct BlockProblem {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub g1: f64,
    pub g2: f64,
}

impl BlockProblem {
    /// Objective up to the constant `||rho||^2 / 2n`.
    #[inline]
    pub fn value(&self, b: f64, t: f64, pen: &PenaltyPair) -> f64 {
        0.5 * (self.a11 * b * b + 2.0 * self.a12 * b * t + self.a22 * t * t)
            - self.g1 * b
            - self.g2 * t
            + pen.lambda1 * b.abs().max(t.abs())
            + pen.lambda2 * t.abs()
    }

    /// Exact minimizer `(b, t)`.
    pub fn solve(&self, pen: &PenaltyPair) -> (f64, f64) {
        let (l1, l2) = (pen.lambda1, pen.lambda2);
        let main_null = self.a11 <= ZERO_NORM * ZERO_NORM;
        let gxe_null = self.a22 <= ZERO_NORM * ZERO_NORM;
        if main_null {
            return (0.0, 0.0);
        }
        if gxe_null {
            return (soft(self.g1, l1) / self.a11, 0.0);
        }

        let mut best = (0.0, 0.0);
        let mut best_val = 0.0;
        let mut consider = |b: f64, t: f64| {
            if !(b.is_finite() && t.is_finite()) {
                return;
            }
            let v = self.value(b, t, pen);
            if v < best_val {
                best_val = v;
                best = (b, t);
            }
        };

        // Minimizers along the four separating lines.
        for (d1, d2) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)] {
            let q = self.a11 * d1 * d1 + 2.0 * self.a12 * d1 * d2 + self.a22 * d2 * d2;
            if q <= 0.0 {
                continue;
            }
            let h = self.g1 * d1 + self.g2 * d2;
            let w = l1 * f64::max(d1.abs(), d2.abs()) + l2 * d2.abs();
            let s = soft(h, w) / q;
            consider(s * d1, s * d2);
        }

        // Stationary points of the smooth pieces.
        let det = self.a11 * self.a22 - self.a12 * self.a12;
        if det > 1e-14 * self.a11 * self.a22 {
            let mut stationary = |w1: f64, w2: f64| {
                let r1 = self.g1 - w1;
                let r2 = self.g2 - w2;
                let b = (self.a22 * r1 - self.a12 * r2) / det;
                let t = (self.a11 * r2 - self.a12 * r1) / det;
                consider(b, t);
            };
            for sb in [1.0, -1.0] {
                for st in [1.0, -1.0] {
                    stationary(l1 * sb, l2 * st);
                }
            }
            for st in [1.0, -1.0] {
                stationary(0.0, (l1 + l2) * st);
            }
        }
        best
    }
}

#[inline]
pub(crate) fn soft(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}
