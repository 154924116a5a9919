//! Synthetic gene-environment data and interaction-selection metrics.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StandardizeOptions};
use crate::error::{GessoError, Result};
use crate::model::Coefficients;
use crate::par::{self, Exec};
use crate::solver::LassoFit;
use crate::tuning::PathPoint;

/// Coefficients below this magnitude count as not discovered.
pub const DISCOVERY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Interactions only on main-effect blocks, `|beta_gxe| <= |beta_g|`.
    StrongHierarchical,
    /// Interactions only on main-effect blocks, no magnitude ordering.
    Hierarchical,
    /// Interactions only on blocks without a main effect.
    AntiHierarchical,
}

impl SimMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strong_hierarchical" | "strong" => Some(Self::StrongHierarchical),
            "hierarchical" => Some(Self::Hierarchical),
            "anti_hierarchical" | "anti" => Some(Self::AntiHierarchical),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::StrongHierarchical => "strong_hierarchical",
            Self::Hierarchical => "hierarchical",
            Self::AntiHierarchical => "anti_hierarchical",
        }
    }

    /// Default `(beta_g, beta_gxe)` magnitudes.
    pub fn default_magnitudes(self) -> (f64, f64) {
        match self {
            Self::Hierarchical => (0.75, 1.5),
            _ => (3.0, 1.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genotype {
    /// i.i.d. standard normal entries.
    Normal,
    /// Allele counts in {0, 1, 2}, Binomial(2, maf) with a per-column
    /// minor allele frequency drawn uniformly from [0.05, 0.5].
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub p_g: usize,
    pub p_gxe: usize,
    pub mode: SimMode,
    pub beta_g_mag: f64,
    pub beta_gxe_mag: f64,
    pub beta_e: f64,
    pub e_prevalence: f64,
    pub target_snr: f64,
    pub genotype: Genotype,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(mode: SimMode, n: usize, p: usize, p_g: usize, p_gxe: usize, seed: u64) -> Self {
        let (bg, bgxe) = mode.default_magnitudes();
        Self {
            n,
            p,
            p_g,
            p_gxe,
            mode,
            beta_g_mag: bg,
            beta_gxe_mag: bgxe,
            beta_e: 1.0,
            e_prevalence: 0.3,
            target_snr: 2.0,
            genotype: Genotype::Normal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GessoError::InvalidArgument(m));
        if self.n < 2 || self.p == 0 {
            return bad(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if !(self.e_prevalence > 0.0 && self.e_prevalence < 1.0) {
            return bad(format!("e_prevalence must lie in (0, 1), got {}", self.e_prevalence));
        }
        if !(self.target_snr.is_finite() && self.target_snr > 0.0) {
            return bad(format!("target_snr must be positive, got {}", self.target_snr));
        }
        for (name, v) in [
            ("beta_g_mag", self.beta_g_mag),
            ("beta_gxe_mag", self.beta_gxe_mag),
            ("beta_e", self.beta_e),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        match self.mode {
            SimMode::AntiHierarchical => {
                if self.p_g + self.p_gxe > self.p {
                    return bad(format!(
                        "anti-hierarchical supports need p_g + p_gxe <= p ({} + {} > {})",
                        self.p_g, self.p_gxe, self.p
                    ));
                }
            }
            _ => {
                if self.p_gxe > self.p_g || self.p_g > self.p {
                    return bad(format!(
                        "hierarchical supports need p_gxe <= p_g <= p ({} , {}, {})",
                        self.p_gxe, self.p_g, self.p
                    ));
                }
                if self.mode == SimMode::StrongHierarchical
                    && self.p_gxe > 0
                    && self.beta_gxe_mag.abs() > self.beta_g_mag.abs()
                {
                    return bad("strong hierarchy needs |beta_gxe_mag| <= |beta_g_mag|".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    /// Sorted.
    pub main_support: Vec<usize>,
    /// Sorted.
    pub gxe_support: Vec<usize>,
    pub beta_g: Vec<f64>,
    pub beta_gxe: Vec<f64>,
    pub beta_e: f64,
    pub noise_var: f64,
    pub realized_snr: f64,
}

impl SimTruth {
    pub fn is_true_interaction(&self, i: usize) -> bool {
        self.beta_gxe[i] != 0.0
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::from_effects(0.0, self.beta_e, &self.beta_g, &self.beta_gxe)
            .expect("truth vectors have equal length")
    }
}

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Draws a dataset (not standardized) and its generating truth.
///
/// `y = beta_e E + G beta_g + (G * E) beta_gxe + noise`. The Gaussian noise is
/// rescaled so that the sample variance of the interaction signal
/// `(G * E) beta_gxe` over that of the realized noise equals `target_snr`. When
/// there is no interaction signal the full signal is used instead, and unit
/// noise when there is no signal at all.
pub fn simulate(spec: &SimSpec) -> Result<(Dataset, SimTruth)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut g = vec![0.0; n * p];
    match spec.genotype {
        Genotype::Normal => g.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng)),
        Genotype::Binomial => {
            for col in g.chunks_exact_mut(n) {
                let maf = rng.random_range(0.05..0.5);
                let d = Binomial::new(2, maf).expect("valid binomial");
                col.iter_mut().for_each(|v| *v = d.sample(&mut rng) as f64);
            }
        }
    }
    let e: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(spec.e_prevalence) { 1.0 } else { 0.0 })
        .collect();

    let (main_support, gxe_support) = match spec.mode {
        SimMode::AntiHierarchical => {
            let idx = sample(&mut rng, p, spec.p_g + spec.p_gxe).into_vec();
            (idx[..spec.p_g].to_vec(), idx[spec.p_g..].to_vec())
        }
        _ => {
            let main = sample(&mut rng, p, spec.p_g).into_vec();
            let pick = sample(&mut rng, spec.p_g, spec.p_gxe).into_vec();
            let gxe = pick.iter().map(|&k| main[k]).collect();
            (main, gxe)
        }
    };
    let mut main_support = main_support;
    let mut gxe_support = gxe_support;
    main_support.sort_unstable();
    gxe_support.sort_unstable();

    let mut beta_g = vec![0.0; p];
    let mut beta_gxe = vec![0.0; p];
    for &i in &main_support {
        beta_g[i] = random_sign(&mut rng) * spec.beta_g_mag;
    }
    for &i in &gxe_support {
        beta_gxe[i] = random_sign(&mut rng) * spec.beta_gxe_mag;
    }

    let mut inter = vec![0.0; n];
    let mut signal: Vec<f64> = e.iter().map(|&ek| spec.beta_e * ek).collect();
    for i in 0..p {
        let col = &g[i * n..(i + 1) * n];
        if beta_g[i] != 0.0 {
            signal.iter_mut().zip(col).for_each(|(s, &x)| *s += beta_g[i] * x);
        }
        if beta_gxe[i] != 0.0 {
            for k in 0..n {
                inter[k] += beta_gxe[i] * col[k] * e[k];
            }
        }
    }
    signal.iter_mut().zip(&inter).for_each(|(s, v)| *s += v);

    let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let raw_var = sample_var(&raw);
    let mut ref_var = sample_var(&inter);
    if ref_var.is_nan() || ref_var <= 0.0 {
        ref_var = sample_var(&signal);
    }
    let scale = if ref_var > 0.0 && raw_var > 0.0 {
        (ref_var / (spec.target_snr * raw_var)).sqrt()
    } else {
        1.0
    };
    let noise_var = scale * scale * raw_var;
    let realized_snr = if ref_var > 0.0 { ref_var / noise_var } else { 0.0 };
    if ref_var > 0.0 && (realized_snr / spec.target_snr - 1.0).abs() > 0.05 {
        return Err(GessoError::Infeasible(format!(
            "realized SNR {realized_snr} is not within 5% of {}",
            spec.target_snr
        )));
    }
    let y: Vec<f64> = signal.iter().zip(&raw).map(|(s, z)| s + scale * z).collect();

    let ds = Dataset::new(y, g, e, StandardizeOptions { standardize: false })?;
    Ok((
        ds,
        SimTruth {
            main_support,
            gxe_support,
            beta_g,
            beta_gxe,
            beta_e: spec.beta_e,
            noise_var,
            realized_snr,
        },
    ))
}

/// `count` replicates with seeds `spec.seed, spec.seed + 1, ...`.
pub fn simulate_replicates(spec: &SimSpec, count: usize, exec: Exec) -> Result<Vec<(Dataset, SimTruth)>> {
    let specs: Vec<SimSpec> = (0..count as u64)
        .map(|r| SimSpec {
            seed: spec.seed.wrapping_add(r),
            ..spec.clone()
        })
        .collect();
    par::map_tasks(exec, specs, |s| simulate(&s)).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Order of first appearance along the grid traversal; ties within a cell
    /// broken by coefficient magnitude at that cell.
    PathEntry,
    /// Coefficient magnitude at a single fit.
    Magnitude,
}

/// Discovered interactions along a path, in order of entry.
pub fn entry_order(path: &[PathPoint]) -> Vec<usize> {
    entry_order_of(path.iter().map(|pt| pt.fit.coefficients.beta_gxe.as_slice()))
}

/// Entry order along a lasso path.
pub fn lasso_entry_order(path: &[LassoFit]) -> Vec<usize> {
    entry_order_of(path.iter().map(|f| f.beta_gxe.as_slice()))
}

/// Entry order over a sequence of interaction vectors; interactions entering
/// at the same step are ordered by decreasing magnitude, then index.
pub fn entry_order_of<'a>(steps: impl IntoIterator<Item = &'a [f64]>) -> Vec<usize> {
    let mut seen: Vec<bool> = Vec::new();
    let mut order = Vec::new();
    for t in steps {
        if seen.len() < t.len() {
            seen.resize(t.len(), false);
        }
        let mut new: Vec<usize> = (0..t.len())
            .filter(|&i| !seen[i] && t[i].abs() > DISCOVERY_THRESHOLD)
            .collect();
        new.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
        for &i in &new {
            seen[i] = true;
        }
        order.extend(new);
    }
    order
}

/// Discovered interactions of one fit by decreasing magnitude.
pub fn magnitude_order(coef: &Coefficients) -> Vec<usize> {
    let t = &coef.beta_gxe;
    let mut idx: Vec<usize> = (0..t.len()).filter(|&i| t[i].abs() > DISCOVERY_THRESHOLD).collect();
    idx.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// `None` when the truth has no positives or no negatives.
    pub auc_gxe: Option<f64>,
    /// Entry `k - 1` is the precision among the first `k` discoveries.
    pub precision_at_k: Vec<f64>,
    pub n_discovered: usize,
}

/// Precision and AUC of a discovery order against the true interactions.
/// Undiscovered interactions share the last rank.
pub fn selection_metrics(order: &[usize], truth: &SimTruth) -> SelectionMetrics {
    let p = truth.beta_gxe.len();
    let m = order.len();
    let mut scores = vec![0.0; p];
    for (r, &i) in order.iter().enumerate() {
        scores[i] = (m - r) as f64;
    }
    let labels: Vec<bool> = (0..p).map(|i| truth.is_true_interaction(i)).collect();
    let mut tp = 0usize;
    let precision_at_k = order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            tp += labels[i] as usize;
            tp as f64 / (k + 1) as f64
        })
        .collect();
    SelectionMetrics {
        auc_gxe: auc(&scores, &labels),
        precision_at_k,
        n_discovered: m,
    }
}

/// Mann-Whitney AUC: probability that a positive outscores a negative, ties
/// counted one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // midranks over tie groups
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let mut j = k;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[k]] {
            j += 1;
        }
        let mid = (k + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[k..=j].iter().filter(|&&i| labels[i]).count() as f64 * mid;
        k = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_with(pos: &[usize], p: usize) -> SimTruth {
        let mut beta_gxe = vec![0.0; p];
        pos.iter().for_each(|&i| beta_gxe[i] = 1.0);
        SimTruth {
            main_support: pos.to_vec(),
            gxe_support: pos.to_vec(),
            beta_g: beta_gxe.clone(),
            beta_gxe,
            beta_e: 0.0,
            noise_var: 1.0,
            realized_snr: 2.0,
        }
    }

    #[test]
    fn default_dimensions_and_supports() {
        let spec = SimSpec::new(SimMode::StrongHierarchical, 100, 2500, 10, 5, 1);
        let (ds, truth) = simulate(&spec).unwrap();
        assert_eq!((ds.n(), ds.p()), (100, 2500));
        assert_eq!(truth.main_support.len(), 10);
        assert_eq!(truth.gxe_support.len(), 5);
        assert!(truth.gxe_support.iter().all(|i| truth.main_support.contains(i)));
        for &i in &truth.gxe_support {
            assert!(truth.beta_gxe[i].abs() <= truth.beta_g[i].abs());
        }
        assert!((truth.realized_snr - 2.0).abs() < 1e-9);
    }

    #[test]
    fn anti_supports_are_disjoint() {
        let spec = SimSpec::new(SimMode::AntiHierarchical, 50, 40, 10, 8, 3);
        let (_, t) = simulate(&spec).unwrap();
        assert!(t.gxe_support.iter().all(|i| !t.main_support.contains(i)));
        let bad = SimSpec::new(SimMode::AntiHierarchical, 50, 10, 6, 5, 3);
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn hierarchical_magnitudes() {
        let spec = SimSpec::new(SimMode::Hierarchical, 30, 20, 4, 2, 3);
        assert_eq!((spec.beta_g_mag, spec.beta_gxe_mag), (0.75, 1.5));
        let (_, t) = simulate(&spec).unwrap();
        assert!(t.main_support.iter().all(|&i| t.beta_g[i].abs() == 0.75));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = SimSpec::new(SimMode::Hierarchical, 30, 20, 4, 2, 11);
        let (a, ta) = simulate(&spec).unwrap();
        let (b, tb) = simulate(&spec).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.g_col_major(), b.g_col_major());
        assert_eq!(ta, tb);
    }

    #[test]
    fn binomial_genotypes_are_allele_counts() {
        let mut spec = SimSpec::new(SimMode::StrongHierarchical, 40, 10, 2, 1, 5);
        spec.genotype = Genotype::Binomial;
        let (ds, _) = simulate(&spec).unwrap();
        assert!(ds.g_col_major().iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }

    #[test]
    fn perfect_and_inverted_rankings() {
        let t = truth_with(&[0, 1], 5);
        let m = selection_metrics(&[0, 1, 2, 3, 4], &t);
        assert_eq!(m.auc_gxe, Some(1.0));
        assert_eq!(m.precision_at_k[1], 1.0);
        let m = selection_metrics(&[2, 3, 4, 0, 1], &t);
        assert_eq!(m.auc_gxe, Some(0.0));
        assert_eq!(m.precision_at_k[0], 0.0);
    }

    #[test]
    fn undiscovered_share_last_rank() {
        let t = truth_with(&[0, 1], 4);
        // only interaction 0 discovered: positive 1 ties with both negatives
        let m = selection_metrics(&[0], &t);
        assert_eq!(m.auc_gxe, Some(0.75));
        assert_eq!(selection_metrics(&[], &t).auc_gxe, Some(0.5));
        assert_eq!(selection_metrics(&[], &truth_with(&[], 3)).auc_gxe, None);
    }

    #[test]
    fn entry_order_breaks_ties_by_magnitude() {
        let steps: [&[f64]; 3] = [&[0.0, 0.0, 0.0, 0.0], &[0.0, 0.1, 0.0, -0.3], &[0.5, 0.1, 0.0, 0.0]];
        assert_eq!(entry_order_of(steps), vec![3, 1, 0]);
    }

    #[test]
    fn magnitude_order_sorts_nonzero() {
        let c = Coefficients::from_effects(0.0, 0.0, &[1.0, 1.0, 1.0], &[0.2, 0.0, -0.5]).unwrap();
        assert_eq!(magnitude_order(&c), vec![2, 0]);
    }
}
