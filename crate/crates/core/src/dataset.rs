//! Problem data: outcome, genotype matrix, exposure, and the interaction
//! columns `G_i * E`, which are recomputed on the fly unless materialized.

use crate::error::{GessoError, Result};

/// Columns whose Euclidean norm falls below this are treated as identically zero.
pub(crate) const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardizeOptions {
    /// Center each `G_i` and scale it to unit norm, center `y`, center `E`.
    pub standardize: bool,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

/// Immutable problem data shared read-only by every fit.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    p: usize,
    y: Vec<f64>,
    /// Column-major `n x p`.
    g: Vec<f64>,
    e: Vec<f64>,
    /// Column-major `n x p` copy of the interaction columns, when materialized.
    gxe: Option<Vec<f64>>,
    col_norm_g: Vec<f64>,
    col_norm_gxe: Vec<f64>,
    /// `G_i . (G_i * E)`.
    cross: Vec<f64>,
    y_norm_sq: f64,
    e_sum: f64,
    e_norm_sq: f64,
    standardized: bool,
}

impl Dataset {
    /// Builds a dataset from a column-major genotype buffer.
    pub fn new(
        y: Vec<f64>,
        g_col_major: Vec<f64>,
        e: Vec<f64>,
        opts: StandardizeOptions,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(GessoError::Dimension("dataset has no observations".into()));
        }
        if e.len() != n {
            return Err(GessoError::Dimension(format!(
                "exposure has length {} but outcome has length {n}",
                e.len()
            )));
        }
        if !g_col_major.len().is_multiple_of(n) {
            return Err(GessoError::Dimension(format!(
                "genotype buffer of length {} is not a multiple of n = {n}",
                g_col_major.len()
            )));
        }
        let p = g_col_major.len() / n;
        if p == 0 {
            return Err(GessoError::Dimension("dataset has no genotype columns".into()));
        }
        check_finite("y", &y)?;
        check_finite("E", &e)?;
        check_finite("G", &g_col_major)?;

        let mut ds = Self {
            n,
            p,
            y,
            g: g_col_major,
            e,
            gxe: None,
            col_norm_g: Vec::new(),
            col_norm_gxe: Vec::new(),
            cross: Vec::new(),
            y_norm_sq: 0.0,
            e_sum: 0.0,
            e_norm_sq: 0.0,
            standardized: false,
        };
        if opts.standardize {
            ds.standardize_in_place();
        }
        ds.refresh_stats();
        Ok(ds)
    }

    /// Builds a dataset from a row-major genotype buffer (`n` rows of `p`).
    pub fn from_row_major(
        y: Vec<f64>,
        g_row_major: &[f64],
        e: Vec<f64>,
        opts: StandardizeOptions,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 || !g_row_major.len().is_multiple_of(n) {
            return Err(GessoError::Dimension(format!(
                "genotype buffer of length {} does not match n = {n}",
                g_row_major.len()
            )));
        }
        let p = g_row_major.len() / n;
        let mut g = vec![0.0; n * p];
        for (r, row) in g_row_major.chunks_exact(p.max(1)).enumerate() {
            for (c, &v) in row.iter().enumerate() {
                g[c * n + r] = v;
            }
        }
        Self::new(y, g, e, opts)
    }

    fn standardize_in_place(&mut self) {
        let n = self.n as f64;
        center(&mut self.y);
        center(&mut self.e);
        for col in self.g.chunks_exact_mut(self.n) {
            let mean = col.iter().sum::<f64>() / n;
            col.iter_mut().for_each(|v| *v -= mean);
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > ZERO_NORM {
                col.iter_mut().for_each(|v| *v /= norm);
            } else {
                col.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self.standardized = true;
    }

    fn refresh_stats(&mut self) {
        let (n, p) = (self.n, self.p);
        self.col_norm_g = Vec::with_capacity(p);
        self.col_norm_gxe = Vec::with_capacity(p);
        self.cross = Vec::with_capacity(p);
        for i in 0..p {
            let col = &self.g[i * n..(i + 1) * n];
            let (mut gg, mut vv, mut gv) = (0.0, 0.0, 0.0);
            for (&gk, &ek) in col.iter().zip(&self.e) {
                let vk = gk * ek;
                gg += gk * gk;
                vv += vk * vk;
                gv += gk * vk;
            }
            self.col_norm_g.push(gg.sqrt());
            self.col_norm_gxe.push(vv.sqrt());
            self.cross.push(gv);
        }
        self.y_norm_sq = self.y.iter().map(|v| v * v).sum();
        self.e_sum = self.e.iter().sum();
        self.e_norm_sq = self.e.iter().map(|v| v * v).sum();
        if self.gxe.is_some() {
            self.gxe = Some(self.build_gxe());
        }
    }

    fn build_gxe(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.p);
        for col in self.g.chunks_exact(self.n) {
            out.extend(col.iter().zip(&self.e).map(|(g, e)| g * e));
        }
        out
    }

    /// Stores the interaction columns densely. Memory grows from `n*p` to `2*n*p`.
    pub fn with_materialized_gxe(mut self) -> Self {
        self.gxe = Some(self.build_gxe());
        self
    }

    pub fn is_materialized(&self) -> bool {
        self.gxe.is_some()
    }

    /// Standardized copy (a no-op clone when already standardized).
    pub fn to_standardized(&self) -> Self {
        let mut ds = self.clone();
        if !ds.standardized {
            ds.standardize_in_place();
            ds.refresh_stats();
        }
        ds
    }

    /// Row subset, without re-standardizing. Column statistics are recomputed
    /// from the retained rows.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(GessoError::Dimension("row subset is empty".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(GessoError::Dimension(format!("row {bad} out of range")));
        }
        let m = rows.len();
        let y = rows.iter().map(|&r| self.y[r]).collect();
        let e = rows.iter().map(|&r| self.e[r]).collect();
        let mut g = Vec::with_capacity(m * self.p);
        for col in self.g.chunks_exact(self.n) {
            g.extend(rows.iter().map(|&r| col[r]));
        }
        let mut ds = Self {
            n: m,
            p: self.p,
            y,
            g,
            e,
            gxe: self.gxe.as_ref().map(|_| Vec::new()),
            col_norm_g: Vec::new(),
            col_norm_gxe: Vec::new(),
            cross: Vec::new(),
            y_norm_sq: 0.0,
            e_sum: 0.0,
            e_norm_sq: 0.0,
            standardized: false,
        };
        ds.refresh_stats();
        Ok(ds)
    }

    /// Reorders the genotype columns so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(GessoError::Dimension("permutation length differs from p".into()));
        }
        let mut g = Vec::with_capacity(self.n * self.p);
        for &j in perm {
            if j >= self.p {
                return Err(GessoError::Dimension(format!("column {j} out of range")));
            }
            g.extend_from_slice(self.g_col(j));
        }
        let mut ds = self.clone();
        ds.g = g;
        ds.refresh_stats();
        Ok(ds)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// Column `i` of `G`.
    #[inline]
    pub fn g_col(&self, i: usize) -> &[f64] {
        &self.g[i * self.n..(i + 1) * self.n]
    }

    /// The full column-major genotype buffer.
    pub fn g_col_major(&self) -> &[f64] {
        &self.g
    }

    /// Interaction column `G_i * E`, freshly computed.
    pub fn gxe_col(&self, i: usize) -> Vec<f64> {
        match &self.gxe {
            Some(m) => m[i * self.n..(i + 1) * self.n].to_vec(),
            None => self.g_col(i).iter().zip(&self.e).map(|(g, e)| g * e).collect(),
        }
    }

    #[inline]
    pub fn col_norm_g(&self, i: usize) -> f64 {
        self.col_norm_g[i]
    }

    #[inline]
    pub fn col_norm_gxe(&self, i: usize) -> f64 {
        self.col_norm_gxe[i]
    }

    pub fn col_norms_g(&self) -> &[f64] {
        &self.col_norm_g
    }

    pub fn col_norms_gxe(&self) -> &[f64] {
        &self.col_norm_gxe
    }

    /// `G_i . (G_i * E)`.
    #[inline]
    pub fn cross(&self, i: usize) -> f64 {
        self.cross[i]
    }

    pub fn y_norm_sq(&self) -> f64 {
        self.y_norm_sq
    }

    pub fn e_sum(&self) -> f64 {
        self.e_sum
    }

    pub fn e_norm_sq(&self) -> f64 {
        self.e_norm_sq
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// `(G_i . v, (G_i * E) . v)` in a single pass.
    #[inline]
    pub fn block_dots(&self, i: usize, v: &[f64]) -> (f64, f64) {
        let g = self.g_col(i);
        match &self.gxe {
            Some(m) => {
                let x = &m[i * self.n..(i + 1) * self.n];
                let (mut a, mut b) = (0.0, 0.0);
                for k in 0..self.n {
                    a += g[k] * v[k];
                    b += x[k] * v[k];
                }
                (a, b)
            }
            None => {
                let (mut a, mut b) = (0.0, 0.0);
                for ((&gk, &ek), &vk) in g.iter().zip(&self.e).zip(v) {
                    let t = gk * vk;
                    a += t;
                    b += t * ek;
                }
                (a, b)
            }
        }
    }

    /// `v += alpha * G_i + beta * (G_i * E)`.
    #[inline]
    pub fn block_axpy(&self, i: usize, alpha: f64, beta: f64, v: &mut [f64]) {
        let g = self.g_col(i);
        match &self.gxe {
            Some(m) => {
                let x = &m[i * self.n..(i + 1) * self.n];
                for k in 0..self.n {
                    v[k] += alpha * g[k] + beta * x[k];
                }
            }
            None => {
                for ((vk, &gk), &ek) in v.iter_mut().zip(g).zip(&self.e) {
                    *vk += gk * (alpha + beta * ek);
                }
            }
        }
    }

    /// True when the block carries no information at all (both columns zero).
    #[inline]
    pub fn block_is_null(&self, i: usize) -> bool {
        self.col_norm_g[i] <= ZERO_NORM && self.col_norm_gxe[i] <= ZERO_NORM
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(GessoError::NonFinite(format!("{name} at position {k}"))),
        None => Ok(()),
    }
}
