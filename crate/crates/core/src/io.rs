//! Dataset files and result documents.
//!
//! CSV: a header row, then one row per observation with columns
//! `y, e, g_1, ..., g_p`.
//!
//! Binary (`GESSO1`): a 32-byte header followed by little-endian `f64` runs.
//!
//! ```text
//! offset  0  magic  b"GESSO1\0\0"
//! offset  8  n      u64
//! offset 16  p      u64
//! offset 24  dtype  u64 (1 = f64)
//! offset 32  G      n * p values, row-major
//!            Y      n values
//!            E      n values
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use memmap2::Mmap;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StandardizeOptions};
use crate::error::{GessoError, Result};
use crate::model::{Coefficients, FitMeta, PenaltyPair};
use crate::solver::{FitResult, SolverConfig};
use crate::tuning::{CvResult, GridCell, PenaltyGrid, SelectionRates};

pub const BIN_MAGIC: [u8; 8] = *b"GESSO1\0\0";
pub const BIN_HEADER_LEN: usize = 32;
pub const DTYPE_F64: u64 = 1;
pub const SCHEMA_VERSION: &str = "1";
/// Coefficients at or below this magnitude are omitted from documents.
pub const SPARSE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Bin,
}

impl DataFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "bin" => Some(Self::Bin),
            _ => None,
        }
    }

    /// From the file extension, `.bin` or anything else as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Self::Bin,
            _ => Self::Csv,
        }
    }
}

/// File contents before standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub n: usize,
    pub p: usize,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    /// Row-major `n x p`.
    pub g: Vec<f64>,
}

impl RawData {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let (n, p) = (ds.n(), ds.p());
        let mut g = vec![0.0; n * p];
        for i in 0..p {
            for (r, &v) in ds.g_col(i).iter().enumerate() {
                g[r * p + i] = v;
            }
        }
        Self {
            n,
            p,
            y: ds.y().to_vec(),
            e: ds.e().to_vec(),
            g,
        }
    }

    pub fn into_dataset(self, opts: StandardizeOptions) -> Result<Dataset> {
        Dataset::from_row_major(self.y, &self.g, self.e, opts)
    }
}

pub fn load_dataset(path: &Path, format: DataFormat, opts: StandardizeOptions) -> Result<Dataset> {
    let raw = match format {
        DataFormat::Csv => read_csv(path)?,
        DataFormat::Bin => read_bin(path)?,
    };
    raw.into_dataset(opts)
}

pub fn save_dataset(path: &Path, format: DataFormat, raw: &RawData) -> Result<()> {
    match format {
        DataFormat::Csv => write_csv(path, raw),
        DataFormat::Bin => write_bin(path, raw),
    }
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> GessoError {
    GessoError::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Rows and columns in errors are 1-based file positions (the header is row 1).
pub fn read_csv(path: &Path) -> Result<RawData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let width = rdr.headers()?.len();
    if width < 3 {
        return Err(GessoError::Format(format!(
            "expected columns y, e and at least one genotype, found {width}"
        )));
    }
    let p = width - 2;
    let (mut y, mut e, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|err| parse_err(row, 0, err.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(
                row,
                rec.len().min(width) + 1,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row, c + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, c + 1, format!("non-finite value {field:?}")));
            }
            match c {
                0 => y.push(v),
                1 => e.push(v),
                _ => g.push(v),
            }
        }
    }
    if y.is_empty() {
        return Err(GessoError::Format("no data rows".into()));
    }
    Ok(RawData {
        n: y.len(),
        p,
        y,
        e,
        g,
    })
}

pub fn write_csv(path: &Path, raw: &RawData) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string(), "e".to_string()];
    header.extend((1..=raw.p).map(|j| format!("g{j}")));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(raw.p + 2);
    for r in 0..raw.n {
        rec.clear();
        rec.push(raw.y[r].to_string());
        rec.push(raw.e[r].to_string());
        rec.extend(raw.g[r * raw.p..(r + 1) * raw.p].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn u64_at(buf: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(buf[off..off + 8].try_into().expect("8 bytes"))
}

/// Decodes a complete `GESSO1` buffer.
pub fn decode_bin(buf: &[u8]) -> Result<RawData> {
    if buf.len() < BIN_HEADER_LEN {
        return Err(GessoError::Format(format!(
            "file of {} bytes is shorter than the {BIN_HEADER_LEN}-byte header",
            buf.len()
        )));
    }
    if buf[..8] != BIN_MAGIC {
        return Err(GessoError::Format("bad magic, not a GESSO1 file".into()));
    }
    let n = u64_at(buf, 8);
    let p = u64_at(buf, 16);
    let dtype = u64_at(buf, 24);
    if dtype != DTYPE_F64 {
        return Err(GessoError::Format(format!("unsupported element type tag {dtype}")));
    }
    let values = n
        .checked_mul(p)
        .and_then(|np| np.checked_add(n.checked_mul(2)?))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| GessoError::Format(format!("header dimensions n = {n}, p = {p} overflow")))?;
    let payload = &buf[BIN_HEADER_LEN..];
    if Some(payload.len()) != values.checked_mul(8) {
        return Err(GessoError::Format(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            values as u128 * 8
        )));
    }
    let (n, p) = (n as usize, p as usize);
    let mut floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let g: Vec<f64> = floats.by_ref().take(n * p).collect();
    let y: Vec<f64> = floats.by_ref().take(n).collect();
    let e: Vec<f64> = floats.collect();
    let names = ["G", "Y", "E"];
    for (name, v) in names.iter().zip([&g, &y, &e]) {
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(GessoError::NonFinite(format!("{name} entry {k} is not finite")));
        }
    }
    Ok(RawData { n, p, y, e, g })
}

/// Memory-maps `path` and decodes it.
pub fn read_bin(path: &Path) -> Result<RawData> {
    let file = File::open(path)?;
    // SAFETY: the mapping is read-only and dropped before returning; the file
    // is not expected to be modified concurrently.
    let map = unsafe { Mmap::map(&file)? };
    decode_bin(&map)
}

pub fn encode_bin(raw: &RawData) -> Vec<u8> {
    let mut out = Vec::with_capacity(BIN_HEADER_LEN + 8 * (raw.n * raw.p + 2 * raw.n));
    out.extend_from_slice(&BIN_MAGIC);
    out.extend_from_slice(&(raw.n as u64).to_le_bytes());
    out.extend_from_slice(&(raw.p as u64).to_le_bytes());
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    for v in raw.g.iter().chain(&raw.y).chain(&raw.e) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_bin(path: &Path, raw: &RawData) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_bin(raw))?;
    w.flush()?;
    Ok(())
}

/// One fitted grid cell with coefficients stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub i1: usize,
    pub i2: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta0: f64,
    pub beta_e: f64,
    /// `(index, value)` main effects above the threshold.
    pub beta_g: Vec<(usize, f64)>,
    pub beta_gxe: Vec<(usize, f64)>,
    pub meta: FitMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

fn sparse(v: impl Iterator<Item = f64>) -> Vec<(usize, f64)> {
    v.enumerate().filter(|(_, x)| x.abs() > SPARSE_THRESHOLD).collect()
}

impl CellRecord {
    pub fn from_fit(cell: &GridCell, fit: &FitResult, seconds: Option<f64>) -> Self {
        let c = &fit.coefficients;
        Self {
            i1: cell.i1,
            i2: cell.i2,
            lambda1: cell.pen.lambda1,
            lambda2: cell.pen.lambda2,
            beta0: c.beta0,
            beta_e: c.beta_e,
            beta_g: sparse((0..c.p()).map(|i| c.beta_g(i))),
            beta_gxe: sparse(c.beta_gxe.iter().copied()),
            meta: fit.meta.clone(),
            seconds,
        }
    }

    pub fn pen(&self) -> PenaltyPair {
        PenaltyPair {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }

    /// Dense coefficients for a problem with `p` blocks.
    pub fn coefficients(&self, p: usize) -> Result<Coefficients> {
        let mut g = vec![0.0; p];
        let mut t = vec![0.0; p];
        for (dst, src) in [(&mut g, &self.beta_g), (&mut t, &self.beta_gxe)] {
            for &(i, v) in src {
                if i >= p {
                    return Err(GessoError::Dimension(format!("coefficient index {i} >= p = {p}")));
                }
                dst[i] = v;
            }
        }
        Coefficients::from_effects(self.beta0, self.beta_e, &g, &t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub folds: usize,
    pub seed: u64,
    /// Per cell, traversal order.
    pub mean_loss: Vec<f64>,
    pub se_loss: Vec<f64>,
    pub best_cell: usize,
    pub best_pair: PenaltyPair,
}

impl CvTable {
    pub fn new(cv: &CvResult, seed: u64) -> Self {
        Self {
            folds: cv.folds.len(),
            seed,
            mean_loss: cv.mean_loss.clone(),
            se_loss: cv.se_loss.clone(),
            best_cell: cv.best_cell,
            best_pair: cv.best_pair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub n: usize,
    pub p: usize,
    pub config: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PenaltyGrid>,
    pub cells: Vec<CellRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRates>,
}

impl ResultDocument {
    pub fn new(n: usize, p: usize, config: SolverConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            n,
            p,
            config,
            grid: None,
            cells: Vec::new(),
            cv: None,
            selection: None,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.meta.converged)
    }

    pub fn to_json(&self, pretty: bool) -> Result<String> {
        Ok(if pretty {
            serde_json::to_string_pretty(self)?
        } else {
            serde_json::to_string(self)?
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(GessoError::Format(format!(
                "unsupported schema version {:?}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path, pretty: bool) -> Result<()> {
        std::fs::write(path, self.to_json(pretty)?)?;
        Ok(())
    }
}
