//! `gesso` command-line interface.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gesso::io::{self, CellRecord, CvTable, DataFormat, RawData, ResultDocument};
use gesso::simdata::{self, Genotype, Ranking, SimMode, SimSpec, SimTruth};
use gesso::tuning::{self, GridCell, PenaltyGrid};
use gesso::{Dataset, GessoError, PenaltyPair, SolverConfig, StandardizeOptions, Variant};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "gesso", version, about = "Hierarchical G x E lasso with Gap-SAFE screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one penalty pair or a warm-started grid.
    Fit(FitArgs),
    /// K-fold cross-validation over the grid, optionally repeated.
    Cv(CvArgs),
    /// Simulate a dataset and its generating truth.
    Simulate(SimArgs),
    /// Time the four solver variants over a simulated grid.
    Bench(BenchArgs),
    /// Interaction AUC and precision of a result against a truth file.
    Metrics(MetricsArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset path (CSV with header `y,e,g1..gp`, or GESSO1 binary).
    #[arg(long)]
    data: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Use the columns as given instead of centering and scaling them.
    #[arg(long)]
    no_standardize: bool,
}

impl DataArgs {
    fn load(&self) -> gesso::Result<Dataset> {
        let fmt = self.format.map(Into::into).unwrap_or_else(|| DataFormat::from_path(&self.data));
        io::load_dataset(
            &self.data,
            fmt,
            StandardizeOptions {
                standardize: !self.no_standardize,
            },
        )
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative duality-gap tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Disable Gap-SAFE screening inside the working-set solver.
    #[arg(long)]
    no_screening: bool,
    /// Cap on coordinate descent cycles per inner solve.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::WsMaxdiffAs)]
    variant: VariantArg,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let base = SolverConfig {
            tol_gap: self.tol,
            max_iter_inner: self.max_iter,
            use_screening: !self.no_screening,
            ..SolverConfig::default()
        };
        Variant::from(self.variant).configure(&base)
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid size per axis.
    #[arg(long, default_value_t = 30)]
    grid: usize,
    /// Smallest penalty as a fraction of lambda_max.
    #[arg(long, default_value_t = 0.01)]
    eps_ratio: f64,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a human-readable table to stdout.
    #[arg(long)]
    pretty: bool,
    /// Leave wall-clock times out of the output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, requires = "lambda2")]
    lambda1: Option<f64>,
    #[arg(long, requires = "lambda1")]
    lambda2: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Repeat cross-validation and report selection rates when above 1.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Clone)]
struct SimSpecArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::StrongHierarchical)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2500)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    p_g: usize,
    #[arg(long, default_value_t = 5)]
    p_gxe: usize,
    /// Main-effect magnitude; the mode default when omitted.
    #[arg(long)]
    beta_g: Option<f64>,
    /// Interaction magnitude; the mode default when omitted.
    #[arg(long)]
    beta_gxe: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta_e: f64,
    #[arg(long, default_value_t = 0.3)]
    e_prevalence: f64,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    #[arg(long, value_enum, default_value_t = GenotypeArg::Normal)]
    genotype: GenotypeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimSpecArgs {
    fn spec(&self) -> SimSpec {
        let mode = SimMode::from(self.mode);
        let mut spec = SimSpec::new(mode, self.n, self.p, self.p_g, self.p_gxe, self.seed);
        if let Some(b) = self.beta_g {
            spec.beta_g_mag = b;
        }
        if let Some(b) = self.beta_gxe {
            spec.beta_gxe_mag = b;
        }
        spec.beta_e = self.beta_e;
        spec.e_prevalence = self.e_prevalence;
        spec.target_snr = self.snr;
        spec.genotype = match self.genotype {
            GenotypeArg::Normal => Genotype::Normal,
            GenotypeArg::Binomial => Genotype::Binomial,
        };
        spec
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    spec: SimSpecArgs,
    /// Dataset output path.
    #[arg(long)]
    out: PathBuf,
    /// Truth JSON output path; defaults to `<out>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    spec: SimSpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Timed repetitions per variant.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    result: PathBuf,
    #[arg(long, value_enum, default_value_t = RankingArg::Path)]
    ranking: RankingArg,
    /// Cell for magnitude ranking; the CV choice or the last cell by default.
    #[arg(long)]
    cell: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => DataFormat::Csv,
            FormatArg::Bin => DataFormat::Bin,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Bcd,
    Ws,
    WsMaxdiff,
    WsMaxdiffAs,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Bcd => Variant::Bcd,
            VariantArg::Ws => Variant::WorkingSet,
            VariantArg::WsMaxdiff => Variant::WorkingSetMaxDiff,
            VariantArg::WsMaxdiffAs => Variant::WorkingSetActiveSet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    StrongHierarchical,
    Hierarchical,
    AntiHierarchical,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::StrongHierarchical => SimMode::StrongHierarchical,
            ModeArg::Hierarchical => SimMode::Hierarchical,
            ModeArg::AntiHierarchical => SimMode::AntiHierarchical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenotypeArg {
    Normal,
    Binomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingArg {
    Path,
    Magnitude,
}

enum Failure {
    Usage(String),
    Io(String),
    NotConverged,
}

impl From<GessoError> for Failure {
    fn from(e: GessoError) -> Self {
        match e {
            GessoError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let res = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: solver did not reach the gap tolerance");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}

/// `GESSO_THREADS` caps the worker pool.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GESSO_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("GESSO_THREADS must be a positive integer, got {v:?}"))?;
    if k == 0 {
        return Err("GESSO_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| e.to_string())
}

fn emit<T: Serialize>(value: &T, out: &OutputArgs, table: impl FnOnce() -> String) -> CmdResult {
    let json = serde_json::to_string(value).map_err(|e| Failure::Io(e.to_string()))?;
    if let Some(path) = &out.out {
        std::fs::write(path, &json).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    if out.pretty {
        print!("{}", table());
    } else if out.out.is_none() {
        println!("{json}");
    }
    Ok(())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn grid_for(ds: &Dataset, g: &GridArgs) -> gesso::Result<PenaltyGrid> {
    tuning::build_grid(ds, g.grid, g.grid, g.eps_ratio)
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    let ds = a.data.load()?;
    let cfg = a.solver.config();
    let grid = match (a.lambda1, a.lambda2) {
        (Some(l1), Some(l2)) => {
            PenaltyPair::new(l1, l2)?;
            let mut g = PenaltyGrid::from_values(vec![l1], vec![l2])?;
            g.lambda_max = tuning::lambda_max(&ds);
            g
        }
        _ => grid_for(&ds, &a.grid)?,
    };
    let mut doc = ResultDocument::new(ds.n(), ds.p(), cfg.clone());
    let mut prev: Vec<gesso::FitResult> = Vec::with_capacity(grid.n_cells());
    for cell in grid.cells() {
        let warm = cell.warm_from.map(|k| &prev[k].coefficients);
        let (fit, secs) = timed(|| gesso::fit(&ds, &cell.pen, &cfg, warm));
        let fit = fit?;
        doc.cells
            .push(CellRecord::from_fit(&cell, &fit, (!a.output.no_timing).then_some(secs)));
        prev.push(fit);
    }
    doc.grid = Some(grid);
    finish(&doc, &a.output)
}

fn finish(doc: &ResultDocument, out: &OutputArgs) -> CmdResult {
    emit(doc, out, || report::cells_table(doc))?;
    if doc.all_converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_cv(a: CvArgs) -> CmdResult {
    if a.runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    let ds = a.data.load()?;
    let cfg = a.solver.config();
    let grid = grid_for(&ds, &a.grid)?;
    let cv = tuning::cross_validate(&ds, &grid, a.folds, &cfg, a.seed)?;
    let mut doc = ResultDocument::new(ds.n(), ds.p(), cfg.clone());

    // full-data path so that the document carries the chosen cell's fit
    let cells = grid.cells();
    let mut prev: Vec<gesso::FitResult> = Vec::with_capacity(cells.len());
    for cell in &cells {
        let warm = cell.warm_from.map(|k| &prev[k].coefficients);
        let (fit, secs) = timed(|| gesso::fit(&ds, &cell.pen, &cfg, warm));
        let fit = fit?;
        doc.cells
            .push(CellRecord::from_fit(cell, &fit, (!a.output.no_timing).then_some(secs)));
        prev.push(fit);
    }
    doc.cv = Some(CvTable::new(&cv, a.seed));
    if a.runs > 1 {
        doc.selection = Some(tuning::selection_rates(&ds, &grid, a.folds, a.runs, &cfg, a.seed)?);
    }
    doc.grid = Some(grid);
    finish(&doc, &a.output)
}

fn cmd_simulate(a: SimArgs) -> CmdResult {
    let spec = a.spec.spec();
    let (ds, truth) = simdata::simulate(&spec)?;
    let fmt = a.format.map(Into::into).unwrap_or_else(|| DataFormat::from_path(&a.out));
    io::save_dataset(&a.out, fmt, &RawData::from_dataset(&ds))?;
    let truth_path = a.truth.unwrap_or_else(|| truth_path_for(&a.out));
    let doc = TruthDocument { spec, truth };
    let json = serde_json::to_string(&doc).map_err(|e| Failure::Io(e.to_string()))?;
    std::fs::write(&truth_path, json).map_err(|e| Failure::Io(format!("{}: {e}", truth_path.display())))?;
    Ok(())
}

fn truth_path_for(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

#[derive(Serialize, serde::Deserialize)]
struct TruthDocument {
    spec: SimSpec,
    truth: SimTruth,
}

#[derive(Serialize)]
struct BenchRow {
    variant: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
    cells: usize,
    gap_checks: usize,
    max_ws: usize,
    all_converged: bool,
}

#[derive(Serialize)]
struct BenchReport {
    n: usize,
    p: usize,
    grid: usize,
    tol: f64,
    rows: Vec<BenchRow>,
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    if a.repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    let spec = a.spec.spec();
    let (raw, _) = simdata::simulate(&spec)?;
    let ds = raw.to_standardized();
    let grid = grid_for(&ds, &a.grid)?;
    let base = SolverConfig::default().with_tol(a.tol);
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let cfg = v.configure(&base);
        let mut total = 0.0;
        let mut path = Vec::new();
        for _ in 0..a.repeats {
            let (res, secs) = timed(|| tuning::fit_path(&ds, &grid, &cfg));
            path = res?;
            total += secs;
        }
        rows.push(BenchRow {
            variant: v.name(),
            seconds: (!a.output.no_timing).then_some(total / a.repeats as f64),
            cells: path.len(),
            gap_checks: path.iter().map(|pt| pt.fit.meta.gap_checks).sum(),
            max_ws: path.iter().map(|pt| pt.fit.meta.ws_size_final).max().unwrap_or(0),
            all_converged: path.iter().all(|pt| pt.fit.meta.converged),
        });
    }
    let report = BenchReport {
        n: ds.n(),
        p: ds.p(),
        grid: a.grid.grid,
        tol: a.tol,
        rows,
    };
    let converged = report.rows.iter().all(|r| r.all_converged);
    emit(&report, &a.output, || {
        report::bench_table(report.rows.iter().map(|r| {
            (r.variant, r.seconds, r.gap_checks, r.max_ws, r.all_converged)
        }))
    })?;
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

#[derive(Serialize)]
struct MetricsReport {
    ranking: Ranking,
    auc_gxe: Option<f64>,
    n_discovered: usize,
    precision_at_k: Vec<f64>,
}

fn cmd_metrics(a: MetricsArgs) -> CmdResult {
    let truth_json = std::fs::read_to_string(&a.truth).map_err(|e| Failure::Io(format!("{}: {e}", a.truth.display())))?;
    let truth: TruthDocument = serde_json::from_str(&truth_json).map_err(|e| Failure::Io(e.to_string()))?;
    let doc = ResultDocument::read(&a.result)?;
    if doc.p != truth.truth.beta_gxe.len() {
        return Err(Failure::Usage(format!(
            "result has p = {} but truth has p = {}",
            doc.p,
            truth.truth.beta_gxe.len()
        )));
    }
    let (ranking, order) = match a.ranking {
        RankingArg::Path => (Ranking::PathEntry, entry_order(&doc)?),
        RankingArg::Magnitude => {
            let default = doc.cv.as_ref().map_or(doc.cells.len().saturating_sub(1), |cv| cv.best_cell);
            let k = a.cell.unwrap_or(default);
            let cell = doc
                .cells
                .get(k)
                .ok_or_else(|| Failure::Usage(format!("cell {k} out of range")))?;
            (Ranking::Magnitude, simdata::magnitude_order(&cell.coefficients(doc.p)?))
        }
    };
    let m = simdata::selection_metrics(&order, &truth.truth);
    let report = MetricsReport {
        ranking,
        auc_gxe: m.auc_gxe,
        n_discovered: m.n_discovered,
        precision_at_k: m.precision_at_k,
    };
    emit(&report, &a.output, || {
        report::metrics_table(report.auc_gxe, &report.precision_at_k)
    })
}

/// Entry order over the stored cells, which are in traversal order.
fn entry_order(doc: &ResultDocument) -> Result<Vec<usize>, Failure> {
    let mut path = Vec::with_capacity(doc.cells.len());
    for c in &doc.cells {
        let coefficients = c.coefficients(doc.p)?;
        path.push(tuning::PathPoint {
            cell: GridCell {
                i1: c.i1,
                i2: c.i2,
                pen: c.pen(),
                warm_from: None,
            },
            fit: gesso::FitResult {
                coefficients,
                meta: c.meta.clone(),
                pen: c.pen(),
            },
        });
    }
    Ok(simdata::entry_order(&path))
}
