//! Command-line front end: CSV ingestion, estimator dispatch and artifact
//! export (CSV matrices, JSON metadata, network edge lists and DOT graphs).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::classify::{self, LabeledDataset};
use crate::data::{correlation_from_covariance, DataMatrix, Scaling};
use crate::inference::{self, FinancialNetwork};
use crate::numerics::{spd_inverse, SymmetricMatrix};
use crate::precision::{self, ZeroPattern};
use crate::regress::{self, PenaltyKind, PenaltySpec, RegressionData};
use crate::regularize::{self, CvConfig, CvMethod, ThresholdKind, ThresholdRule};
use crate::rng::SeedTree;
use crate::shrinkage::{self, SsTarget};
use crate::sparsepca;
use crate::spectra;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone)]
pub struct ReturnsTable {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    /// `n × p`, rows aligned with `dates`.
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputMode {
    /// Price levels; converted to log returns.
    Prices,
    /// Values used as given.
    Returns,
}

/// Reads a CSV with a header row of tickers and a leading date column.
pub fn ingest(path: &Path, mode: InputMode) -> CliResult<ReturnsTable> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    ingest_str(&text, mode)
}

pub fn ingest_str(text: &str, mode: InputMode) -> CliResult<ReturnsTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(CliError::Input("header needs a date column and at least one ticker".into()));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|t| t.trim().to_string()).collect();
    for (k, t) in tickers.iter().enumerate() {
        if t.is_empty() {
            return Err(CliError::Input(format!("ticker in column {} is blank", k + 2)));
        }
        if tickers[..k].contains(t) {
            return Err(CliError::Input(format!("duplicate ticker '{t}'")));
        }
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let date = record.get(0).unwrap_or("").trim().to_string();
        for (k, t) in tickers.iter().enumerate() {
            let cell = record.get(k + 1).unwrap_or("").trim();
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                CliError::Input(format!(
                    "missing or non-numeric value '{cell}' at data row {} (date '{date}'), column {} ('{t}')",
                    r + 1,
                    k + 2
                ))
            })?;
            values.push(v);
        }
        dates.push(date);
    }
    let p = tickers.len();
    let prices = DMatrix::from_row_slice(dates.len(), p, &values);
    match mode {
        InputMode::Returns => {
            if dates.len() < 2 {
                return Err(CliError::Input(format!("need at least 2 rows of returns, found {}", dates.len())));
            }
            Ok(ReturnsTable { dates, tickers, values: prices })
        }
        InputMode::Prices => {
            if dates.len() < 3 {
                return Err(CliError::Input(format!("need at least 3 rows of prices, found {}", dates.len())));
            }
            if let Some(idx) = prices.iter().position(|&v| v <= 0.0) {
                let (r, c) = (idx % dates.len(), idx / dates.len());
                return Err(CliError::Input(format!(
                    "price at data row {} (date '{}'), column {} ('{}') is not positive",
                    r + 1,
                    dates[r],
                    c + 2,
                    tickers[c]
                )));
            }
            let n = dates.len() - 1;
            let returns = DMatrix::from_fn(n, p, |i, j| (prices[(i + 1, j)] / prices[(i, j)]).ln());
            Ok(ReturnsTable { dates: dates[1..].to_vec(), tickers, values: returns })
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hdcov", version, about = "High-dimensional covariance, precision and network estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input CSV: date column, then one column per ticker.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputMode::Returns)]
    pub mode: InputMode,
    /// Directory receiving the artifacts; created if missing.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovMethod {
    Stein,
    Haff,
    Lw,
    Rblw,
    Diag,
    SsA,
    SsB,
    SsC,
    SsD,
    SsE,
    SsF,
    Band,
    Taper,
    Thresh,
    Adaptive,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Hard,
    Soft,
}

impl From<KindArg> for ThresholdKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Hard => ThresholdKind::Hard,
            KindArg::Soft => ThresholdKind::Soft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionMethod {
    Glasso,
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectMethod {
    Fdr,
    Bonferroni,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressMethod {
    Ols,
    Rrr,
    Lasso,
    Ridge,
    Enet,
    Bridge,
    Group,
    Mrce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifyMethod {
    Fisher,
    Nb,
    Centroid,
    Knn,
    Svm,
    Ada,
    Realada,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    /// Independent standard normals.
    Iid,
    /// `X_k = ρ·X_{k−1} + Z_k`: a Gaussian Markov chain.
    Chain,
    /// `Σ_ij = ρ^|i−j|`.
    Ar1,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical spectrum of the standardized data against the Marchenko-Pastur law.
    Spectra {
        #[command(flatten)]
        common: Common,
        /// Number of grid points in the CDF table.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Covariance estimation.
    Cov {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: CovMethod,
        /// Band half-width for `band`.
        #[arg(long)]
        band: Option<usize>,
        /// Taper bandwidth for `taper`.
        #[arg(long)]
        taper_k: Option<f64>,
        /// Universal threshold for `thresh` and `factor`.
        #[arg(long)]
        lambda: Option<f64>,
        /// Multiplier for `adaptive`.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value_t = KindArg::Soft)]
        kind: KindArg,
        /// Number of factors for `factor`.
        #[arg(long)]
        factors: Option<usize>,
        /// Candidate values chosen by cross-validation (`band`, `thresh`, `adaptive`).
        #[arg(long, value_delimiter = ',')]
        cv_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 50)]
        cv_splits: usize,
    },
    /// Sparse precision matrix and partial correlations.
    Precision {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: PrecisionMethod,
        #[arg(long)]
        lambda: Option<f64>,
        /// Pairs forced to zero for `constrained`, as `A:B,C:D`.
        #[arg(long, value_delimiter = ',')]
        zeros: Vec<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Correlation network with multiple-testing or threshold edge selection.
    Network {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        select: SelectMethod,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        cut: Option<f64>,
        /// Use partial instead of marginal correlations.
        #[arg(long)]
        partial: bool,
        /// Keep only positive correlations above the cut.
        #[arg(long)]
        signed: bool,
    },
    /// Multivariate regression of the response file on the predictor file.
    Regress {
        #[command(flatten)]
        common: Common,
        /// Responses with the same dates as the input.
        #[arg(long)]
        response: PathBuf,
        #[arg(long, value_enum)]
        method: RegressMethod,
        #[arg(long)]
        lambda: Option<f64>,
        /// Coefficient penalty for `mrce`.
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
    /// Principal components, optionally sparse.
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sparse: bool,
        /// L1 bound on each sparse loading vector.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Train on one labelled CSV and report accuracy on another.
    Classify {
        /// Training CSV: `label` column (1..K) then features.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum)]
        method: ClassifyMethod,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Neighbours for `knn`.
        #[arg(long)]
        k: Option<usize>,
        /// Penalty for `svm`.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Boosting rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Synthetic Gaussian returns.
    Simulate {
        #[arg(long, value_enum)]
        model: SimModel,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Write price levels starting at 100 instead of returns.
        #[arg(long)]
        prices: bool,
    },
}

fn metadata(method: &str, hyper: Value, seed: u64, n: usize, p: usize) -> Value {
    json!({
        "method": method,
        "hyperparameters": hyper,
        "seed": seed,
        "version": VERSION,
        "n": n,
        "p": p,
    })
}

struct Writer {
    dir: PathBuf,
}

impl Writer {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn text(&self, name: &str, body: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path, source })
    }

    fn json(&self, name: &str, value: &Value) -> CliResult<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Square matrix with ticker header row and column.
pub fn matrix_csv(names: &[String], m: &DMatrix<f64>) -> String {
    rect_csv("", names, names, m)
}

fn rect_csv(corner: &str, rows: &[String], cols: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::from(corner);
    for c in cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        out.push_str(r);
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&num(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn network_dot(net: &FinancialNetwork) -> String {
    let mut out = String::from("graph network {\n");
    for node in &net.nodes {
        out.push_str(&format!("  \"{}\";\n", dot_escape(node)));
    }
    for e in &net.edges {
        out.push_str(&format!(
            "  \"{}\" -- \"{}\" [weight={}];\n",
            dot_escape(&net.nodes[e.i]),
            dot_escape(&net.nodes[e.j]),
            num(e.weight)
        ));
    }
    out.push_str("}\n");
    out
}

pub fn network_csv(net: &FinancialNetwork) -> String {
    let mut out = String::from("source,target,i,j,weight,pvalue\n");
    for e in &net.edges {
        let pv = e.pvalue.map(num).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{},{}\n", net.nodes[e.i], net.nodes[e.j], e.i, e.j, num(e.weight), pv));
    }
    out
}

fn data_matrix(t: &ReturnsTable) -> CliResult<DataMatrix> {
    Ok(DataMatrix::new(t.values.clone())?)
}

fn require<T>(v: Option<T>, flag: &str, method: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("--{flag} is required for {method}")))
}

fn reject(present: bool, flag: &str, context: &str) -> CliResult<()> {
    if present {
        return Err(usage(format!("--{flag} does not apply to {context}")));
    }
    Ok(())
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Spectra { common, grid } => run_spectra(&common, grid),
        Command::Cov { common, method, band, taper_k, lambda, delta, kind, factors, cv_grid, cv_splits } => {
            run_cov(&common, CovArgs { method, band, taper_k, lambda, delta, kind, factors, cv_grid, cv_splits })
        }
        Command::Precision { common, method, lambda, zeros, tol } => run_precision(&common, method, lambda, &zeros, tol),
        Command::Network { common, select, alpha, cut, partial, signed } => {
            run_network(&common, select, alpha, cut, partial, signed)
        }
        Command::Regress { common, response, method, lambda, lambda2, alpha, gamma, rank, tol, max_iter } => run_regress(
            &common,
            &response,
            RegressArgs { method, lambda, lambda2, alpha, gamma, rank, tol, max_iter },
        ),
        Command::Pca { common, sparse, c, k } => run_pca(&common, sparse, c, k),
        Command::Classify { train, test, method, out_dir, seed, k, lambda, epochs, rounds } => {
            run_classify(&train, &test, method, &out_dir, seed, ClassifyArgs { k, lambda, epochs, rounds })
        }
        Command::Simulate { model, n, p, rho, seed, out, prices } => run_simulate(model, n, p, rho, seed, &out, prices),
    }
}

fn run_spectra(common: &Common, grid: usize) -> CliResult<()> {
    if grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    let table = ingest(&common.input, common.mode)?;
    let x = data_matrix(&table)?;
    let (n, p) = (x.n(), x.p());
    // standardized columns, so the reference law has σ = 1
    let mut z = x.centered();
    for mut col in z.column_iter_mut() {
        let sd = (col.norm_squared() / n as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    let s = SymmetricMatrix::symmetrized(z.transpose() * &z / n as f64);
    let e = spectra::esd(&s);
    let law = spectra::mp_law(1.0, p as f64 / n as f64)?;
    let ks = spectra::ks_distance(&e, &law);
    let hi = law.b.max(e.max()) * 1.05;
    let mut csv = String::from("x,esd_cdf,mp_cdf,mp_density\n");
    for k in 0..grid {
        let xv = hi * k as f64 / (grid - 1) as f64;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            num(xv),
            num(spectra::esd_cdf(&e, xv)),
            num(spectra::mp_cdf(xv, &law)),
            num(spectra::mp_density(xv, &law))
        ));
    }
    let lambda1 = spectra::largest_gram_eigenvalue(&z);
    let tw = spectra::tw_scaling(n, p)?;
    let summary = json!({
        "metadata": metadata("spectra", json!({"sigma": 1.0, "grid": grid}), common.seed, n, p),
        "y": law.y,
        "mp_lower_edge": law.a,
        "mp_upper_edge": law.b,
        "mp_mass_at_zero": law.mass_at_zero,
        "esd_min": e.min(),
        "esd_max": e.max(),
        "ks_distance": ks,
        "gram_lambda_max": lambda1,
        "tw_mu": tw.mu_np,
        "tw_sigma": tw.sigma_np,
        "tw_statistic": tw.standardize(lambda1),
    });
    let w = Writer::new(&common.out_dir)?;
    w.text("spectra.csv", &csv)?;
    w.json("spectra.json", &summary)
}

struct CovArgs {
    method: CovMethod,
    band: Option<usize>,
    taper_k: Option<f64>,
    lambda: Option<f64>,
    delta: Option<f64>,
    kind: KindArg,
    factors: Option<usize>,
    cv_grid: Option<Vec<f64>>,
    cv_splits: usize,
}

fn run_cov(common: &Common, a: CovArgs) -> CliResult<()> {
    let table = ingest(&common.input, common.mode)?;
    let x = data_matrix(&table)?;
    let (n, p) = (x.n(), x.p());
    let name = a.method.to_possible_value().unwrap().get_name().to_string();
    let kind: ThresholdKind = a.kind.into();
    let cv_ok = matches!(a.method, CovMethod::Band | CovMethod::Thresh | CovMethod::Adaptive);
    reject(a.cv_grid.is_some() && !cv_ok, "cv-grid", &name)?;
    reject(a.band.is_some() && a.method != CovMethod::Band, "band", &name)?;
    reject(a.taper_k.is_some() && a.method != CovMethod::Taper, "taper-k", &name)?;
    reject(a.delta.is_some() && a.method != CovMethod::Adaptive, "delta", &name)?;
    reject(a.factors.is_some() && a.method != CovMethod::Factor, "factors", &name)?;
    reject(a.lambda.is_some() && !matches!(a.method, CovMethod::Thresh | CovMethod::Factor), "lambda", &name)?;

    let cv = |method: CvMethod| -> CliResult<Option<regularize::CvResult>> {
        match &a.cv_grid {
            None => Ok(None),
            Some(grid) => {
                let mut cfg = CvConfig::new(grid.clone(), common.seed);
                cfg.num_splits = a.cv_splits;
                Ok(Some(regularize::cv_tune(&x, method, &cfg)?))
            }
        }
    };
    let s_pop = x.covariance(Scaling::Population);
    let mut hyper = serde_json::Map::new();
    let mut extra = serde_json::Map::new();
    let estimate: SymmetricMatrix = match a.method {
        CovMethod::Stein => {
            let est = shrinkage::stein_shrink(&x.covariance(Scaling::Unbiased), n)?;
            extra.insert("eigenvalues".into(), json!(est.lambda));
            extra.insert("shrunk_eigenvalues".into(), json!(est.psi));
            est.estimate()
        }
        CovMethod::Haff => {
            let est = shrinkage::haff_estimate(&x.covariance(Scaling::Unbiased), n)?;
            extra.insert("coefficient".into(), json!(est.coefficient));
            extra.insert("floored".into(), json!(est.floored));
            est.estimate
        }
        CovMethod::Lw => {
            let (est, parts) = shrinkage::ledoit_wolf(&x)?;
            extra.insert("intensity".into(), json!(est.intensity));
            extra.insert("m".into(), json!(parts.m));
            extra.insert("d2".into(), json!(parts.d2));
            extra.insert("b2".into(), json!(parts.b2));
            est.estimate
        }
        CovMethod::Rblw => {
            let est = shrinkage::rblw_estimate(&s_pop, n)?;
            extra.insert("intensity".into(), json!(est.intensity));
            est.estimate
        }
        CovMethod::Diag => {
            let est = shrinkage::diag_target_estimate(&s_pop, n)?;
            extra.insert("intensity".into(), json!(est.intensity));
            est.estimate
        }
        CovMethod::SsA | CovMethod::SsB | CovMethod::SsC | CovMethod::SsD | CovMethod::SsE | CovMethod::SsF => {
            let target: SsTarget = name.trim_start_matches("ss-").parse()?;
            let est = shrinkage::schafer_strimmer(&x, target)?;
            extra.insert("intensity".into(), json!(est.intensity));
            extra.insert("target".into(), json!(est.target_kind.name()));
            est.estimate
        }
        CovMethod::Band => {
            let l = match cv(CvMethod::Band)? {
                Some(r) => {
                    extra.insert("cv_scores".into(), json!(r.scores));
                    r.selected.max(0.0) as usize
                }
                None => require(a.band, "band", "band")?,
            };
            hyper.insert("band".into(), json!(l));
            regularize::band(&s_pop, l)
        }
        CovMethod::Taper => {
            let k = require(a.taper_k, "taper-k", "taper")?;
            hyper.insert("taper_k".into(), json!(k));
            regularize::taper(&s_pop, &regularize::trapezoid_taper(p, k)?)?
        }
        CovMethod::Thresh => {
            let l = match cv(CvMethod::Threshold(kind))? {
                Some(r) => {
                    extra.insert("cv_scores".into(), json!(r.scores));
                    r.selected
                }
                None => require(a.lambda, "lambda", "thresh")?,
            };
            hyper.insert("lambda".into(), json!(l));
            hyper.insert("kind".into(), json!(kind));
            regularize::threshold(&s_pop, &ThresholdRule::universal(kind, l)?)?
        }
        CovMethod::Adaptive => {
            let d = match cv(CvMethod::Adaptive(kind))? {
                Some(r) => {
                    extra.insert("cv_scores".into(), json!(r.scores));
                    r.selected
                }
                None => a.delta.unwrap_or(regularize::ADAPTIVE_DEFAULT_DELTA),
            };
            hyper.insert("delta".into(), json!(d));
            hyper.insert("kind".into(), json!(kind));
            regularize::adaptive_threshold(&x, d, kind)?
        }
        CovMethod::Factor => {
            let q = require(a.factors, "factors", "factor")?;
            let l = a.lambda.unwrap_or(0.0);
            hyper.insert("factors".into(), json!(q));
            hyper.insert("lambda".into(), json!(l));
            hyper.insert("kind".into(), json!(kind));
            regularize::approx_factor(&x, q, &ThresholdRule::universal(kind, l)?)?.estimate
        }
    };
    if let Some(grid) = &a.cv_grid {
        hyper.insert("cv_grid".into(), json!(grid));
        hyper.insert("cv_splits".into(), json!(a.cv_splits));
    }
    let mut doc = serde_json::Map::new();
    doc.insert("metadata".into(), metadata(&name, Value::Object(hyper), common.seed, n, p));
    doc.insert("tickers".into(), json!(table.tickers));
    doc.insert("min_eigenvalue".into(), json!(estimate.min_eigenvalue()));
    doc.extend(extra);
    let w = Writer::new(&common.out_dir)?;
    w.text("covariance.csv", &matrix_csv(&table.tickers, estimate.as_matrix()))?;
    w.json("covariance.json", &Value::Object(doc))
}

fn ticker_index(tickers: &[String], name: &str) -> CliResult<usize> {
    tickers
        .iter()
        .position(|t| t == name)
        .ok_or_else(|| usage(format!("unknown ticker '{name}' in --zeros")))
}

fn run_precision(common: &Common, method: PrecisionMethod, lambda: Option<f64>, zeros: &[String], tol: f64) -> CliResult<()> {
    let table = ingest(&common.input, common.mode)?;
    let x = data_matrix(&table)?;
    let (n, p) = (x.n(), x.p());
    let s = x.covariance(Scaling::Population);
    let (name, hyper, omega, extra) = match method {
        PrecisionMethod::Glasso => {
            reject(!zeros.is_empty(), "zeros", "glasso")?;
            let l = require(lambda, "lambda", "glasso")?;
            let r = precision::graphical_lasso(&s, l, tol)?;
            ("glasso", json!({"lambda": l, "tol": tol}), r.theta, json!({"iterations": r.iterations}))
        }
        PrecisionMethod::Constrained => {
            reject(lambda.is_some(), "lambda", "constrained")?;
            let mut pairs = Vec::with_capacity(zeros.len());
            for z in zeros {
                let (a, b) = z.split_once(':').ok_or_else(|| usage(format!("--zeros entry '{z}' is not of the form A:B")))?;
                pairs.push((ticker_index(&table.tickers, a.trim())?, ticker_index(&table.tickers, b.trim())?));
            }
            let pattern = ZeroPattern::new(p, pairs)?;
            let r = precision::constrained_mle(&s, &pattern, tol, 10_000)?;
            let names: Vec<String> =
                pattern.forbidden_edges().map(|&(i, j)| format!("{}:{}", table.tickers[i], table.tickers[j])).collect();
            (
                "constrained",
                json!({"zeros": names, "tol": tol}),
                r.omega,
                json!({"sweeps": r.sweeps, "kkt_residual": r.kkt_residual}),
            )
        }
    };
    let pc = precision::partial_correlations(&omega)?;
    let doc = json!({
        "metadata": metadata(name, hyper, common.seed, n, p),
        "tickers": table.tickers,
        "nonzero_offdiagonal": (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| omega[(i, j)] != 0.0).count(),
        "details": extra,
    });
    let w = Writer::new(&common.out_dir)?;
    w.text("precision.csv", &matrix_csv(&table.tickers, omega.as_matrix()))?;
    w.text("partial_correlations.csv", &matrix_csv(&table.tickers, pc.as_matrix()))?;
    w.json("precision.json", &doc)
}

fn run_network(
    common: &Common,
    select: SelectMethod,
    alpha: Option<f64>,
    cut: Option<f64>,
    partial: bool,
    signed: bool,
) -> CliResult<()> {
    let table = ingest(&common.input, common.mode)?;
    let x = data_matrix(&table)?;
    let (n, p) = (x.n(), x.p());
    if p < 2 {
        return Err(usage("a network needs at least 2 tickers"));
    }
    if partial && n <= p + 3 {
        return Err(usage(format!(
            "--partial needs n > p + 3 observations for the partial-correlation test (n = {n}, p = {p})"
        )));
    }
    let name = select.to_possible_value().unwrap().get_name().to_string();
    let (net, hyper) = match select {
        SelectMethod::Fdr | SelectMethod::Bonferroni => {
            reject(cut.is_some(), "cut", &name)?;
            reject(signed, "signed", &name)?;
            let a = require(alpha, "alpha", &name)?;
            let pv = inference::correlation_pvalues(&x, partial)?;
            let d = if select == SelectMethod::Fdr { inference::bh_procedure(&pv, a)? } else { inference::bonferroni(&pv, a)? };
            (inference::network_from_decisions(&table.tickers, &pv, &d)?, json!({"alpha": a, "partial": partial}))
        }
        SelectMethod::Threshold => {
            reject(alpha.is_some(), "alpha", "threshold")?;
            let c = require(cut, "cut", "threshold")?;
            let s = x.covariance(Scaling::Unbiased);
            let r = if partial { precision::partial_correlations(&SymmetricMatrix::symmetrized(spd_inverse(&s)?))? } else { correlation_from_covariance(&s)? };
            (
                inference::threshold_network(&table.tickers, &r, c, signed)?,
                json!({"cut": c, "partial": partial, "signed": signed}),
            )
        }
    };
    let doc = json!({
        "metadata": metadata(&name, hyper, common.seed, n, p),
        "nodes": net.nodes,
        "edges": net.edges,
    });
    let w = Writer::new(&common.out_dir)?;
    w.text("network.csv", &network_csv(&net))?;
    w.text("network.dot", &network_dot(&net))?;
    w.json("network.json", &doc)
}

struct RegressArgs {
    method: RegressMethod,
    lambda: Option<f64>,
    lambda2: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    rank: Option<usize>,
    tol: f64,
    max_iter: usize,
}

fn run_regress(common: &Common, response: &Path, a: RegressArgs) -> CliResult<()> {
    let xt = ingest(&common.input, common.mode)?;
    let yt = ingest(response, common.mode)?;
    if xt.dates != yt.dates {
        return Err(CliError::Input("predictor and response files must share the same dates".into()));
    }
    let data = RegressionData::new(xt.values.clone(), yt.values.clone())?;
    let (n, p, q) = (data.n(), data.p(), data.q());
    let name = a.method.to_possible_value().unwrap().get_name().to_string();
    use RegressMethod as M;
    reject(a.rank.is_some() && a.method != M::Rrr, "rank", &name)?;
    reject(a.lambda2.is_some() && a.method != M::Mrce, "lambda2", &name)?;
    reject(a.alpha.is_some() && a.method != M::Enet, "alpha", &name)?;
    reject(a.gamma.is_some() && a.method != M::Bridge, "gamma", &name)?;
    reject(a.lambda.is_some() && matches!(a.method, M::Ols | M::Rrr), "lambda", &name)?;
    let mut hyper = serde_json::Map::new();
    let mut extra = serde_json::Map::new();
    let penalized = |kind: PenaltyKind, hyper: &mut serde_json::Map<String, Value>| -> CliResult<regress::PenalizedFit> {
        let l = require(a.lambda, "lambda", &name)?;
        hyper.insert("lambda".into(), json!(l));
        Ok(regress::penalized(&data, &PenaltySpec::new(kind, l)?, a.tol, a.max_iter)?)
    };
    let b = match a.method {
        M::Ols => regress::ols(&data)?.b,
        M::Rrr => {
            let r = require(a.rank, "rank", "rrr")?;
            hyper.insert("rank".into(), json!(r));
            regress::reduced_rank(&data, r)?
        }
        M::Lasso | M::Ridge | M::Enet | M::Bridge | M::Group => {
            let kind = match a.method {
                M::Lasso => PenaltyKind::Lasso,
                M::Ridge => PenaltyKind::Ridge,
                M::Enet => {
                    let alpha = require(a.alpha, "alpha", "enet")?;
                    hyper.insert("alpha".into(), json!(alpha));
                    PenaltyKind::ElasticNet { alpha }
                }
                M::Bridge => {
                    let gamma = require(a.gamma, "gamma", "bridge")?;
                    hyper.insert("gamma".into(), json!(gamma));
                    PenaltyKind::Bridge { gamma }
                }
                _ => PenaltyKind::GroupLasso,
            };
            let fit = penalized(kind, &mut hyper)?;
            extra.insert("iterations".into(), json!(fit.iterations));
            extra.insert("kkt_residual".into(), json!(fit.kkt_residual));
            fit.b
        }
        M::Mrce => {
            let l1 = require(a.lambda, "lambda", "mrce")?;
            let l2 = require(a.lambda2, "lambda2", "mrce")?;
            hyper.insert("lambda".into(), json!(l1));
            hyper.insert("lambda2".into(), json!(l2));
            let fit = regress::mrce(&data, l1, l2, a.tol, a.max_iter)?;
            extra.insert("cycles".into(), json!(fit.cycles));
            extra.insert("objective".into(), json!(fit.objective_trace.last()));
            extra.insert("omega".into(), json!(fit.omega.as_matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()));
            fit.b
        }
    };
    if !matches!(a.method, M::Ols | M::Rrr) {
        hyper.insert("tol".into(), json!(a.tol));
        hyper.insert("max_iter".into(), json!(a.max_iter));
    }
    let rss = data.rss(&b);
    let mut doc = serde_json::Map::new();
    doc.insert("metadata".into(), metadata(&name, Value::Object(hyper), common.seed, n, p));
    doc.insert("responses".into(), json!(q));
    doc.insert("rss".into(), json!(rss));
    doc.extend(extra);
    let w = Writer::new(&common.out_dir)?;
    w.text("coefficients.csv", &rect_csv("predictor", &xt.tickers, &yt.tickers, &b))?;
    w.json("regress.json", &Value::Object(doc))
}

fn run_pca(common: &Common, sparse: bool, c: Option<f64>, k: usize) -> CliResult<()> {
    let table = ingest(&common.input, common.mode)?;
    let x = data_matrix(&table)?;
    let (n, p) = (x.n(), x.p());
    if k == 0 || k > n.min(p) {
        return Err(usage(format!("--k must lie in 1..={}", n.min(p))));
    }
    let s = x.covariance(Scaling::Population);
    let total_var: f64 = s.diagonal_vec().iter().sum();
    let (method, hyper, loadings, values, extra) = if sparse {
        let c = require(c, "c", "sparse pca")?;
        let xc = DataMatrix::new(x.centered())?;
        let factors = sparsepca::sparse_pca(&xc, c, k, 1e-10, 100_000)?;
        let m = DMatrix::from_fn(p, factors.len(), |i, j| factors[j].v[i]);
        let d: Vec<f64> = factors.iter().map(|f| f.d).collect();
        let iters: Vec<usize> = factors.iter().map(|f| f.iterations).collect();
        ("sparse_pca", json!({"c": c, "k": k}), m, d, json!({"iterations": iters}))
    } else {
        reject(c.is_some(), "c", "pca without --sparse")?;
        let eig = s.eigh();
        let m = eig.vectors.columns(0, k).into_owned();
        let d: Vec<f64> = (0..k).map(|j| (eig.values[j].max(0.0) * n as f64).sqrt()).collect();
        ("pca", json!({"k": k}), m, d, json!({}))
    };
    let explained: Vec<f64> = values.iter().map(|d| d * d / n as f64 / total_var).collect();
    let cols: Vec<String> = (1..=loadings.ncols()).map(|j| format!("PC{j}")).collect();
    let doc = json!({
        "metadata": metadata(method, hyper, common.seed, n, p),
        "singular_values": values,
        "variance_fraction": explained,
        "nonzero_loadings": (0..loadings.ncols()).map(|j| loadings.column(j).iter().filter(|v| **v != 0.0).count()).collect::<Vec<_>>(),
        "details": extra,
    });
    let w = Writer::new(&common.out_dir)?;
    w.text("loadings.csv", &rect_csv("ticker", &table.tickers, &cols, &loadings))?;
    w.json("pca.json", &doc)
}

/// Labelled CSV: header row, first column holds integer labels `1..K`.
pub fn read_labeled(path: &Path) -> CliResult<(LabeledDataset, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(CliError::Input(format!("{}: need a label column and at least one feature", path.display())));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let lab = rec.get(0).unwrap_or("").trim();
        labels.push(lab.parse::<usize>().map_err(|_| {
            CliError::Input(format!("{}: label '{lab}' at data row {} is not a positive integer", path.display(), r + 1))
        })?);
        for (k, name) in names.iter().enumerate() {
            let cell = rec.get(k + 1).unwrap_or("").trim();
            values.push(cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Input(format!(
                    "{}: missing or non-numeric value '{cell}' at data row {}, column {} ('{name}')",
                    path.display(),
                    r + 1,
                    k + 2
                ))
            })?);
        }
    }
    let x = DMatrix::from_row_slice(labels.len(), names.len(), &values);
    Ok((LabeledDataset::new(x, labels)?, names))
}

struct ClassifyArgs {
    k: Option<usize>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    rounds: Option<usize>,
}

fn run_classify(train: &Path, test: &Path, method: ClassifyMethod, out_dir: &Path, seed: u64, a: ClassifyArgs) -> CliResult<()> {
    let (tr, names) = read_labeled(train)?;
    let (te_raw, te_names) = read_labeled(test)?;
    if names != te_names {
        return Err(CliError::Input("training and test files must have the same feature columns".into()));
    }
    let te_x = te_raw.x().clone();
    let te_y = te_raw.y().to_vec();
    let name = method.to_possible_value().unwrap().get_name().to_string();
    use ClassifyMethod as C;
    reject(a.k.is_some() && method != C::Knn, "k", &name)?;
    reject((a.lambda.is_some() || a.epochs.is_some()) && method != C::Svm, "lambda/--epochs", &name)?;
    reject(a.rounds.is_some() && !matches!(method, C::Ada | C::Realada), "rounds", &name)?;
    let mut hyper = serde_json::Map::new();
    let mut extra = serde_json::Map::new();
    let predictor: Box<dyn Fn(&DVector<f64>) -> CliResult<usize>> = match method {
        C::Fisher => {
            let m = classify::fisher_train(&tr)?;
            extra.insert("pseudo_inverse".into(), json!(m.pseudo_inverse));
            Box::new(move |x| Ok(classify::fisher_classify(&m, x)))
        }
        C::Nb => {
            let m = classify::naive_bayes_train(&tr);
            Box::new(move |x| Ok(classify::naive_bayes_classify(&m, x)))
        }
        C::Centroid => {
            let m = classify::centroid_train(&tr);
            Box::new(move |x| Ok(classify::centroid_classify(&m, x)))
        }
        C::Knn => {
            let k = require(a.k, "k", "knn")?;
            hyper.insert("k".into(), json!(k));
            let train = tr.clone();
            Box::new(move |x| Ok(classify::knn_classify(&train, x, k)?))
        }
        C::Svm => {
            let lambda = require(a.lambda, "lambda", "svm")?;
            let epochs = a.epochs.unwrap_or(1000);
            hyper.insert("lambda".into(), json!(lambda));
            hyper.insert("epochs".into(), json!(epochs));
            let m = classify::svm_train(&tr, lambda, epochs)?;
            extra.insert("objective".into(), json!(m.objective));
            Box::new(move |x| Ok(m.classify(x)))
        }
        C::Ada | C::Realada => {
            let rounds = require(a.rounds, "rounds", &name)?;
            hyper.insert("rounds".into(), json!(rounds));
            let m = if method == C::Ada { classify::discrete_adaboost(&tr, rounds)? } else { classify::real_adaboost(&tr, rounds)? };
            Box::new(move |x| Ok(m.classify(x.as_slice())))
        }
    };
    let predict_all = |x: &DMatrix<f64>| -> CliResult<Vec<usize>> {
        (0..x.nrows()).map(|i| predictor(&x.row(i).transpose())).collect()
    };
    let train_pred = predict_all(tr.x())?;
    let test_pred = predict_all(&te_x)?;
    let mut doc = serde_json::Map::new();
    doc.insert("metadata".into(), metadata(&name, Value::Object(hyper), seed, tr.n(), tr.p()));
    doc.insert("classes".into(), json!(tr.num_classes()));
    doc.insert("train_accuracy".into(), json!(classify::accuracy(&train_pred, tr.y())));
    doc.insert("test_accuracy".into(), json!(classify::accuracy(&test_pred, &te_y)));
    doc.insert("test_n".into(), json!(te_y.len()));
    doc.extend(extra);
    let mut csv = String::from("row,label,predicted\n");
    for (i, (t, p)) in te_y.iter().zip(&test_pred).enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, t, p));
    }
    let w = Writer::new(out_dir)?;
    w.text("predictions.csv", &csv)?;
    w.json("classify.json", &Value::Object(doc))
}

/// Draws `n` observations of the requested model.
pub fn simulate(model: SimModel, n: usize, p: usize, rho: f64, seed: u64) -> CliResult<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(usage("--n and --p must be positive"));
    }
    let mut rng = SeedTree::new(seed).task_rng(0);
    match model {
        SimModel::Iid => Ok(DataMatrix::standard_normal(n, p, &mut rng).as_matrix().clone()),
        SimModel::Chain => {
            if !rho.is_finite() {
                return Err(usage("--rho must be finite"));
            }
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = if j == 0 { z } else { rho * x[(i, j - 1)] + z };
                }
            }
            Ok(x)
        }
        SimModel::Ar1 => {
            if !(rho.abs() < 1.0) {
                return Err(usage("--rho must lie in (-1, 1) for ar1"));
            }
            let sigma = SymmetricMatrix::symmetrized(DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)));
            Ok(DataMatrix::gaussian(n, &sigma, &mut rng)?.as_matrix().clone())
        }
    }
}

fn run_simulate(model: SimModel, n: usize, p: usize, rho: f64, seed: u64, out: &Path, prices: bool) -> CliResult<()> {
    let x = simulate(model, n, p, rho, seed)?;
    let tickers: Vec<String> = (1..=p).map(|j| format!("V{j}")).collect();
    let width = (n + 1).to_string().len();
    let body = if prices {
        let mut levels = DMatrix::from_element(n + 1, p, 100.0);
        for i in 0..n {
            for j in 0..p {
                levels[(i + 1, j)] = levels[(i, j)] * (0.01 * x[(i, j)]).exp();
            }
        }
        let dates: Vec<String> = (0..=n).map(|i| format!("t{i:0width$}")).collect();
        rect_csv("date", &dates, &tickers, &levels)
    } else {
        let dates: Vec<String> = (1..=n).map(|i| format!("t{i:0width$}")).collect();
        rect_csv("date", &dates, &tickers, &x)
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(out, body).map_err(|source| CliError::Io { path: out.to_path_buf(), source })
}
