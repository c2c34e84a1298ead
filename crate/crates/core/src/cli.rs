//! Command-line front end.
//!
//! Every subcommand writes one table (CSV or JSON) or a short key=value
//! report. Outputs carry the resolved configuration as metadata and contain
//! no timestamps, so identical flags give identical bytes.
//!
//! Flag values are resolved in three layers, later ones winning: a config
//! file (`--config`, `key=value` lines, keys are long flag names), then
//! environment variables `FREECHAIN_<KEY>` (upper case, `-` as `_`), then
//! the command line.
//!
//! Exit codes: 0 success, 2 invalid flags or inputs, 1 numerical failure.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::algebraic_states::{gns, m2_lambda, purity_report, two_fermion};
use crate::chain_model::{dispersion, momentum_grid, open_bc_real_roots, Boundary, ChainSpec, Model, Parity};
use crate::entanglement::{fit_central_charge, thermo_entropies, DEFAULT_QUADRATURE_POINTS};
use crate::free_fermion::solve;
use crate::quantum_probability::{bell_check, maximize_chsh, standard_bell_angles};
use crate::scaling::{collapse, fmt_real, grid, sweep, SearchBox, SweepResult};
use crate::{Error, Result};

pub const ENV_PREFIX: &str = "FREECHAIN_";

#[derive(Parser, Debug)]
#[command(name = "freechain", version, about = "Free-fermion spin chain laboratory", args_override_self = true)]
pub struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key=value` defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Single-particle energies of one chain.
    Spectrum(SpectrumArgs),
    /// Block entanglement entropy over a (λ, L) grid.
    EntropyScan(EntropyScanArgs),
    /// Half-chain Schmidt gap sweep.
    Schmidt(SchmidtArgs),
    /// Finite-size-scaling collapse of a Schmidt sweep.
    Collapse(CollapseArgs),
    /// Bell inequality and CHSH values.
    Bell(BellArgs),
    /// GNS construction for the built-in examples.
    Gns(GnsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Ising,
    Xy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityArg {
    Even,
    Odd,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report entropies in bits.
    #[arg(long)]
    pub log2: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChainArgs {
    #[arg(long, value_enum, default_value = "ising")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value = "periodic")]
    pub boundary: BoundaryArg,
    /// Parity sector of a periodic chain (default even).
    #[arg(long, value_enum)]
    pub parity: Option<ParityArg>,
}

impl ChainArgs {
    fn spec(&self, n: usize, lambda: f64) -> Result<ChainSpec> {
        let model = match self.model {
            ModelArg::Ising => Model::Ising,
            ModelArg::Xy => Model::XY,
        };
        let base = ChainSpec {
            model,
            n_sites: n,
            lambda,
            gamma: if model == Model::Ising { 1.0 } else { self.gamma },
            boundary: Boundary::Open,
            parity: None,
        };
        let spec = match (self.boundary, self.parity) {
            (BoundaryArg::Open, None) => base,
            (BoundaryArg::Open, Some(_)) => {
                return Err(Error::InvalidSpec("--parity needs --boundary periodic".into()))
            }
            (BoundaryArg::Periodic, p) => base.periodic(match p {
                Some(ParityArg::Odd) => Parity::Odd,
                _ => Parity::Even,
            }),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `start:stop:step` or a single number.
#[derive(Debug, Clone)]
pub struct Grid {
    pub text: String,
    pub values: Vec<f64>,
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

fn parse_grid(text: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
    let values = match parts.as_slice() {
        [one] => vec![num(one)?],
        [a, b, c] => grid(num(a)?, num(b)?, num(c)?).map_err(|e| e.to_string())?,
        _ => return Err("expected `value` or `start:stop:step`".into()),
    };
    Ok(Grid {
        text: text.to_string(),
        values,
    })
}

/// Integer grid, e.g. block lengths.
#[derive(Debug, Clone)]
pub struct IntGrid {
    pub text: String,
    pub values: Vec<usize>,
}

impl Serialize for IntGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

fn parse_int_grid(text: &str) -> std::result::Result<IntGrid, String> {
    let g = parse_grid(text)?;
    let values = g
        .values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("`{v}` is not a positive integer"))
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(IntGrid { text: g.text, values })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Open chains: diagonalize the quadratic form instead of solving the
    /// momentum quantization condition (needed at λ = 0).
    #[arg(long)]
    pub matrix: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Finite,
    Thermo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    XxCritical,
    IsingCritical,
    OffCritical,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EntropyScanArgs {
    #[arg(long, value_enum, default_value = "thermo")]
    pub method: Method,
    /// Named parameter set; overrides --lambda, --gamma and --model.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_parser = parse_grid, default_value = "1.0")]
    pub lambda: Grid,
    /// Block lengths, `start:stop:step`.
    #[arg(long = "l", value_parser = parse_int_grid, default_value = "1:64:1")]
    pub block: IntGrid,
    /// Chain length for the finite method.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_QUADRATURE_POINTS)]
    pub quadrature_points: usize,
    /// Append a central-charge fit per λ (blocks with L ≥ --fit-min-l).
    #[arg(long)]
    pub fit_c: bool,
    #[arg(long, default_value_t = 16)]
    pub fit_min_l: usize,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SchmidtArgs {
    /// Chain lengths (even), comma separated or `start:stop:step`.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub n: Vec<String>,
    #[arg(long, value_parser = parse_grid, default_value = "0:2:0.05")]
    pub lambda: Grid,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CollapseArgs {
    /// Sweep CSV written by `schmidt`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_c: f64,
    /// Half-width of the λ window around λ_c.
    #[arg(long, default_value_t = 0.1)]
    pub window: f64,
    #[arg(long, default_value = "0:0.5")]
    pub mu1: String,
    #[arg(long, default_value = "0.5:1.5")]
    pub mu2: String,
    /// Grid points per exponent in the coarse search.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BellArgs {
    /// Use φ = (0, π/3), θ = (π/2, π/6).
    #[arg(long = "paper-angles")]
    #[serde(rename = "paper_angles")]
    pub standard_angles: bool,
    #[arg(long, default_value_t = 0.0)]
    pub phi1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta2: f64,
    /// Also maximise the CHSH value of ψ_λ for this λ.
    #[arg(long)]
    pub chsh_lambda: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub chsh_starts: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GnsPreset {
    M2Lambda,
    TwoFermion,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GnsArgs {
    #[arg(long, value_enum, default_value = "m2-lambda")]
    pub preset: GnsPreset,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// A CLI failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSpec(_)
            | Error::InvalidInput(_)
            | Error::NotApplicable(_)
            | Error::ResourceGuard(_)
            | Error::InvalidState(_) => 2,
            Error::Numerical(_) | Error::Linalg(_) | Error::Internal(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => fmt_real(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Real(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

/// What a subcommand produces before formatting.
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `key=value` results (fits, flags).
    pub summary: Vec<(String, Cell)>,
}

impl Report {
    fn new(command: &'static str, config: &impl Serialize) -> Self {
        Report {
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            metadata: Vec::new(),
            columns: Vec::new(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("freechain_version={}", env!("CARGO_PKG_VERSION")),
            format!("command={}", self.command),
        ];
        if let Value::Object(map) = &self.config {
            flatten_config("config", map, &mut lines);
        }
        for (k, v) in &self.metadata {
            lines.push(format!("{k}={v}"));
        }
        lines
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.header_lines() {
            let _ = writeln!(out, "# {line}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k}={}", v.csv());
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k}={}", v.csv());
        }
        if !self.rows.is_empty() {
            out.push_str(&self.to_csv());
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        meta.insert("freechain_version".into(), json!(env!("CARGO_PKG_VERSION")));
        meta.insert("command".into(), json!(self.command));
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), json!(v));
        }
        let mut root = Map::new();
        root.insert("metadata".into(), Value::Object(meta));
        root.insert("config".into(), self.config.clone());
        for (k, v) in &self.summary {
            root.insert(k.clone(), v.json());
        }
        if !self.columns.is_empty() {
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| {
                    let mut obj = Map::new();
                    for (c, cell) in self.columns.iter().zip(r) {
                        obj.insert((*c).to_string(), cell.json());
                    }
                    Value::Object(obj)
                })
                .collect();
            root.insert("rows".into(), Value::Array(rows));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).unwrap_or_default();
        s.push('\n');
        s
    }
}

fn flatten_config(prefix: &str, map: &Map<String, Value>, out: &mut Vec<String>) {
    for (k, v) in map {
        let key = format!("{prefix}.{k}");
        match v {
            Value::Object(inner) => flatten_config(&key, inner, out),
            Value::Null => out.push(format!("{key}=")),
            Value::String(s) => out.push(format!("{key}={s}")),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push(format!("{key}={}", parts.join(",")));
            }
            other => out.push(format!("{key}={other}")),
        }
    }
}

fn entropy_scale(out: &OutputArgs) -> f64 {
    if out.log2 {
        1.0 / std::f64::consts::LN_2
    } else {
        1.0
    }
}

fn cmd_spectrum(a: &SpectrumArgs) -> std::result::Result<Report, Failure> {
    let spec = a.chain.spec(a.n, a.lambda)?;
    let mut report = Report::new("spectrum", a);
    report.columns = vec!["k", "phi", "lambda_k"];
    match spec.boundary {
        Boundary::Periodic => {
            let grid = momentum_grid(&spec)?;
            for (k, &phi) in grid.phis.iter().enumerate() {
                report.rows.push(vec![Cell::Int(k as i64), Cell::Real(phi), Cell::Real(dispersion(&spec, phi))]);
            }
            report.metadata.push(("path".into(), "momentum grid".into()));
        }
        Boundary::Open if a.matrix => {
            let sol = solve(&crate::chain_model::build_quadratic_form(&spec)?)?;
            for (k, &l) in sol.lambdas.iter().enumerate() {
                report.rows.push(vec![Cell::Int(k as i64), Cell::Real(f64::NAN), Cell::Real(l)]);
            }
            report.metadata.push(("path".into(), "quadratic form".into()));
        }
        Boundary::Open => {
            let roots = open_bc_real_roots(&spec).map_err(|e| match e {
                Error::NotApplicable(m) => usage(format!("{m}; pass --matrix to diagonalize the quadratic form instead")),
                other => other.into(),
            })?;
            for (k, &phi) in roots.iter().enumerate() {
                report.rows.push(vec![Cell::Int(k as i64), Cell::Real(phi), Cell::Real(dispersion(&spec, phi))]);
            }
            report.metadata.push(("path".into(), "quantization roots".into()));
            if roots.len() < spec.n_sites {
                report.metadata.push(("edge_modes".into(), (spec.n_sites - roots.len()).to_string()));
            }
        }
    }
    Ok(report)
}

fn cmd_entropy_scan(a: &EntropyScanArgs) -> std::result::Result<Report, Failure> {
    let mut args = a.clone();
    if let Some(p) = a.preset {
        let (lambda, gamma, model) = match p {
            Preset::XxCritical => (0.5, 0.0, ModelArg::Xy),
            Preset::IsingCritical => (1.0, 1.0, ModelArg::Xy),
            Preset::OffCritical => (0.5, 0.5, ModelArg::Xy),
        };
        args.lambda = parse_grid(&lambda.to_string()).map_err(usage)?;
        args.chain.gamma = gamma;
        args.chain.model = model;
    }
    let gamma = match args.chain.model {
        ModelArg::Ising => 1.0,
        ModelArg::Xy => args.chain.gamma,
    };
    let scale = entropy_scale(&args.out);
    let mut report = Report::new("entropy-scan", &args);
    report.columns = vec!["lambda", "gamma", "L", "entropy"];
    if args.chain.model == ModelArg::Ising && args.method == Method::Thermo {
        report.metadata.push(("note".into(), "ising evaluated as xy with gamma=1".into()));
    }
    for &lambda in &args.lambda.values {
        let entropies: Vec<f64> = match args.method {
            Method::Thermo => thermo_entropies(lambda, gamma, &args.block.values, args.quadrature_points)?,
            Method::Finite => {
                let spec = args.chain.spec(args.n, lambda)?;
                let corr = crate::free_fermion::physical_ground_state(&spec)?.correlations();
                args.block
                    .values
                    .iter()
                    .map(|&l| {
                        crate::entanglement::restrict(&corr, l)
                            .and_then(|b| crate::entanglement::entanglement_spectrum(&b))
                            .map(|r| r.entropy)
                    })
                    .collect::<Result<_>>()?
            }
        };
        for (&l, &s) in args.block.values.iter().zip(&entropies) {
            report.rows.push(vec![Cell::Real(lambda), Cell::Real(gamma), Cell::Int(l as i64), Cell::Real(s * scale)]);
        }
        if args.fit_c {
            let pts: Vec<(f64, f64)> = args
                .block
                .values
                .iter()
                .zip(&entropies)
                .filter(|(&l, _)| l >= args.fit_min_l)
                .map(|(&l, &s)| (l as f64, s))
                .collect();
            let fit = fit_central_charge(&pts)?;
            let tag = format!("fit[lambda={}]", fmt_real(lambda));
            report.summary.push((format!("{tag}.c"), Cell::Real(fit.c)));
            report.summary.push((format!("{tag}.intercept"), Cell::Real(fit.intercept)));
            report.summary.push((format!("{tag}.rms_residual"), Cell::Real(fit.rms_residual)));
        }
    }
    Ok(report)
}

fn parse_sizes(items: &[String]) -> std::result::Result<Vec<usize>, Failure> {
    let mut out = Vec::new();
    for item in items {
        out.extend(parse_int_grid(item).map_err(usage)?.values);
    }
    Ok(out)
}

fn cmd_schmidt(a: &SchmidtArgs) -> std::result::Result<Report, Failure> {
    let ns = parse_sizes(&a.n)?;
    let template = a.chain.spec(ns.first().copied().unwrap_or(2).max(2), 1.0)?;
    let result = sweep(&ns, &a.lambda.values, &template)?;
    let scale = entropy_scale(&a.out);
    let mut report = Report::new("schmidt", a);
    report.metadata = result.metadata.clone();
    report.metadata.push(("lambda_c".into(), fmt_real(1.0)));
    for f in &result.failures {
        report.metadata.push((format!("failed[N={},lambda={}]", f.n, fmt_real(f.lambda)), f.error.clone()));
    }
    report.columns = crate::scaling::CSV_HEADER.split(',').collect();
    for r in &result.rows {
        report.rows.push(vec![
            Cell::Int(r.n as i64),
            Cell::Real(r.lambda),
            Cell::Real(r.schmidt_gap),
            Cell::Real(r.entropy * scale),
            Cell::Real(r.ground_energy),
        ]);
    }
    Ok(report)
}

fn parse_range(text: &str) -> std::result::Result<(f64, f64), Failure> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("expected `lo:hi`, got `{text}`")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("`{s}` is not a number")));
    Ok((num(a)?, num(b)?))
}

fn cmd_collapse(a: &CollapseArgs) -> std::result::Result<Report, Failure> {
    let path = a.input.as_ref().ok_or_else(|| usage("collapse needs --input"))?;
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let data = SweepResult::from_csv(&text)?;
    let search = SearchBox {
        mu1: parse_range(&a.mu1)?,
        mu2: parse_range(&a.mu2)?,
        grid: a.grid,
        window: a.window,
    };
    let fit = collapse(&data, a.lambda_c, &search)?;
    let mut report = Report::new("collapse", a);
    report.metadata.push(("rows".into(), data.rows.len().to_string()));
    report.summary = vec![
        ("lambda_c".into(), Cell::Real(a.lambda_c)),
        ("mu1".into(), Cell::Real(fit.mu1)),
        ("mu2".into(), Cell::Real(fit.mu2)),
        ("cost".into(), Cell::Real(fit.cost)),
        ("nu_est".into(), Cell::Real(fit.nu_est)),
        ("beta_est".into(), Cell::Real(fit.beta_est)),
    ];
    Ok(report)
}

fn cmd_bell(a: &BellArgs) -> std::result::Result<Report, Failure> {
    let (phis, thetas) = if a.standard_angles {
        standard_bell_angles()
    } else {
        ((a.phi1, a.phi2), (a.theta1, a.theta2))
    };
    let check = bell_check(phis, thetas);
    let mut report = Report::new("bell", a);
    report.summary = vec![
        ("lhs".into(), Cell::Real(check.lhs)),
        ("rhs".into(), Cell::Real(check.rhs)),
        ("violated".into(), Cell::Text(check.violated.to_string())),
    ];
    if let Some(lambda) = a.chsh_lambda {
        let m = maximize_chsh(lambda, a.chsh_starts, a.out.seed)?;
        report.summary.push(("chsh_max".into(), Cell::Real(m.value)));
        report.summary.push(("chsh_bound".into(), Cell::Real(crate::quantum_probability::chsh_bound(lambda))));
    }
    Ok(report)
}

fn cmd_gns(a: &GnsArgs) -> std::result::Result<Report, Failure> {
    let (alg, state) = match a.preset {
        GnsPreset::M2Lambda => m2_lambda(a.lambda)?,
        GnsPreset::TwoFermion => two_fermion::restricted(a.theta)?,
    };
    let r = gns(&alg, &state)?;
    let p = purity_report(&r);
    let mut report = Report::new("gns", a);
    report.summary = vec![
        ("algebra_dim".into(), Cell::Int(alg.dim() as i64)),
        ("hilbert_dim".into(), Cell::Int(r.hilbert_dim as i64)),
        ("blocks".into(), Cell::Int(r.block_projectors.len() as i64)),
        ("commutant_dim".into(), Cell::Int(p.commutant_dim as i64)),
        ("irreducible".into(), Cell::Text(p.is_irreducible.to_string())),
        ("entropy".into(), Cell::Real(r.entropy * entropy_scale(&a.out))),
    ];
    Ok(report)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::EntropyScan(_) => "entropy-scan",
            Command::Schmidt(_) => "schmidt",
            Command::Collapse(_) => "collapse",
            Command::Bell(_) => "bell",
            Command::Gns(_) => "gns",
        }
    }

    fn output(&self) -> &OutputArgs {
        match self {
            Command::Spectrum(a) => &a.out,
            Command::EntropyScan(a) => &a.out,
            Command::Schmidt(a) => &a.out,
            Command::Collapse(a) => &a.out,
            Command::Bell(a) => &a.out,
            Command::Gns(a) => &a.out,
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Collapse(_) => Format::Json,
            Command::Bell(_) | Command::Gns(_) => Format::Text,
            _ => Format::Csv,
        }
    }

    fn execute(&self) -> std::result::Result<Report, Failure> {
        match self {
            Command::Spectrum(a) => cmd_spectrum(a),
            Command::EntropyScan(a) => cmd_entropy_scan(a),
            Command::Schmidt(a) => cmd_schmidt(a),
            Command::Collapse(a) => cmd_collapse(a),
            Command::Bell(a) => cmd_bell(a),
            Command::Gns(a) => cmd_gns(a),
        }
    }
}

/// Long flag names accepted by a subcommand, plus the global ones.
fn known_keys(subcommand: &str) -> BTreeSet<String> {
    let cmd = Cli::command();
    let mut keys: BTreeSet<String> = BTreeSet::new();
    if let Some(sub) = cmd.find_subcommand(subcommand) {
        for arg in sub.get_arguments() {
            if let Some(l) = arg.get_long() {
                keys.insert(l.to_string());
            }
        }
    }
    keys.remove("config");
    keys.remove("help");
    keys
}

fn is_switch(subcommand: &str, key: &str) -> bool {
    let cmd = Cli::command();
    cmd.find_subcommand(subcommand)
        .and_then(|s| s.get_arguments().find(|a| a.get_long() == Some(key)).map(|a| !a.get_action().takes_values()))
        .unwrap_or(false)
}

fn push_setting(argv: &mut Vec<OsString>, subcommand: &str, key: &str, value: &str) -> std::result::Result<(), Failure> {
    if is_switch(subcommand, key) {
        match value.trim() {
            "true" | "1" | "yes" => argv.push(format!("--{key}").into()),
            "false" | "0" | "no" => {}
            other => return Err(usage(format!("`{key}` expects true or false, got `{other}`"))),
        }
    } else {
        argv.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(())
}

fn config_layers(
    subcommand: &str,
    config: Option<&PathBuf>,
    env: &[(String, String)],
) -> std::result::Result<Vec<OsString>, Failure> {
    let keys = known_keys(subcommand);
    let mut argv = Vec::new();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {} is not key=value", no + 1)))?;
            let k = k.trim().trim_start_matches("--");
            if !keys.contains(k) {
                return Err(usage(format!("unknown config key `{k}` for `{subcommand}`")));
            }
            push_setting(&mut argv, subcommand, k, v)?;
        }
    }
    let all_keys: BTreeSet<String> = Cli::command()
        .get_subcommands()
        .flat_map(|s| known_keys(s.get_name()))
        .collect();
    for (name, value) in env {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let key = rest.to_lowercase().replace('_', "-");
        if keys.contains(&key) {
            push_setting(&mut argv, subcommand, &key, value)?;
        } else if !all_keys.contains(&key) && key != "threads" {
            return Err(usage(format!("unknown environment override {name}")));
        }
    }
    Ok(argv)
}

fn parse_cli(args: Vec<OsString>, env: &[(String, String)]) -> std::result::Result<Cli, Failure> {
    let first = Cli::try_parse_from(&args).map_err(clap_failure)?;
    let sub = first.command.name();
    let layers = config_layers(sub, first.config.as_ref(), env)?;
    if layers.is_empty() {
        return Ok(first);
    }
    // splice the layered settings right after the subcommand name so the
    // user's own flags come later and win
    let pos = args
        .iter()
        .position(|a| a.to_str() == Some(sub))
        .ok_or_else(|| usage("subcommand not found"))?;
    let mut merged: Vec<OsString> = args[..=pos].to_vec();
    merged.extend(layers);
    merged.extend(args[pos + 1..].iter().cloned());
    Cli::try_parse_from(&merged).map_err(clap_failure)
}

fn clap_failure(e: clap::Error) -> Failure {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Failure {
            code: if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 },
            message: e.to_string(),
        },
        _ => usage(e.to_string()),
    }
}

/// Rendered output and where it should go (`None` for stdout).
pub struct Rendered {
    pub text: String,
    pub path: Option<PathBuf>,
}

/// Parses, runs and renders.
pub fn run_to_string(args: Vec<OsString>, env: &[(String, String)]) -> std::result::Result<Rendered, Failure> {
    let cli = parse_cli(args, env)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        // a second initialisation (tests, embedding) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let report = cli.command.execute()?;
    let format = cli.command.output().format.unwrap_or(cli.command.default_format());
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    Ok(Rendered {
        text,
        path: cli.command.output().output.clone(),
    })
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let args: Vec<OsString> = args.into_iter().collect();
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    match run_to_string(args, &env) {
        Ok(out) => {
            let written = match &out.path {
                Some(p) => std::fs::write(p, out.text.as_bytes()),
                None => std::io::stdout().lock().write_all(out.text.as_bytes()),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("freechain: cannot write output: {e}");
                    1
                }
            }
        }
        Err(f) => {
            if f.code == 0 {
                print!("{}", f.message);
            } else {
                eprintln!("freechain: {}", f.message.trim_end());
            }
            f.code
        }
    }
}
