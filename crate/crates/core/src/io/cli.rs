//! `snvc` command line: `fit`, `simulate` and `basis` subcommands.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use super::report::{write_json, FitConfig, FitReport, FitTiming, SimulationReport, TOOL};
use super::table::{load_table, write_table_file, DataTable, TableSchema};
use crate::design::ModelSpec;
use crate::error::{ErrorClass, Result, SnvcError};
use crate::fit::{fit_snvc_with_basis, RemlConfig, SnvcFit};
use crate::sim::{run_scenario, Estimator, ScenarioConfig, SiteLayout};
use crate::spatial::{SiteSet, SpatialBasis};
use crate::spline::{spline_basis, SplineFamily};

pub const MIN_FIT_ROWS: usize = 10;
pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Parser)]
#[command(
    name = "snvc",
    version,
    about = "Spatially and non-spatially varying coefficient regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Run a seeded Monte Carlo scenario.
    Simulate(SimulateArgs),
    /// Write the Moran eigenvector basis of a set of sites.
    Basis(BasisArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long)]
    pub y: String,
    /// Covariate columns, comma separated. The intercept is added automatically.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// Coordinate columns `cx,cy`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub coords: Vec<String>,
    /// Terms with a spatially varying part: `all` (default, includes the intercept), `none` or a list.
    #[arg(long)]
    pub svc: Option<String>,
    /// Covariates with a non-spatially varying part: `all` (default, non-constant covariates), `none` or a list.
    #[arg(long)]
    pub nvc: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub n_basis: usize,
    /// `natural` or `thinplate`.
    #[arg(long, default_value = "natural")]
    pub spline: String,
    /// Fit the natural log of the response.
    #[arg(long)]
    pub log_response: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-site coefficient CSV path.
    #[arg(long)]
    pub coef_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON scenario config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_sx: Option<f64>,
    /// `tau2_2,tau2_3`.
    #[arg(long, allow_hyphen_values = true)]
    pub tau2: Option<String>,
    /// `grid` or `gaussian`.
    #[arg(long)]
    pub layout: Option<String>,
    /// Comma separated subset of LM, GWR, GWR_A, SVC_M, SNVC_M.
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub coords: Vec<String>,
    /// Eigenvector CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of eigenvalues.
    #[arg(long)]
    pub eigenvalues_out: Option<PathBuf>,
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    class: &'a str,
    exit_code: i32,
    message: String,
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    error: ErrorBody<'a>,
}

fn error_json(kind: &str, class: ErrorClass, message: String) -> String {
    let class_name = match class {
        ErrorClass::Usage => "usage",
        ErrorClass::Data => "data",
        ErrorClass::Numerical => "numerical",
    };
    let obj = ErrorObject {
        error: ErrorBody {
            kind,
            class: class_name,
            exit_code: exit_code(class),
            message,
        },
    };
    serde_json::to_string(&obj).unwrap_or_else(|_| "{\"error\":{}}".into())
}

/// Parses `args` (program name first), runs the command and returns the process
/// exit code. Failures are reported on stderr as a single JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            eprintln!(
                "{}",
                error_json("Usage", ErrorClass::Usage, e.kind().to_string())
            );
            return 2;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit_command(&a).map(|r| print!("{}", r.share_table())),
        Command::Simulate(a) => simulate_command(&a).map(|r| {
            for s in &r.report.estimators {
                let rmse: Vec<String> = s
                    .rmse
                    .iter()
                    .map(|v| v.map_or("NA".into(), |v| format!("{v:.4}")))
                    .collect();
                println!(
                    "{:<7} ok={:<4} rmse=[{}]",
                    s.estimator.name(),
                    s.n_ok,
                    rmse.join(", ")
                );
            }
        }),
        Command::Basis(a) => {
            basis_command(&a).map(|b| println!("{} eigenvectors, range {}", b.len(), b.range()))
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), e.class(), e.to_string()));
            exit_code(e.class())
        }
    }
}

fn coord_pair(coords: &[String]) -> Result<(String, String)> {
    match coords {
        [a, b] => Ok((a.clone(), b.clone())),
        _ => Err(SnvcError::config(
            "coords",
            format!("expected two column names, got {}", coords.len()),
        )),
    }
}

/// `all`, `none` or a comma list, resolved against `candidates`.
fn term_list(
    field: &str,
    value: Option<&str>,
    candidates: &[String],
) -> Result<Option<Vec<String>>> {
    match value.map(str::trim) {
        None | Some("all") => Ok(None),
        Some("none") | Some("") => Ok(Some(Vec::new())),
        Some(list) => {
            let mut out: Vec<String> = Vec::new();
            for name in list.split(',').map(str::trim) {
                if !candidates.iter().any(|c| c == name) {
                    return Err(SnvcError::config(
                        field,
                        format!("`{name}` is not one of {}", candidates.join(", ")),
                    ));
                }
                if !out.iter().any(|o| o == name) {
                    out.push(name.to_string());
                }
            }
            Ok(Some(out))
        }
    }
}

fn resolve_fit_config(a: &FitArgs, table: &DataTable) -> Result<FitConfig> {
    let spline: SplineFamily = a.spline.parse()?;
    let coords = coord_pair(&a.coords)?;
    let mut terms = vec![INTERCEPT.to_string()];
    terms.extend(a.x.iter().cloned());

    let svc = term_list("svc", a.svc.as_deref(), &terms)?.unwrap_or_else(|| terms.clone());
    let (nvc, nvc_skipped) = match term_list("nvc", a.nvc.as_deref(), &terms)? {
        Some(list) => {
            if list.iter().any(|n| n == INTERCEPT) {
                return Err(SnvcError::config(
                    "nvc",
                    "the intercept cannot have a non-spatially varying part",
                ));
            }
            (list, Vec::new())
        }
        None => {
            let (mut keep, mut skip) = (Vec::new(), Vec::new());
            for (name, col) in a.x.iter().zip(&table.covariates) {
                match spline_basis(col, a.n_basis, spline) {
                    Ok(_) => keep.push(name.clone()),
                    Err(SnvcError::ConstantCovariate | SnvcError::TooFewDistinctValues { .. }) => {
                        skip.push(name.clone())
                    }
                    Err(e) => return Err(e),
                }
            }
            (keep, skip)
        }
    };
    Ok(FitConfig {
        data: a.data.display().to_string(),
        response: a.y.clone(),
        covariates: a.x.clone(),
        coords: [coords.0, coords.1],
        svc,
        nvc,
        nvc_skipped,
        n_basis: a.n_basis,
        spline,
        log_response: a.log_response,
        reml: RemlConfig::default(),
    })
}

fn check_fit_args(a: &FitArgs) -> Result<()> {
    coord_pair(&a.coords)?;
    for (i, name) in a.x.iter().enumerate() {
        if name == INTERCEPT {
            return Err(SnvcError::config(
                "x",
                "`intercept` is added automatically and cannot name a column",
            ));
        }
        if a.x[..i].contains(name) {
            return Err(SnvcError::config("x", format!("`{name}` listed twice")));
        }
        if *name == a.y || a.coords.contains(name) {
            return Err(SnvcError::config(
                "x",
                format!("`{name}` is also the response or a coordinate"),
            ));
        }
    }
    Ok(())
}

/// Loads the data, fits the model, writes both output files and returns the report.
pub fn fit_command(a: &FitArgs) -> Result<FitReport> {
    check_fit_args(a)?;
    let coords = coord_pair(&a.coords)?;
    let schema = TableSchema {
        coords,
        response: Some(a.y.clone()),
        covariates: a.x.clone(),
    };
    let table = load_table(&a.data, &schema)?;
    let config = resolve_fit_config(a, &table)?;
    let n = table.n_rows();
    if n < MIN_FIT_ROWS {
        return Err(SnvcError::TooFewSites {
            found: n,
            needed: MIN_FIT_ROWS,
        });
    }
    let mut y = table.response.clone().unwrap_or_default();
    if a.log_response {
        if let Some(i) = y.iter().position(|&v| v <= 0.0) {
            return Err(SnvcError::InvalidData(format!(
                "--log-response needs a positive response, row {} has {}",
                table.source_rows[i], y[i]
            )));
        }
        y.iter_mut().for_each(|v| *v = v.ln());
    }
    let k = a.x.len() + 1;
    let x = DMatrix::from_fn(n, k, |i, j| {
        if j == 0 {
            1.0
        } else {
            table.covariates[j - 1][i]
        }
    });
    let names: Vec<String> = std::iter::once(INTERCEPT.to_string())
        .chain(a.x.iter().cloned())
        .collect();
    let spec = ModelSpec::new(
        names.clone(),
        names.iter().map(|n| config.svc.contains(n)).collect(),
        names.iter().map(|n| config.nvc.contains(n)).collect(),
        vec![a.n_basis; k],
        config.spline,
    )?;

    let start = Instant::now();
    let sites = SiteSet::new(table.coords.clone())?;
    let basis = if spec.any_svc() {
        Some(SpatialBasis::from_sites(&sites)?)
    } else {
        None
    };
    let basis_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let fit = fit_snvc_with_basis(basis, &x, &y, &spec, &config.reml)?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let report = FitReport::new(
        config,
        &fit,
        table.dropped_count,
        FitTiming {
            basis_seconds,
            fit_seconds,
        },
    );
    write_json(&a.out, &report)?;
    write_coefficients(&a.coef_out, &report.config, &table, &fit)?;
    Ok(report)
}

fn provenance(command: &str, config: &impl Serialize) -> Result<Vec<String>> {
    Ok(vec![format!(
        "{TOOL} {command} config: {}",
        serde_json::to_string(config)?
    )])
}

fn write_coefficients(
    path: &std::path::Path,
    config: &FitConfig,
    table: &DataTable,
    fit: &SnvcFit,
) -> Result<()> {
    let c = &fit.coefficients;
    let mut header: Vec<String> = vec!["site_id".into(), "coord_x".into(), "coord_y".into()];
    for name in &c.names {
        for part in ["mean", "svc", "nvc", "total"] {
            header.push(format!("{name}_{part}"));
        }
    }
    let rows: Vec<Vec<f64>> = (0..table.n_rows())
        .map(|i| {
            let mut r = vec![
                table.source_rows[i] as f64,
                table.coords[i][0],
                table.coords[i][1],
            ];
            for k in 0..c.names.len() {
                r.extend([c.mean[k], c.svc[k][i], c.nvc[k][i], c.total[k][i]]);
            }
            r
        })
        .collect();
    write_table_file(path, &provenance("fit", config)?, &header, &rows)
}

fn list<T: std::str::FromStr<Err = SnvcError>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

/// Config file first, then flag overrides.
pub fn resolve_scenario(a: &SimulateArgs) -> Result<ScenarioConfig> {
    let mut c = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| SnvcError::config("config", e.to_string()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(n) = a.n {
        c.n_sites = n;
    }
    if let Some(p) = a.iters {
        c.n_iters = p;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(w) = a.w_s {
        c.w_s = w;
    }
    if let Some(w) = a.w_sx {
        c.w_sx = w;
    }
    if let Some(t) = &a.tau2 {
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                SnvcError::config("tau2", format!("expected two numbers `a,b`, got `{t}`"))
            })?;
        match v[..] {
            [a2, b2] => {
                c.tau2_2 = a2;
                c.tau2_3 = b2;
            }
            _ => {
                return Err(SnvcError::config(
                    "tau2",
                    format!("expected two numbers `a,b`, got `{t}`"),
                ))
            }
        }
    }
    if let Some(l) = &a.layout {
        c.site_layout = l.parse::<SiteLayout>()?;
    }
    if let Some(e) = &a.estimators {
        c.estimators = list::<Estimator>(e)?;
    }
    c.validate()?;
    Ok(c)
}

pub fn simulate_command(a: &SimulateArgs) -> Result<SimulationReport> {
    let config = resolve_scenario(a)?;
    let report = SimulationReport::new(run_scenario(&config)?);
    write_json(&a.out, &report)?;
    Ok(report)
}

#[derive(Serialize)]
struct BasisProvenance<'a> {
    data: String,
    coords: [&'a str; 2],
    n_sites: usize,
    dropped_rows: usize,
    range: f64,
    n_total_nonzero: usize,
    eigenvalues: &'a [f64],
}

pub fn basis_command(a: &BasisArgs) -> Result<SpatialBasis> {
    let coords = coord_pair(&a.coords)?;
    let schema = TableSchema {
        coords: coords.clone(),
        response: None,
        covariates: Vec::new(),
    };
    let table = load_table(&a.data, &schema)?;
    let basis = SpatialBasis::from_sites(&SiteSet::new(table.coords.clone())?)?;
    let meta = BasisProvenance {
        data: a.data.display().to_string(),
        coords: [&coords.0, &coords.1],
        n_sites: table.n_rows(),
        dropped_rows: table.dropped_count,
        range: basis.range(),
        n_total_nonzero: basis.n_total_nonzero(),
        eigenvalues: basis.eigvals(),
    };
    let mut header: Vec<String> = vec!["site_id".into(), "coord_x".into(), "coord_y".into()];
    header.extend((1..=basis.len()).map(|l| format!("ev{l}")));
    let e = basis.eigvecs();
    let rows: Vec<Vec<f64>> = (0..table.n_rows())
        .map(|i| {
            let mut r = vec![
                table.source_rows[i] as f64,
                table.coords[i][0],
                table.coords[i][1],
            ];
            r.extend(e.row(i).iter());
            r
        })
        .collect();
    let comment = provenance("basis", &meta)?;
    write_table_file(&a.out, &comment, &header, &rows)?;
    if let Some(path) = &a.eigenvalues_out {
        let rows: Vec<Vec<f64>> = basis
            .eigvals()
            .iter()
            .enumerate()
            .map(|(l, &v)| vec![(l + 1) as f64, v])
            .collect();
        write_table_file(
            path,
            &comment,
            &["index".into(), "eigenvalue".into()],
            &rows,
        )?;
    }
    Ok(basis)
}
