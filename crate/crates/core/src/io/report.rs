//! Serialized fit and simulation reports. Field order in the JSON output is the
//! declaration order below and is part of the file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::{svc_process_variance, RemlConfig, SnvcFit};
use crate::sim::ScenarioReport;
use crate::spline::SplineFamily;

pub const TOOL: &str = "snvc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fully resolved settings of a `fit` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub coords: [String; 2],
    /// Model terms with a spatially varying part; may include `intercept`.
    pub svc: Vec<String>,
    pub nvc: Vec<String>,
    /// Covariates left out of the default NVC set because no spline basis could be built.
    pub nvc_skipped: Vec<String>,
    pub n_basis: usize,
    pub spline: SplineFamily,
    pub log_response: bool,
    pub reml: RemlConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialBasisSummary {
    pub n_eigenvectors: usize,
    pub n_total_nonzero: usize,
    pub range: f64,
}

/// One row of the share-of-SVC table plus the variance parameters behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateReport {
    pub name: String,
    pub estimate: f64,
    pub has_svc: bool,
    pub has_nvc: bool,
    pub tau2_svc: f64,
    pub alpha: f64,
    pub tau2_nvc: f64,
    /// `tau2_svc * mean(eigenvalue weights)`, comparable across bases.
    pub svc_process_variance: Option<f64>,
    pub sd_svc: f64,
    pub sd_nvc: f64,
    pub svc_share: f64,
    pub constant_coefficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTiming {
    pub basis_seconds: f64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub version: String,
    pub config: FitConfig,
    pub n_sites: usize,
    pub dropped_rows: usize,
    pub sigma2: f64,
    pub restricted_loglik: f64,
    pub converged: bool,
    pub n_loglik_evals: usize,
    pub spatial_basis: Option<SpatialBasisSummary>,
    pub coefficients: Vec<CovariateReport>,
    pub timing: FitTiming,
}

impl FitReport {
    pub fn new(config: FitConfig, fit: &SnvcFit, dropped_rows: usize, timing: FitTiming) -> Self {
        let m = &fit.model;
        let c = &fit.coefficients;
        let coefficients = (0..m.spec.k())
            .map(|k| {
                let t = m.theta.terms[k];
                CovariateReport {
                    name: m.spec.covariate_names[k].clone(),
                    estimate: m.b_hat[k],
                    has_svc: m.spec.has_svc[k],
                    has_nvc: m.spec.has_nvc[k],
                    tau2_svc: t.tau2_s,
                    alpha: t.alpha,
                    tau2_nvc: t.tau2_n,
                    svc_process_variance: match (&fit.spatial, m.spec.has_svc[k]) {
                        (Some(b), true) => Some(svc_process_variance(b, &t)),
                        _ => None,
                    },
                    sd_svc: c.sd_svc[k],
                    sd_nvc: c.sd_nvc[k],
                    svc_share: c.svc_share[k],
                    constant_coefficient: c.constant_coefficient[k],
                }
            })
            .collect();
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            config,
            n_sites: c.n_sites(),
            dropped_rows,
            sigma2: m.theta.sigma2,
            restricted_loglik: m.restricted_loglik,
            converged: m.converged,
            n_loglik_evals: m.n_loglik_evals,
            spatial_basis: fit.spatial.as_ref().map(|b| SpatialBasisSummary {
                n_eigenvectors: b.len(),
                n_total_nonzero: b.n_total_nonzero(),
                range: b.range(),
            }),
            coefficients,
            timing,
        }
    }

    /// Plain-text share-of-SVC table, one covariate per line.
    pub fn share_table(&self) -> String {
        let w = self
            .coefficients
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut s = format!(
            "{:<w$}  {:>9}  {:>9}  {:>9}\n",
            "covariate", "sd_svc", "sd_nvc", "svc_share"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                s,
                "{:<w$}  {:>9.4}  {:>9.4}  {:>9.3}",
                c.name, c.sd_svc, c.sd_nvc, c.svc_share
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub tool: String,
    pub version: String,
    pub report: ScenarioReport,
}

impl SimulationReport {
    pub fn new(report: ScenarioReport) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            report,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
