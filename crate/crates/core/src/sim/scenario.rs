//! Seeded Monte Carlo runner comparing estimators on identical instances.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, GeneratedInstance, GeneratorParams, SiteLayout};
use super::metrics::{
    coef_correlations, mean_correlations, squared_error, CorrelationMatrix, MeanCorrelation,
};
use crate::design::ModelSpec;
use crate::error::{Result, SnvcError};
use crate::fit::{fit_snvc_with_basis, RemlConfig};
use crate::gwr::{select_bandwidth, GwrKernel};
use crate::spatial::SpatialBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "LM")]
    Lm,
    #[serde(rename = "GWR")]
    Gwr,
    #[serde(rename = "GWR_A")]
    GwrAdaptive,
    #[serde(rename = "SVC_M")]
    SvcM,
    #[serde(rename = "SNVC_M")]
    SnvcM,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Lm,
        Estimator::Gwr,
        Estimator::GwrAdaptive,
        Estimator::SvcM,
        Estimator::SnvcM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Lm => "LM",
            Estimator::Gwr => "GWR",
            Estimator::GwrAdaptive => "GWR_A",
            Estimator::SvcM => "SVC_M",
            Estimator::SnvcM => "SNVC_M",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = SnvcError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| {
                e.name().eq_ignore_ascii_case(s.trim())
                    || (s.trim().eq_ignore_ascii_case("S&NVC_M") && *e == Estimator::SnvcM)
            })
            .ok_or_else(|| {
                SnvcError::config(
                    "estimators",
                    format!("unknown estimator `{s}`, expected LM, GWR, GWR_A, SVC_M or SNVC_M"),
                )
            })
    }
}

pub const MIN_SITES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_sites: usize,
    pub site_layout: SiteLayout,
    pub w_sx: f64,
    pub w_s: f64,
    pub tau2_2: f64,
    pub tau2_3: f64,
    pub n_iters: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_sites: 150,
            site_layout: SiteLayout::Gaussian,
            w_sx: 0.4,
            w_s: 0.5,
            tau2_2: 1.0,
            tau2_3: 9.0,
            n_iters: 20,
            seed: 1,
            estimators: Estimator::ALL.to_vec(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_sx", self.w_sx), ("w_s", self.w_s)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(SnvcError::config(
                    name,
                    format!("must lie in [0,1], got {w}"),
                ));
            }
        }
        for (name, t) in [("tau2_2", self.tau2_2), ("tau2_3", self.tau2_3)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SnvcError::config(
                    name,
                    format!("must be a positive finite variance, got {t}"),
                ));
            }
        }
        if self.n_iters < 1 {
            return Err(SnvcError::config("n_iters", "must be at least 1"));
        }
        if self.n_sites < MIN_SITES {
            return Err(SnvcError::config(
                "n_sites",
                format!("must be at least {MIN_SITES}, got {}", self.n_sites),
            ));
        }
        if self.site_layout == SiteLayout::Grid {
            let side = (self.n_sites as f64).sqrt().round() as usize;
            if side * side != self.n_sites {
                return Err(SnvcError::config(
                    "n_sites",
                    format!("grid layout needs a perfect square, got {}", self.n_sites),
                ));
            }
        }
        if self.estimators.is_empty() {
            return Err(SnvcError::config(
                "estimators",
                "at least one estimator is required",
            ));
        }
        Ok(())
    }

    fn generator(&self) -> GeneratorParams {
        GeneratorParams {
            n_sites: self.n_sites,
            layout: self.site_layout,
            w_sx: self.w_sx,
            w_s: self.w_s,
            tau2_2: self.tau2_2,
            tau2_3: self.tau2_3,
        }
    }
}

pub const COEFFICIENT_NAMES: [&str; 3] = ["beta1", "beta2", "beta3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&SnvcError> for ErrorRecord {
    fn from(e: &SnvcError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationFit {
    pub estimator: Estimator,
    /// `||beta_k - beta_hat_k||^2` per coefficient; empty on failure.
    pub squared_error: Vec<f64>,
    pub correlation: Option<CorrelationMatrix>,
    /// REML convergence flag for the mixed-model estimators.
    pub converged: Option<bool>,
    pub error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub true_correlation: Option<CorrelationMatrix>,
    pub fits: Vec<IterationFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_not_converged: usize,
    /// Per coefficient, over successful iterations; `None` when none succeeded.
    pub rmse: Vec<Option<f64>>,
    pub rmse_per_site: Vec<Option<f64>>,
    pub correlation: MeanCorrelation,
    /// Mean over coefficient pairs of `|mean CC_predicted - mean CC_true|`.
    pub cc_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTiming {
    pub estimator: Estimator,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub coefficient_names: Vec<String>,
    pub true_correlation: MeanCorrelation,
    pub estimators: Vec<EstimatorSummary>,
    pub iterations: Vec<IterationRecord>,
    /// Wall-clock figures; the only part of the report that varies between runs.
    pub timing: Vec<EstimatorTiming>,
}

impl ScenarioReport {
    pub fn summary(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == estimator)
    }

    /// Copy with the timing section cleared, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Vec::new(),
            ..self.clone()
        }
    }
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

/// Predicted coefficient fields (one per column of `inst.x`) from one estimator.
/// Column 0 of `inst.x` must be the intercept. `basis` is the Moran basis of
/// `inst.sites` and is built on demand when `None`.
pub fn estimate(
    estimator: Estimator,
    inst: &GeneratedInstance,
    basis: Option<&SpatialBasis>,
    reml: &RemlConfig,
) -> Result<(Vec<Vec<f64>>, Option<bool>)> {
    let (n, k) = inst.x.shape();
    let names: Vec<String> = (0..k)
        .map(|j| {
            if j == 0 {
                "intercept".to_string()
            } else {
                format!("x{}", j + 1)
            }
        })
        .collect();
    match estimator {
        Estimator::Lm => {
            let spec = ModelSpec::new(
                names,
                vec![false; k],
                vec![false; k],
                vec![10; k],
                Default::default(),
            )?;
            let fit = fit_snvc_with_basis(None, &inst.x, &inst.y, &spec, reml)?;
            Ok((fit.model.b_hat.iter().map(|&b| vec![b; n]).collect(), None))
        }
        Estimator::Gwr | Estimator::GwrAdaptive => {
            let kernel = if estimator == Estimator::Gwr {
                GwrKernel::ExponentialFixed
            } else {
                GwrKernel::ExponentialAdaptive
            };
            let x = inst.x.columns(1, k - 1).into_owned();
            let fit = select_bandwidth(&inst.sites, &x, &inst.y, kernel, true)?;
            Ok(((0..k).map(|j| fit.coefficient(j)).collect(), None))
        }
        Estimator::SvcM | Estimator::SnvcM => {
            let has_nvc = (0..k)
                .map(|j| estimator == Estimator::SnvcM && j > 0)
                .collect();
            let spec = ModelSpec::new(
                names,
                vec![true; k],
                has_nvc,
                vec![10; k],
                Default::default(),
            )?;
            let basis = match basis {
                Some(b) => b.clone(),
                None => SpatialBasis::from_sites(&inst.sites)?,
            };
            let fit = fit_snvc_with_basis(Some(basis), &inst.x, &inst.y, &spec, reml)?;
            Ok((fit.coefficients.total, Some(fit.model.converged)))
        }
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    config.validate()?;
    let reml = RemlConfig::default();
    let mut estimators = config.estimators.clone();
    estimators.dedup();
    let mut iterations = Vec::with_capacity(config.n_iters);
    let mut seconds = vec![0.0; estimators.len()];
    let mut timed = vec![0usize; estimators.len()];

    for it in 0..config.n_iters as u64 {
        let inst = match generate_instance(&config.generator(), config.seed, it) {
            Ok(i) => i,
            Err(e) => {
                let fits = estimators
                    .iter()
                    .map(|&estimator| IterationFit {
                        estimator,
                        squared_error: Vec::new(),
                        correlation: None,
                        converged: None,
                        error: Some((&e).into()),
                    })
                    .collect();
                iterations.push(IterationRecord {
                    iteration: it,
                    true_correlation: None,
                    fits,
                });
                continue;
            }
        };
        let truth = columns(&inst.true_betas);
        let needs_basis = estimators
            .iter()
            .any(|e| matches!(e, Estimator::SvcM | Estimator::SnvcM));
        let basis = if needs_basis {
            Some(SpatialBasis::from_sites(&inst.sites))
        } else {
            None
        };

        let mut fits = Vec::with_capacity(estimators.len());
        for (slot, &estimator) in estimators.iter().enumerate() {
            let start = Instant::now();
            let result = match (&basis, estimator) {
                (Some(Err(e)), Estimator::SvcM | Estimator::SnvcM) => {
                    Err(SnvcError::NumericalBreakdown(format!("spatial basis: {e}")))
                }
                (Some(Ok(b)), _) => estimate(estimator, &inst, Some(b), &reml),
                _ => estimate(estimator, &inst, None, &reml),
            };
            seconds[slot] += start.elapsed().as_secs_f64();
            timed[slot] += 1;
            fits.push(match result {
                Ok((pred, converged)) => IterationFit {
                    estimator,
                    squared_error: truth
                        .iter()
                        .zip(&pred)
                        .map(|(t, p)| squared_error(t, p))
                        .collect::<Result<_>>()?,
                    correlation: Some(coef_correlations(&pred)),
                    converged,
                    error: None,
                },
                Err(e) => IterationFit {
                    estimator,
                    squared_error: Vec::new(),
                    correlation: None,
                    converged: None,
                    error: Some((&e).into()),
                },
            });
        }
        iterations.push(IterationRecord {
            iteration: it,
            true_correlation: Some(coef_correlations(&truth)),
            fits,
        });
    }

    let kc = COEFFICIENT_NAMES.len();
    let true_mats: Vec<CorrelationMatrix> = iterations
        .iter()
        .filter_map(|r| r.true_correlation.clone())
        .collect();
    let true_correlation = mean_correlations(kc, &true_mats);
    let summaries = estimators
        .iter()
        .map(|&e| summarize(e, &iterations, &true_correlation, config.n_sites))
        .collect();
    let timing = estimators
        .iter()
        .zip(seconds.iter().zip(&timed))
        .map(|(&estimator, (&s, &c))| EstimatorTiming {
            estimator,
            mean_seconds: s / c.max(1) as f64,
        })
        .collect();
    Ok(ScenarioReport {
        config: config.clone(),
        coefficient_names: COEFFICIENT_NAMES.iter().map(|s| s.to_string()).collect(),
        true_correlation,
        estimators: summaries,
        iterations,
        timing,
    })
}

fn summarize(
    estimator: Estimator,
    iterations: &[IterationRecord],
    truth: &MeanCorrelation,
    n_sites: usize,
) -> EstimatorSummary {
    let kc = COEFFICIENT_NAMES.len();
    let fits: Vec<&IterationFit> = iterations
        .iter()
        .flat_map(|r| r.fits.iter())
        .filter(|f| f.estimator == estimator)
        .collect();
    let ok: Vec<&&IterationFit> = fits.iter().filter(|f| f.error.is_none()).collect();
    let n_ok = ok.len();
    let rmse: Vec<Option<f64>> = (0..kc)
        .map(|k| {
            (n_ok > 0)
                .then(|| (ok.iter().map(|f| f.squared_error[k]).sum::<f64>() / n_ok as f64).sqrt())
        })
        .collect();
    let rmse_per_site = rmse
        .iter()
        .map(|r| r.map(|v| v / (n_sites as f64).sqrt()))
        .collect();
    let mats: Vec<CorrelationMatrix> = ok.iter().filter_map(|f| f.correlation.clone()).collect();
    let correlation = mean_correlations(kc, &mats);
    let mut gaps = Vec::new();
    for a in 0..kc {
        for b in (a + 1)..kc {
            if let (Some(p), Some(t)) = (correlation.mean[a][b], truth.mean[a][b]) {
                gaps.push((p - t).abs());
            }
        }
    }
    let cc_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    EstimatorSummary {
        estimator,
        n_ok,
        n_failed: fits.len() - n_ok,
        n_not_converged: ok.iter().filter(|f| f.converged == Some(false)).count(),
        rmse,
        rmse_per_site,
        correlation,
        cc_gap,
    }
}
