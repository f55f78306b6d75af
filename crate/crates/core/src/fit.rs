//! Variance-parameter estimation, the coefficient predictor, and the
//! sites-to-coefficients pipeline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{
    build_design, precompute_crossproducts, BlockInfo, Crossproducts, ModelSpec, TermKind,
};
use crate::error::{Result, SnvcError};
use crate::optim::{nelder_mead, Bounds, NelderMeadOptions};
use crate::reml::{
    check_fixed_block, evaluate_with_scales, TermParams, VarianceParams, ALPHA_MAX, ALPHA_MIN,
};
use crate::spatial::{scale_eigenvalue_slice, SiteSet, SpatialBasis};
use crate::spline::{spline_basis, NvcBasis};
use crate::stats;

/// Lower/upper bounds on `ln(tau^2 / sigma^2)`.
pub const LOG_RATIO_MIN: f64 = -23.0;
/// Ratios below `exp(SNAP_LOG_RATIO)` are candidates for an exact zero.
pub const SNAP_LOG_RATIO: f64 = -9.0;
pub const LOG_RATIO_MAX: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemlConfig {
    pub max_evals: usize,
    pub f_rel_tol: f64,
    /// Above this many free parameters, optimize one covariate at a time.
    pub block_threshold: usize,
    pub block_gain_tol: f64,
    pub max_sweeps: usize,
}

impl Default for RemlConfig {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_rel_tol: 1e-6,
            block_threshold: 12,
            block_gain_tol: 1e-5,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub theta: VarianceParams,
    pub b_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub restricted_loglik: f64,
    pub n_loglik_evals: usize,
    pub converged: bool,
    pub blocks: Vec<BlockInfo>,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Svc(usize),
    Alpha(usize),
    Nvc(usize),
}

/// Maps the free parameter vector onto ratios and alphas.
struct Layout {
    slots: Vec<Slot>,
    /// Free parameter indices owned by each covariate.
    groups: Vec<Vec<usize>>,
}

impl Layout {
    fn new(spec: &ModelSpec, n_eig: usize) -> Self {
        let mut slots = Vec::new();
        let mut groups = vec![Vec::new(); spec.k()];
        for k in 0..spec.k() {
            if spec.has_svc[k] {
                groups[k].push(slots.len());
                slots.push(Slot::Svc(k));
                if n_eig >= 3 {
                    groups[k].push(slots.len());
                    slots.push(Slot::Alpha(k));
                }
            }
            if spec.has_nvc[k] {
                groups[k].push(slots.len());
                slots.push(Slot::Nvc(k));
            }
        }
        Self { slots, groups }
    }

    fn bounds(&self) -> Bounds {
        let (lower, upper) = self
            .slots
            .iter()
            .map(|s| match s {
                Slot::Alpha(_) => (ALPHA_MIN, ALPHA_MAX),
                _ => (LOG_RATIO_MIN, LOG_RATIO_MAX),
            })
            .unzip();
        Bounds { lower, upper }
    }

    fn start(&self, log_ratio: f64, alpha: f64) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Alpha(_) => alpha,
                _ => log_ratio,
            })
            .collect()
    }

    /// Ratio-scale parameters (`sigma2 = 1`). `zeroed[j]` forces slot `j` to ratio 0.
    fn params(&self, k: usize, x: &[f64], zeroed: &[bool]) -> VarianceParams {
        let mut theta = VarianceParams::zeros(k);
        for (j, s) in self.slots.iter().enumerate() {
            match *s {
                Slot::Svc(c) => theta.terms[c].tau2_s = if zeroed[j] { 0.0 } else { x[j].exp() },
                Slot::Alpha(c) => theta.terms[c].alpha = x[j],
                Slot::Nvc(c) => theta.terms[c].tau2_n = if zeroed[j] { 0.0 } else { x[j].exp() },
            }
        }
        theta
    }
}

/// `V` diagonal for ratio-scale parameters. Inputs are bounded, so no validation.
fn scales_for(blocks: &[BlockInfo], theta: &VarianceParams, eigvals: &[f64]) -> DVector<f64> {
    let p: usize = blocks.iter().map(|b| b.width).sum();
    let mut v = DVector::zeros(p);
    for blk in blocks {
        let t = &theta.terms[blk.covariate];
        match blk.kind {
            TermKind::Svc => {
                let ratio = t.tau2_s.sqrt();
                if ratio == 0.0 {
                    continue;
                }
                let w = scale_eigenvalue_slice(eigvals, t.alpha)
                    .expect("nonempty basis")
                    .weights;
                for j in 0..blk.width {
                    v[blk.offset + j] = ratio * w[j].sqrt();
                }
            }
            TermKind::Nvc => {
                let ratio = t.tau2_n.sqrt();
                for j in 0..blk.width {
                    v[blk.offset + j] = ratio;
                }
            }
        }
    }
    v
}

/// Maximizes the restricted log-likelihood over `ln(tau^2/sigma^2)` and `alpha`
/// for every active term. Running out of evaluations is reported through
/// `converged = false`, not as an error.
pub fn fit_reml(
    cp: &Crossproducts,
    spec: &ModelSpec,
    spatial: Option<&SpatialBasis>,
    config: &RemlConfig,
) -> Result<FittedModel> {
    if cp.k() != spec.k() {
        return Err(SnvcError::DimensionMismatch(format!(
            "crossproducts have {} fixed effects, model has {}",
            cp.k(),
            spec.k()
        )));
    }
    check_fixed_block(&cp.xtx)?;
    let eigvals: &[f64] = match spatial {
        Some(b) => b.eigvals(),
        None => &[],
    };
    for blk in &cp.blocks {
        if blk.kind == TermKind::Svc && blk.width != eigvals.len() {
            return Err(SnvcError::DimensionMismatch(format!(
                "SVC block has {} columns, spatial basis has {} eigenvalues",
                blk.width,
                eigvals.len()
            )));
        }
    }

    let k = spec.k();
    let layout = Layout::new(spec, eigvals.len());
    let dim = layout.slots.len();
    let bounds = layout.bounds();
    let no_zero = vec![false; dim];
    let mut evals = 0usize;
    let mut objective = |x: &[f64], zeroed: &[bool], evals: &mut usize| -> f64 {
        *evals += 1;
        let theta = layout.params(k, x, zeroed);
        let v = scales_for(&cp.blocks, &theta, eigvals);
        match evaluate_with_scales(cp, &v) {
            Ok(ev) => -ev.loglik,
            Err(_) => f64::INFINITY,
        }
    };

    let opts = NelderMeadOptions {
        max_evals: config.max_evals,
        f_rel_tol: config.f_rel_tol,
    };
    let starts = [layout.start(0.01_f64.ln(), 1.0), layout.start(0.0, 0.0)];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = true;
    if dim > 0 {
        for x0 in &starts {
            let (x, f, ok) = if dim > config.block_threshold {
                optimize_blocks(
                    &mut objective,
                    &mut evals,
                    x0,
                    &layout.groups,
                    &bounds,
                    &opts,
                    config,
                )
            } else {
                let steps = vec![1.0; dim];
                let r = nelder_mead(
                    |x| objective(x, &no_zero, &mut evals),
                    x0,
                    &steps,
                    &bounds,
                    &opts,
                );
                (r.x, r.f, r.converged)
            };
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((x, f));
                converged = ok;
            }
        }
    }
    let (x_best, f_best) = best.unwrap_or((Vec::new(), f64::INFINITY));

    // The likelihood is flat as a ratio goes to zero, so the simplex stops
    // short of it. Small ratios are tried at exactly zero, smallest first, and
    // kept there when the likelihood does not drop.
    let mut zeroed = vec![false; dim];
    let mut f_cur = f_best;
    let mut small: Vec<usize> = (0..dim)
        .filter(|&j| !matches!(layout.slots[j], Slot::Alpha(_)) && x_best[j] < SNAP_LOG_RATIO)
        .collect();
    small.sort_by(|&a, &b| x_best[a].total_cmp(&x_best[b]));
    for j in small {
        zeroed[j] = true;
        let f_zero = objective(&x_best, &zeroed, &mut evals);
        if f_zero <= f_cur + 1e-8 * f_cur.abs().max(1.0) {
            f_cur = f_cur.min(f_zero);
        } else {
            zeroed[j] = false;
        }
    }

    let ratios = layout.params(k, &x_best, &zeroed);
    let v = scales_for(&cp.blocks, &ratios, eigvals);
    let ev = evaluate_with_scales(cp, &v)?;
    evals += 1;
    let s2 = ev.sigma2_hat;
    let theta = VarianceParams {
        sigma2: s2,
        terms: ratios
            .terms
            .iter()
            .map(|t| TermParams {
                tau2_s: t.tau2_s * s2,
                alpha: t.alpha,
                tau2_n: t.tau2_n * s2,
            })
            .collect(),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        theta,
        b_hat: ev.b_hat.iter().copied().collect(),
        u_hat: ev.u_hat.iter().copied().collect(),
        restricted_loglik: ev.loglik,
        n_loglik_evals: evals,
        converged,
        blocks: cp.blocks.clone(),
    })
}

/// Cyclic per-covariate simplex search. Returns `(x, f, converged)`.
fn optimize_blocks<F>(
    objective: &mut F,
    evals: &mut usize,
    x0: &[f64],
    groups: &[Vec<usize>],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
    config: &RemlConfig,
) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64], &[bool], &mut usize) -> f64,
{
    let no_zero = vec![false; x0.len()];
    let mut x = x0.to_vec();
    let mut f = objective(&x, &no_zero, evals);
    for _ in 0..config.max_sweeps {
        let f_start = f;
        let mut all_ok = true;
        for g in groups.iter().filter(|g| !g.is_empty()) {
            let sub_bounds = Bounds {
                lower: g.iter().map(|&j| bounds.lower[j]).collect(),
                upper: g.iter().map(|&j| bounds.upper[j]).collect(),
            };
            let sub0: Vec<f64> = g.iter().map(|&j| x[j]).collect();
            let steps = vec![1.0; g.len()];
            let base = x.clone();
            let r = nelder_mead(
                |s| {
                    let mut full = base.clone();
                    for (i, &j) in g.iter().enumerate() {
                        full[j] = s[i];
                    }
                    objective(&full, &no_zero, evals)
                },
                &sub0,
                &steps,
                &sub_bounds,
                opts,
            );
            all_ok &= r.converged;
            if r.f < f {
                f = r.f;
                for (i, &j) in g.iter().enumerate() {
                    x[j] = r.x[i];
                }
            }
        }
        if f_start - f < config.block_gain_tol {
            return (x, f, all_ok);
        }
    }
    (x, f, false)
}

/// Average per-site variance of the spatial process implied by `term`:
/// `tau2_s * sum_l w_l / N`. With weights normalized to `w_1 = 1`, `tau2_s`
/// itself is the variance of the leading eigenvector's coefficient only.
pub fn svc_process_variance(basis: &SpatialBasis, term: &TermParams) -> f64 {
    if basis.is_empty() || term.tau2_s == 0.0 {
        return 0.0;
    }
    let w = scale_eigenvalue_slice(basis.eigvals(), term.alpha)
        .expect("nonempty basis")
        .weights;
    term.tau2_s * w.iter().sum::<f64>() / basis.n_sites() as f64
}

/// Per-site coefficient decomposition. `svc[k][i]` etc. are indexed covariate-first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientField {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub svc: Vec<Vec<f64>>,
    pub nvc: Vec<Vec<f64>>,
    pub total: Vec<Vec<f64>>,
    pub sd_svc: Vec<f64>,
    pub sd_nvc: Vec<f64>,
    pub svc_share: Vec<f64>,
    pub constant_coefficient: Vec<bool>,
}

impl CoefficientField {
    pub fn n_sites(&self) -> usize {
        self.total.first().map_or(0, |t| t.len())
    }
}

/// Share of the spatial part: `sd_s / (sd_s + sd_n)`, or `(1.0, true)` when both vanish.
pub fn share_from_sd(sd_svc: f64, sd_nvc: f64) -> (f64, bool) {
    let denom = sd_svc + sd_nvc;
    if denom > 0.0 {
        ((sd_svc / denom).clamp(0.0, 1.0), false)
    } else {
        (1.0, true)
    }
}

pub fn svc_share(field: &CoefficientField) -> Vec<f64> {
    field
        .sd_svc
        .iter()
        .zip(&field.sd_nvc)
        .map(|(&s, &n)| share_from_sd(s, n).0)
        .collect()
}

/// Mean + SVC + NVC coefficient at every site from a fitted model.
pub fn predict_coefficients(
    fit: &FittedModel,
    spatial: Option<&SpatialBasis>,
    nvc_bases: &[Option<NvcBasis>],
) -> Result<CoefficientField> {
    let k = fit.spec.k();
    if nvc_bases.len() != k {
        return Err(SnvcError::DimensionMismatch(format!(
            "{} NVC slots for {k} covariates",
            nvc_bases.len()
        )));
    }
    let n = match (spatial, nvc_bases.iter().flatten().next()) {
        (Some(b), _) => b.n_sites(),
        (None, Some(b)) => b.n_sites(),
        (None, None) => {
            return Err(SnvcError::InvalidArgument(
                "at least one basis is needed to know the number of sites".into(),
            ))
        }
    };
    let eigvals: &[f64] = spatial.map_or(&[], |b| b.eigvals());
    let ratios = VarianceParams {
        sigma2: 1.0,
        terms: fit
            .theta
            .terms
            .iter()
            .map(|t| TermParams {
                tau2_s: t.tau2_s / fit.theta.sigma2,
                alpha: t.alpha,
                tau2_n: t.tau2_n / fit.theta.sigma2,
            })
            .collect(),
    };
    let v = scales_for(&fit.blocks, &ratios, eigvals);

    let mut svc = vec![vec![0.0; n]; k];
    let mut nvc = vec![vec![0.0; n]; k];
    for blk in &fit.blocks {
        let gamma = DVector::from_iterator(
            blk.width,
            (0..blk.width).map(|j| v[blk.offset + j] * fit.u_hat[blk.offset + j]),
        );
        let (basis, dst): (&DMatrix<f64>, &mut Vec<f64>) = match blk.kind {
            TermKind::Svc => (
                spatial
                    .ok_or(SnvcError::EmptySpatialBasis(blk.covariate))?
                    .eigvecs(),
                &mut svc[blk.covariate],
            ),
            TermKind::Nvc => (
                nvc_bases[blk.covariate]
                    .as_ref()
                    .ok_or_else(|| {
                        SnvcError::InvalidArgument(format!(
                            "missing spline basis for covariate {}",
                            blk.covariate
                        ))
                    })?
                    .values(),
                &mut nvc[blk.covariate],
            ),
        };
        if basis.nrows() != n || basis.ncols() != blk.width {
            return Err(SnvcError::DimensionMismatch(format!(
                "basis for covariate {} is {}x{}, expected {n}x{}",
                blk.covariate,
                basis.nrows(),
                basis.ncols(),
                blk.width
            )));
        }
        let field = basis * gamma;
        dst.copy_from_slice(field.as_slice());
    }

    let mean = fit.b_hat.clone();
    let total: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..n).map(|i| (mean[c] + svc[c][i]) + nvc[c][i]).collect())
        .collect();
    let sd_svc: Vec<f64> = svc.iter().map(|s| stats::sd(s)).collect();
    let sd_nvc: Vec<f64> = nvc.iter().map(|s| stats::sd(s)).collect();
    let (svc_share, constant_coefficient) = sd_svc
        .iter()
        .zip(&sd_nvc)
        .map(|(&s, &n)| share_from_sd(s, n))
        .unzip();
    Ok(CoefficientField {
        names: fit.spec.covariate_names.clone(),
        mean,
        svc,
        nvc,
        total,
        sd_svc,
        sd_nvc,
        svc_share,
        constant_coefficient,
    })
}

/// Everything produced by one end-to-end fit.
#[derive(Debug, Clone)]
pub struct SnvcFit {
    pub spatial: Option<SpatialBasis>,
    pub nvc_bases: Vec<Option<NvcBasis>>,
    pub model: FittedModel,
    pub coefficients: CoefficientField,
}

/// Spline bases for every covariate with an NVC term.
pub fn nvc_bases_for(x: &DMatrix<f64>, spec: &ModelSpec) -> Result<Vec<Option<NvcBasis>>> {
    (0..spec.k())
        .map(|k| {
            if spec.has_nvc[k] {
                let col: Vec<f64> = x.column(k).iter().copied().collect();
                spline_basis(&col, spec.n_basis_nvc[k], spec.spline_family).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Sites to coefficient fields. The Moran basis is built only when some covariate
/// has an SVC term.
pub fn fit_snvc(
    sites: &SiteSet,
    x: &DMatrix<f64>,
    y: &[f64],
    spec: &ModelSpec,
    config: &RemlConfig,
) -> Result<SnvcFit> {
    if sites.len() != x.nrows() {
        return Err(SnvcError::DimensionMismatch(format!(
            "{} sites, {} rows in X",
            sites.len(),
            x.nrows()
        )));
    }
    let spatial = if spec.any_svc() {
        Some(SpatialBasis::from_sites(sites)?)
    } else {
        None
    };
    fit_snvc_with_basis(spatial, x, y, spec, config)
}

/// As [`fit_snvc`] with a precomputed spatial basis.
pub fn fit_snvc_with_basis(
    spatial: Option<SpatialBasis>,
    x: &DMatrix<f64>,
    y: &[f64],
    spec: &ModelSpec,
    config: &RemlConfig,
) -> Result<SnvcFit> {
    spec.check_against(x)?;
    let nvc_bases = nvc_bases_for(x, spec)?;
    let design = build_design(x, spec, spatial.as_ref(), &nvc_bases)?;
    let cp = precompute_crossproducts(&design, y)?;
    let model = fit_reml(&cp, spec, spatial.as_ref(), config)?;
    let coefficients = if spatial.is_none() && nvc_bases.iter().all(|b| b.is_none()) {
        constant_field(&model, x.nrows())
    } else {
        predict_coefficients(&model, spatial.as_ref(), &nvc_bases)?
    };
    Ok(SnvcFit {
        spatial,
        nvc_bases,
        model,
        coefficients,
    })
}

fn constant_field(fit: &FittedModel, n: usize) -> CoefficientField {
    let k = fit.spec.k();
    CoefficientField {
        names: fit.spec.covariate_names.clone(),
        mean: fit.b_hat.clone(),
        svc: vec![vec![0.0; n]; k],
        nvc: vec![vec![0.0; n]; k],
        total: fit.b_hat.iter().map(|&b| vec![b; n]).collect(),
        sd_svc: vec![0.0; k],
        sd_nvc: vec![0.0; k],
        svc_share: vec![1.0; k],
        constant_coefficient: vec![true; k],
    }
}
