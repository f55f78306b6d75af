//! Restricted log-likelihood of the mixed-model form
//!
//! ```text
//! y = X b + E V(theta) u + e,   u ~ N(0, s2 I),   e ~ N(0, s2 I)
//! ```
//!
//! where `V` is diagonal with `(tau_s / sigma) * w^(1/2)` on each SVC block
//! (`w_l = (lambda_l / lambda_1)^alpha`) and `tau_n / sigma` on each NVC block.
//! The BLUE/BLUP system, its log-determinant and the penalized residual sum of
//! squares are all expanded through [`Crossproducts`], so one evaluation costs
//! `O((K + P)^3)` regardless of the sample size. `sigma^2` is profiled out.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{BlockInfo, Crossproducts, ModelSpec, TermKind};
use crate::error::{Result, SnvcError};
use crate::spatial::EigenScaling;

pub const ALPHA_MIN: f64 = -5.0;
pub const ALPHA_MAX: f64 = 10.0;

/// Relative floor on the profiled residual variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Variance parameters of one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermParams {
    pub tau2_s: f64,
    pub alpha: f64,
    pub tau2_n: f64,
}

impl Default for TermParams {
    fn default() -> Self {
        Self {
            tau2_s: 0.0,
            alpha: 1.0,
            tau2_n: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceParams {
    pub sigma2: f64,
    pub terms: Vec<TermParams>,
}

impl VarianceParams {
    /// All random-effect variances zero.
    pub fn zeros(k: usize) -> Self {
        Self {
            sigma2: 1.0,
            terms: vec![TermParams::default(); k],
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(SnvcError::InvalidArgument(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if self.terms.len() != spec.k() {
            return Err(SnvcError::DimensionMismatch(format!(
                "{} variance terms for {} covariates",
                self.terms.len(),
                spec.k()
            )));
        }
        for (k, t) in self.terms.iter().enumerate() {
            let ok = t.tau2_s >= 0.0
                && t.tau2_n >= 0.0
                && t.tau2_s.is_finite()
                && t.tau2_n.is_finite()
                && (ALPHA_MIN..=ALPHA_MAX).contains(&t.alpha)
                && (spec.has_svc[k] || t.tau2_s == 0.0)
                && (spec.has_nvc[k] || t.tau2_n == 0.0);
            if !ok {
                return Err(SnvcError::InvalidArgument(format!(
                    "invalid variance parameters for covariate {k}: {t:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of one likelihood evaluation.
#[derive(Debug, Clone)]
pub struct RemlEvaluation {
    pub loglik: f64,
    pub b_hat: DVector<f64>,
    pub u_hat: DVector<f64>,
    pub sigma2_hat: f64,
    /// `ln |[X'X, X'EV; VE'X, VE'EV + I]|`.
    pub log_det: f64,
}

/// Diagonal of `V(theta)` over the stacked random-effect columns.
pub fn random_effect_scales(
    blocks: &[BlockInfo],
    theta: &VarianceParams,
    scalings: &[Option<EigenScaling>],
) -> Result<DVector<f64>> {
    let p: usize = blocks.iter().map(|b| b.width).sum();
    let mut v = DVector::zeros(p);
    for blk in blocks {
        let t = theta.terms.get(blk.covariate).ok_or_else(|| {
            SnvcError::DimensionMismatch(format!(
                "no variance parameters for covariate {}",
                blk.covariate
            ))
        })?;
        match blk.kind {
            TermKind::Svc => {
                let ratio = (t.tau2_s / theta.sigma2).sqrt();
                if ratio == 0.0 {
                    continue;
                }
                let sc = scalings
                    .get(blk.covariate)
                    .and_then(|s| s.as_ref())
                    .ok_or_else(|| {
                        SnvcError::InvalidArgument(format!(
                            "missing eigenvalue scaling for covariate {}",
                            blk.covariate
                        ))
                    })?;
                if sc.weights.len() != blk.width {
                    return Err(SnvcError::DimensionMismatch(format!(
                        "scaling has {} weights, SVC block has {} columns",
                        sc.weights.len(),
                        blk.width
                    )));
                }
                if sc.alpha != t.alpha {
                    return Err(SnvcError::InvalidArgument(format!(
                        "scaling alpha {} disagrees with theta alpha {} for covariate {}",
                        sc.alpha, t.alpha, blk.covariate
                    )));
                }
                for (j, w) in sc.weights.iter().enumerate() {
                    v[blk.offset + j] = ratio * w.sqrt();
                }
            }
            TermKind::Nvc => {
                let ratio = (t.tau2_n / theta.sigma2).sqrt();
                for j in 0..blk.width {
                    v[blk.offset + j] = ratio;
                }
            }
        }
    }
    Ok(v)
}

/// Checks that `X'X` is numerically positive definite.
pub fn check_fixed_block(xtx: &DMatrix<f64>) -> Result<()> {
    let chol = Cholesky::new(xtx.clone()).ok_or(SnvcError::SingularFixedBlock)?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min > 1e-7 * max) {
        return Err(SnvcError::SingularFixedBlock);
    }
    Ok(())
}

/// Restricted log-likelihood at `theta` with `sigma^2` profiled out.
///
/// Only the ratios `tau^2 / sigma^2` in `theta` matter; the returned
/// `sigma2_hat` is the profiled estimate.
pub fn restricted_loglik(
    cp: &Crossproducts,
    spec: &ModelSpec,
    theta: &VarianceParams,
    scalings: &[Option<EigenScaling>],
) -> Result<RemlEvaluation> {
    theta.validate(spec)?;
    check_fixed_block(&cp.xtx)?;
    let v = random_effect_scales(&cp.blocks, theta, scalings)?;
    evaluate_with_scales(cp, &v)
}

/// Core evaluation given the diagonal of `V`. Skips validation.
pub(crate) fn evaluate_with_scales(cp: &Crossproducts, v: &DVector<f64>) -> Result<RemlEvaluation> {
    let k = cp.k();
    let p = cp.p();
    let m = k + p;
    let mut a = DMatrix::zeros(m, m);
    a.view_mut((0, 0), (k, k)).copy_from(&cp.xtx);
    for j in 0..p {
        let vj = v[j];
        for i in 0..k {
            let val = cp.xte[(i, j)] * vj;
            a[(i, k + j)] = val;
            a[(k + j, i)] = val;
        }
        for i in 0..p {
            a[(k + i, k + j)] = v[i] * cp.ete[(i, j)] * vj;
        }
        a[(k + j, k + j)] += 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs.rows_mut(0, k).copy_from(&cp.xty);
    for j in 0..p {
        rhs[k + j] = v[j] * cp.ety[j];
    }

    let chol = Cholesky::new(a).ok_or_else(|| {
        SnvcError::NumericalBreakdown("mixed-model matrix is not positive definite".into())
    })?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let sol = chol.solve(&rhs);

    // ||y - Xb - EVu||^2 + ||u||^2 at the solution equals y'y - sol'rhs.
    let penalized_rss = cp.yty - sol.dot(&rhs);
    let dof = (cp.n - k) as f64;
    let floor = VARIANCE_FLOOR * (cp.yty / cp.n as f64);
    if !(penalized_rss > floor) || !log_det.is_finite() {
        return Err(SnvcError::NumericalBreakdown(format!(
            "residual variance {:.3e} is at or below the floor",
            penalized_rss / dof
        )));
    }
    let sigma2_hat = penalized_rss / dof;
    let loglik =
        -0.5 * log_det - 0.5 * dof * (1.0 + (2.0 * std::f64::consts::PI * sigma2_hat).ln());
    Ok(RemlEvaluation {
        loglik,
        b_hat: sol.rows(0, k).into_owned(),
        u_hat: sol.rows(k, p).into_owned(),
        sigma2_hat,
        log_det,
    })
}
