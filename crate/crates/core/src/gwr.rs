//! Geographically weighted regression with exponential kernels and AICc
//! bandwidth selection.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnvcError};
use crate::spatial::SiteSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GwrKernel {
    /// `w_ij = exp(-d_ij / bw)`.
    ExponentialFixed,
    /// `w_ij = exp(-d_ij / r_i(m))` with `r_i(m)` the distance to the m-th nearest other site.
    ExponentialAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Distance(f64),
    Neighbors(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GwrFit {
    /// N x K local coefficients, intercept first when `include_intercept`.
    pub local_coefs: Vec<Vec<f64>>,
    pub bandwidth: Bandwidth,
    pub kernel: GwrKernel,
    pub aicc: f64,
    pub trace_s: f64,
    pub rss: f64,
    pub include_intercept: bool,
}

impl GwrFit {
    /// Local coefficients of column `k` at every site.
    pub fn coefficient(&self, k: usize) -> Vec<f64> {
        self.local_coefs.iter().map(|row| row[k]).collect()
    }
}

fn with_intercept(x: &DMatrix<f64>, include_intercept: bool) -> DMatrix<f64> {
    if include_intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    }
}

/// Pairwise distances plus, for the adaptive kernel, each row's sorted distances
/// to the other sites.
struct Geometry {
    dist: DMatrix<f64>,
    sorted: Option<Vec<Vec<f64>>>,
}

impl Geometry {
    fn new(sites: &SiteSet, adaptive: bool) -> Self {
        let n = sites.len();
        let dist = DMatrix::from_fn(n, n, |i, j| sites.distance(i, j));
        let sorted = adaptive.then(|| {
            (0..n)
                .map(|i| {
                    let mut row: Vec<f64> =
                        (0..n).filter(|&j| j != i).map(|j| dist[(i, j)]).collect();
                    row.sort_by(f64::total_cmp);
                    row
                })
                .collect()
        });
        Self { dist, sorted }
    }

    fn weights(&self, i: usize, kernel: GwrKernel, bw: Bandwidth) -> Result<Vec<f64>> {
        let scale = match (kernel, bw) {
            (GwrKernel::ExponentialFixed, Bandwidth::Distance(b)) => b,
            (GwrKernel::ExponentialAdaptive, Bandwidth::Neighbors(m)) => {
                self.sorted.as_ref().expect("adaptive geometry")[i][m - 1]
            }
            _ => {
                return Err(SnvcError::InvalidArgument(format!(
                    "bandwidth {bw:?} does not fit kernel {kernel:?}"
                )))
            }
        };
        Ok(self
            .dist
            .row(i)
            .iter()
            .map(|&d| {
                if d == 0.0 {
                    1.0
                } else if scale > 0.0 {
                    (-d / scale).exp()
                } else {
                    0.0
                }
            })
            .collect())
    }
}

struct LocalSolution {
    coefs: DMatrix<f64>,
    /// Rows of the hat matrix, only when requested.
    hat: Option<DMatrix<f64>>,
    trace: f64,
    rss: f64,
}

fn check_bandwidth(n: usize, k: usize, kernel: GwrKernel, bw: Bandwidth) -> Result<()> {
    match (kernel, bw) {
        (GwrKernel::ExponentialFixed, Bandwidth::Distance(b)) if b > 0.0 && b.is_finite() => Ok(()),
        (GwrKernel::ExponentialAdaptive, Bandwidth::Neighbors(m)) if m >= k + 2 && m < n => Ok(()),
        _ => Err(SnvcError::InvalidArgument(format!(
            "bandwidth {bw:?} invalid for kernel {kernel:?} with N = {n}, K = {k}"
        ))),
    }
}

fn solve_local(
    geo: &Geometry,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: GwrKernel,
    bw: Bandwidth,
    want_hat: bool,
) -> Result<LocalSolution> {
    let (n, k) = x.shape();
    let mut coefs = DMatrix::zeros(n, k);
    let mut hat = want_hat.then(|| DMatrix::zeros(n, n));
    let mut trace = 0.0;
    let mut rss = 0.0;
    for i in 0..n {
        let w = geo.weights(i, kernel, bw)?;
        let mut xtwx: DMatrix<f64> = DMatrix::zeros(k, k);
        let mut xtwy = DVector::zeros(k);
        for j in 0..n {
            let wj = w[j];
            if wj == 0.0 {
                continue;
            }
            let row = x.row(j);
            for a in 0..k {
                let wa = wj * row[a];
                xtwy[a] += wa * y[j];
                for b in 0..=a {
                    xtwx[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let chol = Cholesky::new(xtwx).ok_or(SnvcError::SingularLocalFit { site: i })?;
        let diag = chol.l_dirty().diagonal();
        let dmax = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(dmin > 1e-7 * dmax) {
            return Err(SnvcError::SingularLocalFit { site: i });
        }
        let beta = chol.solve(&xtwy);
        coefs.row_mut(i).copy_from(&beta.transpose());
        let xi = x.row(i).transpose();
        let ai_xi = chol.solve(&xi);
        // S_ii = x_i' A^-1 x_i w_ii with w_ii = 1.
        trace += xi.dot(&ai_xi) * w[i];
        let fitted = xi.dot(&beta);
        rss += (y[i] - fitted).powi(2);
        if let Some(h) = hat.as_mut() {
            for j in 0..n {
                h[(i, j)] = w[j] * x.row(j).transpose().dot(&ai_xi);
            }
        }
    }
    Ok(LocalSolution {
        coefs,
        hat,
        trace,
        rss,
    })
}

/// `2N ln(sigma) + N ln(2 pi) + N (N + tr) / (N - 2 - tr)` with `sigma^2 = RSS / N`.
pub fn aicc(n: usize, rss: f64, trace: f64) -> Result<f64> {
    let nf = n as f64;
    if trace >= nf - 2.0 {
        return Err(SnvcError::DegreesExhausted { trace, n });
    }
    if !(rss > 0.0) {
        return Err(SnvcError::NumericalBreakdown(
            "GWR residual sum of squares is zero".into(),
        ));
    }
    let sigma = (rss / nf).sqrt();
    Ok(2.0 * nf * sigma.ln()
        + nf * (2.0 * std::f64::consts::PI).ln()
        + nf * (nf + trace) / (nf - 2.0 - trace))
}

fn validate_inputs(sites: &SiteSet, x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != sites.len() || y.len() != sites.len() {
        return Err(SnvcError::DimensionMismatch(format!(
            "{} sites, {} rows in X, {} responses",
            sites.len(),
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Local weighted least squares at every site for one bandwidth.
pub fn gwr_fit_at(
    sites: &SiteSet,
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: GwrKernel,
    bw: Bandwidth,
    include_intercept: bool,
) -> Result<GwrFit> {
    validate_inputs(sites, x, y)?;
    let xd = with_intercept(x, include_intercept);
    check_bandwidth(xd.nrows(), xd.ncols(), kernel, bw)?;
    let geo = Geometry::new(sites, kernel == GwrKernel::ExponentialAdaptive);
    fit_with_geometry(
        &geo,
        &xd,
        &DVector::from_column_slice(y),
        kernel,
        bw,
        include_intercept,
    )
}

fn fit_with_geometry(
    geo: &Geometry,
    xd: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: GwrKernel,
    bw: Bandwidth,
    include_intercept: bool,
) -> Result<GwrFit> {
    let sol = solve_local(geo, xd, y, kernel, bw, false)?;
    let aicc = aicc(xd.nrows(), sol.rss, sol.trace)?;
    Ok(GwrFit {
        local_coefs: sol
            .coefs
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        bandwidth: bw,
        kernel,
        aicc,
        trace_s: sol.trace,
        rss: sol.rss,
        include_intercept,
    })
}

/// Hat matrix `S` with `y_hat = S y`, assembled row by row from the local solutions.
pub fn gwr_hat_matrix(
    sites: &SiteSet,
    x: &DMatrix<f64>,
    kernel: GwrKernel,
    bw: Bandwidth,
    include_intercept: bool,
) -> Result<DMatrix<f64>> {
    let xd = with_intercept(x, include_intercept);
    let n = xd.nrows();
    if sites.len() != n {
        return Err(SnvcError::DimensionMismatch(format!(
            "{} sites, {n} rows in X",
            sites.len()
        )));
    }
    check_bandwidth(n, xd.ncols(), kernel, bw)?;
    let geo = Geometry::new(sites, kernel == GwrKernel::ExponentialAdaptive);
    let sol = solve_local(&geo, &xd, &DVector::zeros(n), kernel, bw, true)?;
    Ok(sol.hat.expect("requested"))
}

/// Relative tolerance of the golden-section search on the fixed bandwidth.
pub const GOLDEN_REL_TOL: f64 = 1e-3;
/// Adaptive bandwidths are searched exhaustively up to this many sites.
pub const EXHAUSTIVE_MAX_N: usize = 200;

/// AICc-minimizing bandwidth. Fixed kernel: golden section on
/// `[0.01 maxdist, maxdist]` plus both endpoints. Adaptive kernel: integer
/// neighbor counts in `[K + 2, N - 1]`. Ties go to the larger bandwidth.
pub fn select_bandwidth(
    sites: &SiteSet,
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: GwrKernel,
    include_intercept: bool,
) -> Result<GwrFit> {
    validate_inputs(sites, x, y)?;
    let xd = with_intercept(x, include_intercept);
    let (n, k) = xd.shape();
    if n < k + 5 {
        return Err(SnvcError::InvalidArgument(format!(
            "bandwidth search needs N >= K + 5, got N = {n}, K = {k}"
        )));
    }
    let geo = Geometry::new(sites, kernel == GwrKernel::ExponentialAdaptive);
    let yv = DVector::from_column_slice(y);
    let eval = |bw: Bandwidth| -> f64 {
        fit_with_geometry(&geo, &xd, &yv, kernel, bw, include_intercept)
            .map_or(f64::INFINITY, |f| f.aicc)
    };

    let best = match kernel {
        GwrKernel::ExponentialFixed => {
            let hi = sites.max_distance();
            let lo = 0.01 * hi;
            let mut tried: Vec<(f64, f64)> = Vec::new();
            let mut f = |b: f64| {
                let v = eval(Bandwidth::Distance(b));
                tried.push((b, v));
                v
            };
            golden_section(&mut f, lo, hi, GOLDEN_REL_TOL);
            f(lo);
            f(hi);
            pick_min(tried.into_iter()).map(Bandwidth::Distance)
        }
        GwrKernel::ExponentialAdaptive => {
            let (lo, hi) = (k + 2, n - 1);
            let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
            let mut f = |m: usize| {
                *cache
                    .entry(m)
                    .or_insert_with(|| eval(Bandwidth::Neighbors(m)))
            };
            if n <= EXHAUSTIVE_MAX_N {
                for m in lo..=hi {
                    f(m);
                }
            } else {
                integer_golden(&mut f, lo, hi);
                f(lo);
                f(hi);
            }
            pick_min(cache.into_iter().map(|(m, v)| (m as f64, v)))
                .map(|m| Bandwidth::Neighbors(m as usize))
        }
    };
    let bw = best.ok_or(SnvcError::NoFeasibleBandwidth)?;
    fit_with_geometry(&geo, &xd, &yv, kernel, bw, include_intercept)
}

/// Smallest finite objective; among exact ties the largest argument.
fn pick_min(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    points
        .filter(|p| p.1.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, p| match acc {
            Some(a) if a.1 < p.1 || (a.1 == p.1 && a.0 >= p.0) => Some(a),
            _ => Some(p),
        })
        .map(|p| p.0)
}

fn golden_section<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, rel_tol: f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > rel_tol * 0.5 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
}

fn integer_golden<F: FnMut(usize) -> f64>(f: &mut F, mut a: usize, mut b: usize) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 3 {
        let c = a + ((1.0 - g) * (b - a) as f64).round() as usize;
        let d = (a + (g * (b - a) as f64).round() as usize).max(c + 1);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    for m in a..=b {
        f(m);
    }
}
