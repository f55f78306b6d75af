//! Moran eigenvector spatial basis.
//!
//! Sites are planar points. The proximity matrix uses the exponential kernel
//! `c_ij = exp(-d_ij / r)` with a zero diagonal, where the range `r` defaults to
//! the longest edge of the Euclidean minimum spanning tree. The basis keeps the
//! eigenvectors of the doubly-centered matrix `MCM` (`M = I - 11'/N`) that carry
//! positive eigenvalues, i.e. the positively autocorrelated map patterns.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnvcError};

/// Default relative cutoff for treating an eigenvalue as positive.
pub const DEFAULT_CUTOFF_REL: f64 = 1e-8;
/// Largest site count accepted by the dense eigen-decomposition.
pub const DEFAULT_MAX_SITES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSet {
    coords: Vec<[f64; 2]>,
}

impl SiteSet {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(SnvcError::TooFewSites {
                found: coords.len(),
                needed: 2,
            });
        }
        if let Some(i) = coords
            .iter()
            .position(|c| !c[0].is_finite() || !c[1].is_finite())
        {
            return Err(SnvcError::NonFiniteCoordinate(i));
        }
        Ok(Self { coords })
    }

    pub fn from_xy(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(SnvcError::DimensionMismatch(format!(
                "{} x-coordinates vs {} y-coordinates",
                x.len(),
                y.len()
            )));
        }
        Self::new(x.iter().zip(y).map(|(&a, &b)| [a, b]).collect())
    }

    /// A `side x side` lattice with coordinates `1..=side` on both axes, x varying fastest.
    pub fn grid(side: usize) -> Result<Self> {
        let mut coords = Vec::with_capacity(side * side);
        for py in 1..=side {
            for px in 1..=side {
                coords.push([px as f64, py as f64]);
            }
        }
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Largest pairwise distance.
    pub fn max_distance(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }
}

/// Longest edge of the Euclidean minimum spanning tree (Prim, O(N^2)).
pub fn mst_range(sites: &SiteSet) -> Result<f64> {
    let n = sites.len();
    let mut in_tree = vec![false; n];
    let mut link = vec![f64::INFINITY; n];
    let mut longest = 0.0_f64;
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = sites.distance(current, j);
            if d < link[j] {
                link[j] = d;
            }
            if link[j] < next_d {
                next_d = link[j];
                next = j;
            }
        }
        in_tree[next] = true;
        longest = longest.max(next_d);
        current = next;
    }
    if longest <= 0.0 {
        return Err(SnvcError::AllSitesCoincident);
    }
    Ok(longest)
}

/// Symmetric exponential-kernel proximity matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct ProximityMatrix {
    values: DMatrix<f64>,
    range: f64,
}

impl ProximityMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `1'C1`.
    pub fn total_weight(&self) -> f64 {
        self.values.sum()
    }

    /// Row-standardized copy: each row divided by its sum.
    pub fn row_standardized(&self) -> DMatrix<f64> {
        let mut out = self.values.clone();
        for i in 0..out.nrows() {
            let s: f64 = out.row(i).sum();
            if s > 0.0 {
                out.row_mut(i).scale_mut(1.0 / s);
            }
        }
        out
    }
}

pub fn build_proximity(sites: &SiteSet, range: f64) -> Result<ProximityMatrix> {
    if !(range > 0.0) || !range.is_finite() {
        return Err(SnvcError::NonPositiveRange(range));
    }
    let n = sites.len();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let c = (-sites.distance(i, j) / range).exp();
            values[(i, j)] = c;
            values[(j, i)] = c;
        }
    }
    Ok(ProximityMatrix { values, range })
}

/// `MCM` computed by removing row, column and grand means.
pub fn double_center(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| c.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| c.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = c[(i, j)] - row_means[i] - col_means[j] + grand;
        }
    }
    // Symmetrize away rounding so the eigen-solver sees an exactly symmetric input.
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Full spectrum of `MCM`, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct MoranSpectrum {
    pub eigvecs: DMatrix<f64>,
    pub eigvals: Vec<f64>,
}

impl MoranSpectrum {
    /// Largest eigenvalue magnitude, the reference scale for "numerically zero".
    pub fn spectral_radius(&self) -> f64 {
        self.eigvals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub fn moran_spectrum(c: &ProximityMatrix) -> Result<MoranSpectrum> {
    moran_spectrum_limited(c, DEFAULT_MAX_SITES)
}

pub fn moran_spectrum_limited(c: &ProximityMatrix, max_sites: usize) -> Result<MoranSpectrum> {
    let n = c.n();
    if n > max_sites {
        return Err(SnvcError::TooManySites {
            n,
            limit: max_sites,
        });
    }
    let mcm = double_center(c.values());
    let eig = SymmetricEigen::new(mcm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigvecs = DMatrix::zeros(n, n);
    let mut eigvals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        orient(&mut col);
        eigvecs.set_column(dst, &col);
        eigvals.push(eig.eigenvalues[src]);
    }
    Ok(MoranSpectrum { eigvecs, eigvals })
}

/// Fixes the sign ambiguity: the entry of largest magnitude is made positive.
fn orient(col: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() + 1e-12 {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.neg_mut();
    }
}

/// Positive-eigenvalue Moran eigenvectors `E` and their eigenvalues.
#[derive(Debug, Clone)]
pub struct SpatialBasis {
    eigvecs: DMatrix<f64>,
    eigvals: Vec<f64>,
    range: f64,
    n_total_nonzero: usize,
}

impl SpatialBasis {
    /// Assembles a basis from precomputed parts. Eigenvalues must be positive and
    /// sorted descending, one per column.
    pub fn from_parts(eigvecs: DMatrix<f64>, eigvals: Vec<f64>, range: f64) -> Result<Self> {
        if eigvecs.ncols() != eigvals.len() {
            return Err(SnvcError::DimensionMismatch(format!(
                "{} eigenvectors vs {} eigenvalues",
                eigvecs.ncols(),
                eigvals.len()
            )));
        }
        if eigvals.iter().any(|&v| !(v > 0.0)) || eigvals.windows(2).any(|w| w[1] > w[0]) {
            return Err(SnvcError::InvalidArgument(
                "eigenvalues must be positive and sorted descending".into(),
            ));
        }
        let n_total_nonzero = eigvals.len();
        Ok(Self {
            eigvecs,
            eigvals,
            range,
            n_total_nonzero,
        })
    }

    /// MST range, exponential proximity, and the default eigenvalue cutoff in one call.
    pub fn from_sites(sites: &SiteSet) -> Result<Self> {
        let r = mst_range(sites)?;
        let c = build_proximity(sites, r)?;
        moran_eigen_basis(&c, DEFAULT_CUTOFF_REL)
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn n_sites(&self) -> usize {
        self.eigvecs.nrows()
    }

    /// Number of retained eigenvectors `L`.
    pub fn len(&self) -> usize {
        self.eigvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigvals.is_empty()
    }

    /// Count of all eigenvalues of `MCM` that are numerically nonzero, either sign.
    pub fn n_total_nonzero(&self) -> usize {
        self.n_total_nonzero
    }

    /// Keeps only the `l` leading eigenpairs.
    pub fn truncated(&self, l: usize) -> Self {
        let l = l.min(self.len());
        Self {
            eigvecs: self.eigvecs.columns(0, l).into_owned(),
            eigvals: self.eigvals[..l].to_vec(),
            range: self.range,
            n_total_nonzero: self.n_total_nonzero,
        }
    }
}

/// Retains eigenpairs of `MCM` with `lambda > cutoff_rel * rho`, where `rho` is the
/// spectral radius. An empty basis is a valid result.
pub fn moran_eigen_basis(c: &ProximityMatrix, cutoff_rel: f64) -> Result<SpatialBasis> {
    moran_eigen_basis_limited(c, cutoff_rel, DEFAULT_MAX_SITES)
}

pub fn moran_eigen_basis_limited(
    c: &ProximityMatrix,
    cutoff_rel: f64,
    max_sites: usize,
) -> Result<SpatialBasis> {
    if !(cutoff_rel > 0.0 && cutoff_rel < 1.0) {
        return Err(SnvcError::InvalidArgument(format!(
            "eigenvalue cutoff must lie in (0, 1), got {cutoff_rel}"
        )));
    }
    let spectrum = moran_spectrum_limited(c, max_sites)?;
    let threshold = cutoff_rel * spectrum.spectral_radius();
    let l = spectrum
        .eigvals
        .iter()
        .take_while(|&&v| v > threshold)
        .count();
    let n_total_nonzero = spectrum
        .eigvals
        .iter()
        .filter(|v| v.abs() > threshold)
        .count();
    Ok(SpatialBasis {
        eigvecs: spectrum.eigvecs.columns(0, l).into_owned(),
        eigvals: spectrum.eigvals[..l].to_vec(),
        range: c.range(),
        n_total_nonzero,
    })
}

/// `(lambda_l / lambda_1)^alpha` weights for the spatial variance.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenScaling {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

pub fn scale_eigenvalues(basis: &SpatialBasis, alpha: f64) -> Result<EigenScaling> {
    scale_eigenvalue_slice(basis.eigvals(), alpha)
}

pub(crate) fn scale_eigenvalue_slice(eigvals: &[f64], alpha: f64) -> Result<EigenScaling> {
    let lead = *eigvals.first().ok_or(SnvcError::EmptyBasis)?;
    let weights = eigvals.iter().map(|&v| (v / lead).powf(alpha)).collect();
    Ok(EigenScaling { alpha, weights })
}

/// Moran coefficient `N z'MCMz / (1'C1 z'Mz)`.
pub fn moran_coefficient(z: &[f64], c: &ProximityMatrix) -> Result<f64> {
    let n = c.n();
    if z.len() != n {
        return Err(SnvcError::DimensionMismatch(format!(
            "vector of length {} vs {n} sites",
            z.len()
        )));
    }
    let m = z.iter().sum::<f64>() / n as f64;
    let zc = DVector::from_iterator(n, z.iter().map(|&v| v - m));
    let denom = zc.norm_squared();
    let scale = z.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if denom <= (1e-14 * scale).powi(2) * n as f64 || denom == 0.0 {
        return Err(SnvcError::ConstantVector);
    }
    let total = c.total_weight();
    if total == 0.0 {
        return Err(SnvcError::InvalidArgument(
            "proximity matrix sums to zero".into(),
        ));
    }
    let num = zc.dot(&(c.values() * &zc));
    Ok(n as f64 * num / (total * denom))
}
