//! Spline bases for non-spatially varying coefficients.
//!
//! Two families are available. `NaturalCubic` is the cubic B-spline basis
//! restricted to zero second derivative at both boundary knots, with the
//! constant direction removed (the same construction as R's `splines::ns`).
//! `ThinPlate1d` uses the radial kernel `|x - k|^3` at the knots. Both are
//! built on the covariate rescaled to `[0, 1]` and then column-centered so that
//! every generated coefficient curve has mean zero over the sample.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnvcError};
use crate::stats::quantile_sorted;

pub const MIN_BASIS: usize = 3;
pub const MAX_BASIS: usize = 50;
pub const DEFAULT_N_BASIS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplineFamily {
    #[default]
    #[serde(rename = "natural")]
    NaturalCubic,
    #[serde(rename = "thinplate")]
    ThinPlate1d,
}

impl std::str::FromStr for SplineFamily {
    type Err = SnvcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "natural" | "natural_cubic" | "ns" => Ok(Self::NaturalCubic),
            "thinplate" | "thin_plate" | "thin_plate_1d" | "tp" => Ok(Self::ThinPlate1d),
            other => Err(SnvcError::config(
                "spline",
                format!("unknown spline family `{other}`"),
            )),
        }
    }
}

/// Centered spline basis `E_k^(n)` for one covariate.
#[derive(Debug, Clone)]
pub struct NvcBasis {
    values: DMatrix<f64>,
    knots: Vec<f64>,
    family: SplineFamily,
    source_range: (f64, f64),
}

impl NvcBasis {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Boundary and interior knots in the covariate's own units, strictly increasing.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn family(&self) -> SplineFamily {
        self.family
    }

    pub fn source_range(&self) -> (f64, f64) {
        self.source_range
    }

    pub fn n_sites(&self) -> usize {
        self.values.nrows()
    }

    /// Number of basis columns `L_k`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }
}

pub fn spline_basis(x: &[f64], n_basis: usize, family: SplineFamily) -> Result<NvcBasis> {
    if !(MIN_BASIS..=MAX_BASIS).contains(&n_basis) {
        return Err(SnvcError::InvalidArgument(format!(
            "number of spline basis functions must be in [{MIN_BASIS}, {MAX_BASIS}], got {n_basis}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SnvcError::InvalidArgument(
            "covariate contains non-finite values".into(),
        ));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(SnvcError::TooFewDistinctValues {
                found: 0,
                needed: n_basis + 2,
            })
        }
    };
    if lo == hi {
        return Err(SnvcError::ConstantCovariate);
    }
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < n_basis + 2 {
        return Err(SnvcError::TooFewDistinctValues {
            found: distinct.len(),
            needed: n_basis + 2,
        });
    }

    // Interior knots at equally spaced quantiles; natural splines carry n_basis - 1
    // of them, the thin-plate kernel uses n_basis knots including both boundaries.
    let n_interior = match family {
        SplineFamily::NaturalCubic => n_basis - 1,
        SplineFamily::ThinPlate1d => n_basis - 2,
    };
    let mut interior: Vec<f64> = (1..=n_interior)
        .map(|j| quantile_sorted(&sorted, j as f64 / (n_interior + 1) as f64))
        .filter(|&k| k > lo && k < hi)
        .collect();
    interior.dedup();
    if interior.len() < n_interior.min(3) {
        return Err(SnvcError::TooFewDistinctValues {
            found: distinct.len(),
            needed: n_basis + 2,
        });
    }

    let width = hi - lo;
    let unit = |v: f64| (v - lo) / width;
    let u: Vec<f64> = x.iter().map(|&v| unit(v)).collect();
    let inner_u: Vec<f64> = interior.iter().map(|&k| unit(k)).collect();

    let raw = match family {
        SplineFamily::NaturalCubic => natural_cubic_columns(&u, &inner_u),
        SplineFamily::ThinPlate1d => {
            let mut centers = Vec::with_capacity(inner_u.len() + 2);
            centers.push(0.0);
            centers.extend_from_slice(&inner_u);
            centers.push(1.0);
            DMatrix::from_fn(u.len(), centers.len(), |i, j| {
                (u[i] - centers[j]).abs().powi(3)
            })
        }
    };

    let values = center_and_prune(raw);
    let mut knots = Vec::with_capacity(interior.len() + 2);
    knots.push(lo);
    knots.extend_from_slice(&interior);
    knots.push(hi);
    Ok(NvcBasis {
        values,
        knots,
        family,
        source_range: (lo, hi),
    })
}

/// `E_k^(n) gamma`.
pub fn evaluate_nvc(basis: &NvcBasis, gamma: &[f64]) -> Result<Vec<f64>> {
    if gamma.len() != basis.len() {
        return Err(SnvcError::DimensionMismatch(format!(
            "gamma has {} entries, basis has {} columns",
            gamma.len(),
            basis.len()
        )));
    }
    let n = basis.n_sites();
    let mut out = vec![0.0; n];
    for (j, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(basis.values.column(j).iter()) {
            *o += v * g;
        }
    }
    Ok(out)
}

fn center_and_prune(raw: DMatrix<f64>) -> DMatrix<f64> {
    let n = raw.nrows();
    let mut keep = Vec::with_capacity(raw.ncols());
    for j in 0..raw.ncols() {
        let col = raw.column(j);
        let m = col.sum() / n as f64;
        let centered: Vec<f64> = col.iter().map(|&v| v - m).collect();
        let ss: f64 = centered.iter().map(|v| v * v).sum();
        let sd = (ss / (n.max(2) - 1) as f64).sqrt();
        // Values live on the unit-rescaled covariate, so the scale is 1.
        if sd > 1e-10 {
            keep.push(centered);
        }
    }
    DMatrix::from_fn(n, keep.len(), |i, j| keep[j][i])
}

/// Natural cubic spline columns on `[0, 1]` with the given interior knots.
fn natural_cubic_columns(u: &[f64], interior: &[f64]) -> DMatrix<f64> {
    const ORDER: usize = 4;
    let mut knots = vec![0.0; ORDER];
    knots.extend_from_slice(interior);
    knots.extend(std::iter::repeat(1.0).take(ORDER));
    let n_bs = knots.len() - ORDER;

    // Drop the first B-spline (removes the constant direction), then project onto
    // the subspace with zero second derivative at both boundaries.
    let m = n_bs - 1;
    let d_lo = bspline_values(&knots, ORDER, 0.0, 2);
    let d_hi = bspline_values(&knots, ORDER, 1.0, 2);
    let constraint = DMatrix::from_fn(m, 2, |i, j| if j == 0 { d_lo[i + 1] } else { d_hi[i + 1] });
    let null = householder_complement(&constraint);

    let mut out = DMatrix::zeros(u.len(), null.ncols());
    for (i, &ui) in u.iter().enumerate() {
        let b = bspline_values(&knots, ORDER, ui, 0);
        for c in 0..null.ncols() {
            let mut s = 0.0;
            for r in 0..m {
                s += b[r + 1] * null[(r, c)];
            }
            out[(i, c)] = s;
        }
    }
    out
}

/// Values (or `deriv`-th derivatives) of all B-splines of the given order at `x`.
/// `x` equal to the last knot is assigned to the last non-empty interval.
pub(crate) fn bspline_values(knots: &[f64], order: usize, x: f64, deriv: usize) -> Vec<f64> {
    let n_knots = knots.len();
    let base_order = order - deriv.min(order - 1);
    // Order-1 indicator functions.
    let mut vals = vec![0.0; n_knots - 1];
    let last = knots[n_knots - 1];
    let mut span = None;
    for i in 0..n_knots - 1 {
        if knots[i] < knots[i + 1]
            && ((knots[i] <= x && x < knots[i + 1]) || (x == last && knots[i + 1] == last))
        {
            span = Some(i);
            if x < knots[i + 1] {
                break;
            }
        }
    }
    if let Some(i) = span {
        vals[i] = 1.0;
    }
    for k in 2..=base_order {
        let count = n_knots - k;
        let mut next = vec![0.0; count];
        for i in 0..count {
            let left_den = knots[i + k - 1] - knots[i];
            let right_den = knots[i + k] - knots[i + 1];
            let mut v = 0.0;
            if left_den > 0.0 {
                v += (x - knots[i]) / left_den * vals[i];
            }
            if right_den > 0.0 {
                v += (knots[i + k] - x) / right_den * vals[i + 1];
            }
            next[i] = v;
        }
        vals = next;
    }
    for k in (base_order + 1)..=order {
        let count = n_knots - k;
        let scale = (k - 1) as f64;
        let mut next = vec![0.0; count];
        for i in 0..count {
            let left_den = knots[i + k - 1] - knots[i];
            let right_den = knots[i + k] - knots[i + 1];
            let mut v = 0.0;
            if left_den > 0.0 {
                v += vals[i] / left_den;
            }
            if right_den > 0.0 {
                v -= vals[i + 1] / right_den;
            }
            next[i] = scale * v;
        }
        vals = next;
    }
    vals
}

/// Orthonormal basis of the orthogonal complement of the column space of `a`
/// (`m x p`, full column rank), via Householder reflections.
fn householder_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, p) = a.shape();
    let mut work = a.clone();
    let mut q = DMatrix::<f64>::identity(m, m);
    for k in 0..p {
        let norm = work.view((k, k), (m - k, 1)).norm();
        if norm == 0.0 {
            continue;
        }
        let alpha = if work[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // work <- H work, q <- q H with H = I - 2 v v' / v'v.
        for j in 0..p {
            let dot: f64 = (k..m).map(|i| v[i - k] * work[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                work[(i, j)] -= f * v[i - k];
            }
        }
        for r in 0..m {
            let dot: f64 = (k..m).map(|i| q[(r, i)] * v[i - k]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                q[(r, i)] -= f * v[i - k];
            }
        }
    }
    q.columns(p, m - p).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn constant_covariate_rejected() {
        assert!(matches!(
            spline_basis(&[1.0; 40], 10, SplineFamily::NaturalCubic),
            Err(SnvcError::ConstantCovariate)
        ));
    }

    #[test]
    fn too_few_distinct_values() {
        let x: Vec<f64> = (0..100).map(|i| (i % 6) as f64).collect();
        assert!(matches!(
            spline_basis(&x, 10, SplineFamily::NaturalCubic),
            Err(SnvcError::TooFewDistinctValues { found: 6, .. })
        ));
    }

    #[test]
    fn basis_size_bounds() {
        let x = linspace(0.0, 1.0, 100);
        assert!(spline_basis(&x, 2, SplineFamily::NaturalCubic).is_err());
        assert!(spline_basis(&x, 51, SplineFamily::NaturalCubic).is_err());
    }

    #[test]
    fn columns_are_centered_and_sized() {
        let x: Vec<f64> = (0..300)
            .map(|i| ((i * 37) % 101) as f64 * 0.3 + (i as f64).sqrt())
            .collect();
        for family in [SplineFamily::NaturalCubic, SplineFamily::ThinPlate1d] {
            let b = spline_basis(&x, 10, family).unwrap();
            assert_eq!(b.len(), 10);
            assert_eq!(b.n_sites(), 300);
            for j in 0..b.len() {
                let m = b.values().column(j).sum() / 300.0;
                assert!(m.abs() < 1e-12, "{family:?} column {j} mean {m}");
            }
            assert!(b.knots().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn bsplines_partition_unity() {
        let mut knots = vec![0.0; 4];
        knots.extend([0.2, 0.5, 0.7]);
        knots.extend([1.0; 4]);
        for &x in &[0.0, 0.1, 0.5, 0.99, 1.0] {
            let v = bspline_values(&knots, 4, x, 0);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bspline_second_derivative_matches_finite_difference() {
        let mut knots = vec![0.0; 4];
        knots.extend([0.3, 0.6]);
        knots.extend([1.0; 4]);
        let h = 1e-4;
        let x = 0.45;
        let d2 = bspline_values(&knots, 4, x, 2);
        let f = |t: f64| bspline_values(&knots, 4, t, 0);
        let (a, b, c) = (f(x - h), f(x), f(x + h));
        for i in 0..d2.len() {
            let fd = (a[i] - 2.0 * b[i] + c[i]) / (h * h);
            assert!(
                (fd - d2[i]).abs() < 1e-4 * (1.0 + d2[i].abs()),
                "{i}: {fd} vs {}",
                d2[i]
            );
        }
    }

    #[test]
    fn natural_basis_is_linear_beyond_constraint() {
        // Second derivative of every column vanishes at both boundaries.
        let x = linspace(0.0, 10.0, 200);
        let b = spline_basis(&x, 6, SplineFamily::NaturalCubic).unwrap();
        let v = b.values();
        let second = |j: usize, i: usize| v[(i - 1, j)] - 2.0 * v[(i, j)] + v[(i + 1, j)];
        for j in 0..b.len() {
            let peak = (1..199).map(|i| second(j, i).abs()).fold(0.0, f64::max);
            // f'' is linear on the end segments; extrapolate it to the boundary sites.
            let lo = 2.0 * second(j, 1) - second(j, 2);
            let hi = 2.0 * second(j, 198) - second(j, 197);
            assert!(
                lo.abs() < 1e-6 * peak && hi.abs() < 1e-6 * peak,
                "col {j}: {lo} {hi} vs {peak}"
            );
        }
    }

    #[test]
    fn evaluate_examples() {
        let x = linspace(-3.0, 5.0, 60);
        let b = spline_basis(&x, 5, SplineFamily::NaturalCubic).unwrap();
        let zero = evaluate_nvc(&b, &vec![0.0; b.len()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let mut e1 = vec![0.0; b.len()];
        e1[0] = 1.0;
        let first = evaluate_nvc(&b, &e1).unwrap();
        for i in 0..60 {
            assert_eq!(first[i], b.values()[(i, 0)]);
        }
        assert!(matches!(
            evaluate_nvc(&b, &[1.0]),
            Err(SnvcError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn complement_is_orthogonal() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, 0.0, 3.0, 1.0, 1.0]);
        let q = householder_complement(&a);
        assert_eq!(q.shape(), (4, 2));
        assert!((q.transpose() * &a).abs().max() < 1e-13);
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).abs().max() < 1e-13);
    }
}
