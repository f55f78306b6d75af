//! Model specification, design matrix assembly and the size-independent
//! crossproducts that every likelihood evaluation consumes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnvcError};
use crate::spatial::SpatialBasis;
use crate::spline::{NvcBasis, SplineFamily, DEFAULT_N_BASIS};

/// Per-covariate switches for the mean + SVC + NVC decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub covariate_names: Vec<String>,
    pub has_svc: Vec<bool>,
    pub has_nvc: Vec<bool>,
    pub n_basis_nvc: Vec<usize>,
    pub spline_family: SplineFamily,
}

impl ModelSpec {
    pub fn new(
        covariate_names: Vec<String>,
        has_svc: Vec<bool>,
        has_nvc: Vec<bool>,
        n_basis_nvc: Vec<usize>,
        spline_family: SplineFamily,
    ) -> Result<Self> {
        let k = covariate_names.len();
        if k == 0 {
            return Err(SnvcError::InvalidArgument(
                "model needs at least one covariate".into(),
            ));
        }
        if has_svc.len() != k || has_nvc.len() != k || n_basis_nvc.len() != k {
            return Err(SnvcError::DimensionMismatch(format!(
                "{k} covariate names but {}/{}/{} svc/nvc/basis switches",
                has_svc.len(),
                has_nvc.len(),
                n_basis_nvc.len()
            )));
        }
        Ok(Self {
            covariate_names,
            has_svc,
            has_nvc,
            n_basis_nvc,
            spline_family,
        })
    }

    /// Same switch for every covariate, default basis size and spline family.
    pub fn uniform(names: &[&str], svc: bool, nvc: bool) -> Self {
        let k = names.len();
        Self {
            covariate_names: names.iter().map(|s| s.to_string()).collect(),
            has_svc: vec![svc; k],
            has_nvc: vec![nvc; k],
            n_basis_nvc: vec![DEFAULT_N_BASIS; k],
            spline_family: SplineFamily::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn any_svc(&self) -> bool {
        self.has_svc.iter().any(|&b| b)
    }

    /// Rejects an NVC term on a constant (e.g. intercept) column of `x`.
    pub fn check_against(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.k() {
            return Err(SnvcError::DimensionMismatch(format!(
                "X has {} columns, model has {} covariates",
                x.ncols(),
                self.k()
            )));
        }
        for k in 0..self.k() {
            if self.has_nvc[k] {
                let col = x.column(k);
                let first = col[0];
                if col.iter().all(|&v| v == first) {
                    return Err(SnvcError::InvalidArgument(format!(
                        "covariate `{}` is constant and cannot carry a non-spatial term",
                        self.covariate_names[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    Svc,
    Nvc,
}

/// Location of one random-effect block inside the stacked random design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub covariate: usize,
    pub kind: TermKind,
    pub offset: usize,
    pub width: usize,
}

/// Fixed-effect block `X` and random-effect blocks `x_k o E` stacked as
/// all SVC blocks (covariate order) followed by all NVC blocks.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub blocks: Vec<BlockInfo>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Total random-effect columns `P`.
    pub fn p(&self) -> usize {
        self.e.ncols()
    }

    pub fn block(&self, covariate: usize, kind: TermKind) -> Option<&BlockInfo> {
        self.blocks
            .iter()
            .find(|b| b.covariate == covariate && b.kind == kind)
    }
}

/// Builds the design. `nvc_bases[k]` must be `Some` exactly when `spec.has_nvc[k]`.
pub fn build_design(
    x: &DMatrix<f64>,
    spec: &ModelSpec,
    spatial: Option<&SpatialBasis>,
    nvc_bases: &[Option<NvcBasis>],
) -> Result<DesignMatrix> {
    let n = x.nrows();
    let k = spec.k();
    if x.ncols() != k || nvc_bases.len() != k {
        return Err(SnvcError::DimensionMismatch(format!(
            "X has {} columns, {} NVC slots, model has {k} covariates",
            x.ncols(),
            nvc_bases.len()
        )));
    }

    let mut blocks = Vec::new();
    let mut offset = 0;
    for c in 0..k {
        if !spec.has_svc[c] {
            continue;
        }
        let basis = spatial
            .filter(|b| !b.is_empty())
            .ok_or(SnvcError::EmptySpatialBasis(c))?;
        if basis.n_sites() != n {
            return Err(SnvcError::DimensionMismatch(format!(
                "spatial basis has {} rows, X has {n}",
                basis.n_sites()
            )));
        }
        blocks.push(BlockInfo {
            covariate: c,
            kind: TermKind::Svc,
            offset,
            width: basis.len(),
        });
        offset += basis.len();
    }
    for c in 0..k {
        match (spec.has_nvc[c], &nvc_bases[c]) {
            (true, Some(b)) => {
                if b.n_sites() != n {
                    return Err(SnvcError::DimensionMismatch(format!(
                        "spline basis for covariate {c} has {} rows, X has {n}",
                        b.n_sites()
                    )));
                }
                blocks.push(BlockInfo {
                    covariate: c,
                    kind: TermKind::Nvc,
                    offset,
                    width: b.len(),
                });
                offset += b.len();
            }
            (true, None) => {
                return Err(SnvcError::InvalidArgument(format!(
                    "missing spline basis for covariate {c}"
                )))
            }
            (false, _) => {}
        }
    }

    let mut e = DMatrix::zeros(n, offset);
    for blk in &blocks {
        let src = match blk.kind {
            TermKind::Svc => spatial.expect("checked above").eigvecs(),
            TermKind::Nvc => nvc_bases[blk.covariate]
                .as_ref()
                .expect("checked above")
                .values(),
        };
        let xk = x.column(blk.covariate);
        for j in 0..blk.width {
            let mut dst = e.column_mut(blk.offset + j);
            for i in 0..n {
                dst[i] = xk[i] * src[(i, j)];
            }
        }
    }
    Ok(DesignMatrix {
        x: x.clone(),
        e,
        blocks,
    })
}

/// Everything the restricted likelihood needs. None of these grow with `N`.
#[derive(Debug, Clone)]
pub struct Crossproducts {
    pub xtx: DMatrix<f64>,
    pub xte: DMatrix<f64>,
    pub ete: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub ety: DVector<f64>,
    pub yty: f64,
    pub n: usize,
    pub blocks: Vec<BlockInfo>,
}

impl Crossproducts {
    pub fn k(&self) -> usize {
        self.xtx.nrows()
    }

    pub fn p(&self) -> usize {
        self.ete.nrows()
    }
}

pub fn precompute_crossproducts(design: &DesignMatrix, y: &[f64]) -> Result<Crossproducts> {
    let n = design.n();
    if y.len() != n {
        return Err(SnvcError::DimensionMismatch(format!(
            "y has {} entries, design has {n} rows",
            y.len()
        )));
    }
    if n <= design.x.ncols() {
        return Err(SnvcError::InvalidArgument(format!(
            "need more observations ({n}) than fixed effects ({})",
            design.x.ncols()
        )));
    }
    let yv = DVector::from_column_slice(y);
    let xt = design.x.transpose();
    let et = design.e.transpose();
    Ok(Crossproducts {
        xtx: &xt * &design.x,
        xte: &xt * &design.e,
        ete: &et * &design.e,
        xty: &xt * &yv,
        ety: &et * &yv,
        yty: yv.norm_squared(),
        n,
        blocks: design.blocks.clone(),
    })
}
