//! Spatially and non-spatially varying coefficient regression.
//!
//! Moran eigenvector bases carry the spatial part of each coefficient, spline
//! bases the part that varies with the covariate's own value. Variance
//! parameters are estimated by restricted maximum likelihood from crossproducts
//! whose size does not depend on the number of sites.

pub mod design;
pub mod error;
pub mod fit;
pub mod gwr;
pub mod io;
pub mod optim;
pub mod reml;
pub mod sim;
pub mod spatial;
pub mod spline;
pub mod stats;

pub use design::{
    build_design, precompute_crossproducts, BlockInfo, Crossproducts, DesignMatrix, ModelSpec,
    TermKind,
};
pub use error::{ErrorClass, Result, SnvcError};
pub use fit::{
    fit_reml, fit_snvc, fit_snvc_with_basis, predict_coefficients, svc_process_variance, svc_share,
    CoefficientField, FittedModel, RemlConfig, SnvcFit,
};
pub use reml::{restricted_loglik, RemlEvaluation, TermParams, VarianceParams};
pub use spatial::{
    build_proximity, moran_coefficient, moran_eigen_basis, mst_range, scale_eigenvalues,
    EigenScaling, ProximityMatrix, SiteSet, SpatialBasis,
};
pub use spline::{evaluate_nvc, spline_basis, NvcBasis, SplineFamily};
