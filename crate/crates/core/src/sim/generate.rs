//! Synthetic data generators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{standard_normals, substream, Role};
use crate::error::{Result, SnvcError};
use crate::spatial::{build_proximity, SiteSet};
use crate::spline::{spline_basis, SplineFamily};
use crate::stats::standardize;

/// Number of thin-plate columns behind the non-spatial part of `beta_3`.
pub const BETA3_SPLINE_BASIS: usize = 10;
pub const NOISE_SD: f64 = 2.0;
pub const TOY_SIDE: usize = 40;
pub const TOY_NOISE_SD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteLayout {
    /// Regular square lattice; the site count must be a perfect square.
    #[serde(alias = "grid_40x40")]
    Grid,
    /// Two independent standard normal coordinates per site, redrawn every iteration.
    #[serde(alias = "gaussian_random")]
    Gaussian,
}

impl std::str::FromStr for SiteLayout {
    type Err = SnvcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "grid_40x40" => Ok(Self::Grid),
            "gaussian" | "gaussian_random" => Ok(Self::Gaussian),
            other => Err(SnvcError::config(
                "layout",
                format!("unknown layout `{other}`, expected grid or gaussian"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub sites: SiteSet,
    /// N x K covariates; for the regression generator column 0 is the intercept.
    pub x: DMatrix<f64>,
    /// N x K true coefficients.
    pub true_betas: DMatrix<f64>,
    pub y: Vec<f64>,
    pub noise_sd: f64,
}

/// Row-standardized `exp(-d_ij)` kernel with zero diagonal.
pub fn generation_kernel(sites: &SiteSet) -> Result<DMatrix<f64>> {
    Ok(build_proximity(sites, 1.0)?.row_standardized())
}

/// `[C_bar e]` for a fresh standard normal `e`.
fn smooth_standardized<R: Rng>(rng: &mut R, c_bar: &DMatrix<f64>) -> Vec<f64> {
    let e = DVector::from_vec(standard_normals(rng, c_bar.ncols()));
    standardize((c_bar * e).as_slice())
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(SnvcError::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {w}"
        )));
    }
    Ok(())
}

/// `1 + w_sx [C_bar e] + (1 - w_sx) [u]`.
pub fn gen_covariate<R: Rng>(rng: &mut R, c_bar: &DMatrix<f64>, w_sx: f64) -> Result<Vec<f64>> {
    check_weight("w_sx", w_sx)?;
    let s = smooth_standardized(rng, c_bar);
    let u = standardize(&standard_normals(rng, c_bar.ncols()));
    Ok(s.iter()
        .zip(&u)
        .map(|(a, b)| 1.0 + w_sx * a + (1.0 - w_sx) * b)
        .collect())
}

/// Independent streams for the three coefficient draws.
pub struct CoefficientStreams<R> {
    pub beta1: R,
    pub beta2: R,
    pub beta3_spatial: R,
    pub beta3_spline: R,
}

impl CoefficientStreams<rand_chacha::ChaCha8Rng> {
    pub fn for_iteration(seed: u64, iteration: u64) -> Self {
        Self {
            beta1: substream(seed, iteration, Role::Beta1),
            beta2: substream(seed, iteration, Role::Beta2),
            beta3_spatial: substream(seed, iteration, Role::Beta3Spatial),
            beta3_spline: substream(seed, iteration, Role::Beta3Spline),
        }
    }
}

/// N x 3 matrix of `(beta_1, beta_2, beta_3)`. `tau2_2`, `tau2_3` are variances.
pub fn gen_coefficients<R: Rng>(
    streams: &mut CoefficientStreams<R>,
    c_bar: &DMatrix<f64>,
    w_s: f64,
    tau2_2: f64,
    tau2_3: f64,
    x3: &[f64],
) -> Result<DMatrix<f64>> {
    check_weight("w_s", w_s)?;
    if !(tau2_2 >= 0.0 && tau2_3 >= 0.0) {
        return Err(SnvcError::InvalidArgument(
            "coefficient variances must be nonnegative".into(),
        ));
    }
    let n = c_bar.nrows();
    if x3.len() != n {
        return Err(SnvcError::DimensionMismatch(format!(
            "x3 has {} values for {n} sites",
            x3.len()
        )));
    }
    let b1 = smooth_standardized(&mut streams.beta1, c_bar);
    let b2 = smooth_standardized(&mut streams.beta2, c_bar);
    let b3s = smooth_standardized(&mut streams.beta3_spatial, c_bar);
    let e3 = spline_basis(x3, BETA3_SPLINE_BASIS, SplineFamily::ThinPlate1d)?;
    let u3 = DVector::from_vec(standard_normals(&mut streams.beta3_spline, e3.len()));
    let b3n = standardize((e3.values() * u3).as_slice());
    let (t2, t3) = (tau2_2.sqrt(), tau2_3.sqrt());
    Ok(DMatrix::from_fn(n, 3, |i, k| match k {
        0 => 1.0 + b1[i],
        1 => 0.5 + t2 * b2[i],
        _ => -2.0 + t3 * (w_s * b3s[i] + (1.0 - w_s) * b3n[i]),
    }))
}

/// Parameters of the regression data generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub n_sites: usize,
    pub layout: SiteLayout,
    pub w_sx: f64,
    pub w_s: f64,
    pub tau2_2: f64,
    pub tau2_3: f64,
}

pub fn layout_sites(layout: SiteLayout, n: usize, seed: u64, iteration: u64) -> Result<SiteSet> {
    match layout {
        SiteLayout::Grid => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(SnvcError::config(
                    "n_sites",
                    format!("grid layout needs a perfect square, got {n}"),
                ));
            }
            SiteSet::grid(side)
        }
        SiteLayout::Gaussian => {
            let mut rng = substream(seed, iteration, Role::Coordinates);
            let z = standard_normals(&mut rng, 2 * n);
            SiteSet::new(z.chunks(2).map(|c| [c[0], c[1]]).collect())
        }
    }
}

/// `y = beta_1 + x_2 beta_2 + x_3 beta_3 + e`, `e ~ N(0, 2^2)`.
pub fn generate_instance(
    params: &GeneratorParams,
    seed: u64,
    iteration: u64,
) -> Result<GeneratedInstance> {
    let n = params.n_sites;
    let sites = layout_sites(params.layout, n, seed, iteration)?;
    let c_bar = generation_kernel(&sites)?;
    let x2 = gen_covariate(
        &mut substream(seed, iteration, Role::CovariateX2),
        &c_bar,
        params.w_sx,
    )?;
    let x3 = gen_covariate(
        &mut substream(seed, iteration, Role::CovariateX3),
        &c_bar,
        params.w_sx,
    )?;
    let mut streams = CoefficientStreams::for_iteration(seed, iteration);
    let betas = gen_coefficients(
        &mut streams,
        &c_bar,
        params.w_s,
        params.tau2_2,
        params.tau2_3,
        &x3,
    )?;
    let eps = standard_normals(&mut substream(seed, iteration, Role::Noise), n);
    let x = DMatrix::from_fn(n, 3, |i, k| match k {
        0 => 1.0,
        1 => x2[i],
        _ => x3[i],
    });
    let y = (0..n)
        .map(|i| betas[(i, 0)] + x2[i] * betas[(i, 1)] + x3[i] * betas[(i, 2)] + NOISE_SD * eps[i])
        .collect();
    Ok(GeneratedInstance {
        sites,
        x,
        true_betas: betas,
        y,
        noise_sd: NOISE_SD,
    })
}

/// 40 x 40 grid, `x_1` = distance to (20, 20), `x_2` = distance to (1, 1),
/// `beta_1 = exp(-x_1/20)`, `beta_2 = exp(-x_2/40)`, noise sd 0.2, no intercept.
pub fn gen_toy(seed: u64) -> Result<GeneratedInstance> {
    let sites = SiteSet::grid(TOY_SIDE)?;
    let n = sites.len();
    let dist = |c: &[f64; 2], p: (f64, f64)| ((c[0] - p.0).powi(2) + (c[1] - p.1).powi(2)).sqrt();
    let x = DMatrix::from_fn(n, 2, |i, k| {
        let c = &sites.coords()[i];
        if k == 0 {
            dist(c, (20.0, 20.0))
        } else {
            dist(c, (1.0, 1.0))
        }
    });
    let betas = DMatrix::from_fn(n, 2, |i, k| {
        if k == 0 {
            (-x[(i, 0)] / 20.0).exp()
        } else {
            (-x[(i, 1)] / 40.0).exp()
        }
    });
    let eps = standard_normals(&mut substream(seed, 0, Role::Noise), n);
    let y = (0..n)
        .map(|i| x[(i, 0)] * betas[(i, 0)] + x[(i, 1)] * betas[(i, 1)] + TOY_NOISE_SD * eps[i])
        .collect();
    Ok(GeneratedInstance {
        sites,
        x,
        true_betas: betas,
        y,
        noise_sd: TOY_NOISE_SD,
    })
}
