mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use snvc::gwr::{
    aicc, gwr_fit_at, gwr_hat_matrix, select_bandwidth, Bandwidth, GwrKernel, GOLDEN_REL_TOL,
};
use snvc::*;

struct Instance {
    sites: SiteSet,
    x: DMatrix<f64>,
    y: Vec<f64>,
}

/// `y = b0(s) + b1(s) x + noise`; coefficients vary smoothly when `varying`.
fn instance(seed: u64, n: usize, varying: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let coords: Vec<[f64; 2]> = (0..n).map(|_| [z(), z()]).collect();
    let xv: Vec<f64> = (0..n).map(|_| z()).collect();
    let y = (0..n)
        .map(|i| {
            let [u, v] = coords[i];
            let (b0, b1) = if varying {
                (1.0 + u, 2.0 + (2.0 * v).sin())
            } else {
                (1.0, 2.0)
            };
            b0 + b1 * xv[i] + 0.3 * z()
        })
        .collect();
    Instance {
        sites: SiteSet::new(coords).unwrap(),
        x: DMatrix::from_column_slice(n, 1, &xv),
        y,
    }
}

fn with_ones(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

#[test]
fn huge_bandwidth_is_global_ols() {
    let d = instance(1, 40, true);
    let xd = with_ones(&d.x);
    let ols = common::wls_at(&xd, &d.y, &vec![1.0; 40]);
    let bw = Bandwidth::Distance(1e9 * d.sites.max_distance());
    let fit = gwr_fit_at(&d.sites, &d.x, &d.y, GwrKernel::ExponentialFixed, bw, true).unwrap();
    for row in &fit.local_coefs {
        for k in 0..2 {
            assert!((row[k] - ols[k]).abs() < 1e-6);
        }
    }
    assert!((fit.trace_s - 2.0).abs() < 1e-6);
    let n = 40.0_f64;
    let rss: f64 = (0..40)
        .map(|i| (d.y[i] - ols[0] - ols[1] * d.x[(i, 0)]).powi(2))
        .sum();
    let expected = 2.0 * n * (rss / n).sqrt().ln()
        + n * (2.0 * std::f64::consts::PI).ln()
        + n * (n + 2.0) / (n - 4.0);
    assert!((fit.aicc - expected).abs() < 1e-6 * expected.abs());
    assert!((aicc(40, rss, 2.0).unwrap() - expected).abs() < 1e-9 * expected.abs());
}

#[test]
fn local_fits_match_weighted_least_squares() {
    let d = instance(2, 25, true);
    let xd = with_ones(&d.x);
    let p = d.sites.coords();
    let dist = |i: usize, j: usize| common::brute_distance(p[i], p[j]);

    let bw = 0.7;
    let fit = gwr_fit_at(
        &d.sites,
        &d.x,
        &d.y,
        GwrKernel::ExponentialFixed,
        Bandwidth::Distance(bw),
        true,
    )
    .unwrap();
    for i in 0..25 {
        let w: Vec<f64> = (0..25).map(|j| (-dist(i, j) / bw).exp()).collect();
        assert_eq!(w[i], 1.0);
        let b = common::wls_at(&xd, &d.y, &w);
        for k in 0..2 {
            assert!((fit.local_coefs[i][k] - b[k]).abs() < 1e-10, "site {i}");
        }
    }

    let m = 6;
    let fit = gwr_fit_at(
        &d.sites,
        &d.x,
        &d.y,
        GwrKernel::ExponentialAdaptive,
        Bandwidth::Neighbors(m),
        true,
    )
    .unwrap();
    for i in 0..25 {
        let mut others: Vec<f64> = (0..25).filter(|&j| j != i).map(|j| dist(i, j)).collect();
        others.sort_by(f64::total_cmp);
        let r = others[m - 1];
        let w: Vec<f64> = (0..25).map(|j| (-dist(i, j) / r).exp()).collect();
        let b = common::wls_at(&xd, &d.y, &w);
        for k in 0..2 {
            assert!((fit.local_coefs[i][k] - b[k]).abs() < 1e-10, "site {i}");
        }
    }
}

#[test]
fn fitted_values_come_from_the_hat_matrix() {
    let d = instance(3, 30, true);
    for (kernel, bw) in [
        (GwrKernel::ExponentialFixed, Bandwidth::Distance(0.5)),
        (GwrKernel::ExponentialAdaptive, Bandwidth::Neighbors(8)),
    ] {
        let fit = gwr_fit_at(&d.sites, &d.x, &d.y, kernel, bw, true).unwrap();
        let s = gwr_hat_matrix(&d.sites, &d.x, kernel, bw, true).unwrap();
        let sy = &s * nalgebra::DVector::from_column_slice(&d.y);
        let mut rss = 0.0;
        for i in 0..30 {
            let fitted = fit.local_coefs[i][0] + fit.local_coefs[i][1] * d.x[(i, 0)];
            assert!((fitted - sy[i]).abs() < 1e-10);
            rss += (d.y[i] - fitted).powi(2);
        }
        assert!((s.trace() - fit.trace_s).abs() < 1e-10);
        assert!((rss - fit.rss).abs() < 1e-9 * rss);
        assert!(fit.trace_s > 0.0 && fit.trace_s < 30.0);
    }
}

#[test]
fn without_intercept_uses_only_given_columns() {
    let d = instance(4, 30, false);
    let fit = gwr_fit_at(
        &d.sites,
        &d.x,
        &d.y,
        GwrKernel::ExponentialFixed,
        Bandwidth::Distance(1.0),
        false,
    )
    .unwrap();
    assert!(fit.local_coefs.iter().all(|r| r.len() == 1));
    assert!(!fit.include_intercept);
}

/// Under a constant-coefficient truth the AICc search should mostly land on the
/// widest kernel. Over 200 replicates this happens about 78% of the time at
/// N = 60, so 20 replicates are held to a 60% floor and a median bandwidth in
/// the upper half of the range.
#[test]
fn constant_coefficients_prefer_the_widest_kernel() {
    let mut hits = 0;
    let mut rel = Vec::new();
    for seed in 0..20 {
        let d = instance(100 + seed, 60, false);
        let fit =
            select_bandwidth(&d.sites, &d.x, &d.y, GwrKernel::ExponentialFixed, true).unwrap();
        let Bandwidth::Distance(bw) = fit.bandwidth else {
            panic!()
        };
        let hi = d.sites.max_distance();
        if bw == hi {
            hits += 1;
            assert!(
                fit.trace_s < 3.5,
                "widest kernel should be close to global, tr(S) = {}",
                fit.trace_s
            );
        }
        rel.push(bw / hi);
    }
    rel.sort_by(f64::total_cmp);
    eprintln!("upper bound chosen in {hits} of 20 replicates");
    assert!(hits >= 12, "{hits} of 20");
    assert!(rel[10] >= 0.5, "median relative bandwidth {}", rel[10]);
}

#[test]
fn golden_section_agrees_with_grid_scan() {
    let d = instance(5, 80, true);
    let fit = select_bandwidth(&d.sites, &d.x, &d.y, GwrKernel::ExponentialFixed, true).unwrap();
    let Bandwidth::Distance(bw) = fit.bandwidth else {
        panic!()
    };
    let hi = d.sites.max_distance();
    let lo = 0.01 * hi;
    let step = (hi - lo) / 199.0;
    let (mut best_bw, mut best) = (lo, f64::INFINITY);
    for g in 0..200 {
        let b = lo + g as f64 * step;
        if let Ok(f) = gwr_fit_at(
            &d.sites,
            &d.x,
            &d.y,
            GwrKernel::ExponentialFixed,
            Bandwidth::Distance(b),
            true,
        ) {
            if f.aicc < best {
                best = f.aicc;
                best_bw = b;
            }
        }
    }
    assert!(
        best_bw > lo && best_bw < hi,
        "profile minimum should be interior"
    );
    assert!(
        (bw - best_bw).abs() <= step + GOLDEN_REL_TOL * hi,
        "{bw} vs {best_bw}"
    );
    assert!(fit.aicc <= best + 1e-9 * best.abs());

    let a = select_bandwidth(&d.sites, &d.x, &d.y, GwrKernel::ExponentialAdaptive, true).unwrap();
    let Bandwidth::Neighbors(m) = a.bandwidth else {
        panic!()
    };
    for other in 3..80 {
        let f = gwr_fit_at(
            &d.sites,
            &d.x,
            &d.y,
            GwrKernel::ExponentialAdaptive,
            Bandwidth::Neighbors(other),
            true,
        );
        if let Ok(f) = f {
            assert!(a.aicc <= f.aicc, "m = {m} beaten by {other}");
        }
    }
}

#[test]
fn too_few_sites_for_bandwidth_search() {
    let d = instance(6, 6, false);
    assert!(matches!(
        select_bandwidth(&d.sites, &d.x, &d.y, GwrKernel::ExponentialFixed, true),
        Err(SnvcError::InvalidArgument(_))
    ));
    let d = instance(6, 7, false);
    assert!(select_bandwidth(&d.sites, &d.x, &d.y, GwrKernel::ExponentialFixed, true).is_ok());
}

#[test]
fn invalid_bandwidths_are_rejected() {
    let d = instance(7, 20, false);
    for bw in [
        Bandwidth::Distance(0.0),
        Bandwidth::Distance(-1.0),
        Bandwidth::Neighbors(20),
    ] {
        let kernel = if matches!(bw, Bandwidth::Neighbors(_)) {
            GwrKernel::ExponentialAdaptive
        } else {
            GwrKernel::ExponentialFixed
        };
        assert!(
            gwr_fit_at(&d.sites, &d.x, &d.y, kernel, bw, true).is_err(),
            "{bw:?}"
        );
    }
}
