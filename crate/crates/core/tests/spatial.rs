mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use snvc::spatial::{moran_spectrum, MoranSpectrum};
use snvc::*;

fn random_sites(seed: u64, n: usize) -> SiteSet {
    let v = common::lcg_values(seed, 2 * n);
    SiteSet::new(v.chunks(2).map(|c| [c[0] * 5.0, c[1] * 5.0]).collect()).unwrap()
}

fn proximity(sites: &SiteSet) -> ProximityMatrix {
    build_proximity(sites, mst_range(sites).unwrap()).unwrap()
}

fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn full_spectrum(c: &ProximityMatrix) -> MoranSpectrum {
    moran_spectrum(c).unwrap()
}

#[test]
fn covariance_factorization_identity() {
    for seed in 0..5 {
        let n = 50;
        let c = proximity(&random_sites(seed, n));
        let m = centering(n);
        let lhs = &m * (c.values() + DMatrix::identity(n, n)) * &m;
        let sp = full_spectrum(&c);
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(sp.eigvals.clone()));
        let rhs = &sp.eigvecs * lambda * sp.eigvecs.transpose() + &m;
        assert!(max_abs(&(lhs - rhs)) < 1e-8, "seed {seed}");
    }
}

#[test]
fn basis_is_orthonormal_and_centered() {
    let b = SpatialBasis::from_sites(&random_sites(11, 60)).unwrap();
    let e = b.eigvecs();
    let gram = e.transpose() * e;
    assert!(max_abs(&(gram - DMatrix::identity(b.len(), b.len()))) < 1e-10);
    for col in e.column_iter() {
        assert!(col.sum().abs() < 1e-10);
    }
    assert!(b.eigvals().iter().all(|&l| l > 0.0));
    assert!(b.eigvals().windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn trace_balance() {
    let n = 40;
    let c = proximity(&random_sites(3, n));
    let sp = full_spectrum(&c);
    let total: f64 = sp.eigvals.iter().sum();
    assert!((total + c.total_weight() / n as f64).abs() < 1e-10);
}

#[test]
fn collinear_points_have_one_positive_eigenpair() {
    let sites = SiteSet::new((0..4).map(|i| [i as f64, 0.0]).collect()).unwrap();
    let c = proximity(&sites);
    let b = moran_eigen_basis(&c, 1e-8).unwrap();
    assert_eq!(b.len(), 1);
    let m = centering(4);
    let oracle = common::jacobi_eigenvalues(&(&m * c.values() * &m));
    assert!(oracle[1] <= 1e-12);
    assert!((b.eigvals()[0] - oracle[0]).abs() < 1e-10);
}

#[test]
fn proximity_matches_brute_force_distances() {
    let sites = random_sites(21, 10);
    let r = mst_range(&sites).unwrap();
    let c = build_proximity(&sites, r).unwrap();
    let p = sites.coords();
    for i in 0..10 {
        assert_eq!(c.values()[(i, i)], 0.0);
        for j in 0..10 {
            if i != j {
                let expected = (-common::brute_distance(p[i], p[j]) / r).exp();
                assert!((c.values()[(i, j)] - expected).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn moran_coefficients_follow_eigenvalues() {
    let n = 70;
    let sites = random_sites(8, n);
    let c = proximity(&sites);
    let b = moran_eigen_basis(&c, 1e-8).unwrap();
    let mut prev = f64::INFINITY;
    for (l, col) in b.eigvecs().column_iter().enumerate() {
        let z: Vec<f64> = col.iter().copied().collect();
        let mc = moran_coefficient(&z, &c).unwrap();
        let expected = n as f64 * b.eigvals()[l] / c.total_weight();
        assert!((mc - expected).abs() < 1e-10, "l = {l}");
        assert!(mc < prev);
        prev = mc;
    }
}

#[test]
fn larger_alpha_gives_smoother_processes() {
    let sites = SiteSet::grid(20).unwrap();
    let c = proximity(&sites);
    let b = moran_eigen_basis(&c, 1e-8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut prev = f64::NEG_INFINITY;
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let w = scale_eigenvalues(&b, alpha).unwrap().weights;
        let mut total = 0.0;
        for _ in 0..200 {
            let g: Vec<f64> = w
                .iter()
                .map(|wl| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    wl.sqrt() * z
                })
                .collect();
            let beta = b.eigvecs() * DVector::from_vec(g);
            total += moran_coefficient(beta.as_slice(), &c).unwrap();
        }
        let mean_mc = total / 200.0;
        assert!(mean_mc > prev, "alpha {alpha}: {mean_mc} <= {prev}");
        prev = mean_mc;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn mst_range_scales_and_translates(
        pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..25),
        s in 0.1f64..10.0,
        dx in -50.0f64..50.0,
    ) {
        let a: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let Ok(base) = SiteSet::new(a.clone()) else { return Ok(()) };
        let Ok(r) = mst_range(&base) else { return Ok(()) };
        let moved = SiteSet::new(a.iter().map(|p| [s * p[0] + dx, s * p[1] - dx]).collect()).unwrap();
        let r2 = mst_range(&moved).unwrap();
        prop_assert!((r2 - s * r).abs() <= 1e-9 * (s * r).max(1.0));
        // Every site is within the range of some other site.
        for (i, p) in a.iter().enumerate() {
            let nearest = a.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| common::brute_distance(*p, *q)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= r + 1e-12);
        }
    }

    #[test]
    fn proximity_is_symmetric_with_unit_bounded_entries(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..20),
        r in 0.01f64..20.0,
    ) {
        let sites = SiteSet::new(pts.iter().map(|&(x, y)| [x, y]).collect()).unwrap();
        let c = build_proximity(&sites, r).unwrap();
        let v = c.values();
        for i in 0..v.nrows() {
            prop_assert_eq!(v[(i, i)], 0.0);
            for j in 0..v.ncols() {
                prop_assert_eq!(v[(i, j)], v[(j, i)]);
                if i != j {
                    prop_assert!(v[(i, j)] >= 0.0 && v[(i, j)] <= 1.0);
                }
            }
        }
    }
}
