use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use nalgebra::DMatrix;
use snvc::{fit_snvc_with_basis, ModelSpec, RemlConfig, SiteSet, SpatialBasis};
use snvc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(snvc_last_error_message()) }.to_string_lossy().into_owned()
}

/// Deterministic scattered sites and a response with spatial and covariate structure.
fn data(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut s = 12345u64;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let coords: Vec<f64> = (0..2 * n).map(|_| next() * 10.0).collect();
    let xv: Vec<f64> = (0..n).map(|_| next() * 4.0 - 2.0).collect();
    let y = (0..n)
        .map(|i| 1.0 + 0.3 * coords[2 * i] + xv[i] * (1.0 + 0.5 * xv[i].sin()) + 0.2 * (next() - 0.5))
        .collect();
    let mut x = vec![1.0; n];
    x.extend(xv);
    (coords, x, y)
}

unsafe fn new_basis(coords: &[f64]) -> *mut SnvcSpatialBasis {
    let mut b = ptr::null_mut();
    assert_eq!(snvc_spatial_basis_new(coords.as_ptr(), coords.len() / 2, &mut b), SnvcStatus::Ok);
    b
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(snvc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn basis_matches_library() {
    let (coords, _, _) = data(60);
    let sites = SiteSet::new(coords.chunks(2).map(|c| [c[0], c[1]]).collect()).unwrap();
    let expected = SpatialBasis::from_sites(&sites).unwrap();
    unsafe {
        let b = new_basis(&coords);
        let (mut n, mut l, mut r) = (0usize, 0usize, 0.0);
        assert_eq!(snvc_spatial_basis_info(b, &mut n, &mut l, &mut r), SnvcStatus::Ok);
        assert_eq!((n, l, r), (60, expected.len(), expected.range()));

        let mut vals = vec![0.0; l];
        assert_eq!(snvc_spatial_basis_eigenvalues(b, vals.as_mut_ptr(), l), SnvcStatus::Ok);
        assert_eq!(vals, expected.eigvals());
        let mut vecs = vec![0.0; n * l];
        assert_eq!(snvc_spatial_basis_eigenvectors(b, vecs.as_mut_ptr(), n * l), SnvcStatus::Ok);
        assert_eq!(vecs, expected.eigvecs().as_slice());

        assert_eq!(snvc_spatial_basis_eigenvalues(b, vals.as_mut_ptr(), l - 1), SnvcStatus::BufferTooSmall);
        assert!(last_error().contains("needed"));
        snvc_spatial_basis_free(b);
    }
}

#[test]
fn fit_matches_library() {
    let n = 80;
    let (coords, x, y) = data(n);
    let svc = [1u8, 1];
    let nvc = [0u8, 1];
    unsafe {
        let b = new_basis(&coords);
        let mut fit = ptr::null_mut();
        let st = snvc_fit(b, x.as_ptr(), y.as_ptr(), n, 2, svc.as_ptr(), nvc.as_ptr(), ptr::null(), &mut fit);
        assert_eq!(st, SnvcStatus::Ok, "{}", last_error());

        let sites = SiteSet::new(coords.chunks(2).map(|c| [c[0], c[1]]).collect()).unwrap();
        let spec = ModelSpec::new(vec!["x0".into(), "x1".into()], vec![true, true], vec![false, true], vec![10, 10], Default::default())
            .unwrap();
        let xm = DMatrix::from_column_slice(n, 2, &x);
        let expected =
            fit_snvc_with_basis(Some(SpatialBasis::from_sites(&sites).unwrap()), &xm, &y, &spec, &RemlConfig::default()).unwrap();

        let (mut nn, mut k, mut s2, mut ll, mut conv) = (0usize, 0usize, 0.0, 0.0, 9u8);
        assert_eq!(snvc_fit_summary(fit, &mut nn, &mut k, &mut s2, &mut ll, &mut conv), SnvcStatus::Ok);
        assert_eq!((nn, k), (n, 2));
        assert_eq!(s2, expected.model.theta.sigma2);
        assert_eq!(ll, expected.model.restricted_loglik);
        assert_eq!(conv, u8::from(expected.model.converged));

        let mut b_hat = [0.0; 2];
        assert_eq!(snvc_fit_fixed_effects(fit, b_hat.as_mut_ptr(), 2), SnvcStatus::Ok);
        assert_eq!(b_hat.to_vec(), expected.model.b_hat);

        let (mut t_s, mut a, mut t_n) = (0.0, 0.0, 0.0);
        assert_eq!(snvc_fit_theta(fit, 1, &mut t_s, &mut a, &mut t_n), SnvcStatus::Ok);
        let t = expected.model.theta.terms[1];
        assert_eq!((t_s, a, t_n), (t.tau2_s, t.alpha, t.tau2_n));
        assert_eq!(snvc_fit_theta(fit, 2, &mut t_s, &mut a, &mut t_n), SnvcStatus::InvalidArgument);

        let mut total = vec![0.0; 2 * n];
        assert_eq!(snvc_fit_coefficients(fit, SnvcCoefPart::Total, total.as_mut_ptr(), 2 * n), SnvcStatus::Ok);
        assert_eq!(total, expected.coefficients.total.concat());
        let mut parts = vec![vec![0.0; 2 * n]; 3];
        for (p, part) in parts.iter_mut().zip([SnvcCoefPart::Mean, SnvcCoefPart::Svc, SnvcCoefPart::Nvc]) {
            assert_eq!(snvc_fit_coefficients(fit, part, p.as_mut_ptr(), 2 * n), SnvcStatus::Ok);
        }
        for i in 0..2 * n {
            assert_eq!(total[i], (parts[0][i] + parts[1][i]) + parts[2][i]);
        }

        let mut share = [0.0; 2];
        assert_eq!(snvc_fit_svc_shares(fit, share.as_mut_ptr(), 2), SnvcStatus::Ok);
        assert_eq!(share[0], 1.0);

        snvc_fit_free(fit);
        snvc_spatial_basis_free(b);
    }
}

#[test]
fn error_statuses() {
    let (coords, x, y) = data(20);
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(snvc_spatial_basis_new(ptr::null(), 20, &mut b), SnvcStatus::NullPointer);
        assert!(last_error().contains("coords"));
        assert_eq!(snvc_spatial_basis_new(coords.as_ptr(), 20, ptr::null_mut()), SnvcStatus::NullPointer);

        let same = vec![1.0; 20];
        assert_eq!(snvc_spatial_basis_new(same.as_ptr(), 10, &mut b), SnvcStatus::DataError);
        assert!(last_error().contains("coincident"));

        let mut fit = ptr::null_mut();
        let on = [1u8, 0];
        let off = [0u8, 0];
        let st = snvc_fit(ptr::null(), x.as_ptr(), y.as_ptr(), 20, 2, on.as_ptr(), off.as_ptr(), ptr::null(), &mut fit);
        assert_eq!(st, SnvcStatus::InvalidArgument);
        assert!(fit.is_null());

        let collinear: Vec<f64> = [vec![1.0; 20], vec![2.0; 20]].concat();
        let st = snvc_fit(ptr::null(), collinear.as_ptr(), y.as_ptr(), 20, 2, off.as_ptr(), off.as_ptr(), ptr::null(), &mut fit);
        assert_eq!(st, SnvcStatus::NumericalError);

        let st = snvc_fit(ptr::null(), x.as_ptr(), y.as_ptr(), 20, 2, off.as_ptr(), off.as_ptr(), ptr::null(), &mut fit);
        assert_eq!(st, SnvcStatus::Ok);
        assert_eq!(last_error(), "");
        snvc_fit_free(fit);

        snvc_fit_free(ptr::null_mut());
        snvc_spatial_basis_free(ptr::null_mut());
        let mut v = 0.0;
        assert_eq!(snvc_fit_fixed_effects(ptr::null(), &mut v, 1), SnvcStatus::NullPointer);
    }
}

#[test]
fn moran_coefficient_of_smooth_field_is_positive() {
    let (coords, _, _) = data(50);
    let z: Vec<f64> = coords.chunks(2).map(|c| c[0] + c[1]).collect();
    let mut mc = 0.0;
    unsafe {
        assert_eq!(snvc_moran_coefficient(coords.as_ptr(), 50, z.as_ptr(), &mut mc), SnvcStatus::Ok);
        assert!(mc > 0.3, "{mc}");
        let flat = vec![3.0; 50];
        assert_eq!(snvc_moran_coefficient(coords.as_ptr(), 50, flat.as_ptr(), &mut mc), SnvcStatus::DataError);
    }
}

fn have(tool: &str) -> bool {
    Command::new(tool).arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/snvc.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["snvc_fit", "snvc_spatial_basis_new", "SNVC_STATUS_BUFFER_TOO_SMALL", "typedef struct SnvcFit SnvcFit"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (tool, lang) in [("cc", "c"), ("c++", "c++")] {
        if !have(tool) {
            eprintln!("{tool} not found, skipping {lang} syntax check");
            continue;
        }
        let out = Command::new(tool).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header]).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
