mod common;

use snvc::sim::generate::{
    gen_coefficients, gen_covariate, generate_instance, generation_kernel, CoefficientStreams,
    GeneratorParams,
};
use snvc::sim::metrics::{rmse, rmse_per_site};
use snvc::sim::rng::{substream, Role};
use snvc::sim::*;
use snvc::stats::{mean, sd};
use snvc::*;

#[test]
fn smooth_covariates_are_positively_autocorrelated() {
    let sites = SiteSet::grid(15).unwrap();
    let c_bar = generation_kernel(&sites).unwrap();
    let c = build_proximity(&sites, mst_range(&sites).unwrap()).unwrap();
    let mut positive = 0;
    for it in 0..100 {
        let x = gen_covariate(&mut substream(5, it, Role::CovariateX2), &c_bar, 1.0).unwrap();
        assert!((mean(&x) - 1.0).abs() < 1e-12);
        let centered: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
        if moran_coefficient(&centered, &c).unwrap() > 0.0 {
            positive += 1;
        }
    }
    assert!(positive >= 95, "{positive} of 100");
}

#[test]
fn generation_kernel_rows_sum_to_one() {
    let sites = layout_sites_gaussian(80);
    let c_bar = generation_kernel(&sites).unwrap();
    for i in 0..80 {
        assert!((c_bar.row(i).sum() - 1.0).abs() < 1e-12);
        assert_eq!(c_bar[(i, i)], 0.0);
    }
}

fn layout_sites_gaussian(n: usize) -> SiteSet {
    snvc::sim::generate::layout_sites(SiteLayout::Gaussian, n, 3, 0).unwrap()
}

#[test]
fn coefficient_generator_examples() {
    let sites = layout_sites_gaussian(100);
    let c_bar = generation_kernel(&sites).unwrap();
    let x3 = gen_covariate(&mut substream(1, 0, Role::CovariateX3), &c_bar, 0.5).unwrap();

    let b = gen_coefficients(
        &mut CoefficientStreams::for_iteration(1, 0),
        &c_bar,
        1.0,
        0.0,
        9.0,
        &x3,
    )
    .unwrap();
    let col = |k: usize| b.column(k).iter().copied().collect::<Vec<f64>>();
    assert!((mean(&col(2)) + 2.0).abs() < 1e-12);
    assert!(col(1).iter().all(|&v| v == 0.5));
    assert!((mean(&col(0)) - 1.0).abs() < 1e-12);

    let b = gen_coefficients(
        &mut CoefficientStreams::for_iteration(1, 0),
        &c_bar,
        0.3,
        4.0,
        9.0,
        &x3,
    )
    .unwrap();
    let shifted: Vec<f64> = b.column(1).iter().map(|v| v - 0.5).collect();
    assert!((sd(&shifted) - 2.0).abs() < 1e-12);
}

#[test]
fn toy_noise_level() {
    for seed in 1..=10 {
        let t = gen_toy(seed).unwrap();
        let resid: Vec<f64> = (0..t.y.len())
            .map(|i| {
                t.y[i] - t.x[(i, 0)] * t.true_betas[(i, 0)] - t.x[(i, 1)] * t.true_betas[(i, 1)]
            })
            .collect();
        assert!((sd(&resid) / 0.2 - 1.0).abs() < 0.1, "seed {seed}");
    }
    let t = gen_toy(1).unwrap();
    let centre = 19 * 40 + 19;
    let x1: Vec<f64> = t.x.column(0).iter().copied().collect();
    assert_eq!(x1[centre], x1.iter().copied().fold(f64::INFINITY, f64::min));
}

#[test]
fn instances_are_pure_functions_of_seed_and_iteration() {
    let p = GeneratorParams {
        n_sites: 60,
        layout: SiteLayout::Gaussian,
        w_sx: 0.4,
        w_s: 0.5,
        tau2_2: 1.0,
        tau2_3: 9.0,
    };
    let a = generate_instance(&p, 42, 3).unwrap();
    let b = generate_instance(&p, 42, 3).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.true_betas, b.true_betas);
    assert_eq!(a.sites.coords(), b.sites.coords());
    let c = generate_instance(&p, 42, 4).unwrap();
    assert_ne!(a.y, c.y);
    let d = generate_instance(&p, 43, 3).unwrap();
    assert_ne!(a.y, d.y);
}

#[test]
fn rmse_matches_double_loop() {
    let n = 30;
    let truth = common::lcg_values(1, n);
    let preds: Vec<Vec<f64>> = (0..4).map(|p| common::lcg_values(10 + p, n)).collect();
    let mut total = 0.0;
    for p in &preds {
        for i in 0..n {
            total += (truth[i] - p[i]) * (truth[i] - p[i]);
        }
    }
    let expected = (total / 4.0).sqrt();
    assert!((rmse(&truth, &preds).unwrap() - expected).abs() < 1e-12);
    assert!((rmse_per_site(&truth, &preds).unwrap() - expected / (n as f64).sqrt()).abs() < 1e-12);

    let shifted: Vec<f64> = truth.iter().map(|v| v - 0.3).collect();
    let r = rmse(&truth, &[shifted.clone(), shifted]).unwrap();
    assert!((r - 0.3 * (n as f64).sqrt()).abs() < 1e-12);
}

#[test]
fn scenario_reports_are_deterministic() {
    let config = ScenarioConfig {
        n_sites: 40,
        n_iters: 2,
        seed: 9,
        estimators: vec![Estimator::Lm, Estimator::Gwr, Estimator::SvcM],
        ..ScenarioConfig::default()
    };
    let a = run_scenario(&config).unwrap();
    let b = run_scenario(&config).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
    assert_eq!(
        serde_json::to_string(&a.without_timing()).unwrap(),
        serde_json::to_string(&b.without_timing()).unwrap()
    );
    assert_eq!(a.timing.len(), 3);
    for s in &a.estimators {
        assert_eq!(s.n_ok + s.n_failed, 2);
        assert!(s.rmse.iter().flatten().all(|&r| r >= 0.0));
        for row in &s.correlation.mean {
            assert!(row.iter().flatten().all(|c| (-1.0..=1.0).contains(c)));
        }
    }
}

#[test]
fn lm_fields_are_constant() {
    let config = ScenarioConfig {
        n_sites: 30,
        n_iters: 1,
        estimators: vec![Estimator::Lm],
        ..ScenarioConfig::default()
    };
    let r = run_scenario(&config).unwrap();
    let lm = r.summary(Estimator::Lm).unwrap();
    assert_eq!(lm.rmse.len(), 3);
    assert!(lm.rmse.iter().all(Option::is_some));
    // Constant fields have no defined correlation.
    assert!(r.iterations[0].fits[0]
        .correlation
        .as_ref()
        .unwrap()
        .get(0, 1)
        .is_none());

    let inst = generate_instance(
        &GeneratorParams {
            n_sites: 30,
            layout: SiteLayout::Gaussian,
            w_sx: 0.4,
            w_s: 0.5,
            tau2_2: 1.0,
            tau2_3: 9.0,
        },
        config.seed,
        0,
    )
    .unwrap();
    let (fields, _) = estimate(Estimator::Lm, &inst, None, &RemlConfig::default()).unwrap();
    for f in fields {
        assert!(f.iter().all(|&v| v == f[0]));
    }
}
