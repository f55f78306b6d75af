//! Monte Carlo lab: data generators, accuracy metrics and the scenario runner.

pub mod generate;
pub mod metrics;
pub mod rng;
pub mod scenario;

pub use generate::{
    gen_coefficients, gen_covariate, gen_toy, generate_instance, GeneratedInstance, SiteLayout,
};
pub use metrics::{coef_correlations, rmse, rmse_per_site, CorrelationMatrix, MeanCorrelation};
pub use scenario::{estimate, run_scenario, Estimator, ScenarioConfig, ScenarioReport};
