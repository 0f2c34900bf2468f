mod dgp;
mod runner;
mod truth;

pub use dgp::{
    dgp_coefficients, generate_data, generate_pricing_data, generate_quadratic_data, generate_resource_data,
    true_nuisances, Application, DgpConfig, Form, Regime, SyntheticData, RESOURCE_COST,
};
pub use runner::{
    aggregate_stats, evaluation_policy, run_evaluation_experiment, run_regret_experiment, run_resource_experiment,
    sim_seed, AggregateStats, CellSummary, ExperimentResult, FailureNote, RunOptions, SimRecord, EVALUATION_POLICIES,
    MAX_FAILURE_RATE,
};
pub use truth::{
    expect_zbar, gauss_legendre, has_closed_form, linear_moments, monte_carlo_value, pricing_best_in_class,
    resource_best_in_class, resource_moments, true_policy_value, ORACLE_DRAWS, ORACLE_SEED,
};
