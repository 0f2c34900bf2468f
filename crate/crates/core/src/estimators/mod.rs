mod baselines;
mod closed_form;
mod dr;
mod pipeline;

pub use baselines::{direct_records, ips_records, value_direct, value_ips, value_oracle};
pub use closed_form::{
    pricing_linear_records, pricing_quadratic_records, theta_dr_iv, theta_dr_multiaction, theta_dr_pricing_linear,
    theta_dr_pricing_quadratic, value_dr_semibandit,
};
pub use dr::{
    invert_sigma, make_dr_records, theta_dr, value, value_dr, value_dr_revenue, DrRecord, Objective, RevenueModel,
    ValueEstimate, DEFAULT_RIDGE, MAX_CONDITION,
};
pub use pipeline::{cross_fit_records, Estimator, EstimatorKind, NuisanceStyle, RecordMaker, RecordSource};
