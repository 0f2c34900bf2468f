mod erm;
mod multitask;
mod regularized;

pub use erm::{
    argmax_candidates, build_candidates, closed_form_candidates, erm, erm_over_candidates, optimize_constant_pricing,
    optimize_linear_pricing, refined_candidates, score_candidates, solve_linear_pricing, CandidateScore, ErmResult,
};
pub use multitask::{
    multitask_lambda_max, multitask_lasso_cv, multitask_lasso_policy, multitask_objective, MultiTaskCv, MultiTaskCvFit,
    MultiTaskFit, MultiTaskOptions,
};
pub use regularized::{
    mu_n, regularized_erm, regularized_erm_on_records, regularized_erm_with_candidates, MuRule, RegularizedErm, SplitConfig,
};
