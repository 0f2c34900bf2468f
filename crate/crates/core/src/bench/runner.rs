//! Replication runner: per-simulation data, nuisance fits, value estimates
//! or learned policies, and their aggregation into per-cell statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate_data, Application, DgpConfig, SyntheticData, RESOURCE_COST};
use super::truth::{
    has_closed_form, monte_carlo_value, pricing_best_in_class, resource_best_in_class, true_policy_value, ORACLE_DRAWS,
    ORACLE_SEED,
};
use crate::error::{Error, Result};
use crate::estimators::{cross_fit_records, value, Estimator, EstimatorKind, RecordMaker};
use crate::nuisance::NuisanceConfig;
use crate::policy::{Policy, PolicySpace};
use crate::policy_opt::{multitask_lasso_cv, regularized_erm, MuRule, MultiTaskCv, SplitConfig};
use crate::rng::derive_seed;

/// Fraction of failed simulations above which a cell is dropped.
pub const MAX_FAILURE_RATE: f64 = 0.1;

/// The four evaluation policies, each a function of `z̄`.
pub fn evaluation_policy(name: &str, regime: super::dgp::Regime) -> Result<Policy> {
    let (k, l) = (regime.context_dim(), regime.active());
    match name {
        "constant" => Ok(Policy::constant(1.0)),
        "linear" => Policy::summary_linear(l, k),
        "threshold" => Policy::threshold(1.0, 1.0, 1.5, l),
        "sin" => Ok(Policy::sin(l)),
        other => Err(Error::invalid(format!("unknown evaluation policy '{other}'"))),
    }
}

pub const EVALUATION_POLICIES: [&str; 4] = ["constant", "linear", "threshold", "sin"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub sim: usize,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub policy: String,
    /// Value estimate (evaluation) or true value of the learned policy.
    pub value: f64,
    /// True policy value (evaluation) or best-in-class value.
    pub true_value: f64,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub sim: usize,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// Set when `count == 1`, where `std` is reported as 0.
    pub single: bool,
}

/// Sample mean and `n − 1` standard deviation, summed in sorted order so the
/// result does not depend on record order.
pub fn aggregate_stats(values: &[f64]) -> Option<AggregateStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
        dev.sort_by(f64::total_cmp);
        (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(AggregateStats {
        mean,
        std,
        count: v.len(),
        single: v.len() == 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: String,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub sims: usize,
    pub mean: f64,
    pub std: f64,
    pub single: bool,
    pub true_value: f64,
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: DgpConfig,
    pub records: Vec<SimRecord>,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<FailureNote>,
    /// `(estimator, n)` pairs dropped for exceeding the failure rate.
    pub dropped: Vec<(EstimatorKind, usize)>,
    pub best_in_class: Option<f64>,
}

impl ExperimentResult {
    pub fn partial_failure(&self) -> bool {
        !self.dropped.is_empty()
    }

    pub fn cell(&self, policy: &str, estimator: EstimatorKind, n: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.estimator == estimator && c.n == n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub sims: usize,
    pub seed: u64,
    /// Two-fold swap instead of a single nuisance/evaluation split.
    pub cross_fit: bool,
    pub nuisance: NuisanceConfig,
    pub split: SplitConfig,
    pub mu: MuRule,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sims: 100,
            seed: 42,
            cross_fit: false,
            nuisance: NuisanceConfig::default(),
            split: SplitConfig::default(),
            mu: MuRule::default(),
        }
    }
}

impl RunOptions {
    fn validate(&self, ns: &[usize]) -> Result<()> {
        if self.sims == 0 {
            return Err(Error::invalid("sims must be at least 1"));
        }
        if ns.is_empty() || ns.iter().any(|n| *n < 8) {
            return Err(Error::invalid("every sample size must be at least 8"));
        }
        Ok(())
    }
}

/// Seed for the data of simulation `sim` at sample size `n`.
pub fn sim_seed(master: u64, n: usize, sim: usize) -> u64 {
    derive_seed(derive_seed(master, n as u64), sim as u64)
}

fn estimator_for(kind: EstimatorKind, sample: &SyntheticData, nuisance: &NuisanceConfig) -> Estimator {
    let app = sample.config.application;
    Estimator::new(kind, app.feature_map(), app.nuisance_style())
        .with_truth(sample.truth.clone())
        .with_config(nuisance.clone())
}

#[derive(Default)]
struct JobOutput {
    records: Vec<SimRecord>,
    failures: Vec<FailureNote>,
}

fn run_jobs<F>(ns: &[usize], sims: usize, job: F) -> (Vec<SimRecord>, Vec<FailureNote>)
where
    F: Fn(usize, usize) -> JobOutput + Sync,
{
    let jobs: Vec<(usize, usize)> = ns.iter().flat_map(|&n| (0..sims).map(move |s| (n, s))).collect();
    let outs: Vec<JobOutput> = jobs.par_iter().map(|&(n, s)| job(n, s)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outs {
        records.extend(o.records);
        failures.extend(o.failures);
    }
    (records, failures)
}

fn summarize(
    config: DgpConfig,
    records: Vec<SimRecord>,
    failures: Vec<FailureNote>,
    sims: usize,
    best_in_class: Option<f64>,
) -> ExperimentResult {
    let mut fail_count: BTreeMap<(EstimatorKind, usize), usize> = BTreeMap::new();
    for f in &failures {
        *fail_count.entry((f.estimator, f.n)).or_default() += 1;
    }
    let dropped: Vec<(EstimatorKind, usize)> = fail_count
        .iter()
        .filter(|(_, &c)| c as f64 > MAX_FAILURE_RATE * sims as f64)
        .map(|(k, _)| *k)
        .collect();
    let mut groups: BTreeMap<(String, EstimatorKind, usize), Vec<&SimRecord>> = BTreeMap::new();
    for r in &records {
        if !dropped.contains(&(r.estimator, r.n)) {
            groups.entry((r.policy.clone(), r.estimator, r.n)).or_default().push(r);
        }
    }
    let cells = groups
        .into_iter()
        .filter_map(|((policy, estimator, n), rs)| {
            let vals: Vec<f64> = rs.iter().map(|r| r.value).collect();
            let stats = aggregate_stats(&vals)?;
            let regrets: Vec<f64> = rs.iter().filter_map(|r| r.regret).collect();
            let regret_stats = aggregate_stats(&regrets);
            Some(CellSummary {
                policy,
                estimator,
                n,
                sims: stats.count,
                mean: stats.mean,
                std: stats.std,
                single: stats.single,
                true_value: rs[0].true_value,
                mean_regret: regret_stats.map(|s| s.mean),
                std_regret: regret_stats.map(|s| s.std),
            })
        })
        .collect();
    ExperimentResult {
        config,
        records,
        cells,
        failures,
        dropped,
        best_in_class,
    }
}

/// Off-policy evaluation of fixed policies by each estimator.
pub fn run_evaluation_experiment(
    cfg: &DgpConfig,
    ns: &[usize],
    policies: &[(String, Policy)],
    estimators: &[EstimatorKind],
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    opts.validate(ns)?;
    if policies.is_empty() || estimators.is_empty() {
        return Err(Error::invalid("need at least one policy and one estimator"));
    }
    let objective = cfg.application.objective();
    let truths = policies
        .iter()
        .map(|(_, pi)| true_policy_value(cfg, pi, ORACLE_DRAWS))
        .collect::<Result<Vec<_>>>()?;
    let (records, failures) = run_jobs(ns, opts.sims, |n, sim| {
        let mut out = JobOutput::default();
        let data_seed = sim_seed(opts.seed, n, sim);
        let sample = match generate_data(&cfg.with_n(n).with_seed(data_seed)) {
            Ok(s) => s,
            Err(e) => {
                for &kind in estimators {
                    out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() });
                }
                return out;
            }
        };
        let half = n / 2;
        let (train, eval) = (
            sample.data.subset(&(0..half).collect::<Vec<_>>()),
            sample.data.subset(&(half..n).collect::<Vec<_>>()),
        );
        let fit_seed = derive_seed(data_seed, 1);
        for &kind in estimators {
            let est = estimator_for(kind, &sample, &opts.nuisance);
            let recs = if opts.cross_fit {
                cross_fit_records(&est, &sample.data, fit_seed)
            } else {
                est.fit(&train, fit_seed).and_then(|src| src.records(&eval))
            };
            let values = recs.and_then(|recs| {
                policies
                    .iter()
                    .map(|(_, pi)| value(&recs, pi, &objective).map(|v| v.estimate))
                    .collect::<Result<Vec<_>>>()
            });
            match values {
                Ok(vals) => {
                    for (((name, _), v), t) in policies.iter().zip(vals).zip(&truths) {
                        out.records.push(SimRecord {
                            sim,
                            n,
                            estimator: kind,
                            policy: name.clone(),
                            value: v,
                            true_value: *t,
                            regret: None,
                        });
                    }
                }
                Err(e) => out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() }),
            }
        }
        out
    });
    Ok(summarize(*cfg, records, failures, opts.sims, None))
}

/// Policy learning by regularized ERM with each estimator's records; the
/// regret of a learned policy is measured against the best-in-class value.
pub fn run_regret_experiment(
    cfg: &DgpConfig,
    ns: &[usize],
    space: &PolicySpace,
    space_name: &str,
    learners: &[EstimatorKind],
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    opts.validate(ns)?;
    if cfg.application == Application::ResourceAllocation {
        return Err(Error::invalid("use run_resource_experiment for allocation problems"));
    }
    let objective = cfg.application.objective();
    let (best_policy, best) = pricing_best_in_class(cfg, space)?;
    let best_mc = std::sync::OnceLock::new();
    let (records, failures) = run_jobs(ns, opts.sims, |n, sim| {
        let mut out = JobOutput::default();
        let data_seed = sim_seed(opts.seed, n, sim);
        let learned = generate_data(&cfg.with_n(n).with_seed(data_seed)).map(|sample| {
            learners
                .iter()
                .map(|&kind| {
                    let est = estimator_for(kind, &sample, &opts.nuisance);
                    let split = SplitConfig { seed: derive_seed(data_seed, 2), ..opts.split };
                    let fit = regularized_erm(&sample.data, &est, space, &objective, split, opts.mu, derive_seed(data_seed, 3))?;
                    let pi = fit.policy;
                    if has_closed_form(cfg, &pi) {
                        let v = true_policy_value(cfg, &pi, ORACLE_DRAWS)?;
                        Ok((v, best - v))
                    } else {
                        let v = monte_carlo_value(cfg, &pi, ORACLE_DRAWS, ORACLE_SEED)?;
                        let reference = *best_mc.get_or_init(|| {
                            monte_carlo_value(cfg, &best_policy, ORACLE_DRAWS, ORACLE_SEED).unwrap_or(best)
                        });
                        Ok((v, reference - v))
                    }
                })
                .collect::<Vec<Result<(f64, f64)>>>()
        });
        match learned {
            Ok(results) => {
                for (&kind, r) in learners.iter().zip(results) {
                    match r {
                        Ok((v, regret)) => out.records.push(SimRecord {
                            sim,
                            n,
                            estimator: kind,
                            policy: space_name.to_string(),
                            value: v,
                            true_value: best,
                            regret: Some(regret),
                        }),
                        Err(e) => out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() }),
                    }
                }
            }
            Err(e) => {
                for &kind in learners {
                    out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() });
                }
            }
        }
        out
    });
    Ok(summarize(*cfg, records, failures, opts.sims, Some(best)))
}

/// Multi-task lasso allocation policies learned from each estimator's records
/// on the non-nuisance part of the sample.
pub fn run_resource_experiment(
    cfg: &DgpConfig,
    ns: &[usize],
    learners: &[EstimatorKind],
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    opts.validate(ns)?;
    if cfg.application != Application::ResourceAllocation {
        return Err(Error::invalid("resource experiment needs the allocation application"));
    }
    let (_, best) = resource_best_in_class(cfg.regime, cfg.form)?;
    let (records, failures) = run_jobs(ns, opts.sims, |n, sim| {
        let mut out = JobOutput::default();
        let data_seed = sim_seed(opts.seed, n, sim);
        let sample = match generate_data(&cfg.with_n(n).with_seed(data_seed)) {
            Ok(s) => s,
            Err(e) => {
                for &kind in learners {
                    out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() });
                }
                return out;
            }
        };
        let n1 = ((opts.split.fractions[0] * n as f64).round() as usize).clamp(1, n - 1);
        let train = sample.data.subset(&(0..n1).collect::<Vec<_>>());
        let learn = sample.data.subset(&(n1..n).collect::<Vec<_>>());
        for &kind in learners {
            let est = estimator_for(kind, &sample, &opts.nuisance);
            let result = est
                .fit(&train, derive_seed(data_seed, 1))
                .and_then(|src| src.records(&learn))
                .and_then(|recs| multitask_lasso_cv(&recs, RESOURCE_COST, &MultiTaskCv::default(), derive_seed(data_seed, 4)))
                .and_then(|fit| fit.fit.policy())
                .and_then(|pi| true_policy_value(cfg, &pi, ORACLE_DRAWS));
            match result {
                Ok(v) => out.records.push(SimRecord {
                    sim,
                    n,
                    estimator: kind,
                    policy: "multitask".into(),
                    value: v,
                    true_value: best,
                    regret: Some(best - v),
                }),
                Err(e) => out.failures.push(FailureNote { sim, n, estimator: kind, message: e.to_string() }),
            }
        }
        out
    });
    Ok(summarize(*cfg, records, failures, opts.sims, Some(best)))
}
