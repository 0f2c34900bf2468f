//! Out-of-sample regularized ERM: a validation-split ERM fixes a reference
//! policy, and the training-split ERM may only pick policies whose
//! validation value is within `μ_n` of it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::erm::{argmax_candidates, build_candidates, erm_over_candidates, refined_candidates, score_candidates};
use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::estimators::{DrRecord, Objective, RecordMaker};
use crate::policy::{Policy, PolicySpace};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Nuisance, validation and training fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: [0.5, 0.25, 0.25],
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn new(fractions: [f64; 3], seed: u64) -> Result<Self> {
        if fractions.iter().any(|f| !(*f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must be positive and sum to 1, got {fractions:?}")));
        }
        Ok(Self { fractions, seed })
    }

    /// Sorted row indices of the three parts.
    pub fn assign(&self, n: usize) -> Result<[Vec<usize>; 3]> {
        let n1 = (self.fractions[0] * n as f64).round() as usize;
        let nv = (self.fractions[1] * n as f64).round() as usize;
        if n1 == 0 || nv == 0 || n1 + nv >= n {
            return Err(Error::invalid(format!("{n} rows cannot fill three non-empty splits")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut parts = [idx[..n1].to_vec(), idx[n1..n1 + nv].to_vec(), idx[n1 + nv..].to_vec()];
        for p in &mut parts {
            p.sort_unstable();
        }
        Ok(parts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuRule {
    pub c: f64,
    pub delta: f64,
}

impl Default for MuRule {
    fn default() -> Self {
        Self { c: 2.0, delta: 0.1 }
    }
}

impl MuRule {
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("need c > 0 and 0 < delta < 1, got c={c}, delta={delta}")));
        }
        Ok(Self { c, delta })
    }

    /// Vacuous constraint: the training ERM sees every candidate.
    pub fn unconstrained() -> Self {
        Self {
            c: f64::INFINITY,
            delta: 0.1,
        }
    }
}

/// `c · r̂ · √(ln(1/δ) / n_validation)`.
pub fn mu_n(r_hat: f64, n_validation: usize, rule: MuRule) -> Result<f64> {
    if n_validation == 0 {
        return Err(Error::invalid("validation split is empty"));
    }
    if rule.c.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(rule.c * r_hat * ((1.0 / rule.delta).ln() / n_validation as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedErm {
    pub policy: Policy,
    /// Validation-split ERM solution.
    pub reference: Policy,
    pub mu: f64,
    pub r_hat: f64,
    pub candidates: Vec<Policy>,
    pub feasible: Vec<bool>,
    /// Validation value of the reference minus that of the returned policy.
    pub validation_gap: f64,
    pub training_value: f64,
}

/// Steps 3 to 5 on prepared validation and training records.
pub fn regularized_erm_on_records(
    validation: &[DrRecord],
    training: &[DrRecord],
    space: &PolicySpace,
    objective: &Objective,
    mu: MuRule,
    seed: u64,
) -> Result<RegularizedErm> {
    let mut candidates = build_candidates(validation, space, objective, derive_seed(seed, 10))?;
    candidates.extend(refined_candidates(training, space, objective, derive_seed(seed, 11))?);
    let reference = erm_over_candidates(validation, &candidates, objective)?;
    candidates.extend(space.perturbations(&reference.policy.params(), derive_seed(seed, 12))?);
    regularized_erm_with_candidates(validation, training, candidates, reference.policy, objective, mu)
}

/// Steps 4 and 5 for an explicit candidate set containing `reference`.
pub fn regularized_erm_with_candidates(
    validation: &[DrRecord],
    training: &[DrRecord],
    candidates: Vec<Policy>,
    reference: Policy,
    objective: &Objective,
    mu: MuRule,
) -> Result<RegularizedErm> {
    let mut candidates = candidates;
    let ref_idx = match candidates.iter().position(|c| *c == reference) {
        Some(i) => i,
        None => {
            candidates.push(reference.clone());
            candidates.len() - 1
        }
    };
    let val = score_candidates(validation, &candidates, objective)?;
    let r_hat = val.iter().map(|s| s.mean_sq.sqrt()).fold(0.0, f64::max);
    let mu_value = mu_n(r_hat, validation.len(), mu)?;
    let ref_value = val[ref_idx].mean;
    let feasible: Vec<bool> = val.iter().map(|s| ref_value - s.mean <= mu_value).collect();
    let train: Vec<f64> = score_candidates(training, &candidates, objective)?.iter().map(|s| s.mean).collect();
    let best = argmax_candidates(&train, &candidates, Some(&feasible)).ok_or_else(|| Error::invalid("no feasible candidate"))?;
    Ok(RegularizedErm {
        policy: candidates[best].clone(),
        reference,
        mu: mu_value,
        r_hat,
        validation_gap: ref_value - val[best].mean,
        training_value: train[best],
        candidates,
        feasible,
    })
}

/// The full learner: split, fit nuisances on the first part, build records
/// on the other two with those nuisances, then constrained ERM.
pub fn regularized_erm(
    data: &LoggedDataset,
    maker: &dyn RecordMaker,
    space: &PolicySpace,
    objective: &Objective,
    split: SplitConfig,
    mu: MuRule,
    seed: u64,
) -> Result<RegularizedErm> {
    let [s1, sv, st] = split.assign(data.len())?;
    let source = maker.fit(&data.subset(&s1), derive_seed(seed, 20))?;
    let validation = source.records(&data.subset(&sv))?;
    let training = source.records(&data.subset(&st))?;
    regularized_erm_on_records(&validation, &training, space, objective, mu, seed)
}
