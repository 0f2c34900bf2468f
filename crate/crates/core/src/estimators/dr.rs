//! The doubly robust moment: per-observation coefficient estimates
//! `θ_DR(y, a, z) = θ̂(z) + Σ̂(z)⁻¹ φ(a, z) (y − ⟨θ̂(z), φ(a, z)⟩)` and policy
//! values built from them.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::nuisance::NuisancePair;
use crate::policy::Policy;

/// Ridge factor (relative to `tr(S)/p`) tried when plain Cholesky fails.
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Largest condition number accepted after ridging.
pub const MAX_CONDITION: f64 = 1e12;

/// Coefficient estimate for one logged row, reusable against any policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrRecord {
    pub theta: Vec<f64>,
    pub context: Vec<f64>,
    pub row: usize,
}

impl DrRecord {
    pub fn new(theta: Vec<f64>, context: Vec<f64>, row: usize) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient estimate at row {row}")));
        }
        Ok(Self { theta, context, row })
    }

    /// Record in the demand convention `θ = (a, −b)`.
    pub fn from_demand(a: f64, b: f64, context: Vec<f64>, row: usize) -> Result<Self> {
        Self::new(vec![a, -b], context, row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub estimate: f64,
    pub contributions: Vec<f64>,
    /// Sample standard deviation of the contributions over `√n`.
    pub std_error: f64,
}

impl ValueEstimate {
    pub fn from_contributions(contributions: Vec<f64>) -> Result<Self> {
        if contributions.is_empty() {
            return Err(Error::invalid("no contributions to average"));
        }
        let n = contributions.len() as f64;
        let estimate = contributions.iter().sum::<f64>() / n;
        let std_error = if contributions.len() > 1 {
            let ss: f64 = contributions.iter().map(|c| (c - estimate).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Ok(Self {
            estimate,
            contributions,
            std_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RevenueModel {
    /// Observed demand `d = a(z) − b(z) p`; value `p (a − b p)`.
    LinearDemand,
    /// Observed revenue `r = a(z) p − b(z) p²`.
    QuadraticRevenue,
}

/// How a coefficient record and a policy action combine into a value.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `⟨θ, φ(π(z), z)⟩`.
    Features(FeatureMap),
    /// Revenue from records in the `θ = (a, −b)` convention.
    Revenue(RevenueModel),
    /// `⟨θ, π(z)⟩ − (cost / 2) ‖π(z)‖²`.
    CostlyAllocation { cost: f64 },
}

impl Objective {
    pub fn contribution(&self, theta: &[f64], z: &[f64], pi: &Policy) -> Result<f64> {
        match self {
            Objective::Features(map) => {
                let phi = map.eval(&pi.apply(z)?, z)?;
                dot_checked(theta, &phi)
            }
            Objective::Revenue(_) => {
                if theta.len() != 2 {
                    return Err(Error::invalid("revenue objective needs 2 coefficients"));
                }
                // Both models reduce to a·p − b·p² with θ = (a, −b).
                let p = pi.apply_scalar(z)?;
                Ok(theta[0] * p + theta[1] * p * p)
            }
            Objective::CostlyAllocation { cost } => {
                let action = pi.apply(z)?;
                let lin = dot_checked(theta, &action)?;
                Ok(lin - 0.5 * cost * action.iter().map(|v| v * v).sum::<f64>())
            }
        }
    }
}

fn dot_checked(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "coefficient/feature inner product",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Value of `pi` under `objective`, averaged over `records`.
pub fn value(records: &[DrRecord], pi: &Policy, objective: &Objective) -> Result<ValueEstimate> {
    let contributions = records
        .iter()
        .map(|r| objective.contribution(&r.theta, &r.context, pi))
        .collect::<Result<Vec<_>>>()?;
    ValueEstimate::from_contributions(contributions)
}

/// Mean of `⟨θ_DR,i, φ(π(z_i), z_i)⟩`.
pub fn value_dr(records: &[DrRecord], pi: &Policy, map: &FeatureMap) -> Result<ValueEstimate> {
    value(records, pi, &Objective::Features(map.clone()))
}

/// Revenue value from `(a_DR, −b_DR)` records.
pub fn value_dr_revenue(records: &[DrRecord], pi: &Policy, which: RevenueModel) -> Result<ValueEstimate> {
    value(records, pi, &Objective::Revenue(which))
}

/// Lower Cholesky factor, or `None` when a pivot is not safely positive.
fn cholesky(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let p = s.nrows();
    let scale = (0..p).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 1e-14 * scale) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..p {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Some(l)
}

fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    // Invert L by forward substitution, then S⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = DMatrix::zeros(p, p);
    for c in 0..p {
        for i in c..p {
            let mut v = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                v -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = v / l[(i, i)];
        }
    }
    let inv = linv.transpose() * &linv;
    (&inv + inv.transpose()) * 0.5
}

/// `S⁻¹` by Cholesky; on failure retries with `S + ridge·tr(S)/p·I` and
/// rejects the result if its condition number exceeds [`MAX_CONDITION`].
pub fn invert_sigma(s: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(Error::invalid("covariance must be a non-empty square matrix"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance {
            row: None,
            detail: "non-finite entries".into(),
        });
    }
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if (s - s.transpose()).iter().any(|v| v.abs() > 1e-10 * scale.max(1.0)) {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    if let Some(l) = cholesky(s) {
        return Ok(inverse_from_cholesky(&l));
    }
    let shift = ridge * s.trace() / p as f64;
    if !(shift > 0.0) {
        return Err(Error::SingularCovariance {
            row: None,
            detail: "not positive definite and no usable ridge".into(),
        });
    }
    let ridged = s + DMatrix::identity(p, p) * shift;
    let l = cholesky(&ridged).ok_or_else(|| Error::SingularCovariance {
        row: None,
        detail: "not positive definite after ridge".into(),
    })?;
    let eig = SymmetricEigen::new(ridged.clone()).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::SingularCovariance {
            row: None,
            detail: format!("condition number {:.3e} after ridge", hi / lo),
        });
    }
    Ok(inverse_from_cholesky(&l))
}

/// `θ̂(z) + Σ̂(z)⁻¹ φ(a, z) (y − ⟨θ̂(z), φ(a, z)⟩)`.
pub fn theta_dr(y: f64, a: &[f64], z: &[f64], map: &FeatureMap, nuis: &NuisancePair) -> Result<Vec<f64>> {
    let theta = nuis.theta.theta(z);
    let phi = map.eval(a, z)?;
    let resid = y - dot_checked(&theta, &phi)?;
    let inv = invert_sigma(&nuis.sigma.sigma(z), DEFAULT_RIDGE)?;
    if inv.nrows() != phi.len() {
        return Err(Error::DimensionMismatch {
            what: "covariance",
            expected: phi.len(),
            got: inv.nrows(),
        });
    }
    let out: Vec<f64> = (0..phi.len())
        .map(|i| theta[i] + resid * (0..phi.len()).map(|j| inv[(i, j)] * phi[j]).sum::<f64>())
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite doubly robust coefficient"));
    }
    Ok(out)
}

/// Apply a fallible per-row builder in parallel, keeping row order and
/// reporting the first failing row together with the failure count.
pub(crate) fn build_rows<F>(n: usize, f: F) -> Result<Vec<DrRecord>>
where
    F: Fn(usize) -> Result<DrRecord> + Sync,
{
    let results: Vec<Result<DrRecord>> = (0..n).into_par_iter().map(|i| f(i).map_err(|e| e.at_row(i))).collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    let mut out = Vec::with_capacity(n);
    for r in results {
        match r {
            Ok(rec) => out.push(rec),
            Err(Error::SingularCovariance { row, detail }) if failures > 1 => {
                return Err(Error::SingularCovariance {
                    row,
                    detail: format!("{detail} ({failures} rows failed)"),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Row-wise [`theta_dr`]; the records do not depend on any policy.
pub fn make_dr_records(data: &LoggedDataset, map: &FeatureMap, nuis: &NuisancePair) -> Result<Vec<DrRecord>> {
    build_rows(data.len(), |i| {
        let z = data.context(i);
        let theta = theta_dr(data.outcome(i), data.action(i), z, map, nuis)?;
        DrRecord::new(theta, z.to_vec(), i)
    })
}
