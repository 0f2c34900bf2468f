//! Empirical maximization of the DR value over a candidate set, with exact
//! maximizers for the concave pricing families.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{DrRecord, Objective};
use crate::policy::{Policy, PolicyFamily, PolicySpace};
use crate::rng::derive_seed;

/// Mean and mean square of one candidate's per-row contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub mean: f64,
    pub mean_sq: f64,
}

pub fn score_candidates(records: &[DrRecord], candidates: &[Policy], objective: &Objective) -> Result<Vec<CandidateScore>> {
    if records.is_empty() {
        return Err(Error::invalid("no records to score candidates on"));
    }
    let n = records.len() as f64;
    candidates
        .par_iter()
        .map(|pi| {
            let (mut s, mut s2) = (0.0, 0.0);
            for r in records {
                let v = objective.contribution(&r.theta, &r.context, pi)?;
                s += v;
                s2 += v * v;
            }
            Ok(CandidateScore {
                mean: s / n,
                mean_sq: s2 / n,
            })
        })
        .collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Index of the best feasible candidate; ties go to the lexicographically
/// smallest parameter vector.
pub fn argmax_candidates(values: &[f64], candidates: &[Policy], feasible: Option<&[bool]>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if feasible.is_some_and(|f| !f[i]) || v.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = *v > values[b]
                    || (*v == values[b] && lex_cmp(&candidates[i].params(), &candidates[b].params()) == Ordering::Less);
                Some(if better { i } else { b })
            }
        };
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmResult {
    pub policy: Policy,
    pub value: f64,
    pub index: usize,
}

pub fn erm_over_candidates(records: &[DrRecord], candidates: &[Policy], objective: &Objective) -> Result<ErmResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    let values: Vec<f64> = score_candidates(records, candidates, objective)?.iter().map(|s| s.mean).collect();
    let index = argmax_candidates(&values, candidates, None).ok_or_else(|| Error::invalid("no finite candidate value"))?;
    Ok(ErmResult {
        policy: candidates[index].clone(),
        value: values[index],
        index,
    })
}

fn demand_means(records: &[DrRecord]) -> Result<(f64, f64)> {
    if records.is_empty() || records.iter().any(|r| r.theta.len() != 2) {
        return Err(Error::invalid("pricing records need two coefficients"));
    }
    let n = records.len() as f64;
    let a = records.iter().map(|r| r.theta[0]).sum::<f64>() / n;
    let b = -records.iter().map(|r| r.theta[1]).sum::<f64>() / n;
    Ok((a, b))
}

/// Revenue-maximizing constant price `mean a / (2 mean b)` clipped to the
/// box; the better endpoint when the revenue is not concave.
pub fn optimize_constant_pricing(records: &[DrRecord], space: &PolicySpace) -> Result<Policy> {
    let bounds = space.param_bounds();
    if !matches!(space.family(), PolicyFamily::Constant { action_dim: 1 }) {
        return Err(Error::invalid("constant pricing needs a scalar constant policy space"));
    }
    let (a, b) = demand_means(records)?;
    let (lo, hi) = (bounds.lower()[0], bounds.upper()[0]);
    let gamma = if b > 0.0 {
        let sa: f64 = records.iter().map(|r| r.theta[0]).sum();
        let sb: f64 = records.iter().map(|r| -r.theta[1]).sum();
        (sa / (2.0 * sb)).clamp(lo, hi)
    } else {
        let rev = |g: f64| g * (a - b * g);
        if rev(hi) > rev(lo) {
            hi
        } else {
            lo
        }
    };
    space.make(&[gamma])
}

/// Unconstrained maximizer of `Σ (γᵀz) a − (γᵀz)² b`, i.e. the solution of
/// `2Mγ = v`; `None` when `M` is not positive definite even after ridging.
pub fn solve_linear_pricing(records: &[DrRecord]) -> Result<Option<Vec<f64>>> {
    demand_means(records)?;
    let k = records[0].context.len();
    if k == 0 || records.iter().any(|r| r.context.len() != k) {
        return Err(Error::invalid("linear pricing needs equal-length non-empty contexts"));
    }
    let mut m = DMatrix::<f64>::zeros(k, k);
    let mut v = DVector::<f64>::zeros(k);
    for r in records {
        let (a, b) = (r.theta[0], -r.theta[1]);
        for i in 0..k {
            v[i] += a * r.context[i];
            for j in 0..=i {
                m[(i, j)] += b * r.context[i] * r.context[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    if k == 1 {
        let g = v[0] / (2.0 * m[(0, 0)]);
        return Ok((m[(0, 0)] > 0.0 && g.is_finite()).then(|| vec![g]));
    }
    let chol = m.clone().cholesky().or_else(|| {
        let ridge = 1e-6 * m.trace() / k as f64;
        if ridge > 0.0 {
            (m.clone() + DMatrix::identity(k, k) * ridge).cholesky()
        } else {
            None
        }
    });
    Ok(chol.map(|c| (c.solve(&v) * 0.5).iter().copied().collect()).filter(|g: &Vec<f64>| g.iter().all(|x| x.is_finite())))
}

/// The linear-system maximizer, clipped and re-scored against the space's
/// random candidates.
pub fn optimize_linear_pricing(records: &[DrRecord], space: &PolicySpace, seed: u64) -> Result<Policy> {
    if !matches!(space.family(), PolicyFamily::Linear { .. }) {
        return Err(Error::invalid("linear pricing needs a linear policy space"));
    }
    let mut candidates = space.candidates(seed)?;
    if let Some(g) = solve_linear_pricing(records)? {
        candidates.push(space.make(&g)?);
    }
    Ok(erm_over_candidates(records, &candidates, &Objective::Revenue(crate::estimators::RevenueModel::LinearDemand))?.policy)
}

/// Exact maximizers available for `(space, objective)` on these records.
pub fn closed_form_candidates(records: &[DrRecord], space: &PolicySpace, objective: &Objective) -> Result<Vec<Policy>> {
    if !matches!(objective, Objective::Revenue(_)) {
        return Ok(Vec::new());
    }
    match space.family() {
        PolicyFamily::Constant { action_dim: 1 } => Ok(vec![optimize_constant_pricing(records, space)?]),
        PolicyFamily::Linear { .. } => match solve_linear_pricing(records)? {
            Some(g) => Ok(vec![space.make(&g)?]),
            None => Ok(Vec::new()),
        },
        _ => Ok(Vec::new()),
    }
}

/// Closed-form maximizers on `records` followed by perturbations around each.
pub fn refined_candidates(records: &[DrRecord], space: &PolicySpace, objective: &Objective, seed: u64) -> Result<Vec<Policy>> {
    let mut out = Vec::new();
    for (i, pi) in closed_form_candidates(records, space, objective)?.into_iter().enumerate() {
        out.extend(space.perturbations(&pi.params(), derive_seed(seed, 1 + i as u64))?);
        out.push(pi);
    }
    Ok(out)
}

/// The space's base candidates plus [`refined_candidates`].
pub fn build_candidates(records: &[DrRecord], space: &PolicySpace, objective: &Objective, seed: u64) -> Result<Vec<Policy>> {
    if matches!(space.family(), PolicyFamily::MultiTask { .. }) {
        return Err(Error::invalid("multi-task spaces are learned by multi-task regression"));
    }
    let mut candidates = space.candidates(derive_seed(seed, 0))?;
    candidates.extend(refined_candidates(records, space, objective, seed)?);
    Ok(candidates)
}

/// Plain ERM over the space's candidate set.
pub fn erm(records: &[DrRecord], space: &PolicySpace, objective: &Objective, seed: u64) -> Result<ErmResult> {
    let candidates = build_candidates(records, space, objective, seed)?;
    erm_over_candidates(records, &candidates, objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{value_dr_revenue, RevenueModel};
    use crate::policy::{Bounds, CandidateRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const REV: Objective = Objective::Revenue(RevenueModel::LinearDemand);

    fn recs(ab: &[(f64, f64)], z: &[Vec<f64>]) -> Vec<DrRecord> {
        ab.iter()
            .zip(z)
            .enumerate()
            .map(|(i, (&(a, b), z))| DrRecord::from_demand(a, b, z.clone(), i).unwrap())
            .collect()
    }

    fn constant_space(lo: f64, hi: f64) -> PolicySpace {
        PolicySpace::new(
            PolicyFamily::Constant { action_dim: 1 },
            Bounds::uniform(1, lo, hi).unwrap(),
            None,
            CandidateRule::Grid { points: 5 },
        )
        .unwrap()
    }

    #[test]
    fn two_candidate_erm() {
        let r = recs(&[(5.0, 1.0)], &[vec![1.0]]);
        let cands = vec![Policy::constant(1.0), Policy::constant(2.0)];
        let out = erm_over_candidates(&r, &cands, &REV).unwrap();
        assert_eq!(out.policy, Policy::constant(2.0));
        assert_eq!(out.value, 6.0);
        let single = erm_over_candidates(&r, &cands[..1], &REV).unwrap();
        assert_eq!(single.policy, Policy::constant(1.0));
        assert!(erm_over_candidates(&r, &[], &REV).is_err());
    }

    #[test]
    fn ties_prefer_smaller_parameters() {
        // γ(4 − γ) is symmetric about 2.
        let r = recs(&[(4.0, 1.0)], &[vec![1.0]]);
        let cands = vec![Policy::constant(3.0), Policy::constant(1.0)];
        assert_eq!(erm_over_candidates(&r, &cands, &REV).unwrap().policy, Policy::constant(1.0));
    }

    fn grid_best(r: &[DrRecord], lo: f64, hi: f64) -> (f64, f64) {
        let steps = ((hi - lo) / 1e-4).round() as usize;
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..=steps {
            let g = lo + i as f64 * 1e-4;
            let v = value_dr_revenue(r, &Policy::constant(g), RevenueModel::LinearDemand).unwrap().estimate;
            if v > best.0 {
                best = (v, g);
            }
        }
        best
    }

    #[test]
    fn constant_pricing_vertex() {
        let z = vec![vec![1.0]; 2];
        let r = recs(&[(4.0, 0.5), (6.0, 1.5)], &z);
        let pi = optimize_constant_pricing(&r, &constant_space(0.1, 5.0)).unwrap();
        assert!((pi.params()[0] - 2.5).abs() < 1e-12);
        let (gv, gg) = grid_best(&r, 0.1, 5.0);
        assert!((gg - 2.5).abs() < 1e-3);
        let v = value_dr_revenue(&r, &pi, RevenueModel::LinearDemand).unwrap().estimate;
        assert!((v - gv).abs() <= 1e-6);
        let r = recs(&[(4.0, 2.0)], &z[..1]);
        assert!((optimize_constant_pricing(&r, &constant_space(0.1, 5.0)).unwrap().params()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_pricing_non_concave_takes_endpoint() {
        let r = recs(&[(1.0, -0.1)], &[vec![1.0]]);
        let pi = optimize_constant_pricing(&r, &constant_space(0.5, 3.0)).unwrap();
        assert_eq!(pi.params(), vec![3.0]);
        let r = recs(&[(-5.0, -0.1)], &[vec![1.0]]);
        let pi = optimize_constant_pricing(&r, &constant_space(0.5, 3.0)).unwrap();
        assert_eq!(pi.params(), vec![0.5]);
    }

    #[test]
    fn constant_pricing_matches_grid_on_random_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let ab: Vec<(f64, f64)> = (0..30).map(|_| (rng.random_range(0.0..8.0), rng.random_range(-0.5..2.0))).collect();
            let r = recs(&ab, &vec![vec![1.0]; 30]);
            let pi = optimize_constant_pricing(&r, &constant_space(0.5, 3.0)).unwrap();
            let v = value_dr_revenue(&r, &pi, RevenueModel::LinearDemand).unwrap().estimate;
            assert!((v - grid_best(&r, 0.5, 3.0).0).abs() <= 1e-6);
        }
    }

    #[test]
    fn linear_pricing_one_dimensional_reduction() {
        let z = vec![vec![1.0]; 2];
        let r = recs(&[(4.0, 0.5), (6.0, 1.5)], &z);
        let lin = optimize_linear_pricing(&r, &PolicySpace::pricing_linear(1), 3).unwrap();
        let con = optimize_constant_pricing(&r, &PolicySpace::pricing_constant()).unwrap();
        assert_eq!(lin.params(), con.params());
    }

    #[test]
    fn linear_pricing_matches_fine_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(1.0..2.0), rng.random_range(1.0..2.0)]).collect();
        let ab: Vec<(f64, f64)> = (0..40).map(|_| (rng.random_range(3.0..6.0), rng.random_range(0.5..1.5))).collect();
        let r = recs(&ab, &z);
        let space = PolicySpace::new(
            PolicyFamily::Linear { context_dim: 2 },
            Bounds::uniform(2, -1.0, 3.0).unwrap(),
            None,
            CandidateRule::Random {
                count: 50,
                perturbations: 0,
                scale: 0.1,
            },
        )
        .unwrap();
        let pi = optimize_linear_pricing(&r, &space, 1).unwrap();
        let val = |p: &Policy| value_dr_revenue(&r, p, RevenueModel::LinearDemand).unwrap().estimate;
        let got = val(&pi);
        let g = pi.params();
        // Coarse grid, then a 1e-3 grid around the best coarse cell.
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (g1, g2) = (-1.0 + i as f64 * 0.01, -1.0 + j as f64 * 0.01);
                let v = val(&Policy::linear(vec![g1, g2]).unwrap());
                if v > best.0 {
                    best = (v, g1, g2);
                }
            }
        }
        let mut fine = best.0;
        for i in -20..=20 {
            for j in -20..=20 {
                let p = Policy::linear(vec![best.1 + i as f64 * 1e-3, best.2 + j as f64 * 1e-3]).unwrap();
                fine = fine.max(val(&p));
            }
        }
        assert!(got >= fine - 1e-6, "{got} vs {fine} at {g:?}");
        for c in space.candidates(1).unwrap() {
            assert!(got >= val(&c));
        }
    }

    #[test]
    fn erm_beats_every_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(1.0..2.0), rng.random_range(1.0..2.0)]).collect();
        let ab: Vec<(f64, f64)> = (0..50).map(|_| (rng.random_range(0.0..8.0), rng.random_range(0.0..2.0))).collect();
        let r = recs(&ab, &z);
        for space in [PolicySpace::pricing_constant(), PolicySpace::pricing_linear(2)] {
            let out = erm(&r, &space, &REV, 5).unwrap();
            let cands = build_candidates(&r, &space, &REV, 5).unwrap();
            for s in score_candidates(&r, &cands, &REV).unwrap() {
                assert!(out.value >= s.mean);
            }
        }
    }
}
