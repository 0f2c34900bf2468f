//! Multi-task lasso policies `π(z) = A z` for allocation problems with
//! quadratic cost, fitted to the targets `θ_DR / λ` by block coordinate
//! descent on the objective
//! `(1/2n) Σ_i ‖θ_i/λ − A z_i‖² + s Σ_j ‖A_{·j}‖₂`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::DrRecord;
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub kkt_tol: f64,
}

impl Default for MultiTaskOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 100_000,
            kkt_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskFit {
    /// `A`, row-major `action_dim × context_dim`.
    pub coef: Vec<f64>,
    pub action_dim: usize,
    pub context_dim: usize,
    pub penalty: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_gap: f64,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl MultiTaskFit {
    pub fn policy(&self) -> Result<Policy> {
        Policy::multitask(self.action_dim, self.context_dim, self.coef.clone())
    }
}

/// Gram statistics `G = ZᵀZ/n`, `C = ZᵀY/n`, `yy = ‖Y‖²/n` with `Y = Θ/λ`.
#[derive(Debug, Clone)]
struct Stats {
    k: usize,
    d: usize,
    n: usize,
    g: Vec<f64>,
    c: Vec<f64>,
    yy: f64,
}

impl Stats {
    fn raw(records: &[&DrRecord], lambda: f64) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::invalid("no records for multi-task regression"))?;
        let (k, d) = (first.context.len(), first.theta.len());
        if k == 0 || d == 0 {
            return Err(Error::invalid("multi-task regression needs non-empty contexts and coefficients"));
        }
        let mut s = Stats {
            k,
            d,
            n: 0,
            g: vec![0.0; k * k],
            c: vec![0.0; k * d],
            yy: 0.0,
        };
        for r in records {
            if r.context.len() != k || r.theta.len() != d {
                return Err(Error::invalid("ragged multi-task records"));
            }
            for i in 0..k {
                for j in 0..k {
                    s.g[i * k + j] += r.context[i] * r.context[j];
                }
                for t in 0..d {
                    s.c[i * d + t] += r.context[i] * r.theta[t] / lambda;
                }
            }
            s.yy += r.theta.iter().map(|v| (v / lambda).powi(2)).sum::<f64>();
            s.n += 1;
        }
        Ok(s)
    }

    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            k: self.k,
            d: self.d,
            n: self.n - other.n,
            g: self.g.iter().zip(&other.g).map(|(a, b)| a - b).collect(),
            c: self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect(),
            yy: self.yy - other.yy,
        }
    }

    fn normalized(&self) -> Stats {
        let n = self.n as f64;
        Stats {
            k: self.k,
            d: self.d,
            n: self.n,
            g: self.g.iter().map(|v| v / n).collect(),
            c: self.c.iter().map(|v| v / n).collect(),
            yy: self.yy / n,
        }
    }

    /// `C_j − Σ_l G_jl B_l` for the group `j`, with `B` stored `k × d`.
    fn gradient(&self, b: &[f64], j: usize) -> Vec<f64> {
        let (k, d) = (self.k, self.d);
        (0..d)
            .map(|t| self.c[j * d + t] - (0..k).map(|l| self.g[j * k + l] * b[l * d + t]).sum::<f64>())
            .collect()
    }

    fn loss(&self, b: &[f64]) -> f64 {
        let (k, d) = (self.k, self.d);
        let mut quad = 0.0;
        let mut lin = 0.0;
        for t in 0..d {
            for i in 0..k {
                lin += b[i * d + t] * self.c[i * d + t];
                for l in 0..k {
                    quad += b[i * d + t] * self.g[i * k + l] * b[l * d + t];
                }
            }
        }
        0.5 * (self.yy - 2.0 * lin + quad)
    }

    fn objective(&self, b: &[f64], s: f64) -> f64 {
        self.loss(b) + s * group_norms(b, self.k, self.d).iter().sum::<f64>()
    }

    fn lambda_max(&self) -> f64 {
        (0..self.k).map(|j| norm(&self.c[j * self.d..(j + 1) * self.d])).fold(0.0, f64::max)
    }

    fn kkt_gap(&self, b: &[f64], s: f64) -> f64 {
        let d = self.d;
        (0..self.k)
            .map(|j| {
                let g = self.gradient(b, j);
                let bj = &b[j * d..(j + 1) * d];
                let nb = norm(bj);
                if nb == 0.0 {
                    (norm(&g) - s).max(0.0)
                } else {
                    norm(&g.iter().zip(bj).map(|(gt, bt)| gt - s * bt / nb).collect::<Vec<_>>())
                }
            })
            .fold(0.0, f64::max)
    }

    fn solve(&self, s: f64, warm: Option<&[f64]>, opts: &MultiTaskOptions) -> (Vec<f64>, usize, bool, Vec<f64>) {
        let (k, d) = (self.k, self.d);
        let mut b = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; k * d]);
        let mut trace = Vec::new();
        for sweep in 1..=opts.max_sweeps {
            let mut max_change = 0.0f64;
            for j in 0..k {
                let gjj = self.g[j * k + j];
                let old: Vec<f64> = b[j * d..(j + 1) * d].to_vec();
                let new = if gjj <= 0.0 {
                    vec![0.0; d]
                } else {
                    // Partial residual correlation with the group's own term added back.
                    let r: Vec<f64> = self.gradient(&b, j).iter().zip(&old).map(|(g, o)| g + gjj * o).collect();
                    let nr = norm(&r);
                    if nr <= s {
                        vec![0.0; d]
                    } else {
                        r.iter().map(|v| (1.0 - s / nr) * v / gjj).collect()
                    }
                };
                for t in 0..d {
                    max_change = max_change.max((new[t] - old[t]).abs());
                }
                b[j * d..(j + 1) * d].copy_from_slice(&new);
            }
            trace.push(self.objective(&b, s));
            if max_change < opts.tol && self.kkt_gap(&b, s) <= opts.kkt_tol {
                return (b, sweep, true, trace);
            }
        }
        (b, opts.max_sweeps, false, trace)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn group_norms(b: &[f64], k: usize, d: usize) -> Vec<f64> {
    (0..k).map(|j| norm(&b[j * d..(j + 1) * d])).collect()
}

/// `k × d` group layout to row-major `A` (`d × k`).
fn to_policy_coef(b: &[f64], k: usize, d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * k];
    for j in 0..k {
        for t in 0..d {
            a[t * k + j] = b[j * d + t];
        }
    }
    a
}

fn check_cost(lambda_cost: f64) -> Result<()> {
    if !(lambda_cost > 0.0) || !lambda_cost.is_finite() {
        return Err(Error::invalid(format!("cost weight must be positive, got {lambda_cost}")));
    }
    Ok(())
}

/// Smallest group penalty giving `A = 0`.
pub fn multitask_lambda_max(records: &[DrRecord], lambda_cost: f64) -> Result<f64> {
    check_cost(lambda_cost)?;
    let refs: Vec<&DrRecord> = records.iter().collect();
    Ok(Stats::raw(&refs, lambda_cost)?.normalized().lambda_max())
}

fn fit_from_stats(st: &Stats, s: f64, warm: Option<&[f64]>, opts: &MultiTaskOptions) -> (MultiTaskFit, Vec<f64>) {
    let (b, sweeps, converged, trace) = st.solve(s, warm, opts);
    let fit = MultiTaskFit {
        coef: to_policy_coef(&b, st.k, st.d),
        action_dim: st.d,
        context_dim: st.k,
        penalty: s,
        sweeps,
        converged,
        kkt_gap: st.kkt_gap(&b, s),
        objective_trace: trace,
    };
    (fit, b)
}

pub fn multitask_lasso_policy(
    records: &[DrRecord],
    lambda_cost: f64,
    s_penalty: f64,
    opts: &MultiTaskOptions,
) -> Result<MultiTaskFit> {
    check_cost(lambda_cost)?;
    if !(s_penalty >= 0.0) {
        return Err(Error::invalid("group penalty must be non-negative"));
    }
    let refs: Vec<&DrRecord> = records.iter().collect();
    let st = Stats::raw(&refs, lambda_cost)?.normalized();
    Ok(fit_from_stats(&st, s_penalty, None, opts).0)
}

/// `(1/2n) Σ ‖θ_i/λ − A z_i‖² + s Σ_j ‖A_{·j}‖₂` for row-major `A`.
pub fn multitask_objective(records: &[DrRecord], lambda_cost: f64, coef: &[f64], s_penalty: f64) -> Result<f64> {
    check_cost(lambda_cost)?;
    let refs: Vec<&DrRecord> = records.iter().collect();
    let st = Stats::raw(&refs, lambda_cost)?.normalized();
    if coef.len() != st.k * st.d {
        return Err(Error::DimensionMismatch {
            what: "multi-task coefficients",
            expected: st.k * st.d,
            got: coef.len(),
        });
    }
    let mut b = vec![0.0; st.k * st.d];
    for j in 0..st.k {
        for t in 0..st.d {
            b[j * st.d + t] = coef[t * st.k + j];
        }
    }
    Ok(st.objective(&b, s_penalty))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskCv {
    pub folds: usize,
    pub n_penalties: usize,
    pub min_ratio: f64,
    pub options: MultiTaskOptions,
}

impl Default for MultiTaskCv {
    fn default() -> Self {
        Self {
            folds: 5,
            n_penalties: 30,
            min_ratio: 1e-3,
            options: MultiTaskOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskCvFit {
    pub fit: MultiTaskFit,
    /// Descending penalty grid, ending at 0.
    pub penalties: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub selected: usize,
}

/// Penalty chosen by K-fold held-out squared error over a descending grid
/// from the null penalty to `min_ratio` of it, plus the unpenalized fit.
pub fn multitask_lasso_cv(records: &[DrRecord], lambda_cost: f64, cv: &MultiTaskCv, seed: u64) -> Result<MultiTaskCvFit> {
    check_cost(lambda_cost)?;
    let n = records.len();
    if cv.folds < 2 || n < cv.folds || cv.n_penalties == 0 {
        return Err(Error::invalid(format!("cannot run {}-fold CV on {n} records", cv.folds)));
    }
    let refs: Vec<&DrRecord> = records.iter().collect();
    let total = Stats::raw(&refs, lambda_cost)?;
    let smax = total.normalized().lambda_max();
    let mut penalties: Vec<f64> = if cv.n_penalties == 1 || smax == 0.0 {
        vec![smax]
    } else {
        (0..cv.n_penalties)
            .map(|i| smax * cv.min_ratio.powf(i as f64 / (cv.n_penalties - 1) as f64))
            .collect()
    };
    penalties.push(0.0);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % cv.folds;
    }
    let mut cv_error = vec![0.0; penalties.len()];
    for f in 0..cv.folds {
        let held: Vec<&DrRecord> = (0..n).filter(|&i| fold_of[i] == f).map(|i| &records[i]).collect();
        let held_stats = Stats::raw(&held, lambda_cost)?;
        let train = total.minus(&held_stats).normalized();
        let held_norm = held_stats.normalized();
        let mut warm: Option<Vec<f64>> = None;
        for (p, &s) in penalties.iter().enumerate() {
            let (b, ..) = train.solve(s, warm.as_deref(), &cv.options);
            cv_error[p] += 2.0 * held_norm.loss(&b) * held_stats.n as f64 / n as f64;
            warm = Some(b);
        }
    }
    let mut selected = 0;
    for (p, e) in cv_error.iter().enumerate() {
        if *e < cv_error[selected] {
            selected = p;
        }
    }
    let full = total.normalized();
    let mut warm: Option<Vec<f64>> = None;
    let mut fit = None;
    for &s in &penalties[..=selected] {
        let (f, b) = fit_from_stats(&full, s, warm.as_deref(), &cv.options);
        warm = Some(b);
        fit = Some(f);
    }
    Ok(MultiTaskCvFit {
        fit: fit.expect("grid is non-empty"),
        penalties,
        cv_error,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn records(seed: u64, n: usize, k: usize, d: usize) -> Vec<DrRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d * k).map(|_| rng.random_range(-2.0..2.0)).collect();
        (0..n)
            .map(|i| {
                let z: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..2.0)).collect();
                let theta = (0..d)
                    .map(|t| (0..k).map(|j| truth[t * k + j] * z[j]).sum::<f64>() + rng.random_range(-1.0..1.0))
                    .collect();
                DrRecord::new(theta, z, i).unwrap()
            })
            .collect()
    }

    fn policy_value(recs: &[DrRecord], lambda: f64, coef: &[f64], d: usize, k: usize) -> f64 {
        let pi = Policy::multitask(d, k, coef.to_vec()).unwrap();
        recs.iter()
            .map(|r| {
                let a = pi.apply(&r.context).unwrap();
                r.theta.iter().zip(&a).map(|(t, x)| t * x).sum::<f64>() - 0.5 * lambda * a.iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            / recs.len() as f64
    }

    #[test]
    fn null_penalty_gives_zero_policy() {
        let r = records(1, 100, 3, 2);
        let smax = multitask_lambda_max(&r, 1.0).unwrap();
        let fit = multitask_lasso_policy(&r, 1.0, smax, &MultiTaskOptions::default()).unwrap();
        assert!(fit.coef.iter().all(|v| *v == 0.0));
        assert_eq!(fit.policy().unwrap().apply(&[1.0, 1.5, 1.2]).unwrap(), vec![0.0, 0.0]);
        let below = multitask_lasso_policy(&r, 1.0, 0.9 * smax, &MultiTaskOptions::default()).unwrap();
        assert!(below.coef.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let (k, d, lambda) = (3, 2, 2.0);
        let r = records(2, 200, k, d);
        let fit = multitask_lasso_policy(&r, lambda, 0.0, &MultiTaskOptions::default()).unwrap();
        assert!(fit.converged);
        let z = DMatrix::from_fn(r.len(), k, |i, j| r[i].context[j]);
        let y = DMatrix::from_fn(r.len(), d, |i, t| r[i].theta[t] / lambda);
        let ols = (z.transpose() * &z).try_inverse().unwrap() * z.transpose() * y;
        for j in 0..k {
            for t in 0..d {
                assert!((fit.coef[t * k + j] - ols[(j, t)]).abs() < 1e-8, "{} vs {}", fit.coef[t * k + j], ols[(j, t)]);
            }
        }
    }

    #[test]
    fn cost_identity_holds_for_random_coefficients() {
        let (k, d, lambda) = (2, 2, 1.7);
        let r = records(3, 60, k, d);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut constant = None;
        for _ in 0..100 {
            let a: Vec<f64> = (0..d * k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let reg = multitask_objective(&r, lambda, &a, 0.0).unwrap();
            let total = lambda * reg + policy_value(&r, lambda, &a, d, k);
            let c = *constant.get_or_insert(total);
            assert!((total - c).abs() < 1e-9 * c.abs().max(1.0));
        }
    }

    #[test]
    fn sweeps_are_monotone_and_kkt_holds() {
        let r = records(5, 150, 4, 3);
        let smax = multitask_lambda_max(&r, 1.0).unwrap();
        for frac in [0.5, 0.1, 0.01] {
            let fit = multitask_lasso_policy(&r, 1.0, frac * smax, &MultiTaskOptions::default()).unwrap();
            assert!(fit.converged);
            assert!(fit.kkt_gap <= 1e-6);
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn cv_selects_a_grid_point_deterministically() {
        let r = records(6, 120, 2, 2);
        let a = multitask_lasso_cv(&r, 1.0, &MultiTaskCv::default(), 9).unwrap();
        let b = multitask_lasso_cv(&r, 1.0, &MultiTaskCv::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(*a.penalties.last().unwrap(), 0.0);
        assert_eq!(a.fit.penalty, a.penalties[a.selected]);
        let min = a.cv_error.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.cv_error[a.selected], min);
    }
}
