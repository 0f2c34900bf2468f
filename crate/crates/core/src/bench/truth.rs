//! Ground-truth policy values by quadrature over the law of `z̄`, with a
//! fixed-seed Monte-Carlo fallback when no closed form applies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dgp::{dgp_coefficients, Application, DgpConfig, Form, Regime};
use crate::error::{Error, Result};
use crate::policy::{context_summary, Policy, PolicyKind};

/// Seed of the Monte-Carlo fallback sample.
pub const ORACLE_SEED: u64 = 0x5eed_0f_0ac1e;
/// Default fallback sample size.
pub const ORACLE_DRAWS: usize = 1_000_000;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const NODES: usize = 24;
const SUBPANELS: usize = 8;

/// `∫ f` over `[lo, hi]` split at `breaks`, each piece further subdivided.
fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    let (x, w) = gauss_legendre(NODES);
    let mut pts: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().copied().filter(|b| *b > lo && *b < hi))
        .chain(std::iter::once(hi))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for seg in pts.windows(2) {
        let h = (seg[1] - seg[0]) / SUBPANELS as f64;
        for s in 0..SUBPANELS {
            let (a, b) = (seg[0] + s as f64 * h, seg[0] + (s + 1) as f64 * h);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            total += half * x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>();
        }
    }
    total
}

/// Density of `z̄`, the mean of `l ∈ {1, 3}` uniforms on `[1, 2]`.
fn zbar_density(l: usize, x: f64) -> f64 {
    if !(1.0..=2.0).contains(&x) {
        return 0.0;
    }
    match l {
        1 => 1.0,
        3 => {
            let s = 3.0 * (x - 1.0);
            let f = if s < 1.0 {
                0.5 * s * s
            } else if s < 2.0 {
                0.5 * (-2.0 * s * s + 6.0 * s - 3.0)
            } else {
                0.5 * (3.0 - s) * (3.0 - s)
            };
            3.0 * f
        }
        _ => unreachable!("regimes use l = 1 or l = 3"),
    }
}

fn zbar_breaks(l: usize, extra: &[f64]) -> Vec<f64> {
    let mut b = vec![1.5];
    if l == 3 {
        b.extend([4.0 / 3.0, 5.0 / 3.0]);
    }
    b.extend_from_slice(extra);
    b
}

/// `E[f(z̄)]`; `extra` lists additional discontinuities of `f`.
pub fn expect_zbar<F: Fn(f64) -> f64>(regime: Regime, f: F, extra: &[f64]) -> f64 {
    let l = regime.active();
    integrate(|x| zbar_density(l, x) * f(x), 1.0, 2.0, &zbar_breaks(l, extra))
}

/// `E[g(z₁, z̄)]` for an active coordinate `z₁`.
fn expect_active<F: Fn(f64, f64) -> f64>(regime: Regime, g: F) -> f64 {
    match regime.active() {
        1 => expect_zbar(regime, |x| g(x, x), &[]),
        3 => {
            // w = (z₂ + z₃)/2 has a triangular density; z̄ = (z₁ + 2w)/3.
            let tri = |w: f64| if w < 1.5 { 4.0 * (w - 1.0) } else { 4.0 * (2.0 - w) };
            integrate(
                |w| {
                    let cut = 4.5 - 2.0 * w;
                    tri(w) * integrate(|z1| g(z1, (z1 + 2.0 * w) / 3.0), 1.0, 2.0, &[cut])
                },
                1.0,
                2.0,
                &[1.25, 1.5, 1.75],
            )
        }
        _ => unreachable!("regimes use l = 1 or l = 3"),
    }
}

/// `u_i = E[z_i f(z̄)]` and `M_ij = E[z_i z_j h(z̄)]` over `U(1,2)^k`.
pub fn linear_moments<F, H>(regime: Regime, f: F, h: H) -> (DVector<f64>, DMatrix<f64>)
where
    F: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let (k, l) = (regime.context_dim(), regime.active());
    let ef = expect_zbar(regime, &f, &[]);
    let eh = expect_zbar(regime, &h, &[]);
    let zf = expect_zbar(regime, |x| x * f(x), &[]);
    let zh = expect_zbar(regime, |x| x * h(x), &[]);
    let z2h = expect_zbar(regime, |x| x * x * h(x), &[]);
    let z1sq_h = expect_active(regime, |z1, x| z1 * z1 * h(x));
    let lf = l as f64;
    let cross_h = if l > 1 { (lf * lf * z2h - lf * z1sq_h) / (lf * (lf - 1.0)) } else { 0.0 };
    let u = DVector::from_fn(k, |i, _| if i < l { zf } else { 1.5 * ef });
    let m = DMatrix::from_fn(k, k, |i, j| match (i < l, j < l) {
        (true, true) if i == j => z1sq_h,
        (true, true) => cross_h,
        (true, false) | (false, true) => 1.5 * zh,
        (false, false) if i == j => 7.0 / 3.0 * eh,
        (false, false) => 2.25 * eh,
    });
    (u, m)
}

/// Whether a linear rule `γᵀz` stays inside `policy`'s output box on `[1,2]^k`.
fn linear_unclipped(policy: &Policy, coef: &[f64]) -> bool {
    match policy.output_bounds() {
        None => true,
        Some(b) => {
            let lo: f64 = coef.iter().map(|g| g.min(2.0 * g)).sum();
            let hi: f64 = coef.iter().map(|g| g.max(2.0 * g)).sum();
            lo >= b.lower()[0] && hi <= b.upper()[0]
        }
    }
}

fn pricing_value_of_price(form: Form, x: f64, p: f64) -> f64 {
    let (a, b) = dgp_coefficients(form, x);
    a * p - b * p * p
}

/// Whether [`true_policy_value`] evaluates `pi` without Monte-Carlo.
pub fn has_closed_form(cfg: &DgpConfig, pi: &Policy) -> bool {
    let (k, l) = (cfg.regime.context_dim(), cfg.regime.active());
    match (cfg.application, pi.kind()) {
        (Application::ResourceAllocation, PolicyKind::MultiTask { context_dim, action_dim, .. }) => {
            pi.output_bounds().is_none() && *context_dim == k && *action_dim == 2
        }
        (Application::ResourceAllocation, _) => false,
        (_, PolicyKind::Constant(_)) => true,
        (_, PolicyKind::Threshold { active, .. }) | (_, PolicyKind::Sin { active }) => *active == l,
        (_, PolicyKind::Linear(coef)) => coef.len() == k && linear_unclipped(pi, coef),
        _ => false,
    }
}

/// Revenue `E[a π − b π²]` for pricing, or `E[⟨θ, π⟩ − (λ/2)‖π‖²]` for allocation.
pub fn true_policy_value(cfg: &DgpConfig, pi: &Policy, mc_draws: usize) -> Result<f64> {
    let (k, l) = (cfg.regime.context_dim(), cfg.regime.active());
    let form = cfg.form;
    let fixed_z = vec![1.0; k];
    match (cfg.application, pi.kind()) {
        (Application::ResourceAllocation, PolicyKind::MultiTask { coef, context_dim, action_dim })
            if pi.output_bounds().is_none() && *context_dim == k && *action_dim == 2 =>
        {
            let a = DMatrix::from_row_slice(2, k, coef);
            let (czt, czz) = resource_moments(cfg.regime, form);
            Ok((a.clone() * czt).trace() - 0.5 * super::dgp::RESOURCE_COST * (a.clone() * czz * a.transpose()).trace())
        }
        (Application::ResourceAllocation, _) => monte_carlo_value(cfg, pi, mc_draws, ORACLE_SEED),
        (_, PolicyKind::Constant(_)) => {
            let p = pi.apply(&fixed_z)?[0];
            Ok(expect_zbar(cfg.regime, |x| pricing_value_of_price(form, x, p), &[]))
        }
        (_, PolicyKind::Threshold { cut, active, .. }) if *active == l => {
            Ok(expect_zbar(
                cfg.regime,
                |x| pricing_value_of_price(form, x, pi.apply_scalar(&vec![x; k]).expect("policy accepts the context")),
                &[*cut],
            ))
        }
        (_, PolicyKind::Sin { active }) if *active == l => {
            Ok(expect_zbar(
                cfg.regime,
                |x| pricing_value_of_price(form, x, pi.apply_scalar(&vec![x; k]).expect("policy accepts the context")),
                &[],
            ))
        }
        (_, PolicyKind::Linear(coef)) if coef.len() == k && linear_unclipped(pi, coef) => {
            let (u, m) = linear_moments(cfg.regime, |x| dgp_coefficients(form, x).0, |x| dgp_coefficients(form, x).1);
            let g = DVector::from_column_slice(coef);
            Ok(g.dot(&u) - (g.transpose() * m * &g)[(0, 0)])
        }
        _ => monte_carlo_value(cfg, pi, mc_draws, ORACLE_SEED),
    }
}

/// `E[z θᵀ]` (`k × 2`) and `E[z zᵀ]` for the allocation problem.
pub fn resource_moments(regime: Regime, form: Form) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = regime.context_dim();
    let (ua, _) = linear_moments(regime, |x| dgp_coefficients(form, x).0, |_| 1.0);
    let (ub, czz) = linear_moments(regime, |x| dgp_coefficients(form, x).1, |_| 1.0);
    let czt = DMatrix::from_fn(k, 2, |i, t| if t == 0 { ua[i] } else { ub[i] });
    (czt, czz)
}

/// Best linear allocation `A* = E[θzᵀ] E[zzᵀ]⁻¹ / λ` and its value.
pub fn resource_best_in_class(regime: Regime, form: Form) -> Result<(Policy, f64)> {
    let k = regime.context_dim();
    let (czt, czz) = resource_moments(regime, form);
    let inv = czz
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularCovariance { row: None, detail: "context second moments".into() })?;
    let a = czt.transpose() * inv / super::dgp::RESOURCE_COST;
    let value = 0.5 * (a.clone() * &czt).trace();
    let coef: Vec<f64> = (0..2).flat_map(|t| (0..k).map(move |j| (t, j))).map(|(t, j)| a[(t, j)]).collect();
    Ok((Policy::multitask(2, k, coef)?, value))
}

/// Monte-Carlo value over `draws` fresh contexts from `seed`.
pub fn monte_carlo_value(cfg: &DgpConfig, pi: &Policy, draws: usize, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::invalid("Monte-Carlo oracle needs at least one draw"));
    }
    let (k, l) = (cfg.regime.context_dim(), cfg.regime.active());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; k];
    let mut total = 0.0;
    for _ in 0..draws {
        for v in z.iter_mut() {
            *v = rng.random_range(1.0..2.0);
        }
        let x = context_summary(&z, l)?;
        let (a, b) = dgp_coefficients(cfg.form, x);
        total += match cfg.application {
            Application::ResourceAllocation => {
                let act = pi.apply(&z)?;
                a * act[0] + b * act[1] - 0.5 * super::dgp::RESOURCE_COST * (act[0] * act[0] + act[1] * act[1])
            }
            _ => {
                let p = pi.apply_scalar(&z)?;
                a * p - b * p * p
            }
        };
    }
    Ok(total / draws as f64)
}

/// Best policy of a pricing space and its value: the vertex of the concave
/// quadratic in the parameters, clipped to the box.
pub fn pricing_best_in_class(cfg: &DgpConfig, space: &crate::policy::PolicySpace) -> Result<(Policy, f64)> {
    use crate::policy::PolicyFamily;
    let form = cfg.form;
    match space.family() {
        PolicyFamily::Constant { action_dim: 1 } => {
            let ea = expect_zbar(cfg.regime, |x| dgp_coefficients(form, x).0, &[]);
            let eb = expect_zbar(cfg.regime, |x| dgp_coefficients(form, x).1, &[]);
            let pi = space.make(&[ea / (2.0 * eb)])?;
            let v = true_policy_value(cfg, &pi, ORACLE_DRAWS)?;
            Ok((pi, v))
        }
        PolicyFamily::Linear { .. } => {
            let (u, m) = linear_moments(cfg.regime, |x| dgp_coefficients(form, x).0, |x| dgp_coefficients(form, x).1);
            let g = m.cholesky().ok_or_else(|| Error::invalid("non-concave linear pricing objective"))?.solve(&u) * 0.5;
            let pi = space.make(g.as_slice())?;
            let v = true_policy_value(cfg, &pi, ORACLE_DRAWS)?;
            Ok((pi, v))
        }
        _ => Err(Error::invalid("pricing best-in-class needs a constant or linear space")),
    }
}
