//! Deterministic policies `z → a` and the parametric spaces they are drawn from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-coordinate box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("bound vectors differ in length"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::invalid("bounds must be finite with lower <= upper"));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval for each of `dim` coordinates.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn clip(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, lo), hi)| lo <= v && v <= hi)
    }
}

/// Mean of the first `active` context coordinates.
pub fn context_summary(z: &[f64], active: usize) -> Result<f64> {
    if active == 0 || z.len() < active {
        return Err(Error::DimensionMismatch {
            what: "context (summary coordinates)",
            expected: active.max(1),
            got: z.len(),
        });
    }
    Ok(z[..active].iter().sum::<f64>() / active as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// `π(z) = γ`.
    Constant(Vec<f64>),
    /// Scalar action `π(z) = γᵀz`.
    Linear(Vec<f64>),
    /// `π(z) = base + jump·1{z̄ > cut}`.
    Threshold {
        base: f64,
        jump: f64,
        cut: f64,
        active: usize,
    },
    /// `π(z) = sin(z̄)`.
    Sin { active: usize },
    /// `π(z) = A z`, `A` stored row-major as `action_dim × context_dim`.
    MultiTask {
        action_dim: usize,
        context_dim: usize,
        coef: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    kind: PolicyKind,
    output_bounds: Option<Bounds>,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Result<Self> {
        let p = Self {
            kind,
            output_bounds: None,
        };
        if p.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("policy parameters must be finite"));
        }
        if let PolicyKind::MultiTask {
            action_dim,
            context_dim,
            coef,
        } = &p.kind
        {
            if coef.len() != action_dim * context_dim || *action_dim == 0 {
                return Err(Error::invalid("multi-task coefficient shape mismatch"));
            }
        }
        if let PolicyKind::Constant(v) = &p.kind {
            if v.is_empty() {
                return Err(Error::invalid("constant policy needs at least one coordinate"));
            }
        }
        Ok(p)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PolicyKind::Constant(vec![value])).expect("finite constant")
    }

    pub fn linear(coef: Vec<f64>) -> Result<Self> {
        Self::new(PolicyKind::Linear(coef))
    }

    /// `π(z) = z̄`, the mean of the first `active` of `context_dim` coordinates.
    pub fn summary_linear(active: usize, context_dim: usize) -> Result<Self> {
        if active == 0 || active > context_dim {
            return Err(Error::invalid("need 1 <= active <= context_dim"));
        }
        let mut coef = vec![0.0; context_dim];
        coef[..active].fill(1.0 / active as f64);
        Self::linear(coef)
    }

    pub fn threshold(base: f64, jump: f64, cut: f64, active: usize) -> Result<Self> {
        Self::new(PolicyKind::Threshold {
            base,
            jump,
            cut,
            active,
        })
    }

    pub fn sin(active: usize) -> Self {
        Self::new(PolicyKind::Sin { active }).expect("no parameters")
    }

    pub fn multitask(action_dim: usize, context_dim: usize, coef: Vec<f64>) -> Result<Self> {
        Self::new(PolicyKind::MultiTask {
            action_dim,
            context_dim,
            coef,
        })
    }

    pub fn with_output_bounds(mut self, bounds: Bounds) -> Result<Self> {
        if bounds.dim() != self.action_dim() {
            return Err(Error::DimensionMismatch {
                what: "output bounds",
                expected: self.action_dim(),
                got: bounds.dim(),
            });
        }
        self.output_bounds = Some(bounds);
        Ok(self)
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn output_bounds(&self) -> Option<&Bounds> {
        self.output_bounds.as_ref()
    }

    pub fn action_dim(&self) -> usize {
        match &self.kind {
            PolicyKind::Constant(v) => v.len(),
            PolicyKind::MultiTask { action_dim, .. } => *action_dim,
            _ => 1,
        }
    }

    /// Parameter vector used for tie-breaking and candidate perturbation.
    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            PolicyKind::Constant(v) | PolicyKind::Linear(v) => v.clone(),
            PolicyKind::Threshold { base, jump, cut, .. } => vec![*base, *jump, *cut],
            PolicyKind::Sin { .. } => Vec::new(),
            PolicyKind::MultiTask { coef, .. } => coef.clone(),
        }
    }

    /// Unclipped output.
    pub fn raw_action(&self, z: &[f64]) -> Result<Vec<f64>> {
        let out = match &self.kind {
            PolicyKind::Constant(v) => v.clone(),
            PolicyKind::Linear(coef) => {
                if coef.len() != z.len() {
                    return Err(Error::DimensionMismatch {
                        what: "context",
                        expected: coef.len(),
                        got: z.len(),
                    });
                }
                vec![coef.iter().zip(z).map(|(g, x)| g * x).sum()]
            }
            PolicyKind::Threshold {
                base,
                jump,
                cut,
                active,
            } => {
                let s = context_summary(z, *active)?;
                vec![if s > *cut { base + jump } else { *base }]
            }
            PolicyKind::Sin { active } => vec![context_summary(z, *active)?.sin()],
            PolicyKind::MultiTask {
                action_dim,
                context_dim,
                coef,
            } => {
                if z.len() != *context_dim {
                    return Err(Error::DimensionMismatch {
                        what: "context",
                        expected: *context_dim,
                        got: z.len(),
                    });
                }
                (0..*action_dim)
                    .map(|r| {
                        coef[r * context_dim..(r + 1) * context_dim]
                            .iter()
                            .zip(z)
                            .map(|(c, x)| c * x)
                            .sum()
                    })
                    .collect()
            }
        };
        Ok(out)
    }

    /// Scalar-action fast path of [`Policy::apply`].
    pub fn apply_scalar(&self, z: &[f64]) -> Result<f64> {
        let raw = match &self.kind {
            PolicyKind::Constant(v) if v.len() == 1 => v[0],
            PolicyKind::Linear(coef) => {
                if coef.len() != z.len() {
                    return Err(Error::DimensionMismatch {
                        what: "context",
                        expected: coef.len(),
                        got: z.len(),
                    });
                }
                coef.iter().zip(z).map(|(g, x)| g * x).sum()
            }
            PolicyKind::Threshold {
                base,
                jump,
                cut,
                active,
            } => {
                if context_summary(z, *active)? > *cut {
                    base + jump
                } else {
                    *base
                }
            }
            PolicyKind::Sin { active } => context_summary(z, *active)?.sin(),
            _ => {
                return Err(Error::DimensionMismatch {
                    what: "scalar policy output",
                    expected: 1,
                    got: self.action_dim(),
                })
            }
        };
        Ok(match &self.output_bounds {
            Some(b) => raw.clamp(b.lower()[0], b.upper()[0]),
            None => raw,
        })
    }

    /// `π(z)`, clipped to the output box when one is set.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.raw_action(z)?;
        if let Some(b) = &self.output_bounds {
            b.clip(&mut a);
        }
        Ok(a)
    }
}

pub fn apply_policy(pi: &Policy, z: &[f64]) -> Result<Vec<f64>> {
    pi.apply(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyFamily {
    /// Constant actions of the given dimension.
    Constant { action_dim: usize },
    /// Scalar `γᵀz`.
    Linear { context_dim: usize },
    /// `A z`; learned by multi-task regression rather than candidate search.
    MultiTask { action_dim: usize, context_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CandidateRule {
    /// Tensor grid with `points` values per parameter coordinate.
    Grid { points: usize },
    /// `count` uniform draws from the parameter box, plus `perturbations`
    /// Gaussian moves of scale `scale · width` around each optimizer centre.
    Random {
        count: usize,
        perturbations: usize,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpace {
    family: PolicyFamily,
    params: Bounds,
    output: Option<Bounds>,
    rule: CandidateRule,
}

/// Output box for pricing policies.
pub const PRICE_BOUNDS: (f64, f64) = (0.1, 5.0);

impl PolicySpace {
    pub fn new(
        family: PolicyFamily,
        params: Bounds,
        output: Option<Bounds>,
        rule: CandidateRule,
    ) -> Result<Self> {
        let expected = match family {
            PolicyFamily::Constant { action_dim } => action_dim,
            PolicyFamily::Linear { context_dim } => context_dim,
            PolicyFamily::MultiTask {
                action_dim,
                context_dim,
            } => action_dim * context_dim,
        };
        if params.dim() != expected {
            return Err(Error::DimensionMismatch {
                what: "parameter box",
                expected,
                got: params.dim(),
            });
        }
        Ok(Self {
            family,
            params,
            output,
            rule,
        })
    }

    /// Constant prices on `[0.1, 5]`, 200-point grid.
    pub fn pricing_constant() -> Self {
        let b = Bounds::uniform(1, PRICE_BOUNDS.0, PRICE_BOUNDS.1).unwrap();
        Self::new(
            PolicyFamily::Constant { action_dim: 1 },
            b.clone(),
            Some(b),
            CandidateRule::Grid { points: 200 },
        )
        .unwrap()
    }

    /// Linear prices `γᵀz`, `γ ∈ [-5, 5]^k`, output clipped to `[0.1, 5]`.
    pub fn pricing_linear(context_dim: usize) -> Self {
        Self::new(
            PolicyFamily::Linear { context_dim },
            Bounds::uniform(context_dim, -5.0, 5.0).unwrap(),
            Some(Bounds::uniform(1, PRICE_BOUNDS.0, PRICE_BOUNDS.1).unwrap()),
            CandidateRule::Random {
                count: 500,
                perturbations: 100,
                scale: 0.1,
            },
        )
        .unwrap()
    }

    pub fn multitask(action_dim: usize, context_dim: usize, coef_limit: f64) -> Result<Self> {
        Self::new(
            PolicyFamily::MultiTask {
                action_dim,
                context_dim,
            },
            Bounds::uniform(action_dim * context_dim, -coef_limit, coef_limit)?,
            None,
            CandidateRule::Random {
                count: 0,
                perturbations: 0,
                scale: 0.0,
            },
        )
    }

    pub fn family(&self) -> PolicyFamily {
        self.family
    }

    pub fn param_bounds(&self) -> &Bounds {
        &self.params
    }

    pub fn output_bounds(&self) -> Option<&Bounds> {
        self.output.as_ref()
    }

    pub fn rule(&self) -> &CandidateRule {
        &self.rule
    }

    /// Build the member with the given parameters, clipped into the box.
    pub fn make(&self, params: &[f64]) -> Result<Policy> {
        if params.len() != self.params.dim() {
            return Err(Error::DimensionMismatch {
                what: "policy parameters",
                expected: self.params.dim(),
                got: params.len(),
            });
        }
        let mut p = params.to_vec();
        self.params.clip(&mut p);
        let policy = match self.family {
            PolicyFamily::Constant { .. } => Policy::new(PolicyKind::Constant(p))?,
            PolicyFamily::Linear { .. } => Policy::linear(p)?,
            PolicyFamily::MultiTask {
                action_dim,
                context_dim,
            } => Policy::multitask(action_dim, context_dim, p)?,
        };
        match &self.output {
            Some(b) => policy.with_output_bounds(b.clone()),
            None => Ok(policy),
        }
    }

    /// Base candidate set from the generation rule; deterministic in `seed`.
    pub fn candidates(&self, seed: u64) -> Result<Vec<Policy>> {
        let dim = self.params.dim();
        match self.rule {
            CandidateRule::Grid { points } => {
                if points == 0 {
                    return Ok(Vec::new());
                }
                let axes: Vec<Vec<f64>> = (0..dim)
                    .map(|j| {
                        let (lo, hi) = (self.params.lower()[j], self.params.upper()[j]);
                        if points == 1 {
                            vec![0.5 * (lo + hi)]
                        } else {
                            (0..points)
                                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                                .collect()
                        }
                    })
                    .collect();
                let total = points.checked_pow(dim as u32).ok_or_else(|| Error::invalid("grid too large"))?;
                let mut out = Vec::with_capacity(total);
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    let params: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| axes[j][i]).collect();
                    out.push(self.make(&params)?);
                    for d in (0..dim).rev() {
                        idx[d] += 1;
                        if idx[d] < points {
                            break;
                        }
                        idx[d] = 0;
                    }
                }
                Ok(out)
            }
            CandidateRule::Random { count, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        let params: Vec<f64> = (0..dim)
                            .map(|j| rng.random_range(self.params.lower()[j]..=self.params.upper()[j]))
                            .collect();
                        self.make(&params)
                    })
                    .collect()
            }
        }
    }

    /// Gaussian perturbations around `center`, scale `scale · width` per
    /// coordinate; empty for grid rules.
    pub fn perturbations(&self, center: &[f64], seed: u64) -> Result<Vec<Policy>> {
        let CandidateRule::Random {
            perturbations,
            scale,
            ..
        } = self.rule
        else {
            return Ok(Vec::new());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..perturbations)
            .map(|_| {
                let params: Vec<f64> = center
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let width = self.params.upper()[j] - self.params.lower()[j];
                        let step: f64 = rng.sample(StandardNormal);
                        c + scale * width * step
                    })
                    .collect();
                self.make(&params)
            })
            .collect()
    }
}
