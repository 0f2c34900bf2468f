//! Known feature maps `φ(a, z)` of the semi-parametric value model
//! `V(a, z) = ⟨θ(z), φ(a, z)⟩`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type CustomEval = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub enum FeatureKind {
    /// `φ(p, z) = (1, p)`: linear demand in a scalar price.
    PricingLinear,
    /// `φ(p, z) = (p, p²)`: revenue observed directly.
    PricingQuadratic,
    /// `φ(a, z) = a`.
    IdentityAction { dim: usize },
    /// Finitely many actions labelled `1..=n_actions`, encoded as the basis
    /// vector `e_label`.
    DiscreteOneHot { n_actions: usize },
    Custom {
        p: usize,
        action_dim: usize,
        constant_coordinate: Option<usize>,
        eval: Arc<CustomEval>,
    },
}

#[derive(Clone)]
pub struct FeatureMap {
    kind: FeatureKind,
}

impl fmt::Debug for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            FeatureKind::PricingLinear => "PricingLinear".to_string(),
            FeatureKind::PricingQuadratic => "PricingQuadratic".to_string(),
            FeatureKind::IdentityAction { dim } => format!("IdentityAction({dim})"),
            FeatureKind::DiscreteOneHot { n_actions } => format!("DiscreteOneHot({n_actions})"),
            FeatureKind::Custom { p, .. } => format!("Custom(p={p})"),
        };
        f.debug_struct("FeatureMap").field("kind", &name).finish()
    }
}

impl FeatureMap {
    pub fn pricing_linear() -> Self {
        Self {
            kind: FeatureKind::PricingLinear,
        }
    }

    pub fn pricing_quadratic() -> Self {
        Self {
            kind: FeatureKind::PricingQuadratic,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kind: FeatureKind::IdentityAction { dim },
        }
    }

    pub fn one_hot(n_actions: usize) -> Self {
        Self {
            kind: FeatureKind::DiscreteOneHot { n_actions },
        }
    }

    /// A user supplied map. `constant_coordinate` names a coordinate of `φ`
    /// that is identically one, if any; first-stage regressions then fit an
    /// unpenalized intercept for it.
    pub fn custom<F>(p: usize, action_dim: usize, constant_coordinate: Option<usize>, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            kind: FeatureKind::Custom {
                p,
                action_dim,
                constant_coordinate,
                eval: Arc::new(eval),
            },
        }
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    /// Feature dimension `p`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            FeatureKind::PricingLinear | FeatureKind::PricingQuadratic => 2,
            FeatureKind::IdentityAction { dim } => *dim,
            FeatureKind::DiscreteOneHot { n_actions } => *n_actions,
            FeatureKind::Custom { p, .. } => *p,
        }
    }

    pub fn action_dim(&self) -> usize {
        match &self.kind {
            FeatureKind::PricingLinear | FeatureKind::PricingQuadratic => 1,
            FeatureKind::IdentityAction { dim } => *dim,
            FeatureKind::DiscreteOneHot { .. } => 1,
            FeatureKind::Custom { action_dim, .. } => *action_dim,
        }
    }

    pub fn constant_coordinate(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::PricingLinear => Some(0),
            FeatureKind::Custom {
                constant_coordinate, ..
            } => *constant_coordinate,
            _ => None,
        }
    }

    /// `φ(a, z)`.
    pub fn eval(&self, a: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.action_dim() {
            return Err(Error::DimensionMismatch {
                what: "action",
                expected: self.action_dim(),
                got: a.len(),
            });
        }
        let out = match &self.kind {
            FeatureKind::PricingLinear => vec![1.0, a[0]],
            FeatureKind::PricingQuadratic => vec![a[0], a[0] * a[0]],
            FeatureKind::IdentityAction { .. } => a.to_vec(),
            FeatureKind::DiscreteOneHot { n_actions } => {
                let label = a[0];
                if label.fract() != 0.0 || label < 1.0 || label > *n_actions as f64 {
                    return Err(Error::invalid(format!(
                        "action label {label} outside 1..={n_actions}"
                    )));
                }
                let mut e = vec![0.0; *n_actions];
                e[label as usize - 1] = 1.0;
                e
            }
            FeatureKind::Custom { p, eval, .. } => {
                let v = eval(a, z);
                if v.len() != *p {
                    return Err(Error::DimensionMismatch {
                        what: "custom feature output",
                        expected: *p,
                        got: v.len(),
                    });
                }
                v
            }
        };
        Ok(out)
    }
}

/// Free-function form of [`FeatureMap::eval`].
pub fn eval_features(map: &FeatureMap, a: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    map.eval(a, z)
}
