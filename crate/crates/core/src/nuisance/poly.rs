use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial basis `q(z)` used by every first-stage regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyFeatureConfig {
    pub degree: usize,
    pub interactions: bool,
    pub intercept: bool,
}

impl Default for PolyFeatureConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            interactions: true,
            intercept: false,
        }
    }
}

impl PolyFeatureConfig {
    /// Length of `q(z)` for a `k`-dimensional context.
    pub fn len(&self, k: usize) -> usize {
        let pairs = if self.interactions { k * k.saturating_sub(1) / 2 } else { 0 };
        usize::from(self.intercept) + k * self.degree + pairs
    }
}

/// Ordering: optional leading 1, raw coordinates, squares, cubes, ...,
/// then every pair `z_i z_j` (i < j) when interactions are on.
pub fn expand_polynomial_features(z: &[f64], cfg: &PolyFeatureConfig) -> Result<Vec<f64>> {
    if z.is_empty() || cfg.degree == 0 {
        return Err(Error::invalid("polynomial expansion needs k >= 1 and degree >= 1"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite context value"));
    }
    let mut out = Vec::with_capacity(cfg.len(z.len()));
    expand_into(z, cfg, &mut out);
    Ok(out)
}

pub(crate) fn expand_into(z: &[f64], cfg: &PolyFeatureConfig, out: &mut Vec<f64>) {
    out.clear();
    if cfg.intercept {
        out.push(1.0);
    }
    let mut power = z.to_vec();
    out.extend_from_slice(&power);
    for _ in 1..cfg.degree {
        for (p, x) in power.iter_mut().zip(z) {
            *p *= x;
        }
        out.extend_from_slice(&power);
    }
    if cfg.interactions {
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                out.push(z[i] * z[j]);
            }
        }
    }
}
