//! Closed-form specializations of the DR moment for pricing, discrete
//! actions, instruments and semi-bandit feedback.

use nalgebra::{DMatrix, DVector};

use super::dr::{build_rows, invert_sigma, DrRecord, ValueEstimate, DEFAULT_RIDGE};
use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::nuisance::{raw_moments, PricingNuisances, QuadraticMoments, SigmaModel, ThetaModel};
use crate::policy::Policy;

/// DR demand coefficients for `d = a − b p` with price mean `ĝ` and
/// variance `σ̂²`. Returns `(a_DR, b_DR)`.
pub fn theta_dr_pricing_linear(d: f64, p: f64, a_hat: f64, b_hat: f64, g_hat: f64, sigma2_hat: f64) -> Result<(f64, f64)> {
    if !(sigma2_hat > 0.0) {
        return Err(Error::invalid(format!("price variance must be positive, got {sigma2_hat}")));
    }
    let e = d - (a_hat - b_hat * p);
    let a = a_hat + (1.0 + g_hat * (g_hat - p) / sigma2_hat) * e;
    let b = b_hat - ((p - g_hat) / sigma2_hat) * e;
    Ok((a, b))
}

/// DR coefficients for revenue `r = a p − b p²` from the price mean and
/// central moments. Returns `(a_DR, b_DR)`.
#[allow(clippy::too_many_arguments)]
pub fn theta_dr_pricing_quadratic(
    r: f64,
    p: f64,
    a_hat: f64,
    b_hat: f64,
    mu1: f64,
    c2: f64,
    c3: f64,
    c4: f64,
) -> Result<(f64, f64)> {
    let [_, m2, m3, m4] = raw_moments(mu1, c2, c3, c4);
    let det = m4 * m2 - m3 * m3;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularCovariance {
            row: None,
            detail: format!("moment determinant {det:e}"),
        });
    }
    let e = r - (a_hat * p - b_hat * p * p);
    let a = a_hat + (m4 * p - m3 * p * p) / det * e;
    let b = b_hat - (m2 * p * p - m3 * p) / det * e;
    Ok((a, b))
}

/// Discrete-action DR: only the observed coordinate is corrected.
pub fn theta_dr_multiaction(y: f64, observed: usize, theta_hat: &[f64], propensities: &[f64]) -> Result<Vec<f64>> {
    if theta_hat.len() != propensities.len() {
        return Err(Error::DimensionMismatch {
            what: "propensities",
            expected: theta_hat.len(),
            got: propensities.len(),
        });
    }
    let Some(&prop) = propensities.get(observed) else {
        return Err(Error::invalid(format!("action index {observed} out of range")));
    };
    if !(prop > 0.0) {
        return Err(Error::invalid(format!("zero propensity at observed action {observed}")));
    }
    let mut out = theta_hat.to_vec();
    out[observed] += (y - theta_hat[observed]) / prop;
    Ok(out)
}

/// Instrumented DR: `θ̂ + Σ̂ᴵ⁻¹ w (y − ⟨θ̂, φ(a, z)⟩)`.
pub fn theta_dr_iv(
    y: f64,
    a: &[f64],
    z: &[f64],
    w: &[f64],
    map: &FeatureMap,
    theta_hat: &[f64],
    sigma_iv: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let phi = map.eval(a, z)?;
    let p = phi.len();
    if theta_hat.len() != p || w.len() != p || sigma_iv.nrows() != p || sigma_iv.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "instrument system",
            expected: p,
            got: w.len(),
        });
    }
    let resid = y - theta_hat.iter().zip(&phi).map(|(t, f)| t * f).sum::<f64>();
    let sol = sigma_iv
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(w))
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::SingularCovariance {
            row: None,
            detail: "instrument moment matrix is singular".into(),
        })?;
    Ok(theta_hat.iter().zip(sol.iter()).map(|(t, s)| t + s * resid).collect())
}

fn check_prices(data: &LoggedDataset) -> Result<()> {
    if data.action_dim() != 1 {
        return Err(Error::DimensionMismatch {
            what: "price (scalar action)",
            expected: 1,
            got: data.action_dim(),
        });
    }
    Ok(())
}

/// Records `(a_DR, −b_DR)` for linear demand; `theta` uses the `(a, −b)` convention.
pub fn pricing_linear_records(data: &LoggedDataset, theta: &dyn ThetaModel, nuis: &PricingNuisances) -> Result<Vec<DrRecord>> {
    check_prices(data)?;
    build_rows(data.len(), |i| {
        let z = data.context(i);
        let t = theta.theta(z);
        let (a, b) = theta_dr_pricing_linear(data.outcome(i), data.action(i)[0], t[0], -t[1], nuis.g.eval(z), nuis.sigma2)?;
        DrRecord::from_demand(a, b, z.to_vec(), i)
    })
}

/// Records `(a_DR, −b_DR)` for quadratic revenue.
pub fn pricing_quadratic_records(data: &LoggedDataset, theta: &dyn ThetaModel, moments: &QuadraticMoments) -> Result<Vec<DrRecord>> {
    check_prices(data)?;
    build_rows(data.len(), |i| {
        let z = data.context(i);
        let t = theta.theta(z);
        let (a, b) = theta_dr_pricing_quadratic(
            data.outcome(i),
            data.action(i)[0],
            t[0],
            -t[1],
            moments.mu1.eval(z),
            moments.c2,
            moments.c3,
            moments.c4,
        )?;
        DrRecord::from_demand(a, b, z.to_vec(), i)
    })
}

/// Semi-bandit DR value: `φ(π)ᵀ (Θ̂ + Σ̂⁻¹ φ (Yᵀ − φᵀ Θ̂)) φ(π)` averaged over rows.
/// `outcomes[i]` holds the `p` coordinate outcomes of row `i`.
pub fn value_dr_semibandit(
    data: &LoggedDataset,
    outcomes: &[Vec<f64>],
    map: &FeatureMap,
    theta_hat: &(dyn Fn(&[f64]) -> DMatrix<f64> + Sync),
    sigma_hat: &dyn SigmaModel,
    pi: &Policy,
) -> Result<ValueEstimate> {
    if outcomes.len() != data.len() {
        return Err(Error::DimensionMismatch {
            what: "semi-bandit outcome rows",
            expected: data.len(),
            got: outcomes.len(),
        });
    }
    let p = map.dim();
    let contributions = (0..data.len())
        .map(|i| {
            let z = data.context(i);
            if outcomes[i].len() != p {
                return Err(Error::DimensionMismatch {
                    what: "semi-bandit outcome columns",
                    expected: p,
                    got: outcomes[i].len(),
                });
            }
            let phi = DVector::from_vec(map.eval(data.action(i), z)?);
            let theta = theta_hat(z);
            if theta.nrows() != p || theta.ncols() != p {
                return Err(Error::DimensionMismatch {
                    what: "semi-bandit coefficient matrix",
                    expected: p,
                    got: theta.nrows(),
                });
            }
            let resid = DVector::from_column_slice(&outcomes[i]).transpose() - phi.transpose() * &theta;
            let inv = invert_sigma(&sigma_hat.sigma(z), DEFAULT_RIDGE).map_err(|e| e.at_row(i))?;
            let m = theta + inv * &phi * resid;
            let psi = DVector::from_vec(map.eval(&pi.apply(z)?, z)?);
            Ok((psi.transpose() * m * psi)[(0, 0)])
        })
        .collect::<Result<Vec<_>>>()?;
    ValueEstimate::from_contributions(contributions)
}
