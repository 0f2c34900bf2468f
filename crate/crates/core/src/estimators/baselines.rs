//! Direct, inverse-propensity and oracle estimators.

use super::dr::{build_rows, invert_sigma, make_dr_records, value_dr, DrRecord, ValueEstimate, DEFAULT_RIDGE};
use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::nuisance::{NuisancePair, SigmaModel, ThetaModel};
use crate::policy::Policy;

/// Plug-in records `θ̂(z_i)`.
pub fn direct_records(data: &LoggedDataset, theta_hat: &dyn ThetaModel) -> Result<Vec<DrRecord>> {
    build_rows(data.len(), |i| {
        let z = data.context(i);
        DrRecord::new(theta_hat.theta(z), z.to_vec(), i)
    })
}

/// Records `Σ̂(z_i)⁻¹ φ(a_i, z_i) y_i`.
pub fn ips_records(data: &LoggedDataset, map: &FeatureMap, sigma_hat: &dyn SigmaModel) -> Result<Vec<DrRecord>> {
    build_rows(data.len(), |i| {
        let z = data.context(i);
        let phi = map.eval(data.action(i), z)?;
        let inv = invert_sigma(&sigma_hat.sigma(z), DEFAULT_RIDGE)?;
        if inv.nrows() != phi.len() {
            return Err(Error::DimensionMismatch {
                what: "covariance",
                expected: phi.len(),
                got: inv.nrows(),
            });
        }
        let y = data.outcome(i);
        let theta = (0..phi.len())
            .map(|r| y * (0..phi.len()).map(|c| inv[(r, c)] * phi[c]).sum::<f64>())
            .collect();
        DrRecord::new(theta, z.to_vec(), i)
    })
}

pub fn value_direct(data: &LoggedDataset, map: &FeatureMap, theta_hat: &dyn ThetaModel, pi: &Policy) -> Result<ValueEstimate> {
    value_dr(&direct_records(data, theta_hat)?, pi, map)
}

pub fn value_ips(data: &LoggedDataset, map: &FeatureMap, sigma_hat: &dyn SigmaModel, pi: &Policy) -> Result<ValueEstimate> {
    value_dr(&ips_records(data, map, sigma_hat)?, pi, map)
}

/// The DR value with the true nuisances substituted.
pub fn value_oracle(data: &LoggedDataset, map: &FeatureMap, truth: &NuisancePair, pi: &Policy) -> Result<ValueEstimate> {
    value_dr(&make_dr_records(data, map, truth)?, pi, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::{SigmaFn, ThetaFn};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn data() -> LoggedDataset {
        LoggedDataset::from_rows(
            vec![1.0, -0.5, 2.0],
            &[vec![1.0], vec![2.0], vec![0.5]],
            &[vec![1.2], vec![1.5], vec![1.9]],
        )
        .unwrap()
    }

    #[test]
    fn zero_outcomes_give_zero_ips() {
        let d = data().with_outcomes(vec![0.0; 3]).unwrap();
        let sigma = SigmaFn(2, |z: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, z[0], z[0], 1.0 + z[0] * z[0]]));
        let v = value_ips(&d, &FeatureMap::pricing_linear(), &sigma, &Policy::constant(2.0)).unwrap();
        assert_eq!(v.estimate, 0.0);
    }

    #[test]
    fn direct_offset_bias_is_linear() {
        let map = FeatureMap::pricing_linear();
        let pi = Policy::constant(1.5);
        let base = ThetaFn(2, |z: &[f64]| vec![z[0], -0.5]);
        let shifted = ThetaFn(2, |z: &[f64]| vec![z[0], -0.5 + 0.3]);
        let v0 = value_direct(&data(), &map, &base, &pi).unwrap().estimate;
        let v1 = value_direct(&data(), &map, &shifted, &pi).unwrap().estimate;
        assert!((v1 - v0 - 0.3 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_equals_dr_with_same_nuisances() {
        let map = FeatureMap::pricing_linear();
        let truth = NuisancePair::new(
            Arc::new(ThetaFn(2, |z: &[f64]| vec![2.0 * z[0], -0.6 * z[0]])),
            Arc::new(SigmaFn(2, |z: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, z[0], z[0], 1.0 + z[0] * z[0]]))),
        )
        .unwrap();
        let pi = Policy::sin(1);
        let o = value_oracle(&data(), &map, &truth, &pi).unwrap();
        let d = value_dr(&make_dr_records(&data(), &map, &truth).unwrap(), &pi, &map).unwrap();
        assert_eq!(o, d);
    }
}
