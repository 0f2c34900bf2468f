//! Estimators as record factories: fit nuisances on one sample, then turn
//! any other sample into coefficient records for evaluation or learning.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::baselines::{direct_records, ips_records};
use super::closed_form::{pricing_linear_records, pricing_quadratic_records};
use super::dr::{make_dr_records, DrRecord};
use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::nuisance::{
    fit_pricing_nuisances, fit_quadratic_moments, fit_sigma_hat, fit_theta_hat, NuisanceConfig, NuisancePair,
    SigmaModel, ThetaModel,
};

/// Fits whatever the estimator needs from a training sample.
pub trait RecordMaker: Send + Sync {
    fn fit(&self, train: &LoggedDataset, seed: u64) -> Result<Box<dyn RecordSource>>;
}

/// Produces records for rows disjoint from the fitting sample.
pub trait RecordSource: Send + Sync {
    fn records(&self, data: &LoggedDataset) -> Result<Vec<DrRecord>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Dr,
    Direct,
    Ips,
    Oracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Dr, EstimatorKind::Direct, EstimatorKind::Ips, EstimatorKind::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Dr => "dr",
            EstimatorKind::Direct => "direct",
            EstimatorKind::Ips => "ips",
            EstimatorKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dr" => Ok(EstimatorKind::Dr),
            "direct" => Ok(EstimatorKind::Direct),
            "ips" => Ok(EstimatorKind::Ips),
            "oracle" => Ok(EstimatorKind::Oracle),
            other => Err(Error::invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Which second-moment model backs `Σ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NuisanceStyle {
    /// Entry-wise lasso fits of `φφᵀ`.
    Generic,
    /// Price mean and constant variance, map `(1, p)`.
    PricingLinear,
    /// Price mean and constant central moments, map `(p, p²)`.
    PricingQuadratic,
}

#[derive(Clone)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub map: FeatureMap,
    pub style: NuisanceStyle,
    pub config: NuisanceConfig,
    /// Required by [`EstimatorKind::Oracle`].
    pub truth: Option<NuisancePair>,
}

impl Estimator {
    pub fn new(kind: EstimatorKind, map: FeatureMap, style: NuisanceStyle) -> Self {
        Self {
            kind,
            map,
            style,
            config: NuisanceConfig::default(),
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: NuisancePair) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_config(mut self, config: NuisanceConfig) -> Self {
        self.config = config;
        self
    }

    fn fit_sigma(&self, train: &LoggedDataset, seed: u64) -> Result<FittedSigma> {
        Ok(match self.style {
            NuisanceStyle::Generic => FittedSigma::Generic(Arc::new(fit_sigma_hat(train, &self.map, &self.config, seed)?)),
            NuisanceStyle::PricingLinear => FittedSigma::Linear(fit_pricing_nuisances(train, &self.config, seed)?),
            NuisanceStyle::PricingQuadratic => FittedSigma::Quadratic(fit_quadratic_moments(train, &self.config, seed)?),
        })
    }
}

enum FittedSigma {
    Generic(Arc<dyn SigmaModel>),
    Linear(crate::nuisance::PricingNuisances),
    Quadratic(crate::nuisance::QuadraticMoments),
}

impl FittedSigma {
    fn model(&self) -> &dyn SigmaModel {
        match self {
            FittedSigma::Generic(s) => s.as_ref(),
            FittedSigma::Linear(s) => s,
            FittedSigma::Quadratic(s) => s,
        }
    }
}

struct Fitted {
    kind: EstimatorKind,
    map: FeatureMap,
    theta: Option<Arc<dyn ThetaModel>>,
    sigma: Option<FittedSigma>,
    truth: Option<NuisancePair>,
}

impl RecordMaker for Estimator {
    fn fit(&self, train: &LoggedDataset, seed: u64) -> Result<Box<dyn RecordSource>> {
        let (theta, sigma, truth) = match self.kind {
            EstimatorKind::Dr => {
                let theta: Arc<dyn ThetaModel> = Arc::new(fit_theta_hat(train, &self.map, &self.config, seed)?);
                (Some(theta), Some(self.fit_sigma(train, seed)?), None)
            }
            EstimatorKind::Direct => {
                let theta: Arc<dyn ThetaModel> = Arc::new(fit_theta_hat(train, &self.map, &self.config, seed)?);
                (Some(theta), None, None)
            }
            EstimatorKind::Ips => (None, Some(self.fit_sigma(train, seed)?), None),
            EstimatorKind::Oracle => {
                let truth = self
                    .truth
                    .clone()
                    .ok_or_else(|| Error::invalid("oracle estimator needs the true nuisances"))?;
                (None, None, Some(truth))
            }
        };
        Ok(Box::new(Fitted {
            kind: self.kind,
            map: self.map.clone(),
            theta,
            sigma,
            truth,
        }))
    }
}

impl RecordSource for Fitted {
    fn records(&self, data: &LoggedDataset) -> Result<Vec<DrRecord>> {
        match (self.kind, &self.theta, &self.sigma, &self.truth) {
            (EstimatorKind::Dr, Some(theta), Some(sigma), _) => match sigma {
                FittedSigma::Linear(s) => pricing_linear_records(data, theta.as_ref(), s),
                FittedSigma::Quadratic(s) => pricing_quadratic_records(data, theta.as_ref(), s),
                FittedSigma::Generic(s) => {
                    let pair = NuisancePair::new(theta.clone(), s.clone())?;
                    make_dr_records(data, &self.map, &pair)
                }
            },
            (EstimatorKind::Direct, Some(theta), _, _) => direct_records(data, theta.as_ref()),
            (EstimatorKind::Ips, _, Some(sigma), _) => ips_records(data, &self.map, sigma.model()),
            (EstimatorKind::Oracle, _, _, Some(truth)) => make_dr_records(data, &self.map, truth),
            _ => Err(Error::invalid("estimator was not fitted with the nuisances it needs")),
        }
    }
}

/// Two-fold cross-fitting: each half is scored with nuisances fit on the
/// other half. Records come back in the original row order.
pub fn cross_fit_records(maker: &dyn RecordMaker, data: &LoggedDataset, seed: u64) -> Result<Vec<DrRecord>> {
    if data.len() < 2 {
        return Err(Error::invalid("cross-fitting needs at least two rows"));
    }
    let half = data.len() / 2;
    let first: Vec<usize> = (0..half).collect();
    let second: Vec<usize> = (half..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for (fit_rows, score_rows) in [(&second, &first), (&first, &second)] {
        let source = maker.fit(&data.subset(fit_rows), seed)?;
        for mut rec in source.records(&data.subset(score_rows))? {
            rec.row = score_rows[rec.row];
            out.push(rec);
        }
    }
    Ok(out)
}
