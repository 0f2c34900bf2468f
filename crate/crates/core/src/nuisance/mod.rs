//! First-stage regression machinery.

pub mod fit;
pub mod lasso;
pub mod poly;

pub use fit::{
    fit_instrument_sigma, fit_pricing_nuisances, fit_quadratic_moments, fit_sigma_hat, fit_theta_hat, raw_moments,
    InstrumentSigmaHat, LinearPredictor, NuisanceConfig, NuisancePair, PricingNuisances, QuadraticMoments,
    SigmaFn, SigmaHat, SigmaModel, ThetaFn, ThetaHat, ThetaModel,
};
pub use lasso::{lambda_max, lasso_cv_fit, lasso_fit, CvOptions, Design, LassoCvFit, LassoFit, LassoOptions};
pub use poly::{expand_polynomial_features, PolyFeatureConfig};
