//! Synthetic pricing and allocation data with known nuisances.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::estimators::{NuisanceStyle, Objective, RevenueModel};
use crate::features::FeatureMap;
use crate::nuisance::{raw_moments, NuisancePair, SigmaFn, ThetaFn};
use crate::policy::context_summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Form {
    Quadratic,
    Step,
    Sigmoid,
    Linear,
}

impl Form {
    pub const ALL: [Form; 4] = [Form::Quadratic, Form::Step, Form::Sigmoid, Form::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            Form::Quadratic => "quadratic",
            Form::Step => "step",
            Form::Sigmoid => "sigmoid",
            Form::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `k = 2`, `l = 1`.
    Low,
    /// `k = 10`, `l = 3`.
    High,
}

impl Regime {
    pub fn context_dim(self) -> usize {
        match self {
            Regime::Low => 2,
            Regime::High => 10,
        }
    }

    /// Number of leading coordinates averaged into `z̄`.
    pub fn active(self) -> usize {
        match self {
            Regime::Low => 1,
            Regime::High => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Application {
    PricingLinearDemand,
    PricingQuadraticRevenue,
    ResourceAllocation,
}

impl Application {
    pub fn as_str(self) -> &'static str {
        match self {
            Application::PricingLinearDemand => "pricing-linear-demand",
            Application::PricingQuadraticRevenue => "pricing-quadratic-revenue",
            Application::ResourceAllocation => "resource-allocation",
        }
    }

    pub fn feature_map(self) -> FeatureMap {
        match self {
            Application::PricingLinearDemand => FeatureMap::pricing_linear(),
            Application::PricingQuadraticRevenue => FeatureMap::pricing_quadratic(),
            Application::ResourceAllocation => FeatureMap::identity(2),
        }
    }

    pub fn objective(self) -> Objective {
        match self {
            Application::PricingLinearDemand => Objective::Revenue(RevenueModel::LinearDemand),
            Application::PricingQuadraticRevenue => Objective::Revenue(RevenueModel::QuadraticRevenue),
            Application::ResourceAllocation => Objective::CostlyAllocation { cost: RESOURCE_COST },
        }
    }

    pub fn nuisance_style(self) -> NuisanceStyle {
        match self {
            Application::PricingLinearDemand => NuisanceStyle::PricingLinear,
            Application::PricingQuadraticRevenue => NuisanceStyle::PricingQuadratic,
            Application::ResourceAllocation => NuisanceStyle::Generic,
        }
    }
}

/// Quadratic cost weight `λ` in the allocation objective.
pub const RESOURCE_COST: f64 = 1.0;

macro_rules! impl_name {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($v),)+
                    other => Err(Error::invalid(format!("unknown {} '{other}'", stringify!($ty).to_lowercase()))),
                }
            }
        }
    };
}

impl_name!(Form, "quadratic" => Form::Quadratic, "step" => Form::Step, "sigmoid" => Form::Sigmoid, "linear" => Form::Linear);
impl_name!(Regime, "low" => Regime::Low, "high" => Regime::High);
impl_name!(
    Application,
    "pricing-linear-demand" => Application::PricingLinearDemand,
    "pricing-quadratic-revenue" => Application::PricingQuadraticRevenue,
    "resource-allocation" => Application::ResourceAllocation
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub application: Application,
    pub form: Form,
    pub regime: Regime,
    pub n: usize,
    pub seed: u64,
    pub noise: f64,
}

impl DgpConfig {
    pub fn new(application: Application, form: Form, regime: Regime, n: usize, seed: u64) -> Self {
        Self {
            application,
            form,
            regime,
            n,
            seed,
            noise: 1.0,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise scale must be non-negative"));
        }
        Ok(())
    }
}

/// `(a(z̄), b(z̄))`. The step form takes its upper branch at `z̄ = 1.5`.
pub fn dgp_coefficients(form: Form, z_bar: f64) -> (f64, f64) {
    match form {
        Form::Quadratic => (2.0 * z_bar * z_bar, 0.6 * z_bar),
        Form::Step => {
            if z_bar < 1.5 {
                (5.0, 0.7)
            } else {
                (6.0, 1.2)
            }
        }
        Form::Sigmoid => {
            let s = 1.0 / (1.0 + z_bar.exp());
            (s + 3.0, 2.0 * s + 0.1)
        }
        Form::Linear => (6.0 * z_bar, z_bar),
    }
}

/// Generated sample together with the true nuisances for its map.
#[derive(Clone)]
pub struct SyntheticData {
    pub config: DgpConfig,
    pub data: LoggedDataset,
    pub truth: NuisancePair,
}

/// True `θ₀` and `Σ₀` for the application's feature map.
pub fn true_nuisances(application: Application, form: Form, regime: Regime) -> NuisancePair {
    let l = regime.active();
    let zbar = move |z: &[f64]| context_summary(z, l).expect("context has the regime's dimension");
    match application {
        Application::PricingLinearDemand => NuisancePair {
            theta: Arc::new(ThetaFn(2, move |z: &[f64]| {
                let (a, b) = dgp_coefficients(form, zbar(z));
                vec![a, -b]
            })),
            sigma: Arc::new(SigmaFn(2, move |z: &[f64]| {
                let g = zbar(z);
                DMatrix::from_row_slice(2, 2, &[1.0, g, g, 1.0 + g * g])
            })),
        },
        Application::PricingQuadraticRevenue => NuisancePair {
            theta: Arc::new(ThetaFn(2, move |z: &[f64]| {
                let (a, b) = dgp_coefficients(form, zbar(z));
                vec![a, -b]
            })),
            sigma: Arc::new(SigmaFn(2, move |z: &[f64]| {
                let [_, m2, m3, m4] = raw_moments(zbar(z), 1.0, 0.0, 3.0);
                DMatrix::from_row_slice(2, 2, &[m2, m3, m3, m4])
            })),
        },
        Application::ResourceAllocation => NuisancePair {
            theta: Arc::new(ThetaFn(2, move |z: &[f64]| {
                let (a, b) = dgp_coefficients(form, zbar(z));
                vec![a, b]
            })),
            sigma: Arc::new(SigmaFn(2, move |z: &[f64]| {
                let g = zbar(z);
                let m = g * g;
                DMatrix::from_row_slice(2, 2, &[1.0 + m, m, m, 1.0 + m])
            })),
        },
    }
}

fn draw_context(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(1.0..2.0)).collect()
}

fn generate(cfg: &DgpConfig, expected: Application) -> Result<SyntheticData> {
    cfg.validate()?;
    if cfg.application != expected {
        return Err(Error::invalid(format!(
            "generator for {expected} called with a {} configuration",
            cfg.application
        )));
    }
    let (k, l) = (cfg.regime.context_dim(), cfg.regime.active());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let action_dim = if expected == Application::ResourceAllocation { 2 } else { 1 };
    let mut y = Vec::with_capacity(cfg.n);
    let mut actions = Vec::with_capacity(cfg.n * action_dim);
    let mut contexts = Vec::with_capacity(cfg.n * k);
    for _ in 0..cfg.n {
        let z = draw_context(&mut rng, k);
        let zbar = context_summary(&z, l)?;
        let (a, b) = dgp_coefficients(cfg.form, zbar);
        let outcome = match expected {
            Application::PricingLinearDemand | Application::PricingQuadraticRevenue => {
                let p = zbar + rng.sample::<f64, _>(StandardNormal);
                actions.push(p);
                if expected == Application::PricingLinearDemand {
                    a - b * p
                } else {
                    a * p - b * p * p
                }
            }
            Application::ResourceAllocation => {
                let a1 = zbar + rng.sample::<f64, _>(StandardNormal);
                let a2 = zbar + rng.sample::<f64, _>(StandardNormal);
                actions.extend([a1, a2]);
                a * a1 + b * a2
            }
        };
        y.push(outcome + cfg.noise * rng.sample::<f64, _>(StandardNormal));
        contexts.extend(z);
    }
    Ok(SyntheticData {
        config: *cfg,
        data: LoggedDataset::new(y, actions, action_dim, contexts, k)?,
        truth: true_nuisances(expected, cfg.form, cfg.regime),
    })
}

/// `z ∼ U(1,2)^k`, `p ∼ N(z̄, 1)`, `d = a(z̄) − b(z̄) p + ε`.
pub fn generate_pricing_data(cfg: &DgpConfig) -> Result<SyntheticData> {
    generate(cfg, Application::PricingLinearDemand)
}

/// Same contexts and prices; outcome `r = a(z̄) p − b(z̄) p² + ε`.
pub fn generate_quadratic_data(cfg: &DgpConfig) -> Result<SyntheticData> {
    generate(cfg, Application::PricingQuadraticRevenue)
}

/// Two independent actions `a₁, a₂ ∼ N(z̄, 1)`; `y = a(z̄) a₁ + b(z̄) a₂ + ε`.
pub fn generate_resource_data(cfg: &DgpConfig) -> Result<SyntheticData> {
    generate(cfg, Application::ResourceAllocation)
}

/// Dispatch on `cfg.application`.
pub fn generate_data(cfg: &DgpConfig) -> Result<SyntheticData> {
    generate(cfg, cfg.application)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_examples() {
        let (a, b) = dgp_coefficients(Form::Quadratic, 1.0);
        assert!((a - 2.0).abs() < 1e-15 && (b - 0.6).abs() < 1e-15);
        assert_eq!(dgp_coefficients(Form::Step, 1.4), (5.0, 0.7));
        assert_eq!(dgp_coefficients(Form::Step, 1.5), (6.0, 1.2));
        assert_eq!(dgp_coefficients(Form::Linear, 1.5), (9.0, 1.5));
        let (a, b) = dgp_coefficients(Form::Sigmoid, 0.0);
        assert!((a - 3.5).abs() < 1e-15 && (b - 1.1).abs() < 1e-15);
    }

    #[test]
    fn names_round_trip() {
        for f in Form::ALL {
            assert_eq!(f.to_string().parse::<Form>().unwrap(), f);
        }
        for r in [Regime::Low, Regime::High] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
        }
        assert!("cubic".parse::<Form>().is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        for app in [
            Application::PricingLinearDemand,
            Application::PricingQuadraticRevenue,
            Application::ResourceAllocation,
        ] {
            let cfg = DgpConfig::new(app, Form::Step, Regime::High, 50, 17);
            let a = generate_data(&cfg).unwrap().data;
            let b = generate_data(&cfg).unwrap().data;
            assert_eq!(a, b);
            assert_ne!(a, generate_data(&cfg.with_seed(18)).unwrap().data);
            assert_eq!(a.context_dim(), 10);
        }
        let cfg = DgpConfig::new(Application::PricingLinearDemand, Form::Step, Regime::Low, 5, 1);
        assert!(generate_resource_data(&cfg).is_err());
        assert!(generate_pricing_data(&cfg.with_n(0)).is_err());
    }

    #[test]
    fn noiseless_quadratic_revenue() {
        let mut cfg = DgpConfig::new(Application::PricingQuadraticRevenue, Form::Quadratic, Regime::Low, 200, 3);
        cfg.noise = 0.0;
        let d = generate_quadratic_data(&cfg).unwrap().data;
        for i in 0..d.len() {
            let (z, p) = (d.context(i)[0], d.action(i)[0]);
            let (a, b) = dgp_coefficients(Form::Quadratic, z);
            assert!((d.outcome(i) - (a * p - b * p * p)).abs() < 1e-12);
        }
        let (a, b) = dgp_coefficients(Form::Quadratic, 1.0);
        assert!((a * 2.0 - b * 4.0 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn price_moments() {
        let cfg = DgpConfig::new(Application::PricingLinearDemand, Form::Linear, Regime::High, 200_000, 5);
        let d = generate_pricing_data(&cfg).unwrap().data;
        let n = d.len() as f64;
        let resid: Vec<f64> = (0..d.len()).map(|i| d.action(i)[0] - context_summary(d.context(i), 3).unwrap()).collect();
        let mean = resid.iter().sum::<f64>() / n;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * 2f64.sqrt() / n.sqrt());
    }

    #[test]
    fn resource_second_moments() {
        let cfg = DgpConfig::new(Application::ResourceAllocation, Form::Linear, Regime::Low, 400_000, 6);
        let s = generate_resource_data(&cfg).unwrap();
        // Pin z̄ to a narrow band and compare E[a aᵀ | z̄] with Σ₀.
        let (mut m, mut c) = ([0.0; 3], 0.0);
        for i in 0..s.data.len() {
            let z = s.data.context(i);
            if (z[0] - 1.5).abs() < 0.01 {
                let a = s.data.action(i);
                m[0] += a[0] * a[0];
                m[1] += a[0] * a[1];
                m[2] += a[1] * a[1];
                c += 1.0;
            }
        }
        let sig = s.truth.sigma.sigma(&[1.5, 1.0]);
        assert!((m[0] / c - sig[(0, 0)]).abs() < 0.15);
        assert!((m[1] / c - sig[(0, 1)]).abs() < 0.15);
        assert!((m[2] / c - sig[(1, 1)]).abs() < 0.15);
    }
}
