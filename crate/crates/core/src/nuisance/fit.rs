//! First-stage fits: `θ̂(z)` by square loss, `Σ̂(z)` entry by entry, and the
//! sufficient-statistic shortcuts for homoskedastic pricing.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::lasso::{lasso_cv_fit, CvOptions, Design, LassoOptions};
use super::poly::{expand_into, PolyFeatureConfig};
use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceConfig {
    pub poly: PolyFeatureConfig,
    pub cv: CvOptions,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            poly: PolyFeatureConfig::default(),
            cv: CvOptions::default(),
        }
    }
}

/// Outcome model `z ↦ θ(z) ∈ ℝ^p`.
pub trait ThetaModel: Send + Sync {
    fn dim(&self) -> usize;
    fn theta(&self, z: &[f64]) -> Vec<f64>;
}

/// Conditional second-moment model `z ↦ Σ(z) = E[φφᵀ | z]`.
pub trait SigmaModel: Send + Sync {
    fn dim(&self) -> usize;
    fn sigma(&self, z: &[f64]) -> DMatrix<f64>;
}

/// Closure-backed [`ThetaModel`].
pub struct ThetaFn<F>(pub usize, pub F);

impl<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> ThetaModel for ThetaFn<F> {
    fn dim(&self) -> usize {
        self.0
    }
    fn theta(&self, z: &[f64]) -> Vec<f64> {
        (self.1)(z)
    }
}

/// Closure-backed [`SigmaModel`].
pub struct SigmaFn<F>(pub usize, pub F);

impl<F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync> SigmaModel for SigmaFn<F> {
    fn dim(&self) -> usize {
        self.0
    }
    fn sigma(&self, z: &[f64]) -> DMatrix<f64> {
        (self.1)(z)
    }
}

#[derive(Clone)]
pub struct NuisancePair {
    pub theta: Arc<dyn ThetaModel>,
    pub sigma: Arc<dyn SigmaModel>,
}

impl NuisancePair {
    pub fn new(theta: Arc<dyn ThetaModel>, sigma: Arc<dyn SigmaModel>) -> Result<Self> {
        if theta.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                what: "nuisance pair",
                expected: theta.dim(),
                got: sigma.dim(),
            });
        }
        Ok(Self { theta, sigma })
    }
}

/// `intercept + coefᵀ q(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub poly: PolyFeatureConfig,
    pub lambda: f64,
    pub dropped: Vec<usize>,
}

impl LinearPredictor {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut q = Vec::with_capacity(self.coef.len());
        expand_into(z, &self.poly, &mut q);
        self.intercept + self.coef.iter().zip(&q).map(|(c, v)| c * v).sum::<f64>()
    }
}

fn poly_design(data: &LoggedDataset, poly: &PolyFeatureConfig) -> Result<Design> {
    let k = data.context_dim();
    if k == 0 {
        return Err(Error::invalid("first-stage regressions need at least one context coordinate"));
    }
    let m = poly.len(k);
    let mut buf = Vec::with_capacity(data.len() * m);
    let mut q = Vec::with_capacity(m);
    for i in 0..data.len() {
        expand_into(data.context(i), poly, &mut q);
        buf.extend_from_slice(&q);
    }
    Design::new(data.len(), m, buf)
}

/// Cross-validated lasso of `target` on `q(z)` with an intercept.
fn fit_on_contexts(design: &Design, target: &[f64], cfg: &NuisanceConfig, seed: u64) -> Result<LinearPredictor> {
    let mut cv = cfg.cv.clone();
    cv.lasso = LassoOptions {
        fit_intercept: true,
        ..cv.lasso
    };
    let fit = lasso_cv_fit(design, target, &cv, seed)?.fit;
    Ok(LinearPredictor {
        intercept: fit.intercept,
        coef: fit.coefficients,
        poly: cfg.poly,
        lambda: fit.lambda,
        dropped: fit.dropped,
    })
}

/// Fitted `θ̂(z)`: each coordinate is linear in `[1, q(z)]`.
#[derive(Debug, Clone)]
pub struct ThetaHat {
    /// Row `j` holds `[constant, coefficients on q(z)]` for `θ̂_j`.
    pub coef: Vec<Vec<f64>>,
    pub poly: PolyFeatureConfig,
    pub lambda: f64,
    /// Design columns dropped for zero variance, as `(θ coordinate, basis index)`
    /// with basis index 0 the constant.
    pub dropped: Vec<(usize, usize)>,
}

impl ThetaModel for ThetaHat {
    fn dim(&self) -> usize {
        self.coef.len()
    }

    fn theta(&self, z: &[f64]) -> Vec<f64> {
        let mut q = Vec::new();
        expand_into(z, &self.poly, &mut q);
        self.coef
            .iter()
            .map(|c| c[0] + c[1..].iter().zip(&q).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Square-loss fit of `y ≈ ⟨θ(z), φ(a, z)⟩` with `θ_j(z)` linear in `[1, q(z)]`,
/// by cross-validated lasso on the columns `φ_j(a, z)·[1, q(z)]`.
pub fn fit_theta_hat(data: &LoggedDataset, map: &FeatureMap, cfg: &NuisanceConfig, seed: u64) -> Result<ThetaHat> {
    let qd = poly_design(data, &cfg.poly)?;
    let p = map.dim();
    let basis = qd.cols() + 1;
    let constant = map.constant_coordinate();
    // (θ coordinate, basis index) for every design column.
    let columns: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| (0..basis).map(move |t| (j, t)))
        .filter(|&(j, t)| !(Some(j) == constant && t == 0))
        .collect();
    let mut buf = Vec::with_capacity(data.len() * columns.len());
    for i in 0..data.len() {
        let phi = map.eval(data.action(i), data.context(i))?;
        let q = qd.row(i);
        buf.extend(columns.iter().map(|&(j, t)| if t == 0 { phi[j] } else { phi[j] * q[t - 1] }));
    }
    let design = Design::new(data.len(), columns.len(), buf)?;
    let mut cv = cfg.cv.clone();
    cv.lasso.fit_intercept = constant.is_some();
    let fit = lasso_cv_fit(&design, data.outcomes(), &cv, seed)?.fit;

    let mut coef = vec![vec![0.0; basis]; p];
    for (c, &(j, t)) in columns.iter().enumerate() {
        coef[j][t] = fit.coefficients[c];
    }
    if let Some(j) = constant {
        coef[j][0] = fit.intercept;
    }
    Ok(ThetaHat {
        coef,
        poly: cfg.poly,
        lambda: fit.lambda,
        dropped: fit.dropped.iter().map(|&c| columns[c]).collect(),
    })
}

/// Fitted `Σ̂(z)`, one regression per upper-triangular entry.
#[derive(Debug, Clone)]
pub struct SigmaHat {
    p: usize,
    entries: Vec<LinearPredictor>,
}

impl SigmaHat {
    pub fn entry(&self, i: usize, j: usize) -> &LinearPredictor {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[upper_index(self.p, i, j)]
    }
}

fn upper_index(p: usize, i: usize, j: usize) -> usize {
    i * p - i * (i + 1) / 2 + j
}

impl SigmaModel for SigmaHat {
    fn dim(&self) -> usize {
        self.p
    }

    fn sigma(&self, z: &[f64]) -> DMatrix<f64> {
        let mut q = Vec::new();
        expand_into(z, &self.entries[0].poly, &mut q);
        let mut s = DMatrix::zeros(self.p, self.p);
        for i in 0..self.p {
            for j in i..self.p {
                let e = &self.entries[upper_index(self.p, i, j)];
                let v = e.intercept + e.coef.iter().zip(&q).map(|(c, x)| c * x).sum::<f64>();
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

/// Regress `φ_i φ_j` on `q(z)` for every `i ≤ j`.
pub fn fit_sigma_hat(data: &LoggedDataset, map: &FeatureMap, cfg: &NuisanceConfig, seed: u64) -> Result<SigmaHat> {
    let design = poly_design(data, &cfg.poly)?;
    let p = map.dim();
    let phis = (0..data.len())
        .map(|i| map.eval(data.action(i), data.context(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(p * (p + 1) / 2);
    let mut target = vec![0.0; data.len()];
    for i in 0..p {
        for j in i..p {
            for (t, phi) in target.iter_mut().zip(&phis) {
                *t = phi[i] * phi[j];
            }
            entries.push(fit_on_contexts(&design, &target, cfg, seed)?);
        }
    }
    Ok(SigmaHat { p, entries })
}

/// Estimated `Σᴵ(z) = E[w φ(a, z)ᵀ | z]` for instrument vectors `w`.
#[derive(Debug, Clone)]
pub struct InstrumentSigmaHat {
    p: usize,
    entries: Vec<LinearPredictor>,
}

impl InstrumentSigmaHat {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn matrix(&self, z: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.entries[i * self.p + j].eval(z))
    }
}

/// Entrywise regression of `w_i φ_j` on `q(z)`.
pub fn fit_instrument_sigma(
    data: &LoggedDataset,
    instruments: &[Vec<f64>],
    map: &FeatureMap,
    cfg: &NuisanceConfig,
    seed: u64,
) -> Result<InstrumentSigmaHat> {
    let p = map.dim();
    if instruments.len() != data.len() || instruments.iter().any(|w| w.len() != p) {
        return Err(Error::invalid("need one p-dimensional instrument vector per row"));
    }
    let design = poly_design(data, &cfg.poly)?;
    let phis = (0..data.len())
        .map(|i| map.eval(data.action(i), data.context(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(p * p);
    let mut target = vec![0.0; data.len()];
    for i in 0..p {
        for j in 0..p {
            for ((t, phi), w) in target.iter_mut().zip(&phis).zip(instruments) {
                *t = w[i] * phi[j];
            }
            entries.push(fit_on_contexts(&design, &target, cfg, seed)?);
        }
    }
    Ok(InstrumentSigmaHat { p, entries })
}

fn scalar_actions(data: &LoggedDataset) -> Result<Vec<f64>> {
    if data.action_dim() != 1 {
        return Err(Error::DimensionMismatch {
            what: "price (scalar action)",
            expected: 1,
            got: data.action_dim(),
        });
    }
    Ok((0..data.len()).map(|i| data.action(i)[0]).collect())
}

/// Homoskedastic logging model for a scalar price: mean `ĝ(z)` and constant variance `σ̂²`.
#[derive(Debug, Clone)]
pub struct PricingNuisances {
    pub g: LinearPredictor,
    pub sigma2: f64,
}

impl PricingNuisances {
    /// `Σ(z) = [[1, g], [g, σ² + g²]]` for the map `(1, p)`.
    pub fn sigma_matrix(&self, z: &[f64]) -> DMatrix<f64> {
        let g = self.g.eval(z);
        DMatrix::from_row_slice(2, 2, &[1.0, g, g, self.sigma2 + g * g])
    }
}

impl SigmaModel for PricingNuisances {
    fn dim(&self) -> usize {
        2
    }
    fn sigma(&self, z: &[f64]) -> DMatrix<f64> {
        self.sigma_matrix(z)
    }
}

pub fn fit_pricing_nuisances(data: &LoggedDataset, cfg: &NuisanceConfig, seed: u64) -> Result<PricingNuisances> {
    let prices = scalar_actions(data)?;
    let design = poly_design(data, &cfg.poly)?;
    let g = fit_on_contexts(&design, &prices, cfg, seed)?;
    let sigma2 = (0..data.len())
        .map(|i| (prices[i] - g.eval(data.context(i))).powi(2))
        .sum::<f64>()
        / data.len() as f64;
    if sigma2 <= 1e-10 {
        return Err(Error::DegenerateLogging(sigma2));
    }
    Ok(PricingNuisances { g, sigma2 })
}

/// Raw conditional moments `E[p^k | z]`, `k = 1..4`, from the mean and
/// context-free central moments.
pub fn raw_moments(mu1: f64, c2: f64, c3: f64, c4: f64) -> [f64; 4] {
    let mu2 = c2 + mu1 * mu1;
    let mu3 = c3 + 3.0 * mu2 * mu1 - 2.0 * mu1.powi(3);
    let mu4 = c4 + 4.0 * mu3 * mu1 - 6.0 * mu1 * mu1 * mu2 + 3.0 * mu1.powi(4);
    [mu1, mu2, mu3, mu4]
}

/// Price mean model plus context-free central moments of the residual.
#[derive(Debug, Clone)]
pub struct QuadraticMoments {
    pub mu1: LinearPredictor,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl QuadraticMoments {
    pub fn moments(&self, z: &[f64]) -> [f64; 4] {
        raw_moments(self.mu1.eval(z), self.c2, self.c3, self.c4)
    }
}

impl SigmaModel for QuadraticMoments {
    fn dim(&self) -> usize {
        2
    }
    /// `[[μ₂, μ₃], [μ₃, μ₄]]` for the map `(p, p²)`.
    fn sigma(&self, z: &[f64]) -> DMatrix<f64> {
        let [_, m2, m3, m4] = self.moments(z);
        DMatrix::from_row_slice(2, 2, &[m2, m3, m3, m4])
    }
}

pub fn fit_quadratic_moments(data: &LoggedDataset, cfg: &NuisanceConfig, seed: u64) -> Result<QuadraticMoments> {
    let prices = scalar_actions(data)?;
    let design = poly_design(data, &cfg.poly)?;
    let mu1 = fit_on_contexts(&design, &prices, cfg, seed)?;
    let n = data.len() as f64;
    let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
    for i in 0..data.len() {
        let r = prices[i] - mu1.eval(data.context(i));
        let r2 = r * r;
        c2 += r2;
        c3 += r2 * r;
        c4 += r2 * r2;
    }
    let (c2, c3, c4) = (c2 / n, c3 / n, c4 / n);
    if c2 <= 1e-10 {
        return Err(Error::DegenerateLogging(c2));
    }
    Ok(QuadraticMoments { mu1, c2, c3, c4 })
}
