//! Cyclic coordinate-descent lasso on standardized columns, with k-fold
//! cross-validation over a log-spaced penalty path.
//!
//! Everything runs on sufficient statistics (Gram matrix and cross
//! products), so a sweep costs `O(m²)` regardless of `n` and fold training
//! sets are obtained by subtracting the held-out fold from the total.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "design buffer",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged design rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once the largest standardized coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub fit_intercept: bool,
    /// Subgradient optimality gap also required at termination.
    pub kkt_tol: f64,
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
            fit_intercept: true,
            kkt_tol: 1e-9,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the original column scale (zero for dropped columns).
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Column centring used for standardization (zeros without intercept).
    pub center: Vec<f64>,
    /// Column scale used for standardization (zero for dropped columns).
    pub scale: Vec<f64>,
    /// Zero-variance columns excluded from the fit.
    pub dropped: Vec<usize>,
    pub sweeps: usize,
    /// False when `max_iter` sweeps ran out first.
    pub converged: bool,
    /// Penalized objective after each sweep, if requested.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn standardized_coefficients(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.scale)
            .map(|(b, s)| b * s)
            .collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }
}

/// Accumulated cross products over a set of rows, in shifted coordinates.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    sx: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    sy: f64,
    syy: f64,
}

impl Moments {
    fn zeros(m: usize) -> Self {
        Self {
            n: 0.0,
            sx: vec![0.0; m],
            sxx: vec![0.0; m * m],
            sxy: vec![0.0; m],
            sy: 0.0,
            syy: 0.0,
        }
    }

    fn accumulate(&mut self, x: &[f64], shift_x: &[f64], y: f64, buf: &mut Vec<f64>) {
        let m = shift_x.len();
        buf.clear();
        buf.extend(x.iter().zip(shift_x).map(|(v, s)| v - s));
        self.n += 1.0;
        self.sy += y;
        self.syy += y * y;
        for j in 0..m {
            let xj = buf[j];
            self.sx[j] += xj;
            self.sxy[j] += xj * y;
            let row = &mut self.sxx[j * m..(j + 1) * m];
            for k in j..m {
                row[k] += xj * buf[k];
            }
        }
    }

    fn symmetrize(&mut self) {
        let m = self.sx.len();
        for j in 0..m {
            for k in 0..j {
                self.sxx[j * m + k] = self.sxx[k * m + j];
            }
        }
    }

    fn minus(&self, other: &Self) -> Self {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self {
            n: self.n - other.n,
            sx: sub(&self.sx, &other.sx),
            sxx: sub(&self.sxx, &other.sxx),
            sxy: sub(&self.sxy, &other.sxy),
            sy: self.sy - other.sy,
            syy: self.syy - other.syy,
        }
    }

    /// Squared error of `intercept + coefᵀx` over these rows.
    fn sse(&self, coef: &[f64], intercept: f64, shift_x: &[f64], shift_y: f64) -> f64 {
        let m = coef.len();
        let c0 = intercept + coef.iter().zip(shift_x).map(|(b, s)| b * s).sum::<f64>() - shift_y;
        let bsxy: f64 = coef.iter().zip(&self.sxy).map(|(b, v)| b * v).sum();
        let bsx: f64 = coef.iter().zip(&self.sx).map(|(b, v)| b * v).sum();
        let mut quad = 0.0;
        for j in 0..m {
            if coef[j] == 0.0 {
                continue;
            }
            let row = &self.sxx[j * m..(j + 1) * m];
            quad += coef[j] * row.iter().zip(coef).map(|(g, b)| g * b).sum::<f64>();
        }
        (self.syy - 2.0 * c0 * self.sy - 2.0 * bsxy + self.n * c0 * c0 + 2.0 * c0 * bsx + quad).max(0.0)
    }
}

/// Standardized quadratic problem over the retained columns.
struct Problem {
    keep: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    gram: Vec<f64>,
    c: Vec<f64>,
    yy: f64,
    mean_y: f64,
}

impl Problem {
    fn new(mom: &Moments, shift_x: &[f64], shift_y: f64, fit_intercept: bool) -> Self {
        let m = shift_x.len();
        let n = mom.n;
        let mx: Vec<f64> = if fit_intercept {
            mom.sx.iter().map(|s| s / n).collect()
        } else {
            vec![0.0; m]
        };
        let my = if fit_intercept { mom.sy / n } else { 0.0 };
        let cov = |j: usize, k: usize| mom.sxx[j * m + k] / n - mx[j] * mx[k];
        let center: Vec<f64> = (0..m).map(|j| shift_x[j] + mx[j]).collect();
        let mut scale = vec![0.0; m];
        let mut keep = Vec::with_capacity(m);
        for j in 0..m {
            let s = cov(j, j).max(0.0).sqrt();
            if s > 1e-10 * center[j].abs().max(1.0) {
                scale[j] = s;
                keep.push(j);
            }
        }
        let mk = keep.len();
        let mut gram = vec![0.0; mk * mk];
        let mut c = vec![0.0; mk];
        for (a, &j) in keep.iter().enumerate() {
            c[a] = (mom.sxy[j] / n - mx[j] * my) / scale[j];
            for (b, &k) in keep.iter().enumerate() {
                gram[a * mk + b] = if a == b { 1.0 } else { cov(j, k) / (scale[j] * scale[k]) };
            }
        }
        Self {
            keep,
            center: if fit_intercept { center } else { vec![0.0; m] },
            scale,
            gram,
            c,
            yy: (mom.syy / n - my * my).max(0.0),
            mean_y: shift_y + my,
        }
    }

    fn lambda_max(&self) -> f64 {
        self.c.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let mk = beta.len();
        let mut quad = 0.0;
        for a in 0..mk {
            quad += beta[a] * (0..mk).map(|b| self.gram[a * mk + b] * beta[b]).sum::<f64>();
        }
        let lin: f64 = self.c.iter().zip(beta).map(|(c, b)| c * b).sum();
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        0.5 * (self.yy - 2.0 * lin + quad) + lambda * l1
    }

    fn gram_times(&self, beta: &[f64], out: &mut [f64]) {
        let mk = beta.len();
        for a in 0..mk {
            out[a] = (0..mk).map(|b| self.gram[a * mk + b] * beta[b]).sum();
        }
    }

    fn kkt_gap(&self, beta: &[f64], gb: &[f64], lambda: f64) -> f64 {
        beta.iter()
            .zip(&self.c)
            .zip(gb)
            .map(|((b, c), g)| {
                let grad = c - g;
                if *b == 0.0 {
                    (grad.abs() - lambda).max(0.0)
                } else {
                    (grad - lambda * b.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Returns (sweeps, converged).
    fn solve(&self, lambda: f64, beta: &mut [f64], opts: &LassoOptions, trace: &mut Vec<f64>) -> (usize, bool) {
        let mk = beta.len();
        let mut gb = vec![0.0; mk];
        self.gram_times(beta, &mut gb);
        let mut last_sig: Vec<i8> = Vec::new();
        let mut tried: Vec<i8> = Vec::new();
        for sweep in 1..=opts.max_iter {
            if sweep % 64 == 0 {
                self.gram_times(beta, &mut gb);
            }
            let mut max_change: f64 = 0.0;
            for j in 0..mk {
                let gjj = self.gram[j * mk + j];
                let rho = self.c[j] - (gb[j] - gjj * beta[j]);
                let new = soft_threshold(rho, lambda) / gjj;
                let d = new - beta[j];
                if d != 0.0 {
                    for k in 0..mk {
                        gb[k] += d * self.gram[k * mk + j];
                    }
                    beta[j] = new;
                    max_change = max_change.max(d.abs());
                }
            }
            if opts.record_objective {
                trace.push(self.objective(beta, lambda));
            }
            if max_change < opts.tol {
                self.gram_times(beta, &mut gb);
                if self.kkt_gap(beta, &gb, lambda) <= opts.kkt_tol {
                    return (sweep, true);
                }
            }
            let sig: Vec<i8> = beta.iter().map(|b| b.signum() as i8 * (*b != 0.0) as i8).collect();
            if sig == last_sig && sig != tried {
                if self.polish(lambda, beta) {
                    self.gram_times(beta, &mut gb);
                }
                tried = beta.iter().map(|b| b.signum() as i8 * (*b != 0.0) as i8).collect();
            }
            last_sig = sig;
        }
        (opts.max_iter, false)
    }

    /// Feature-sign step: move towards the minimizer of the smooth objective on
    /// the current signed support, stopping at the best zero crossing, until
    /// the signs are consistent. Never increases the objective.
    fn polish(&self, lambda: f64, beta: &mut [f64]) -> bool {
        let mk = beta.len();
        let start = self.objective(beta, lambda);
        let mut current = start;
        for _ in 0..mk {
            let active: Vec<usize> = (0..mk).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                break;
            }
            let na = active.len();
            let g = nalgebra::DMatrix::from_fn(na, na, |a, b| self.gram[active[a] * mk + active[b]]);
            let rhs =
                nalgebra::DVector::from_fn(na, |a, _| self.c[active[a]] - lambda * beta[active[a]].signum());
            let Some(chol) = g.cholesky() else {
                break;
            };
            let x = chol.solve(&rhs);
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
            let consistent = active
                .iter()
                .enumerate()
                .all(|(a, &j)| x[a] != 0.0 && x[a].signum() == beta[j].signum());
            let at = |t: f64, zero: Option<usize>| {
                let mut v = beta.to_vec();
                for (a, &j) in active.iter().enumerate() {
                    v[j] = beta[j] + t * (x[a] - beta[j]);
                }
                if let Some(j) = zero {
                    v[j] = 0.0;
                }
                v
            };
            let mut best = (self.objective(&at(1.0, None), lambda), at(1.0, None));
            if !consistent {
                for (a, &j) in active.iter().enumerate() {
                    if x[a].signum() != beta[j].signum() {
                        let t = beta[j] / (beta[j] - x[a]);
                        let v = at(t, Some(j));
                        let obj = self.objective(&v, lambda);
                        if obj < best.0 {
                            best = (obj, v);
                        }
                    }
                }
            }
            if !(best.0 < current) {
                break;
            }
            current = best.0;
            beta.copy_from_slice(&best.1);
            if consistent {
                break;
            }
        }
        current < start
    }

    fn into_fit(&self, beta: &[f64], lambda: f64, sweeps: usize, converged: bool, trace: Vec<f64>) -> LassoFit {
        let m = self.scale.len();
        let mut coefficients = vec![0.0; m];
        for (a, &j) in self.keep.iter().enumerate() {
            coefficients[j] = beta[a] / self.scale[j];
        }
        let intercept = self.mean_y
            - coefficients
                .iter()
                .zip(&self.center)
                .map(|(b, c)| b * c)
                .sum::<f64>();
        LassoFit {
            coefficients,
            intercept,
            lambda,
            center: self.center.clone(),
            scale: self.scale.clone(),
            dropped: (0..m).filter(|j| !self.keep.contains(j)).collect(),
            sweeps,
            converged,
            objective_trace: trace,
        }
    }
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

fn validate(x: &Design, y: &[f64]) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::invalid("lasso needs n >= 1 and m >= 1"));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "lasso response",
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.iter().chain(&x.data).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in lasso inputs"));
    }
    Ok(())
}

fn shifts(x: &Design, y: &[f64], fit_intercept: bool) -> (Vec<f64>, f64) {
    if !fit_intercept {
        return (vec![0.0; x.cols()], 0.0);
    }
    let n = x.rows() as f64;
    let mut sx = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (s, v) in sx.iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    sx.iter_mut().for_each(|s| *s /= n);
    (sx, y.iter().sum::<f64>() / n)
}

fn full_moments(x: &Design, y: &[f64], shift_x: &[f64], shift_y: f64) -> Moments {
    let mut mom = Moments::zeros(x.cols());
    let mut buf = Vec::with_capacity(x.cols());
    for i in 0..x.rows() {
        mom.accumulate(x.row(i), shift_x, y[i] - shift_y, &mut buf);
    }
    mom.symmetrize();
    mom
}

/// `max_j |(1/n) x̃_jᵀ (y − ȳ)|` on standardized columns: the smallest
/// penalty giving the null model.
pub fn lambda_max(x: &Design, y: &[f64], fit_intercept: bool) -> Result<f64> {
    validate(x, y)?;
    let (sx, sy) = shifts(x, y, fit_intercept);
    let mom = full_moments(x, y, &sx, sy);
    Ok(Problem::new(&mom, &sx, sy, fit_intercept).lambda_max())
}

/// Minimize `(1/2n)‖y − β₀ − X̃β‖² + λ‖β‖₁` over standardized columns `X̃`.
pub fn lasso_fit(x: &Design, y: &[f64], lambda: f64, opts: &LassoOptions) -> Result<LassoFit> {
    validate(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let (sx, sy) = shifts(x, y, opts.fit_intercept);
    let mom = full_moments(x, y, &sx, sy);
    let prob = Problem::new(&mom, &sx, sy, opts.fit_intercept);
    let mut beta = vec![0.0; prob.keep.len()];
    let mut trace = Vec::new();
    let (sweeps, converged) = prob.solve(lambda, &mut beta, opts, &mut trace);
    Ok(prob.into_fit(&beta, lambda, sweeps, converged, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    /// Explicit penalty grid; when absent a log-spaced grid is built from `λ_max`.
    pub lambda_grid: Option<Vec<f64>>,
    pub n_lambdas: usize,
    /// Smallest grid point as a fraction of `λ_max`.
    pub min_ratio: f64,
    pub lasso: LassoOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            lambda_grid: None,
            n_lambdas: 50,
            min_ratio: 1e-3,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoCvFit {
    pub fit: LassoFit,
    /// Grid in descending order.
    pub lambdas: Vec<f64>,
    /// Mean out-of-fold squared error per grid point.
    pub cv_error: Vec<f64>,
    pub selected: usize,
}

/// Log-spaced grid from `lambda_max` down to `min_ratio · lambda_max`.
pub fn log_grid(lambda_max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if lambda_max <= 0.0 || n <= 1 {
        return vec![lambda_max.max(0.0)];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
    (0..n)
        .map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Assign rows to folds by a seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// k-fold cross-validated lasso. Picks the penalty with the smallest mean
/// out-of-fold squared error (ties go to the larger penalty) and refits on
/// all rows.
pub fn lasso_cv_fit(x: &Design, y: &[f64], cv: &CvOptions, seed: u64) -> Result<LassoCvFit> {
    validate(x, y)?;
    if cv.folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if x.rows() < cv.folds {
        return Err(Error::invalid(format!(
            "{} rows cannot be split into {} folds",
            x.rows(),
            cv.folds
        )));
    }
    let opts = &cv.lasso;
    let (sx, sy) = shifts(x, y, opts.fit_intercept);
    let total = full_moments(x, y, &sx, sy);
    let full = Problem::new(&total, &sx, sy, opts.fit_intercept);

    let mut lambdas = match &cv.lambda_grid {
        Some(g) => {
            if g.is_empty() || g.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(Error::invalid("lambda grid must be nonempty, finite and >= 0"));
            }
            g.clone()
        }
        None => log_grid(full.lambda_max(), cv.n_lambdas, cv.min_ratio),
    };
    lambdas.sort_by(|a, b| b.total_cmp(a));

    let fold_of = fold_assignment(x.rows(), cv.folds, seed);
    let mut fold_mom = vec![Moments::zeros(x.cols()); cv.folds];
    let mut buf = Vec::with_capacity(x.cols());
    for i in 0..x.rows() {
        fold_mom[fold_of[i]].accumulate(x.row(i), &sx, y[i] - sy, &mut buf);
    }
    let mut sse = vec![0.0; lambdas.len()];
    let mut scratch = Vec::new();
    for held in &mut fold_mom {
        held.symmetrize();
        let train = total.minus(held);
        let prob = Problem::new(&train, &sx, sy, opts.fit_intercept);
        let mut beta = vec![0.0; prob.keep.len()];
        for (l, &lambda) in lambdas.iter().enumerate() {
            prob.solve(lambda, &mut beta, opts, &mut scratch);
            scratch.clear();
            let fit = prob.into_fit(&beta, lambda, 0, true, Vec::new());
            sse[l] += held.sse(&fit.coefficients, fit.intercept, &sx, sy);
        }
    }
    let n = x.rows() as f64;
    let cv_error: Vec<f64> = sse.iter().map(|s| s / n).collect();
    let mut selected = 0;
    for (l, e) in cv_error.iter().enumerate() {
        if *e < cv_error[selected] {
            selected = l;
        }
    }

    let mut beta = vec![0.0; full.keep.len()];
    let mut trace = Vec::new();
    let mut result = (0, true);
    for &lambda in &lambdas[..=selected] {
        trace.clear();
        result = full.solve(lambda, &mut beta, opts, &mut trace);
    }
    let fit = full.into_fit(&beta, lambdas[selected], result.0, result.1, trace);
    Ok(LassoCvFit {
        fit,
        lambdas,
        cv_error,
        selected,
    })
}
