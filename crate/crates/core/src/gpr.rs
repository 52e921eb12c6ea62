//! Exact Gaussian process regression on scalar inputs with a squared
//! exponential kernel and a constant prior mean.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GprError {
    #[error("need at least two distinct inputs")]
    DegenerateData,
    #[error("inputs and outputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("hyperparameters must be strictly positive and finite")]
    InvalidHyperparameters,
    #[error("covariance matrix is not positive definite even after jitter escalation")]
    CholeskyFailure,
}

/// `σ_f² exp(-(x - x')² / (2 l²))`.
pub fn se_kernel(x: f64, x2: f64, signal_variance: f64, length_scale: f64) -> f64 {
    let d = x - x2;
    signal_variance * (-(d * d) / (2.0 * length_scale * length_scale)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub length_scale: f64,
    /// Observation-noise variance added to the kernel diagonal.
    pub noise: f64,
}

impl Hyperparameters {
    fn validate(&self) -> Result<(), GprError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.signal_variance) && ok(self.length_scale) && ok(self.noise) {
            Ok(())
        } else {
            Err(GprError::InvalidHyperparameters)
        }
    }

    fn to_log(self) -> [f64; 3] {
        [
            self.signal_variance.ln(),
            self.length_scale.ln(),
            self.noise.ln(),
        ]
    }

    fn from_log(v: [f64; 3]) -> Self {
        Self {
            signal_variance: v[0].exp(),
            length_scale: v[1].exp(),
            noise: v[2].exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GprOptions {
    /// Points per axis of the initial log-spaced hyperparameter grid.
    pub grid_points: usize,
    /// Coordinate-descent sweeps after the grid search.
    pub refinements: usize,
    /// Skip the search and use these values.
    pub fixed: Option<Hyperparameters>,
    /// Pin the noise variance at a tiny fixed fraction of the target
    /// variance so the posterior mean reproduces noiseless targets; only
    /// signal variance and length scale are searched.
    pub interpolate: bool,
}

impl Default for GprOptions {
    fn default() -> Self {
        Self {
            grid_points: 5,
            refinements: 50,
            fixed: None,
            interpolate: false,
        }
    }
}

const JITTER_ESCALATIONS: usize = 4;
/// Smallest noise variance the search considers, relative to the target variance.
const NOISE_FLOOR: f64 = 1e-10;
/// Fixed noise variance of the interpolating mode, relative to the target
/// variance; low enough that training targets are reproduced to ~1e-7 even
/// with long length scales.
const INTERPOLATION_NOISE: f64 = 1e-12;

/// Fitted GP: sorted training data, hyperparameters and the Cholesky factor of
/// `K + noise·I`.
#[derive(Debug, Clone)]
pub struct GprModel {
    x: Vec<f64>,
    y: Vec<f64>,
    hyper: Hyperparameters,
    mean: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
}

impl PartialEq for GprModel {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x
            && self.y == other.y
            && self.hyper == other.hyper
            && self.mean == other.mean
    }
}

fn sorted_data(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), GprError> {
    if x.len() != y.len() {
        return Err(GprError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(GprError::NonFinite);
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let distinct = pairs.windows(2).filter(|w| w[0].0 != w[1].0).count() + 1;
    if pairs.len() < 2 || distinct < 2 {
        return Err(GprError::DegenerateData);
    }
    Ok(pairs.into_iter().unzip())
}

fn kernel_matrix(x: &[f64], h: &Hyperparameters) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| {
        se_kernel(x[i], x[j], h.signal_variance, h.length_scale)
    })
}

/// Cholesky of `K + noise·I`, escalating a diagonal jitter on failure.
/// Returns the factor and the effective noise.
fn factor(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64), GprError> {
    let n = k.nrows();
    let base = 1e-10 * k.trace() / n as f64;
    let mut extra = 0.0;
    for attempt in 0..=JITTER_ESCALATIONS + 1 {
        let eff = noise + extra;
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += eff;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, eff));
        }
        extra = base * 10f64.powi(attempt as i32);
    }
    Err(GprError::CholeskyFailure)
}

fn centered(y: &[f64], mean: f64) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|v| v - mean))
}

/// Log marginal likelihood of centered data and its gradient with respect to
/// `(log σ_f², log l, log noise)`.
pub fn log_marginal_likelihood(
    x: &[f64],
    y: &[f64],
    mean: f64,
    hyper: &Hyperparameters,
) -> Result<(f64, [f64; 3]), GprError> {
    hyper.validate()?;
    let n = x.len();
    let kf = kernel_matrix(x, hyper);
    let mut ky = kf.clone();
    for i in 0..n {
        ky[(i, i)] += hyper.noise;
    }
    let chol = Cholesky::new(ky).ok_or(GprError::CholeskyFailure)?;
    let r = centered(y, mean);
    let alpha = chol.solve(&r);
    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let lml =
        -0.5 * r.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // dL/dθ = ½ (αᵀ ∂K α - tr(K⁻¹ ∂K)). The traces go through L⁻¹ rather than
    // an explicit ααᵀ - K⁻¹, which cancels badly when K is nearly singular.
    let linv = chol
        .l_dirty()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(GprError::CholeskyFailure)?;
    let tr_inv = linv.norm_squared();
    let a2 = alpha.norm_squared();
    let inv_l2 = 1.0 / (hyper.length_scale * hyper.length_scale);
    let dl = DMatrix::from_fn(n, n, |i, j| {
        let d = x[i] - x[j];
        kf[(i, j)] * d * d * inv_l2
    });
    let tr_dl = (&linv * &dl).component_mul(&linv).sum();
    let sn = hyper.noise;
    let g = [
        r.dot(&alpha) - sn * a2 - (n as f64 - sn * tr_inv),
        alpha.dot(&(&dl * &alpha)) - tr_dl,
        sn * (a2 - tr_inv),
    ];
    Ok((lml, g.map(|v| 0.5 * v)))
}

fn lml_value(x: &[f64], y: &[f64], mean: f64, h: &Hyperparameters) -> f64 {
    let n = x.len();
    let mut ky = kernel_matrix(x, h);
    for i in 0..n {
        ky[(i, i)] += h.noise;
    }
    match Cholesky::new(ky) {
        Some(chol) => {
            let r = centered(y, mean);
            let quad = r.dot(&chol.solve(&r));
            let log_det: f64 = 2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.ln())
                    .sum::<f64>();
            let v = -0.5 * quad - 0.5 * log_det;
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        }
        None => f64::NEG_INFINITY,
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn search_hyperparameters(x: &[f64], y: &[f64], mean: f64, opts: &GprOptions) -> Hyperparameters {
    let n = y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var } else { 1.0 };
    let range = x[x.len() - 1] - x[0];
    let min_gap = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);

    let floor = if opts.interpolate {
        INTERPOLATION_NOISE
    } else {
        NOISE_FLOOR
    };
    let lower = [
        (1e-4 * scale).ln(),
        (0.25 * min_gap).ln(),
        (floor * scale).ln(),
    ];
    let upper = [
        (1e3 * scale).ln(),
        (10.0 * range).ln(),
        if opts.interpolate {
            lower[2]
        } else {
            (10.0 * scale).ln()
        },
    ];
    let noise_grid = if opts.interpolate {
        vec![floor * scale]
    } else {
        logspace(NOISE_FLOOR * scale, scale, opts.grid_points)
    };

    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for &sf in &logspace(1e-2 * scale, 1e2 * scale, opts.grid_points) {
        for &l in &logspace(min_gap.max(range / 100.0), 2.0 * range, opts.grid_points) {
            for &nz in &noise_grid {
                let h = Hyperparameters {
                    signal_variance: sf,
                    length_scale: l,
                    noise: nz,
                };
                let v = lml_value(x, y, mean, &h);
                if v > best.0 {
                    best = (v, h.to_log());
                }
            }
        }
    }
    if best.0 == f64::NEG_INFINITY {
        best.1 = [scale.ln(), range.ln(), scale.ln()];
    }

    let (mut value, mut theta) = best;
    let mut step = 1.0;
    for _ in 0..opts.refinements {
        let mut improved = false;
        for c in 0..3 {
            for dir in [1.0, -1.0] {
                let mut t = theta;
                t[c] = (t[c] + dir * step).clamp(lower[c], upper[c]);
                if t[c] == theta[c] {
                    continue;
                }
                let v = lml_value(x, y, mean, &Hyperparameters::from_log(t));
                if v > value {
                    value = v;
                    theta = t;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    Hyperparameters::from_log(theta)
}

/// Fits a GP to `(x, y)`; the prior mean is the sample mean of `y` and the
/// hyperparameters maximize the log marginal likelihood unless fixed.
pub fn gpr_fit(x: &[f64], y: &[f64], opts: &GprOptions) -> Result<GprModel, GprError> {
    let (xs, ys) = sorted_data(x, y)?;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let hyper = match opts.fixed {
        Some(h) => h,
        None => search_hyperparameters(&xs, &ys, mean, opts),
    };
    GprModel::build(xs, ys, mean, hyper)
}

impl GprModel {
    /// Fixed hyperparameters, sample-mean prior.
    pub fn with_hyperparameters(
        x: &[f64],
        y: &[f64],
        hyper: Hyperparameters,
    ) -> Result<Self, GprError> {
        gpr_fit(
            x,
            y,
            &GprOptions {
                fixed: Some(hyper),
                ..Default::default()
            },
        )
    }

    /// Rebuilds a model from stored data without re-optimizing.
    pub fn from_parts(
        x: &[f64],
        y: &[f64],
        mean: f64,
        hyper: Hyperparameters,
    ) -> Result<Self, GprError> {
        let (xs, ys) = sorted_data(x, y)?;
        Self::build(xs, ys, mean, hyper)
    }

    fn build(
        x: Vec<f64>,
        y: Vec<f64>,
        mean: f64,
        hyper: Hyperparameters,
    ) -> Result<Self, GprError> {
        hyper.validate()?;
        let k = kernel_matrix(&x, &hyper);
        let (chol, noise) = factor(&k, hyper.noise)?;
        let weights = chol.solve(&centered(&y, mean));
        Ok(Self {
            x,
            y,
            hyper: Hyperparameters { noise, ..hyper },
            mean,
            chol,
            weights,
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.hyper
    }

    /// Effective noise variance, including any jitter that was needed.
    pub fn noise(&self) -> f64 {
        self.hyper.noise
    }

    pub fn prior_mean(&self) -> f64 {
        self.mean
    }

    pub fn train_x(&self) -> &[f64] {
        &self.x
    }

    pub fn train_y(&self) -> &[f64] {
        &self.y
    }

    /// Posterior predictive mean and variance (including observation noise).
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let (mean, latent) = self.predict_latent(x);
        (mean, latent + self.hyper.noise)
    }

    /// Posterior mean and variance of the noise-free latent function.
    pub fn predict_latent(&self, x: f64) -> (f64, f64) {
        let h = &self.hyper;
        let ks = DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .map(|&xi| se_kernel(x, xi, h.signal_variance, h.length_scale)),
        );
        let mean = self.mean + ks.dot(&self.weights);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .unwrap_or_else(|| ks.clone());
        (mean, (h.signal_variance - v.norm_squared()).max(0.0))
    }

    pub fn predict_mean(&self, x: f64) -> f64 {
        let h = &self.hyper;
        self.mean
            + self
                .x
                .iter()
                .zip(self.weights.iter())
                .map(|(&xi, w)| w * se_kernel(x, xi, h.signal_variance, h.length_scale))
                .sum::<f64>()
    }

    pub fn log_marginal_likelihood(&self) -> Result<(f64, [f64; 3]), GprError> {
        log_marginal_likelihood(&self.x, &self.y, self.mean, &self.hyper)
    }
}
