//! The offline/online reduced-order pipeline: checkpoint selection, interval
//! transport, time-to-α mappings, inference, residual correction and error
//! metrics.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpr::{gpr_fit, GprError, GprModel, GprOptions};
use crate::interpolation::{
    DictionaryLabel, InterpolationError, InterpolationModel, InterpolationOptions, SyntheticMatrix,
};
use crate::measure::{l2_norm, Grid, MeasureError, Snapshot, Trajectory};
use crate::pod::{
    compute_pod, snapshot_matrix, ModeSelector, PodBasis, PodError, DEFAULT_ENERGY_THRESHOLD,
};

/// Relative slack when deciding whether a time lies inside `[0, t_f]` or on a
/// checkpoint.
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RomError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
    #[error("POD failed: {0}")]
    Pod(#[from] PodError),
    #[error("regression failed{context}: {source}")]
    Gpr {
        context: String,
        #[source]
        source: GprError,
    },
    #[error("rounding {n_checkpoints} checkpoints onto {n_snapshots} snapshots produces duplicate indices")]
    TooFewSnapshots {
        n_snapshots: usize,
        n_checkpoints: usize,
    },
    #[error("invalid counts: N_tot = {n_total}, N_c = {n_checkpoints}")]
    InvalidCounts {
        n_total: usize,
        n_checkpoints: usize,
    },
    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfDomain { t: f64, t_final: f64 },
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("model has no residual corrector")]
    NoCorrector,
    #[error("reference snapshot at time {0} has zero norm")]
    ZeroReferenceNorm(f64),
    #[error("no reference snapshot at time {0}")]
    MissingReferenceTime(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

fn gpr_err(context: impl Into<String>) -> impl FnOnce(GprError) -> RomError {
    let context = context.into();
    move |source| RomError::Gpr { context, source }
}

/// Equispaced checkpoint indices `round(i (N_T - 1) / (N_c - 1))`, rounding
/// half away from zero.
pub fn checkpoint_indices(
    n_snapshots: usize,
    n_checkpoints: usize,
) -> Result<Vec<usize>, RomError> {
    if n_checkpoints < 2 || n_checkpoints > n_snapshots {
        return Err(RomError::InvalidCounts {
            n_total: n_snapshots,
            n_checkpoints,
        });
    }
    let span = (n_snapshots - 1) as f64;
    let idx: Vec<usize> = (0..n_checkpoints)
        .map(|i| (i as f64 * span / (n_checkpoints - 1) as f64).round() as usize)
        .collect();
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RomError::TooFewSnapshots {
            n_snapshots,
            n_checkpoints,
        });
    }
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSet {
    pub indices: Vec<usize>,
    pub snapshots: Vec<Snapshot>,
}

impl CheckpointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

pub fn select_checkpoints(
    traj: &Trajectory,
    n_checkpoints: usize,
) -> Result<CheckpointSet, RomError> {
    let indices = checkpoint_indices(traj.len(), n_checkpoints)?;
    let snapshots = indices.iter().map(|&k| traj.snapshot(k)).collect();
    Ok(CheckpointSet { indices, snapshots })
}

/// Synthetic snapshots per interval that keep the total dictionary size at
/// most `n_total`: `floor((N_tot - N_c) / (N_c - 1))`.
pub fn n_synth_for_total(n_total: usize, n_checkpoints: usize) -> Result<usize, RomError> {
    if n_checkpoints < 2 || n_total < n_checkpoints {
        return Err(RomError::InvalidCounts {
            n_total,
            n_checkpoints,
        });
    }
    Ok((n_total - n_checkpoints) / (n_checkpoints - 1))
}

fn check_time(t: f64, t_final: f64) -> Result<f64, RomError> {
    let tol = TIME_TOL * t_final.abs().max(1.0);
    if !(t >= -tol && t <= t_final + tol) {
        return Err(RomError::TimeOutOfDomain { t, t_final });
    }
    Ok(t.clamp(0.0, t_final))
}

/// Linear mapping for equispaced checkpoints: `i = floor(t / Δt_c)` clamped to
/// `N_c - 2`, with `t_f` mapping to `(N_c - 2, 1)`.
pub fn linear_map_time(
    t: f64,
    t_final: f64,
    n_checkpoints: usize,
) -> Result<(usize, f64), RomError> {
    if n_checkpoints < 2 || !(t_final > 0.0) {
        return Err(RomError::InvalidCounts {
            n_total: 0,
            n_checkpoints,
        });
    }
    let t = check_time(t, t_final)?;
    let dtc = t_final / (n_checkpoints - 1) as f64;
    let i = ((t / dtc).floor() as usize).min(n_checkpoints - 2);
    Ok((i, ((t - i as f64 * dtc) / dtc).clamp(0.0, 1.0)))
}

/// Splits `α_global ∈ [0, 1]` into `(i, α_local)`.
pub fn split_alpha_global(alpha_global: f64, n_checkpoints: usize) -> (usize, f64) {
    let scaled = alpha_global.clamp(0.0, 1.0) * (n_checkpoints - 1) as f64;
    let i = (scaled.floor() as usize).min(n_checkpoints - 2);
    (i, (scaled - i as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    #[default]
    Linear,
    #[serde(rename = "minl2")]
    MinL2,
}

impl MappingKind {
    pub fn tag(self) -> &'static str {
        match self {
            MappingKind::Linear => "linear",
            MappingKind::MinL2 => "minl2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    #[default]
    Gpr,
    PiecewiseLinear,
}

/// Regression `t ↦ α_global` fitted on the dictionary argmin samples.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaRegressor {
    Gpr(GprModel),
    /// Sorted, time-unique knots; constant extrapolation.
    PiecewiseLinear {
        times: Vec<f64>,
        alphas: Vec<f64>,
    },
}

impl AlphaRegressor {
    pub fn fit(
        kind: RegressorKind,
        samples: &[AlphaSample],
        gpr: &GprOptions,
    ) -> Result<Self, RomError> {
        if samples.is_empty() {
            return Err(RomError::EmptyDictionary);
        }
        let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
        let alphas: Vec<f64> = samples.iter().map(|s| s.alpha_global).collect();
        match kind {
            RegressorKind::Gpr => Ok(AlphaRegressor::Gpr(
                gpr_fit(&times, &alphas, gpr).map_err(gpr_err(" for the time-to-alpha mapping"))?,
            )),
            RegressorKind::PiecewiseLinear => {
                let mut pairs: Vec<(f64, f64)> = times.into_iter().zip(alphas).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                pairs.dedup_by(|b, a| a.0 == b.0);
                let (times, alphas) = pairs.into_iter().unzip();
                Ok(AlphaRegressor::PiecewiseLinear { times, alphas })
            }
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            AlphaRegressor::Gpr(_) => RegressorKind::Gpr,
            AlphaRegressor::PiecewiseLinear { .. } => RegressorKind::PiecewiseLinear,
        }
    }

    pub fn predict(&self, t: f64) -> f64 {
        match self {
            AlphaRegressor::Gpr(m) => m.predict_mean(t),
            AlphaRegressor::PiecewiseLinear { times, alphas } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    alphas[0]
                } else if k == times.len() {
                    alphas[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    alphas[k - 1] + w * (alphas[k] - alphas[k - 1])
                }
            }
        }
    }
}

/// One dictionary argmin result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSample {
    pub time: f64,
    pub alpha_global: f64,
    pub label: DictionaryLabel,
    pub residual: f64,
}

/// Time → `(interval, α_local)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAlphaMapping {
    checkpoint_times: Vec<f64>,
    fit: MappingFit,
}

#[derive(Debug, Clone, PartialEq)]
enum MappingFit {
    Linear,
    MinL2 {
        regressor: AlphaRegressor,
        samples: Vec<AlphaSample>,
    },
}

impl TimeAlphaMapping {
    /// Piecewise-uniform progression between the actual checkpoint times.
    pub fn linear(checkpoint_times: Vec<f64>) -> Result<Self, RomError> {
        Self::check_times(&checkpoint_times)?;
        Ok(Self {
            checkpoint_times,
            fit: MappingFit::Linear,
        })
    }

    pub fn minl2(
        checkpoint_times: Vec<f64>,
        regressor: AlphaRegressor,
        samples: Vec<AlphaSample>,
    ) -> Result<Self, RomError> {
        Self::check_times(&checkpoint_times)?;
        Ok(Self {
            checkpoint_times,
            fit: MappingFit::MinL2 { regressor, samples },
        })
    }

    fn check_times(times: &[f64]) -> Result<(), RomError> {
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RomError::InvalidCounts {
                n_total: 0,
                n_checkpoints: times.len(),
            });
        }
        Ok(())
    }

    pub fn kind(&self) -> MappingKind {
        match self.fit {
            MappingFit::Linear => MappingKind::Linear,
            MappingFit::MinL2 { .. } => MappingKind::MinL2,
        }
    }

    pub fn checkpoint_times(&self) -> &[f64] {
        &self.checkpoint_times
    }

    pub fn t_final(&self) -> f64 {
        *self
            .checkpoint_times
            .last()
            .expect("at least two checkpoints")
    }

    pub fn regressor(&self) -> Option<&AlphaRegressor> {
        match &self.fit {
            MappingFit::MinL2 { regressor, .. } => Some(regressor),
            MappingFit::Linear => None,
        }
    }

    /// Dictionary argmin samples the regressor was fitted on.
    pub fn samples(&self) -> &[AlphaSample] {
        match &self.fit {
            MappingFit::MinL2 { samples, .. } => samples,
            MappingFit::Linear => &[],
        }
    }

    fn n_checkpoints(&self) -> usize {
        self.checkpoint_times.len()
    }

    /// Checkpoint hit: `(i, 0)` for interior checkpoints, `(N_c - 2, 1)` for
    /// the last one.
    fn checkpoint_hit(&self, t: f64) -> Option<(usize, f64)> {
        let tol = TIME_TOL * self.t_final().abs().max(1.0);
        let nc = self.n_checkpoints();
        let k = self
            .checkpoint_times
            .iter()
            .position(|&c| (c - t).abs() <= tol)?;
        Some(if k == nc - 1 { (nc - 2, 1.0) } else { (k, 0.0) })
    }

    /// Regressed `α̃_global(t)` clamped to `[0, 1]`, or the linear progression.
    pub fn alpha_global(&self, t: f64) -> Result<f64, RomError> {
        let (i, a) = self.map_time(t)?;
        Ok((i as f64 + a) / (self.n_checkpoints() - 1) as f64)
    }

    pub fn map_time(&self, t: f64) -> Result<(usize, f64), RomError> {
        let t = check_time(t, self.t_final())?;
        if let Some(hit) = self.checkpoint_hit(t) {
            return Ok(hit);
        }
        let nc = self.n_checkpoints();
        match &self.fit {
            MappingFit::Linear => {
                let times = &self.checkpoint_times;
                let i = times
                    .partition_point(|&c| c <= t)
                    .saturating_sub(1)
                    .min(nc - 2);
                Ok((
                    i,
                    ((t - times[i]) / (times[i + 1] - times[i])).clamp(0.0, 1.0),
                ))
            }
            MappingFit::MinL2 { regressor, .. } => {
                Ok(split_alpha_global(regressor.predict(t).clamp(0.0, 1.0), nc))
            }
        }
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dictionary argmin of `‖u - S_synth[:, c]‖₂` over columns; ties go to the
/// lexicographically smallest label.
pub fn dictionary_argmin(
    dict: &SyntheticMatrix,
    u: &[f64],
) -> Result<(DictionaryLabel, f64), RomError> {
    let mut best: Option<(DictionaryLabel, f64)> = None;
    for (label, col) in dict.labels.iter().zip(&dict.columns) {
        if col.len() != u.len() {
            return Err(RomError::ShapeMismatch(format!(
                "dictionary column of length {} vs snapshot {}",
                col.len(),
                u.len()
            )));
        }
        let r = l2_distance(u, col);
        match best {
            Some((bl, br)) if r > br || (r == br && bl <= *label) => {}
            _ => best = Some((*label, r)),
        }
    }
    best.ok_or(RomError::EmptyDictionary)
}

/// Per-snapshot dictionary argmin for every snapshot of `traj`.
pub fn dictionary_alphas(
    dict: &SyntheticMatrix,
    traj: &Trajectory,
) -> Result<Vec<AlphaSample>, RomError> {
    if dict.is_empty() {
        return Err(RomError::EmptyDictionary);
    }
    (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let (label, residual) = dictionary_argmin(dict, traj.field(k))?;
            Ok(AlphaSample {
                time: traj.time(k),
                alpha_global: dict.alpha_global(label),
                label,
                residual,
            })
        })
        .collect()
}

/// MinL2 mapping: dictionary argmin per training snapshot, then a 1D
/// regression `t ↦ α̃_global`.
pub fn fit_minl2_mapping(
    model: &InterpolationModel,
    traj: &Trajectory,
    n_synth: usize,
    regressor: RegressorKind,
    gpr: &GprOptions,
) -> Result<TimeAlphaMapping, RomError> {
    let dict = model.generate_synthetic_matrix(n_synth)?;
    let samples = dictionary_alphas(&dict, traj)?;
    let reg = AlphaRegressor::fit(regressor, &samples, gpr)?;
    let times = model.checkpoints().iter().map(|c| c.time).collect();
    TimeAlphaMapping::minl2(times, reg, samples)
}

/// POD of the training residuals with one GP per retained coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCorrector {
    pub basis: PodBasis,
    pub regressors: Vec<CoefficientRegressor>,
    /// GP inputs are `t / time_scale`.
    pub time_scale: f64,
}

/// GP on standardized targets: `coef = offset + scale · gp(t / time_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRegressor {
    pub gp: GprModel,
    pub offset: f64,
    pub scale: f64,
}

impl ResidualCorrector {
    /// `times[k]` labels `residuals[k]`.
    pub fn fit(
        times: &[f64],
        residuals: &[Vec<f64>],
        pod_threshold: f64,
        gpr: &GprOptions,
    ) -> Result<Self, RomError> {
        if times.len() != residuals.len() {
            return Err(RomError::ShapeMismatch(format!(
                "{} times for {} residuals",
                times.len(),
                residuals.len()
            )));
        }
        let s = snapshot_matrix(residuals)?;
        let basis = compute_pod(&s, ModeSelector::Energy(pod_threshold))?;
        let time_scale = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let time_scale = if time_scale > 0.0 { time_scale } else { 1.0 };
        let x: Vec<f64> = times.iter().map(|t| t / time_scale).collect();
        // Residuals are deterministic: the regressors interpolate them.
        let gpr = &GprOptions {
            interpolate: true,
            ..*gpr
        };
        let coeffs: Vec<Vec<f64>> = residuals
            .iter()
            .map(|r| basis.project(r))
            .collect::<Result<_, _>>()?;
        let regressors = (0..basis.n_modes())
            .into_par_iter()
            .map(|r| {
                let y: Vec<f64> = coeffs.iter().map(|c| c[r]).collect();
                let n = y.len() as f64;
                let offset = y.iter().sum::<f64>() / n;
                let sd = (y.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / n).sqrt();
                let scale = if sd > 0.0 { sd } else { 1.0 };
                let z: Vec<f64> = y.iter().map(|v| (v - offset) / scale).collect();
                let gp = gpr_fit(&x, &z, gpr)
                    .map_err(gpr_err(format!(" for residual coefficient {r}")))?;
                Ok(CoefficientRegressor { gp, offset, scale })
            })
            .collect::<Result<Vec<_>, RomError>>()?;
        Ok(Self {
            basis,
            regressors,
            time_scale,
        })
    }

    /// Predicted reduced coefficients `𝒢(t)`.
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        let x = t / self.time_scale;
        self.regressors
            .iter()
            .map(|r| r.offset + r.scale * r.gp.predict_mean(x))
            .collect()
    }

    /// Full-field correction `U_r 𝒢(t)`.
    pub fn correction(&self, t: f64) -> Result<Vec<f64>, RomError> {
        if self.regressors.is_empty() {
            return Ok(vec![0.0; self.basis.dim()]);
        }
        Ok(self.basis.reconstruct(&self.coefficients(t))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub n_checkpoints: usize,
    pub interpolation: InterpolationOptions,
    pub mapping: MappingKind,
    pub regressor: RegressorKind,
    /// Synthetic snapshots per interval in the MinL2 dictionary.
    pub n_synth: usize,
    pub correction: bool,
    pub pod_threshold: f64,
    pub gpr: GprOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            n_checkpoints: 2,
            interpolation: InterpolationOptions::default(),
            mapping: MappingKind::Linear,
            regressor: RegressorKind::Gpr,
            n_synth: 8,
            correction: false,
            pod_threshold: DEFAULT_ENERGY_THRESHOLD,
            gpr: GprOptions::default(),
        }
    }
}

/// A trained reduced-order model.
#[derive(Debug, Clone, PartialEq)]
pub struct RomModel {
    pub checkpoint_indices: Vec<usize>,
    pub interpolation: InterpolationModel,
    pub mapping: TimeAlphaMapping,
    pub corrector: Option<ResidualCorrector>,
    pub options: TrainOptions,
}

/// Relative L2 norm `‖û - u‖₂ / ‖u‖₂`.
pub fn relative_l2(reference: &[f64], candidate: &[f64]) -> Option<f64> {
    let norm = l2_norm(reference);
    if norm == 0.0 || reference.len() != candidate.len() {
        return None;
    }
    Some(l2_distance(reference, candidate) / norm)
}

/// Wall-clock time spent in each offline stage of [`train_timed`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainTimings {
    /// Checkpoint selection and interval transport plans.
    pub transport: Duration,
    /// Time-to-α mapping, including the MinL2 dictionary.
    pub mapping: Duration,
    /// Training residuals, their POD and the coefficient regressors.
    pub correction: Duration,
}

impl TrainTimings {
    pub fn total(&self) -> Duration {
        self.transport + self.mapping + self.correction
    }

    /// `(stage, seconds, percent of total)` rows.
    pub fn breakdown(&self) -> [(&'static str, f64, f64); 3] {
        let total = self.total().as_secs_f64();
        let pct = |d: Duration| {
            if total > 0.0 {
                100.0 * d.as_secs_f64() / total
            } else {
                0.0
            }
        };
        [
            (
                "transport",
                self.transport.as_secs_f64(),
                pct(self.transport),
            ),
            ("mapping", self.mapping.as_secs_f64(), pct(self.mapping)),
            (
                "correction",
                self.correction.as_secs_f64(),
                pct(self.correction),
            ),
        ]
    }
}

/// Offline stage: checkpoints, interval plans, mapping and optional corrector.
pub fn train(traj: &Trajectory, opts: &TrainOptions) -> Result<RomModel, RomError> {
    train_timed(traj, opts).map(|(m, _)| m)
}

pub fn train_timed(
    traj: &Trajectory,
    opts: &TrainOptions,
) -> Result<(RomModel, TrainTimings), RomError> {
    let mut timings = TrainTimings::default();
    let clock = Instant::now();
    let cps = select_checkpoints(traj, opts.n_checkpoints)?;
    let times = cps.times();
    let interpolation =
        InterpolationModel::build(*traj.grid(), cps.snapshots, &opts.interpolation)?;
    timings.transport = clock.elapsed();
    let clock = Instant::now();
    let mapping = match opts.mapping {
        MappingKind::Linear => TimeAlphaMapping::linear(times)?,
        MappingKind::MinL2 => fit_minl2_mapping(
            &interpolation,
            traj,
            opts.n_synth,
            opts.regressor,
            &opts.gpr,
        )?,
    };
    timings.mapping = clock.elapsed();
    let clock = Instant::now();
    let mut model = RomModel {
        checkpoint_indices: cps.indices,
        interpolation,
        mapping,
        corrector: None,
        options: *opts,
    };
    if opts.correction {
        let residuals = (0..traj.len())
            .into_par_iter()
            .map(|k| {
                let synth = model.infer(traj.time(k))?;
                Ok(traj
                    .field(k)
                    .iter()
                    .zip(&synth.values)
                    .map(|(u, s)| u - s)
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>, RomError>>()?;
        let times: Vec<f64> = (0..traj.len()).map(|k| traj.time(k)).collect();
        model.corrector = Some(ResidualCorrector::fit(
            &times,
            &residuals,
            opts.pod_threshold,
            &opts.gpr,
        )?);
    }
    timings.correction = clock.elapsed();
    Ok((model, timings))
}

impl RomModel {
    pub fn grid(&self) -> &Grid {
        self.interpolation.grid()
    }

    pub fn t_final(&self) -> f64 {
        self.mapping.t_final()
    }

    pub fn n_checkpoints(&self) -> usize {
        self.interpolation.n_checkpoints()
    }

    /// Online stage: `u_synth(𝓕(t))` from the stored plans.
    pub fn infer(&self, t: f64) -> Result<Snapshot, RomError> {
        let (i, alpha) = self.mapping.map_time(t)?;
        let mut s = self.interpolation.synth_snapshot(i, alpha)?;
        s.time = t;
        Ok(s)
    }

    /// `infer(t) + U_r 𝒢(t)`.
    pub fn infer_corrected(&self, t: f64) -> Result<Snapshot, RomError> {
        let corrector = self.corrector.as_ref().ok_or(RomError::NoCorrector)?;
        let mut s = self.infer(t)?;
        for (v, c) in s.values.iter_mut().zip(corrector.correction(t)?) {
            *v += c;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Disc,
    Interp,
    Gen,
    Proj,
}

impl ErrorKind {
    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Disc => "disc",
            ErrorKind::Interp => "interp",
            ErrorKind::Gen => "gen",
            ErrorKind::Proj => "proj",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub kind: ErrorKind,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorReport {
    pub fn mean(&self) -> f64 {
        if self.errors.is_empty() {
            return f64::NAN;
        }
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.errors.iter().copied().fold(f64::NAN, f64::max)
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Relative L2 errors of `candidate(t)` against the reference snapshot at each
/// time in `times` (which must be save times of `reference`).
pub fn error_metrics<F>(
    kind: ErrorKind,
    reference: &Trajectory,
    times: &[f64],
    candidate: F,
) -> Result<ErrorReport, RomError>
where
    F: Fn(f64) -> Result<Vec<f64>, RomError> + Sync,
{
    let errors = times
        .par_iter()
        .map(|&t| {
            let k = reference
                .index_of_time(t)
                .ok_or(RomError::MissingReferenceTime(t))?;
            let u = candidate(t)?;
            if u.len() != reference.grid().len() {
                return Err(RomError::ShapeMismatch(format!(
                    "candidate of length {} on a grid of {}",
                    u.len(),
                    reference.grid().len()
                )));
            }
            relative_l2(reference.field(k), &u).ok_or(RomError::ZeroReferenceNorm(t))
        })
        .collect::<Result<Vec<f64>, RomError>>()?;
    Ok(ErrorReport {
        kind,
        times: times.to_vec(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_index_examples() {
        assert_eq!(checkpoint_indices(5, 2).unwrap(), vec![0, 4]);
        assert_eq!(checkpoint_indices(5, 3).unwrap(), vec![0, 2, 4]);
        assert_eq!(checkpoint_indices(4, 3).unwrap(), vec![0, 2, 3]);
        assert_eq!(checkpoint_indices(65, 17).unwrap().len(), 17);
        assert!(matches!(
            checkpoint_indices(5, 1),
            Err(RomError::InvalidCounts { .. })
        ));
        assert!(matches!(
            checkpoint_indices(3, 4),
            Err(RomError::InvalidCounts { .. })
        ));
    }

    #[test]
    fn n_synth_examples() {
        assert_eq!(n_synth_for_total(1021, 2).unwrap(), 1019);
        assert_eq!(n_synth_for_total(1021, 11).unwrap(), 101);
        assert_eq!(n_synth_for_total(7, 7).unwrap(), 0);
        assert!(matches!(
            n_synth_for_total(3, 5),
            Err(RomError::InvalidCounts { .. })
        ));
    }

    #[test]
    fn linear_map_examples() {
        assert_eq!(linear_map_time(0.0, 1.0, 5).unwrap(), (0, 0.0));
        assert_eq!(linear_map_time(1.0, 1.0, 5).unwrap(), (3, 1.0));
        assert_eq!(linear_map_time(0.5, 2.0, 3).unwrap(), (0, 0.5));
        assert!(matches!(
            linear_map_time(2.5, 2.0, 3),
            Err(RomError::TimeOutOfDomain { .. })
        ));
        assert!(matches!(
            linear_map_time(-0.1, 2.0, 3),
            Err(RomError::TimeOutOfDomain { .. })
        ));
    }

    #[test]
    fn alpha_split_examples() {
        assert_eq!(split_alpha_global(0.5, 3), (1, 0.0));
        assert_eq!(split_alpha_global(1.0, 3), (1, 1.0));
        assert_eq!(split_alpha_global(1.0, 7), (5, 1.0));
        assert_eq!(split_alpha_global(0.25, 3), (0, 0.5));
        assert_eq!(split_alpha_global(-0.2, 3), (0, 0.0));
    }

    #[test]
    fn linear_mapping_uses_actual_checkpoint_times() {
        // N_T = 4, N_c = 3 gives indices {0, 2, 3}: unequal intervals.
        let m = TimeAlphaMapping::linear(vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.map_time(0.0).unwrap(), (0, 0.0));
        assert_eq!(m.map_time(1.0).unwrap(), (0, 0.5));
        assert_eq!(m.map_time(2.0).unwrap(), (1, 0.0));
        assert_eq!(m.map_time(2.5).unwrap(), (1, 0.5));
        assert_eq!(m.map_time(3.0).unwrap(), (1, 1.0));
    }

    #[test]
    fn minl2_mapping_clamps_and_anchors() {
        let reg = AlphaRegressor::PiecewiseLinear {
            times: vec![0.0, 1.0, 2.0],
            alphas: vec![-0.3, 0.9, 1.4],
        };
        let m = TimeAlphaMapping::minl2(vec![0.0, 1.0, 2.0], reg, vec![]).unwrap();
        assert_eq!(m.map_time(0.0).unwrap(), (0, 0.0));
        assert_eq!(m.map_time(1.0).unwrap(), (1, 0.0));
        assert_eq!(m.map_time(2.0).unwrap(), (1, 1.0));
        assert_eq!(m.map_time(0.25).unwrap(), (0, 0.0));
        assert_eq!(m.map_time(1.5).unwrap(), (1, 1.0));
        let (i, a) = m.map_time(0.5).unwrap();
        assert_eq!(i, 0);
        assert!((a - 0.6).abs() < 1e-12);
    }

    #[test]
    fn piecewise_linear_regressor() {
        let samples: Vec<AlphaSample> = [(0.0, 0.0), (1.0, 0.5), (1.0, 0.7), (3.0, 1.0)]
            .iter()
            .map(|&(time, alpha_global)| AlphaSample {
                time,
                alpha_global,
                label: DictionaryLabel {
                    interval: 0,
                    step: 0,
                },
                residual: 0.0,
            })
            .collect();
        let r = AlphaRegressor::fit(
            RegressorKind::PiecewiseLinear,
            &samples,
            &GprOptions::default(),
        )
        .unwrap();
        assert_eq!(r.predict(-1.0), 0.0);
        assert_eq!(r.predict(0.5), 0.25);
        assert_eq!(r.predict(2.0), 0.75);
        assert_eq!(r.predict(5.0), 1.0);
    }

    #[test]
    fn relative_l2_examples() {
        assert_eq!(relative_l2(&[1.0, 0.0], &[1.0, 0.0]), Some(0.0));
        assert_eq!(relative_l2(&[1.0, 0.0], &[0.0, 0.0]), Some(1.0));
        assert_eq!(relative_l2(&[1.0, 0.0], &[0.0, 1.0]), Some(2f64.sqrt()));
        assert_eq!(relative_l2(&[0.0, 0.0], &[0.0, 1.0]), None);
    }

    #[test]
    fn corrector_on_zero_residuals_is_zero() {
        let times = [0.0, 0.5, 1.0];
        let residuals = vec![vec![0.0; 4]; 3];
        let c = ResidualCorrector::fit(&times, &residuals, 0.9999, &GprOptions::default()).unwrap();
        assert_eq!(c.basis.n_modes(), 0);
        assert!(c.correction(0.3).unwrap().iter().all(|v| *v == 0.0));
    }
}
