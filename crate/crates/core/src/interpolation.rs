//! Displacement interpolation between consecutive checkpoints and synthesis
//! of full field snapshots from precomputed transport plans.
//!
//! A synthetic snapshot for interval `i` and parameter `α` is
//!
//! ```text
//! u(i, α) = Σ_sign sign · ((1-α) m_left + α m_right) · Σ_lm π_lm δ[proj((1-α) x_l + α y_m)]
//! ```
//!
//! where each sign part of the field carries its own plan `π` and endpoint
//! masses, and `proj` snaps a point to the nearest cell center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{
    field_to_measures_with, DiscreteMeasure, Grid, MeasureError, Sign, SignStrategy, Snapshot,
};
use crate::transport::{sinkhorn, GridCost, SinkhornOptions, TransportError, TransportPlan};

#[derive(Debug, Error)]
pub enum InterpolationError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("transport failed on interval {interval} ({sign} part): {source}")]
    Transport {
        interval: usize,
        sign: &'static str,
        #[source]
        source: TransportError,
    },
    #[error("interpolation parameter {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("interval {index} out of range for {count} intervals")]
    IntervalOutOfRange { index: usize, count: usize },
    #[error("need at least two checkpoints, got {0}")]
    TooFewCheckpoints(usize),
    #[error("plan shape {plan:?} does not match supports {supports:?}")]
    ShapeMismatch {
        plan: (usize, usize),
        supports: (usize, usize),
    },
}

fn check_alpha(alpha: f64) -> Result<(), InterpolationError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(InterpolationError::InvalidAlpha(alpha))
    }
}

/// Atoms `((1-α) x_i + α y_j, π_ij)` before projection; at most `n·m` of them.
pub fn displacement_atoms(
    plan: &TransportPlan,
    src_pts: &[[f64; 2]],
    dst_pts: &[[f64; 2]],
    alpha: f64,
) -> Result<Vec<([f64; 2], f64)>, InterpolationError> {
    check_alpha(alpha)?;
    check_shape(plan, src_pts.len(), dst_pts.len())?;
    let beta = 1.0 - alpha;
    Ok(plan
        .iter()
        .map(|(i, j, w)| {
            let (x, y) = (src_pts[i], dst_pts[j]);
            ([beta * x[0] + alpha * y[0], beta * x[1] + alpha * y[1]], w)
        })
        .collect())
}

fn check_shape(plan: &TransportPlan, n: usize, m: usize) -> Result<(), InterpolationError> {
    if (plan.rows(), plan.cols()) != (n, m) {
        return Err(InterpolationError::ShapeMismatch {
            plan: (plan.rows(), plan.cols()),
            supports: (n, m),
        });
    }
    Ok(())
}

/// Accumulates the projected displacement interpolant into `out` (one slot per
/// grid cell); coincident atoms add up.
fn accumulate_projected(
    plan: &TransportPlan,
    src_pts: &[[f64; 2]],
    dst_pts: &[[f64; 2]],
    alpha: f64,
    grid: &Grid,
    scale: f64,
    out: &mut [f64],
) {
    let beta = 1.0 - alpha;
    for (i, j, w) in plan.iter() {
        let (x, y) = (src_pts[i], dst_pts[j]);
        let l = grid.nearest_cell([beta * x[0] + alpha * y[0], beta * x[1] + alpha * y[1]]);
        out[l] += scale * w;
    }
}

/// McCann interpolant of the plan at `alpha`, projected onto the grid.
pub fn displacement_interpolate(
    plan: &TransportPlan,
    src_pts: &[[f64; 2]],
    dst_pts: &[[f64; 2]],
    alpha: f64,
    grid: &Grid,
) -> Result<DiscreteMeasure, InterpolationError> {
    check_alpha(alpha)?;
    check_shape(plan, src_pts.len(), dst_pts.len())?;
    let mut acc = vec![0.0; grid.len()];
    accumulate_projected(plan, src_pts, dst_pts, alpha, grid, 1.0, &mut acc);
    let support = (0..grid.len()).collect();
    Ok(DiscreteMeasure::from_amounts(support, acc)?)
}

/// Transport of one sign part across an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PartTransport {
    pub sign: Sign,
    /// Mass of this part at the left checkpoint (zero if absent there).
    pub mass_left: f64,
    pub mass_right: f64,
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub plan: TransportPlan,
}

impl PartTransport {
    /// Term `(1-α) m_left + α m_right`.
    pub fn mass_at(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.mass_left + alpha * self.mass_right
    }

    pub fn interpolate(
        &self,
        grid: &Grid,
        alpha: f64,
    ) -> Result<DiscreteMeasure, InterpolationError> {
        displacement_interpolate(
            &self.plan,
            &self.source.points(grid),
            &self.target.points(grid),
            alpha,
            grid,
        )
    }
}

/// Plans and masses for one checkpoint interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalModel {
    pub positive: Option<PartTransport>,
    pub negative: Option<PartTransport>,
}

impl IntervalModel {
    pub fn parts(&self) -> impl Iterator<Item = &PartTransport> {
        self.positive.iter().chain(self.negative.iter())
    }

    pub fn part(&self, sign: Sign) -> Option<&PartTransport> {
        match sign {
            Sign::Positive => self.positive.as_ref(),
            Sign::Negative => self.negative.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationOptions {
    pub sinkhorn: SinkhornOptions,
    pub strategy: SignStrategy,
}

fn nonzero_cells(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(l, _)| l)
        .collect()
}

/// Solves the per-sign transport problems between two checkpoint fields.
///
/// A sign part present at only one endpoint is transported against a uniform
/// measure on the other endpoint's nonzero cells, while its mass fades to zero
/// linearly.
pub fn build_interval(
    left: &[f64],
    right: &[f64],
    grid: &Grid,
    opts: &InterpolationOptions,
    interval: usize,
) -> Result<IntervalModel, InterpolationError> {
    let dl = field_to_measures_with(left, opts.strategy)?;
    let dr = field_to_measures_with(right, opts.strategy)?;
    let mut out = IntervalModel {
        positive: None,
        negative: None,
    };
    for sign in Sign::BOTH {
        let (source, target, mass_left, mass_right) = match (dl.part(sign), dr.part(sign)) {
            (None, None) => continue,
            (Some(s), Some(t)) => (s.clone(), t.clone(), s.mass(), t.mass()),
            (Some(s), None) => (
                s.clone(),
                DiscreteMeasure::uniform(nonzero_cells(right), 1.0)?,
                s.mass(),
                0.0,
            ),
            (None, Some(t)) => (
                DiscreteMeasure::uniform(nonzero_cells(left), 1.0)?,
                t.clone(),
                0.0,
                t.mass(),
            ),
        };
        let wrap = |source| InterpolationError::Transport {
            interval,
            sign: sign.tag(),
            source,
        };
        let cost = GridCost::between(&source, &target, grid).map_err(wrap)?;
        let plan =
            sinkhorn(source.weights(), target.weights(), &cost, &opts.sinkhorn).map_err(wrap)?;
        let part = PartTransport {
            sign,
            mass_left,
            mass_right,
            source,
            target,
            plan,
        };
        match sign {
            Sign::Positive => out.positive = Some(part),
            Sign::Negative => out.negative = Some(part),
        }
    }
    Ok(out)
}

/// Checkpoints plus the precomputed interval plans between them.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationModel {
    grid: Grid,
    checkpoints: Vec<Snapshot>,
    intervals: Vec<IntervalModel>,
}

impl InterpolationModel {
    /// Solves every interval; intervals are independent and run in parallel.
    pub fn build(
        grid: Grid,
        checkpoints: Vec<Snapshot>,
        opts: &InterpolationOptions,
    ) -> Result<Self, InterpolationError> {
        if checkpoints.len() < 2 {
            return Err(InterpolationError::TooFewCheckpoints(checkpoints.len()));
        }
        for c in &checkpoints {
            c.validate(&grid)?;
        }
        let intervals = (0..checkpoints.len() - 1)
            .into_par_iter()
            .map(|i| {
                build_interval(
                    &checkpoints[i].values,
                    &checkpoints[i + 1].values,
                    &grid,
                    opts,
                    i,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            grid,
            checkpoints,
            intervals,
        })
    }

    /// Reassembles a model from stored parts.
    pub fn from_parts(
        grid: Grid,
        checkpoints: Vec<Snapshot>,
        intervals: Vec<IntervalModel>,
    ) -> Result<Self, InterpolationError> {
        if checkpoints.len() < 2 {
            return Err(InterpolationError::TooFewCheckpoints(checkpoints.len()));
        }
        if intervals.len() + 1 != checkpoints.len() {
            return Err(InterpolationError::IntervalOutOfRange {
                index: intervals.len(),
                count: checkpoints.len() - 1,
            });
        }
        for c in &checkpoints {
            c.validate(&grid)?;
        }
        for iv in &intervals {
            for p in iv.parts() {
                p.source.check_grid(&grid)?;
                p.target.check_grid(&grid)?;
                check_shape(&p.plan, p.source.len(), p.target.len())?;
            }
        }
        Ok(Self {
            grid,
            checkpoints,
            intervals,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn checkpoints(&self) -> &[Snapshot] {
        &self.checkpoints
    }
    pub fn intervals(&self) -> &[IntervalModel] {
        &self.intervals
    }
    pub fn n_checkpoints(&self) -> usize {
        self.checkpoints.len()
    }

    fn interval(&self, i: usize) -> Result<&IntervalModel, InterpolationError> {
        self.intervals
            .get(i)
            .ok_or(InterpolationError::IntervalOutOfRange {
                index: i,
                count: self.intervals.len(),
            })
    }

    /// Per-sign projected interpolants and their interpolated masses.
    pub fn synth_parts(
        &self,
        i: usize,
        alpha: f64,
    ) -> Result<Vec<(Sign, f64, DiscreteMeasure)>, InterpolationError> {
        check_alpha(alpha)?;
        let iv = self.interval(i)?;
        iv.parts()
            .map(|p| Ok((p.sign, p.mass_at(alpha), p.interpolate(&self.grid, alpha)?)))
            .collect()
    }

    /// Synthetic snapshot `u_synth(i, α)`.
    pub fn synth_snapshot(&self, i: usize, alpha: f64) -> Result<Snapshot, InterpolationError> {
        check_alpha(alpha)?;
        let iv = self.interval(i)?;
        let mut values = vec![0.0; self.grid.len()];
        for part in iv.parts() {
            let (src, dst) = (
                part.source.points(&self.grid),
                part.target.points(&self.grid),
            );
            let mut acc = vec![0.0; self.grid.len()];
            accumulate_projected(&part.plan, &src, &dst, alpha, &self.grid, 1.0, &mut acc);
            let total: f64 = acc.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let scale = part.sign.factor() * part.mass_at(alpha) / total;
            for (v, a) in values.iter_mut().zip(&acc) {
                *v += scale * a;
            }
        }
        let (t0, t1) = (self.checkpoints[i].time, self.checkpoints[i + 1].time);
        Ok(Snapshot::new(t0 + alpha * (t1 - t0), values))
    }

    /// `S_synth`: checkpoints interleaved with `n_synth` synthetic snapshots per
    /// interval at `α_j = j / (n_synth + 1)`.
    pub fn generate_synthetic_matrix(
        &self,
        n_synth: usize,
    ) -> Result<SyntheticMatrix, InterpolationError> {
        let nc = self.checkpoints.len();
        let denom = (n_synth + 1) as f64;
        let mut labels = Vec::with_capacity(n_synth * (nc - 1) + nc);
        for i in 0..nc - 1 {
            for j in 0..=n_synth {
                labels.push(DictionaryLabel {
                    interval: i,
                    step: j,
                });
            }
        }
        labels.push(DictionaryLabel {
            interval: nc - 2,
            step: n_synth + 1,
        });
        let columns = labels
            .par_iter()
            .map(|lab| {
                if lab.step == 0 {
                    Ok(self.checkpoints[lab.interval].values.clone())
                } else if lab.step == n_synth + 1 {
                    Ok(self.checkpoints[lab.interval + 1].values.clone())
                } else {
                    Ok(self
                        .synth_snapshot(lab.interval, lab.step as f64 / denom)?
                        .values)
                }
            })
            .collect::<Result<Vec<_>, InterpolationError>>()?;
        Ok(SyntheticMatrix {
            n_synth,
            n_checkpoints: nc,
            labels,
            columns,
        })
    }
}

/// Position of a column of the synthetic matrix: interval `i` and step `j`,
/// i.e. `α_local = j / (n_synth + 1)`. The final checkpoint is
/// `(n_c - 2, n_synth + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DictionaryLabel {
    pub interval: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatrix {
    pub n_synth: usize,
    pub n_checkpoints: usize,
    pub labels: Vec<DictionaryLabel>,
    pub columns: Vec<Vec<f64>>,
}

impl SyntheticMatrix {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn alpha_local(&self, label: DictionaryLabel) -> f64 {
        label.step as f64 / (self.n_synth + 1) as f64
    }

    /// `(i + j / (n_synth + 1)) / (n_c - 1)`.
    pub fn alpha_global(&self, label: DictionaryLabel) -> f64 {
        (label.interval as f64 + self.alpha_local(label)) / (self.n_checkpoints - 1) as f64
    }
}
