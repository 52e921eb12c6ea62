//! Grid geometry and the conversion between scalar fields and normalized
//! discrete measures.
//!
//! Fields live on a uniform 2D cell-centered grid and are stored as flat
//! vectors with `x` varying fastest: `l = iz * nx + ix`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the weight sum of every constructed [`DiscreteMeasure`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is identically zero and cannot be normalized")]
    AllZeroField,
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("field length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("support index {index} outside grid of {cells} cells")]
    IndexOutOfGrid { index: usize, cells: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("field has negative values but the nonnegative strategy was requested")]
    NegativeValues,
}

/// Uniform cell-centered 2D grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    nz: usize,
    hx: f64,
    hz: f64,
    x0: f64,
    z0: f64,
}

impl Grid {
    /// `origin` is the center of cell `(0, 0)`.
    pub fn new(
        nx: usize,
        nz: usize,
        hx: f64,
        hz: f64,
        origin: (f64, f64),
    ) -> Result<Self, MeasureError> {
        if nx == 0 || nz == 0 {
            return Err(MeasureError::InvalidGrid(format!(
                "cell counts must be positive, got {nx}x{nz}"
            )));
        }
        if !(hx > 0.0 && hz > 0.0 && hx.is_finite() && hz.is_finite()) {
            return Err(MeasureError::InvalidGrid(format!(
                "spacing must be positive, got ({hx}, {hz})"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(MeasureError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            nx,
            nz,
            hx,
            hz,
            x0: origin.0,
            z0: origin.1,
        })
    }

    /// Unit square `[0,1]²` split into `nx × nz` cells.
    pub fn unit_square(nx: usize, nz: usize) -> Result<Self, MeasureError> {
        let hx = 1.0 / nx.max(1) as f64;
        let hz = 1.0 / nz.max(1) as f64;
        Self::new(nx, nz, hx, hz, (0.5 * hx, 0.5 * hz))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hz(&self) -> f64 {
        self.hz
    }
    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.z0)
    }

    /// Number of cells `N_h`.
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    pub fn coords(&self, l: usize) -> (usize, usize) {
        (l % self.nx, l / self.nx)
    }

    pub fn x_center(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.hx
    }

    pub fn z_center(&self, iz: usize) -> f64 {
        self.z0 + iz as f64 * self.hz
    }

    pub fn cell_center(&self, l: usize) -> [f64; 2] {
        let (ix, iz) = self.coords(l);
        [self.x_center(ix), self.z_center(iz)]
    }

    /// Index of the cell whose center is nearest to `p`. Points outside the
    /// bounding box clamp to the boundary cell.
    pub fn nearest_cell(&self, p: [f64; 2]) -> usize {
        let ix = nearest_axis(p[0], self.x0, self.hx, self.nx);
        let iz = nearest_axis(p[1], self.z0, self.hz, self.nz);
        self.index(ix, iz)
    }

    pub fn check_index(&self, index: usize) -> Result<(), MeasureError> {
        if index < self.len() {
            Ok(())
        } else {
            Err(MeasureError::IndexOutOfGrid {
                index,
                cells: self.len(),
            })
        }
    }
}

fn nearest_axis(coord: f64, origin: f64, h: f64, n: usize) -> usize {
    let s = ((coord - origin) / h).round();
    if s.is_nan() || s <= 0.0 {
        0
    } else if s >= (n - 1) as f64 {
        n - 1
    } else {
        s as usize
    }
}

/// One discretized field `u_h(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(time: f64, values: Vec<f64>) -> Self {
        Self { time, values }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), MeasureError> {
        if self.values.len() != grid.len() {
            return Err(MeasureError::LengthMismatch {
                expected: grid.len(),
                got: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniformly saved trajectory: snapshot `k` sits at time `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    dt: f64,
    fields: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Grid, dt: f64, fields: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MeasureError::InvalidGrid(format!(
                "save interval must be positive, got {dt}"
            )));
        }
        if fields.is_empty() {
            return Err(MeasureError::InvalidGrid(
                "trajectory has no snapshots".into(),
            ));
        }
        for f in &fields {
            if f.len() != grid.len() {
                return Err(MeasureError::LengthMismatch {
                    expected: grid.len(),
                    got: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(MeasureError::NonFinite);
            }
        }
        Ok(Self { grid, dt, fields })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn snapshot(&self, k: usize) -> Snapshot {
        Snapshot::new(self.time(k), self.fields[k].clone())
    }

    pub fn snapshots(&self) -> impl Iterator<Item = Snapshot> + '_ {
        (0..self.len()).map(|k| self.snapshot(k))
    }

    /// Index of the snapshot saved at time `t`, if `t` falls on a save point.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let s = t / self.dt;
        let k = s.round();
        if k < 0.0 || (s - k).abs() > 1e-9 * s.abs().max(1.0) {
            return None;
        }
        let k = k as usize;
        (k < self.len()).then_some(k)
    }
}

/// Normalized nonnegative weights on a subset of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<usize>,
    weights: Vec<f64>,
    mass: f64,
}

impl DiscreteMeasure {
    /// Builds a measure from raw nonnegative amounts; zero entries are dropped
    /// and the rest normalized. `mass` records the pre-normalization total.
    pub fn from_amounts(support: Vec<usize>, amounts: Vec<f64>) -> Result<Self, MeasureError> {
        if support.len() != amounts.len() {
            return Err(MeasureError::InvalidMeasure(
                "support and weight lengths differ".into(),
            ));
        }
        if amounts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MeasureError::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let mut pairs: Vec<(usize, f64)> = support
            .into_iter()
            .zip(amounts)
            .filter(|(_, w)| *w > 0.0)
            .collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MeasureError::InvalidMeasure(
                "duplicate support index".into(),
            ));
        }
        let mass: f64 = pairs.iter().map(|p| p.1).sum();
        if mass <= 0.0 {
            return Err(MeasureError::AllZeroField);
        }
        let (support, weights) = pairs.into_iter().map(|(l, w)| (l, w / mass)).unzip();
        Ok(Self {
            support,
            weights,
            mass,
        })
    }

    /// Restores a measure from already-normalized parts (e.g. when loading).
    pub fn from_parts(
        support: Vec<usize>,
        weights: Vec<f64>,
        mass: f64,
    ) -> Result<Self, MeasureError> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(MeasureError::InvalidMeasure(
                "support and weights must be non-empty and equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(MeasureError::InvalidMeasure(
                "weights must be strictly positive".into(),
            ));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MeasureError::InvalidMeasure("mass must be positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::InvalidMeasure(format!(
                "weights sum to {sum}"
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::InvalidMeasure(
                "support must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            support,
            weights,
            mass,
        })
    }

    /// Uniform weights on `support` with the given mass.
    pub fn uniform(mut support: Vec<usize>, mass: f64) -> Result<Self, MeasureError> {
        support.sort_unstable();
        support.dedup();
        let n = support.len();
        Self::from_amounts(support, vec![mass / n.max(1) as f64; n])
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn points(&self, grid: &Grid) -> Vec<[f64; 2]> {
        self.support.iter().map(|&l| grid.cell_center(l)).collect()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<(), MeasureError> {
        match self.support.last() {
            Some(&l) => grid.check_index(l),
            None => Ok(()),
        }
    }

    /// Dense field `mass * weights` on the grid.
    pub fn to_field(&self, grid: &Grid) -> Result<Vec<f64>, MeasureError> {
        self.check_grid(grid)?;
        let mut out = vec![0.0; grid.len()];
        for (&l, &w) in self.support.iter().zip(&self.weights) {
            out[l] = self.mass * w;
        }
        Ok(out)
    }

    /// Total-variation style L1 distance between the weight vectors.
    pub fn l1_distance(&self, other: &DiscreteMeasure, grid: &Grid) -> Result<f64, MeasureError> {
        let mut diff = vec![0.0; grid.len()];
        self.check_grid(grid)?;
        other.check_grid(grid)?;
        for (&l, &w) in self.support.iter().zip(&self.weights) {
            diff[l] += w;
        }
        for (&l, &w) in other.support.iter().zip(&other.weights) {
            diff[l] -= w;
        }
        Ok(diff.iter().map(|d| d.abs()).sum())
    }
}

/// Positive and negative parts of a signed field, each normalized separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDecomposition {
    pub positive: Option<DiscreteMeasure>,
    pub negative: Option<DiscreteMeasure>,
}

impl SignedDecomposition {
    pub fn part(&self, sign: Sign) -> Option<&DiscreteMeasure> {
        match sign {
            Sign::Positive => self.positive.as_ref(),
            Sign::Negative => self.negative.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Positive, Sign::Negative];

    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Sign::Positive => "pos",
            Sign::Negative => "neg",
        }
    }
}

/// How a scalar field is turned into probability measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignStrategy {
    /// Field must be nonnegative; it is normalized to unit mass.
    Nonnegative,
    /// Positive and negative parts are normalized and transported separately.
    #[default]
    Split,
}

/// Splits `values` into normalized positive and negative measures.
pub fn field_to_measures(values: &[f64]) -> Result<SignedDecomposition, MeasureError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MeasureError::NonFinite);
    }
    let part = |sign: f64| -> Option<DiscreteMeasure> {
        let (support, amounts): (Vec<usize>, Vec<f64>) = values
            .iter()
            .enumerate()
            .filter_map(|(l, &v)| {
                let a = sign * v;
                (a > 0.0).then_some((l, a))
            })
            .unzip();
        if support.is_empty() {
            None
        } else {
            DiscreteMeasure::from_amounts(support, amounts).ok()
        }
    };
    let positive = part(1.0);
    let negative = part(-1.0);
    if positive.is_none() && negative.is_none() {
        return Err(MeasureError::AllZeroField);
    }
    Ok(SignedDecomposition { positive, negative })
}

/// Like [`field_to_measures`] but enforces `strategy`.
pub fn field_to_measures_with(
    values: &[f64],
    strategy: SignStrategy,
) -> Result<SignedDecomposition, MeasureError> {
    if strategy == SignStrategy::Nonnegative && values.iter().any(|&v| v < 0.0) {
        return Err(MeasureError::NegativeValues);
    }
    field_to_measures(values)
}

/// Inverse of [`field_to_measures`].
pub fn measures_to_field(
    d: &SignedDecomposition,
    grid: &Grid,
    time: f64,
) -> Result<Snapshot, MeasureError> {
    let mut values = vec![0.0; grid.len()];
    for sign in Sign::BOTH {
        if let Some(m) = d.part(sign) {
            m.check_grid(grid)?;
            for (&l, &w) in m.support().iter().zip(m.weights()) {
                values[l] += sign.factor() * m.mass() * w;
            }
        }
    }
    Ok(Snapshot::new(time, values))
}
