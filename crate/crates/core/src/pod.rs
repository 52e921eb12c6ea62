//! Proper orthogonal decomposition of snapshot matrices.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Energy threshold used when none is given.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.9999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PodError {
    #[error("snapshot matrix is empty")]
    EmptyMatrix,
    #[error("snapshot matrix contains non-finite values")]
    NonFinite,
    #[error("column length {got} does not match {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("energy threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("snapshot has zero norm")]
    ZeroNorm,
    #[error("singular value decomposition failed to converge")]
    SvdFailed,
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSelector {
    /// Smallest `k` with `E(k) >= threshold`.
    Energy(f64),
    /// Fixed count, capped at the numerical rank.
    Rank(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    singular_values: Vec<f64>,
    energy_threshold: Option<f64>,
}

impl PodBasis {
    /// Restores a basis from stored columns (assumed orthonormal).
    pub fn from_parts(
        modes: DMatrix<f64>,
        singular_values: Vec<f64>,
        energy_threshold: Option<f64>,
    ) -> Result<Self, PodError> {
        if singular_values.len() < modes.ncols() {
            return Err(PodError::ShapeMismatch {
                expected: modes.ncols(),
                got: singular_values.len(),
            });
        }
        Ok(Self {
            modes,
            singular_values,
            energy_threshold,
        })
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    /// All nonzero singular values of the source matrix, not just retained ones.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn energy_threshold(&self) -> Option<f64> {
        self.energy_threshold
    }

    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    /// Cumulative energy fraction `E(k) = Σ_{i<=k} σ_i² / Σ σ_i²`.
    pub fn energy(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        energy_fractions(&self.singular_values)
            .get(k - 1)
            .copied()
            .unwrap_or(1.0)
    }

    /// Energy captured by the retained modes.
    pub fn retained_energy(&self) -> f64 {
        if self.singular_values.is_empty() {
            1.0
        } else {
            self.energy(self.n_modes())
        }
    }

    fn check_dim(&self, len: usize) -> Result<(), PodError> {
        if len != self.dim() {
            return Err(PodError::ShapeMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Reduced coordinates `U_rᵀ u`.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>, PodError> {
        self.check_dim(u.len())?;
        Ok((self.modes.tr_mul(&DVector::from_column_slice(u)))
            .as_slice()
            .to_vec())
    }

    /// Full field `U_r c`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>, PodError> {
        if coeffs.len() != self.n_modes() {
            return Err(PodError::ShapeMismatch {
                expected: self.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok((&self.modes * DVector::from_column_slice(coeffs))
            .as_slice()
            .to_vec())
    }

    /// `‖u - U_r U_rᵀ u‖₂ / ‖u‖₂`.
    pub fn projection_error(&self, u: &[f64]) -> Result<f64, PodError> {
        let norm = crate::measure::l2_norm(u);
        if norm == 0.0 {
            return Err(PodError::ZeroNorm);
        }
        let back = self.reconstruct(&self.project(u)?)?;
        let diff: f64 = u
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(diff / norm)
    }
}

fn energy_fractions(sv: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(sv.len());
    let mut acc = 0.0;
    for s in sv {
        acc += s * s;
        cum.push(acc);
    }
    let total = acc;
    cum.into_iter()
        .map(|c| if total > 0.0 { c / total } else { 1.0 })
        .collect()
}

/// Stacks equal-length columns into an `N_h × N_cols` matrix.
pub fn snapshot_matrix(columns: &[Vec<f64>]) -> Result<DMatrix<f64>, PodError> {
    let first = columns.first().ok_or(PodError::EmptyMatrix)?;
    if first.is_empty() {
        return Err(PodError::EmptyMatrix);
    }
    for c in columns {
        if c.len() != first.len() {
            return Err(PodError::ShapeMismatch {
                expected: first.len(),
                got: c.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(first.len(), columns.len(), |r, c| {
        columns[c][r]
    }))
}

/// Leading left singular vectors of `s`.
pub fn compute_pod(s: &DMatrix<f64>, selector: ModeSelector) -> Result<PodBasis, PodError> {
    if s.is_empty() {
        return Err(PodError::EmptyMatrix);
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(PodError::NonFinite);
    }
    if let ModeSelector::Energy(t) = selector {
        if !(t > 0.0 && t <= 1.0) {
            return Err(PodError::InvalidThreshold(t));
        }
    }
    // Thin SVD of the snapshot matrix itself; left vectors come from the
    // transposed problem when the matrix is wide.
    let (u, sigma) = if s.nrows() >= s.ncols() {
        let svd = s
            .clone()
            .try_svd(true, false, f64::EPSILON, 0)
            .ok_or(PodError::SvdFailed)?;
        (svd.u.ok_or(PodError::SvdFailed)?, svd.singular_values)
    } else {
        let svd = s
            .transpose()
            .try_svd(false, true, f64::EPSILON, 0)
            .ok_or(PodError::SvdFailed)?;
        (
            svd.v_t.ok_or(PodError::SvdFailed)?.transpose(),
            svd.singular_values,
        )
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let smax = order.first().map(|&k| sigma[k]).unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * s.nrows().max(s.ncols()) as f64;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| sigma[k] > cutoff && sigma[k] > 0.0)
        .collect();
    let singular_values: Vec<f64> = kept.iter().map(|&k| sigma[k]).collect();

    let n_modes = match selector {
        ModeSelector::Rank(r) => r.min(kept.len()),
        ModeSelector::Energy(t) => {
            let e = energy_fractions(&singular_values);
            e.iter()
                .position(|&v| v >= t)
                .map(|p| p + 1)
                .unwrap_or(e.len())
        }
    };
    let mut modes = DMatrix::zeros(s.nrows(), n_modes);
    for (c, &k) in kept.iter().take(n_modes).enumerate() {
        let mut col = u.column(k).clone_owned();
        // Sign convention: the largest-magnitude entry is positive.
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        modes.set_column(c, &col);
    }
    let energy_threshold = match selector {
        ModeSelector::Energy(t) => Some(t),
        ModeSelector::Rank(_) => None,
    };
    Ok(PodBasis {
        modes,
        singular_values,
        energy_threshold,
    })
}
