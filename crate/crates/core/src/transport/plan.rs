use super::{TransportCost, TransportError};

/// Storage of the coupling entries.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanEntries {
    /// Row-major `n × m` matrix.
    Dense(Vec<f64>),
    /// Triplets `(row, col, value)` sorted by row then column; entries below
    /// the truncation threshold are absent.
    Sparse(Vec<(u32, u32, f64)>),
}

/// Entropic transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) entries: PlanEntries,
    pub(crate) epsilon_used: f64,
    pub(crate) iterations: usize,
    pub(crate) marginal_violation: f64,
}

impl TransportPlan {
    pub fn from_dense(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, TransportError> {
        if values.len() != rows * cols {
            return Err(TransportError::ShapeMismatch(format!(
                "{} values for {rows}x{cols} plan",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TransportError::InvalidPlan(
                "entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            entries: PlanEntries::Dense(values),
            epsilon_used: 0.0,
            iterations: 0,
            marginal_violation: 0.0,
        })
    }

    /// Rebuilds a plan from stored parts, validating shape and sign.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        entries: PlanEntries,
        epsilon_used: f64,
        iterations: usize,
        marginal_violation: f64,
    ) -> Result<Self, TransportError> {
        match &entries {
            PlanEntries::Dense(v) => {
                if v.len() != rows * cols {
                    return Err(TransportError::ShapeMismatch(format!(
                        "{} values for {rows}x{cols} plan",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(TransportError::InvalidPlan(
                        "entries must be finite and nonnegative".into(),
                    ));
                }
            }
            PlanEntries::Sparse(t) => {
                for &(i, j, v) in t {
                    if i as usize >= rows || j as usize >= cols {
                        return Err(TransportError::ShapeMismatch(format!(
                            "entry ({i},{j}) outside {rows}x{cols}"
                        )));
                    }
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(TransportError::InvalidPlan(
                            "entries must be finite and nonnegative".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
            epsilon_used,
            iterations,
            marginal_violation,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn epsilon_used(&self) -> f64 {
        self.epsilon_used
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    /// Larger of the L1 row- and column-marginal errors.
    pub fn marginal_violation(&self) -> f64 {
        self.marginal_violation
    }
    pub fn storage(&self) -> &PlanEntries {
        &self.entries
    }
    pub fn is_sparse(&self) -> bool {
        matches!(self.entries, PlanEntries::Sparse(_))
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        match &self.entries {
            PlanEntries::Dense(v) => v.len(),
            PlanEntries::Sparse(t) => t.len(),
        }
    }

    /// Iterates `(row, col, value)` over strictly positive entries.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, usize, f64)> + '_> {
        match &self.entries {
            PlanEntries::Dense(v) => {
                let cols = self.cols;
                Box::new(
                    v.iter()
                        .enumerate()
                        .filter(|(_, x)| **x > 0.0)
                        .map(move |(k, &x)| (k / cols, k % cols, x)),
                )
            }
            PlanEntries::Sparse(t) => Box::new(
                t.iter()
                    .filter(|e| e.2 > 0.0)
                    .map(|&(i, j, v)| (i as usize, j as usize, v)),
            ),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.entries {
            PlanEntries::Dense(v) => v[i * self.cols + j],
            PlanEntries::Sparse(t) => t
                .binary_search_by(|e| (e.0 as usize, e.1 as usize).cmp(&(i, j)))
                .map(|k| t[k].2)
                .unwrap_or(0.0),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (i, j, v) in self.iter() {
            out[i * self.cols + j] = v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for (i, _, v) in self.iter() {
            s[i] += v;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for (_, j, v) in self.iter() {
            s[j] += v;
        }
        s
    }

    pub fn total_mass(&self) -> f64 {
        self.iter().map(|e| e.2).sum()
    }

    /// L1 marginal errors `(‖P1 - a‖₁, ‖Pᵀ1 - b‖₁)`.
    pub fn marginal_errors(&self, a: &[f64], b: &[f64]) -> (f64, f64) {
        let r: f64 = self
            .row_sums()
            .iter()
            .zip(a)
            .map(|(s, w)| (s - w).abs())
            .sum();
        let c: f64 = self
            .col_sums()
            .iter()
            .zip(b)
            .map(|(s, w)| (s - w).abs())
            .sum();
        (r, c)
    }

    pub fn transpose(&self) -> Self {
        let entries = match &self.entries {
            PlanEntries::Dense(v) => {
                let mut out = vec![0.0; v.len()];
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        out[j * self.rows + i] = v[i * self.cols + j];
                    }
                }
                PlanEntries::Dense(out)
            }
            PlanEntries::Sparse(t) => {
                let mut out: Vec<_> = t.iter().map(|&(i, j, v)| (j, i, v)).collect();
                out.sort_by_key(|e| (e.0, e.1));
                PlanEntries::Sparse(out)
            }
        };
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
            ..self.clone()
        }
    }
}

/// Frobenius inner product `⟨P, C⟩`.
pub fn transport_cost<C: TransportCost + ?Sized>(
    plan: &TransportPlan,
    cost: &C,
) -> Result<f64, TransportError> {
    if cost.shape() != (plan.rows, plan.cols) {
        return Err(TransportError::ShapeMismatch(format!(
            "plan is {}x{} but cost is {:?}",
            plan.rows,
            plan.cols,
            cost.shape()
        )));
    }
    Ok(plan.iter().map(|(i, j, v)| v * cost.cost(i, j)).sum())
}
