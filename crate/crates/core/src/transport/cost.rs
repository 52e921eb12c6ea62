use crate::measure::{DiscreteMeasure, Grid};

use super::TransportError;

/// Terms whose log-value falls this far below the running maximum are skipped
/// in log-sum-exp reductions; `exp(-50)` is below double precision relative
/// to the dominant term.
const LSE_CUTOFF: f64 = 50.0;

/// Ground cost between the supports of two measures, as needed by the
/// log-domain Sinkhorn iteration.
///
/// `lse_rows` computes `out_i = log Σ_j exp(h_j - C_ij / eps)` and
/// `lse_cols` computes `out_j = log Σ_i exp(h_i - C_ij / eps)`.
pub trait TransportCost: Sync {
    fn shape(&self) -> (usize, usize);
    fn cost(&self, i: usize, j: usize) -> f64;
    fn mean(&self) -> f64;
    fn lse_rows(&self, h: &[f64], eps: f64, out: &mut [f64]);
    fn lse_cols(&self, h: &[f64], eps: f64, out: &mut [f64]);
}

/// Dense `n × m` cost matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    p: u32,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// `C_ij = ‖x_i - y_j‖^p`.
    pub fn from_points(src: &[[f64; 2]], dst: &[[f64; 2]], p: u32) -> Result<Self, TransportError> {
        if p != 1 && p != 2 {
            return Err(TransportError::UnsupportedExponent(p));
        }
        let mut entries = Vec::with_capacity(src.len() * dst.len());
        for x in src {
            for y in dst {
                let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                entries.push(if p == 2 { d2 } else { d2.sqrt() });
            }
        }
        Self::with_exponent(src.len(), dst.len(), entries, p)
    }

    /// Arbitrary nonnegative finite cost entries (row-major).
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
    ) -> Result<Self, TransportError> {
        Self::with_exponent(rows, cols, entries, 2)
    }

    fn with_exponent(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        p: u32,
    ) -> Result<Self, TransportError> {
        if rows == 0 || cols == 0 {
            return Err(TransportError::EmptyMeasure);
        }
        if entries.len() != rows * cols {
            return Err(TransportError::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} cost matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(TransportError::InvalidCost);
        }
        Ok(Self {
            rows,
            cols,
            p,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn exponent(&self) -> u32 {
        self.p
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            p: self.p,
            entries,
        }
    }
}

/// Cost matrix between the supports of `mu` and `nu` on `grid`.
pub fn build_cost_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    grid: &Grid,
    p: u32,
) -> Result<CostMatrix, TransportError> {
    mu.check_grid(grid)?;
    nu.check_grid(grid)?;
    CostMatrix::from_points(&mu.points(grid), &nu.points(grid), p)
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let floor = max - LSE_CUTOFF;
    let sum: f64 = values.filter(|v| *v > floor).map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

impl TransportCost for CostMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }

    fn mean(&self) -> f64 {
        self.entries.iter().sum::<f64>() / self.entries.len() as f64
    }

    fn lse_rows(&self, h: &[f64], eps: f64, out: &mut [f64]) {
        let inv = 1.0 / eps;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            *o = lse(row.iter().zip(h).map(|(c, hj)| hj - c * inv));
        }
    }

    fn lse_cols(&self, h: &[f64], eps: f64, out: &mut [f64]) {
        let inv = 1.0 / eps;
        for (j, o) in out.iter_mut().enumerate() {
            *o = lse((0..self.rows).map(|i| h[i] - self.entries[i * self.cols + j] * inv));
        }
    }
}

/// Squared-Euclidean cost between two sets of cells of one grid.
///
/// The Gibbs kernel of this cost factorizes over the two axes, so each
/// log-sum-exp reduction runs as two 1D passes over the grid instead of a
/// dense `n × m` sweep.
#[derive(Debug, Clone)]
pub struct GridCost {
    grid: Grid,
    src: Vec<usize>,
    dst: Vec<usize>,
}

impl GridCost {
    pub fn new(grid: Grid, src: Vec<usize>, dst: Vec<usize>) -> Result<Self, TransportError> {
        if src.is_empty() || dst.is_empty() {
            return Err(TransportError::EmptyMeasure);
        }
        for &l in src.iter().chain(&dst) {
            grid.check_index(l)?;
        }
        Ok(Self { grid, src, dst })
    }

    pub fn between(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        grid: &Grid,
    ) -> Result<Self, TransportError> {
        Self::new(*grid, mu.support().to_vec(), nu.support().to_vec())
    }

    pub fn transpose(&self) -> Self {
        Self {
            grid: self.grid,
            src: self.dst.clone(),
            dst: self.src.clone(),
        }
    }

    pub fn to_dense(&self) -> CostMatrix {
        let pts = |s: &[usize]| {
            s.iter()
                .map(|&l| self.grid.cell_center(l))
                .collect::<Vec<_>>()
        };
        CostMatrix::from_points(&pts(&self.src), &pts(&self.dst), 2).expect("grid costs are finite")
    }

    fn axis_kernel(centers: &[f64], eps: f64) -> Vec<f64> {
        let n = centers.len();
        let mut k = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                k[a * n + b] = (centers[a] - centers[b]).powi(2) / eps;
            }
        }
        k
    }

    /// `out_t = log Σ_s exp(h_s - ‖x_t - x_s‖² / eps)` for `s` over `from`
    /// cells and `t` over `to` cells.
    fn separable_lse(&self, from: &[usize], h: &[f64], to: &[usize], eps: f64, out: &mut [f64]) {
        let (nx, nz) = (self.grid.nx(), self.grid.nz());
        let xs: Vec<f64> = (0..nx).map(|i| self.grid.x_center(i)).collect();
        let zs: Vec<f64> = (0..nz).map(|i| self.grid.z_center(i)).collect();
        let kx = Self::axis_kernel(&xs, eps);
        let kz = Self::axis_kernel(&zs, eps);
        let gx: Vec<f64> = kx.iter().map(|k| (-k).exp()).collect();
        let gz: Vec<f64> = kz.iter().map(|k| (-k).exp()).collect();

        // Scatter onto a dense (x-major) layout: field[jx * nz + jz].
        let mut field = vec![f64::NEG_INFINITY; nx * nz];
        let mut column_used = vec![false; nx];
        for (&l, &v) in from.iter().zip(h) {
            let (ix, iz) = self.grid.coords(l);
            field[ix * nz + iz] = v;
            column_used[ix] = true;
        }
        let mut rows_needed = vec![false; nz];
        for &l in to {
            rows_needed[self.grid.coords(l).1] = true;
        }

        // z pass: partial[iz * nx + jx] = log Σ_jz exp(field[jx, jz] - kz[iz, jz])
        let mut partial = vec![f64::NEG_INFINITY; nz * nx];
        let mut scaled = vec![0.0; nz.max(nx)];
        for jx in (0..nx).filter(|&c| column_used[c]) {
            let col = &field[jx * nz..(jx + 1) * nz];
            let shift = max_shift(col, &mut scaled[..nz]);
            for iz in (0..nz).filter(|&r| rows_needed[r]) {
                partial[iz * nx + jx] =
                    shifted_lse(shift, &scaled[..nz], &gz[iz * nz..(iz + 1) * nz], || {
                        lse(col
                            .iter()
                            .zip(&kz[iz * nz..(iz + 1) * nz])
                            .map(|(f, k)| f - k))
                    });
            }
        }
        // x pass, one shifted row per needed z.
        let mut row_shift = vec![f64::NEG_INFINITY; nz];
        let mut row_scaled = vec![0.0; nz * nx];
        for iz in (0..nz).filter(|&r| rows_needed[r]) {
            row_shift[iz] = max_shift(
                &partial[iz * nx..(iz + 1) * nx],
                &mut row_scaled[iz * nx..(iz + 1) * nx],
            );
        }
        for (&l, o) in to.iter().zip(out.iter_mut()) {
            let (ix, iz) = self.grid.coords(l);
            let prow = &partial[iz * nx..(iz + 1) * nx];
            *o = shifted_lse(
                row_shift[iz],
                &row_scaled[iz * nx..(iz + 1) * nx],
                &gx[ix * nx..(ix + 1) * nx],
                || {
                    lse(prow
                        .iter()
                        .zip(&kx[ix * nx..(ix + 1) * nx])
                        .map(|(p, k)| p - k))
                },
            );
        }
    }
}

/// Writes `exp(v - max)` into `scaled` and returns `max` (`-inf` if every
/// entry is `-inf`).
fn max_shift(values: &[f64], scaled: &mut [f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (s, v) in scaled.iter_mut().zip(values) {
        *s = if m.is_finite() { (v - m).exp() } else { 0.0 };
    }
    m
}

/// Sums below this are recomputed exactly: a dropped (underflowed) term can
/// only matter when the kept ones are this small.
const SHIFTED_SUM_FLOOR: f64 = 1e-200;

/// `shift + log Σ scaled_s · kernel_s`, falling back to the exact log-domain
/// reduction when the scaled sum is too small to trust.
#[inline]
fn shifted_lse(shift: f64, scaled: &[f64], kernel: &[f64], exact: impl FnOnce() -> f64) -> f64 {
    if !shift.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = scaled.iter().zip(kernel).map(|(s, k)| s * k).sum();
    if sum > SHIFTED_SUM_FLOOR {
        shift + sum.ln()
    } else {
        exact()
    }
}

impl TransportCost for GridCost {
    fn shape(&self) -> (usize, usize) {
        (self.src.len(), self.dst.len())
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        let x = self.grid.cell_center(self.src[i]);
        let y = self.grid.cell_center(self.dst[j]);
        (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
    }

    fn mean(&self) -> f64 {
        // mean of (x - y)^2 over all pairs = E[x²] + E[y²] - 2 E[x] E[y], per axis
        let moments = |s: &[usize]| {
            let n = s.len() as f64;
            let mut m = [0.0f64; 4];
            for &l in s {
                let p = self.grid.cell_center(l);
                m[0] += p[0];
                m[1] += p[0] * p[0];
                m[2] += p[1];
                m[3] += p[1] * p[1];
            }
            m.map(|v| v / n)
        };
        let a = moments(&self.src);
        let b = moments(&self.dst);
        let mean = a[1] + b[1] - 2.0 * a[0] * b[0] + a[3] + b[3] - 2.0 * a[2] * b[2];
        mean.max(0.0)
    }

    fn lse_rows(&self, h: &[f64], eps: f64, out: &mut [f64]) {
        self.separable_lse(&self.dst, h, &self.src, eps, out);
    }

    fn lse_cols(&self, h: &[f64], eps: f64, out: &mut [f64]) {
        self.separable_lse(&self.src, h, &self.dst, eps, out);
    }
}
