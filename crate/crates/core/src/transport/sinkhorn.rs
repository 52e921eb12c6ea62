use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{PlanEntries, TransportCost, TransportError, TransportPlan};

static SOLVES: AtomicUsize = AtomicUsize::new(0);

/// Number of Sinkhorn solves started by this process.
pub fn solve_count() -> usize {
    SOLVES.load(Ordering::Relaxed)
}

/// Final regularization strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// Same units as the cost.
    Absolute(f64),
    /// Multiple of the mean cost-matrix entry.
    RelativeToMeanCost(f64),
}

impl Epsilon {
    pub fn resolve(self, mean_cost: f64) -> f64 {
        match self {
            Epsilon::Absolute(e) => e,
            Epsilon::RelativeToMeanCost(r) => r * mean_cost,
        }
    }

    fn value(self) -> f64 {
        match self {
            Epsilon::Absolute(e) | Epsilon::RelativeToMeanCost(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornOptions {
    pub epsilon: Epsilon,
    /// Geometric factor applied to ε between levels, in `(0, 1)`.
    pub eps_scaling_factor: f64,
    /// The first level runs at `eps_start_multiplier * ε`.
    pub eps_start_multiplier: f64,
    /// Iteration cap per ε level.
    pub max_iters: usize,
    /// L1 marginal tolerance at the final level.
    pub marginal_tol: f64,
    /// Marginal tolerance that ends an intermediate level.
    pub intermediate_tol: f64,
    pub check_every: usize,
    /// Plans with more entries than this are stored sparse.
    pub dense_limit: usize,
    /// Sparse plans drop entries below this fraction of the largest entry.
    pub plan_truncation: f64,
    /// Over-relaxation weight `ω ∈ [1, 2)` for the potential updates. Plain
    /// updates resume once the violation is within 10× of the level target,
    /// or for the rest of a level once the violation grows between checks.
    pub overrelaxation: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::RelativeToMeanCost(1e-2),
            eps_scaling_factor: 0.5,
            eps_start_multiplier: 1000.0,
            max_iters: 20_000,
            marginal_tol: 1e-9,
            intermediate_tol: 1e-3,
            check_every: 10,
            dense_limit: 4_000_000,
            plan_truncation: 1e-12,
            overrelaxation: 1.5,
        }
    }
}

impl SinkhornOptions {
    pub fn validate(&self) -> Result<(), TransportError> {
        let bad = |m: &str| Err(TransportError::InvalidOptions(m.to_string()));
        let eps = self.epsilon.value();
        if !(eps > 0.0 && eps.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.eps_scaling_factor > 0.0 && self.eps_scaling_factor < 1.0) {
            return bad("eps_scaling_factor must lie in (0, 1)");
        }
        if !(self.eps_start_multiplier >= 1.0 && self.eps_start_multiplier.is_finite()) {
            return bad("eps_start_multiplier must be >= 1");
        }
        if !(self.marginal_tol > 0.0) || !(self.intermediate_tol > 0.0) {
            return bad("marginal tolerances must be positive");
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return bad("max_iters and check_every must be positive");
        }
        if !(1.0..2.0).contains(&self.overrelaxation) {
            return bad("overrelaxation must lie in [1, 2)");
        }
        if !(0.0..1.0).contains(&self.plan_truncation) {
            return bad("plan_truncation must lie in [0, 1)");
        }
        Ok(())
    }

    /// The ε levels visited, ending exactly at `eps`.
    pub fn schedule(&self, eps: f64) -> Vec<f64> {
        let mut levels = Vec::new();
        let mut e = eps * self.eps_start_multiplier;
        while e > eps * (1.0 + 1e-12) {
            levels.push(e);
            e *= self.eps_scaling_factor;
        }
        levels.push(eps);
        levels
    }
}

fn check_weights(w: &[f64], len: usize, which: &str) -> Result<(), TransportError> {
    if w.len() != len {
        return Err(TransportError::ShapeMismatch(format!(
            "{which} has {} weights, cost expects {len}",
            w.len()
        )));
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(TransportError::InvalidWeights(format!(
            "{which} weights must be strictly positive"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(TransportError::InvalidWeights(format!(
            "{which} weights sum to {s}"
        )));
    }
    Ok(())
}

/// Entropic optimal transport between weights `a` and `b` under `cost`.
///
/// Log-domain iteration on dual potentials `f`, `g` with soft-min updates and
/// geometric ε-scaling, warm-starting each level from the previous one.
pub fn sinkhorn<C: TransportCost + ?Sized>(
    a: &[f64],
    b: &[f64],
    cost: &C,
    opts: &SinkhornOptions,
) -> Result<TransportPlan, TransportError> {
    opts.validate()?;
    let (n, m) = cost.shape();
    check_weights(a, n, "source")?;
    check_weights(b, m, "target")?;
    SOLVES.fetch_add(1, Ordering::Relaxed);

    let eps_final = opts.epsilon.resolve(cost.mean());
    if !(eps_final > 0.0 && eps_final.is_finite()) {
        // Zero mean cost: every coupling is optimal; fall back to the product plan.
        return Ok(product_plan(a, b));
    }
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut h_src = vec![0.0; n];
    let mut h_dst = vec![0.0; m];
    let mut row_lse = vec![0.0; n];
    let mut col_lse = vec![0.0; m];

    let levels = opts.schedule(eps_final);
    let last = levels.len() - 1;
    let mut iterations = 0;
    let mut violation = f64::INFINITY;

    for (level, &eps) in levels.iter().enumerate() {
        let target = if level == last {
            opts.marginal_tol
        } else {
            opts.intermediate_tol.max(opts.marginal_tol)
        };
        let mut it = 0;
        let mut relax = opts.overrelaxation;
        let mut last_weight = 1.0;
        violation = f64::INFINITY;
        loop {
            // f-update; the row reduction also yields the current row marginals.
            for j in 0..m {
                h_dst[j] = log_b[j] + g[j] / eps;
            }
            cost.lse_rows(&h_dst, eps, &mut row_lse);
            if it > 0 && it % opts.check_every == 0 {
                let previous_check = violation;
                violation = (0..n)
                    .map(|i| a[i] * ((f[i] / eps + row_lse[i]).exp() - 1.0).abs())
                    .sum();
                if !violation.is_finite() {
                    return Err(TransportError::NumericalOverflow);
                }
                if violation > previous_check || violation <= target {
                    // Over-relaxation is only locally convergent; fall back.
                    // Stopping also requires a plain last step so that the
                    // column marginals hold exactly.
                    relax = 1.0;
                }
                if (violation <= target && last_weight == 1.0) || it >= opts.max_iters {
                    break;
                }
            }
            let w = if violation > 10.0 * target {
                relax
            } else {
                1.0
            };
            last_weight = w;
            for i in 0..n {
                f[i] = (1.0 - w) * f[i] - w * eps * row_lse[i];
                h_src[i] = log_a[i] + f[i] / eps;
            }
            cost.lse_cols(&h_src, eps, &mut col_lse);
            for j in 0..m {
                g[j] = (1.0 - w) * g[j] - w * eps * col_lse[j];
            }
            if f.iter().chain(&g).any(|v| !v.is_finite()) {
                return Err(TransportError::NumericalOverflow);
            }
            it += 1;
            iterations += 1;
        }
    }

    let mut plan = materialize(&log_a, &log_b, &f, &g, cost, eps_final, opts);
    plan.iterations = iterations;
    let (r, c) = plan.marginal_errors(a, b);
    plan.marginal_violation = r.max(c);
    if violation > opts.marginal_tol {
        return Err(TransportError::NotConverged {
            violation: plan.marginal_violation,
            plan: Box::new(plan),
        });
    }
    Ok(plan)
}

fn product_plan(a: &[f64], b: &[f64]) -> TransportPlan {
    let values = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect();
    let mut p =
        TransportPlan::from_dense(a.len(), b.len(), values).expect("product of valid weights");
    let (r, c) = p.marginal_errors(a, b);
    p.marginal_violation = r.max(c);
    p
}

fn materialize<C: TransportCost + ?Sized>(
    log_a: &[f64],
    log_b: &[f64],
    f: &[f64],
    g: &[f64],
    cost: &C,
    eps: f64,
    opts: &SinkhornOptions,
) -> TransportPlan {
    let (n, m) = cost.shape();
    let row_part: Vec<f64> = (0..n).map(|i| log_a[i] + f[i] / eps).collect();
    let col_part: Vec<f64> = (0..m).map(|j| log_b[j] + g[j] / eps).collect();
    let log_entry = |i: usize, j: usize| row_part[i] + col_part[j] - cost.cost(i, j) / eps;

    let entries = if n * m <= opts.dense_limit {
        let mut v = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                v.push(log_entry(i, j).exp());
            }
        }
        PlanEntries::Dense(v)
    } else {
        let col_max = col_part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut max = f64::NEG_INFINITY;
        for (i, &rp) in row_part.iter().enumerate() {
            if rp + col_max <= max {
                continue;
            }
            for j in 0..m {
                max = max.max(log_entry(i, j));
            }
        }
        let floor = if opts.plan_truncation > 0.0 {
            max + opts.plan_truncation.ln()
        } else {
            f64::NEG_INFINITY
        };
        let mut t = Vec::new();
        for (i, &rp) in row_part.iter().enumerate() {
            if rp + col_max < floor {
                continue;
            }
            for j in 0..m {
                let le = log_entry(i, j);
                if le >= floor {
                    t.push((i as u32, j as u32, le.exp()));
                }
            }
        }
        PlanEntries::Sparse(t)
    };
    TransportPlan {
        rows: n,
        cols: m,
        entries,
        epsilon_used: eps,
        iterations: 0,
        marginal_violation: 0.0,
    }
}
