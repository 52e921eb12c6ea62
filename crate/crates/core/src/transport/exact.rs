//! Exact (unregularized) discrete transport for tiny instances.

use std::collections::VecDeque;

use super::{CostMatrix, TransportError};

/// Largest `n * m` accepted by [`exact_lp`].
pub const EXACT_LP_MAX_ENTRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// Row-major `n × m` optimal coupling.
    pub plan: Vec<f64>,
    pub cost: f64,
}

/// Minimizes `⟨C, P⟩` over couplings of `a` and `b`.
///
/// Uniform square marginals are solved by scanning every permutation matrix
/// (the extreme points of the Birkhoff polytope); anything else runs the
/// transportation simplex from a north-west-corner basis.
pub fn exact_lp(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<ExactSolution, TransportError> {
    let (n, m) = (cost.rows(), cost.cols());
    if n * m > EXACT_LP_MAX_ENTRIES {
        return Err(TransportError::TooLarge(n * m));
    }
    if a.len() != n || b.len() != m {
        return Err(TransportError::ShapeMismatch(
            "marginals do not match cost shape".into(),
        ));
    }
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(TransportError::InvalidWeights(
            "marginals must be finite and nonnegative".into(),
        ));
    }
    let uniform = |w: &[f64]| w.iter().all(|x| (x - w[0]).abs() <= 1e-12);
    if n == m && uniform(a) && uniform(b) && (a[0] - b[0]).abs() <= 1e-12 {
        Ok(permutation_search(a[0], cost))
    } else {
        transportation_simplex(a, b, cost)
    }
}

fn permutation_search(weight: f64, cost: &CostMatrix) -> ExactSolution {
    let n = cost.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let score = |p: &[usize]| {
        p.iter()
            .enumerate()
            .map(|(i, &j)| cost.get(i, j))
            .sum::<f64>()
    };
    let mut best = perm.clone();
    let mut best_cost = score(&perm);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s < best_cost {
                best_cost = s;
                best.clone_from(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mut plan = vec![0.0; n * n];
    for (i, &j) in best.iter().enumerate() {
        plan[i * n + j] = weight;
    }
    ExactSolution {
        plan,
        cost: best_cost * weight,
    }
}

fn transportation_simplex(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
) -> Result<ExactSolution, TransportError> {
    let (n, m) = (cost.rows(), cost.cols());
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || (sa - sb).abs() > 1e-9 * sa.max(1.0) {
        return Err(TransportError::InvalidWeights(format!(
            "marginal masses differ: {sa} vs {sb}"
        )));
    }
    let mut supply = a.to_vec();
    let mut demand: Vec<f64> = b.iter().map(|x| x * sa / sb).collect();

    let mut x = vec![0.0; n * m];
    let mut basic = vec![false; n * m];
    // North-west corner; a simultaneous row/column exhaustion advances the row
    // only, keeping a degenerate zero in the basis so it stays a spanning tree.
    let (mut i, mut j) = (0, 0);
    loop {
        let q = supply[i].min(demand[j]);
        x[i * m + j] = q;
        basic[i * m + j] = true;
        supply[i] -= q;
        demand[j] -= q;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if (supply[i] <= demand[j] && i < n - 1) || j == m - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost
        .entries()
        .iter()
        .fold(0.0f64, |s, c| s.max(*c))
        .max(1.0);
    for _ in 0..10_000 {
        let (u, v) = potentials(&basic, cost, n, m);
        // Bland's rule: first improving cell in row-major order.
        let entering = (0..n * m)
            .find(|&k| !basic[k] && cost.entries()[k] - u[k / m] - v[k % m] < -1e-12 * scale);
        let Some(enter) = entering else {
            let total = x.iter().zip(cost.entries()).map(|(p, c)| p * c).sum();
            return Ok(ExactSolution {
                plan: x,
                cost: total,
            });
        };
        let cycle = tree_path(&basic, n, m, enter / m, enter % m);
        // cycle[0] is adjacent to the entering column and receives a minus sign.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for &k in cycle.iter().step_by(2) {
            if x[k] < theta || (x[k] == theta && k < leave) {
                theta = x[k];
                leave = k;
            }
        }
        for (pos, &k) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                x[k] -= theta;
            } else {
                x[k] += theta;
            }
        }
        x[enter] += theta;
        x[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
    }
    Err(TransportError::InvalidPlan(
        "transportation simplex did not terminate".into(),
    ))
}

/// Dual potentials with `u_i + v_j = C_ij` on basic cells and `u_0 = 0`.
fn potentials(basic: &[bool], cost: &CostMatrix, n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    u[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            for j in 0..m {
                if basic[node * m + j] && v[j].is_nan() {
                    v[j] = cost.get(node, j) - u[node];
                    queue.push_back(n + j);
                }
            }
        } else {
            let j = node - n;
            for i in 0..n {
                if basic[i * m + j] && u[i].is_nan() {
                    u[i] = cost.get(i, j) - v[j];
                    queue.push_back(i);
                }
            }
        }
    }
    (u, v)
}

/// Basic cells on the tree path from column `col` to row `row`, in order.
fn tree_path(basic: &[bool], n: usize, m: usize, row: usize, col: usize) -> Vec<usize> {
    // Nodes: rows 0..n, columns n..n+m. BFS from the column node.
    let start = n + col;
    let mut parent = vec![usize::MAX; n + m];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        let neighbours: Vec<usize> = if node < n {
            (0..m)
                .filter(|&j| basic[node * m + j])
                .map(|j| n + j)
                .collect()
        } else {
            (0..n).filter(|&i| basic[i * m + node - n]).collect()
        };
        for next in neighbours {
            if parent[next] == usize::MAX {
                parent[next] = node;
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let p = parent[node];
        let (r, c) = if node < n {
            (node, p - n)
        } else {
            (p, node - n)
        };
        path.push(r * m + c);
        node = p;
    }
    // Collected from the row end; reverse so the first edge touches the column.
    path.reverse();
    path
}
