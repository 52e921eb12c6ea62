//! Oracles and random generators shared by the integration tests.
#![allow(dead_code)]

use otrom::fomgen::{simulate, Blob, FomConfig};
use otrom::measure::Trajectory;
use otrom::rom::{n_synth_for_total, train, MappingKind, RegressorKind, RomModel, TrainOptions};
use otrom::transport::Epsilon;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigenvalues of a small symmetric matrix, sorted descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in rp.into_iter().zip(rq).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Optimal transport cost by enumerating every basic feasible solution:
/// each choice of `n + m - 1` cells forming a spanning tree of the bipartite
/// row/column graph determines a unique flow by leaf peeling. `cost` is
/// row-major `n × m`. Only practical for tiny problems.
pub fn lp_by_vertex_enumeration(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        if let Some(c) = tree_flow_cost(a, b, cost, &pick) {
            best = best.min(c);
        }
        // Next k-combination of n·m cells in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < n * m - k + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn tree_flow_cost(a: &[f64], b: &[f64], cost: &[f64], cells: &[usize]) -> Option<f64> {
    let m = b.len();
    let (mut row, mut col) = (a.to_vec(), b.to_vec());
    let mut open: Vec<bool> = vec![true; cells.len()];
    let mut total = 0.0;
    for _ in 0..cells.len() {
        // A row or column with exactly one open cell fixes that cell's flow.
        let leaf = (0..a.len())
            .find_map(|i| single(cells, &open, |c| c / m == i))
            .map(|s| (s, true))
            .or_else(|| {
                (0..m)
                    .find_map(|j| single(cells, &open, |c| c % m == j))
                    .map(|s| (s, false))
            })?;
        let (s, by_row) = leaf;
        let (i, j) = (cells[s] / m, cells[s] % m);
        let x = if by_row { row[i] } else { col[j] };
        if x < -1e-12 {
            return None;
        }
        row[i] -= x;
        col[j] -= x;
        open[s] = false;
        total += x * cost[cells[s]];
    }
    (row.iter().chain(&col).all(|r| r.abs() <= 1e-12)).then_some(total)
}

fn single(cells: &[usize], open: &[bool], member: impl Fn(usize) -> bool) -> Option<usize> {
    let mut hits = (0..cells.len()).filter(|&s| open[s] && member(cells[s]));
    let first = hits.next()?;
    hits.next().is_none().then_some(first)
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Values spanning many magnitudes, both signs, and awkward bit patterns.
pub fn awkward(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..8) {
        0 => 0.0,
        1 => -0.0,
        2 => f64::MIN_POSITIVE * rng.gen::<f64>(),
        3 => 0.1 + 0.2,
        _ => (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-300..300)),
    }
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// A small trained model with randomized mapping, regressor, correction,
/// regularization and plan storage, plus its training trajectory.
pub fn random_model(rng: &mut ChaCha8Rng) -> (RomModel, Trajectory) {
    let n = rng.gen_range(8..13);
    let n_t = rng.gen_range(3..7);
    let mut cfg = FomConfig::rotating_blob(n, n_t);
    cfg.blobs[0].sigma = rng.gen_range(0.08..0.15);
    if rng.gen_bool(0.5) {
        cfg.blobs.push(Blob {
            center: [0.3, 0.4],
            sigma: 0.1,
            amplitude: -rng.gen_range(0.1..1.0),
        });
    }
    let traj = simulate(&cfg).unwrap();
    let nc = rng.gen_range(2..=n_t.min(4));
    let mut opts = TrainOptions {
        n_checkpoints: nc,
        mapping: if rng.gen_bool(0.5) {
            MappingKind::MinL2
        } else {
            MappingKind::Linear
        },
        regressor: if rng.gen_bool(0.5) {
            RegressorKind::Gpr
        } else {
            RegressorKind::PiecewiseLinear
        },
        n_synth: n_synth_for_total(2 * n_t, nc).unwrap(),
        correction: rng.gen_bool(0.7),
        ..Default::default()
    };
    opts.interpolation.sinkhorn.epsilon = Epsilon::RelativeToMeanCost(rng.gen_range(5e-3..5e-2));
    if rng.gen_bool(0.3) {
        // Forces sparse plan storage.
        opts.interpolation.sinkhorn.dense_limit = 10;
    }
    (train(&traj, &opts).unwrap(), traj)
}
