//! Observation traveling-salesman distance: the shortest open path through
//! every point observed so far.

use serde::{Deserialize, Serialize};

use crate::linalg::squared_distance;
use crate::scalar::Scalar;

/// Largest prefix solved by the exact subset DP.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Heuristic,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtsdCurve {
    /// Path length through the first `i + 1` points.
    pub values: Vec<f64>,
    pub solver: Vec<Solver>,
}

fn distances<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let v = squared_distance(points[i].as_ref(), points[j].as_ref()).to_f64_lossy().sqrt();
            dist[i][j] = v;
            dist[j][i] = v;
        }
    }
    dist
}

/// Exact open-path length over the first `n` points (Held–Karp).
fn exact(dist: &[Vec<f64>], n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full * n];
    for j in 0..n {
        dp[(1 << j) * n + j] = 0.0;
    }
    for mask in 1..full {
        for j in 0..n {
            let cur = dp[mask * n + j];
            if cur == f64::INFINITY || mask & (1 << j) == 0 {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = (mask | (1 << k)) * n + k;
                let cand = cur + dist[j][k];
                if cand < dp[next] {
                    dp[next] = cand;
                }
            }
        }
    }
    (0..n).map(|j| dp[(full - 1) * n + j]).fold(f64::INFINITY, f64::min)
}

fn path_length(dist: &[Vec<f64>], path: &[usize]) -> f64 {
    path.windows(2).map(|w| dist[w[0]][w[1]]).sum()
}

/// Segment-reversal local search on an open path, including reversals that
/// touch an endpoint.
fn two_opt(dist: &[Vec<f64>], path: &mut [usize]) {
    let n = path.len();
    if n < 3 {
        return;
    }
    for _ in 0..1000 {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let mut delta = 0.0;
                if i > 0 {
                    delta += dist[path[i - 1]][path[j]] - dist[path[i - 1]][path[i]];
                }
                if j + 1 < n {
                    delta += dist[path[i]][path[j + 1]] - dist[path[j]][path[j + 1]];
                }
                if delta < -1e-12 {
                    path[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn nearest_neighbour(dist: &[Vec<f64>], n: usize, start: usize) -> Vec<usize> {
    let mut visited = vec![false; n];
    let mut path = vec![start];
    visited[start] = true;
    let mut cur = start;
    for _ in 1..n {
        let next = (0..n)
            .filter(|k| !visited[*k])
            .min_by(|a, b| dist[cur][*a].total_cmp(&dist[cur][*b]))
            .expect("unvisited point remains");
        visited[next] = true;
        path.push(next);
        cur = next;
    }
    path
}

/// Inserts `k` where it lengthens the path least (ends included).
fn cheapest_insertion(dist: &[Vec<f64>], path: &[usize], k: usize) -> Vec<usize> {
    let n = path.len();
    let mut best_pos = 0;
    let mut best_cost = dist[k][path[0]];
    if dist[path[n - 1]][k] < best_cost {
        best_cost = dist[path[n - 1]][k];
        best_pos = n;
    }
    for i in 1..n {
        let c = dist[path[i - 1]][k] + dist[k][path[i]] - dist[path[i - 1]][path[i]];
        if c < best_cost {
            best_cost = c;
            best_pos = i;
        }
    }
    let mut out = path.to_vec();
    out.insert(best_pos, k);
    out
}

/// OTSD for every prefix of `points`.
pub fn otsd<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> OtsdCurve {
    let dist = distances(points);
    let mut values = Vec::with_capacity(points.len());
    let mut solver = Vec::with_capacity(points.len());
    let mut tour: Vec<usize> = Vec::new();
    for n in 1..=points.len() {
        if n <= EXACT_LIMIT {
            values.push(exact(&dist, n));
            solver.push(Solver::Exact);
            continue;
        }
        let mut candidates = vec![nearest_neighbour(&dist, n, 0), nearest_neighbour(&dist, n, n - 1)];
        if tour.len() == n - 1 {
            candidates.push(cheapest_insertion(&dist, &tour, n - 1));
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mut c in candidates {
            two_opt(&dist, &mut c);
            let len = path_length(&dist, &c);
            if best.as_ref().is_none_or(|(b, _)| len < *b) {
                best = Some((len, c));
            }
        }
        let (len, path) = best.expect("at least one candidate");
        values.push(len);
        solver.push(Solver::Heuristic);
        tour = path;
    }
    OtsdCurve { values, solver }
}

/// Brute force over all open paths, for testing; `n ≤ 9`.
pub fn brute_force<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> f64 {
    let n = points.len();
    assert!(n <= 9, "brute force is factorial");
    if n <= 1 {
        return 0.0;
    }
    let dist = distances(points);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&dist, &mut perm, 0, &mut best);
    best
}

fn permute(dist: &[Vec<f64>], perm: &mut [usize], k: usize, best: &mut f64) {
    if k == perm.len() {
        // each path is visited in both directions; keep one
        if perm[0] < perm[perm.len() - 1] {
            *best = best.min(path_length(dist, perm));
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(dist, perm, k + 1, best);
        perm.swap(k, i);
    }
}
