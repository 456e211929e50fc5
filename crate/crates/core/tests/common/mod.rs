//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `V^l` for `l = 1..=L` by enumerating every subset of the `L(L-1)` directed
/// edges and keeping those that form a W-graph for the set `W` of vertices
/// without an outgoing edge.
pub fn brute_force_w_graph(v: &[Vec<f64>]) -> Vec<f64> {
    let l = v.len();
    let edges: Vec<(usize, usize)> =
        (0..l).flat_map(|i| (0..l).filter(move |j| *j != i).map(move |j| (i, j))).collect();
    let mut best = vec![f64::INFINITY; l];
    for mask in 0u64..(1u64 << edges.len()) {
        let mut out = vec![None; l];
        let mut ok = true;
        let mut cost = 0.0;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                if out[i].is_some() {
                    ok = false;
                    break;
                }
                out[i] = Some(j);
                cost += v[i][j];
            }
        }
        if !ok {
            continue;
        }
        let w = out.iter().filter(|o| o.is_none()).count();
        if w == 0 {
            continue;
        }
        let acyclic = (0..l).all(|start| {
            let mut i = start;
            for _ in 0..=l {
                match out[i] {
                    None => return true,
                    Some(j) => i = j,
                }
            }
            false
        });
        if acyclic && cost < best[w - 1] {
            best[w - 1] = cost;
        }
    }
    best
}

/// Random pairwise costs on a quarter-integer lattice (so sums are exact),
/// with occasional infinite entries.
pub fn random_cost_matrix(l: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..l)
        .map(|i| {
            (0..l)
                .map(|j| {
                    if i == j {
                        0.0
                    } else if rng.random::<f64>() < 0.1 {
                        f64::INFINITY
                    } else {
                        0.25 * rng.random_range(0..40) as f64
                    }
                })
                .collect()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact filter for `dX = Y dt + sigma1 dW`, `Y_{k+1} = a Y_k + sqrt(q) xi`,
/// observing `dx_k = X_{k+1} - X_k`. Returns the predicted `(mean, var)` of
/// `Y_k` given `dx_0..dx_{k-1}` for `k = 0..=n`.
pub fn kalman_predictions(m0: f64, p0: f64, a: f64, q: f64, sigma1: f64, dt: f64, dx: &[f64]) -> Vec<(f64, f64)> {
    let (mut m, mut p) = (m0, p0);
    let r = sigma1 * sigma1 * dt;
    let mut out = vec![(m, p)];
    for z in dx {
        let k = p * dt / (p * dt * dt + r);
        m += k * (z - m * dt);
        p *= 1.0 - k * dt;
        m *= a;
        p = a * a * p + q;
        out.push((m, p));
    }
    out
}

/// Central difference of a scalar function along coordinate `j`.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], j: usize, h: f64) -> f64 {
    let mut a = at.to_vec();
    let mut b = at.to_vec();
    a[j] += h;
    b[j] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// `|a - b| <= tol * max(|a|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

/// Classical RK4 for the scalar ODE `y' = f(y)`, `sub` substeps per interval,
/// sampled at `n + 1` nodes spaced `h`.
pub fn rk4_path<F: Fn(f64) -> f64>(f: F, y0: f64, h: f64, n: usize, sub: usize) -> Vec<f64> {
    let mut y = y0;
    let mut out = vec![y];
    let k = h / sub as f64;
    for _ in 0..n {
        for _ in 0..sub {
            let a = f(y);
            let b = f(y + 0.5 * k * a);
            let c = f(y + 0.5 * k * b);
            let d = f(y + k * c);
            y += k / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
        out.push(y);
    }
    out
}

/// `E sup_{t <= 1} |B_t| = sqrt(pi / 2)` for a standard Brownian motion.
pub const BROWNIAN_ABS_SUP_MEAN: f64 = 1.253_314_137_315_500_3;
