use nalgebra::DMatrix;

use crate::io::CsvTable;
use crate::potential::{find_global_minima, MinimaOptions, MinimaSet, PotentialSpec};
use crate::{Error, Result};

/// Exhaustive W-graph enumeration is limited to this many minima.
pub const MAX_WGRAPH_MINIMA: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ActionScheme {
    /// Gradient at the left node of each interval.
    #[default]
    LeftPoint,
    /// Gradient at the interval midpoint.
    Midpoint,
}

/// Discretised `S_T(φ) = ∫ |φ' + ∇_y U(x, φ)|² dt` for a path given as
/// row-major `times.len() x m` nodes.
pub fn action_functional(
    p: &PotentialSpec,
    x: &[f64],
    path: &[f64],
    times: &[f64],
    scheme: ActionScheme,
) -> Result<f64> {
    let m = p.fast_dim();
    if path.len() != times.len() * m {
        return Err(Error::Dimension("path length must equal times.len() * m".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    if path.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("path must be finite".into()));
    }
    let mut grad = vec![0.0; m];
    let mut at = vec![0.0; m];
    let mut total = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let h = times[k + 1] - times[k];
        let a = &path[k * m..(k + 1) * m];
        let b = &path[(k + 1) * m..(k + 2) * m];
        match scheme {
            ActionScheme::LeftPoint => at.copy_from_slice(a),
            ActionScheme::Midpoint => at.iter_mut().zip(a.iter().zip(b)).for_each(|(o, (u, v))| *o = 0.5 * (u + v)),
        }
        p.grad_y_into(x, &at, &mut grad);
        let sq: f64 = (0..m).map(|j| ((b[j] - a[j]) / h + grad[j]).powi(2)).sum();
        total += sq * h;
    }
    Ok(total)
}

/// Local extrema of `U(x, ·)` strictly inside `(a, b)`, in increasing order.
fn interior_extrema(p: &PotentialSpec, x: &[f64], a: f64, b: f64) -> Vec<f64> {
    const N: usize = 4000;
    let du = |y: f64| p.grad_y(x, &[y])[0];
    let h = (b - a) / N as f64;
    let mut out = Vec::new();
    let mut prev = du(a + 1e-9 * h);
    for k in 1..=N {
        let right = if k == N { b - 1e-9 * h } else { a + k as f64 * h };
        let cur = du(right);
        if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = (a + (k - 1) as f64 * h, right);
            let neg_lo = prev < 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (du(mid) < 0.0) == neg_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    out
}

/// Pairwise one-dimensional quasipotential between the global minima.
///
/// The cheapest path from `y_i` to `y_j` climbs every ascent of `U` on the
/// segment between them at cost `4 ΔU` and descends for free. Entries are
/// `+inf` when another global minimum lies strictly between the two.
pub fn quasipotential_1d(p: &PotentialSpec, x: &[f64], ms: &MinimaSet) -> Result<DMatrix<f64>> {
    if p.fast_dim() != 1 {
        return Err(Error::Dimension("quasipotential is one-dimensional only".into()));
    }
    let l = ms.count();
    let ys: Vec<f64> = ms.minima.iter().map(|mn| mn.y[0]).collect();
    let mut v = DMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let (lo, hi) = (ys[i].min(ys[j]), ys[i].max(ys[j]));
            if ys.iter().enumerate().any(|(k, y)| k != i && k != j && *y > lo && *y < hi) {
                v[(i, j)] = f64::INFINITY;
                continue;
            }
            let mut stops = vec![ys[i]];
            let mut inner = interior_extrema(p, x, lo, hi);
            if ys[i] > ys[j] {
                inner.reverse();
            }
            stops.extend(inner);
            stops.push(ys[j]);
            let values: Vec<f64> = stops.iter().map(|y| p.value(x, &[*y])).collect();
            let ascent: f64 = values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
            v[(i, j)] = 4.0 * ascent;
        }
    }
    Ok(v)
}

/// `V^l = min` over W-graphs with `|W| = l` of the summed edge costs, for
/// `l = 1..=L`. An edge `i -> j` costs `vtilde[(i, j)]`.
pub fn w_graph_constants(vtilde: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = vtilde.nrows();
    if vtilde.ncols() != l {
        return Err(Error::Dimension("quasipotential matrix must be square".into()));
    }
    if l > MAX_WGRAPH_MINIMA {
        return Err(Error::TooManyMinima(l));
    }
    if l == 0 {
        return Ok(Vec::new());
    }
    let mut best = vec![f64::INFINITY; l];
    let mut target = vec![usize::MAX; l];
    for w in 1u32..(1 << l) {
        let free: Vec<usize> = (0..l).filter(|i| w & (1 << i) == 0).collect();
        let size = l - free.len();
        assign(vtilde, w, &free, 0, 0.0, &mut target, &mut best[size - 1]);
    }
    Ok(best)
}

fn assign(v: &DMatrix<f64>, w: u32, free: &[usize], k: usize, cost: f64, target: &mut [usize], best: &mut f64) {
    if k == free.len() {
        if reaches_w(w, free, target) && cost < *best {
            *best = cost;
        }
        return;
    }
    let i = free[k];
    for j in 0..v.nrows() {
        if j != i {
            target[i] = j;
            assign(v, w, free, k + 1, cost + v[(i, j)], target, best);
        }
    }
    target[i] = usize::MAX;
}

fn reaches_w(w: u32, free: &[usize], target: &[usize]) -> bool {
    free.iter().all(|&start| {
        let mut i = start;
        for _ in 0..=target.len() {
            if w & (1 << i) != 0 {
                return true;
            }
            i = target[i];
        }
        false
    })
}

/// Per-`x` quasipotential data and `Λ̂ = max_x [V¹(x) - V²(x)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasipotentialReport {
    pub x_grid: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub vtilde: Vec<DMatrix<f64>>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub lambda_hat: f64,
    pub argmax: Vec<f64>,
}

impl QuasipotentialReport {
    pub fn to_table(&self) -> CsvTable {
        let d = self.x_grid.first().map_or(1, Vec::len);
        let mut cols: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        cols.extend(["L", "v1", "v2", "v1_minus_v2"].map(String::from));
        let mut t = CsvTable::new(cols);
        for (k, x) in self.x_grid.iter().enumerate() {
            let mut row = x.clone();
            row.extend([self.counts[k] as f64, self.v1[k], self.v2[k], gap(self.v1[k], self.v2[k])]);
            t.push(row);
        }
        t
    }
}

fn gap(v1: f64, v2: f64) -> f64 {
    if v1.is_infinite() {
        f64::INFINITY
    } else {
        v1 - v2
    }
}

pub fn estimate_lambda(p: &PotentialSpec, x_grid: &[Vec<f64>], opts: &MinimaOptions) -> Result<QuasipotentialReport> {
    if p.fast_dim() != 1 {
        return Err(Error::Dimension("quasipotential is one-dimensional only".into()));
    }
    let mut rep = QuasipotentialReport {
        x_grid: x_grid.to_vec(),
        counts: Vec::new(),
        vtilde: Vec::new(),
        v1: Vec::new(),
        v2: Vec::new(),
        lambda_hat: 0.0,
        argmax: x_grid.first().cloned().unwrap_or_default(),
    };
    for x in x_grid {
        let ms = find_global_minima(p, x, opts)?;
        let vt = quasipotential_1d(p, x, &ms)?;
        let (v1, v2) = if ms.count() == 1 {
            (0.0, 0.0)
        } else {
            let vs = w_graph_constants(&vt)?;
            (vs[0], vs[1])
        };
        let g = gap(v1, v2);
        if g > rep.lambda_hat {
            rep.lambda_hat = g;
            rep.argmax = x.clone();
        }
        rep.counts.push(ms.count());
        rep.vtilde.push(vt);
        rep.v1.push(v1);
        rep.v2.push(v2);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_example_u1, make_quadratic_bowl, make_triple_well};

    #[test]
    fn two_by_two() {
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 1.5, 0.0]);
        assert_eq!(w_graph_constants(&v).unwrap(), vec![1.5, 0.0]);
    }

    #[test]
    fn symmetric_chain() {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
        assert_eq!(w_graph_constants(&v).unwrap(), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn too_many_minima() {
        assert!(matches!(w_graph_constants(&DMatrix::zeros(7, 7)), Err(Error::TooManyMinima(7))));
    }

    #[test]
    fn u1_barrier() {
        let p = make_example_u1().unwrap();
        let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
        let v = quasipotential_1d(&p, &[0.0], &ms).unwrap();
        assert!((v[(0, 1)] - 1.0).abs() < 1e-9);
        assert_eq!(v[(0, 1)], v[(1, 0)]);
    }

    #[test]
    fn triple_well_blocks_pass_through() {
        let p = make_triple_well().unwrap();
        let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 3);
        let v = quasipotential_1d(&p, &[0.0], &ms).unwrap();
        let ys: Vec<f64> = ms.minima.iter().map(|m| m.y[0]).collect();
        let (lo, hi) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let i = ys.iter().position(|y| *y == lo).unwrap();
        let j = ys.iter().position(|y| *y == hi).unwrap();
        assert!(v[(i, j)].is_infinite());
        let vs = w_graph_constants(&v).unwrap();
        assert!(vs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bowl_lambda_is_zero() {
        let p = make_quadratic_bowl(1).unwrap();
        let rep = estimate_lambda(&p, &[vec![0.0], vec![1.0]], &MinimaOptions::default()).unwrap();
        assert_eq!(rep.lambda_hat, 0.0);
    }

    #[test]
    fn constant_path_at_critical_point_has_zero_action() {
        let p = make_example_u1().unwrap();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let path = vec![0.0; 11];
        assert_eq!(action_functional(&p, &[0.0], &path, &times, ActionScheme::LeftPoint).unwrap(), 0.0);
    }
}
