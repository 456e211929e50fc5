use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PotentialSpec;
use crate::{Error, Result};

/// Axis-aligned scan box in `y` with a uniform grid spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub spacing: f64,
}

impl SearchBox {
    pub fn cube(m: usize, half_width: f64, spacing: f64) -> Self {
        Self { lo: vec![-half_width; m], hi: vec![half_width; m], spacing }
    }

    /// Box slightly larger than `[-R', R']^m` with a dimension-dependent grid.
    pub fn around(p: &PotentialSpec) -> Self {
        let m = p.fast_dim();
        let spacing = match m {
            1 => 0.05,
            2 => 0.1,
            _ => 0.25,
        };
        Self::cube(m, 1.05 * p.coercivity_radius(), spacing)
    }

    fn contains(&self, y: &[f64], slack: f64) -> bool {
        y.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - slack && *v <= h + slack)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaOptions {
    /// `None` scans [`SearchBox::around`] the potential.
    pub search: Option<SearchBox>,
    /// Relative band for global ties.
    pub tie_tol: f64,
    /// Polished critical points closer than this are one point.
    pub dedupe_radius: f64,
    /// Smallest Hessian eigenvalue counted as positive definite.
    pub pd_tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimaOptions {
    fn default() -> Self {
        Self {
            search: None,
            tie_tol: 1e-9,
            dedupe_radius: 1e-6,
            pd_tol: 1e-8,
            grad_tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub y: Vec<f64>,
    pub value: f64,
    pub hess_det: f64,
    pub hess_pd: bool,
}

/// Global minimisers of `U(x, ·)` together with every local minimum found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaSet {
    pub x: Vec<f64>,
    pub minima: Vec<Minimum>,
    pub local_minima: Vec<Minimum>,
    pub tie_tol: f64,
}

impl MinimaSet {
    /// Number of global minima.
    pub fn count(&self) -> usize {
        self.minima.len()
    }

    pub fn min_value(&self) -> f64 {
        self.minima.iter().map(|m| m.value).fold(f64::INFINITY, f64::min)
    }
}

/// Grid scan followed by Newton polish; see [`MinimaOptions`] for the knobs.
pub fn find_global_minima(p: &PotentialSpec, x: &[f64], opts: &MinimaOptions) -> Result<MinimaSet> {
    let m = p.fast_dim();
    if x.len() != p.slow_dim() {
        return Err(Error::Dimension(format!("x has length {}, model expects {}", x.len(), p.slow_dim())));
    }
    let search = opts.search.clone().unwrap_or_else(|| SearchBox::around(p));
    if search.lo.len() != m || search.hi.len() != m {
        return Err(Error::Dimension("search box dimension differs from the fast dimension".into()));
    }
    if !(search.spacing > 0.0) {
        return Err(Error::InvalidInput("grid spacing must be positive".into()));
    }
    if search.lo.iter().zip(&search.hi).any(|(l, h)| !(h > l)) {
        return Err(Error::InvalidInput("search box must have positive extent".into()));
    }

    let seeds = grid_seeds(p, x, &search)?;
    let n_seeds = seeds.len();
    let mut queue: Vec<(Vec<f64>, bool)> = seeds.into_iter().map(|s| (s, true)).collect();
    let mut critical: Vec<Vec<f64>> = Vec::new();
    let mut local: Vec<Minimum> = Vec::new();
    let mut any_converged = false;

    while let Some((seed, may_escape)) = queue.pop() {
        let Some(y) = polish(p, x, seed, opts, &search) else { continue };
        any_converged = true;
        if critical.iter().any(|c| dist(c, &y) <= opts.dedupe_radius) {
            continue;
        }
        critical.push(y.clone());
        let hess = p.hess_y(x, &y);
        let eig = hess.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        let min_eig = eig.eigenvalues.min();
        if min_eig < -opts.pd_tol * scale {
            // saddle or maximum: restart just off it along descent directions
            if may_escape {
                let h = 1e-4 * (1.0 + norm(&y));
                for (k, lam) in eig.eigenvalues.iter().enumerate() {
                    if *lam < 0.0 {
                        let v = eig.eigenvectors.column(k);
                        for sign in [-1.0, 1.0] {
                            let s: Vec<f64> = y.iter().zip(v.iter()).map(|(a, b)| a + sign * h * b).collect();
                            queue.push((s, false));
                        }
                    }
                }
            }
            continue;
        }
        if !search.contains(&y, search.spacing) {
            continue;
        }
        local.push(Minimum {
            value: p.value(x, &y),
            hess_det: hess.determinant(),
            hess_pd: min_eig > opts.pd_tol,
            y,
        });
    }

    if !any_converged {
        return Err(Error::NoConvergence { seeds: n_seeds });
    }
    if local.is_empty() {
        return Err(Error::EmptySearch);
    }
    local.sort_by(|a, b| lex_cmp(&a.y, &b.y));
    let vmin = local.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let band = opts.tie_tol * vmin.abs().max(1.0);
    let minima: Vec<Minimum> = local.iter().filter(|m| m.value - vmin <= band).cloned().collect();
    Ok(MinimaSet { x: x.to_vec(), minima, local_minima: local, tie_tol: opts.tie_tol })
}

const MAX_GRID_NODES: usize = 4_000_000;
const MAX_SEEDS: usize = 64;

fn grid_seeds(p: &PotentialSpec, x: &[f64], search: &SearchBox) -> Result<Vec<Vec<f64>>> {
    let m = search.lo.len();
    let counts: Vec<usize> = search
        .lo
        .iter()
        .zip(&search.hi)
        .map(|(l, h)| ((h - l) / search.spacing).ceil() as usize + 1)
        .collect();
    let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    let total = match total {
        Some(t) if t <= MAX_GRID_NODES => t,
        _ => {
            return Err(Error::InvalidInput(format!(
                "search grid too large (limit {MAX_GRID_NODES} nodes); coarsen the spacing"
            )))
        }
    };
    let steps: Vec<f64> = (0..m).map(|i| (search.hi[i] - search.lo[i]) / (counts[i] - 1) as f64).collect();
    let node = |idx: &[usize]| -> Vec<f64> { (0..m).map(|i| search.lo[i] + steps[i] * idx[i] as f64).collect() };

    let mut values = vec![0.0; total];
    let mut idx = vec![0usize; m];
    for v in values.iter_mut() {
        *v = p.value(x, &node(&idx));
        increment(&mut idx, &counts);
    }

    let strides: Vec<usize> = (0..m).map(|i| counts[i + 1..].iter().product()).collect();
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut idx = vec![0usize; m];
    for flat in 0..total {
        let v = values[flat];
        if v.is_finite() && is_local_min(&values, &idx, &counts, &strides, v) {
            candidates.push((v, idx.clone()));
        }
        increment(&mut idx, &counts);
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(MAX_SEEDS);
    Ok(candidates.into_iter().map(|(_, i)| node(&i)).collect())
}

fn increment(idx: &mut [usize], counts: &[usize]) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < counts[i] {
            return;
        }
        idx[i] = 0;
    }
}

fn is_local_min(values: &[f64], idx: &[usize], counts: &[usize], strides: &[usize], v: f64) -> bool {
    let m = idx.len();
    let n_offsets = 3usize.pow(m as u32);
    for code in 0..n_offsets {
        let mut c = code;
        let mut flat = 0isize;
        let mut zero = true;
        let mut inside = true;
        for i in 0..m {
            let off = (c % 3) as isize - 1;
            c /= 3;
            if off != 0 {
                zero = false;
            }
            let j = idx[i] as isize + off;
            if j < 0 || j >= counts[i] as isize {
                inside = false;
                break;
            }
            flat += j * strides[i] as isize;
        }
        if zero || !inside {
            continue;
        }
        if values[flat as usize] < v {
            return false;
        }
    }
    true
}

/// Saddle-free Newton (`|H|` in place of `H`) with Armijo backtracking.
/// Returns the polished point when the gradient tolerance is met.
fn polish(p: &PotentialSpec, x: &[f64], mut y: Vec<f64>, opts: &MinimaOptions, search: &SearchBox) -> Option<Vec<f64>> {
    let m = y.len();
    let max_step = search
        .lo
        .iter()
        .zip(&search.hi)
        .map(|(l, h)| (h - l) * (h - l))
        .sum::<f64>()
        .sqrt()
        / 10.0;
    let mut g = vec![0.0; m];
    let mut trial = vec![0.0; m];
    p.grad_y_into(x, &y, &mut g);
    let mut u = p.value(x, &y);
    for _ in 0..opts.max_iter {
        let gnorm = norm(&g);
        if gnorm == 0.0 {
            return Some(y);
        }
        let hess = p.hess_y(x, &y);
        let mut dir = modified_newton_direction(hess, &g);
        let dnorm = norm(&dir);
        if !dnorm.is_finite() {
            dir = g.iter().map(|v| -v).collect();
        }
        let dnorm = norm(&dir);
        if dnorm > max_step {
            dir.iter_mut().for_each(|d| *d *= max_step / dnorm);
        }
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let slack = 8.0 * f64::EPSILON * u.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            for i in 0..m {
                trial[i] = y[i] + t * dir[i];
            }
            let ut = p.value(x, &trial);
            if ut.is_finite() && ut <= u + 1e-4 * t * slope + slack {
                accepted = true;
                u = ut;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let step = t * norm(&dir);
        std::mem::swap(&mut y, &mut trial);
        p.grad_y_into(x, &y, &mut g);
        if step <= 1e-15 * (1.0 + norm(&y)) && norm(&g) <= opts.grad_tol {
            return Some(y);
        }
    }
    (norm(&g) <= opts.grad_tol && y.iter().all(|v| v.is_finite())).then_some(y)
}

fn modified_newton_direction(hess: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let eig = hess.symmetric_eigen();
    let gv = DVector::from_column_slice(g);
    let scale = eig.eigenvalues.amax().max(1e-300);
    let mut dir = DVector::zeros(g.len());
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let coeff = v.dot(&gv) / lam.abs().max(1e-12 * scale).max(1e-300);
        dir -= v * coeff;
    }
    dir.iter().copied().collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_example_u1, make_example_u2, make_example_u3, make_quadratic_bowl, make_triple_well, Phi};

    #[test]
    fn u1_at_origin_has_two_symmetric_minima() {
        let p = make_example_u1().unwrap();
        let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 2);
        let r = 0.5f64.sqrt();
        assert!((ms.minima[0].y[0] + r).abs() < 1e-12);
        assert!((ms.minima[1].y[0] - r).abs() < 1e-12);
        for m in &ms.minima {
            assert!((m.value - 0.75).abs() < 1e-12);
            assert!(m.hess_pd);
            assert!((m.hess_det - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn u2_merges_at_origin() {
        let p = make_example_u2().unwrap();
        let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 1);
        assert!(ms.minima[0].y[0].abs() < 1e-8);
        assert!((ms.minima[0].value - 1.0).abs() < 1e-12);
        assert!(ms.minima[0].hess_det.abs() < 1e-12);
        assert!(!ms.minima[0].hess_pd);

        let ms = find_global_minima(&p, &[1.0], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 2);
        assert!((ms.minima[1].y[0] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn u2_resolves_minima_closer_than_the_grid() {
        let p = make_example_u2().unwrap();
        let x = 0.01;
        let ms = find_global_minima(&p, &[x], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 2);
        let expect = x / (1.0f64 + x * x).sqrt();
        assert!((ms.minima[1].y[0] - expect).abs() < 1e-12);
        assert!((ms.minima[0].y[0] + expect).abs() < 1e-12);
    }

    #[test]
    fn u3_counts() {
        let p = make_example_u3(Phi::TanhHalf).unwrap();
        let opts = MinimaOptions::default();
        assert_eq!(find_global_minima(&p, &[0.0], &opts).unwrap().count(), 2);
        let right = find_global_minima(&p, &[1.0], &opts).unwrap();
        assert_eq!(right.count(), 1);
        assert!(right.minima[0].y[0] < 0.0);
        let left = find_global_minima(&p, &[-1.0], &opts).unwrap();
        assert_eq!(left.count(), 1);
        assert!(left.minima[0].y[0] > 0.0);
        let rational = make_example_u3(Phi::Rational).unwrap();
        let ms = find_global_minima(&rational, &[1.0], &opts).unwrap();
        assert_eq!(ms.count(), 1);
        assert!(ms.minima[0].y[0] < 0.0);
    }

    #[test]
    fn bowl_has_a_single_minimum_with_unit_determinant() {
        for m in 1..=3 {
            let p = make_quadratic_bowl(m).unwrap();
            let ms = find_global_minima(&p, &[0.3], &MinimaOptions::default()).unwrap();
            assert_eq!(ms.count(), 1);
            assert!(ms.minima[0].y.iter().all(|v| v.abs() < 1e-12));
            assert!((ms.minima[0].hess_det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triple_well_has_three_ties() {
        let p = make_triple_well().unwrap();
        let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
        assert_eq!(ms.count(), 3);
    }

    #[test]
    fn box_without_critical_points_is_empty() {
        let p = make_quadratic_bowl(1).unwrap();
        let opts = MinimaOptions { search: Some(SearchBox { lo: vec![2.0], hi: vec![3.0], spacing: 0.1 }), ..Default::default() };
        assert!(matches!(find_global_minima(&p, &[0.0], &opts), Err(Error::EmptySearch)));
    }

    #[test]
    fn doubling_the_grid_resolution_changes_nothing() {
        let p = make_example_u1().unwrap();
        for x in [-2.0, -0.3, 0.0, 0.8, 2.5] {
            let coarse = find_global_minima(&p, &[x], &MinimaOptions::default()).unwrap();
            let fine_opts = MinimaOptions { search: Some(SearchBox::cube(1, 21.0, 0.025)), ..Default::default() };
            let fine = find_global_minima(&p, &[x], &fine_opts).unwrap();
            assert_eq!(coarse.count(), fine.count());
            for (a, b) in coarse.minima.iter().zip(&fine.minima) {
                assert!((a.y[0] - b.y[0]).abs() < 1e-8);
            }
        }
    }
}
