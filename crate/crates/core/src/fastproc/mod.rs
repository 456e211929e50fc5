//! The frozen fast process: Gibbs invariant measures on quadrature grids,
//! their Laplace limits, relaxation times, the action functional,
//! one-dimensional quasipotentials and W-graph constants.

mod action;
mod relax;

use serde::{Deserialize, Serialize};

use crate::io::CsvTable;
use crate::potential::{MinimaOptions, MinimaSet, PotentialSpec};
use crate::{Error, Result};

pub use action::{
    action_functional, estimate_lambda, quasipotential_1d, w_graph_constants, ActionScheme, QuasipotentialReport,
    MAX_WGRAPH_MINIMA,
};
pub use relax::{estimate_relaxation_time, RelaxationConfig, RelaxationFit};

/// Largest admissible tail mass outside the quadrature box.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Determinants at or below this are treated as singular by the Laplace limit.
pub const SINGULAR_DET_TOL: f64 = 1e-8;

/// Tensor grid `[-half_width, half_width]^m` with uniform spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, spacing: f64) -> Self {
        Self { half_width, spacing }
    }

    /// Box covering `[-R', R']^m`, widened until the tail bound is below
    /// [`TAIL_TOLERANCE`] / 100. Spacing resolves wells of curvature up to ~16.
    pub fn auto(p: &PotentialSpec, x: &[f64], s_val: f64) -> Result<Self> {
        if p.fast_dim() > 2 {
            return Err(Error::Dimension("quadrature supports m ≤ 2".into()));
        }
        let spacing = match p.fast_dim() {
            1 => (s_val / 40.0).min(0.01),
            _ => (s_val / 10.0).min(0.05),
        };
        let mut half = 1.05 * p.coercivity_radius();
        for _ in 0..40 {
            let log_z = coarse_log_normalizer(p, x, s_val, half)?;
            if tail_bound(p, x, s_val, half, log_z)? < TAIL_TOLERANCE / 100.0 {
                return Ok(Self { half_width: half, spacing });
            }
            half *= 1.25;
        }
        let log_z = coarse_log_normalizer(p, x, s_val, half)?;
        Err(Error::TailMassTooLarge { estimate: tail_bound(p, x, s_val, half, log_z)? })
    }

    fn axis(&self) -> Vec<f64> {
        let n = (2.0 * self.half_width / self.spacing).ceil().max(2.0) as usize;
        let h = 2.0 * self.half_width / n as f64;
        (0..=n).map(|k| -self.half_width + k as f64 * h).collect()
    }
}

/// Coercivity constant: declared `K4`, or a sampled lower bound of
/// `<grad U, y> / |y|²` on radii `[r, 4r]`.
fn coercivity_constant(p: &PotentialSpec, x: &[f64], r: f64) -> f64 {
    if let Some(c) = p.declared() {
        if c.K4 > 0.0 {
            return c.K4;
        }
    }
    let m = p.fast_dim();
    let mut best = f64::INFINITY;
    let mut g = vec![0.0; m];
    for dir in sphere_directions(m, 64) {
        for k in 0..16 {
            let rad = r * (1.0 + 3.0 * k as f64 / 15.0);
            let y: Vec<f64> = dir.iter().map(|d| d * rad).collect();
            p.grad_y_into(x, &y, &mut g);
            let q = g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / (rad * rad);
            best = best.min(q);
        }
    }
    best
}

fn sphere_directions(m: usize, n: usize) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on S²; higher m never reaches quadrature
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = k as f64 * 2.399_963_229_728_653;
                    let mut v = vec![0.0; m];
                    v[0] = r * phi.cos();
                    v[1] = r * phi.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Upper bound on the Gibbs mass outside the box `[-Y, Y]^m`, relative to
/// `exp(log_z)`. Uses `U(r θ) >= U(Y θ) + K4 (r² - Y²)/2` along rays beyond `Y`.
fn tail_bound(p: &PotentialSpec, x: &[f64], s_val: f64, half: f64, log_z: f64) -> Result<f64> {
    let m = p.fast_dim();
    if m > 2 {
        return Err(Error::Dimension("quadrature supports m ≤ 2".into()));
    }
    let k4 = coercivity_constant(p, x, half);
    if !(k4 > 0.0) {
        return Ok(f64::INFINITY);
    }
    let s2 = s_val * s_val;
    let edge_min = sphere_directions(m, 720)
        .iter()
        .map(|d| {
            let y: Vec<f64> = d.iter().map(|v| v * half).collect();
            p.value(x, &y)
        })
        .fold(f64::INFINITY, f64::min);
    let log_num = match m {
        1 => (2.0 * s2 / (2.0 * k4 * half)).ln(),
        _ => (std::f64::consts::PI * s2 / k4).ln(),
    } - 2.0 * edge_min / s2;
    Ok((log_num - log_z).exp())
}

/// Trapezoid `ln ∫_box exp(-2U/s²)` on a coarse grid.
fn coarse_log_normalizer(p: &PotentialSpec, x: &[f64], s_val: f64, half: f64) -> Result<f64> {
    let grid = GridSpec::new(half, (s_val / 8.0).min(half / 50.0));
    Ok(quadrature(p, x, s_val, &grid)?.log_normalizer)
}

/// Gibbs measure `∝ exp(-2 U(x, y) / s²)` on a tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub m: usize,
    pub x: Vec<f64>,
    pub s_val: f64,
    pub axis: Vec<f64>,
    /// Row-major `n_nodes x m`; first coordinate varies fastest.
    pub nodes: Vec<f64>,
    pub log_density: Vec<f64>,
    /// Log of the trapezoid normaliser.
    pub log_normalizer: f64,
    pub weights: Vec<f64>,
    pub tail_bound: f64,
}

impl GridMeasure {
    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.m..(i + 1) * self.m]
    }

    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        (0..self.n_nodes()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }

    pub fn mass_in_ball(&self, center: &[f64], radius: f64) -> f64 {
        self.expectation(|y| if dist(y, center) <= radius { 1.0 } else { 0.0 })
    }

    pub fn to_table(&self) -> CsvTable {
        let mut cols: Vec<String> = (1..=self.m).map(|i| format!("y_{i}")).collect();
        cols.extend(["log_density".to_string(), "weight".to_string()]);
        let mut t = CsvTable::new(cols);
        for i in 0..self.n_nodes() {
            let mut row = self.node(i).to_vec();
            row.extend([self.log_density[i], self.weights[i]]);
            t.push(row);
        }
        t
    }
}

pub fn invariant_density_grid(p: &PotentialSpec, x: &[f64], s_val: f64, grid: &GridSpec) -> Result<GridMeasure> {
    let m = p.fast_dim();
    if m > 2 {
        return Err(Error::Dimension("quadrature supports m ≤ 2".into()));
    }
    if !(s_val > 0.0 && s_val.is_finite()) {
        return Err(Error::Domain(format!("s must be positive, got {s_val}")));
    }
    if x.len() != p.slow_dim() {
        return Err(Error::Dimension("x has the wrong length".into()));
    }
    if !(grid.spacing > 0.0 && grid.half_width > 0.0) {
        return Err(Error::InvalidInput("grid spacing and half width must be positive".into()));
    }
    let mut g = quadrature(p, x, s_val, grid)?;
    g.tail_bound = tail_bound(p, x, s_val, grid.half_width, g.log_normalizer)?;
    if !(g.tail_bound < TAIL_TOLERANCE) {
        return Err(Error::TailMassTooLarge { estimate: g.tail_bound });
    }
    Ok(g)
}

fn quadrature(p: &PotentialSpec, x: &[f64], s_val: f64, grid: &GridSpec) -> Result<GridMeasure> {
    let m = p.fast_dim();
    if m > 2 {
        return Err(Error::Dimension("quadrature supports m ≤ 2".into()));
    }
    let axis = grid.axis();
    let n = axis.len();
    let h = axis[1] - axis[0];
    let trap = |k: usize| if k == 0 || k == n - 1 { 0.5 * h } else { h };
    let total = n.pow(m as u32);
    let s2 = s_val * s_val;
    let mut nodes = Vec::with_capacity(total * m);
    let mut log_density = Vec::with_capacity(total);
    let mut log_w = Vec::with_capacity(total);
    let mut y = vec![0.0; m];
    for idx in 0..total {
        let mut r = idx;
        let mut cell = 1.0;
        for v in y.iter_mut() {
            let k = r % n;
            *v = axis[k];
            cell *= trap(k);
            r /= n;
        }
        let ld = -2.0 * p.value(x, &y) / s2;
        nodes.extend_from_slice(&y);
        log_density.push(ld);
        log_w.push(ld + cell.ln());
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(GridMeasure {
        m,
        x: x.to_vec(),
        s_val,
        axis,
        nodes,
        log_density,
        log_normalizer: top + sum.ln(),
        weights,
        tail_bound: f64::NAN,
    })
}

pub fn invariant_expectation<F: Fn(&[f64]) -> f64>(g: &GridMeasure, f: F) -> f64 {
    g.expectation(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub weight: f64,
}

/// Finitely supported limit of the Gibbs measures as `s -> 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.location)).sum()
    }

    pub fn to_table(&self) -> CsvTable {
        let m = self.atoms.first().map_or(1, |a| a.location.len());
        let mut cols: Vec<String> = vec!["atom".into()];
        cols.extend((1..=m).map(|i| format!("y_{i}")));
        cols.push("weight".into());
        let mut t = CsvTable::new(cols);
        for (i, a) in self.atoms.iter().enumerate() {
            let mut row = vec![i as f64];
            row.extend_from_slice(&a.location);
            row.push(a.weight);
            t.push(row);
        }
        t
    }
}

/// Weights `det(D²U)^{-1/2}`, normalised over the global minima.
pub fn laplace_limit_measure(ms: &MinimaSet) -> Result<AtomicMeasure> {
    if ms.minima.is_empty() {
        return Err(Error::EmptySearch);
    }
    for mn in &ms.minima {
        if !mn.hess_pd || mn.hess_det <= SINGULAR_DET_TOL {
            return Err(Error::SingularHessian { det: mn.hess_det });
        }
    }
    let raw: Vec<f64> = ms.minima.iter().map(|mn| mn.hess_det.powf(-0.5)).collect();
    let total: f64 = raw.iter().sum();
    Ok(AtomicMeasure {
        atoms: ms
            .minima
            .iter()
            .zip(raw)
            .map(|(mn, r)| Atom { location: mn.y.clone(), weight: r / total })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceErrorRow {
    pub s: f64,
    pub atom: usize,
    pub location: Vec<f64>,
    pub ball_mass: f64,
    pub laplace_weight: f64,
    pub error: f64,
}

/// Gibbs mass of a ball around each minimum against its Laplace weight,
/// for each noise level in `s_list`.
pub fn laplace_vs_quadrature(
    p: &PotentialSpec,
    x: &[f64],
    s_list: &[f64],
    ball_radius: f64,
    opts: &MinimaOptions,
) -> Result<Vec<LaplaceErrorRow>> {
    let ms = crate::potential::find_global_minima(p, x, opts)?;
    let atoms = laplace_limit_measure(&ms)?;
    for (i, a) in atoms.atoms.iter().enumerate() {
        for b in &atoms.atoms[i + 1..] {
            if dist(&a.location, &b.location) <= 2.0 * ball_radius {
                return Err(Error::InvalidInput("balls around the minima overlap".into()));
            }
        }
    }
    let mut rows = Vec::new();
    for &s in s_list {
        let grid = GridSpec::auto(p, x, s)?;
        let g = invariant_density_grid(p, x, s, &grid)?;
        for (i, a) in atoms.atoms.iter().enumerate() {
            let mass = g.mass_in_ball(&a.location, ball_radius);
            rows.push(LaplaceErrorRow {
                s,
                atom: i,
                location: a.location.clone(),
                ball_mass: mass,
                laplace_weight: a.weight,
                error: (mass - a.weight).abs(),
            });
        }
    }
    Ok(rows)
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{find_global_minima, make_example_u1, make_quadratic_bowl, Minimum};

    #[test]
    fn bowl_second_moment() {
        let p = make_quadratic_bowl(1).unwrap();
        let grid = GridSpec::auto(&p, &[0.0], 0.5).unwrap();
        let g = invariant_density_grid(&p, &[0.0], 0.5, &grid).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((invariant_expectation(&g, |_| 1.0) - 1.0).abs() < 1e-12);
        assert!((invariant_expectation(&g, |y| y[0] * y[0]) - 0.125).abs() < 1e-6);
    }

    #[test]
    fn bowl_2d_second_moment() {
        let p = make_quadratic_bowl(2).unwrap();
        let grid = GridSpec::auto(&p, &[0.0], 0.5).unwrap();
        let g = invariant_density_grid(&p, &[0.0], 0.5, &grid).unwrap();
        assert!((g.expectation(|y| y[0] * y[0] + y[1] * y[1]) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn three_dims_are_rejected() {
        let p = make_quadratic_bowl(3).unwrap();
        let err = invariant_density_grid(&p, &[0.0], 0.5, &GridSpec::new(3.0, 0.1)).unwrap_err();
        assert!(err.to_string().contains("quadrature supports m ≤ 2"));
    }

    #[test]
    fn small_box_is_rejected() {
        let p = make_quadratic_bowl(1).unwrap();
        let err = invariant_density_grid(&p, &[0.0], 0.5, &GridSpec::new(1.0, 0.01)).unwrap_err();
        assert!(matches!(err, Error::TailMassTooLarge { .. }));
    }

    #[test]
    fn u1_symmetry() {
        let p = make_example_u1().unwrap();
        for s in [0.2, 0.5, 1.0] {
            let g = invariant_density_grid(&p, &[0.0], s, &GridSpec::auto(&p, &[0.0], s).unwrap()).unwrap();
            let pos = g.expectation(|y| if y[0] > 0.0 { 1.0 } else if y[0] == 0.0 { 0.5 } else { 0.0 });
            assert!((pos - 0.5).abs() < 1e-9, "s={s}: {pos}");
            assert!(g.expectation(|y| y[0]).abs() < 1e-9);
        }
    }

    fn set(dets: &[f64]) -> MinimaSet {
        MinimaSet {
            x: vec![0.0],
            minima: dets
                .iter()
                .enumerate()
                .map(|(i, d)| Minimum { y: vec![i as f64], value: 0.0, hess_det: *d, hess_pd: true })
                .collect(),
            local_minima: vec![],
            tie_tol: 1e-9,
        }
    }

    #[test]
    fn laplace_weights() {
        let w = laplace_limit_measure(&set(&[1.0, 4.0])).unwrap();
        assert!((w.atoms[0].weight - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.atoms[1].weight - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(laplace_limit_measure(&set(&[2.5])).unwrap().atoms[0].weight, 1.0);
        assert!(matches!(laplace_limit_measure(&set(&[1.0, 0.0])), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn u1_laplace_is_even() {
        let p = make_example_u1().unwrap();
        let ms = find_global_minima(&p, &[0.3], &MinimaOptions::default()).unwrap();
        let w = laplace_limit_measure(&ms).unwrap();
        assert_eq!(w.atoms.len(), 2);
        assert!((w.atoms[0].weight - 0.5).abs() < 1e-12);
    }
}
