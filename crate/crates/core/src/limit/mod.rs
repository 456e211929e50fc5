//! Averaged drift, the limit ODE, Filippov enlargements and the
//! coupled-to-limit convergence study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fastproc::{invariant_density_grid, laplace_limit_measure, GridSpec};
use crate::io::CsvTable;
use crate::potential::{find_global_minima, DriftSpec, MinimaOptions, PotentialSpec};
use crate::rng::derive_seed;
use crate::sde::{simulate_coupled_path, NoiseSchedule, SimConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldMode {
    /// Determinant-weighted average over the global minima.
    Laplace,
    /// Average against the Gibbs measure at noise level `s_val`.
    Quadrature { s_val: f64, spacing: Option<f64> },
}

/// `h(x) = ∫ b(x, y) nu^x(dy)` for a limit or finite-noise measure `nu^x`.
#[derive(Clone, Debug)]
pub struct AveragedField {
    pub potential: PotentialSpec,
    pub drift: DriftSpec,
    pub mode: FieldMode,
    pub minima: MinimaOptions,
    /// Use `b(x, y_1)` when the minimum is unique even if its Hessian is singular.
    pub patch_unique_minimum: bool,
}

impl AveragedField {
    pub fn new(potential: PotentialSpec, drift: DriftSpec, mode: FieldMode) -> Result<Self> {
        if potential.slow_dim() != drift.slow_dim() || potential.fast_dim() != drift.fast_dim() {
            return Err(Error::Dimension("drift and potential dimensions differ".into()));
        }
        Ok(Self { potential, drift, mode, minima: MinimaOptions::default(), patch_unique_minimum: false })
    }

    pub fn slow_dim(&self) -> usize {
        self.potential.slow_dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        averaged_drift(self, x)
    }
}

pub fn averaged_drift(f: &AveragedField, x: &[f64]) -> Result<Vec<f64>> {
    let d = f.slow_dim();
    if x.len() != d {
        return Err(Error::Dimension(format!("x has length {}, expected {d}", x.len())));
    }
    let mut out = vec![0.0; d];
    let mut buf = vec![0.0; d];
    match &f.mode {
        FieldMode::Laplace => {
            let ms = find_global_minima(&f.potential, x, &f.minima)?;
            let atoms = match laplace_limit_measure(&ms) {
                Err(Error::SingularHessian { .. }) if f.patch_unique_minimum && ms.count() == 1 => {
                    f.drift.eval_into(x, &ms.minima[0].y, &mut out);
                    return Ok(out);
                }
                other => other?,
            };
            for a in &atoms.atoms {
                f.drift.eval_into(x, &a.location, &mut buf);
                out.iter_mut().zip(&buf).for_each(|(o, v)| *o += a.weight * v);
            }
        }
        FieldMode::Quadrature { s_val, spacing } => {
            let mut grid = GridSpec::auto(&f.potential, x, *s_val)?;
            if let Some(h) = spacing {
                grid.spacing = *h;
            }
            let g = invariant_density_grid(&f.potential, x, *s_val, &grid)?;
            for i in 0..g.n_nodes() {
                let w = g.weights[i];
                if w == 0.0 {
                    continue;
                }
                f.drift.eval_into(x, g.node(i), &mut buf);
                out.iter_mut().zip(&buf).for_each(|(o, v)| *o += w * v);
            }
        }
    }
    Ok(out)
}

/// Limit path on a uniform grid; `flagged[k]` marks steps that needed a
/// one-sided evaluation at a singular point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTrajectory {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub d: usize,
    pub flagged: Vec<bool>,
}

impl LimitTrajectory {
    pub fn x(&self, k: usize) -> &[f64] {
        &self.xs[k * self.d..(k + 1) * self.d]
    }

    /// Linear interpolation; clamps outside the time range.
    pub fn at(&self, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        let h = self.times[1] - self.times[0];
        let k = ((t - self.times[0]) / h).floor().clamp(0.0, (n - 2) as f64) as usize;
        let lam = ((t - self.times[k]) / h).clamp(0.0, 1.0);
        for j in 0..self.d {
            out[j] = (1.0 - lam) * self.xs[k * self.d + j] + lam * self.xs[(k + 1) * self.d + j];
        }
    }

    pub fn to_table(&self) -> CsvTable {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.d).map(|i| format!("x_{i}")));
        cols.push("flagged".into());
        let mut t = CsvTable::new(cols);
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k]];
            row.extend_from_slice(self.x(k));
            row.push(if self.flagged[k] { 1.0 } else { 0.0 });
            t.push(row);
        }
        t
    }
}

/// Distance used to step off a singular point.
const ONE_SIDED_OFFSET: f64 = 1e-7;

/// Field value at `x`; at singular points, evaluates just off `x` on the side
/// of `prev` and reports that it did.
fn eval_one_sided(f: &AveragedField, x: &[f64], prev: &[f64]) -> Result<(Vec<f64>, bool)> {
    match averaged_drift(f, x) {
        Ok(v) => Ok((v, false)),
        Err(Error::SingularHessian { .. }) => {
            let mut dir: Vec<f64> = prev.iter().zip(x).map(|(p, q)| p - q).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                dir.iter_mut().for_each(|v| *v /= n);
            } else {
                dir.iter_mut().for_each(|v| *v = 0.0);
                dir[0] = 1.0;
            }
            let shifted: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + ONE_SIDED_OFFSET * u).collect();
            Ok((averaged_drift(f, &shifted)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Classical RK4 for `x' = h(x)` on `[0, T]` with step close to `dt`.
pub fn solve_limit_ode(f: &AveragedField, x0: &[f64], horizon: f64, dt: f64) -> Result<LimitTrajectory> {
    let d = f.slow_dim();
    if x0.len() != d {
        return Err(Error::Dimension("x0 has the wrong length".into()));
    }
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidInput("dt and T must be positive".into()));
    }
    let n = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity((n + 1) * d);
    let mut flagged = vec![false; n + 1];
    times.push(0.0);
    xs.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut prev = x0.to_vec();
    let axpy = |a: &[f64], s: f64, k: &[f64]| -> Vec<f64> { a.iter().zip(k).map(|(u, v)| u + s * v).collect() };
    for step in 0..n {
        let (k1, f1) = eval_one_sided(f, &x, &prev)?;
        let (k2, f2) = eval_one_sided(f, &axpy(&x, 0.5 * h, &k1), &x)?;
        let (k3, f3) = eval_one_sided(f, &axpy(&x, 0.5 * h, &k2), &x)?;
        let (k4, f4) = eval_one_sided(f, &axpy(&x, h, &k3), &x)?;
        flagged[step] |= f1 || f2 || f3 || f4;
        prev.copy_from_slice(&x);
        for j in 0..d {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        times.push(if step + 1 == n { horizon } else { (step + 1) as f64 * h });
        xs.extend_from_slice(&x);
    }
    Ok(LimitTrajectory { times, xs, d, flagged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilippovProbe {
    /// Neighbourhood radii, largest first.
    pub deltas: Vec<f64>,
    /// Field samples per radius.
    pub samples: usize,
}

impl Default for FilippovProbe {
    fn default() -> Self {
        Self { deltas: vec![1e-2, 1e-3, 1e-4], samples: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hull {
    Interval { lo: f64, hi: f64 },
    /// Sampled points whose convex hull approximates the set.
    Points { points: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilippovSet {
    pub x: Vec<f64>,
    pub hull: Hull,
}

impl FilippovSet {
    /// Euclidean distance from `v` to the set.
    pub fn distance(&self, v: &[f64]) -> f64 {
        match &self.hull {
            Hull::Interval { lo, hi } => (lo - v[0]).max(v[0] - hi).max(0.0),
            Hull::Points { points } => hull_distance(points, v),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.hull {
            Hull::Interval { lo, hi } => hi - lo,
            Hull::Points { points } => {
                let mut best: f64 = 0.0;
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        best = best.max(crate::fastproc::dist(a, b));
                    }
                }
                best
            }
        }
    }
}

/// Frank-Wolfe on the simplex of hull weights.
fn hull_distance(points: &[Vec<f64>], v: &[f64]) -> f64 {
    let d = v.len();
    let mut c = points[0].clone();
    for it in 0..500 {
        let g: Vec<f64> = (0..d).map(|j| c[j] - v[j]).collect();
        let (best, _) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()))
            .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
        let s = &points[best];
        let dir: Vec<f64> = (0..d).map(|j| s[j] - c[j]).collect();
        let dd: f64 = dir.iter().map(|a| a * a).sum();
        if dd == 0.0 {
            break;
        }
        let step = (-(g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()) / dd).clamp(0.0, 1.0);
        if step == 0.0 && it > 0 {
            break;
        }
        c.iter_mut().zip(&dir).for_each(|(a, b)| *a += step * b);
    }
    crate::fastproc::dist(&c, v)
}

fn probe_offsets(d: usize, samples: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        // cell midpoints of [-1, 1]: never the centre itself
        return (0..samples).map(|k| vec![-1.0 + (2 * k + 1) as f64 / samples as f64]).collect();
    }
    // Halton points mapped into the unit ball, origin excluded
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let halton = |mut i: u64, b: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    let mut out = Vec::new();
    let mut i = 1u64;
    while out.len() < samples {
        let v: Vec<f64> = (0..d).map(|j| 2.0 * halton(i, PRIMES[j % 8]) - 1.0).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 <= 1.0 && n2 > 0.0 {
            out.push(v);
        }
        i += 1;
    }
    out
}

/// Convex hull of `h` over punctured neighbourhoods of `x`, intersected over
/// the probe radii. Points where `h` is undefined are skipped.
pub fn filippov_enlargement(f: &AveragedField, x: &[f64], probe: &FilippovProbe) -> Result<FilippovSet> {
    let d = f.slow_dim();
    if probe.deltas.is_empty() || probe.samples == 0 {
        return Err(Error::InvalidInput("probe needs at least one radius and one sample".into()));
    }
    let offsets = probe_offsets(d, probe.samples);
    let mut deltas = probe.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let sample = |delta: f64| -> Result<Vec<Vec<f64>>> {
        let mut vals = Vec::new();
        for u in &offsets {
            let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + delta * b).collect();
            match averaged_drift(f, &y) {
                Ok(v) => vals.push(v),
                Err(Error::SingularHessian { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(vals)
    };
    if d == 1 {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for &delta in &deltas {
            let vals = sample(delta)?;
            if vals.is_empty() {
                continue;
            }
            let a = vals.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let b = vals.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            let (nlo, nhi) = (lo.max(a), hi.min(b));
            if nlo > nhi {
                // disjoint at this resolution: keep the finer one
                lo = a;
                hi = b;
            } else {
                lo = nlo;
                hi = nhi;
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput("field undefined on every probe point".into()));
        }
        return Ok(FilippovSet { x: x.to_vec(), hull: Hull::Interval { lo, hi } });
    }
    let mut last = Vec::new();
    for &delta in &deltas {
        let vals = sample(delta)?;
        if !vals.is_empty() {
            last = vals;
        }
    }
    if last.is_empty() {
        return Err(Error::InvalidInput("field undefined on every probe point".into()));
    }
    Ok(FilippovSet { x: x.to_vec(), hull: Hull::Points { points: last } })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilippovReport {
    pub n_checked: usize,
    pub n_violations: usize,
    pub violation_fraction: f64,
    pub max_distance: f64,
    pub worst_time: f64,
    pub tol: f64,
}

/// Checks `x'(t_k) ∈ h_E(x(t_k))` at interior nodes of a uniform-grid path.
///
/// The derivative is a central difference over `[t_{k-1}, t_{k+1}]`, so every
/// probe radius is widened to at least the distance the path travels in that
/// window.
pub fn check_filippov(
    times: &[f64],
    xs: &[f64],
    f: &AveragedField,
    tol: f64,
    probe: &FilippovProbe,
) -> Result<FilippovReport> {
    let d = f.slow_dim();
    let n = times.len();
    if xs.len() != n * d {
        return Err(Error::Dimension("trajectory length mismatch".into()));
    }
    if n < 3 {
        return Err(Error::InvalidInput("need at least three nodes".into()));
    }
    let checks: Vec<Result<f64>> = (1..n - 1)
        .into_par_iter()
        .map(|k| {
            let x = &xs[k * d..(k + 1) * d];
            let a = &xs[(k - 1) * d..k * d];
            let b = &xs[(k + 1) * d..(k + 2) * d];
            let h = times[k + 1] - times[k - 1];
            let deriv: Vec<f64> = (0..d).map(|j| (b[j] - a[j]) / h).collect();
            let reach = crate::fastproc::dist(a, x).max(crate::fastproc::dist(b, x));
            let local = FilippovProbe {
                deltas: probe.deltas.iter().map(|dl| dl.max(reach * (1.0 + 1e-9))).collect(),
                samples: probe.samples,
            };
            Ok(filippov_enlargement(f, x, &local)?.distance(&deriv))
        })
        .collect();
    let mut rep = FilippovReport {
        n_checked: n - 2,
        n_violations: 0,
        violation_fraction: 0.0,
        max_distance: 0.0,
        worst_time: times[1],
        tol,
    };
    for (i, c) in checks.into_iter().enumerate() {
        let dist = c?;
        if dist > tol {
            rep.n_violations += 1;
        }
        if dist > rep.max_distance {
            rep.max_distance = dist;
            rep.worst_time = times[i + 1];
        }
    }
    rep.violation_fraction = rep.n_violations as f64 / rep.n_checked as f64;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub mean_sup_dist: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSetup {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub dt_max: f64,
    pub stab_c: f64,
    /// Limit ODE steps over the horizon.
    pub limit_steps: usize,
}

impl ConvergenceSetup {
    pub fn new(x0: Vec<f64>, y0: Vec<f64>, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self { x0, y0, horizon, n_paths, seed, dt_max: 1e-3, stab_c: 0.05, limit_steps: 1000 }
    }
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> CsvTable {
    let mut t = CsvTable::new(["epsilon", "mean_sup_dist", "stderr", "n_paths", "seed"]);
    for r in rows {
        t.push(vec![r.epsilon, r.mean_sup_dist, r.stderr, r.n_paths as f64, r.seed as f64]);
    }
    t
}

/// `D(eps)` = mean over paths of `sup_t |X^eps_t - X̄_t|`, with `X̄` the
/// limit ODE solution of `field` started at the same `x0`. The `k`-th
/// epsilon uses paths from the stream seed `derive_seed(setup.seed, k)`.
pub fn convergence_study(
    field: &AveragedField,
    sch: &NoiseSchedule,
    eps_list: &[f64],
    setup: &ConvergenceSetup,
) -> Result<Vec<ConvergenceRow>> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("epsilon list must be strictly decreasing".into()));
    }
    if setup.n_paths < 2 {
        return Err(Error::InvalidInput("need at least two paths for a standard error".into()));
    }
    let lim = solve_limit_ode(field, &setup.x0, setup.horizon, setup.horizon / setup.limit_steps as f64)?;
    let d = field.slow_dim();
    let mut rows = Vec::new();
    for (k, &eps) in eps_list.iter().enumerate() {
        let mut cfg = SimConfig::new(eps, setup.horizon, setup.x0.clone(), setup.y0.clone(), *sch);
        cfg.dt_max = setup.dt_max;
        cfg.stab_c = setup.stab_c;
        cfg.seed = derive_seed(setup.seed, k as u64);
        let sups = (0..setup.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let tr = simulate_coupled_path(&field.potential, &field.drift, &cfg, i)?;
                let mut xb = vec![0.0; d];
                let mut sup: f64 = 0.0;
                for n in 0..tr.len() {
                    lim.at(tr.times[n], &mut xb);
                    sup = sup.max(crate::fastproc::dist(tr.x(n), &xb));
                }
                Ok(sup)
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = sups.len() as f64;
        let mean = sups.iter().sum::<f64>() / n;
        let var = sups.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push(ConvergenceRow {
            epsilon: eps,
            mean_sup_dist: mean,
            stderr: (var / n).sqrt(),
            n_paths: setup.n_paths,
            seed: setup.seed,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{build_drift, make_example_u1, make_example_u2, Params};

    fn u1_cos() -> AveragedField {
        AveragedField::new(make_example_u1().unwrap(), build_drift("cos_y", &Params::new()).unwrap(), FieldMode::Laplace)
            .unwrap()
    }

    #[test]
    fn u1_cos_field_closed_form() {
        let f = u1_cos();
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let c: f64 = (0.5 + x * x) / (1.0 + x * x);
            let h = averaged_drift(&f, &[x]).unwrap()[0];
            assert!((h - c.sqrt().cos()).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn odd_drift_averages_to_zero() {
        let f = AveragedField::new(
            make_example_u1().unwrap(),
            build_drift("linear_y", &Params::new()).unwrap(),
            FieldMode::Laplace,
        )
        .unwrap();
        let tr = solve_limit_ode(&f, &[0.4], 1.0, 0.01).unwrap();
        assert!(tr.xs.iter().all(|v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn u2_singular_point_needs_patch_or_side() {
        let f = AveragedField::new(
            make_example_u2().unwrap(),
            build_drift("cos_y", &Params::new()).unwrap(),
            FieldMode::Laplace,
        )
        .unwrap();
        assert!(matches!(averaged_drift(&f, &[0.0]), Err(Error::SingularHessian { .. })));
        let mut patched = f.clone();
        patched.patch_unique_minimum = true;
        assert!((averaged_drift(&patched, &[0.0]).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_field_hull() {
        let f = AveragedField::new(
            make_example_u1().unwrap(),
            DriftSpec::from_fn("sign_x", 1, 1, 1.0, None, |x, _, out| out[0] = x[0].signum()).unwrap(),
            FieldMode::Laplace,
        )
        .unwrap();
        let set = filippov_enlargement(&f, &[0.0], &FilippovProbe::default()).unwrap();
        assert_eq!(set.hull, Hull::Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(set.distance(&[0.0]), 0.0);
        assert!((set.distance(&[1.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frank_wolfe_distance() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(hull_distance(&pts, &[0.2, 0.2]) < 1e-9);
        assert!((hull_distance(&pts, &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-6);
    }
}
