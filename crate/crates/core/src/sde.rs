//! Euler-Maruyama for the coupled slow-fast system and the frozen fast process.
//!
//! Coupled system, step `dt`:
//!
//! ```text
//! X <- X + b(X, Y) dt + eps^alpha sqrt(dt) xi
//! Y <- Y - grad_y U(X, Y) dt / eps + s(eps) / sqrt(eps) sqrt(dt) zeta
//! ```
//!
//! Frozen process (slow state fixed, fast time): `dZ = -grad_y U(x, Z) dt + s dW`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::CsvTable;
use crate::potential::{DriftSpec, PotentialSpec};
use crate::rng;
use crate::{Error, Result};

/// States with any component beyond this are treated as blown up.
pub const EXPLOSION_THRESHOLD: f64 = 1e8;

/// Noise exponent `alpha` of the slow component and constant `C` of
/// `s(eps) = sqrt(C / ln(1 + 1/eps))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub alpha: f64,
    pub big_c: f64,
}

impl NoiseSchedule {
    pub fn new(alpha: f64, big_c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(big_c > 0.0 && big_c.is_finite()) {
            return Err(Error::Domain(format!("C must be positive, got {big_c}")));
        }
        Ok(Self { alpha, big_c })
    }

    pub fn s_of_epsilon(&self, eps: f64) -> Result<f64> {
        s_of_epsilon(self, eps)
    }

    /// Slow-noise amplitude `eps^alpha`.
    pub fn slow_noise(&self, eps: f64) -> f64 {
        eps.powf(self.alpha)
    }

    /// `2 (Lambda + 2 Gamma) / (1 - alpha)`; `C` must exceed it.
    pub fn admissibility_threshold(&self, lambda: f64, gamma: f64) -> f64 {
        2.0 * (lambda + 2.0 * gamma) / (1.0 - self.alpha)
    }

    /// True when `C` does not exceed the admissibility threshold.
    pub fn warns(&self, lambda: f64, gamma: f64) -> bool {
        self.big_c <= self.admissibility_threshold(lambda, gamma)
    }
}

pub fn s_of_epsilon(sch: &NoiseSchedule, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok((sch.big_c / (1.0 / eps).ln_1p()).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub dt_max: f64,
    /// Fraction of `eps` allowed as a step; the fast drift is `O(1/eps)`.
    pub stab_c: f64,
    pub seed: u64,
    pub schedule: NoiseSchedule,
    pub step_budget: u64,
}

impl SimConfig {
    pub fn new(epsilon: f64, horizon: f64, x0: Vec<f64>, y0: Vec<f64>, schedule: NoiseSchedule) -> Self {
        Self { epsilon, horizon, x0, y0, dt_max: 1e-3, stab_c: 0.05, seed: 0, schedule, step_budget: 1_000_000_000 }
    }

    /// Uniform step `dt <= min(dt_max, stab_c eps)` that lands exactly on the horizon.
    pub fn grid(&self) -> Result<(f64, usize)> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt_max > 0.0 && self.stab_c > 0.0) {
            return Err(Error::InvalidInput("dt_max and stab_c must be positive".into()));
        }
        let target = self.dt_max.min(self.stab_c * self.epsilon);
        let steps = (self.horizon / target).ceil();
        if steps > self.step_budget as f64 {
            return Err(Error::BudgetExceeded { steps: steps as u64, budget: self.step_budget });
        }
        let n = (steps as usize).max(1);
        Ok((self.horizon / n as f64, n))
    }
}

/// Sampled slow and fast paths on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPair {
    pub times: Vec<f64>,
    /// Row-major `len x d`.
    pub xs: Vec<f64>,
    /// Row-major `len x m`.
    pub ys: Vec<f64>,
    pub d: usize,
    pub m: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl TrajectoryPair {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.xs[k * self.d..(k + 1) * self.d]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.ys[k * self.m..(k + 1) * self.m]
    }

    /// Long-format table `path, t, x_1..x_d, y_1..y_m`.
    pub fn to_table(&self, path: usize) -> CsvTable {
        let mut cols = vec!["path".to_string(), "t".to_string()];
        cols.extend((1..=self.d).map(|i| format!("x_{i}")));
        cols.extend((1..=self.m).map(|i| format!("y_{i}")));
        let mut table = CsvTable::new(cols);
        for k in 0..self.len() {
            let mut row = vec![path as f64, self.times[k]];
            row.extend_from_slice(self.x(k));
            row.extend_from_slice(self.y(k));
            table.push(row);
        }
        table
    }
}

fn check_dims(p: &PotentialSpec, b: &DriftSpec, cfg: &SimConfig) -> Result<()> {
    let (d, m) = (p.slow_dim(), p.fast_dim());
    if b.slow_dim() != d || b.fast_dim() != m {
        return Err(Error::Dimension("drift and potential dimensions differ".into()));
    }
    if cfg.x0.len() != d || cfg.y0.len() != m {
        return Err(Error::Dimension(format!("initial state must have dims ({d}, {m})")));
    }
    Ok(())
}

/// One coupled path driven by the counter-based stream `(cfg.seed, 0)`.
pub fn simulate_coupled(p: &PotentialSpec, b: &DriftSpec, cfg: &SimConfig) -> Result<TrajectoryPair> {
    simulate_coupled_path(p, b, cfg, 0)
}

/// Path number `path` of an ensemble; independent of every other path index.
pub fn simulate_coupled_path(p: &PotentialSpec, b: &DriftSpec, cfg: &SimConfig, path: u64) -> Result<TrajectoryPair> {
    let mut rng = rng::stream(cfg.seed, path);
    simulate_coupled_with(p, b, cfg, |_, xi, zeta| {
        rng::fill_normal(&mut rng, xi);
        rng::fill_normal(&mut rng, zeta);
    })
}

pub fn simulate_coupled_ensemble(
    p: &PotentialSpec,
    b: &DriftSpec,
    cfg: &SimConfig,
    n_paths: usize,
) -> Result<Vec<TrajectoryPair>> {
    (0..n_paths as u64).into_par_iter().map(|i| simulate_coupled_path(p, b, cfg, i)).collect()
}

/// Coupled Euler-Maruyama with caller-supplied standard normals.
///
/// `noise(k, xi, zeta)` fills the unit-variance increments for step `k`;
/// scaling by `sqrt(dt)` and the noise amplitudes happens here.
pub fn simulate_coupled_with<N>(p: &PotentialSpec, b: &DriftSpec, cfg: &SimConfig, mut noise: N) -> Result<TrajectoryPair>
where
    N: FnMut(usize, &mut [f64], &mut [f64]),
{
    check_dims(p, b, cfg)?;
    let (dt, n) = cfg.grid()?;
    let (d, m) = (p.slow_dim(), p.fast_dim());
    let eps = cfg.epsilon;
    let slow_sd = cfg.schedule.slow_noise(eps) * dt.sqrt();
    let fast_sd = cfg.schedule.s_of_epsilon(eps)? / eps.sqrt() * dt.sqrt();

    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity((n + 1) * d);
    let mut ys = Vec::with_capacity((n + 1) * m);
    times.push(0.0);
    xs.extend_from_slice(&cfg.x0);
    ys.extend_from_slice(&cfg.y0);

    let mut x = cfg.x0.clone();
    let mut y = cfg.y0.clone();
    let mut drift = vec![0.0; d];
    let mut grad = vec![0.0; m];
    let mut xi = vec![0.0; d];
    let mut zeta = vec![0.0; m];
    for k in 0..n {
        noise(k, &mut xi, &mut zeta);
        b.eval_into(&x, &y, &mut drift);
        p.grad_y_into(&x, &y, &mut grad);
        for i in 0..d {
            x[i] += drift[i] * dt + slow_sd * xi[i];
        }
        for j in 0..m {
            y[j] += -grad[j] * dt / eps + fast_sd * zeta[j];
        }
        if exploded(&x) || exploded(&y) {
            return Err(Error::Explosion { step: k + 1, time: (k + 1) as f64 * dt });
        }
        times.push(if k + 1 == n { cfg.horizon } else { (k + 1) as f64 * dt });
        xs.extend_from_slice(&x);
        ys.extend_from_slice(&y);
    }
    Ok(TrajectoryPair { times, xs, ys, d, m, epsilon: eps, seed: cfg.seed })
}

pub(crate) fn exploded(v: &[f64]) -> bool {
    v.iter().any(|a| !(a.abs() <= EXPLOSION_THRESHOLD))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenConfig {
    pub x: Vec<f64>,
    pub s_val: f64,
    pub z0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Store every `record_every`-th step.
    pub record_every: usize,
}

/// Ensemble of frozen fast paths stored at the recording stride.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenEnsemble {
    pub times: Vec<f64>,
    pub m: usize,
    pub n_paths: usize,
    /// `states[path][node * m + j]`.
    pub states: Vec<Vec<f64>>,
}

impl FrozenEnsemble {
    pub fn state(&self, path: usize, node: usize) -> &[f64] {
        &self.states[path][node * self.m..(node + 1) * self.m]
    }

    /// Ensemble mean of `f` at each recorded time.
    pub fn mean_of<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| (0..self.n_paths).map(|i| f(self.state(i, k))).sum::<f64>() / self.n_paths as f64)
            .collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut cols = vec!["path".to_string(), "t".to_string()];
        cols.extend((1..=self.m).map(|i| format!("z_{i}")));
        let mut table = CsvTable::new(cols);
        for i in 0..self.n_paths {
            for (k, t) in self.times.iter().enumerate() {
                let mut row = vec![i as f64, *t];
                row.extend_from_slice(self.state(i, k));
                table.push(row);
            }
        }
        table
    }
}

/// One Euler step of the frozen process with unit normals `noise`.
#[inline]
pub fn frozen_step(p: &PotentialSpec, x: &[f64], s_val: f64, dt: f64, z: &mut [f64], grad: &mut [f64], noise: &[f64]) {
    p.grad_y_into(x, z, grad);
    let sd = s_val * dt.sqrt();
    for j in 0..z.len() {
        z[j] += -grad[j] * dt + sd * noise[j];
    }
}

/// Stability pre-check: `dt <= 0.5 / |D²U|` at the start point and at the origin.
pub(crate) fn check_frozen_step(p: &PotentialSpec, x: &[f64], z0: &[f64], dt: f64) -> Result<()> {
    let origin = vec![0.0; p.fast_dim()];
    let h = p.hess_y(x, z0).norm().max(p.hess_y(x, &origin).norm());
    if dt * h > 0.5 {
        return Err(Error::InvalidInput(format!("dt = {dt} too large: need dt <= 0.5/|D²U| = {}", 0.5 / h)));
    }
    Ok(())
}

pub fn simulate_frozen(p: &PotentialSpec, cfg: &FrozenConfig) -> Result<FrozenEnsemble> {
    let m = p.fast_dim();
    if cfg.x.len() != p.slow_dim() || cfg.z0.len() != m {
        return Err(Error::Dimension("frozen state dimensions differ from the model".into()));
    }
    if !(cfg.s_val >= 0.0) {
        return Err(Error::Domain(format!("s must be nonnegative, got {}", cfg.s_val)));
    }
    if !(cfg.dt > 0.0 && cfg.t_end > 0.0) || cfg.record_every == 0 {
        return Err(Error::InvalidInput("dt, t_end and record_every must be positive".into()));
    }
    check_frozen_step(p, &cfg.x, &cfg.z0, cfg.dt)?;
    let n = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_end / n as f64;
    let recorded: Vec<usize> = (0..=n).filter(|k| k % cfg.record_every == 0 || *k == n).collect();
    let times: Vec<f64> = recorded.iter().map(|&k| k as f64 * dt).collect();

    let states = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = rng::stream(cfg.seed, path);
            let mut z = cfg.z0.clone();
            let mut grad = vec![0.0; m];
            let mut noise = vec![0.0; m];
            let mut out = Vec::with_capacity(recorded.len() * m);
            out.extend_from_slice(&z);
            for k in 1..=n {
                rng::fill_normal(&mut rng, &mut noise);
                frozen_step(p, &cfg.x, cfg.s_val, dt, &mut z, &mut grad, &noise);
                if exploded(&z) {
                    return Err(Error::Explosion { step: k, time: k as f64 * dt });
                }
                if k % cfg.record_every == 0 || k == n {
                    out.extend_from_slice(&z);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrozenEnsemble { times, m, n_paths: cfg.n_paths, states })
}
