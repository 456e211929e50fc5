use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{invariant_density_grid, GridSpec};
use crate::potential::PotentialSpec;
use crate::rng::{self, StreamRng};
use crate::sde::{check_frozen_step, exploded, frozen_step};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub x: Vec<f64>,
    pub s_val: f64,
    /// Common off-equilibrium start of every path.
    pub z0: Vec<f64>,
    pub n_paths: usize,
    pub t_max: f64,
    pub dt: f64,
    pub seed: u64,
    /// Ensemble means are taken every `sample_every` time units.
    pub sample_every: f64,
}

impl RelaxationConfig {
    pub fn new(x: Vec<f64>, s_val: f64, z0: Vec<f64>) -> Self {
        Self { x, s_val, z0, n_paths: 1000, t_max: 50.0, dt: 1e-3, seed: 0, sample_every: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub tau: f64,
    pub amplitude: f64,
    /// R² of the log-linear regression.
    pub r_squared: f64,
    pub fit_ok: bool,
    pub n_fit_points: usize,
    pub window: (f64, f64),
    pub equilibrium: f64,
    pub times: Vec<f64>,
    pub means: Vec<f64>,
}

const FIT_LO: f64 = 0.1;
const FIT_HI: f64 = 0.9;
const MIN_R2: f64 = 0.9;

/// Relaxation time of `t -> E f(Z_t)` for the frozen process started at `z0`.
///
/// The equilibrium value comes from quadrature when `equilibrium` is `None`
/// (`m <= 2`). Simulation stops early once the gap falls below half the lower
/// edge of the fit window. A poor fit is reported through `fit_ok`, not as an
/// error.
pub fn estimate_relaxation_time<F>(
    p: &PotentialSpec,
    cfg: &RelaxationConfig,
    f: F,
    equilibrium: Option<f64>,
) -> Result<RelaxationFit>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = p.fast_dim();
    if cfg.z0.len() != m || cfg.x.len() != p.slow_dim() {
        return Err(Error::Dimension("relaxation start has the wrong dimension".into()));
    }
    if !(cfg.s_val > 0.0) || !(cfg.dt > 0.0) || !(cfg.t_max > 0.0) || !(cfg.sample_every >= cfg.dt) {
        return Err(Error::InvalidInput("s, dt, t_max must be positive and sample_every >= dt".into()));
    }
    if cfg.n_paths == 0 {
        return Err(Error::InvalidInput("ensemble must be nonempty".into()));
    }
    check_frozen_step(p, &cfg.x, &cfg.z0, cfg.dt)?;
    let eq = match equilibrium {
        Some(v) => v,
        None => {
            let grid = GridSpec::auto(p, &cfg.x, cfg.s_val)?;
            invariant_density_grid(p, &cfg.x, cfg.s_val, &grid)?.expectation(&f)
        }
    };

    let steps_per_sample = (cfg.sample_every / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.sample_every / steps_per_sample as f64;
    let n_samples = (cfg.t_max / cfg.sample_every).ceil() as usize;

    struct Walker {
        z: Vec<f64>,
        grad: Vec<f64>,
        noise: Vec<f64>,
        rng: StreamRng,
    }
    let mut walkers: Vec<Walker> = (0..cfg.n_paths as u64)
        .map(|i| Walker { z: cfg.z0.clone(), grad: vec![0.0; m], noise: vec![0.0; m], rng: rng::stream(cfg.seed, i) })
        .collect();

    let mean_f = |ws: &[Walker]| ws.iter().map(|w| f(&w.z)).sum::<f64>() / ws.len() as f64;
    let mut times = vec![0.0];
    let mut means = vec![mean_f(&walkers)];
    let gap0 = (means[0] - eq).abs();
    if !(gap0 > 0.0) {
        return Err(Error::InvalidInput("start is already at equilibrium for this test function".into()));
    }
    for k in 1..=n_samples {
        let failed = walkers
            .par_iter_mut()
            .map(|w| {
                for _ in 0..steps_per_sample {
                    rng::fill_normal(&mut w.rng, &mut w.noise);
                    frozen_step(p, &cfg.x, cfg.s_val, dt, &mut w.z, &mut w.grad, &w.noise);
                }
                exploded(&w.z)
            })
            .reduce(|| false, |a, b| a || b);
        let t = k as f64 * cfg.sample_every;
        if failed {
            return Err(Error::Explosion { step: k * steps_per_sample, time: t });
        }
        times.push(t);
        means.push(mean_f(&walkers));
        // a few samples below the window so the lower edge is bracketed
        let tail = &means[means.len().saturating_sub(5)..];
        if tail.len() == 5 && tail.iter().all(|v| (v - eq).abs() < 0.5 * FIT_LO * gap0) {
            break;
        }
    }
    Ok(fit(&times, &means, eq, gap0))
}

fn fit(times: &[f64], means: &[f64], eq: f64, gap0: f64) -> RelaxationFit {
    // window: from the last upward crossing of 90% to the first downward
    // crossing of 10% of the initial gap
    let gaps: Vec<f64> = means.iter().map(|v| (v - eq).abs()).collect();
    let end = gaps.iter().position(|g| *g < FIT_LO * gap0).unwrap_or(gaps.len());
    let start = gaps[..end].iter().rposition(|g| *g > FIT_HI * gap0).map_or(0, |i| i + 1);
    let pts: Vec<(f64, f64)> = (start..end).map(|i| (times[i], gaps[i].ln())).collect();
    let n = pts.len();
    let window = (
        times.get(start).copied().unwrap_or(f64::NAN),
        times.get(end.saturating_sub(1)).copied().unwrap_or(f64::NAN),
    );
    let mut out = RelaxationFit {
        tau: f64::NAN,
        amplitude: f64::NAN,
        r_squared: f64::NAN,
        fit_ok: false,
        n_fit_points: n,
        window,
        equilibrium: eq,
        times: times.to_vec(),
        means: means.to_vec(),
    };
    if n < 3 {
        return out;
    }
    let (mt, ml) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, ml) = (mt / n as f64, ml / n as f64);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ml).powi(2)).sum();
    let slope = sxy / sxx;
    out.tau = -1.0 / slope;
    out.amplitude = (ml - slope * mt).exp();
    out.r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    out.fit_ok = slope < 0.0 && n >= 5 && out.r_squared >= MIN_R2 && end < gaps.len();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_quadratic_bowl;

    #[test]
    fn exact_exponential_recovers_tau() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let means: Vec<f64> = times.iter().map(|t| 0.3 + 2.0 * (-t / 1.7).exp()).collect();
        let r = fit(&times, &means, 0.3, 2.0);
        assert!((r.tau - 1.7).abs() < 1e-9);
        assert!((r.amplitude - 2.0).abs() < 1e-9);
        assert!(r.fit_ok);
    }

    #[test]
    fn bowl_tau_is_one() {
        let p = make_quadratic_bowl(1).unwrap();
        let mut cfg = RelaxationConfig::new(vec![0.0], 0.3, vec![2.0]);
        cfg.t_max = 10.0;
        cfg.dt = 0.01;
        cfg.seed = 3;
        let r = estimate_relaxation_time(&p, &cfg, |z| z[0], Some(0.0)).unwrap();
        assert!((r.tau - 1.0).abs() < 0.2, "tau = {}", r.tau);
        assert!(r.fit_ok);
    }
}
