//! Bootstrap particle filter for the conditional law of the fast component
//! given the observed slow path, and its comparison with the frozen Gibbs
//! measure along the path.
//!
//! One step on the observation grid `t_k -> t_{k+1}`:
//!
//! 1. weight each particle by the Gaussian likelihood of the slow increment
//!    `X_{k+1} - X_k` given `(X_k, Y_k^i)`,
//! 2. resample when `ESS / N` drops below the threshold,
//! 3. propagate with one Euler step of the fast dynamics.
//!
//! After step 3 the cloud approximates the law of `Y_{k+1}` given
//! `X_0, ..., X_{k+1}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fastproc::{invariant_density_grid, GridSpec};
use crate::io::CsvTable;
use crate::potential::{DriftSpec, PotentialSpec};
use crate::rng::{self, StreamRng, CONTROL_STREAM};
use crate::sde::{NoiseSchedule, TrajectoryPair};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCloud {
    /// Every particle at the same point.
    Point { y: Vec<f64> },
    /// Independent Gaussian coordinates.
    Gaussian { mean: Vec<f64>, sd: f64 },
}

/// Noise amplitudes of the observation (slow) and signal (fast) equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `sigma_1 = eps^alpha`, `sigma_2 = s(eps) / sqrt(eps)`, fast drift `-grad U / eps`.
    Scaled,
    /// Fast drift `-grad U / eps` with the given amplitudes.
    Explicit { sigma1: f64, sigma2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Resample when `ESS / N` is below this.
    pub resample_threshold: f64,
    pub epsilon: f64,
    pub schedule: NoiseSchedule,
    pub seed: u64,
    /// Particles whose best likelihood is below this are degenerate.
    pub likelihood_floor: f64,
    pub resampling: Resampling,
    /// Store the full cloud every this many steps.
    pub record_every: usize,
    pub initial: InitialCloud,
    pub noise: NoiseModel,
}

impl FilterConfig {
    pub fn new(epsilon: f64, schedule: NoiseSchedule, initial: InitialCloud) -> Self {
        Self {
            n_particles: 1000,
            resample_threshold: 0.5,
            epsilon,
            schedule,
            seed: 0,
            likelihood_floor: 1e-300,
            resampling: Resampling::Multinomial,
            record_every: 1,
            initial,
            noise: NoiseModel::Scaled,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles < 100 {
            return Err(Error::InvalidInput("need at least 100 particles".into()));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::InvalidInput("resample threshold must lie in (0, 1]".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.likelihood_floor > 0.0) || self.record_every == 0 {
            return Err(Error::InvalidInput("likelihood floor and record stride must be positive".into()));
        }
        Ok(())
    }

    fn amplitudes(&self) -> Result<(f64, f64)> {
        match self.noise {
            NoiseModel::Scaled => Ok((
                self.schedule.slow_noise(self.epsilon),
                self.schedule.s_of_epsilon(self.epsilon)? / self.epsilon.sqrt(),
            )),
            NoiseModel::Explicit { sigma1, sigma2 } => {
                if !(sigma1 > 0.0 && sigma2 >= 0.0) {
                    return Err(Error::InvalidInput("sigma1 must be positive, sigma2 nonnegative".into()));
                }
                Ok((sigma1, sigma2))
            }
        }
    }
}

/// Weighted particle approximation of the conditional law at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub time: f64,
    pub step: usize,
    pub m: usize,
    /// Row-major `N x m`.
    pub particles: Vec<f64>,
    /// Normalised.
    pub weights: Vec<f64>,
    pub ess: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.m..(i + 1) * self.m]
    }

    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.particle(i))).sum()
    }
}

/// Per-step cloud statistics; `mean` and `var` are per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub time: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub ess: f64,
    pub resampled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRun {
    pub clouds: Vec<ParticleCloud>,
    pub summaries: Vec<StepSummary>,
    pub n_resamples: usize,
}

impl FilterRun {
    pub fn summary_table(&self) -> CsvTable {
        let m = self.summaries.first().map_or(1, |s| s.mean.len());
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=m).map(|i| format!("mean_{i}")));
        cols.extend((1..=m).map(|i| format!("var_{i}")));
        cols.extend(["ess".to_string(), "resampled".to_string()]);
        let mut t = CsvTable::new(cols);
        for s in &self.summaries {
            let mut row = vec![s.time];
            row.extend_from_slice(&s.mean);
            row.extend_from_slice(&s.var);
            row.extend([s.ess, if s.resampled { 1.0 } else { 0.0 }]);
            t.push(row);
        }
        t
    }
}

fn normalise(log_w: &[f64], out: &mut [f64]) -> f64 {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(log_w) {
        *o = (l - top).exp();
        sum += *o;
    }
    let mut sq = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        sq += *o * *o;
    }
    1.0 / sq
}

fn summarise(time: f64, m: usize, particles: &[f64], weights: &[f64], ess: f64, resampled: bool) -> StepSummary {
    let mut mean = vec![0.0; m];
    for (i, w) in weights.iter().enumerate() {
        for j in 0..m {
            mean[j] += w * particles[i * m + j];
        }
    }
    let mut var = vec![0.0; m];
    for (i, w) in weights.iter().enumerate() {
        for j in 0..m {
            var[j] += w * (particles[i * m + j] - mean[j]).powi(2);
        }
    }
    StepSummary { time, mean, var, ess, resampled }
}

/// Ancestor indices drawn from normalised `weights`.
pub fn resample_indices(weights: &[f64], scheme: Resampling, rng: &mut StreamRng) -> Vec<usize> {
    let n = weights.len();
    let positions: Vec<f64> = match scheme {
        Resampling::Multinomial => {
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            u
        }
        Resampling::Systematic => {
            let u0: f64 = rng.random::<f64>();
            (0..n).map(|i| (i as f64 + u0) / n as f64).collect()
        }
    };
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for u in positions {
        while u >= cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

pub fn run_fkk_particle_filter(
    p: &PotentialSpec,
    b: &DriftSpec,
    observed: &TrajectoryPair,
    cfg: &FilterConfig,
) -> Result<FilterRun> {
    cfg.validate()?;
    let (d, m) = (p.slow_dim(), p.fast_dim());
    if observed.d != d || b.slow_dim() != d || b.fast_dim() != m {
        return Err(Error::Dimension("observed path, drift and potential dimensions differ".into()));
    }
    if observed.len() < 2 {
        return Err(Error::InvalidInput("observed path needs at least two nodes".into()));
    }
    let (sigma1, sigma2) = cfg.amplitudes()?;
    let n = cfg.n_particles;
    let eps = cfg.epsilon;
    let log_floor = cfg.likelihood_floor.ln();

    let mut particles = vec![0.0; n * m];
    let mut streams: Vec<StreamRng> = (0..n as u64).map(|i| rng::stream(cfg.seed, i)).collect();
    match &cfg.initial {
        InitialCloud::Point { y } => {
            if y.len() != m {
                return Err(Error::Dimension("initial point has the wrong dimension".into()));
            }
            particles.chunks_mut(m).for_each(|c| c.copy_from_slice(y));
        }
        InitialCloud::Gaussian { mean, sd } => {
            if mean.len() != m {
                return Err(Error::Dimension("initial mean has the wrong dimension".into()));
            }
            particles.par_chunks_mut(m).zip(streams.par_iter_mut()).for_each(|(c, r)| {
                rng::fill_normal(r, c);
                c.iter_mut().zip(mean).for_each(|(v, mu)| *v = mu + sd * *v);
            });
        }
    }
    let mut control = rng::stream(cfg.seed, CONTROL_STREAM);
    let mut log_w = vec![0.0; n];
    let mut weights = vec![1.0 / n as f64; n];
    let mut ess = n as f64;

    let mut clouds = Vec::new();
    let mut summaries = Vec::with_capacity(observed.len());
    let record = |k: usize, particles: &[f64], weights: &[f64], ess: f64, clouds: &mut Vec<ParticleCloud>| {
        clouds.push(ParticleCloud {
            time: observed.times[k],
            step: k,
            m,
            particles: particles.to_vec(),
            weights: weights.to_vec(),
            ess,
        });
    };
    record(0, &particles, &weights, ess, &mut clouds);
    summaries.push(summarise(observed.times[0], m, &particles, &weights, ess, false));
    let mut n_resamples = 0;

    for k in 0..observed.len() - 1 {
        let dt = observed.times[k + 1] - observed.times[k];
        let x = observed.x(k);
        let dx: Vec<f64> = observed.x(k + 1).iter().zip(x).map(|(a, b)| a - b).collect();
        let denom = 2.0 * sigma1 * sigma1 * dt;

        // 1. reweight
        let loglik: Vec<f64> = particles
            .par_chunks(m)
            .map(|y| {
                let mut bv = vec![0.0; d];
                b.eval_into(x, y, &mut bv);
                -(0..d).map(|j| (dx[j] - bv[j] * dt).powi(2)).sum::<f64>() / denom
            })
            .collect();
        // likelihoods without the shared Gaussian constant, so all are <= 1
        let best = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(best >= log_floor) {
            return Err(Error::Degenerate { step: k });
        }
        log_w.iter_mut().zip(&loglik).for_each(|(w, l)| *w += l);
        ess = normalise(&log_w, &mut weights);
        if !ess.is_finite() {
            return Err(Error::Degenerate { step: k });
        }

        // 2. resample
        let mut resampled = false;
        if ess < cfg.resample_threshold * n as f64 {
            let idx = resample_indices(&weights, cfg.resampling, &mut control);
            let old = particles.clone();
            for (i, j) in idx.iter().enumerate() {
                particles[i * m..(i + 1) * m].copy_from_slice(&old[j * m..(j + 1) * m]);
            }
            log_w.fill(0.0);
            weights.fill(1.0 / n as f64);
            resampled = true;
            n_resamples += 1;
        }

        // 3. propagate
        let sd = sigma2 * dt.sqrt();
        particles.par_chunks_mut(m).zip(streams.par_iter_mut()).for_each(|(y, r)| {
            let mut g = vec![0.0; m];
            let mut z = vec![0.0; m];
            p.grad_y_into(x, y, &mut g);
            rng::fill_normal(r, &mut z);
            for j in 0..m {
                y[j] += -g[j] * dt / eps + sd * z[j];
            }
        });
        if particles.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        let post_ess = if resampled { n as f64 } else { ess };
        summaries.push(summarise(observed.times[k + 1], m, &particles, &weights, post_ess, resampled));
        if (k + 1) % cfg.record_every == 0 || k + 2 == observed.len() {
            record(k + 1, &particles, &weights, post_ess, &mut clouds);
        }
    }
    Ok(FilterRun { clouds, summaries, n_resamples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySeries {
    pub kappa: f64,
    pub times: Vec<f64>,
    /// `(1/kappa) ∫_t^{t+kappa} pi_s(f) ds`.
    pub filter_average: Vec<f64>,
    /// `nu^{eps, X_t}(f)`.
    pub invariant: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub max: f64,
}

impl DiscrepancySeries {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["t", "filter_average", "invariant", "discrepancy"]);
        for i in 0..self.times.len() {
            t.push(vec![self.times[i], self.filter_average[i], self.invariant[i], self.discrepancy[i]]);
        }
        t
    }
}

/// Time-averaged filter expectations over windows of length
/// `kappa = eps^gamma`, `gamma = min(1 - alpha, 1/2)`, against the frozen
/// Gibbs expectation at the left end of each window.
pub fn filter_vs_invariant<F>(
    run: &FilterRun,
    p: &PotentialSpec,
    observed: &TrajectoryPair,
    eps: f64,
    sch: &NoiseSchedule,
    f: F,
) -> Result<DiscrepancySeries>
where
    F: Fn(&[f64]) -> f64,
{
    let clouds = &run.clouds;
    if clouds.len() < 2 {
        return Err(Error::InvalidInput("need at least two recorded clouds".into()));
    }
    let gamma = (1.0 - sch.alpha).min(0.5);
    let kappa = eps.powf(gamma);
    let spacing = clouds[1].time - clouds[0].time;
    if kappa < 2.0 * spacing {
        return Err(Error::GridTooCoarse { kappa, spacing });
    }
    let s_val = sch.s_of_epsilon(eps)?;
    let ct: Vec<f64> = clouds.iter().map(|c| c.time).collect();
    let cf: Vec<f64> = clouds.iter().map(|c| c.expectation(&f)).collect();
    let t_end = *ct.last().unwrap();

    let mut series = DiscrepancySeries {
        kappa,
        times: Vec::new(),
        filter_average: Vec::new(),
        invariant: Vec::new(),
        discrepancy: Vec::new(),
        max: 0.0,
    };
    let mut grid: Option<GridSpec> = None;
    let mut t = 0.0;
    while t + kappa <= t_end + 1e-12 {
        let a = window_average(&ct, &cf, t, t + kappa);
        let k = observed.times.partition_point(|s| *s < t - 1e-12).min(observed.len() - 1);
        let x = observed.x(k);
        let g = match &grid {
            Some(g) => g.clone(),
            None => {
                let g = GridSpec::auto(p, x, s_val)?;
                grid = Some(g.clone());
                g
            }
        };
        let bval = invariant_density_grid(p, x, s_val, &g)?.expectation(&f);
        let dis = (a - bval).abs();
        series.times.push(t);
        series.filter_average.push(a);
        series.invariant.push(bval);
        series.discrepancy.push(dis);
        series.max = series.max.max(dis);
        t += kappa;
    }
    Ok(series)
}

/// Trapezoid average of the piecewise-linear interpolant over `[a, b]`.
fn window_average(ts: &[f64], vs: &[f64], a: f64, b: f64) -> f64 {
    let interp = |t: f64| {
        let k = ts.partition_point(|s| *s <= t).clamp(1, ts.len() - 1);
        let lam = ((t - ts[k - 1]) / (ts[k] - ts[k - 1])).clamp(0.0, 1.0);
        (1.0 - lam) * vs[k - 1] + lam * vs[k]
    };
    let mut knots = vec![a];
    knots.extend(ts.iter().copied().filter(|t| *t > a && *t < b));
    knots.push(b);
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += 0.5 * (interp(w[0]) + interp(w[1])) * (w[1] - w[0]);
    }
    total / (b - a)
}
