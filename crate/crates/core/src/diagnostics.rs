//! Named experiments that chain the other modules and summarise the outcome
//! as an [`ExperimentReport`] plus CSV tables.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::fastproc::{
    estimate_lambda, estimate_relaxation_time, laplace_limit_measure, quasipotential_1d, RelaxationConfig,
};
use crate::io::{write_atomic, CsvTable};
use crate::limit::{
    check_filippov, convergence_study, convergence_table, filippov_enlargement, solve_limit_ode, AveragedField,
    ConvergenceRow, ConvergenceSetup, FieldMode, FilippovProbe, Hull,
};
use crate::potential::{
    build_drift, build_potential, check_assumptions, find_global_minima, DriftSpec, MinimaOptions, ParamValue, Params,
    PotentialSpec, SamplingPlan,
};
use crate::rng::derive_seed;
use crate::sde::NoiseSchedule;
use crate::{Error, Result};

pub const EXAMPLES: &[&str] = &["example_2_1", "example_2_2", "example_2_3"];

/// `tanh(y / 0.1)`: bounded, odd, and flat away from the barrier.
pub fn smoothed_sign(y: &[f64]) -> f64 {
    (y[0] / 0.1).tanh()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    pub reason: Option<String>,
}

/// Outcome of one experiment. Non-finite metrics serialise as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: Value,
    #[serde(with = "lossless_metrics")]
    pub metrics: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub stages: Vec<Stage>,
    pub runtime_secs: f64,
    pub seed: u64,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, inputs: Value, seed: u64) -> Self {
        Self {
            name: name.into(),
            inputs,
            metrics: BTreeMap::new(),
            flags: BTreeMap::new(),
            stages: Vec::new(),
            runtime_secs: 0.0,
            seed,
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.flags.insert(key.into(), value);
    }

    pub fn ran(&mut self, stage: &str) {
        self.stages.push(Stage { name: stage.into(), status: StageStatus::Ran, reason: None });
    }

    pub fn skipped(&mut self, stage: &str, reason: impl Into<String>) {
        self.stages.push(Stage { name: stage.into(), status: StageStatus::Skipped, reason: Some(reason.into()) });
    }

    pub fn passed(&self) -> bool {
        self.flags.values().all(|v| *v)
    }

    /// Equality of everything except the wall-clock runtime.
    pub fn same_result(&self, other: &Self) -> bool {
        let eq_metrics = self.metrics.len() == other.metrics.len()
            && self
                .metrics
                .iter()
                .zip(&other.metrics)
                .all(|((ka, a), (kb, b))| ka == kb && (a.to_bits() == b.to_bits() || a == b));
        self.name == other.name
            && self.inputs == other.inputs
            && eq_metrics
            && self.flags == other.flags
            && self.stages == other.stages
            && self.seed == other.seed
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

mod lossless_metrics {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&String, Repr> = m
            .iter()
            .map(|(k, v)| {
                let r = if v.is_finite() {
                    Repr::Num(*v)
                } else if v.is_nan() {
                    Repr::Text("nan".into())
                } else if *v > 0.0 {
                    Repr::Text("inf".into())
                } else {
                    Repr::Text("-inf".into())
                };
                (k, r)
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Repr>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, r)| {
                let v = match r {
                    Repr::Num(v) => v,
                    Repr::Text(t) => match t.as_str() {
                        "nan" => f64::NAN,
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        other => return Err(D::Error::custom(format!("bad metric value `{other}`"))),
                    },
                };
                Ok((k, v))
            })
            .collect()
    }
}

/// Report plus the CSV tables it refers to, keyed by file stem.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub tables: Vec<(String, CsvTable)>,
}

/// Compares `C` with `2 (Λ̂ + 2 Γ̂) / (1 - alpha)`.
pub fn validate_schedule(
    p: &PotentialSpec,
    b: &DriftSpec,
    sch: &NoiseSchedule,
    x_grid: &[Vec<f64>],
    seed: u64,
) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let inputs = json!({
        "potential": p.name(), "drift": b.name(), "alpha": sch.alpha, "C": sch.big_c, "x_grid": x_grid,
    });
    let mut rep = ExperimentReport::new("validate_schedule", inputs, seed);
    if x_grid.is_empty() {
        return Err(Error::InvalidInput("x grid must be nonempty".into()));
    }
    let d = p.slow_dim();
    let lo: Vec<f64> = (0..d).map(|j| x_grid.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| x_grid.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let hi: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| if h > l { *h } else { l + 1.0 }).collect();
    let audit = check_assumptions(p, b, &SamplingPlan::new(lo, hi), seed)?;
    rep.ran("assumptions");
    let mut tables = Vec::new();
    if p.fast_dim() == 1 {
        let q = estimate_lambda(p, x_grid, &MinimaOptions::default())?;
        rep.ran("quasipotential");
        rep.metric("lambda_hat", q.lambda_hat);
        tables.push(("quasipotential".to_string(), q.to_table()));
    } else {
        rep.skipped("quasipotential", "quasipotential is one-dimensional only");
        rep.metric("lambda_hat", f64::NAN);
    }
    let lambda = rep.metrics["lambda_hat"];
    let threshold = sch.admissibility_threshold(lambda, audit.gamma_hat);
    rep.metric("gamma_hat", audit.gamma_hat);
    rep.metric("threshold", threshold);
    rep.metric("C", sch.big_c);
    rep.flag("schedule_admissible", sch.big_c > threshold);
    rep.runtime_secs = start.elapsed().as_secs_f64();
    Ok(ExperimentOutput { report: rep, tables })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowdownConfig {
    pub z0: Vec<f64>,
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub sample_every: f64,
    pub seed: u64,
}

impl Default for SlowdownConfig {
    fn default() -> Self {
        Self { z0: vec![std::f64::consts::FRAC_1_SQRT_2], n_paths: 1000, dt: 0.01, t_max: 1e5, sample_every: 0.5, seed: 0 }
    }
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Relaxation times of the smoothed sign observable at each `s`, and the
/// slope of `ln tau` against `1/s²`. The Arrhenius prediction for the slope
/// is `Ṽ/2` (half the largest finite pairwise quasipotential), since
/// `tau ~ exp(2 ΔU / s²)` and `Ṽ = 4 ΔU`.
pub fn spectral_slowdown_study(
    p: &PotentialSpec,
    x: &[f64],
    s_list: &[f64],
    cfg: &SlowdownConfig,
) -> Result<ExperimentOutput> {
    let start = Instant::now();
    if s_list.len() < 3 || s_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("need at least three strictly decreasing noise levels".into()));
    }
    let inputs = json!({ "potential": p.name(), "x": x, "s_list": s_list, "config": cfg });
    let mut rep = ExperimentReport::new("spectral_slowdown", inputs, cfg.seed);
    let mut table = CsvTable::new(["s", "inv_s2", "tau", "ln_tau", "r_squared", "fit_ok"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut all_ok = true;
    for (k, &s) in s_list.iter().enumerate() {
        let rc = RelaxationConfig {
            x: x.to_vec(),
            s_val: s,
            z0: cfg.z0.clone(),
            n_paths: cfg.n_paths,
            t_max: cfg.t_max,
            dt: cfg.dt,
            seed: derive_seed(cfg.seed, k as u64),
            sample_every: cfg.sample_every,
        };
        let fit = estimate_relaxation_time(p, &rc, smoothed_sign, None)?;
        all_ok &= fit.fit_ok;
        rep.metric(format!("tau_s{s}"), fit.tau);
        table.push(vec![s, 1.0 / (s * s), fit.tau, fit.tau.ln(), fit.r_squared, if fit.fit_ok { 1.0 } else { 0.0 }]);
        xs.push(1.0 / (s * s));
        ys.push(fit.tau.ln());
    }
    rep.ran("relaxation");
    let (slope, intercept) = linear_fit(&xs, &ys);
    rep.metric("slope", slope);
    rep.metric("intercept", intercept);
    rep.flag("fits_ok", all_ok);
    rep.flag("tau_increasing", ys.windows(2).all(|w| w[1] > w[0]));

    if p.fast_dim() == 1 {
        let ms = find_global_minima(p, x, &MinimaOptions::default())?;
        let v = quasipotential_1d(p, x, &ms)?;
        let barrier = v.iter().copied().filter(|e| e.is_finite()).fold(0.0, f64::max);
        let predicted = barrier / 2.0;
        rep.ran("quasipotential");
        rep.metric("barrier_vtilde", barrier);
        rep.metric("predicted_slope", predicted);
        if predicted > 0.0 {
            rep.metric("slope_ratio", slope / predicted);
            rep.flag("slope_positive", slope > 0.0);
            rep.flag("slope_within_factor_2", slope >= predicted / 2.0 && slope <= 2.0 * predicted);
        }
    } else {
        rep.skipped("quasipotential", "quasipotential is one-dimensional only");
    }
    rep.runtime_secs = start.elapsed().as_secs_f64();
    Ok(ExperimentOutput { report: rep, tables: vec![("arrhenius".to_string(), table)] })
}

/// Knobs of [`reproduce_example`]; `None` keeps the example's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceOverrides {
    pub drift: Option<String>,
    pub alpha: Option<f64>,
    pub big_c: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    pub x0: Option<f64>,
    pub seed: Option<u64>,
    pub limit_dt: Option<f64>,
    pub filippov_tol: Option<f64>,
    /// Largest admissible violation fraction of the Filippov check.
    pub filippov_max_fraction: Option<f64>,
    /// Pass threshold for `D` at the smallest epsilon.
    pub convergence_max_dist: Option<f64>,
}

struct ExampleSetup {
    potential: PotentialSpec,
    drift: DriftSpec,
    x0: f64,
    horizon: f64,
    patch: bool,
    max_fraction: f64,
}

fn example_setup(name: &str, ov: &ReproduceOverrides) -> Result<ExampleSetup> {
    let (model, drift, x0, horizon, patch, max_fraction) = match name {
        "example_2_1" => ("example_2_1", "cos_y", 0.0, 1.0, false, 0.0),
        "example_2_2" => ("example_2_2", "cos_y_damped", -0.5, 1.0, true, 0.0),
        "example_2_3" => ("example_2_3", "sin_y", 0.5, 1.5, false, 0.01),
        other => {
            return Err(Error::Config(format!("unknown example `{other}`; available: {}", EXAMPLES.join(", "))))
        }
    };
    let mut params = Params::new();
    if name == "example_2_3" {
        params.insert("phi".into(), ParamValue::Text("tanh_half".into()));
    }
    Ok(ExampleSetup {
        potential: build_potential(model, &params)?,
        drift: build_drift(ov.drift.as_deref().unwrap_or(drift), &Params::new())?,
        x0: ov.x0.unwrap_or(x0),
        horizon: ov.horizon.unwrap_or(horizon),
        patch,
        max_fraction: ov.filippov_max_fraction.unwrap_or(max_fraction),
    })
}

/// `D(eps_{k+1}) <= D(eps_k)` up to one combined standard error.
pub fn non_increasing_within_stderr(rows: &[ConvergenceRow]) -> bool {
    rows.windows(2).all(|w| {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].mean_sup_dist <= w[0].mean_sup_dist + se
    })
}

/// Full pipeline for one of the worked examples: minima and Laplace atoms
/// at `x0`, limit ODE, Filippov checks, quasipotential at `x0` and the
/// coupled-to-limit convergence study.
pub fn reproduce_example(name: &str, ov: &ReproduceOverrides) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let setup = example_setup(name, ov)?;
    let alpha = ov.alpha.unwrap_or(0.25);
    let sch = NoiseSchedule::new(alpha, ov.big_c.unwrap_or(1.0))?;
    let eps_list = ov.eps_list.clone().unwrap_or_else(|| vec![0.05, 0.02, 0.01, 0.005]);
    let n_paths = ov.n_paths.unwrap_or(50);
    let seed = ov.seed.unwrap_or(0);
    let limit_dt = ov.limit_dt.unwrap_or(1e-3);
    let tol = ov.filippov_tol.unwrap_or(0.05);
    let inputs = json!({
        "example": name, "potential": setup.potential.name(), "drift": setup.drift.name(),
        "alpha": alpha, "C": sch.big_c, "eps_list": eps_list, "n_paths": n_paths, "T": setup.horizon,
        "x0": setup.x0, "limit_dt": limit_dt, "filippov_tol": tol,
        "filippov_max_fraction": setup.max_fraction, "convergence_max_dist": ov.convergence_max_dist,
    });
    let mut rep = ExperimentReport::new(name, inputs, seed);
    let mut tables = Vec::new();
    let x0 = [setup.x0];

    let opts = MinimaOptions::default();
    let ms = find_global_minima(&setup.potential, &x0, &opts)?;
    rep.metric("minima_count_at_x0", ms.count() as f64);
    rep.ran("minima");
    match laplace_limit_measure(&ms) {
        Ok(atoms) => {
            tables.push(("atoms".to_string(), atoms.to_table()));
            rep.ran("laplace");
        }
        Err(Error::SingularHessian { det }) => rep.skipped("laplace", format!("singular Hessian at x0 (det {det})")),
        Err(e) => return Err(e),
    }

    let mut field = AveragedField::new(setup.potential.clone(), setup.drift.clone(), FieldMode::Laplace)?;
    field.patch_unique_minimum = setup.patch;
    let lim = solve_limit_ode(&field, &x0, setup.horizon, limit_dt)?;
    rep.metric("limit_x_end", *lim.xs.last().unwrap());
    rep.metric("limit_flagged_steps", lim.flagged.iter().filter(|f| **f).count() as f64);
    tables.push(("limit".to_string(), lim.to_table()));
    rep.ran("limit_ode");

    let fil = check_filippov(&lim.times, &lim.xs, &field, tol, &FilippovProbe::default())?;
    rep.metric("filippov_violation_fraction", fil.violation_fraction);
    rep.metric("filippov_max_distance", fil.max_distance);
    rep.flag("filippov_membership", fil.violation_fraction <= setup.max_fraction);
    rep.ran("filippov");

    let hull = filippov_enlargement(&field, &[0.0], &FilippovProbe::default())?;
    if let Hull::Interval { lo, hi } = hull.hull {
        rep.metric("hull_at_0_lo", lo);
        rep.metric("hull_at_0_hi", hi);
    }
    if name == "example_2_3" {
        rep.flag("hull_at_0_nondegenerate", hull.diameter() > 0.1);
    }

    if setup.potential.fast_dim() == 1 {
        let v = quasipotential_1d(&setup.potential, &x0, &ms)?;
        let gap = if ms.count() > 1 {
            let vs = crate::fastproc::w_graph_constants(&v)?;
            vs[0] - vs[1]
        } else {
            0.0
        };
        rep.metric("v1_minus_v2_at_x0", gap);
        rep.ran("quasipotential");
    } else {
        rep.skipped("quasipotential", "quasipotential is one-dimensional only");
    }

    let mut conv = ConvergenceSetup::new(x0.to_vec(), vec![0.0], setup.horizon, n_paths, seed);
    conv.limit_steps = (setup.horizon / limit_dt).round().max(1.0) as usize;
    let rows = convergence_study(&field, &sch, &eps_list, &conv)?;
    let last = rows.last().map_or(f64::NAN, |r| r.mean_sup_dist);
    rep.metric("convergence_d_smallest_eps", last);
    rep.flag("convergence_trend", non_increasing_within_stderr(&rows));
    if let Some(max) = ov.convergence_max_dist {
        rep.flag("convergence_max_dist", last <= max);
    }
    tables.push(("convergence".to_string(), convergence_table(&rows)));
    rep.ran("convergence");
    rep.skipped("filter", "run the filter command for filter-vs-invariant checks");

    rep.runtime_secs = start.elapsed().as_secs_f64();
    Ok(ExperimentOutput { report: rep, tables })
}
