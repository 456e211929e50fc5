//! Command-line front end: a TOML run file merged with flag overrides,
//! dispatched to one library routine per command.
//!
//! Exit codes: `0` success, `1` error, `2` the run finished but a pass/fail
//! flag of its report is false.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    non_increasing_within_stderr, reproduce_example, smoothed_sign, spectral_slowdown_study, validate_schedule,
    ExperimentOutput, ExperimentReport, ReproduceOverrides, SlowdownConfig,
};
use crate::fastproc::{estimate_lambda, invariant_density_grid, laplace_limit_measure, GridSpec};
use crate::filter::{filter_vs_invariant, run_fkk_particle_filter, FilterConfig, InitialCloud};
use crate::io::CsvTable;
use crate::limit::{
    check_filippov, convergence_study, convergence_table, solve_limit_ode, AveragedField, ConvergenceSetup,
    FieldMode, FilippovProbe,
};
use crate::potential::{
    build_drift, build_potential, check_assumptions, find_global_minima, ParamValue, Params, SamplingPlan,
};
use crate::sde::{simulate_coupled_path, simulate_frozen, FrozenConfig};
use crate::{DriftSpec, Error, MinimaOptions, NoiseSchedule, PotentialSpec, Result, SimConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Simulate,
    Frozen,
    Invariant,
    Limit,
    Converge,
    Filter,
    Quasipotential,
    Spectra,
    Assumptions,
    Reproduce,
}

/// Contents of a run file. Every key is optional; unset keys take the
/// per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub model: Option<String>,
    #[serde(default)]
    pub model_params: Params,
    pub drift: Option<String>,
    #[serde(default)]
    pub drift_params: Params,
    pub alpha: Option<f64>,
    #[serde(rename = "C")]
    pub big_c: Option<f64>,
    pub epsilon: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub paths: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    /// Fast noise levels for `frozen`, `invariant` and `spectra`.
    pub s: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub particles: Option<usize>,
    /// Slow-variable grid (one-dimensional) for `quasipotential` and `assumptions`.
    pub x_grid: Option<Vec<f64>>,
    pub filippov_tol: Option<f64>,
    pub filippov_max_fraction: Option<f64>,
    pub example: Option<String>,
    pub reproduce: Option<ReproduceOverrides>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Range and sign checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha must lie in (0,1), got {a}")));
            }
        }
        if let Some(c) = self.big_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("C must be positive, got {c}")));
            }
        }
        if let Some(eps) = &self.epsilon {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(Error::Config("epsilon values must lie in (0,1)".into()));
            }
        }
        if let Some(s) = &self.s {
            if s.is_empty() || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("s values must be positive".into()));
            }
        }
        for (key, v) in [("horizon", self.horizon), ("dt", self.dt), ("filippov_tol", self.filippov_tol)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{key} must be positive, got {v}")));
                }
            }
        }
        if self.paths == Some(0) {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        Ok(())
    }

    /// Stable digest of the effective configuration, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let keyed = Self { output_dir: None, ..self.clone() };
        let text = serde_json::to_string(&keyed).unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> String {
        format!("slowfast {VERSION} seed={} config_hash={}", self.seed.unwrap_or(0), self.hash())
    }
}

#[derive(Debug, Parser)]
#[command(name = "slowfast", version, about = "Slow-fast SDE numerical laboratory")]
pub struct Cli {
    /// Command to run; may instead come from the run file.
    #[arg(value_enum)]
    pub command: Option<CommandName>,
    /// TOML run file; flags take precedence over its values.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter `key=value`, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub drift: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long = "C", allow_negative_numbers = true)]
    pub big_c: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub y0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub s: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub example: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
}

impl Cli {
    /// Run file (if any) with the flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => {$(if self.$f.is_some() { cfg.$f = self.$f.clone(); })*};
        }
        take!(command, model, drift, alpha, big_c, epsilon, horizon, paths, x0, y0, s, dt, particles, x_grid, example, seed, output_dir);
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--param expects KEY=VALUE, got `{kv}`")))?;
            let value = v.parse::<f64>().map(ParamValue::Number).unwrap_or_else(|_| ParamValue::Text(v.into()));
            cfg.model_params.insert(k.trim().into(), value);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let info = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return if info { 0 } else { 1 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match cli.resolve().and_then(|cfg| run(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Caps the rayon pool at `SLOWFAST_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SLOWFAST_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("SLOWFAST_THREADS must be a positive integer, got `{v}`")))?;
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the configured command, writes its outputs, and returns the exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let out = execute(cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("slowfast_out"));
    std::fs::create_dir_all(&dir)?;
    let prov = cfg.provenance();
    for (name, table) in &out.tables {
        table.write(&dir.join(format!("{name}.csv")), Some(&prov))?;
    }
    out.report.write_json(&dir.join("report.json"))?;
    println!("{}", out.report.to_json()?);
    Ok(if out.report.passed() { 0 } else { 2 })
}

/// Runs the configured command without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let command = cfg.command.ok_or_else(|| Error::Config("no command given".into()))?;
    let start = Instant::now();
    let mut out = match command {
        CommandName::Simulate => cmd_simulate(cfg),
        CommandName::Frozen => cmd_frozen(cfg),
        CommandName::Invariant => cmd_invariant(cfg),
        CommandName::Limit => cmd_limit(cfg),
        CommandName::Converge => cmd_converge(cfg),
        CommandName::Filter => cmd_filter(cfg),
        CommandName::Quasipotential => cmd_quasipotential(cfg),
        CommandName::Spectra => cmd_spectra(cfg),
        CommandName::Assumptions => cmd_assumptions(cfg),
        CommandName::Reproduce => cmd_reproduce(cfg),
    }?;
    if out.report.runtime_secs == 0.0 {
        out.report.runtime_secs = start.elapsed().as_secs_f64();
    }
    Ok(out)
}

struct Model {
    p: PotentialSpec,
    b: DriftSpec,
    sch: NoiseSchedule,
    x0: Vec<f64>,
    y0: Vec<f64>,
    seed: u64,
}

fn model(cfg: &RunConfig) -> Result<Model> {
    let p = build_potential(cfg.model.as_deref().unwrap_or("example_2_1"), &cfg.model_params)?;
    let b = build_drift(cfg.drift.as_deref().unwrap_or("cos_y"), &cfg.drift_params)?;
    let (d, m) = (p.slow_dim(), p.fast_dim());
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let y0 = cfg.y0.clone().unwrap_or_else(|| vec![0.0; m]);
    if x0.len() != d || y0.len() != m {
        return Err(Error::Config(format!("model `{}` needs x0 of length {d} and y0 of length {m}", p.name())));
    }
    let sch = NoiseSchedule::new(cfg.alpha.unwrap_or(0.25), cfg.big_c.unwrap_or(1.0))?;
    Ok(Model { p, b, sch, x0, y0, seed: cfg.seed.unwrap_or(0) })
}

fn new_report(name: &str, cfg: &RunConfig, seed: u64) -> Result<ExperimentReport> {
    Ok(ExperimentReport::new(name, serde_json::to_value(cfg)?, seed))
}

fn epsilons(cfg: &RunConfig) -> Vec<f64> {
    cfg.epsilon.clone().unwrap_or_else(|| vec![0.05, 0.02, 0.01, 0.005])
}

fn first_s(cfg: &RunConfig) -> f64 {
    cfg.s.as_ref().map_or(0.5, |s| s[0])
}

fn x_grid(cfg: &RunConfig, d: usize) -> Result<Vec<Vec<f64>>> {
    match &cfg.x_grid {
        Some(g) if d == 1 => Ok(g.iter().map(|x| vec![*x]).collect()),
        Some(_) => Err(Error::Config("x_grid is supported for one-dimensional x only".into())),
        None if d == 1 => Ok((0..=40).map(|k| vec![-2.0 + 0.1 * k as f64]).collect()),
        None => Ok(vec![vec![0.0; d]]),
    }
}

fn sim_config(cfg: &RunConfig, m: &Model, eps: f64) -> SimConfig {
    let mut sc = SimConfig::new(eps, cfg.horizon.unwrap_or(1.0), m.x0.clone(), m.y0.clone(), m.sch);
    sc.seed = m.seed;
    if let Some(dt) = cfg.dt {
        sc.dt_max = dt;
    }
    sc
}

fn cmd_simulate(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let eps = epsilons(cfg)[0];
    let sc = sim_config(cfg, &m, eps);
    let (dt, n) = sc.grid()?;
    let mut table: Option<CsvTable> = None;
    for path in 0..cfg.paths.unwrap_or(1) as u64 {
        let tr = simulate_coupled_path(&m.p, &m.b, &sc, path)?;
        let t = tr.to_table(path as usize);
        match &mut table {
            Some(all) => all.rows.extend(t.rows),
            None => table = Some(t),
        }
    }
    let mut rep = new_report("simulate", cfg, m.seed)?;
    rep.ran("simulate");
    rep.metric("dt", dt);
    rep.metric("n_steps", n as f64);
    rep.metric("epsilon", eps);
    Ok(ExperimentOutput { report: rep, tables: vec![("trajectories".into(), table.expect("at least one path"))] })
}

fn cmd_frozen(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let dt = cfg.dt.unwrap_or(1e-3);
    let t_end = cfg.horizon.unwrap_or(1.0);
    let steps = (t_end / dt).round().max(1.0) as usize;
    let fc = FrozenConfig {
        x: m.x0.clone(),
        s_val: first_s(cfg),
        z0: m.y0.clone(),
        t_end,
        dt,
        n_paths: cfg.paths.unwrap_or(1000),
        seed: m.seed,
        record_every: steps.div_ceil(1000).max(1),
    };
    let ens = simulate_frozen(&m.p, &fc)?;
    let mut rep = new_report("frozen", cfg, m.seed)?;
    rep.ran("frozen");
    if m.p.fast_dim() == 1 {
        if let Some(last) = ens.mean_of(|z| z[0]).last() {
            rep.metric("final_mean", *last);
        }
    }
    Ok(ExperimentOutput { report: rep, tables: vec![("frozen".into(), ens.to_table())] })
}

fn cmd_invariant(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let s = first_s(cfg);
    let grid = GridSpec::auto(&m.p, &m.x0, s)?;
    let g = invariant_density_grid(&m.p, &m.x0, s, &grid)?;
    let mut rep = new_report("invariant", cfg, m.seed)?;
    rep.ran("quadrature");
    rep.metric("tail_bound", g.tail_bound);
    rep.metric("n_nodes", g.n_nodes() as f64);
    rep.metric("mean_b", g.expectation(|y| m.b.eval(&m.x0, y)[0]));
    let mut tables = vec![("density".to_string(), g.to_table())];
    let ms = find_global_minima(&m.p, &m.x0, &MinimaOptions::default())?;
    match laplace_limit_measure(&ms) {
        Ok(atoms) => {
            rep.ran("laplace");
            rep.metric("n_atoms", atoms.atoms.len() as f64);
            tables.push(("atoms".into(), atoms.to_table()));
        }
        Err(e) => rep.skipped("laplace", e.to_string()),
    }
    Ok(ExperimentOutput { report: rep, tables })
}

fn field(cfg: &RunConfig, m: &Model) -> Result<AveragedField> {
    let mut f = AveragedField::new(m.p.clone(), m.b.clone(), FieldMode::Laplace)?;
    f.patch_unique_minimum = matches!(cfg.model.as_deref(), Some("example_2_2" | "u2"));
    Ok(f)
}

fn cmd_limit(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let f = field(cfg, &m)?;
    let traj = solve_limit_ode(&f, &m.x0, cfg.horizon.unwrap_or(1.0), cfg.dt.unwrap_or(1e-3))?;
    let tol = cfg.filippov_tol.unwrap_or(0.05);
    let fil = check_filippov(&traj.times, &traj.xs, &f, tol, &FilippovProbe::default())?;
    let mut rep = new_report("limit", cfg, m.seed)?;
    rep.ran("limit_ode");
    rep.ran("filippov");
    rep.metric("filippov_violation_fraction", fil.violation_fraction);
    rep.metric("filippov_max_distance", fil.max_distance);
    rep.metric("x_final", traj.x(traj.times.len() - 1)[0]);
    rep.flag("filippov_membership", fil.violation_fraction <= cfg.filippov_max_fraction.unwrap_or(0.0));
    Ok(ExperimentOutput { report: rep, tables: vec![("limit".into(), traj.to_table())] })
}

fn cmd_converge(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let f = field(cfg, &m)?;
    let mut setup =
        ConvergenceSetup::new(m.x0.clone(), m.y0.clone(), cfg.horizon.unwrap_or(1.0), cfg.paths.unwrap_or(50), m.seed);
    if let Some(dt) = cfg.dt {
        setup.dt_max = dt;
    }
    let rows = convergence_study(&f, &m.sch, &epsilons(cfg), &setup)?;
    let mut rep = new_report("converge", cfg, m.seed)?;
    rep.ran("convergence");
    for r in &rows {
        rep.metric(format!("D_eps{}", r.epsilon), r.mean_sup_dist);
    }
    rep.flag("convergence_trend", non_increasing_within_stderr(&rows));
    Ok(ExperimentOutput { report: rep, tables: vec![("convergence".into(), convergence_table(&rows))] })
}

fn cmd_filter(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let eps = epsilons(cfg)[0];
    let observed = simulate_coupled_path(&m.p, &m.b, &sim_config(cfg, &m, eps), 0)?;
    let mut fc = FilterConfig::new(eps, m.sch, InitialCloud::Point { y: m.y0.clone() });
    fc.n_particles = cfg.particles.unwrap_or(1000);
    fc.seed = crate::rng::derive_seed(m.seed, 1);
    let run = run_fkk_particle_filter(&m.p, &m.b, &observed, &fc)?;
    let mut rep = new_report("filter", cfg, m.seed)?;
    rep.ran("filter");
    rep.metric("n_resamples", run.n_resamples as f64);
    let mut tables = vec![("filter_summary".to_string(), run.summary_table())];
    if m.p.fast_dim() == 1 {
        let disc = filter_vs_invariant(&run, &m.p, &observed, eps, &m.sch, smoothed_sign)?;
        rep.ran("discrepancy");
        rep.metric("kappa", disc.kappa);
        rep.metric("max_discrepancy", disc.max);
        rep.flag("discrepancy_within_0.1", disc.max <= 0.1);
        tables.push(("discrepancy".into(), disc.to_table()));
    } else {
        rep.skipped("discrepancy", "smoothed sign observable is one-dimensional");
    }
    Ok(ExperimentOutput { report: rep, tables })
}

fn cmd_quasipotential(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let q = estimate_lambda(&m.p, &x_grid(cfg, m.p.slow_dim())?, &MinimaOptions::default())?;
    let mut rep = new_report("quasipotential", cfg, m.seed)?;
    rep.ran("quasipotential");
    rep.metric("lambda_hat", q.lambda_hat);
    rep.metric("argmax_x", q.argmax.first().copied().unwrap_or(f64::NAN));
    Ok(ExperimentOutput { report: rep, tables: vec![("quasipotential".into(), q.to_table())] })
}

fn cmd_spectra(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    if m.p.fast_dim() != 1 {
        return Err(Error::Config("spectra uses the smoothed sign observable and needs m = 1".into()));
    }
    let s_list = cfg.s.clone().unwrap_or_else(|| vec![0.40, 0.32, 0.27, 0.24]);
    let mut sc = SlowdownConfig { seed: m.seed, ..SlowdownConfig::default() };
    if let Some(n) = cfg.paths {
        sc.n_paths = n;
    }
    if let Some(dt) = cfg.dt {
        sc.dt = dt;
    }
    if let Some(y0) = &cfg.y0 {
        sc.z0 = y0.clone();
    }
    let mut out = spectral_slowdown_study(&m.p, &m.x0, &s_list, &sc)?;
    out.report.inputs = serde_json::to_value(cfg)?;
    Ok(out)
}

fn cmd_assumptions(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let m = model(cfg)?;
    let grid = x_grid(cfg, m.p.slow_dim())?;
    let d = m.p.slow_dim();
    let lo: Vec<f64> = (0..d).map(|j| grid.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| grid.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let hi: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| if h > l { *h } else { l + 1.0 }).collect();
    let audit = check_assumptions(&m.p, &m.b, &SamplingPlan::new(lo, hi), m.seed)?;
    let mut out = validate_schedule(&m.p, &m.b, &m.sch, &grid, m.seed)?;
    let admissible = out.report.flags.remove("schedule_admissible").unwrap_or(false);
    if !admissible {
        eprintln!(
            "warning: C = {} does not exceed 2(Λ̂ + 2Γ̂)/(1 - alpha) = {:.4}; averaging rates are not guaranteed",
            m.sch.big_c, out.report.metrics["threshold"]
        );
    }
    let rep = &mut out.report;
    rep.inputs = serde_json::to_value(cfg)?;
    rep.metric("schedule_admissible", if admissible { 1.0 } else { 0.0 });
    rep.metric("drift_sup", audit.drift_sup.value);
    rep.metric("drift_lipschitz", audit.drift_lipschitz);
    rep.metric("grad_lipschitz", audit.grad_lipschitz);
    rep.metric("inner_bound", audit.inner_bound.value);
    rep.flag("drift_bounded", !audit.drift_bound_exceeded);
    rep.flag("coercivity_probe_ok", audit.coercivity_probe_ok);
    if let Some(v) = &audit.convexity_violation {
        rep.metric("convexity_violation", v.value);
    }
    let mut g = CsvTable::new(["r", "g"]);
    for (r, v) in &audit.g_curve {
        g.push(vec![*r, *v]);
    }
    out.tables.push(("g_curve".into(), g));
    Ok(out)
}

fn cmd_reproduce(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let name = cfg
        .example
        .as_deref()
        .or(cfg.model.as_deref())
        .ok_or_else(|| Error::Config("reproduce needs an example name (--example)".into()))?;
    let mut ov = cfg.reproduce.clone().unwrap_or_default();
    ov.alpha = ov.alpha.or(cfg.alpha);
    ov.big_c = ov.big_c.or(cfg.big_c);
    ov.eps_list = ov.eps_list.or_else(|| cfg.epsilon.clone());
    ov.n_paths = ov.n_paths.or(cfg.paths);
    ov.horizon = ov.horizon.or(cfg.horizon);
    ov.seed = ov.seed.or(cfg.seed);
    ov.drift = ov.drift.or_else(|| cfg.drift.clone());
    ov.x0 = ov.x0.or_else(|| cfg.x0.as_ref().and_then(|x| x.first().copied()));
    ov.limit_dt = ov.limit_dt.or(cfg.dt);
    ov.filippov_tol = ov.filippov_tol.or(cfg.filippov_tol);
    ov.filippov_max_fraction = ov.filippov_max_fraction.or(cfg.filippov_max_fraction);
    reproduce_example(name, &ov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("slowfast").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flag_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "command = \"converge\"\nepsilon = [0.05]\npaths = 7\n").unwrap();
        let cli = parse(&["--config", path.to_str().unwrap(), "--epsilon", "0.01"]);
        let cfg = cli.resolve().unwrap();
        assert_eq!(cfg.epsilon, Some(vec![0.01]));
        assert_eq!(cfg.paths, Some(7));
        assert_eq!(cfg.command, Some(CommandName::Converge));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::from_toml("epsilonn = [0.1]\n").unwrap_err().to_string();
        assert!(err.contains("epsilonn"), "{err}");
    }

    #[test]
    fn alpha_range() {
        let err = parse(&["simulate", "--alpha", "1.5"]).resolve().unwrap_err().to_string();
        assert!(err.contains("alpha must lie in (0,1)"), "{err}");
    }

    #[test]
    fn invariant_rejects_three_fast_dims() {
        let cfg = parse(&["invariant", "--model", "quadratic_bowl", "--param", "m=3", "--y0", "0,0,0"]).resolve().unwrap();
        let err = execute(&cfg).unwrap_err().to_string();
        assert!(err.contains("quadrature supports m ≤ 2"), "{err}");
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig { seed: Some(1), ..Default::default() };
        let b = RunConfig { seed: Some(2), ..Default::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
        assert!(a.provenance().starts_with("slowfast 0.1.0 seed=1 config_hash="));
    }
}
