mod common;

use slowfast::fastproc::{
    action_functional, estimate_lambda, invariant_density_grid, quasipotential_1d, ActionScheme, GridSpec,
};
use slowfast::limit::{convergence_study, AveragedField, ConvergenceSetup, FieldMode};
use slowfast::potential::{build_drift, find_global_minima, make_example_u1, make_quadratic_bowl, DriftSpec, Params};
use slowfast::sde::{simulate_coupled_ensemble, simulate_frozen, FrozenConfig};
use slowfast::{MinimaOptions, NoiseSchedule, SimConfig};

use common::*;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (n - 1.0);
    (mu, (var / n).sqrt())
}

#[test]
fn constant_drift_moves_mean_linearly() {
    let p = make_example_u1().unwrap();
    let b = DriftSpec::from_fn("two", 1, 1, 2.0, Some(0.0), |_, _, out| out[0] = 2.0).unwrap();
    let sch = NoiseSchedule::new(0.25, 1.0).unwrap();
    let mut cfg = SimConfig::new(0.05, 0.5, vec![0.3], vec![0.0], sch);
    cfg.seed = 12;
    let paths = simulate_coupled_ensemble(&p, &b, &cfg, 400).unwrap();
    let ends: Vec<f64> = paths.iter().map(|t| t.x(t.len() - 1)[0]).collect();
    let (mu, se) = mean_se(&ends);
    assert!((mu - 1.3).abs() < 3.0 * se, "mean {mu} se {se}");
    // Var X_T = eps^{2 alpha} T
    let var = ends.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / 399.0;
    let exact = 0.05f64.powf(0.5) * 0.5;
    assert!((var / exact - 1.0).abs() < 0.2, "var {var} vs {exact}");
}

#[test]
fn frozen_bowl_relaxes_like_ornstein_uhlenbeck() {
    let p = make_quadratic_bowl(1).unwrap();
    let s = 0.5;
    let cfg = FrozenConfig {
        x: vec![0.0],
        s_val: s,
        z0: vec![1.0],
        t_end: 4.0,
        dt: 1e-3,
        n_paths: 2000,
        seed: 5,
        record_every: 500,
    };
    let ens = simulate_frozen(&p, &cfg).unwrap();
    for (k, t) in ens.times.iter().enumerate() {
        let v: Vec<f64> = (0..ens.n_paths).map(|i| ens.state(i, k)[0]).collect();
        let (mu, se) = mean_se(&v);
        let exact_mean = (-t).exp();
        assert!((mu - exact_mean).abs() < 3.5 * se + 1e-3, "t={t}: mean {mu} vs {exact_mean}");
        if *t > 0.0 {
            let exact_var = s * s / 2.0 * (1.0 - (-2.0 * t).exp());
            let var = v.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
            let rel_se = (2.0 / v.len() as f64).sqrt();
            assert!((var / exact_var - 1.0).abs() < 3.5 * rel_se, "t={t}: var {var} vs {exact_var}");
        }
    }
}

#[test]
fn frozen_histogram_matches_gibbs_density() {
    let p = make_example_u1().unwrap();
    let s = 0.5;
    let cfg = FrozenConfig {
        x: vec![0.0],
        s_val: s,
        z0: vec![0.0],
        t_end: 60.0,
        dt: 2e-3,
        n_paths: 200,
        seed: 17,
        record_every: 250,
    };
    let ens = simulate_frozen(&p, &cfg).unwrap();
    let edges: Vec<f64> = (0..=20).map(|k| -2.0 + 0.2 * k as f64).collect();
    let bin = |y: f64| edges.windows(2).position(|w| y >= w[0] && y < w[1]);
    let mut counts = [0.0; 21];
    let mut total = 0.0;
    for (k, t) in ens.times.iter().enumerate() {
        if *t < 10.0 {
            continue;
        }
        for i in 0..ens.n_paths {
            let y = ens.state(i, k)[0];
            counts[bin(y).unwrap_or(20)] += 1.0;
            total += 1.0;
        }
    }
    // reference bin masses from the unnormalised density on a fine grid
    let fine = 20_000;
    let h = 8.0 / fine as f64;
    let mut mass = [0.0; 21];
    let mut z = 0.0;
    for k in 0..fine {
        let y = -4.0 + (k as f64 + 0.5) * h;
        let u = y.powi(4) - y * y + 1.0;
        let w = (-2.0 * u / (s * s)).exp() * h;
        mass[bin(y).unwrap_or(20)] += w;
        z += w;
    }
    let tv: f64 = 0.5 * counts.iter().zip(&mass).map(|(c, m)| (c / total - m / z).abs()).sum::<f64>();
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn zero_drift_distance_is_brownian_sup() {
    let p = make_example_u1().unwrap();
    let b = build_drift("zero", &Params::new()).unwrap();
    let f = AveragedField::new(p, b, FieldMode::Laplace).unwrap();
    let sch = NoiseSchedule::new(0.25, 1.0).unwrap();
    let setup = ConvergenceSetup::new(vec![0.0], vec![0.0], 1.0, 400, 3);
    let rows = convergence_study(&f, &sch, &[0.05], &setup).unwrap();
    let expected = sch.slow_noise(0.05) * BROWNIAN_ABS_SUP_MEAN;
    let r = &rows[0];
    // discrete monitoring misses a little of the running maximum
    assert!((r.mean_sup_dist - expected).abs() < 3.0 * r.stderr + 0.03 * expected, "{r:?} vs {expected}");
}

#[test]
fn standard_error_shrinks_with_more_paths() {
    let p = make_example_u1().unwrap();
    let b = build_drift("cos_y", &Params::new()).unwrap();
    let f = AveragedField::new(p, b, FieldMode::Laplace).unwrap();
    let sch = NoiseSchedule::new(0.25, 1.0).unwrap();
    let small = convergence_study(&f, &sch, &[0.05], &ConvergenceSetup::new(vec![0.0], vec![0.0], 1.0, 100, 4)).unwrap();
    let large = convergence_study(&f, &sch, &[0.05], &ConvergenceSetup::new(vec![0.0], vec![0.0], 1.0, 400, 5)).unwrap();
    let ratio = large[0].stderr / small[0].stderr;
    assert!((0.35..0.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gibbs_moments_of_the_bowl() {
    let p = make_quadratic_bowl(2).unwrap();
    for s in [0.3, 1.0] {
        let g = invariant_density_grid(&p, &[0.0], s, &GridSpec::auto(&p, &[0.0], s).unwrap()).unwrap();
        let second = g.expectation(|y| y[0] * y[0]);
        assert!((second - s * s / 2.0).abs() < 1e-3 * s * s, "s={s}: {second}");
        assert!(g.expectation(|y| y[0] * y[1]).abs() < 1e-9);
    }
}

#[test]
fn uphill_action_matches_quasipotential() {
    // climb from the left well to the saddle along y' = +U'(y), then descend
    // freely; the cost is 4 ΔU
    let p = make_example_u1().unwrap();
    let ms = find_global_minima(&p, &[0.0], &MinimaOptions::default()).unwrap();
    let v = quasipotential_1d(&p, &[0.0], &ms).unwrap();
    let du = |y: f64| 4.0 * y * y * y - 2.0 * y;
    let (h, n) = (1e-3, 12_000);
    let climb = rk4_path(du, -0.5f64.sqrt() + 1e-4, h, n, 4);
    let fall = rk4_path(|y| -du(y), 1e-4, h, n, 4);
    let path: Vec<f64> = climb.iter().chain(fall.iter()).copied().collect();
    let times: Vec<f64> = (0..path.len()).map(|k| k as f64 * h).collect();
    let crossing = climb.last().unwrap();
    assert!(crossing.abs() < 2e-3, "climb ended at {crossing}");
    let s = action_functional(&p, &[0.0], &path, &times, ActionScheme::Midpoint).unwrap();
    let vt = v[(0, 1)];
    assert!((s / vt - 1.0).abs() < 0.02, "action {s} vs {vt}");
}

#[test]
fn lambda_is_stable_under_grid_refinement() {
    let p = make_example_u1().unwrap();
    let grid = |n: usize| (0..=n).map(|k| vec![-1.0 + 2.0 * k as f64 / n as f64]).collect::<Vec<_>>();
    let a = estimate_lambda(&p, &grid(20), &MinimaOptions::default()).unwrap().lambda_hat;
    let b = estimate_lambda(&p, &grid(40), &MinimaOptions::default()).unwrap().lambda_hat;
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
    // 4 ΔU with ΔU = c²(x) at x = ±1
    assert!((b - 4.0 * 0.75f64.powi(2)).abs() < 1e-9);
}

#[test]
fn kalman_oracle_agrees_with_closed_form_steady_state() {
    // without observations information the predicted variance tends to the
    // stationary variance of the AR(1) recursion
    let (a, q) = (0.99, 0.002);
    let out = kalman_predictions(0.0, 0.0, a, q, 1e6, 1e-3, &[0.0; 5000]);
    let (_, p) = out.last().unwrap();
    assert!((p - q / (1.0 - a * a)).abs() < 1e-6);
}

#[test]
fn brute_force_oracle_on_known_cases() {
    assert_eq!(brute_force_w_graph(&[vec![0.0, 3.0], vec![1.5, 0.0]]), vec![1.5, 0.0]);
    let chain = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
    assert_eq!(brute_force_w_graph(&chain), vec![2.0, 1.0, 0.0]);
}
