use nalgebra::DMatrix;
use proptest::prelude::*;

use slowfast::diagnostics::ExperimentReport;
use slowfast::fastproc::{invariant_density_grid, laplace_limit_measure, w_graph_constants, GridSpec};
use slowfast::filter::{resample_indices, Resampling};
use slowfast::limit::{averaged_drift, filippov_enlargement, AveragedField, FieldMode, FilippovProbe};
use slowfast::potential::{
    build_drift, find_global_minima, make_example_u1, make_example_u2, make_quadratic_bowl, MinimaSet, Minimum,
    Params,
};
use slowfast::rng;
use slowfast::sde::simulate_coupled;
use slowfast::{MinimaOptions, NoiseSchedule, SimConfig};

fn cost_matrix(l: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..40, l * l).prop_map(|v| v.into_iter().map(|k| 0.25 * k as f64).collect())
}

fn minima_set(dets: &[f64]) -> MinimaSet {
    MinimaSet {
        x: vec![0.0],
        minima: dets
            .iter()
            .enumerate()
            .map(|(i, d)| Minimum { y: vec![i as f64], value: 0.0, hess_det: *d, hess_pd: true })
            .collect(),
        local_minima: Vec::new(),
        tie_tol: 1e-9,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_noise_shrinks_with_epsilon(a in 1e-9f64..0.99, b in 1e-9f64..0.99, c in 0.1f64..50.0, alpha in 0.01f64..0.99) {
        let sch = NoiseSchedule::new(alpha, c).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        let (sl, sh) = (sch.s_of_epsilon(lo).unwrap(), sch.s_of_epsilon(hi).unwrap());
        prop_assert!(sl > 0.0 && sl < sh);
        prop_assert!(sch.slow_noise(lo) < sch.slow_noise(hi));
    }

    #[test]
    fn w_graph_constants_are_non_increasing((l, entries) in (2usize..=5).prop_flat_map(|l| (Just(l), cost_matrix(l)))) {
        let v = DMatrix::from_fn(l, l, |i, j| if i == j { 0.0 } else { entries[i * l + j] });
        let vs = w_graph_constants(&v).unwrap();
        prop_assert_eq!(vs.len(), l);
        prop_assert_eq!(vs[l - 1], 0.0);
        prop_assert!(vs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn w_graph_constants_ignore_labels(entries in cost_matrix(4), shift in 1usize..4) {
        let l = 4;
        let v = DMatrix::from_fn(l, l, |i, j| if i == j { 0.0 } else { entries[i * l + j] });
        let perm = |i: usize| (i + shift) % l;
        let w = DMatrix::from_fn(l, l, |i, j| v[(perm(i), perm(j))]);
        prop_assert_eq!(w_graph_constants(&v).unwrap(), w_graph_constants(&w).unwrap());
    }

    #[test]
    fn laplace_weights_follow_determinants(dets in prop::collection::vec(0.01f64..100.0, 1..6), scale in 0.01f64..100.0) {
        let atoms = laplace_limit_measure(&minima_set(&dets)).unwrap();
        let total: f64 = atoms.atoms.iter().map(|a| a.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (a, d) in atoms.atoms.iter().zip(&dets) {
            let expected = d.powf(-0.5) / dets.iter().map(|e| e.powf(-0.5)).sum::<f64>();
            prop_assert!((a.weight - expected).abs() < 1e-12);
        }
        let scaled: Vec<f64> = dets.iter().map(|d| d * scale).collect();
        let again = laplace_limit_measure(&minima_set(&scaled)).unwrap();
        for (a, b) in atoms.atoms.iter().zip(&again.atoms) {
            prop_assert!((a.weight - b.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_keeps_size_and_valid_ancestors(raw in prop::collection::vec(0.0f64..1.0, 2..200), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut r = rng::stream(seed, 0);
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let idx = resample_indices(&w, scheme, &mut r);
            prop_assert_eq!(idx.len(), w.len());
            prop_assert!(idx.iter().all(|i| *i < w.len() && w[*i] > 0.0));
        }
        // systematic offspring counts stay within one of N w_i
        let idx = resample_indices(&w, Resampling::Systematic, &mut r);
        let n = w.len() as f64;
        for (i, wi) in w.iter().enumerate() {
            let count = idx.iter().filter(|j| **j == i).count() as f64;
            prop_assert!((count - n * wi).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn report_json_round_trips(vals in prop::collection::vec(prop_oneof![any::<f64>(), Just(f64::INFINITY), Just(f64::NAN)], 0..8)) {
        let mut rep = ExperimentReport::new("prop", serde_json::json!({"k": 1}), 3);
        for (i, v) in vals.iter().enumerate() {
            rep.metric(format!("m{i}"), *v);
        }
        rep.flag("ok", true);
        let back = ExperimentReport::from_json(&rep.to_json().unwrap()).unwrap();
        prop_assert!(rep.same_result(&back));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn averaged_drift_respects_drift_bound(x in -5.0f64..5.0) {
        let p = make_example_u2().unwrap();
        let b = build_drift("cos_y_damped", &Params::new()).unwrap();
        let mut f = AveragedField::new(p, b.clone(), FieldMode::Laplace).unwrap();
        f.patch_unique_minimum = true;
        let h = averaged_drift(&f, &[x]).unwrap();
        prop_assert!(h[0].abs() <= b.bound() + 1e-12);
    }

    #[test]
    fn minima_of_the_double_well_are_symmetric(x in -5.0f64..5.0) {
        let p = make_example_u1().unwrap();
        let ms = find_global_minima(&p, &[x], &MinimaOptions::default()).unwrap();
        prop_assert_eq!(ms.count(), 2);
        let (a, b) = (ms.minima[0].y[0], ms.minima[1].y[0]);
        prop_assert!((a + b).abs() < 1e-9);
        prop_assert!((ms.minima[0].hess_det - ms.minima[1].hess_det).abs() < 1e-8);
    }

    #[test]
    fn filippov_set_contains_the_field(x in -2.0f64..2.0) {
        prop_assume!(x.abs() > 0.05);
        let p = make_example_u1().unwrap();
        let b = build_drift("cos_y_damped", &Params::new()).unwrap();
        let f = AveragedField::new(p, b, FieldMode::Laplace).unwrap();
        let set = filippov_enlargement(&f, &[x], &FilippovProbe::default()).unwrap();
        let h = f.eval(&[x]).unwrap();
        prop_assert!(set.distance(&h) < 1e-9);
    }

    #[test]
    fn gibbs_grid_is_normalised(s in 0.2f64..2.0) {
        let p = make_quadratic_bowl(1).unwrap();
        let g = invariant_density_grid(&p, &[0.0], s, &GridSpec::auto(&p, &[0.0], s).unwrap()).unwrap();
        prop_assert!((g.expectation(|_| 1.0) - 1.0).abs() < 1e-12);
        prop_assert!((g.expectation(|y| y[0] * y[0]) - s * s / 2.0).abs() < 1e-4 * s * s);
        prop_assert!(g.tail_bound >= 0.0 && g.tail_bound < 1e-8);
    }

    #[test]
    fn simulation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let p = make_example_u1().unwrap();
        let b = build_drift("cos_y", &Params::new()).unwrap();
        let sch = NoiseSchedule::new(0.25, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.05, 0.1, vec![0.0], vec![0.0], sch);
        cfg.seed = seed;
        let a = simulate_coupled(&p, &b, &cfg).unwrap();
        let again = simulate_coupled(&p, &b, &cfg).unwrap();
        prop_assert_eq!(&a.xs, &again.xs);
        prop_assert_eq!(&a.ys, &again.ys);
        cfg.seed = seed.wrapping_add(1);
        let other = simulate_coupled(&p, &b, &cfg).unwrap();
        prop_assert_ne!(&a.xs, &other.xs);
    }

    #[test]
    fn slow_increments_have_bounded_drift_part(seed in any::<u64>()) {
        // |X_{k+1} - X_k - eps^alpha dW_k| <= sup|b| dt
        let p = make_example_u1().unwrap();
        let b = build_drift("cos_y", &Params::new()).unwrap();
        let sch = NoiseSchedule::new(0.25, 1.0).unwrap();
        let mut cfg = SimConfig::new(0.05, 0.1, vec![0.0], vec![0.0], sch);
        cfg.seed = seed;
        let mut xi_log = Vec::new();
        let tr = slowfast::sde::simulate_coupled_with(&p, &b, &cfg, |_, xi: &mut [f64], zeta: &mut [f64]| {
            let mut r = rng::stream(seed, xi_log.len() as u64);
            rng::fill_normal(&mut r, xi);
            rng::fill_normal(&mut r, zeta);
            xi_log.push(xi[0]);
        }).unwrap();
        let (dt, _) = cfg.grid().unwrap();
        for k in 0..tr.len() - 1 {
            let noise = sch.slow_noise(0.05) * dt.sqrt() * xi_log[k];
            prop_assert!((tr.x(k + 1)[0] - tr.x(k)[0] - noise).abs() <= b.bound() * dt + 1e-12);
        }
    }
}
