//! Sampled (not certified) checks of the growth, convexity, Lipschitz and
//! coercivity conditions on `U` and `b`. Violations are reported with the
//! offending sample, never thrown.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DriftSpec, PotentialSpec};
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    /// Samples with `R < |y| < outer_factor * R` for the convexity check.
    pub n_outer: usize,
    pub outer_factor: f64,
    /// Samples with `|y| <= R` for the growth bound.
    pub n_inner: usize,
    pub n_lipschitz: usize,
    pub n_coercive: usize,
    pub n_rays: usize,
    /// Radii grid `(0, r_max]` with `n_r` points for `g(r)`.
    pub r_max: f64,
    pub n_r: usize,
    pub n_pairs: usize,
    /// Pair midpoints are drawn from `[-pair_box, pair_box]^m`.
    pub pair_box: f64,
}

impl SamplingPlan {
    pub fn new(x_lo: Vec<f64>, x_hi: Vec<f64>) -> Self {
        Self {
            x_lo,
            x_hi,
            n_outer: 10_000,
            outer_factor: 3.0,
            n_inner: 10_000,
            n_lipschitz: 10_000,
            n_coercive: 2_000,
            n_rays: 64,
            r_max: 4.0,
            n_r: 40,
            n_pairs: 250,
            pair_box: 2.0,
        }
    }

    /// Same plan with every sample count doubled.
    pub fn doubled(&self) -> Self {
        Self {
            n_outer: 2 * self.n_outer,
            n_inner: 2 * self.n_inner,
            n_lipschitz: 2 * self.n_lipschitz,
            n_coercive: 2 * self.n_coercive,
            n_rays: 2 * self.n_rays,
            n_pairs: 2 * self.n_pairs,
            ..self.clone()
        }
    }
}

/// Largest observed value of a checked quantity and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub value: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UltracontractivityRow {
    pub s: f64,
    pub lhs_sup: f64,
    pub rhs: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max (K3 |xi|² - <xi, D²U xi>)^+` over sampled `|y| > R`, unit `xi`.
    pub convexity_violation: Option<Observation>,
    /// Largest of `|U|`, `|grad U|`, `|D²U|` inside radius `R`.
    pub inner_bound: Observation,
    pub inner_bound_exceeds_m: Option<bool>,
    pub drift_sup: Observation,
    pub drift_bound_exceeded: bool,
    pub drift_lipschitz: f64,
    pub drift_lipschitz_exceeds_k1: Option<bool>,
    pub grad_lipschitz: f64,
    pub grad_lipschitz_exceeds_k2: Option<bool>,
    /// `min <grad U, y> - K4 |y|²` over sampled `|y| > R'`.
    pub coercivity_margin: Option<Observation>,
    /// `U` strictly increasing across radii `2R', 4R', 8R'` on every ray.
    pub coercivity_probe_ok: bool,
    pub ultracontractivity: Vec<UltracontractivityRow>,
    /// `(r, g(r))`; `g` is reported unclipped.
    pub g_curve: Vec<(f64, f64)>,
    /// Trapezoid integral of `max(g, 0)`.
    pub gamma_hat: f64,
}

pub fn check_assumptions(p: &PotentialSpec, b: &DriftSpec, plan: &SamplingPlan, seed: u64) -> Result<AssumptionReport> {
    let d = p.slow_dim();
    let m = p.fast_dim();
    if b.slow_dim() != d || b.fast_dim() != m {
        return Err(Error::Dimension("drift and potential dimensions differ".into()));
    }
    if plan.x_lo.len() != d || plan.x_hi.len() != d {
        return Err(Error::Dimension("sampling box dimension differs from the slow dimension".into()));
    }
    let declared = p.declared();
    let r_in = declared.map_or(p.coercivity_radius(), |c| c.R);
    let r_prime = p.coercivity_radius();
    let sample_x = |rng: &mut StreamRng| -> Vec<f64> {
        plan.x_lo.iter().zip(&plan.x_hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
    };

    // Convexity outside R.
    let convexity_violation = declared.map(|c| {
        let mut rng = rng::stream(seed, 1);
        let mut worst = Observation { value: 0.0, x: vec![], y: vec![] };
        for _ in 0..plan.n_outer {
            let x = sample_x(&mut rng);
            let r = r_in * (1.0 + (plan.outer_factor - 1.0) * rng.random::<f64>()) + 1e-9;
            let y = scaled(&unit_vector(&mut rng, m), r);
            let xi = unit_vector(&mut rng, m);
            let h = p.hess_y(&x, &y);
            let quad: f64 = (0..m).map(|i| (0..m).map(|j| xi[i] * h[(i, j)] * xi[j]).sum::<f64>()).sum();
            let v = c.K3 - quad;
            if v > worst.value {
                worst = Observation { value: v, x, y };
            }
        }
        worst
    });

    // Growth bound inside R.
    let mut rng = rng::stream(seed, 2);
    let mut inner = Observation { value: 0.0, x: vec![], y: vec![] };
    for _ in 0..plan.n_inner {
        let x = sample_x(&mut rng);
        let r = r_in * rng.random::<f64>().powf(1.0 / m as f64);
        let y = scaled(&unit_vector(&mut rng, m), r);
        let u = p.value(&x, &y).abs();
        let g = norm(&p.grad_y(&x, &y));
        let h = p.hess_y(&x, &y).norm();
        let v = u.max(g).max(h);
        if v > inner.value {
            inner = Observation { value: v, x, y };
        }
    }
    let inner_bound_exceeds_m = declared.map(|c| inner.value > c.M);

    // Drift sup and x-Lipschitz quotients of b and grad U.
    let mut rng = rng::stream(seed, 3);
    let mut drift_sup = Observation { value: 0.0, x: vec![], y: vec![] };
    let mut drift_lip: f64 = 0.0;
    let mut grad_lip: f64 = 0.0;
    let y_box = 2.0 * r_prime;
    for _ in 0..plan.n_lipschitz {
        let x = sample_x(&mut rng);
        let x2 = sample_x(&mut rng);
        let y: Vec<f64> = (0..m).map(|_| y_box * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let bx = b.eval(&x, &y);
        let bn = norm(&bx);
        if bn > drift_sup.value {
            drift_sup = Observation { value: bn, x: x.clone(), y: y.clone() };
        }
        let dx = dist(&x, &x2);
        if dx > 1e-12 {
            drift_lip = drift_lip.max(dist(&bx, &b.eval(&x2, &y)) / dx);
            grad_lip = grad_lip.max(dist(&p.grad_y(&x, &y), &p.grad_y(&x2, &y)) / dx);
        }
    }
    let drift_bound_exceeded = drift_sup.value > b.bound();
    let drift_lipschitz_exceeds_k1 = b.lipschitz_x().map(|k| drift_lip > k * (1.0 + 1e-6));
    let grad_lipschitz_exceeds_k2 = declared.map(|c| grad_lip > c.K2 * (1.0 + 1e-6));

    // Coercivity beyond R'.
    let coercivity_margin = declared.map(|c| {
        let mut rng = rng::stream(seed, 4);
        let mut worst = Observation { value: f64::INFINITY, x: vec![], y: vec![] };
        for _ in 0..plan.n_coercive {
            let x = sample_x(&mut rng);
            let r = c.R_prime * (1.0 + 1e-9 + 7.0 * rng.random::<f64>());
            let y = scaled(&unit_vector(&mut rng, m), r);
            let g = p.grad_y(&x, &y);
            let v = dot(&g, &y) - c.K4 * r * r;
            if v < worst.value {
                worst = Observation { value: v, x, y };
            }
        }
        worst
    });
    let mut rng = rng::stream(seed, 5);
    let coercivity_probe_ok = (0..plan.n_rays).all(|_| {
        let x = sample_x(&mut rng);
        let w = unit_vector(&mut rng, m);
        let vals: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|k| p.value(&x, &scaled(&w, k * r_prime))).collect();
        vals[0] < vals[1] && vals[1] < vals[2]
    });

    // Ultracontractivity inequality at a = 1 and s in {1, 2, 4, 8}.
    let ultracontractivity = {
        let mut rng = rng::stream(seed, 6);
        let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..plan.n_inner)
            .map(|_| {
                let x = sample_x(&mut rng);
                let y: Vec<f64> = (0..m).map(|_| y_box * (2.0 * rng.random::<f64>() - 1.0)).collect();
                (x, y)
            })
            .collect();
        [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&s| {
                let lhs_sup = pts
                    .iter()
                    .map(|(x, y)| {
                        let lap = p.hess_y(x, y).trace();
                        let g2 = p.grad_y(x, y).iter().map(|v| v * v).sum::<f64>();
                        (4.0 * lap - 4.0 * g2) / (4.0 * std::f64::consts::PI * std::f64::consts::E * s) + 2.0 * p.value(x, y)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let rhs = declared.map(|c| c.M * s.powf(c.eta / (c.eta - 1.0)));
                UltracontractivityRow { s, lhs_sup, rhs, holds: rhs.map(|r| lhs_sup <= r) }
            })
            .collect()
    };

    let (g_curve, gamma_hat) = one_sided_lipschitz_defect(p, plan, seed, &sample_x);

    Ok(AssumptionReport {
        convexity_violation,
        inner_bound: inner,
        inner_bound_exceeds_m,
        drift_sup,
        drift_bound_exceeded,
        drift_lipschitz: drift_lip,
        drift_lipschitz_exceeds_k1,
        grad_lipschitz: grad_lip,
        grad_lipschitz_exceeds_k2,
        coercivity_margin,
        coercivity_probe_ok,
        ultracontractivity,
        g_curve,
        gamma_hat,
    })
}

/// `g(r) = sup_{|z - y| = r} -<grad U(z) - grad U(y), z - y> / r` and its
/// integral over the positive part.
fn one_sided_lipschitz_defect(
    p: &PotentialSpec,
    plan: &SamplingPlan,
    seed: u64,
    sample_x: &dyn Fn(&mut StreamRng) -> Vec<f64>,
) -> (Vec<(f64, f64)>, f64) {
    let m = p.fast_dim();
    let mut curve = Vec::with_capacity(plan.n_r);
    for k in 1..=plan.n_r {
        let r = plan.r_max * k as f64 / plan.n_r as f64;
        let mut rng = rng::stream(seed, 100 + k as u64);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..plan.n_pairs {
            let x = sample_x(&mut rng);
            let xi = unit_vector(&mut rng, m);
            let mid: Vec<f64> = (0..m).map(|_| plan.pair_box * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let y: Vec<f64> = mid.iter().zip(&xi).map(|(c, e)| c - 0.5 * r * e).collect();
            let z: Vec<f64> = mid.iter().zip(&xi).map(|(c, e)| c + 0.5 * r * e).collect();
            let gz = p.grad_y(&x, &z);
            let gy = p.grad_y(&x, &y);
            let v = -gz.iter().zip(&gy).zip(&xi).map(|((a, b), e)| (a - b) * e).sum::<f64>();
            best = best.max(v);
        }
        curve.push((r, best));
    }
    let mut gamma = 0.0;
    let mut prev = (0.0, 0.0);
    for &(r, g) in &curve {
        let g = g.max(0.0);
        gamma += 0.5 * (r - prev.0) * (g + prev.1);
        prev = (r, g);
    }
    (curve, gamma)
}

fn unit_vector(rng: &mut StreamRng, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    let mut v = vec![0.0; m];
    loop {
        rng::fill_normal(rng, &mut v);
        let n = norm(&v);
        if n > 1e-12 {
            return v.iter().map(|a| a / n).collect();
        }
    }
}

fn scaled(v: &[f64], r: f64) -> Vec<f64> {
    v.iter().map(|a| a * r).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{build_drift, make_example_u1, make_quadratic_bowl, Params};

    #[test]
    fn u1_is_convex_outside_twenty() {
        let p = make_example_u1().unwrap();
        let b = build_drift("cos_y", &Params::new()).unwrap();
        let rep = check_assumptions(&p, &b, &SamplingPlan::new(vec![-3.0], vec![3.0]), 11).unwrap();
        assert_eq!(rep.convexity_violation.as_ref().unwrap().value, 0.0);
        assert_eq!(rep.inner_bound_exceeds_m, Some(false));
        assert_eq!(rep.grad_lipschitz_exceeds_k2, Some(false));
        assert!(rep.coercivity_margin.as_ref().unwrap().value > 0.0);
        assert!(rep.coercivity_probe_ok);
        assert!(!rep.drift_bound_exceeded);
        assert_eq!(rep.drift_lipschitz_exceeds_k1, Some(false));
        assert!(rep.ultracontractivity.iter().all(|r| r.holds == Some(true)));
    }

    #[test]
    fn bowl_has_no_lipschitz_defect() {
        let p = make_quadratic_bowl(2).unwrap();
        let mut params = Params::new();
        params.insert("m".into(), crate::potential::ParamValue::Number(2.0));
        let b = build_drift("zero", &params).unwrap();
        let rep = check_assumptions(&p, &b, &SamplingPlan::new(vec![-1.0], vec![1.0]), 3).unwrap();
        assert!(rep.g_curve.iter().all(|(_, g)| *g <= 1e-12));
        assert_eq!(rep.gamma_hat, 0.0);
    }
}
