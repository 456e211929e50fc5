use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{param_f64, param_text, reject_unknown, AssumptionConstants, Params, Potential, PotentialSpec};
use crate::{Error, Result};

pub const BUILTIN_POTENTIALS: &[&str] = &[
    "example_2_1",
    "example_2_2",
    "example_2_3",
    "quadratic_bowl",
    "asymmetric_two_well",
    "triple_well",
];

/// Builds a registered potential from its name and parameter map.
pub fn build_potential(name: &str, params: &Params) -> Result<PotentialSpec> {
    match name {
        "example_2_1" | "u1" => {
            reject_unknown(params, &[], name)?;
            make_example_u1()
        }
        "example_2_2" | "u2" => {
            reject_unknown(params, &[], name)?;
            make_example_u2()
        }
        "example_2_3" | "u3" => {
            reject_unknown(params, &["phi"], name)?;
            let phi = match param_text(params, "phi", "tanh_half")? {
                "tanh_half" => Phi::TanhHalf,
                "rational" => Phi::Rational,
                "zero" => Phi::Zero,
                other => {
                    return Err(Error::Config(format!(
                        "unknown phi `{other}` (expected tanh_half, rational or zero)"
                    )))
                }
            };
            make_example_u3(phi)
        }
        "quadratic_bowl" | "bowl" => {
            reject_unknown(params, &["m"], name)?;
            let m = param_f64(params, "m", 1.0)?;
            if m < 1.0 || m.fract() != 0.0 || m > 3.0 {
                return Err(Error::Config("quadratic_bowl: m must be 1, 2 or 3".into()));
            }
            make_quadratic_bowl(m as usize)
        }
        "asymmetric_two_well" => {
            reject_unknown(params, &[], name)?;
            make_asymmetric_two_well()
        }
        "triple_well" => {
            reject_unknown(params, &[], name)?;
            make_triple_well()
        }
        other => Err(Error::Config(format!(
            "unknown model `{other}`; available: {}",
            BUILTIN_POTENTIALS.join(", ")
        ))),
    }
}

/// Quintic smoothstep `6t⁵ - 15t⁴ + 10t³` on `t = (r - 10) / 10`, clamped to
/// `[0, 1]`. Returns `(rho, rho', rho'')` in `r`.
pub fn smoothstep_blend(r: f64) -> (f64, f64, f64) {
    if r <= BLEND_INNER {
        return (0.0, 0.0, 0.0);
    }
    if r >= BLEND_OUTER {
        return (1.0, 0.0, 0.0);
    }
    let w = BLEND_OUTER - BLEND_INNER;
    let t = (r - BLEND_INNER) / w;
    let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    let ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
    let dds = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
    (s, ds / w, dds / (w * w))
}

const BLEND_INNER: f64 = 10.0;
const BLEND_OUTER: f64 = 20.0;

/// Depth profile `c(x)` of the inner quartic `y⁴ - 2 c(x) y² + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Depth {
    /// `(1/2 + x²) / (1 + x²)`: two wells for every `x`.
    Persistent,
    /// `x² / (1 + x²)`: the wells merge at `x = 0`.
    Merging,
}

impl Depth {
    fn c(self, x: f64) -> f64 {
        match self {
            Depth::Persistent => (0.5 + x * x) / (1.0 + x * x),
            Depth::Merging => x * x / (1.0 + x * x),
        }
    }
}

/// Slope of the one-sided perturbation in the third example.
#[derive(Clone)]
pub enum Phi {
    /// `tanh(x) / 2`: smooth, strictly increasing, bounded below by `-1/2`.
    TanhHalf,
    /// `x / (1 + x²)`; only monotone on `[-1, 1]`.
    Rational,
    Zero,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::TanhHalf => f.write_str("TanhHalf"),
            Phi::Rational => f.write_str("Rational"),
            Phi::Zero => f.write_str("Zero"),
            Phi::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phi::TanhHalf => 0.5 * x.tanh(),
            Phi::Rational => x / (1.0 + x * x),
            Phi::Zero => 0.0,
            Phi::Custom(f) => f(x),
        }
    }
}

/// `y⁴ - 2 c(x) y² + 1` for `|y| <= 10`, `y⁴ - 2y² + 1` for `|y| >= 20`,
/// blended in between, plus an optional `phi(x) y⁴ 1{y >= 0}` term.
#[derive(Clone, Debug)]
pub struct QuarticBlend {
    depth: Depth,
    phi: Option<Phi>,
}

impl QuarticBlend {
    pub fn new(depth: Depth, phi: Option<Phi>) -> Self {
        Self { depth, phi }
    }

    fn phi_at(&self, x: f64) -> f64 {
        self.phi.as_ref().map_or(0.0, |p| p.eval(x))
    }
}

impl Potential for QuarticBlend {
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let (x, y) = (x[0], y[0]);
        let c = self.depth.c(x);
        let (rho, _, _) = smoothstep_blend(y.abs());
        let y2 = y * y;
        let mut u = y2 * y2 - 2.0 * y2 + 1.0 + 2.0 * (1.0 - c) * y2 * (1.0 - rho);
        if y >= 0.0 {
            u += self.phi_at(x) * y2 * y2;
        }
        u
    }

    fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (x, y) = (x[0], y[0]);
        let c = self.depth.c(x);
        let (rho, drho, _) = smoothstep_blend(y.abs());
        let q = 1.0 - rho;
        let dq = -drho * y.signum();
        let mut g = 4.0 * y * y * y - 4.0 * y + 2.0 * (1.0 - c) * (2.0 * y * q + y * y * dq);
        if y >= 0.0 {
            g += 4.0 * self.phi_at(x) * y * y * y;
        }
        out[0] = g;
    }

    fn hess_y(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (x, y) = (x[0], y[0]);
        let c = self.depth.c(x);
        let (rho, drho, ddrho) = smoothstep_blend(y.abs());
        let q = 1.0 - rho;
        let dq = -drho * y.signum();
        let ddq = -ddrho;
        let mut h = 12.0 * y * y - 4.0 + 2.0 * (1.0 - c) * (2.0 * q + 4.0 * y * dq + y * y * ddq);
        if y >= 0.0 {
            h += 12.0 * self.phi_at(x) * y * y;
        }
        DMatrix::from_element(1, 1, h)
    }
}

fn quartic_constants(gamma: f64, lambda: f64) -> AssumptionConstants {
    // Inside |y| <= 20 the quartic is bounded by 20⁴; the x-derivative of the
    // gradient is 4|y| |c'(x)| <= 80 * 0.325 there and vanishes outside.
    AssumptionConstants {
        K1: 0.0,
        K2: 26.0,
        K3: 1.0,
        M: 160_001.0,
        R: 20.0,
        R_prime: 20.0,
        K4: 1.0,
        eta: 2.0,
        Gamma: gamma,
        Lambda: lambda,
    }
}

/// First example: two symmetric wells `±sqrt((1/2 + x²)/(1 + x²))` for all `x`.
pub fn make_example_u1() -> Result<PotentialSpec> {
    PotentialSpec::new(
        "example_2_1",
        QuarticBlend::new(Depth::Persistent, None),
        Some(quartic_constants(4.0, 4.0)),
    )
}

/// Second example: wells `±x/sqrt(1 + x²)` that merge at `x = 0`.
pub fn make_example_u2() -> Result<PotentialSpec> {
    PotentialSpec::new(
        "example_2_2",
        QuarticBlend::new(Depth::Merging, None),
        Some(quartic_constants(4.0, 4.0)),
    )
}

/// Third example: the first potential tilted by `phi(x) y⁴` on `y >= 0`, so a
/// second global minimum only exists at `x = 0`.
pub fn make_example_u3(phi: Phi) -> Result<PotentialSpec> {
    let p0 = phi.eval(0.0);
    if p0.abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("phi(0) must vanish, got {p0}")));
    }
    for k in 0..=10_000 {
        let x = -50.0 + 0.01 * k as f64;
        let v = phi.eval(x);
        if !(v >= -0.5) {
            return Err(Error::InvalidModel(format!("phi({x}) = {v} violates phi >= -1/2")));
        }
    }
    PotentialSpec::new(
        "example_2_3",
        QuarticBlend::new(Depth::Persistent, Some(phi)),
        Some(quartic_constants(4.0, 1.0)),
    )
}

/// `|y|² / 2`, independent of `x`.
#[derive(Clone, Debug)]
pub struct QuadraticBowl {
    pub m: usize,
}

impl Potential for QuadraticBowl {
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        self.m
    }
    fn value(&self, _x: &[f64], y: &[f64]) -> f64 {
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad_y_into(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
    fn hess_y(&self, _x: &[f64], _y: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.m, self.m)
    }
}

pub fn make_quadratic_bowl(m: usize) -> Result<PotentialSpec> {
    if m == 0 {
        return Err(Error::InvalidModel("bowl dimension must be positive".into()));
    }
    PotentialSpec::new(
        "quadratic_bowl",
        QuadraticBowl { m },
        Some(AssumptionConstants {
            K1: 0.0,
            K2: 0.0,
            K3: 1.0,
            M: 1.0,
            R: 1.0,
            R_prime: 1.0,
            K4: 0.5,
            eta: 2.0,
            Gamma: 0.0,
            Lambda: 0.0,
        }),
    )
}

/// `(y² - 1)² g(y)` with `g(±1)` chosen so the Hessians at the equal-depth
/// minima `±1` are 4 and 1 respectively.
#[derive(Clone, Debug)]
struct AsymmetricTwoWell;

const ATW_SLOPE: f64 = 1.0;

impl AsymmetricTwoWell {
    fn g(y: f64) -> (f64, f64, f64) {
        let tk = ATW_SLOPE.tanh();
        let th = (ATW_SLOPE * y).tanh();
        let sech2 = 1.0 - th * th;
        let a = 3.0 / 16.0 / tk;
        (
            5.0 / 16.0 + a * th,
            a * ATW_SLOPE * sech2,
            a * ATW_SLOPE * ATW_SLOPE * (-2.0 * th * sech2),
        )
    }
}

impl Potential for AsymmetricTwoWell {
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn value(&self, _x: &[f64], y: &[f64]) -> f64 {
        let y = y[0];
        let p = (y * y - 1.0).powi(2);
        p * Self::g(y).0
    }
    fn grad_y_into(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        let y = y[0];
        let p = (y * y - 1.0).powi(2);
        let dp = 4.0 * y * (y * y - 1.0);
        let (g, dg, _) = Self::g(y);
        out[0] = dp * g + p * dg;
    }
    fn hess_y(&self, _x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let y = y[0];
        let p = (y * y - 1.0).powi(2);
        let dp = 4.0 * y * (y * y - 1.0);
        let ddp = 12.0 * y * y - 4.0;
        let (g, dg, ddg) = Self::g(y);
        DMatrix::from_element(1, 1, ddp * g + 2.0 * dp * dg + p * ddg)
    }
}

pub fn make_asymmetric_two_well() -> Result<PotentialSpec> {
    PotentialSpec::new(
        "asymmetric_two_well",
        AsymmetricTwoWell,
        Some(AssumptionConstants {
            K1: 0.0,
            K2: 0.0,
            K3: 0.1,
            M: 4.0,
            R: 2.0,
            R_prime: 3.0,
            K4: 0.1,
            eta: 2.0,
            Gamma: 2.0,
            Lambda: 2.0,
        }),
    )
}

/// `y² (y² - 1)²`: three equal-depth minima at `-1, 0, 1`.
#[derive(Clone, Debug)]
struct TripleWell;

impl Potential for TripleWell {
    fn slow_dim(&self) -> usize {
        1
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn value(&self, _x: &[f64], y: &[f64]) -> f64 {
        let q = y[0] * y[0] * y[0] - y[0];
        q * q
    }
    fn grad_y_into(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        let y = y[0];
        out[0] = 2.0 * (y * y * y - y) * (3.0 * y * y - 1.0);
    }
    fn hess_y(&self, _x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let y = y[0];
        let a = 3.0 * y * y - 1.0;
        DMatrix::from_element(1, 1, 2.0 * a * a + 12.0 * y * (y * y * y - y))
    }
}

pub fn make_triple_well() -> Result<PotentialSpec> {
    PotentialSpec::new(
        "triple_well",
        TripleWell,
        Some(AssumptionConstants {
            K1: 0.0,
            K2: 0.0,
            K3: 1.0,
            M: 5.0,
            R: 1.5,
            R_prime: 1.5,
            K4: 1.0,
            eta: 2.0,
            Gamma: 2.0,
            Lambda: 1.0,
        }),
    )
}
