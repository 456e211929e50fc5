//! Potentials `U(x, y)`, slow drifts `b(x, y)`, global-minimum search and
//! sampled audits of the standing assumptions.

mod audit;
mod builtin;
mod drift;
mod minima;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use audit::{check_assumptions, AssumptionReport, SamplingPlan};
pub use builtin::{
    build_potential, make_asymmetric_two_well, make_example_u1, make_example_u2, make_example_u3,
    make_quadratic_bowl, make_triple_well, smoothstep_blend, Phi, QuadraticBowl, QuarticBlend,
    BUILTIN_POTENTIALS,
};
pub use drift::{build_drift, Drift, DriftSpec, BUILTIN_DRIFTS};
pub use minima::{find_global_minima, MinimaOptions, MinimaSet, Minimum, SearchBox};

/// Energy landscape of the fast variable, parametrised by the slow state.
///
/// Implementors provide the value and the analytic `y`-gradient and
/// `y`-Hessian; everything else in the crate is built on these three.
pub trait Potential: Send + Sync {
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn hess_y(&self, x: &[f64], y: &[f64]) -> DMatrix<f64>;
}

/// Analytic metadata a model may declare about itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AssumptionConstants {
    /// x-Lipschitz constant of the drift.
    pub K1: f64,
    /// x-Lipschitz constant of the y-gradient.
    pub K2: f64,
    /// Convexity constant outside radius `R`.
    pub K3: f64,
    /// Bound on `|U|`, `|grad U|`, `|D²U|` inside radius `R`.
    pub M: f64,
    pub R: f64,
    /// Coercivity radius.
    pub R_prime: f64,
    /// Coercivity constant: `<grad U, y> > K4 |y|²` for `|y| > R_prime`.
    pub K4: f64,
    /// Ultracontractivity exponent.
    pub eta: f64,
    /// Integral of the one-sided Lipschitz defect `g(r)`.
    pub Gamma: f64,
    /// `sup_x [V¹(x) - V²(x)]`.
    pub Lambda: f64,
}

impl AssumptionConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.K1, self.K2, self.K3, self.M, self.R, self.R_prime, self.K4, self.eta, self.Gamma,
            self.Lambda,
        ];
        if all.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidModel("assumption constants must be nonnegative".into()));
        }
        if self.eta <= 1.0 {
            return Err(Error::InvalidModel("eta must exceed 1".into()));
        }
        if self.R_prime < self.R {
            return Err(Error::InvalidModel("R_prime must be at least R".into()));
        }
        Ok(())
    }
}

/// Shareable, immutable potential with optional declared constants.
#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    inner: Arc<dyn Potential>,
    declared: Option<AssumptionConstants>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("d", &self.slow_dim())
            .field("m", &self.fast_dim())
            .finish()
    }
}

impl PotentialSpec {
    pub fn new(
        name: impl Into<String>,
        potential: impl Potential + 'static,
        declared: Option<AssumptionConstants>,
    ) -> Result<Self> {
        if let Some(c) = &declared {
            c.validate()?;
        }
        if potential.fast_dim() == 0 || potential.slow_dim() == 0 {
            return Err(Error::InvalidModel("dimensions must be positive".into()));
        }
        Ok(Self { name: name.into(), inner: Arc::new(potential), declared })
    }

    /// Builds a potential from closures for value, gradient and Hessian.
    pub fn from_fns<V, G, H>(
        name: impl Into<String>,
        slow_dim: usize,
        fast_dim: usize,
        value: V,
        grad: G,
        hess: H,
    ) -> Result<Self>
    where
        V: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        H: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::new(name, FnPotential { slow_dim, fast_dim, value, grad, hess }, None)
    }

    pub fn with_declared(mut self, declared: AssumptionConstants) -> Result<Self> {
        declared.validate()?;
        self.declared = Some(declared);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared(&self) -> Option<&AssumptionConstants> {
        self.declared.as_ref()
    }

    pub fn slow_dim(&self) -> usize {
        self.inner.slow_dim()
    }

    pub fn fast_dim(&self) -> usize {
        self.inner.fast_dim()
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.inner.value(x, y)
    }

    pub fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.inner.grad_y_into(x, y, out)
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.fast_dim()];
        self.inner.grad_y_into(x, y, &mut g);
        g
    }

    pub fn hess_y(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        self.inner.hess_y(x, y)
    }

    /// Declared coercivity radius, or a unit fallback for undeclared models.
    pub fn coercivity_radius(&self) -> f64 {
        self.declared.as_ref().map_or(5.0, |c| c.R_prime.max(c.R))
    }
}

struct FnPotential<V, G, H> {
    slow_dim: usize,
    fast_dim: usize,
    value: V,
    grad: G,
    hess: H,
}

impl<V, G, H> Potential for FnPotential<V, G, H>
where
    V: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
    H: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn slow_dim(&self) -> usize {
        self.slow_dim
    }
    fn fast_dim(&self) -> usize {
        self.fast_dim
    }
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.value)(x, y)
    }
    fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.grad)(x, y, out)
    }
    fn hess_y(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        (self.hess)(x, y)
    }
}

/// Scalar parameter map used by the model and drift registries.
pub type Params = std::collections::BTreeMap<String, ParamValue>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

pub(crate) fn param_f64(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Number(v)) => Ok(*v),
        Some(ParamValue::Text(t)) => {
            Err(Error::Config(format!("parameter `{key}` must be numeric, got \"{t}\"")))
        }
    }
}

pub(crate) fn param_text<'a>(params: &'a Params, key: &str, default: &'a str) -> Result<&'a str> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Text(t)) => Ok(t),
        Some(ParamValue::Number(v)) => {
            Err(Error::Config(format!("parameter `{key}` must be a string, got {v}")))
        }
    }
}

pub(crate) fn reject_unknown(params: &Params, allowed: &[&str], owner: &str) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown parameter `{key}` for {owner}")));
        }
    }
    Ok(())
}
