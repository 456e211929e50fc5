use std::fmt;
use std::sync::Arc;

use super::{param_f64, reject_unknown, Params};
use crate::{Error, Result};

pub const BUILTIN_DRIFTS: &[&str] = &[
    "cos_y",
    "cos_y_damped",
    "sin_y",
    "sin_y_damped",
    "constant",
    "zero",
    "linear_y",
    "clipped_xy",
];

/// Slow drift `b(x, y)`.
pub trait Drift: Send + Sync {
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]);
}

/// Shareable drift with its declared sup-norm and x-Lipschitz constant.
#[derive(Clone)]
pub struct DriftSpec {
    name: String,
    inner: Arc<dyn Drift>,
    bound: f64,
    lipschitz_x: Option<f64>,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("lipschitz_x", &self.lipschitz_x)
            .finish()
    }
}

impl DriftSpec {
    pub fn new(
        name: impl Into<String>,
        drift: impl Drift + 'static,
        bound: f64,
        lipschitz_x: Option<f64>,
    ) -> Result<Self> {
        if bound.is_nan() || bound < 0.0 {
            return Err(Error::InvalidModel("drift bound must be nonnegative".into()));
        }
        Ok(Self { name: name.into(), inner: Arc::new(drift), bound, lipschitz_x })
    }

    pub fn from_fn<F>(
        name: impl Into<String>,
        slow_dim: usize,
        fast_dim: usize,
        bound: f64,
        lipschitz_x: Option<f64>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(name, FnDrift { slow_dim, fast_dim, f }, bound, lipschitz_x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared `sup |b|`; infinite for unbounded test drifts.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz_x(&self) -> Option<f64> {
        self.lipschitz_x
    }

    pub fn slow_dim(&self) -> usize {
        self.inner.slow_dim()
    }

    pub fn fast_dim(&self) -> usize {
        self.inner.fast_dim()
    }

    pub fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.inner.eval_into(x, y, out)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.slow_dim()];
        self.inner.eval_into(x, y, &mut out);
        out
    }
}

struct FnDrift<F> {
    slow_dim: usize,
    fast_dim: usize,
    f: F,
}

impl<F> Drift for FnDrift<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn slow_dim(&self) -> usize {
        self.slow_dim
    }
    fn fast_dim(&self) -> usize {
        self.fast_dim
    }
    fn eval_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.f)(x, y, out)
    }
}

// sup_x |d/dx (1 + x²)^{-1/2}| = 2 / 3^{3/2}
const DAMPING_LIP: f64 = 0.384_900_179_459_750_5;

/// Builds a registered scalar drift (`d = m = 1`, except `constant` and
/// `zero`, which accept `d` and `m`).
pub fn build_drift(name: &str, params: &Params) -> Result<DriftSpec> {
    match name {
        "cos_y" => {
            reject_unknown(params, &[], name)?;
            DriftSpec::from_fn(name, 1, 1, 1.0, Some(0.0), |_, y, out| out[0] = y[0].cos())
        }
        "cos_y_damped" => {
            reject_unknown(params, &[], name)?;
            DriftSpec::from_fn(name, 1, 1, 1.0, Some(DAMPING_LIP), |x, y, out| {
                out[0] = y[0].cos() / (1.0 + x[0] * x[0]).sqrt()
            })
        }
        "sin_y" => {
            reject_unknown(params, &[], name)?;
            DriftSpec::from_fn(name, 1, 1, 1.0, Some(0.0), |_, y, out| out[0] = y[0].sin())
        }
        "sin_y_damped" => {
            reject_unknown(params, &[], name)?;
            DriftSpec::from_fn(name, 1, 1, 1.0, Some(DAMPING_LIP), |x, y, out| {
                out[0] = y[0].sin() / (1.0 + x[0] * x[0]).sqrt()
            })
        }
        "constant" => {
            reject_unknown(params, &["c", "d", "m"], name)?;
            let c = param_f64(params, "c", 1.0)?;
            let (d, m) = dims(params)?;
            DriftSpec::from_fn(name, d, m, c.abs() * (d as f64).sqrt(), Some(0.0), move |_, _, out| {
                out.fill(c)
            })
        }
        "zero" => {
            reject_unknown(params, &["d", "m"], name)?;
            let (d, m) = dims(params)?;
            DriftSpec::from_fn(name, d, m, 0.0, Some(0.0), |_, _, out| out.fill(0.0))
        }
        "linear_y" => {
            reject_unknown(params, &[], name)?;
            DriftSpec::from_fn(name, 1, 1, f64::INFINITY, Some(0.0), |_, y, out| out[0] = y[0])
        }
        "clipped_xy" => {
            reject_unknown(params, &["clip"], name)?;
            let clip = param_f64(params, "clip", 2.0)?;
            if !(clip > 0.0) {
                return Err(Error::Config("clipped_xy: clip must be positive".into()));
            }
            DriftSpec::from_fn(name, 1, 1, clip, None, move |x, y, out| {
                out[0] = (x[0] * y[0]).clamp(-clip, clip)
            })
        }
        other => Err(Error::Config(format!(
            "unknown drift `{other}`; available: {}",
            BUILTIN_DRIFTS.join(", ")
        ))),
    }
}

fn dims(params: &Params) -> Result<(usize, usize)> {
    let d = param_f64(params, "d", 1.0)?;
    let m = param_f64(params, "m", 1.0)?;
    for v in [d, m] {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Config("drift dimensions must be positive integers".into()));
        }
    }
    Ok((d as usize, m as usize))
}
