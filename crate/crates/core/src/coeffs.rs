//! Deterministic market coefficients on a uniform time grid.
//!
//! Every deterministic input of the model lives here: the grid itself,
//! scalar or piecewise-constant coefficients, the volatility surface
//! sigma(t, y) with its analytic y-derivative, and the static validation
//! of a full model description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of [0, T] into `n_steps` steps of width `dt = T / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Maturity in years.
    pub horizon: f64,
    /// Number of steps; grid points are t_k = k * dt for k = 0..=n_steps.
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Grid point t_k. The last point is the horizon itself.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Index of the step [t_k, t_{k+1}) containing t; t = T maps to the last step.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(((t / self.dt()) as usize).min(self.n_steps - 1))
    }
}

/// A deterministic coefficient: a single constant, or one value per grid
/// step interpreted as piecewise-constant on [t_k, t_{k+1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Steps(Vec<f64>),
}

impl Coefficient {
    /// Value on step k. Panics if an array coefficient is shorter than k;
    /// `validate` rejects such specs before any simulation runs.
    #[inline]
    pub fn at_step(&self, k: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Steps(v) => v[k],
        }
    }

    /// Piecewise-constant evaluation; t = T returns the last step's value.
    pub fn eval(&self, grid: &TimeGrid, t: f64) -> Result<f64> {
        Ok(self.at_step(grid.step_of(t)?))
    }

    fn len_matches(&self, n_steps: usize) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Steps(v) => v.len() == n_steps,
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Coefficient::Constant(c) => c.is_finite(),
            Coefficient::Steps(v) => v.iter().all(|c| c.is_finite()),
        }
    }
}

/// Volatility surface with analytic y-derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityFunction {
    /// sigma(t, y) = value, flat in both arguments.
    Constant { value: f64 },
    /// sigma(t, y) = sigma_min + (sigma_max - sigma_min) / (1 + exp(-y)).
    /// Output stays inside (sigma_min, sigma_max), so the surface never
    /// vanishes when 0 < sigma_min.
    BoundedSigmoid { sigma_min: f64, sigma_max: f64 },
}

impl VolatilityFunction {
    #[inline]
    pub fn sigma(&self, _t: f64, y: f64) -> f64 {
        match *self {
            VolatilityFunction::Constant { value } => value,
            VolatilityFunction::BoundedSigmoid {
                sigma_min,
                sigma_max,
            } => sigma_min + (sigma_max - sigma_min) * logistic(y),
        }
    }

    #[inline]
    pub fn dsigma_dy(&self, _t: f64, y: f64) -> f64 {
        match *self {
            VolatilityFunction::Constant { .. } => 0.0,
            VolatilityFunction::BoundedSigmoid {
                sigma_min,
                sigma_max,
            } => {
                let s = logistic(y);
                (sigma_max - sigma_min) * s * (1.0 - s)
            }
        }
    }
}

/// Overflow-safe logistic.
#[inline]
fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Full static description of the market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub grid: TimeGrid,
    /// Initial asset price, positive.
    pub s0: f64,
    /// Initial value of the volatility factor.
    pub y0: f64,
    /// Call strike, positive.
    pub strike: f64,
    /// Asset drift under the historical measure.
    pub mu: Coefficient,
    /// Riskless rate.
    pub r: Coefficient,
    /// Factor drift.
    pub mu_y: Coefficient,
    /// Intensity of the first Poisson stream, positive.
    pub lambda1: Coefficient,
    /// Intensity of the second Poisson stream, positive.
    pub lambda2: Coefficient,
    /// Brownian loading of the asset and the factor's first Brownian term.
    pub a1: Coefficient,
    /// Factor's second Brownian loading.
    pub a2: Coefficient,
    /// Jump loading of the asset and the factor's first jump term.
    pub a3: Coefficient,
    /// Factor's second jump loading.
    pub a4: Coefficient,
    /// Factor diffusion coefficient on the first noise pair.
    pub sigma1_y: Coefficient,
    /// Factor diffusion coefficient on the second noise pair.
    pub sigma2_y: Coefficient,
    pub vol: VolatilityFunction,
}

/// One broken invariant, with the offending step for per-step checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub message: String,
    pub step: Option<usize>,
}

impl Violation {
    fn global(message: impl Into<String>) -> Self {
        Violation {
            message: message.into(),
            step: None,
        }
    }

    fn at(step: usize, message: impl Into<String>) -> Self {
        Violation {
            message: message.into(),
            step: Some(step),
        }
    }
}

/// Checks every static invariant of a model description and returns the
/// full list of violations; an empty list means the spec is usable.
/// The path-dependent jump-positivity condition is checked during
/// simulation, where the realized factor values are known.
pub fn validate(spec: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.grid.n_steps;

    if !spec.grid.horizon.is_finite() || spec.grid.horizon <= 0.0 {
        out.push(Violation::global("horizon must be positive and finite"));
    }
    if n == 0 {
        out.push(Violation::global("n_steps must be positive"));
    }
    if !(spec.s0 > 0.0) || !spec.s0.is_finite() {
        out.push(Violation::global("initial price s0 must be positive"));
    }
    if !(spec.strike > 0.0) || !spec.strike.is_finite() {
        out.push(Violation::global("strike must be positive"));
    }
    if !spec.y0.is_finite() {
        out.push(Violation::global("initial factor y0 must be finite"));
    }

    match spec.vol {
        VolatilityFunction::Constant { value } => {
            if value == 0.0 || !value.is_finite() {
                out.push(Violation::global("sigma must be nonzero"));
            }
        }
        VolatilityFunction::BoundedSigmoid {
            sigma_min,
            sigma_max,
        } => {
            if !(sigma_min > 0.0 && sigma_min < sigma_max) || !sigma_max.is_finite() {
                out.push(Violation::global(
                    "bounded sigmoid requires 0 < sigma_min < sigma_max",
                ));
            }
        }
    }

    let named: [(&str, &Coefficient); 11] = [
        ("mu", &spec.mu),
        ("r", &spec.r),
        ("mu_y", &spec.mu_y),
        ("lambda1", &spec.lambda1),
        ("lambda2", &spec.lambda2),
        ("a1", &spec.a1),
        ("a2", &spec.a2),
        ("a3", &spec.a3),
        ("a4", &spec.a4),
        ("sigma1_y", &spec.sigma1_y),
        ("sigma2_y", &spec.sigma2_y),
    ];
    let mut lengths_ok = n > 0;
    for (name, c) in named {
        if !c.len_matches(n) {
            out.push(Violation::global(format!(
                "coefficient {name} has the wrong number of steps (expected {n})"
            )));
            lengths_ok = false;
        }
        if !c.all_finite() {
            out.push(Violation::global(format!(
                "coefficient {name} contains a non-finite value"
            )));
            lengths_ok = false;
        }
    }
    if !lengths_ok {
        return out;
    }

    let dt = spec.grid.dt();
    for k in 0..n {
        for (name, c) in [("lambda1", &spec.lambda1), ("lambda2", &spec.lambda2)] {
            let l = c.at_step(k);
            if l <= 0.0 {
                out.push(Violation::at(k, format!("intensity must be positive ({name})")));
            } else if l * dt > 500.0 {
                out.push(Violation::at(
                    k,
                    format!("{name} * dt exceeds the sampler range (refine the grid)"),
                ));
            }
        }
        if spec.a1.at_step(k) == 0.0 && spec.a3.at_step(k) == 0.0 {
            out.push(Violation::at(
                k,
                "a1 and a3 cannot both vanish (martingale condition degenerates)",
            ));
        }
    }

    out
}
