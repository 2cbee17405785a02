//! Pathwise derivative operators applied to the call payoff, and their
//! conditional-expectation estimators.
//!
//! Two directions matter for the hedge: the derivative along the first
//! (shifted) Brownian motion, and the add-one-jump difference operator
//! along the first Poisson stream. Closed forms exist when the price loads
//! on only one noise source; mixed configurations fall back to a pathwise
//! bump for the Brownian direction, while the jump direction is always the
//! exact path-shift difference.

use serde::Serialize;

use crate::coeffs::ModelSpec;
use crate::error::{Error, Result};
use crate::measure::GirsanovShift;
use crate::report::MCReport;
use crate::rng::{mix_seed, substream, tags};
use crate::simulate::{
    evolve, evolve_tail_into, fill_tail_noise, terminal_with_inserted_jump, MarketPath,
    MeasureTag, NoiseNeeds, TailNoise, TailPath,
};

/// Step size for numerical Brownian bumps.
pub const BUMP_EPS: f64 = 1e-5;

/// Call payoff (s - strike)^+.
#[inline]
pub fn call_payoff(s: f64, strike: f64) -> f64 {
    (s - strike).max(0.0)
}

/// True when the price loads on the Brownian pair only
/// (a1 = a2 = 1, a3 = a4 = 0 on every step).
pub fn is_brownian_case(spec: &ModelSpec) -> bool {
    (0..spec.grid.n_steps).all(|k| {
        spec.a1.at_step(k) == 1.0
            && spec.a2.at_step(k) == 1.0
            && spec.a3.at_step(k) == 0.0
            && spec.a4.at_step(k) == 0.0
    })
}

/// True when the price loads on the Poisson pair only
/// (a3 = a4 = 1, a1 = a2 = 0 on every step).
pub fn is_poisson_case(spec: &ModelSpec) -> bool {
    (0..spec.grid.n_steps).all(|k| {
        spec.a3.at_step(k) == 1.0
            && spec.a4.at_step(k) == 1.0
            && spec.a1.at_step(k) == 0.0
            && spec.a2.at_step(k) == 0.0
    })
}

/// Derivative direction selector for the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeDirection {
    /// Sensitivity to the first (shifted) Brownian increment.
    Brownian1,
    /// Add-one-jump difference on the first Poisson stream.
    Poisson1,
}

/// How a derivative is evaluated for a given model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    ClosedFormBrownian,
    PoissonShift,
    NumericalBump,
}

pub fn estimator_mode(spec: &ModelSpec, dir: DerivativeDirection) -> DerivativeMode {
    match dir {
        DerivativeDirection::Brownian1 => {
            if is_brownian_case(spec) {
                DerivativeMode::ClosedFormBrownian
            } else {
                DerivativeMode::NumericalBump
            }
        }
        DerivativeDirection::Poisson1 => DerivativeMode::PoissonShift,
    }
}

/// Both pathwise derivatives of the call payoff at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeSlice {
    pub t_index: usize,
    pub dw_payoff: f64,
    pub dn_payoff: f64,
}

fn require_brownian_case(spec: &ModelSpec) -> Result<()> {
    if is_brownian_case(spec) {
        Ok(())
    } else {
        Err(Error::Config(
            "closed-form Brownian derivatives need a1 = a2 = 1 and a3 = a4 = 0".into(),
        ))
    }
}

fn require_poisson_case(spec: &ModelSpec) -> Result<()> {
    if is_poisson_case(spec) {
        Ok(())
    } else {
        Err(Error::Config(
            "the jump-shift payoff operator needs a3 = a4 = 1 and a1 = a2 = 0".into(),
        ))
    }
}

/// Exponential decay factor across step k of the factor's derivative under
/// the entropy-minimizing measure: the drift feeds back through
/// `1/sigma(t, y)`, whose y-derivative carries a `dsigma_dy` factor.
fn feedback_coefficient(spec: &ModelSpec, k: usize, y: f64) -> f64 {
    let t = spec.grid.time(k);
    let sigma = spec.vol.sigma(t, y);
    let gap = spec.r.at_step(k) - spec.mu.at_step(k);
    spec.sigma1_y.at_step(k) * gap * spec.vol.dsigma_dy(t, y) / (sigma * sigma)
}

/// Closed-form derivative of the factor at step `s_index` with respect to
/// the first Brownian increment at step `t_index`, in the Brownian-only
/// configuration under the entropy-minimizing measure:
/// `sigma1_y(t) * exp(-integral of the drift feedback from t to s)`,
/// with the integral evaluated by left-endpoint rectangles along the path.
pub fn brownian_derivative_y(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
    s_index: usize,
) -> Result<f64> {
    require_brownian_case(spec)?;
    if !shift.is_emm() {
        return Err(Error::Config(
            "the factor derivative is taken under a martingale measure".into(),
        ));
    }
    if t_index > s_index || s_index > spec.grid.n_steps {
        return Err(Error::Config(format!(
            "need t_index <= s_index <= n_steps, got {t_index} > {s_index}"
        )));
    }
    let dt = spec.grid.dt();
    let mut exponent = 0.0;
    for k in t_index..s_index {
        exponent += feedback_coefficient(spec, k, path.y[k]) * dt;
    }
    Ok(spec.sigma1_y.at_step(t_index.min(spec.grid.n_steps - 1)) * (-exponent).exp())
}

/// Payoff derivative along the first Brownian direction evaluated on path
/// data from `t_index` to maturity. `y` holds factor values from t_index
/// (length m + 1), `dw1` the shifted-Brownian increments (length m).
fn payoff_derivative_on_slices(
    spec: &ModelSpec,
    t_index: usize,
    y: &[f64],
    dw1: &[f64],
    s_terminal: f64,
) -> f64 {
    if s_terminal <= spec.strike {
        return 0.0;
    }
    let grid = &spec.grid;
    let dt = grid.dt();
    let m = dw1.len();
    let t = grid.time(t_index);
    let sigma_t = spec.vol.sigma(t, y[0]);
    let mut dy = spec.sigma1_y.at_step(t_index);
    let mut acc = sigma_t;
    for j in 1..m {
        let k = t_index + j;
        dy *= (-feedback_coefficient(spec, k - 1, y[j - 1]) * dt).exp();
        let tk = grid.time(k);
        let sig = spec.vol.sigma(tk, y[j]);
        let dsig = spec.vol.dsigma_dy(tk, y[j]);
        acc += dsig * dy * dw1[j] - sig * dsig * dy * dt;
    }
    s_terminal * acc
}

/// Pathwise derivative of the call payoff with respect to the first
/// Brownian increment at `t_index`, Brownian-only configuration:
/// `1_{S_T > K} S_T (sigma(t, Y_t)
///   + int_t^T dsigma_dy D_t Y dW1 - int_t^T sigma dsigma_dy D_t Y ds)`.
/// The integrals use predictable left-endpoint evaluation; their integrand
/// vanishes at the bump step itself, whose contribution is the explicit
/// `sigma(t, Y_t)` term.
pub fn brownian_derivative_payoff(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
) -> Result<f64> {
    require_brownian_case(spec)?;
    if !shift.is_emm() {
        return Err(Error::Config(
            "the payoff derivative is taken under a martingale measure".into(),
        ));
    }
    if t_index >= spec.grid.n_steps {
        return Err(Error::Config(format!(
            "t_index {t_index} is not a step index"
        )));
    }
    Ok(payoff_derivative_on_slices(
        spec,
        t_index,
        &path.y[t_index..],
        &path.noise.dw1[t_index..],
        path.terminal(),
    ))
}

/// Re-evolves the measure option matching how a path was simulated.
fn measure_of<'a>(path: &MarketPath, shift: &'a GirsanovShift) -> Option<&'a GirsanovShift> {
    match path.measure {
        MeasureTag::P => None,
        MeasureTag::QBeta => Some(shift),
    }
}

/// Terminal price of the path with one extra first-stream jump inserted at
/// `t_index`, per the add-one-jump operator: subsequent factor values shift
/// by `sigma1_y(t) * a3(t)` and the price is re-evolved with the extra
/// count, so the inserted jump contributes `1 + a3 sigma(t, Y_t + shift)`.
pub fn poisson_shifted_terminal(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
) -> Result<f64> {
    require_poisson_case(spec)?;
    shifted_terminal_any(spec, measure_of(path, shift), path, t_index)
}

pub(crate) fn shifted_terminal_any(
    spec: &ModelSpec,
    shift: Option<&GirsanovShift>,
    path: &MarketPath,
    t_index: usize,
) -> Result<f64> {
    if t_index >= spec.grid.n_steps {
        return Err(Error::Config(format!(
            "t_index {t_index} is not a step index"
        )));
    }
    terminal_with_inserted_jump(
        spec,
        shift,
        t_index,
        path.s[t_index],
        &path.y[t_index..],
        &path.noise.dw1[t_index..],
        &path.dn1[t_index..],
    )
}

/// Difference of an arbitrary terminal functional between the jump-shifted
/// and the original path. Exactly zero for functionals that ignore the
/// first Poisson stream.
pub fn poisson_shift_functional<F: Fn(f64) -> f64>(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
    f: F,
) -> Result<f64> {
    require_poisson_case(spec)?;
    let shifted = shifted_terminal_any(spec, measure_of(path, shift), path, t_index)?;
    Ok(f(shifted) - f(path.terminal()))
}

/// Add-one-jump operator applied to the call payoff in the Poisson-only
/// configuration: `(S_T(shifted) - K)^+ - (S_T - K)^+`.
pub fn poisson_shift_payoff(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
) -> Result<f64> {
    poisson_shift_functional(spec, shift, path, t_index, |s| call_payoff(s, spec.strike))
}

/// Both pathwise payoff derivatives at one time, each through the method
/// the configuration admits.
pub fn derivative_slice(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
) -> Result<DerivativeSlice> {
    let dw_payoff = if is_brownian_case(spec) {
        brownian_derivative_payoff(spec, shift, path, t_index)?
    } else {
        let sh = measure_of(path, shift);
        let mut up = path.noise.clone();
        up.dw1[t_index] += BUMP_EPS;
        let mut down = path.noise.clone();
        down.dw1[t_index] -= BUMP_EPS;
        let hi = evolve(spec, &up, sh)?.terminal();
        let lo = evolve(spec, &down, sh)?.terminal();
        (call_payoff(hi, spec.strike) - call_payoff(lo, spec.strike)) / (2.0 * BUMP_EPS)
    };
    let shifted = shifted_terminal_any(spec, measure_of(path, shift), path, t_index)?;
    let dn_payoff = call_payoff(shifted, spec.strike) - call_payoff(path.terminal(), spec.strike);
    Ok(DerivativeSlice {
        t_index,
        dw_payoff,
        dn_payoff,
    })
}

/// Estimator sizes and seeding for conditional expectations.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    pub n_inner: usize,
    pub seed: u64,
}

/// Nested Monte Carlo estimate of `E[D_t f(S_T) | F_t]` along the requested
/// direction: launches fresh sub-paths from the path's state at `t_index`
/// under the shifted measure and averages the pathwise derivative. At
/// t_index = 0 this is the plain unconditional estimator.
///
/// Inner streams are keyed by (seed, direction, t_index, inner index), so
/// nested use inside parallel outer loops stays reproducible.
pub fn cond_expect_derivative(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
    dir: DerivativeDirection,
    cfg: EstimatorConfig,
) -> Result<MCReport> {
    if cfg.n_inner == 0 {
        return Err(Error::Config("n_inner must be positive".into()));
    }
    let n = spec.grid.n_steps;
    if t_index >= n {
        return Err(Error::Config(format!(
            "t_index {t_index} is not a step index"
        )));
    }
    if !shift.is_emm() {
        return Err(Error::Config(
            "conditional expectations are taken under a martingale measure".into(),
        ));
    }
    let m = n - t_index;
    let dt = spec.grid.dt();
    let (s_t, y_t) = (path.s[t_index], path.y[t_index]);
    let dir_tag = match dir {
        DerivativeDirection::Brownian1 => tags::INNER_BROWNIAN,
        DerivativeDirection::Poisson1 => tags::INNER_POISSON,
    };
    let closed_brownian = is_brownian_case(spec);
    let mut needs = NoiseNeeds::of(spec, t_index);
    if dir == DerivativeDirection::Brownian1 && !closed_brownian {
        // the bump lands on dw1 even when no step consumes it
        needs.w1 = true;
    }
    let mut noise = TailNoise::default();
    let mut tail = TailPath::default();
    let mut values = Vec::with_capacity(cfg.n_inner);
    for j in 0..cfg.n_inner {
        let mut rng = substream(mix_seed(cfg.seed, &[dir_tag, t_index as u64, j as u64]));
        fill_tail_noise(&mut rng, m, dt, needs, &mut noise);
        let value = match dir {
            DerivativeDirection::Brownian1 => {
                if closed_brownian {
                    evolve_tail_into(spec, Some(shift), t_index, s_t, y_t, &noise, &mut tail)?;
                    payoff_derivative_on_slices(spec, t_index, &tail.y, &noise.dw1, tail.s[m])
                } else {
                    let base = noise.dw1[0];
                    noise.dw1[0] = base + BUMP_EPS;
                    evolve_tail_into(spec, Some(shift), t_index, s_t, y_t, &noise, &mut tail)?;
                    let hi = tail.s[m];
                    noise.dw1[0] = base - BUMP_EPS;
                    evolve_tail_into(spec, Some(shift), t_index, s_t, y_t, &noise, &mut tail)?;
                    let lo = tail.s[m];
                    (call_payoff(hi, spec.strike) - call_payoff(lo, spec.strike))
                        / (2.0 * BUMP_EPS)
                }
            }
            DerivativeDirection::Poisson1 => {
                evolve_tail_into(spec, Some(shift), t_index, s_t, y_t, &noise, &mut tail)?;
                let shifted = terminal_with_inserted_jump(
                    spec,
                    Some(shift),
                    t_index,
                    s_t,
                    &tail.y,
                    &noise.dw1,
                    &tail.dn1,
                )?;
                call_payoff(shifted, spec.strike) - call_payoff(tail.s[m], spec.strike)
            }
        };
        values.push(value);
    }
    Ok(MCReport::from_samples(&values, cfg.seed))
}
