//! Measure changes: Girsanov shifts, likelihood-ratio densities, the
//! martingale condition, and the entropy-minimizing shift.
//!
//! A shift is an R^4-valued predictable process (two Brownian drifts, two
//! jump-intensity rescalings). The third and fourth components must stay
//! above -1; shifts tagged as martingale measures additionally satisfy the
//! drift condition `mu - r + beta1*a1*sigma + lambda1*beta3*a3*sigma = 0`
//! at every point where they are evaluated.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coeffs::{Coefficient, ModelSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::report::MCReport;
use crate::rng::{mix_seed, tags};
use crate::simulate::{evolve, gen_noise, MarketPath, MeasureTag};

/// Residual tolerance for the entropy-equation root.
pub const ROOT_TOL: f64 = 1e-12;

/// One component of a shift: a deterministic coefficient or a state rule
/// evaluated at the left endpoint of each step.
#[derive(Clone)]
pub enum ShiftComponent {
    Coefficient(Coefficient),
    Rule(Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>),
}

impl ShiftComponent {
    pub fn constant(c: f64) -> Self {
        ShiftComponent::Coefficient(Coefficient::Constant(c))
    }

    fn eval(&self, grid: &TimeGrid, t: f64, y: f64) -> Result<f64> {
        match self {
            ShiftComponent::Coefficient(c) => c.eval(grid, t),
            ShiftComponent::Rule(f) => f(t, y),
        }
    }
}

impl fmt::Debug for ShiftComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftComponent::Coefficient(c) => write!(f, "Coefficient({c:?})"),
            ShiftComponent::Rule(_) => write!(f, "Rule(<state-dependent>)"),
        }
    }
}

/// Predictable R^4-valued process defining a candidate measure.
#[derive(Debug, Clone)]
pub struct GirsanovShift {
    pub beta1: ShiftComponent,
    pub beta2: ShiftComponent,
    pub beta3: ShiftComponent,
    pub beta4: ShiftComponent,
    emm: bool,
}

impl GirsanovShift {
    /// Shift from four constants, not tagged as a martingale measure.
    pub fn constant(b1: f64, b2: f64, b3: f64, b4: f64) -> Self {
        GirsanovShift {
            beta1: ShiftComponent::constant(b1),
            beta2: ShiftComponent::constant(b2),
            beta3: ShiftComponent::constant(b3),
            beta4: ShiftComponent::constant(b4),
            emm: false,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0, 0.0, 0.0)
    }

    /// Marks the shift as satisfying the martingale condition. Simulation
    /// under the shifted measure requires this tag.
    pub fn tagged_emm(mut self) -> Self {
        self.emm = true;
        self
    }

    pub fn is_emm(&self) -> bool {
        self.emm
    }

    /// Evaluates all four components at (t, y). Hard error when the jump
    /// components leave (-1, inf).
    pub fn eval(&self, grid: &TimeGrid, t: f64, y: f64) -> Result<[f64; 4]> {
        let b = [
            self.beta1.eval(grid, t, y)?,
            self.beta2.eval(grid, t, y)?,
            self.beta3.eval(grid, t, y)?,
            self.beta4.eval(grid, t, y)?,
        ];
        if b[2] <= -1.0 {
            return Err(Error::InadmissibleShift {
                t,
                what: format!("beta3 = {} must stay above -1", b[2]),
            });
        }
        if b[3] <= -1.0 {
            return Err(Error::InadmissibleShift {
                t,
                what: format!("beta4 = {} must stay above -1", b[3]),
            });
        }
        Ok(b)
    }

    /// Evaluates only the first jump component, for price-only recursions
    /// that never touch the other three.
    pub fn eval3(&self, grid: &TimeGrid, t: f64, y: f64) -> Result<f64> {
        let b3 = self.beta3.eval(grid, t, y)?;
        if b3 <= -1.0 {
            return Err(Error::InadmissibleShift {
                t,
                what: format!("beta3 = {b3} must stay above -1"),
            });
        }
        Ok(b3)
    }
}

/// Likelihood-ratio path rho_k = E[dQ/dP | F_{t_k}] on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    /// n_steps + 1 values, rho[0] = 1, all positive.
    pub rho: Vec<f64>,
}

/// Stochastic exponential of the shift's four-component integral along a
/// historical-measure path.
///
/// Per step the log-increment is
/// `g1 dW1 - g1^2 dt / 2 + g2 dW2 - g2^2 dt / 2
///  + ln(1+g3) dN1 - lambda1 g3 dt + ln(1+g4) dN2 - lambda2 g4 dt`,
/// the second line being `ln(1+g) dM + lambda [ln(1+g) - g] dt` with the
/// compensator expanded.
pub fn doleans_exponential(
    spec: &ModelSpec,
    gamma: &GirsanovShift,
    path: &MarketPath,
) -> Result<DensityPath> {
    if path.measure != MeasureTag::P {
        return Err(Error::Config(
            "density paths are accumulated along historical-measure paths".into(),
        ));
    }
    let grid = &spec.grid;
    let n = grid.n_steps;
    let dt = grid.dt();
    let mut rho = Vec::with_capacity(n + 1);
    rho.push(1.0);
    let mut acc = 0.0f64;
    for k in 0..n {
        let t = grid.time(k);
        let g = gamma.eval(grid, t, path.y[k])?;
        let l1 = spec.lambda1.at_step(k);
        let l2 = spec.lambda2.at_step(k);
        acc += g[0] * path.noise.dw1[k] - 0.5 * g[0] * g[0] * dt
            + g[1] * path.noise.dw2[k] - 0.5 * g[1] * g[1] * dt
            + f64::from(path.dn1[k]) * (1.0 + g[2]).ln() - l1 * g[2] * dt
            + f64::from(path.dn2[k]) * (1.0 + g[3]).ln() - l2 * g[3] * dt;
        rho.push(acc.exp());
    }
    Ok(DensityPath { rho })
}

/// Left-hand side of the martingale condition at (t, y); zero iff the shift
/// turns the discounted price into a martingale there.
pub fn emm_residual(spec: &ModelSpec, shift: &GirsanovShift, t: f64, y: f64) -> Result<f64> {
    let grid = &spec.grid;
    let k = grid.step_of(t)?;
    let b = shift.eval(grid, t, y)?;
    let sigma = spec.vol.sigma(t, y);
    Ok(spec.mu.at_step(k) - spec.r.at_step(k)
        + b[0] * spec.a1.at_step(k) * sigma
        + spec.lambda1.at_step(k) * b[2] * spec.a3.at_step(k) * sigma)
}

/// Root of the entropy-minimizing scalar equation, plus a flag for the
/// degenerate jump-free branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta3Root {
    pub value: f64,
    /// True when a3 = 0 at this time, where the equation collapses and the
    /// zero root is returned by continuity.
    pub degenerate_a3: bool,
}

/// Residual of the scalar equation defining the entropy-minimizing third
/// component: `lambda1 sigma a3^2 x + a1^2 sigma x/(1+x) - a3 (r - mu)`.
pub fn min_entropy_equation(spec: &ModelSpec, t: f64, y: f64, x: f64) -> Result<f64> {
    let k = spec.grid.step_of(t)?;
    let sigma = spec.vol.sigma(t, y);
    let a1 = spec.a1.at_step(k);
    let a3 = spec.a3.at_step(k);
    let l1 = spec.lambda1.at_step(k);
    let gap = spec.r.at_step(k) - spec.mu.at_step(k);
    Ok(l1 * sigma * a3 * a3 * x + a1 * a1 * sigma * x / (1.0 + x) - a3 * gap)
}

/// Solves the entropy equation on (-1, inf) by safeguarded Newton inside a
/// sign-change bracket. Division by sigma normalizes the residual to a map
/// that is strictly increasing regardless of sigma's sign, which guarantees
/// the bracket.
pub fn solve_min_entropy_beta3(spec: &ModelSpec, t: f64, y: f64) -> Result<Beta3Root> {
    let k = spec.grid.step_of(t)?;
    let sigma = spec.vol.sigma(t, y);
    let a1 = spec.a1.at_step(k);
    let a3 = spec.a3.at_step(k);
    let l1 = spec.lambda1.at_step(k);
    let gap = spec.r.at_step(k) - spec.mu.at_step(k);

    if a3 == 0.0 {
        if a1 == 0.0 {
            return Err(Error::Config(format!(
                "a1 and a3 both vanish at t = {t}; the martingale condition degenerates"
            )));
        }
        return Ok(Beta3Root {
            value: 0.0,
            degenerate_a3: true,
        });
    }
    if sigma == 0.0 {
        return Err(Error::Config(format!("sigma vanishes at t = {t}")));
    }
    if a1 == 0.0 {
        // linear equation; also the hot path of jump-only simulations
        let root = gap / (l1 * sigma * a3);
        if root <= -1.0 {
            return Err(Error::Solver(format!(
                "no admissible root at t = {t}: the drift gap exceeds what the jump stream can absorb"
            )));
        }
        return Ok(Beta3Root {
            value: root,
            degenerate_a3: false,
        });
    }

    let h = |x: f64| l1 * a3 * a3 * x + a1 * a1 * x / (1.0 + x) - a3 * gap / sigma;
    let hp = |x: f64| l1 * a3 * a3 + a1 * a1 / ((1.0 + x) * (1.0 + x));

    let mut lo = -1.0 + 1e-9;
    let mut hi = 1.0;
    if h(lo) > 0.0 {
        return Err(Error::Solver(format!(
            "no admissible root at t = {t}: the equation is positive at the left boundary"
        )));
    }
    while h(hi) < 0.0 {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(Error::Solver(format!(
                "no sign change found while bracketing at t = {t}"
            )));
        }
    }

    // iterate to full convergence of the iterate, not just of the residual;
    // a flat slope would otherwise leave the root orders of magnitude less
    // accurate than the residual suggests
    let mut x = if h(0.0) <= 0.0 { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let res = h(x);
        if res == 0.0 {
            break;
        }
        if res < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - res / hp(x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - x).abs() <= f64::EPSILON * (1.0 + x.abs())
            || hi - lo <= f64::EPSILON * (1.0 + x.abs());
        x = next;
        if done {
            break;
        }
    }
    let res = sigma * h(x);
    if res.abs() < ROOT_TOL {
        Ok(Beta3Root {
            value: x,
            degenerate_a3: false,
        })
    } else {
        Err(Error::Solver(format!(
            "entropy equation not solved to tolerance at t = {t} (residual {res:.3e})"
        )))
    }
}

/// Builds the entropy-minimizing shift: second and fourth components zero,
/// third from the scalar equation, first re-solved from the martingale
/// condition wherever a1 does not vanish.
pub fn build_min_entropy_shift(spec: &ModelSpec) -> GirsanovShift {
    let spec3 = spec.clone();
    let beta3 = ShiftComponent::Rule(Arc::new(move |t, y| {
        solve_min_entropy_beta3(&spec3, t, y).map(|r| r.value)
    }));
    let spec1 = spec.clone();
    let beta1 = ShiftComponent::Rule(Arc::new(move |t, y| {
        let k = spec1.grid.step_of(t)?;
        let a1 = spec1.a1.at_step(k);
        if a1 == 0.0 {
            return Ok(0.0);
        }
        let sigma = spec1.vol.sigma(t, y);
        let b3 = solve_min_entropy_beta3(&spec1, t, y)?.value;
        let gap = spec1.r.at_step(k) - spec1.mu.at_step(k);
        Ok((gap - spec1.lambda1.at_step(k) * spec1.a3.at_step(k) * sigma * b3) / (sigma * a1))
    }));
    GirsanovShift {
        beta1,
        beta2: ShiftComponent::constant(0.0),
        beta3,
        beta4: ShiftComponent::constant(0.0),
        emm: true,
    }
}

/// Martingale-measure shift with a prescribed constant third component and
/// free constants on the second and fourth; the first component is re-solved
/// from the martingale condition, which requires a1 != 0 on the grid.
pub fn emm_shift_with(spec: &ModelSpec, beta3: f64, beta2: f64, beta4: f64) -> GirsanovShift {
    let spec1 = spec.clone();
    let beta1 = ShiftComponent::Rule(Arc::new(move |t, y| {
        let k = spec1.grid.step_of(t)?;
        let a1 = spec1.a1.at_step(k);
        let sigma = spec1.vol.sigma(t, y);
        if a1 == 0.0 {
            return Err(Error::Config(format!(
                "cannot re-solve beta1 from the martingale condition at t = {t}: a1 = 0"
            )));
        }
        let gap = spec1.r.at_step(k) - spec1.mu.at_step(k);
        Ok((gap - spec1.lambda1.at_step(k) * spec1.a3.at_step(k) * sigma * beta3) / (sigma * a1))
    }));
    GirsanovShift {
        beta1,
        beta2: ShiftComponent::constant(beta2),
        beta3: ShiftComponent::constant(beta3),
        beta4: ShiftComponent::constant(beta4),
        emm: true,
    }
}

/// Relative entropy of the shifted measure with respect to the historical
/// one, estimated by Monte Carlo over historical paths:
/// `E[ integral of sum_i beta_i^2/2 - lambda_i (ln(1+beta_{i+2}) - beta_{i+2}) dt ]`.
pub fn relative_entropy(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    n_paths: usize,
    seed: u64,
) -> Result<MCReport> {
    let grid = spec.grid;
    let dt = grid.dt();
    let n = grid.n_steps;
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let noise = gen_noise(
                &grid,
                &spec.lambda1,
                &spec.lambda2,
                mix_seed(seed, &[tags::ENTROPY, i as u64]),
            );
            let path = evolve(spec, &noise, None)?;
            let mut acc = 0.0;
            for k in 0..n {
                let t = grid.time(k);
                let b = shift.eval(&grid, t, path.y[k])?;
                let l1 = spec.lambda1.at_step(k);
                let l2 = spec.lambda2.at_step(k);
                acc += (0.5 * (b[0] * b[0] + b[1] * b[1])
                    - l1 * ((1.0 + b[2]).ln() - b[2])
                    - l2 * ((1.0 + b[3]).ln() - b[3]))
                    * dt;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCReport::from_samples(&samples, seed))
}

/// Pointwise objective behind the entropy minimization at a fixed (t, y):
/// `(mu - r + lambda1 a3 sigma x)^2
///  - 2 sigma^2 a1^2 [lambda1 (ln(1+x) - x) + lambda2 (ln(1+w) - w)]`,
/// as a function of the two free jump components (x, w). Its minimizer is
/// the root of the scalar equation paired with w = 0.
pub fn pointwise_entropy_objective(
    spec: &ModelSpec,
    t: f64,
    y: f64,
    x: f64,
    w: f64,
) -> Result<f64> {
    let k = spec.grid.step_of(t)?;
    let sigma = spec.vol.sigma(t, y);
    let a1 = spec.a1.at_step(k);
    let a3 = spec.a3.at_step(k);
    let l1 = spec.lambda1.at_step(k);
    let l2 = spec.lambda2.at_step(k);
    let drift_gap = spec.mu.at_step(k) - spec.r.at_step(k);
    let lin = drift_gap + l1 * a3 * sigma * x;
    Ok(lin * lin
        - 2.0 * sigma * sigma * a1 * a1 * (l1 * ((1.0 + x).ln() - x) + l2 * ((1.0 + w).ln() - w)))
}
