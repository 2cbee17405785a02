//! Variance-minimizing hedging: the optimal ratio, self-financing
//! replication along paths, pricing, and hedging-error measurement.

use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::ModelSpec;
use crate::error::{Error, Result};
use crate::malliavin::{
    call_payoff, cond_expect_derivative, DerivativeDirection, EstimatorConfig,
};
use crate::measure::GirsanovShift;
use crate::report::MCReport;
use crate::rng::{mix_seed, tags};
use crate::simulate::{evolve, gen_noise, MarketPath};

/// Riskless account A_k = exp(sum of r dt before t_k), one value per grid
/// point, A_0 = 1.
pub fn bank_account(spec: &ModelSpec) -> Vec<f64> {
    let n = spec.grid.n_steps;
    let dt = spec.grid.dt();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(1.0);
    for k in 0..n {
        acc += spec.r.at_step(k) * dt;
        out.push(acc.exp());
    }
    out
}

/// exp(integral of r over [t_from, t_to]) with left-endpoint rectangles.
pub fn compounding(spec: &ModelSpec, from: usize, to: usize) -> f64 {
    let dt = spec.grid.dt();
    let acc: f64 = (from..to).map(|k| spec.r.at_step(k) * dt).sum();
    acc.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

fn payoff(kind: OptionKind, s: f64, strike: f64) -> f64 {
    match kind {
        OptionKind::Call => call_payoff(s, strike),
        OptionKind::Put => (strike - s).max(0.0),
    }
}

/// Monte Carlo price of a European option under the shifted measure:
/// `E[exp(-integral of r) payoff(S_T)]`.
pub fn price_option(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    kind: OptionKind,
    n_paths: usize,
    seed: u64,
) -> Result<MCReport> {
    if !shift.is_emm() {
        return Err(Error::Config(
            "pricing requires a shift tagged as a martingale measure".into(),
        ));
    }
    let disc = 1.0 / compounding(spec, 0, spec.grid.n_steps);
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let noise = gen_noise(
                &spec.grid,
                &spec.lambda1,
                &spec.lambda2,
                mix_seed(seed, &[tags::PRICE, i as u64]),
            );
            let path = evolve(spec, &noise, Some(shift))?;
            Ok(disc * payoff(kind, path.terminal(), spec.strike))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCReport::from_samples(&samples, seed))
}

/// Call price at time zero.
pub fn price(spec: &ModelSpec, shift: &GirsanovShift, n_paths: usize, seed: u64) -> Result<MCReport> {
    price_option(spec, shift, OptionKind::Call, n_paths, seed)
}

/// Self-financing plan along one path: risky units are decided at left
/// endpoints, riskless units absorb the remainder, and the value moves only
/// through price and account changes.
#[derive(Debug, Clone)]
pub struct HedgePlan {
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    /// n_steps + 1 portfolio values.
    pub v: Vec<f64>,
    pub v0: f64,
}

/// Runs the self-financing recursion
/// `V[k+1] = V[k] + zeta[k] (A[k+1] - A[k]) + eta[k] (S[k+1] - S[k])`
/// with `zeta[k] = (V[k] - eta[k] S[k]) / A[k]`.
pub fn replicate(spec: &ModelSpec, path: &MarketPath, v0: f64, eta: &[f64]) -> HedgePlan {
    let n = spec.grid.n_steps;
    assert_eq!(eta.len(), n, "strategy must be defined at every step");
    let a = bank_account(spec);
    let mut v = Vec::with_capacity(n + 1);
    let mut zeta = Vec::with_capacity(n);
    v.push(v0);
    for k in 0..n {
        let z = (v[k] - eta[k] * path.s[k]) / a[k];
        zeta.push(z);
        v.push(v[k] + z * (a[k + 1] - a[k]) + eta[k] * (path.s[k + 1] - path.s[k]));
    }
    HedgePlan {
        eta: eta.to_vec(),
        zeta,
        v,
        v0,
    }
}

/// Optimal ratio at one time with its estimator diagnostics.
#[derive(Debug, Clone)]
pub struct EtaEstimate {
    pub eta: f64,
    /// Standard error of the ratio propagated from the numerator terms.
    pub eta_std_error: f64,
    /// Conditional expectation of the Brownian payoff derivative, when the
    /// price loads on the Brownian stream at this step.
    pub term_brownian: Option<MCReport>,
    /// Conditional expectation of the jump payoff difference, when the
    /// price loads on the jump stream at this step.
    pub term_poisson: Option<MCReport>,
}

struct EtaInputs {
    a1: f64,
    a3: f64,
    lam_eff: f64,
    /// exp(integral of r from t to T) * sigma(t, Y_t) * S_t.
    scale: f64,
}

fn eta_inputs(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
) -> Result<EtaInputs> {
    let grid = &spec.grid;
    let t = grid.time(t_index);
    let y = path.y[t_index];
    let sigma = spec.vol.sigma(t, y);
    let a1 = spec.a1.at_step(t_index);
    let a3 = spec.a3.at_step(t_index);
    let b3 = shift.eval(grid, t, y)?[2];
    let lam_eff = spec.lambda1.at_step(t_index) * (1.0 + b3);
    let scale = compounding(spec, t_index, grid.n_steps) * sigma * path.s[t_index];
    if (a1 * a1 + lam_eff * a3 * a3) * scale == 0.0 {
        return Err(Error::Config(format!(
            "hedge ratio denominator vanishes at step {t_index}"
        )));
    }
    Ok(EtaInputs {
        a1,
        a3,
        lam_eff,
        scale,
    })
}

/// Variance-minimizing risky position at `t_index`:
/// `(a1 E[D^W f | F_t] + lambda1 (1 + beta3) a3 E[D^N f | F_t])
///  / ((a1^2 + lambda1 (1 + beta3) a3^2) e^{int_t^T r} sigma S_t)`.
pub fn optimal_eta(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
    cfg: EstimatorConfig,
) -> Result<EtaEstimate> {
    let inp = eta_inputs(spec, shift, path, t_index)?;
    let term_brownian = if inp.a1 != 0.0 {
        Some(cond_expect_derivative(
            spec,
            shift,
            path,
            t_index,
            DerivativeDirection::Brownian1,
            cfg,
        )?)
    } else {
        None
    };
    let term_poisson = if inp.a3 != 0.0 {
        Some(cond_expect_derivative(
            spec,
            shift,
            path,
            t_index,
            DerivativeDirection::Poisson1,
            cfg,
        )?)
    } else {
        None
    };
    let ew = term_brownian.as_ref().map_or(0.0, |r| r.estimate);
    let en = term_poisson.as_ref().map_or(0.0, |r| r.estimate);
    let denom = (inp.a1 * inp.a1 + inp.lam_eff * inp.a3 * inp.a3) * inp.scale;
    let eta = (inp.a1 * ew + inp.lam_eff * inp.a3 * en) / denom;
    let se_w = term_brownian.as_ref().map_or(0.0, |r| r.std_error);
    let se_n = term_poisson.as_ref().map_or(0.0, |r| r.std_error);
    let eta_std_error = ((inp.a1 * se_w).powi(2) + (inp.lam_eff * inp.a3 * se_n).powi(2)).sqrt()
        / denom.abs();
    Ok(EtaEstimate {
        eta,
        eta_std_error,
        term_brownian,
        term_poisson,
    })
}

/// The x-dependent part of the per-time variance integrand, evaluated with
/// frozen conditional-expectation estimates:
/// `(E[D^W f | F_t] - c x a1)^2 + lambda1 (1 + beta3) (E[D^N f | F_t] - c x a3)^2`
/// with `c = e^{int_t^T r} sigma S_t`. A quadratic in x whose minimizer is
/// the optimal ratio.
pub fn h2_objective(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    t_index: usize,
    x: f64,
    cfg: EstimatorConfig,
) -> Result<f64> {
    let inp = eta_inputs(spec, shift, path, t_index)?;
    let ew = if inp.a1 != 0.0 {
        cond_expect_derivative(spec, shift, path, t_index, DerivativeDirection::Brownian1, cfg)?
            .estimate
    } else {
        0.0
    };
    let en = if inp.a3 != 0.0 {
        cond_expect_derivative(spec, shift, path, t_index, DerivativeDirection::Poisson1, cfg)?
            .estimate
    } else {
        0.0
    };
    let dw = ew - inp.scale * x * inp.a1;
    let dn = en - inp.scale * x * inp.a3;
    Ok(dw * dw + inp.lam_eff * dn * dn)
}

/// Affine distortion of the optimal ratio used for dominance tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbation {
    pub scale: f64,
    pub offset: f64,
}

impl Perturbation {
    fn apply(&self, eta: f64) -> f64 {
        self.scale * eta + self.offset
    }
}

/// Strategy choice for hedging-error measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Optimal,
    OptimalPerturbed(Perturbation),
    Constant(f64),
    Zero,
}

fn optimal_eta_path(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    path: &MarketPath,
    n_inner: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..spec.grid.n_steps)
        .map(|k| {
            optimal_eta(
                spec,
                shift,
                path,
                k,
                EstimatorConfig {
                    n_inner,
                    seed,
                },
            )
            .map(|e| e.eta)
        })
        .collect()
}

/// Squared terminal hedging error `(f(S_T) - V_T)^2` averaged over paths
/// simulated under the shifted measure, with the initial capital set to the
/// Monte Carlo price.
pub fn hedging_error_variance(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    strategy: Strategy,
    n_paths: usize,
    seed: u64,
    cfg: EstimatorConfig,
) -> Result<MCReport> {
    let v0 = price(spec, shift, n_paths, mix_seed(seed, &[tags::PRICE]))?.estimate;
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let noise = gen_noise(
                &spec.grid,
                &spec.lambda1,
                &spec.lambda2,
                mix_seed(seed, &[tags::VARIANCE, i as u64]),
            );
            let path = evolve(spec, &noise, Some(shift))?;
            let eta = match strategy {
                Strategy::Zero => vec![0.0; spec.grid.n_steps],
                Strategy::Constant(c) => vec![c; spec.grid.n_steps],
                Strategy::Optimal => optimal_eta_path(
                    spec,
                    shift,
                    &path,
                    cfg.n_inner,
                    mix_seed(cfg.seed, &[tags::HEDGE, i as u64]),
                )?,
                Strategy::OptimalPerturbed(p) => optimal_eta_path(
                    spec,
                    shift,
                    &path,
                    cfg.n_inner,
                    mix_seed(cfg.seed, &[tags::HEDGE, i as u64]),
                )?
                .into_iter()
                .map(|e| p.apply(e))
                .collect(),
            };
            let plan = replicate(spec, &path, v0, &eta);
            let err = call_payoff(path.terminal(), spec.strike) - plan.v[spec.grid.n_steps];
            Ok(err * err)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCReport::from_samples(&samples, seed))
}

/// Hedging-error variance of one perturbed strategy, with the paired gap
/// against the optimal one computed on common paths.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedVariance {
    pub perturbation: Perturbation,
    pub variance: MCReport,
    /// Per-path `err_perturbed^2 - err_optimal^2`; a positive mean means the
    /// optimal strategy dominates.
    pub gap_vs_optimal: MCReport,
}

/// Variances of the optimal and several perturbed strategies computed on
/// common paths with shared ratio estimates.
#[derive(Debug, Clone, Serialize)]
pub struct HedgeComparison {
    pub price: MCReport,
    pub optimal: MCReport,
    pub perturbed: Vec<PerturbedVariance>,
}

pub fn hedging_error_comparison(
    spec: &ModelSpec,
    shift: &GirsanovShift,
    perturbations: &[Perturbation],
    n_paths: usize,
    seed: u64,
    cfg: EstimatorConfig,
) -> Result<HedgeComparison> {
    let price_rep = price(spec, shift, n_paths, mix_seed(seed, &[tags::PRICE]))?;
    let v0 = price_rep.estimate;
    let n = spec.grid.n_steps;
    // per path: squared error of the optimal strategy, then of each perturbation
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let noise = gen_noise(
                &spec.grid,
                &spec.lambda1,
                &spec.lambda2,
                mix_seed(seed, &[tags::VARIANCE, i as u64]),
            );
            let path = evolve(spec, &noise, Some(shift))?;
            let eta_hat = optimal_eta_path(
                spec,
                shift,
                &path,
                cfg.n_inner,
                mix_seed(cfg.seed, &[tags::HEDGE, i as u64]),
            )?;
            let f = call_payoff(path.terminal(), spec.strike);
            let mut row = Vec::with_capacity(1 + perturbations.len());
            let err = f - replicate(spec, &path, v0, &eta_hat).v[n];
            row.push(err * err);
            for p in perturbations {
                let eta: Vec<f64> = eta_hat.iter().map(|&e| p.apply(e)).collect();
                let err = f - replicate(spec, &path, v0, &eta).v[n];
                row.push(err * err);
            }
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let column = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let opt_samples = column(0);
    let optimal = MCReport::from_samples(&opt_samples, seed);
    let perturbed = perturbations
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let samples = column(j + 1);
            let gaps: Vec<f64> = samples
                .iter()
                .zip(&opt_samples)
                .map(|(p2, o2)| p2 - o2)
                .collect();
            PerturbedVariance {
                perturbation: *p,
                variance: MCReport::from_samples(&samples, seed),
                gap_vs_optimal: MCReport::from_samples(&gaps, seed),
            }
        })
        .collect();
    Ok(HedgeComparison {
        price: price_rep,
        optimal,
        perturbed,
    })
}
