//! Path generation under the historical measure or a shifted martingale
//! measure.
//!
//! The factor follows Euler-Maruyama. The price follows an exact per-step
//! exponential scheme with the volatility frozen at the left grid point:
//! `log S[k+1] = log S[k] + (drift - a3 l_eff sigma - (a1 sigma)^2 / 2) dt
//!  + a1 sigma dW1 + dN1 ln(1 + a3 sigma)`,
//! where `drift` is mu under the historical measure and r under a shifted
//! one, and `l_eff` is the jump intensity of the simulating measure. The
//! conditional one-step mean of the discounted price is then exact, so the
//! martingale property holds without discretization bias.
//!
//! Jump counts are stored as per-step uniforms plus their quantile under the
//! generating intensity. Simulating under a shifted measure re-reads the same
//! uniform through the quantile of the (possibly state-dependent) shifted
//! intensity, which keeps paths reproducible and correctly distributed at
//! the same time.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::coeffs::{Coefficient, ModelSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::GirsanovShift;
use crate::rng::{poisson_cdf, poisson_quantile, substream};

/// Per-path driving noise on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingNoise {
    pub seed: u64,
    /// Gaussian increments with variance dt.
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
    /// Jump counts per step under the generating intensities.
    pub dn1: Vec<u32>,
    pub dn2: Vec<u32>,
    /// Uniforms behind the counts; a measure change re-quantiles these.
    pub jump_u1: Vec<f64>,
    pub jump_u2: Vec<f64>,
    /// Exact jump times in (0, T], uniform within their step, sorted.
    pub jump_times1: Vec<f64>,
    pub jump_times2: Vec<f64>,
}

/// Draws the full driving noise for one path. Deterministic in the seed.
pub fn gen_noise(
    grid: &TimeGrid,
    lambda1: &Coefficient,
    lambda2: &Coefficient,
    seed: u64,
) -> DrivingNoise {
    let n = grid.n_steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut rng = substream(seed);

    let gauss = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * sqrt_dt)
            .collect()
    };
    let dw1 = gauss(&mut rng);
    let dw2 = gauss(&mut rng);

    let uniforms = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>()).collect()
    };
    let jump_u1 = uniforms(&mut rng);
    let jump_u2 = uniforms(&mut rng);

    let counts = |lambda: &Coefficient, u: &[f64]| -> Vec<u32> {
        (0..n)
            .map(|k| poisson_quantile(lambda.at_step(k) * dt, u[k]))
            .collect()
    };
    let dn1 = counts(lambda1, &jump_u1);
    let dn2 = counts(lambda2, &jump_u2);

    let times = |rng: &mut ChaCha12Rng, dn: &[u32]| -> Vec<f64> {
        let mut out = Vec::with_capacity(dn.iter().map(|&c| c as usize).sum());
        for (k, &c) in dn.iter().enumerate() {
            let left = grid.time(k);
            let mut within: Vec<f64> = (0..c)
                .map(|_| left + (1.0 - rng.random::<f64>()) * dt)
                .collect();
            within.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.extend(within);
        }
        out
    };
    let jump_times1 = times(&mut rng, &dn1);
    let jump_times2 = times(&mut rng, &dn2);

    DrivingNoise {
        seed,
        dw1,
        dw2,
        dn1,
        dn2,
        jump_u1,
        jump_u2,
        jump_times1,
        jump_times2,
    }
}

impl DrivingNoise {
    /// Noise with prescribed Gaussian increments and jump counts, mainly for
    /// forced-scenario tests. The per-step uniforms are set to the CDF
    /// midpoint of each count, so re-quantiling at the generating intensity
    /// reproduces the counts exactly.
    pub fn from_increments(
        grid: &TimeGrid,
        lambda1: &Coefficient,
        lambda2: &Coefficient,
        seed: u64,
        dw1: Vec<f64>,
        dw2: Vec<f64>,
        dn1: Vec<u32>,
        dn2: Vec<u32>,
    ) -> Self {
        let n = grid.n_steps;
        assert!(dw1.len() == n && dw2.len() == n && dn1.len() == n && dn2.len() == n);
        let dt = grid.dt();
        let midpoints = |lambda: &Coefficient, dn: &[u32]| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let mean = lambda.at_step(k) * dt;
                    let c = dn[k];
                    let lo = if c == 0 { 0.0 } else { poisson_cdf(mean, c - 1) };
                    let hi = poisson_cdf(mean, c);
                    0.5 * (lo + hi)
                })
                .collect()
        };
        let jump_u1 = midpoints(lambda1, &dn1);
        let jump_u2 = midpoints(lambda2, &dn2);
        let times = |dn: &[u32]| -> Vec<f64> {
            let mut out = Vec::new();
            for (k, &c) in dn.iter().enumerate() {
                for j in 0..c {
                    out.push(grid.time(k) + dt * (f64::from(j) + 0.5) / f64::from(c));
                }
            }
            out
        };
        let jump_times1 = times(&dn1);
        let jump_times2 = times(&dn2);
        DrivingNoise {
            seed,
            dw1,
            dw2,
            dn1,
            dn2,
            jump_u1,
            jump_u2,
            jump_times1,
            jump_times2,
        }
    }
}

/// Which measure drove a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasureTag {
    /// Historical measure.
    P,
    /// Shifted martingale measure.
    QBeta,
}

/// One discretized realization of the market.
#[derive(Debug, Clone)]
pub struct MarketPath {
    pub noise: DrivingNoise,
    /// n_steps + 1 prices, all positive.
    pub s: Vec<f64>,
    /// n_steps + 1 factor values.
    pub y: Vec<f64>,
    /// Jump counts actually applied (re-quantiled when a shift was active).
    pub dn1: Vec<u32>,
    pub dn2: Vec<u32>,
    pub measure: MeasureTag,
}

impl MarketPath {
    pub fn terminal(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Cumulative jump counts at each grid point, starting at zero.
    pub fn cumulative_counts(&self) -> (Vec<u32>, Vec<u32>) {
        let cum = |dn: &[u32]| {
            let mut out = Vec::with_capacity(dn.len() + 1);
            let mut acc = 0u32;
            out.push(0);
            for &c in dn {
                acc += c;
                out.push(acc);
            }
            out
        };
        (cum(&self.dn1), cum(&self.dn2))
    }

    /// CSV with one row per grid point: t, S, Y, N1, N2.
    pub fn to_csv(&self, grid: &TimeGrid) -> String {
        let (n1, n2) = self.cumulative_counts();
        let mut out = String::from("t,S,Y,N1,N2\n");
        for k in 0..=grid.n_steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                grid.time(k),
                self.s[k],
                self.y[k],
                n1[k],
                n2[k]
            ));
        }
        out
    }
}

/// One step of the joint (S, Y) scheme. Counts are taken as given when
/// `fixed_counts` is set, otherwise re-quantiled from the uniforms at the
/// simulating measure's intensity.
#[allow(clippy::too_many_arguments)]
fn advance_step(
    spec: &ModelSpec,
    shift: Option<&GirsanovShift>,
    k: usize,
    s: f64,
    y: f64,
    dw1: f64,
    dw2: f64,
    u1: f64,
    u2: f64,
    fixed_counts: Option<(u32, u32)>,
) -> Result<(f64, f64, u32, u32)> {
    let grid = &spec.grid;
    let dt = grid.dt();
    let t = grid.time(k);
    let sigma = spec.vol.sigma(t, y);
    let a1 = spec.a1.at_step(k);
    let a2 = spec.a2.at_step(k);
    let a3 = spec.a3.at_step(k);
    let a4 = spec.a4.at_step(k);
    if 1.0 + sigma * a3 <= 0.0 {
        return Err(Error::ModelViolation {
            step: k,
            what: format!("1 + sigma * a3 = {} is not positive", 1.0 + sigma * a3),
        });
    }
    let l1 = spec.lambda1.at_step(k);
    let l2 = spec.lambda2.at_step(k);
    let (b, s_drift) = match shift {
        Some(sh) => (sh.eval(grid, t, y)?, spec.r.at_step(k)),
        None => ([0.0; 4], spec.mu.at_step(k)),
    };
    let l1_eff = l1 * (1.0 + b[2]);
    let l2_eff = l2 * (1.0 + b[3]);
    let (n1, n2) = match fixed_counts {
        Some(c) => c,
        None => (
            poisson_quantile(l1_eff * dt, u1),
            poisson_quantile(l2_eff * dt, u2),
        ),
    };
    let dm1 = f64::from(n1) - l1_eff * dt;
    let dm2 = f64::from(n2) - l2_eff * dt;
    let s1 = spec.sigma1_y.at_step(k);
    let s2 = spec.sigma2_y.at_step(k);
    let y_drift = spec.mu_y.at_step(k)
        + s1 * (a1 * b[0] + l1 * b[2] * a3)
        + s2 * (a2 * b[1] + l2 * b[3] * a4);
    let y_next = y + y_drift * dt + s1 * (a1 * dw1 + a3 * dm1) + s2 * (a2 * dw2 + a4 * dm2);
    let log_inc = (s_drift - a3 * l1_eff * sigma - 0.5 * (a1 * sigma) * (a1 * sigma)) * dt
        + a1 * sigma * dw1
        + f64::from(n1) * (1.0 + a3 * sigma).ln();
    Ok((s * log_inc.exp(), y_next, n1, n2))
}

/// Evolves a full path from the initial state.
///
/// Without a shift, the stored jump counts drive the path and the drift is
/// historical. With a shift (which must carry the martingale tag), the
/// Gaussian increments are read as increments of the shifted Brownian
/// motions and the jump counts are re-quantiled at the shifted intensity.
pub fn evolve(
    spec: &ModelSpec,
    noise: &DrivingNoise,
    shift: Option<&GirsanovShift>,
) -> Result<MarketPath> {
    let n = spec.grid.n_steps;
    if noise.dw1.len() != n
        || noise.dw2.len() != n
        || noise.dn1.len() != n
        || noise.dn2.len() != n
        || noise.jump_u1.len() != n
        || noise.jump_u2.len() != n
    {
        return Err(Error::Config(
            "noise was generated on a different grid".into(),
        ));
    }
    if let Some(sh) = shift {
        if !sh.is_emm() {
            return Err(Error::Config(
                "simulation under a shifted measure requires a shift tagged as a martingale measure"
                    .into(),
            ));
        }
    }
    let mut s = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut dn1 = Vec::with_capacity(n);
    let mut dn2 = Vec::with_capacity(n);
    s.push(spec.s0);
    y.push(spec.y0);
    for k in 0..n {
        let fixed = if shift.is_none() {
            Some((noise.dn1[k], noise.dn2[k]))
        } else {
            None
        };
        let (sn, yn, n1, n2) = advance_step(
            spec,
            shift,
            k,
            s[k],
            y[k],
            noise.dw1[k],
            noise.dw2[k],
            noise.jump_u1[k],
            noise.jump_u2[k],
            fixed,
        )?;
        s.push(sn);
        y.push(yn);
        dn1.push(n1);
        dn2.push(n2);
    }
    Ok(MarketPath {
        noise: noise.clone(),
        s,
        y,
        dn1,
        dn2,
        measure: if shift.is_some() {
            MeasureTag::QBeta
        } else {
            MeasureTag::P
        },
    })
}

/// Freshly drawn tail noise for a continuation simulation over the last
/// `m` steps of the grid. Reused across inner samples to avoid churning
/// allocations in nested estimators.
#[derive(Debug, Clone, Default)]
pub(crate) struct TailNoise {
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Which noise streams a configuration actually consumes from some step on.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NoiseNeeds {
    pub w1: bool,
    pub w2: bool,
}

impl NoiseNeeds {
    pub fn of(spec: &ModelSpec, from: usize) -> Self {
        let any = |c: &Coefficient| (from..spec.grid.n_steps).any(|k| c.at_step(k) != 0.0);
        NoiseNeeds {
            w1: any(&spec.a1),
            w2: any(&spec.a2),
        }
    }
}

pub(crate) fn fill_tail_noise(
    rng: &mut ChaCha12Rng,
    m: usize,
    dt: f64,
    needs: NoiseNeeds,
    noise: &mut TailNoise,
) {
    let sqrt_dt = dt.sqrt();
    let fill_gauss = |rng: &mut ChaCha12Rng, v: &mut Vec<f64>, on: bool| {
        v.clear();
        if on {
            v.extend((0..m).map(|_| rng.sample::<f64, _>(StandardNormal) * sqrt_dt));
        } else {
            v.resize(m, 0.0);
        }
    };
    fill_gauss(rng, &mut noise.dw1, needs.w1);
    fill_gauss(rng, &mut noise.dw2, needs.w2);
    noise.u1.clear();
    noise.u1.extend((0..m).map(|_| rng.random::<f64>()));
    noise.u2.clear();
    noise.u2.extend((0..m).map(|_| rng.random::<f64>()));
}

/// Continuation of (S, Y) from mid-grid state over the remaining steps.
/// Arrays are indexed relative to the starting step; `s[0]` is the
/// starting price.
#[derive(Debug, Clone, Default)]
pub(crate) struct TailPath {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub dn1: Vec<u32>,
}

pub(crate) fn evolve_tail_into(
    spec: &ModelSpec,
    shift: Option<&GirsanovShift>,
    k0: usize,
    s_start: f64,
    y_start: f64,
    noise: &TailNoise,
    out: &mut TailPath,
) -> Result<()> {
    let n = spec.grid.n_steps;
    let m = n - k0;
    assert_eq!(noise.dw1.len(), m);
    out.s.clear();
    out.y.clear();
    out.dn1.clear();
    out.s.push(s_start);
    out.y.push(y_start);
    for j in 0..m {
        let (sn, yn, n1, _) = advance_step(
            spec,
            shift,
            k0 + j,
            out.s[j],
            out.y[j],
            noise.dw1[j],
            noise.dw2[j],
            noise.u1[j],
            noise.u2[j],
            None,
        )?;
        out.s.push(sn);
        out.y.push(yn);
        out.dn1.push(n1);
    }
    Ok(())
}

/// Terminal price of a tail re-evaluated with one extra first-stream jump
/// inserted at its first step and every factor value from there on shifted
/// by `sigma1_y(t_{k0}) * a3(t_{k0})`. The factor path is shifted, not
/// re-evolved; the price is recomputed through the same scheme with the
/// stored counts plus the inserted one.
pub(crate) fn terminal_with_inserted_jump(
    spec: &ModelSpec,
    shift: Option<&GirsanovShift>,
    k0: usize,
    s_start: f64,
    y: &[f64],
    dw1: &[f64],
    dn1: &[u32],
) -> Result<f64> {
    let grid = &spec.grid;
    let n = grid.n_steps;
    let m = n - k0;
    assert!(y.len() == m + 1 && dw1.len() == m && dn1.len() == m);
    let dt = grid.dt();
    let dy = spec.sigma1_y.at_step(k0) * spec.a3.at_step(k0);
    // s multiplies per step exactly like the forward scheme, so a shift
    // with no effect reproduces the original terminal bit for bit
    let mut s = s_start;
    for j in 0..m {
        let k = k0 + j;
        let t = grid.time(k);
        let yj = y[j] + dy;
        let sigma = spec.vol.sigma(t, yj);
        let a1 = spec.a1.at_step(k);
        let a3 = spec.a3.at_step(k);
        if 1.0 + sigma * a3 <= 0.0 {
            return Err(Error::ModelViolation {
                step: k,
                what: format!(
                    "1 + sigma * a3 = {} is not positive on the jump-shifted path",
                    1.0 + sigma * a3
                ),
            });
        }
        let (b3, s_drift) = match shift {
            Some(sh) => (sh.eval3(grid, t, yj)?, spec.r.at_step(k)),
            None => (0.0, spec.mu.at_step(k)),
        };
        let l1_eff = spec.lambda1.at_step(k) * (1.0 + b3);
        let n1 = f64::from(dn1[j]) + if j == 0 { 1.0 } else { 0.0 };
        let log_inc = (s_drift - a3 * l1_eff * sigma - 0.5 * (a1 * sigma) * (a1 * sigma)) * dt
            + a1 * sigma * dw1[j]
            + n1 * (1.0 + a3 * sigma).ln();
        s *= log_inc.exp();
    }
    Ok(s)
}
