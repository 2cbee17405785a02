//! Command implementations: resolve parameters, run the engine, write
//! deterministic CSV/JSON/SVG outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use jumpvol::coeffs::{validate, ModelSpec, Violation};
use jumpvol::hedge::{
    hedging_error_comparison, optimal_eta, price, Perturbation,
};
use jumpvol::malliavin::{estimator_mode, DerivativeDirection, DerivativeMode, EstimatorConfig};
use jumpvol::measure::{build_min_entropy_shift, emm_shift_with, relative_entropy, solve_min_entropy_beta3};
use jumpvol::report::MCReport;
use jumpvol::rng::{mix_seed, tags};
use jumpvol::simulate::{evolve, gen_noise, MarketPath};

use crate::config::ScenarioConfig;
use crate::svg;
use crate::CommonArgs;

/// Failures split by exit code: configuration problems exit with 2,
/// everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        serde_json::to_string(&serde_json::json!({ "error": msg, "kind": kind })).unwrap()
    }
}

impl From<jumpvol::Error> for CliError {
    fn from(e: jumpvol::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn io_err(what: &str, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{what}: {e}"))
}

/// Batch parameters after merging flags over config values over defaults.
pub struct RunParams {
    pub n_paths: usize,
    pub n_inner: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub threads: Option<usize>,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

pub fn resolve(args: &CommonArgs, config: &ScenarioConfig) -> RunParams {
    RunParams {
        n_paths: args.paths.or(config.n_paths).unwrap_or(10_000),
        n_inner: args.inner.or(config.n_inner).unwrap_or(500),
        seed: args.seed.or(config.seed).unwrap_or(1),
        out_dir: args
            .out
            .clone()
            .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(".")),
        svg: args.svg.or(config.svg).unwrap_or(false),
        threads: args.threads.or(config.threads),
    }
}

fn require_valid(spec: &ModelSpec) -> Result<(), CliError> {
    let violations = validate(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = violations
            .iter()
            .map(|v| match v.step {
                Some(k) => format!("{} (step {k})", v.message),
                None => v.message.clone(),
            })
            .collect();
        Err(CliError::Runtime(format!(
            "model violates its invariants: {}",
            list.join("; ")
        )))
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err("cannot create output directory", e))?;
    fs::write(dir.join(name), contents)
        .map_err(|e| io_err(&format!("cannot write {name}"), e))
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    violations: Vec<Violation>,
}

/// `validate`: print the violation list; exit 1 when the model is unusable.
pub fn cmd_validate(config: &ScenarioConfig) -> Result<i32, CliError> {
    let violations = validate(&config.model);
    let report = ValidateReport {
        valid: violations.is_empty(),
        violations,
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(if report.valid { 0 } else { 1 })
}

/// Single-path CSV with the volatility column: t, S, Y, sigma, N1, N2.
fn trajectory_csv(spec: &ModelSpec, path: &MarketPath) -> String {
    let grid = &spec.grid;
    let (n1, n2) = path.cumulative_counts();
    let mut out = String::from("t,S,Y,sigma,N1,N2\n");
    for k in 0..=grid.n_steps {
        let t = grid.time(k);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t,
            path.s[k],
            path.y[k],
            spec.vol.sigma(t, path.y[k]),
            n1[k],
            n2[k]
        ));
    }
    out
}

/// `simulate`: one CSV per path under the historical measure, with
/// optional trajectory plots of the volatility and the price.
pub fn cmd_simulate(config: &ScenarioConfig, params: &RunParams) -> Result<i32, CliError> {
    let spec = &config.model;
    require_valid(spec)?;
    for i in 0..params.n_paths {
        let noise = gen_noise(
            &spec.grid,
            &spec.lambda1,
            &spec.lambda2,
            mix_seed(params.seed, &[tags::PATH, i as u64]),
        );
        let path = evolve(spec, &noise, None)?;
        write_out(
            &params.out_dir,
            &format!("trajectory_{i:04}.csv"),
            &trajectory_csv(spec, &path),
        )?;
        if params.svg {
            let n = spec.grid.n_steps;
            let ts: Vec<f64> = (0..=n).map(|k| spec.grid.time(k)).collect();
            let jumps: Vec<bool> = (0..n).map(|k| path.dn1[k] + path.dn2[k] > 0).collect();
            let sig: Vec<f64> = (0..=n)
                .map(|k| spec.vol.sigma(spec.grid.time(k), path.y[k]))
                .collect();
            write_out(
                &params.out_dir,
                &format!("sigma_{i:04}.svg"),
                &svg::line_plot("volatility sigma(t, Y_t)", &ts, &sig, &jumps),
            )?;
            let price_jumps: Vec<bool> = (0..n).map(|k| path.dn1[k] > 0).collect();
            write_out(
                &params.out_dir,
                &format!("price_{i:04}.svg"),
                &svg::line_plot("price S_t", &ts, &path.s, &price_jumps),
            )?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct PerturbedEntry {
    scale: f64,
    offset: f64,
    estimate: f64,
    std_error: f64,
    gap_vs_optimal: f64,
    gap_std_error: f64,
}

#[derive(Serialize)]
struct GridEcho {
    horizon: f64,
    n_steps: usize,
}

#[derive(Serialize)]
struct HedgeReport {
    price: f64,
    price_se: f64,
    eta0: f64,
    eta0_se: f64,
    beta3: f64,
    derivative_mode_brownian: Option<DerivativeMode>,
    derivative_mode_poisson: Option<DerivativeMode>,
    variance_optimal: f64,
    variance_optimal_se: f64,
    variance_perturbed: Vec<PerturbedEntry>,
    n_paths: usize,
    n_inner: usize,
    seed: u64,
    grid: GridEcho,
}

/// `hedge`: entropy-minimizing measure, price, time-zero ratio, and the
/// hedging-error comparison against perturbed strategies.
pub fn cmd_hedge(config: &ScenarioConfig, params: &RunParams) -> Result<i32, CliError> {
    let spec = &config.model;
    require_valid(spec)?;
    let shift = build_min_entropy_shift(spec);

    let price_rep = price(spec, &shift, params.n_paths, params.seed)?;

    let noise = gen_noise(
        &spec.grid,
        &spec.lambda1,
        &spec.lambda2,
        mix_seed(params.seed, &[tags::PATH, 0]),
    );
    let path0 = evolve(spec, &noise, Some(&shift))?;
    let eta0 = optimal_eta(
        spec,
        &shift,
        &path0,
        0,
        EstimatorConfig {
            n_inner: params.n_inner,
            seed: mix_seed(params.seed, &[tags::HEDGE]),
        },
    )?;
    let beta3 = solve_min_entropy_beta3(spec, 0.0, spec.y0)?.value;

    let perturbations: Vec<Perturbation> = config
        .perturbations
        .as_ref()
        .map(|ps| {
            ps.iter()
                .map(|p| Perturbation {
                    scale: p.scale,
                    offset: p.offset,
                })
                .collect()
        })
        .unwrap_or_else(|| {
            vec![
                Perturbation { scale: 0.8, offset: 0.0 },
                Perturbation { scale: 1.2, offset: 0.0 },
                Perturbation { scale: 1.0, offset: 0.1 },
                Perturbation { scale: 1.0, offset: -0.1 },
            ]
        });
    let cmp = hedging_error_comparison(
        spec,
        &shift,
        &perturbations,
        params.n_paths,
        params.seed,
        EstimatorConfig {
            n_inner: params.n_inner,
            seed: params.seed,
        },
    )?;

    let uses_brownian = (0..spec.grid.n_steps).any(|k| spec.a1.at_step(k) != 0.0);
    let uses_poisson = (0..spec.grid.n_steps).any(|k| spec.a3.at_step(k) != 0.0);
    let report = HedgeReport {
        price: price_rep.estimate,
        price_se: price_rep.std_error,
        eta0: eta0.eta,
        eta0_se: eta0.eta_std_error,
        beta3,
        derivative_mode_brownian: uses_brownian
            .then(|| estimator_mode(spec, DerivativeDirection::Brownian1)),
        derivative_mode_poisson: uses_poisson
            .then(|| estimator_mode(spec, DerivativeDirection::Poisson1)),
        variance_optimal: cmp.optimal.estimate,
        variance_optimal_se: cmp.optimal.std_error,
        variance_perturbed: cmp
            .perturbed
            .iter()
            .map(|p| PerturbedEntry {
                scale: p.perturbation.scale,
                offset: p.perturbation.offset,
                estimate: p.variance.estimate,
                std_error: p.variance.std_error,
                gap_vs_optimal: p.gap_vs_optimal.estimate,
                gap_std_error: p.gap_vs_optimal.std_error,
            })
            .collect(),
        n_paths: params.n_paths,
        n_inner: params.n_inner,
        seed: params.seed,
        grid: GridEcho {
            horizon: spec.grid.horizon,
            n_steps: spec.grid.n_steps,
        },
    };
    let text = serde_json::to_string_pretty(&report).unwrap();
    write_out(&params.out_dir, "hedge_report.json", &text)?;
    println!("{text}");
    Ok(0)
}

#[derive(Serialize)]
struct EntropyEntry {
    name: String,
    estimate: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct EntropyReport {
    entries: Vec<EntropyEntry>,
    n_paths: usize,
    seed: u64,
}

/// `entropy`: relative entropy of the minimizing shift and of each
/// configured alternative, on common historical paths.
pub fn cmd_entropy(config: &ScenarioConfig, params: &RunParams) -> Result<i32, CliError> {
    let spec = &config.model;
    require_valid(spec)?;
    let mut entries = Vec::new();
    let shift = build_min_entropy_shift(spec);
    let push = |entries: &mut Vec<EntropyEntry>, name: String, rep: MCReport| {
        entries.push(EntropyEntry {
            name,
            estimate: rep.estimate,
            std_error: rep.std_error,
        });
    };
    push(
        &mut entries,
        "min_entropy".into(),
        relative_entropy(spec, &shift, params.n_paths, params.seed)?,
    );
    if let Some(alts) = &config.alternatives {
        for (i, alt) in alts.iter().enumerate() {
            let s = emm_shift_with(
                spec,
                alt.beta3,
                alt.beta2.unwrap_or(0.0),
                alt.beta4.unwrap_or(0.0),
            );
            push(
                &mut entries,
                format!("alt_{}", i + 1),
                relative_entropy(spec, &s, params.n_paths, params.seed)?,
            );
        }
    }
    let report = EntropyReport {
        entries,
        n_paths: params.n_paths,
        seed: params.seed,
    };
    let text = serde_json::to_string_pretty(&report).unwrap();
    write_out(&params.out_dir, "entropy_report.json", &text)?;
    println!("{text}");
    Ok(0)
}
