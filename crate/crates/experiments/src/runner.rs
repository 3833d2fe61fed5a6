//! Executes an experiment configuration replicate by replicate.

use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use revsmc::events::LogSink;
use revsmc::models::atm::{exact_hitting_all, AtmModel, AtmParams};
use revsmc::models::hyperbolic::{HyperbolicModel, StripParams};
use revsmc::models::sis::{
    argmax_vertices, likelihood_surface, simulate_forward_epidemic, Network, SisModel, SisParams, SisState,
};
use revsmc::smc::{run_reverse_smc, EstimateSummary, RunOutput};
use revsmc::splitting::{run_ams, run_diffusion_ams, AtmSplitting};
use revsmc::Error;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::ResultRow;
use crate::RunError;

/// Instances above this size skip the exact oracle echo.
const EXACT_ORACLE_LIMIT: usize = 10_000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed of replicate `r`: the base seed XOR a hash of `(r, experiment id)`.
pub fn replicate_seed(base: u64, replicate: usize, experiment: &str) -> u64 {
    base ^ splitmix64(fnv1a(experiment) ^ splitmix64(replicate as u64))
}

/// Seed of one condition inside a replicate.
fn condition_seed(replicate_seed: u64, condition: usize) -> u64 {
    splitmix64(replicate_seed.wrapping_add(condition as u64))
}

/// Everything shared by the replicates of one run.
enum Plan {
    Atm {
        models: Vec<(usize, AtmModel<f64>)>,
        exact: Option<Vec<f64>>,
    },
    AtmSplitting {
        problems: Vec<(usize, AtmSplitting<f64>)>,
        exact: Option<Vec<f64>>,
    },
    Hyperbolic {
        models: Vec<(StripParams<f64>, HyperbolicModel<f64>)>,
    },
    HyperbolicSplitting {
        model: HyperbolicModel<f64>,
    },
    Sis {
        network: Network,
        params: SisParams<f64>,
        observed: Option<SisState>,
        surface: bool,
    },
}

fn exact_curve(p: &AtmParams<f64>) -> Option<Vec<f64>> {
    if (p.barrier + 1) * (p.sources + 1) > EXACT_ORACLE_LIMIT {
        return None;
    }
    exact_hitting_all(p).ok()
}

fn plan(config: &ExperimentConfig) -> Result<Plan, RunError> {
    let kind = config.experiment;
    Ok(match kind {
        ExperimentKind::Atm | ExperimentKind::AtmLarge => {
            let p = config.atm_params()?;
            let models = config
                .atm_terminals()?
                .into_iter()
                .map(|k| Ok((k, AtmModel::new(p, k)?)))
                .collect::<Result<_, Error>>()?;
            Plan::Atm {
                models,
                exact: exact_curve(&p),
            }
        }
        ExperimentKind::AtmSplitting => {
            let p = config.atm_params()?;
            let problems = config
                .atm_terminals()?
                .into_iter()
                .map(|k| Ok((k, AtmSplitting::new(p, Some(k), config.kernel_mode())?)))
                .collect::<Result<_, Error>>()?;
            Plan::AtmSplitting {
                problems,
                exact: exact_curve(&p),
            }
        }
        ExperimentKind::Hyperbolic | ExperimentKind::HyperbolicSweep => {
            let models = config
                .strip_params()?
                .into_iter()
                .map(|p| Ok((p, hyperbolic_model(config, p)?)))
                .collect::<Result<_, Error>>()?;
            Plan::Hyperbolic { models }
        }
        ExperimentKind::HyperbolicSplitting => {
            let p = config.strip_params()?[0];
            Plan::HyperbolicSplitting {
                model: hyperbolic_model(config, p)?,
            }
        }
        ExperimentKind::Sis | ExperimentKind::SisSurface => {
            let network = config.network()?;
            let params = config.sis_params(&network)?;
            Plan::Sis {
                params,
                observed: config.sis_observed().map(SisState::new),
                network,
                surface: kind == ExperimentKind::SisSurface,
            }
        }
    })
}

fn hyperbolic_model(config: &ExperimentConfig, p: StripParams<f64>) -> revsmc::Result<HyperbolicModel<f64>> {
    let m = HyperbolicModel::new(p)?;
    Ok(match config.quadrature_tolerance() {
        Some(t) => m.with_quadrature_tolerance(t),
        None => m,
    })
}

fn geometry(p: &StripParams<f64>) -> String {
    format!(
        "l0={};u0={};lt={};ut={};t={};delta={}",
        p.l0, p.u0, p.lt, p.ut, p.horizon, p.delta
    )
}

struct RowBase<'a> {
    experiment: &'a str,
    replicate: usize,
}

impl RowBase<'_> {
    fn row(&self, condition: String, seed: u64, start: Instant) -> ResultRow {
        ResultRow {
            experiment: self.experiment.to_string(),
            replicate: self.replicate,
            condition,
            estimate: 0.0,
            std_error: None,
            ess_min: None,
            resample_count: None,
            wall_seconds: start.elapsed().as_secs_f64(),
            seed,
            flag: String::new(),
            detail: String::new(),
        }
    }

    fn smc(&self, condition: String, seed: u64, start: Instant, s: &EstimateSummary<f64>) -> ResultRow {
        ResultRow {
            estimate: s.estimate,
            std_error: Some(s.std_error),
            ess_min: s.ess_min(),
            resample_count: Some(s.resample_events),
            detail: format!("log_estimate={}", s.log_estimate),
            ..self.row(condition, seed, start)
        }
    }

    /// A flagged row for model-level failures; anything else aborts the run.
    fn failed(&self, condition: String, seed: u64, start: Instant, err: Error) -> Result<ResultRow, RunError> {
        let flag = match &err {
            Error::Degenerate { .. } | Error::ZeroWeights => "degenerate",
            Error::Stagnation { .. } => "stagnation",
            Error::DetectionNotReached { .. } => "no-detection",
            _ => return Err(err.into()),
        };
        warn!("{} replicate {} {condition}: {err}", self.experiment, self.replicate);
        Ok(ResultRow {
            flag: flag.into(),
            detail: err.to_string(),
            ..self.row(condition, seed, start)
        })
    }
}

fn with_exact(mut row: ResultRow, exact: &Option<Vec<f64>>, k: usize) -> ResultRow {
    if let Some(e) = exact {
        if !row.detail.is_empty() {
            row.detail.push(';');
        }
        row.detail.push_str(&format!("exact={}", e[k]));
    }
    row
}

fn manhattan(net: &Network, a: u32, b: u32) -> Option<usize> {
    let (ra, ca) = net.coords(a)?;
    let (rb, cb) = net.coords(b)?;
    Some(ra.abs_diff(rb) + ca.abs_diff(cb))
}

fn run_replicate(config: &ExperimentConfig, plan: &Plan, replicate: usize) -> Result<Vec<ResultRow>, RunError> {
    let id = config.experiment.id();
    let base = RowBase {
        experiment: id,
        replicate,
    };
    let rep_seed = replicate_seed(config.seed, replicate, id);
    let sink = LogSink;
    let mut rows = Vec::new();
    match plan {
        Plan::Atm { models, exact } => {
            for (i, (k, model)) in models.iter().enumerate() {
                let seed = condition_seed(rep_seed, i);
                let start = Instant::now();
                let cond = format!("k={k}");
                let row = match run_reverse_smc(model, &config.engine_config(seed), &sink) {
                    Ok(RunOutput { summary, .. }) => base.smc(cond, seed, start, &summary),
                    Err(e) => base.failed(cond, seed, start, e)?,
                };
                rows.push(with_exact(row, exact, *k));
            }
        }
        Plan::AtmSplitting { problems, exact } => {
            for (i, (k, problem)) in problems.iter().enumerate() {
                let seed = condition_seed(rep_seed, i);
                let start = Instant::now();
                let cond = format!("k={k}");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let row = match run_ams(problem, &config.splitting_config(), &mut rng, &sink) {
                    Ok(s) => ResultRow {
                        estimate: s.estimate,
                        std_error: Some(s.std_error),
                        resample_count: Some(s.iterations),
                        flag: if s.extinct { "extinct".into() } else { String::new() },
                        detail: format!("success_fraction={}", s.success_fraction),
                        ..base.row(cond, seed, start)
                    },
                    Err(e) => base.failed(cond, seed, start, e)?,
                };
                rows.push(with_exact(row, exact, *k));
            }
        }
        Plan::Hyperbolic { models } => {
            for (i, (p, model)) in models.iter().enumerate() {
                let seed = condition_seed(rep_seed, i);
                let start = Instant::now();
                let row = match run_reverse_smc(model, &config.engine_config(seed), &sink) {
                    Ok(RunOutput { summary, .. }) => base.smc(geometry(p), seed, start, &summary),
                    Err(e) => base.failed(geometry(p), seed, start, e)?,
                };
                rows.push(row);
            }
        }
        Plan::HyperbolicSplitting { model } => {
            let seed = condition_seed(rep_seed, 0);
            let start = Instant::now();
            let cond = geometry(model.params());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n0 = config.initial_conditions();
            let row = match run_diffusion_ams(model, n0, &config.splitting_config(), config.kernel_mode(), &mut rng, &sink)
            {
                Ok(s) => ResultRow {
                    estimate: s.estimate,
                    std_error: Some(s.std_error),
                    resample_count: Some(s.total_iterations),
                    detail: format!("initial_conditions={}", s.initial_conditions),
                    ..base.row(cond, seed, start)
                },
                Err(e) => base.failed(cond, seed, start, e)?,
            };
            rows.push(row);
        }
        Plan::Sis {
            network,
            params,
            observed,
            surface,
        } => rows.extend(run_sis(config, &base, network, params, observed, *surface, rep_seed)?),
    }
    info!("{id} replicate {replicate} done");
    Ok(rows)
}

fn run_sis(
    config: &ExperimentConfig,
    base: &RowBase<'_>,
    network: &Network,
    params: &SisParams<f64>,
    observed: &Option<SisState>,
    surface: bool,
    rep_seed: u64,
) -> Result<Vec<ResultRow>, RunError> {
    let seed = condition_seed(rep_seed, 0);
    let start = Instant::now();
    let grid = match network.grid_dims() {
        Some((r, c)) => format!("grid={r}x{c}"),
        None => format!("vertices={}", network.len()),
    };
    let (observed, source) = match observed {
        Some(o) => (o.clone(), None),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(condition_seed(rep_seed, 1));
            match simulate_forward_epidemic(params, network, config.sis_max_restarts(), &mut rng) {
                Ok(d) => (d.observed, Some(d.source)),
                Err(e) => return Ok(vec![base.failed(grid, seed, start, e)?]),
            }
        }
    };
    let model = SisModel::new(*params, network.clone(), observed.clone())?;
    let out = match run_reverse_smc(&model, &config.engine_config(seed), &LogSink) {
        Ok(o) => o,
        Err(e) => return Ok(vec![base.failed(grid, seed, start, e)?]),
    };
    let values = likelihood_surface(&out.ensemble, network.len())?;
    let argmax = argmax_vertices(&values);
    let join = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("|");
    let mut detail = format!("observed={};argmax={}", join(observed.infected()), join(&argmax.iter().map(|&v| v as u32).collect::<Vec<_>>()));
    if let Some(s) = source {
        detail.push_str(&format!(";source={s}"));
        if let Some(d) = argmax.iter().filter_map(|&v| manhattan(network, v as u32, s)).max() {
            detail.push_str(&format!(";distance={d}"));
        }
    }
    let s = &out.summary;
    let head = ResultRow {
        estimate: values[argmax[0]],
        ess_min: s.ess_min(),
        resample_count: Some(s.resample_events),
        detail,
        ..base.row(grid.clone(), seed, start)
    };
    if !surface {
        return Ok(vec![head]);
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(v, &value)| {
            let mut tags = Vec::new();
            if source == Some(v as u32) {
                tags.push("source");
            }
            if argmax.contains(&v) {
                tags.push("argmax");
            }
            ResultRow {
                condition: format!("{grid};vertex={v}"),
                estimate: value,
                detail: tags.join("|"),
                ..head.clone()
            }
        })
        .collect())
}

/// Runs every replicate on a pool of `jobs` threads and returns the rows in
/// replicate order.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, RunError> {
    config.validate()?;
    let plan = plan(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let per_replicate: Vec<Vec<ResultRow>> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, &plan, r))
            .collect::<Result<_, _>>()
    })?;
    Ok(per_replicate.into_iter().flatten().collect())
}
