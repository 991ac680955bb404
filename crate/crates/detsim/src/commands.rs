use std::path::Path;
use std::process::ExitCode;

use delayed_exec::analytic::{choose_zeta, select_t_star, QueueTailBound, RateParams, ZetaSearch};
use delayed_exec::markov::HcaStrategy;
use delayed_exec::report::{
    figure_table, run_sweep, write_atomic, write_table, FigureId, FigureParams, SweepResult, SweepSpec,
};
use delayed_exec::sim::{
    run_batch, run_with, write_trace, AdversaryStrategy, ChainRule, DelayModel, Horizon, MinerSpec, NetworkConfig,
    Protocol, RunMetrics, RunOptions, Scenario, Violation,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::load::{load, parse_seeds};
use crate::Common;

/// Rate setting for `plan`. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    /// Mean block interval; the block rate is 1/interval blocks/second.
    pub interval: f64,
    /// Largest adversary share of mining power.
    pub f_max: f64,
    /// Processing time of one block.
    pub tau: f64,
    /// Largest network delay.
    pub delta: f64,
    pub eta: f64,
    pub target: f64,
    /// Report the bound at this zeta instead of searching.
    pub zeta: Option<u32>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { interval: 15.0, f_max: 0.25, tau: 7.5, delta: 1.5, eta: 0.001, target: 0.01, zeta: None }
    }
}

#[derive(Serialize)]
struct PlanReport {
    zeta: u32,
    meets_target: bool,
    rates: RateParams,
    bound: QueueTailBound,
}

fn out_dir(c: &Common) -> Option<&Path> {
    c.out.as_deref()
}

fn pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Report(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `<out>/<name>` or prints it when there is no --out.
fn emit(c: &Common, name: &str, text: &str) -> Result<(), CliError> {
    match out_dir(c) {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            write_atomic(&dir.join(name), text.as_bytes()).map_err(CliError::from)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn no_seeds(c: &Common, cmd: &str) -> Result<(), CliError> {
    if c.seeds.is_some() {
        return Err(CliError::Config(format!("{cmd} takes no --seeds")));
    }
    Ok(())
}

pub fn plan(c: &Common) -> Result<ExitCode, CliError> {
    no_seeds(c, "plan")?;
    let cfg: PlanConfig = load(Some(&PlanConfig::default()), c.config.as_deref(), &c.set)?;
    if !(cfg.interval > 0.0) {
        return Err(CliError::Config(format!("interval must be > 0, got {}", cfg.interval)));
    }
    let rates = RateParams::new(1.0 / cfg.interval, cfg.f_max, cfg.tau, cfg.delta)?;
    let search = ZetaSearch::default();
    let (zeta, bound) = match cfg.zeta {
        Some(z) => {
            let t_star = select_t_star(&rates, cfg.eta, search.t_star)?;
            (z, search.best_bound(&rates, z, t_star)?)
        }
        None => choose_zeta(&rates, cfg.eta, cfg.target, &search)?,
    };
    let report = PlanReport { zeta, meets_target: bound.total < cfg.target, rates, bound };
    emit(c, "plan.json", &pretty(&json!({"config": cfg, "plan": report}))?)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SeedMetrics {
    seed: u64,
    metrics: RunMetrics,
}

pub fn simulate(c: &Common, check: bool, trace: bool) -> Result<ExitCode, CliError> {
    let scenario: Scenario = load(None, c.config.as_deref(), &c.set)?;
    let seeds = c.seeds.as_deref().map(parse_seeds).transpose()?;
    if trace && (out_dir(c).is_none() || seeds.as_ref().is_some_and(|s| s.len() != 1)) {
        return Err(CliError::Config("--trace needs --out and at most one seed".into()));
    }
    let opts = RunOptions { rule: ChainRule::LongestValidated, check_invariants: check, record_events: trace };
    let list = seeds.clone().unwrap_or_else(|| vec![scenario.network.seed]);
    let outputs = run_batch(&list, c.workers, |&seed| {
        let mut net = scenario.network.clone();
        net.seed = seed;
        run_with(&net, &scenario.strategy, &opts)
    })?;
    if trace {
        let mut buf = Vec::new();
        write_trace(&mut buf, &outputs[0].records).map_err(|e| CliError::Io(e.to_string()))?;
        emit(c, "trace.jsonl", std::str::from_utf8(&buf).expect("json is utf-8"))?;
    }
    let text = match seeds {
        None => pretty(&outputs[0].metrics)?,
        Some(_) => pretty(
            &list.iter().zip(&outputs).map(|(&seed, o)| SeedMetrics { seed, metrics: o.metrics.clone() }).collect::<Vec<_>>(),
        )?,
    };
    emit(c, "metrics.json", &text)?;
    Ok(ExitCode::SUCCESS)
}

fn emit_table(c: &Common, table: &SweepResult, manifest: serde_json::Value, stem: &str) -> Result<(), CliError> {
    match out_dir(c) {
        Some(dir) => {
            write_table(table, &manifest, dir, stem)?;
            Ok(())
        }
        None => {
            print!("{}", table.to_csv()?);
            Ok(())
        }
    }
}

pub fn sweep(c: &Common) -> Result<ExitCode, CliError> {
    let mut spec: SweepSpec = load(None, c.config.as_deref(), &c.set)?;
    if let Some(s) = &c.seeds {
        spec.seeds = parse_seeds(s)?;
    }
    let table = run_sweep(&spec, c.workers)?;
    emit_table(c, &table, json!({"command": "sweep", "spec": spec}), "sweep")?;
    Ok(ExitCode::SUCCESS)
}

pub fn reproduce(figure: &str, c: &Common) -> Result<ExitCode, CliError> {
    let ids: Vec<FigureId> = if figure == "all" {
        if out_dir(c).is_none() {
            return Err(CliError::Config("reproduce all needs --out".into()));
        }
        FigureId::ALL.to_vec()
    } else {
        vec![figure.parse::<FigureId>()?]
    };
    let mut params: FigureParams = load(Some(&FigureParams::default()), c.config.as_deref(), &c.set)?;
    if let Some(s) = &c.seeds {
        params.seeds = parse_seeds(s)?;
    }
    for id in ids {
        let table = figure_table(id, &params, c.workers)?;
        let manifest = json!({"command": "reproduce", "figure": id, "params": params});
        emit_table(c, &table, manifest, id.as_str())?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Strategies, network and chain rule for `fuzz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzConfig {
    pub network: NetworkConfig,
    pub strategies: Vec<AdversaryStrategy>,
    #[serde(default)]
    pub rule: ChainRule,
    pub seeds: Vec<u64>,
}

impl FuzzConfig {
    /// Five miners, the adversary with a quarter of the power, delays drawn
    /// up to delta; zeta and the withholding time come from the planner.
    pub fn planned_default() -> Result<Self, CliError> {
        let (interval, f, tau_ratio, delay_ratio) = (15.0, 0.25, 0.5, 10.0);
        let rates = RateParams::from_ratios(interval, f, tau_ratio, delay_ratio)?;
        let (zeta, bound) = choose_zeta(&rates, 0.001, 0.01, &ZetaSearch::default())?;
        let mut miners = vec![MinerSpec { power: f, c: 1.0 }];
        miners.extend((0..4).map(|_| MinerSpec { power: (1.0 - f) / 4.0, c: 1.0 }));
        let hidden = |variant| AdversaryStrategy::HiddenChain { variant, omega: 0.5, stall_honest: false };
        Ok(FuzzConfig {
            network: NetworkConfig {
                miners,
                lambda: 1.0 / interval,
                delay: DelayModel::UpTo { delta: rates.delta },
                protocol: Protocol::Det { zeta, tau: rates.tau },
                seed: 0,
                horizon: Horizon::Blocks(2000),
            },
            strategies: vec![
                AdversaryStrategy::Honest,
                AdversaryStrategy::Withhold { t_max: bound.t_star },
                hidden(HcaStrategy::Rar),
                hidden(HcaStrategy::Mar),
                AdversaryStrategy::Oca { forge_every: 3 },
            ],
            rule: ChainRule::LongestValidated,
            seeds: (0..20).collect(),
        })
    }
}

#[derive(Serialize)]
struct FuzzRun {
    strategy: &'static str,
    seed: u64,
    /// Violations listed by the checker (capped per kind, plus one summary
    /// entry per kind when capped).
    violations: usize,
    first: Vec<Violation>,
}

pub fn fuzz(c: &Common) -> Result<ExitCode, CliError> {
    let mut cfg: FuzzConfig = load(Some(&FuzzConfig::planned_default()?), c.config.as_deref(), &c.set)?;
    if let Some(s) = &c.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    let jobs: Vec<(usize, u64)> =
        (0..cfg.strategies.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let opts = RunOptions { rule: cfg.rule, check_invariants: true, record_events: false };
    let outputs = run_batch(&jobs, c.workers, |&(i, seed)| {
        let mut net = cfg.network.clone();
        net.seed = seed;
        run_with(&net, &cfg.strategies[i], &opts)
    })?;
    let runs: Vec<FuzzRun> = jobs
        .iter()
        .zip(outputs)
        .map(|(&(i, seed), o)| {
            let v = o.metrics.invariant_violations;
            FuzzRun { strategy: cfg.strategies[i].name(), seed, violations: v.len(), first: v.into_iter().take(3).collect() }
        })
        .collect();
    let total: usize = runs.iter().map(|r| r.violations).sum();
    emit(c, "fuzz.json", &pretty(&json!({"config": cfg, "total_violations": total, "runs": runs}))?)?;
    Ok(if total == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
