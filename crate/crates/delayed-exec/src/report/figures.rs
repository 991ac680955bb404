use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::table::{mean_ci, SweepResult};
use super::ReportError;
use crate::analytic::{choose_zeta, md1_stationary, AnalyticError, RateParams, ZetaSearch};
use crate::markov::{
    build_hca_chain, chain_fractions, hca_late_fraction, honest_chain, legacy_tau_for_ratio, skip_both_chain,
    skip_creation_only_chain, HcaParams, HcaStrategy, MinerProfile,
};
use crate::profiles;
use crate::sim::{
    run, run_batch, AdversaryStrategy, DelayModel, Horizon, MinerSpec, NetworkConfig, Protocol, RunMetrics, SimError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    /// Share of blocks mined by a faster honest miner against tau/I.
    Fig2,
    /// Planned zeta against I/Delta.
    Fig9,
    /// Share of blocks mined by a skipping adversary against tau/I.
    Fig11,
    /// Honest-only queue overflow bound against I/Delta.
    Fig13,
    /// Simulated queue sizes seen by arriving blocks.
    QueueHist,
    /// Hidden-chain late fractions, Markov chain against simulation.
    HcaCompare,
}

impl FigureId {
    pub const ALL: [FigureId; 6] =
        [FigureId::Fig2, FigureId::Fig9, FigureId::Fig11, FigureId::Fig13, FigureId::QueueHist, FigureId::HcaCompare];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig9 => "fig9",
            FigureId::Fig11 => "fig11",
            FigureId::Fig13 => "fig13",
            FigureId::QueueHist => "queue_hist",
            FigureId::HcaCompare => "hca_compare",
        }
    }

    /// Whether the table comes from seeded simulation rather than formulas.
    pub fn is_simulated(self) -> bool {
        matches!(self, FigureId::QueueHist | FigureId::HcaCompare)
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| ReportError::UnknownFigure(s.to_string()))
    }
}

/// Grid for the legacy fairness figures. Miner 0 takes `share` of the
/// power, the others are the 14 large pools scaled to the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairnessGrid {
    pub share: f64,
    /// tau/I with the legacy interval I = 2 tau + 1/lambda.
    pub tau_ratios: Vec<f64>,
    /// Processing-time ratios of miner 0.
    pub c: Vec<f64>,
}

impl Default for FairnessGrid {
    fn default() -> Self {
        FairnessGrid {
            share: 1.0 / 3.0,
            tau_ratios: vec![0.0, 0.011, 0.05, 0.1, 0.122, 0.15, 0.205, 0.26],
            c: vec![0.0, 0.2, 0.5, 0.6, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZetaGrid {
    pub f_max: Vec<f64>,
    pub tau_ratios: Vec<f64>,
    /// I/Delta values.
    pub delay_ratios: Vec<f64>,
}

impl Default for ZetaGrid {
    fn default() -> Self {
        ZetaGrid { f_max: vec![0.25, 0.33], tau_ratios: vec![0.33, 0.5], delay_ratios: delay_ratios() }
    }
}

fn delay_ratios() -> Vec<f64> {
    vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HonestGrid {
    pub zetas: Vec<u32>,
    pub tau_ratio: f64,
    pub delay_ratios: Vec<f64>,
}

impl Default for HonestGrid {
    fn default() -> Self {
        HonestGrid { zetas: vec![10, 15, 20], tau_ratio: 0.5, delay_ratios: delay_ratios() }
    }
}

/// DET network of 50 miners where miner 0 skips validation and creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueHistParams {
    pub tau_ratio: f64,
    pub delay_ratio: f64,
    /// Adversary share assumed when planning zeta.
    pub f_max: f64,
    /// Fixed zeta; planned with `f_max` when absent.
    pub zeta: Option<u32>,
    pub blocks: u64,
    /// Largest queue size listed; the last row also counts larger queues.
    pub max_queue: usize,
}

impl Default for QueueHistParams {
    fn default() -> Self {
        QueueHistParams { tau_ratio: 0.379, delay_ratio: 10.0, f_max: 0.33, zeta: None, blocks: 100_000, max_queue: 12 }
    }
}

/// Two miners, the adversary with share `f`, no network delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HcaCompareParams {
    pub f: Vec<f64>,
    pub zetas: Vec<u32>,
    pub tau_ratio: f64,
    pub omega: f64,
    pub stall_honest: bool,
    pub blocks: u64,
}

impl Default for HcaCompareParams {
    fn default() -> Self {
        HcaCompareParams {
            f: vec![0.25, 0.33],
            zetas: vec![2, 5, 10],
            tau_ratio: 0.05,
            omega: 0.5,
            stall_honest: true,
            blocks: 1_000_000,
        }
    }
}

/// Inputs of every figure. Times are seconds, rates blocks/second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureParams {
    /// Mean block interval I.
    pub interval: f64,
    /// Allowed success probability of a withholding attempt.
    pub eta: f64,
    /// Target overflow probability for planning zeta.
    pub target: f64,
    /// Seeds of the simulated figures.
    pub seeds: Vec<u64>,
    pub fairness: FairnessGrid,
    pub zeta: ZetaGrid,
    pub honest: HonestGrid,
    pub queue: QueueHistParams,
    pub hca: HcaCompareParams,
}

impl Default for FigureParams {
    fn default() -> Self {
        FigureParams {
            interval: 15.0,
            eta: 0.001,
            target: 0.01,
            seeds: (0..20).collect(),
            fairness: FairnessGrid::default(),
            zeta: ZetaGrid::default(),
            honest: HonestGrid::default(),
            queue: QueueHistParams::default(),
            hca: HcaCompareParams::default(),
        }
    }
}

/// Computes one figure's table; rows are sorted by axis. `workers` bounds
/// the thread pool used for independent points and seeds.
pub fn figure_table(id: FigureId, params: &FigureParams, workers: Option<usize>) -> Result<SweepResult, ReportError> {
    if !(params.interval > 0.0) {
        return Err(ReportError::Config(format!("interval must be > 0, got {}", params.interval)));
    }
    let mut table = match id {
        FigureId::Fig2 => fairness(params, false)?,
        FigureId::Fig11 => fairness(params, true)?,
        FigureId::Fig9 => zeta_table(params, workers)?,
        FigureId::Fig13 => honest_table(params)?,
        FigureId::QueueHist => queue_hist(params, workers)?,
        FigureId::HcaCompare => hca_compare(params, workers)?,
    };
    table.sort();
    Ok(table)
}

fn fairness(params: &FigureParams, skipping: bool) -> Result<SweepResult, ReportError> {
    let g = &params.fairness;
    let shares = profiles::with_first_share(&profiles::top_pools(), g.share);
    let lambda = 1.0 / params.interval;
    let mut table = if skipping {
        SweepResult::new("fig11", &["tau_ratio", "c"], &["skip_both", "skip_creation"])
    } else {
        SweepResult::new("fig2", &["tau_ratio", "c"], &["fraction"])
    };
    for &ratio in &g.tau_ratios {
        let tau = legacy_tau_for_ratio(ratio, lambda)?;
        for &c in &g.c {
            let profile = MinerProfile::from_shares(&shares, lambda, c, tau)?;
            let values = if skipping {
                vec![
                    chain_fractions(&skip_both_chain(&profile)?)?[0],
                    chain_fractions(&skip_creation_only_chain(&profile)?)?[0],
                ]
            } else {
                vec![chain_fractions(&honest_chain(&profile)?)?[0]]
            };
            table.push(vec![ratio, c], values);
        }
    }
    Ok(table)
}

/// Errors that mean "no feasible zeta at this point" and become NaN rows.
fn infeasible(e: &AnalyticError) -> bool {
    matches!(e, AnalyticError::Utilization { .. } | AnalyticError::Saturation { .. } | AnalyticError::NoFiniteTStar { .. })
}

fn zeta_table(params: &FigureParams, workers: Option<usize>) -> Result<SweepResult, ReportError> {
    let g = &params.zeta;
    let mut points = Vec::new();
    for &f in &g.f_max {
        for &tr in &g.tau_ratios {
            for &dr in &g.delay_ratios {
                points.push((f, tr, dr));
            }
        }
    }
    let search = ZetaSearch::default();
    let results = run_batch(&points, workers, |&(f, tr, dr)| {
        Ok(RateParams::from_ratios(params.interval, f, tr, dr)
            .and_then(|p| choose_zeta(&p, params.eta, params.target, &search)))
    })?;
    let mut table = SweepResult::new(
        "fig9",
        &["f_max", "tau_ratio", "delay_ratio"],
        &["zeta", "bound", "md1_tail", "burst_tail", "t_star", "eps0", "eps1", "s0"],
    );
    for (&(f, tr, dr), res) in points.iter().zip(results) {
        let values = match res {
            Ok((z, b)) => vec![z as f64, b.total, b.md1_tail, b.burst_tail, b.t_star, b.eps0, b.eps1, b.s0],
            Err(e) if infeasible(&e) => vec![f64::NAN; 8],
            Err(e) => return Err(e.into()),
        };
        table.push(vec![f, tr, dr], values);
    }
    Ok(table)
}

fn honest_table(params: &FigureParams) -> Result<SweepResult, ReportError> {
    let g = &params.honest;
    let search = ZetaSearch::default();
    let mut table = SweepResult::new("fig13", &["zeta", "delay_ratio"], &["bound", "eps0", "s0"]);
    for &z in &g.zetas {
        for &dr in &g.delay_ratios {
            let p = RateParams::from_ratios(params.interval, 0.0, g.tau_ratio, dr)?;
            let values = match search.best_bound(&p, z, 0.0) {
                Ok(b) => vec![b.total, b.eps0, b.s0],
                Err(e) if infeasible(&e) => vec![f64::NAN; 3],
                Err(e) => return Err(e.into()),
            };
            table.push(vec![z as f64, dr], values);
        }
    }
    Ok(table)
}

fn check_seeds(params: &FigureParams) -> Result<(), ReportError> {
    if params.seeds.is_empty() {
        return Err(ReportError::Config("simulated figures need at least one seed".into()));
    }
    Ok(())
}

/// The planned zeta of the queue histogram setting.
pub(crate) fn queue_zeta(params: &FigureParams) -> Result<u32, ReportError> {
    let q = &params.queue;
    match q.zeta {
        Some(z) => Ok(z),
        None => {
            let p = RateParams::from_ratios(params.interval, q.f_max, q.tau_ratio, q.delay_ratio)?;
            Ok(choose_zeta(&p, params.eta, params.target, &ZetaSearch::default())?.0)
        }
    }
}

fn queue_hist(params: &FigureParams, workers: Option<usize>) -> Result<SweepResult, ReportError> {
    check_seeds(params)?;
    let q = &params.queue;
    let zeta = queue_zeta(params)?;
    let tau = q.tau_ratio * params.interval;
    let miners: Vec<MinerSpec> = profiles::fifty_miners().into_iter().map(|power| MinerSpec { power, c: 1.0 }).collect();
    let strategy = AdversaryStrategy::LegacySkip { validation: true, creation: true };
    let runs: Vec<RunMetrics> = run_batch(&params.seeds, workers, |&seed| {
        let cfg = NetworkConfig {
            miners: miners.clone(),
            lambda: 1.0 / params.interval,
            delay: DelayModel::Uniform { delta: params.interval / q.delay_ratio },
            protocol: Protocol::Det { zeta, tau },
            seed,
            horizon: Horizon::Blocks(q.blocks),
        };
        run(&cfg, &strategy)
    })?;
    let md1 = md1_stationary(tau / params.interval, q.max_queue + 1)?;
    let mut table = SweepResult::new("queue_hist", &["queue"], &["fraction", "at_most", "md1"]);
    for k in 0..=q.max_queue {
        let last = k == q.max_queue;
        let per_seed = |cumulative: bool| -> Vec<f64> {
            runs.iter()
                .map(|m| {
                    let n = m.arrivals().max(1) as f64;
                    let h = &m.queue_at_arrival;
                    let count: u64 = if cumulative {
                        h.iter().take(k + 1).sum()
                    } else if last {
                        h.iter().skip(k).sum()
                    } else {
                        h.get(k).copied().unwrap_or(0)
                    };
                    count as f64 / n
                })
                .collect()
        };
        let (frac, frac_ci) = mean_ci(&per_seed(false));
        let (cum, cum_ci) = mean_ci(&per_seed(true));
        let reference = if last { md1.tail_from(k) } else { md1.probabilities[k] };
        table.push_with_ci(vec![k as f64], vec![frac, cum, reference], vec![frac_ci, cum_ci, None]);
    }
    Ok(table)
}

fn hca_compare(params: &FigureParams, workers: Option<usize>) -> Result<SweepResult, ReportError> {
    check_seeds(params)?;
    let h = &params.hca;
    let lambda = 1.0 / params.interval;
    let tau = h.tau_ratio * params.interval;
    let mut points = Vec::new();
    for &f in &h.f {
        for &z in &h.zetas {
            for variant in [HcaStrategy::Rar, HcaStrategy::Mar] {
                points.push((f, z, variant));
            }
        }
    }
    let mut jobs = Vec::new();
    for (p, _) in points.iter().enumerate() {
        for &seed in &params.seeds {
            jobs.push((p, seed));
        }
    }
    let sims = run_batch(&jobs, workers, |&(p, seed)| {
        let (f, zeta, variant) = points[p];
        let cfg = NetworkConfig {
            miners: vec![MinerSpec { power: f, c: 1.0 }, MinerSpec { power: 1.0 - f, c: 1.0 }],
            lambda,
            delay: DelayModel::Uniform { delta: 0.0 },
            protocol: Protocol::Det { zeta, tau },
            seed,
            horizon: Horizon::Blocks(h.blocks),
        };
        let strategy = AdversaryStrategy::HiddenChain { variant, omega: h.omega, stall_honest: h.stall_honest };
        let m = run(&cfg, &strategy)?;
        Ok((m.late_fraction, m.share_of_main_chain(0)))
    })?;
    let theory = run_batch(&points, workers, |&(f, zeta, variant)| {
        let mut hp = HcaParams::new(zeta, tau, (1.0 - f) * lambda, f * lambda, variant);
        hp.omega = h.omega;
        build_hca_chain(hp)
            .and_then(|c| hca_late_fraction(&c))
            .map_err(|e| SimError::Config(format!("hidden-chain analysis at f={f}, zeta={zeta}: {e}")))
    })?;
    let mut table = SweepResult::new(
        "hca_compare",
        &["f", "zeta", "mar"],
        &["theory_late", "sim_late", "rel_error", "theory_adv_share", "sim_adv_share"],
    );
    let per = params.seeds.len();
    for (p, &(f, z, variant)) in points.iter().enumerate() {
        let chunk = &sims[p * per..(p + 1) * per];
        let late: Vec<f64> = chunk.iter().map(|s| s.0).collect();
        let share: Vec<f64> = chunk.iter().map(|s| s.1).collect();
        let (late, late_ci) = mean_ci(&late);
        let (share, share_ci) = mean_ci(&share);
        let (th_late, th_share) = theory[p];
        let rel = if th_late > 0.0 { late / th_late - 1.0 } else { f64::NAN };
        table.push_with_ci(
            vec![f, z as f64, if variant == HcaStrategy::Mar { 1.0 } else { 0.0 }],
            vec![th_late, late, rel, th_share, share],
            vec![None, late_ci, None, None, share_ci],
        );
    }
    Ok(table)
}
