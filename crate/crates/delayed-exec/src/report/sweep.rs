use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::overrides::apply_override;
use super::table::{mean_ci, SweepResult};
use super::ReportError;
use crate::sim::{run, run_batch, RunMetrics, Scenario, SimError};

/// Scalar metrics a sweep can report. `queue_at_most:K` and
/// `adversary_queue_at_least:K` take a queue size.
pub const METRIC_NAMES: [&str; 9] = [
    "mpu",
    "es_fraction",
    "late_fraction",
    "fork_fraction",
    "adversary_share",
    "chain_length",
    "withhold_success",
    "queue_at_most:K",
    "adversary_queue_at_least:K",
];

/// A base scenario, a grid of dotted paths into it and the seeds to run at
/// every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: Scenario,
    /// Path to values; axes are listed in key order.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
}

fn default_seeds() -> Vec<u64> {
    (0..4).collect()
}

fn default_metrics() -> Vec<String> {
    vec!["mpu".into(), "adversary_share".into(), "late_fraction".into()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Metric {
    Mpu,
    EsFraction,
    LateFraction,
    ForkFraction,
    AdversaryShare,
    ChainLength,
    WithholdSuccess,
    QueueAtMost(usize),
    AdversaryQueueAtLeast(usize),
}

fn parse_metric(name: &str) -> Result<Metric, ReportError> {
    let unknown = || ReportError::Config(format!("unknown metric {name:?}; expected one of {}", METRIC_NAMES.join(", ")));
    if let Some((head, k)) = name.split_once(':') {
        let k: usize = k.parse().map_err(|_| ReportError::Config(format!("metric {name:?}: bad queue size")))?;
        return match head {
            "queue_at_most" => Ok(Metric::QueueAtMost(k)),
            "adversary_queue_at_least" => Ok(Metric::AdversaryQueueAtLeast(k)),
            _ => Err(unknown()),
        };
    }
    Ok(match name {
        "mpu" => Metric::Mpu,
        "es_fraction" => Metric::EsFraction,
        "late_fraction" => Metric::LateFraction,
        "fork_fraction" => Metric::ForkFraction,
        "adversary_share" => Metric::AdversaryShare,
        "chain_length" => Metric::ChainLength,
        "withhold_success" => Metric::WithholdSuccess,
        _ => return Err(unknown()),
    })
}

impl Metric {
    fn of(self, m: &RunMetrics) -> f64 {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        match self {
            Metric::Mpu => m.mpu,
            Metric::EsFraction => m.es_fraction,
            Metric::LateFraction => m.late_fraction,
            Metric::ForkFraction => ratio(m.fork_count, m.total_mined),
            Metric::AdversaryShare => m.share_of_main_chain(0),
            Metric::ChainLength => m.chain_length as f64,
            Metric::WithholdSuccess => m.withhold.map_or(0.0, |w| ratio(w.successes, w.attempts)),
            Metric::QueueAtMost(k) => m.queue_fraction_at_most(k),
            Metric::AdversaryQueueAtLeast(k) => m.adversary_fraction_at_least(k),
        }
    }
}

/// Value of a named metric for one run.
pub fn metric_value(name: &str, m: &RunMetrics) -> Result<f64, ReportError> {
    Ok(parse_metric(name)?.of(m))
}

/// Runs every (grid point, seed) pair and reports per-point means with
/// 95% half-widths over seeds.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult, ReportError> {
    if spec.seeds.is_empty() {
        return Err(ReportError::Config("a sweep needs at least one seed".into()));
    }
    if spec.metrics.is_empty() {
        return Err(ReportError::Config("a sweep needs at least one metric".into()));
    }
    let parsed = spec.metrics.iter().map(|n| parse_metric(n)).collect::<Result<Vec<_>, _>>()?;
    let axes: Vec<&str> = spec.grid.keys().map(String::as_str).collect();
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for values in spec.grid.values() {
        if values.is_empty() {
            return Err(ReportError::Config("every grid axis needs at least one value".into()));
        }
        points = points.iter().flat_map(|p| values.iter().map(move |v| [p.as_slice(), &[*v]].concat())).collect();
    }
    let base = serde_json::to_value(&spec.scenario)?;
    let mut scenarios = Vec::with_capacity(points.len());
    for p in &points {
        let mut doc = base.clone();
        for (path, v) in axes.iter().zip(p) {
            apply_override(&mut doc, path, serde_json::json!(v))?;
        }
        let s: Scenario = serde_json::from_value(doc)
            .map_err(|e| ReportError::Config(format!("grid point {p:?}: {e}")))?;
        s.network.validate().map_err(|e| ReportError::Config(format!("grid point {p:?}: {e}")))?;
        scenarios.push(s);
    }
    let jobs: Vec<(usize, u64)> =
        (0..points.len()).flat_map(|i| spec.seeds.iter().map(move |&s| (i, s))).collect();
    let runs = run_batch(&jobs, workers, |&(i, seed)| {
        let mut s = scenarios[i].clone();
        s.network.seed = seed;
        run(&s.network, &s.strategy).map_err(|e| SimError::Config(format!("grid point {:?}: {e}", points[i])))
    })?;
    let metrics: Vec<&str> = spec.metrics.iter().map(String::as_str).collect();
    let mut table = SweepResult::new("sweep", &axes, &metrics);
    let per = spec.seeds.len();
    for (i, p) in points.into_iter().enumerate() {
        let chunk = &runs[i * per..(i + 1) * per];
        let mut values = Vec::new();
        let mut widths = Vec::new();
        for metric in &parsed {
            let samples: Vec<f64> = chunk.iter().map(|m| metric.of(m)).collect();
            let (mean, hw) = mean_ci(&samples);
            values.push(mean);
            widths.push(hw);
        }
        table.push_with_ci(p, values, widths);
    }
    table.sort();
    Ok(table)
}
