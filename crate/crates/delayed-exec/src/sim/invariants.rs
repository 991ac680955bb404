use super::metrics::{Violation, ViolationKind};
use super::trace::Trace;
use crate::protocol::GENESIS;

/// Violations reported per kind; further ones are only counted in the last entry.
const MAX_REPORTED: usize = 100;
const EPS: f64 = 1e-9;
/// Length of the chain-growth windows, in mean block intervals.
const WINDOW_INTERVALS: f64 = 30.0;

struct Sink {
    out: Vec<Violation>,
    counts: [usize; 3],
}

impl Sink {
    fn push(&mut self, kind: ViolationKind, time: f64, detail: impl FnOnce() -> String) {
        let k = kind as usize;
        self.counts[k] += 1;
        if self.counts[k] <= MAX_REPORTED {
            self.out.push(Violation { kind, time, detail: detail() });
        }
    }
}

/// Checks a finished run against the three properties honest miners rely on:
/// blocks mined more than delta apart have increasing heights, the shortest
/// honest chain grows by at least the number of delta-separated honest blocks
/// in a window, and every honest non-empty-state block is validated by all
/// honest miners within delta of being mined.
pub fn check_invariants(trace: &Trace) -> Vec<Violation> {
    let mut sink = Sink { out: Vec::new(), counts: [0; 3] };
    let d = trace.delta;
    let mut honest: Vec<usize> = trace
        .blocks
        .iter()
        .enumerate()
        .filter(|(i, b)| *i != GENESIS.index() && trace.is_honest(b.miner))
        .map(|(i, _)| i)
        .collect();
    honest.sort_by(|&a, &b| trace.blocks[a].mined_at.total_cmp(&trace.blocks[b].mined_at).then(a.cmp(&b)));

    // Height order, via the suffix minimum of heights in mining order.
    let times: Vec<f64> = honest.iter().map(|&i| trace.blocks[i].mined_at).collect();
    let mut suffix_min = vec![u64::MAX; honest.len() + 1];
    for k in (0..honest.len()).rev() {
        suffix_min[k] = suffix_min[k + 1].min(trace.blocks[honest[k]].height);
    }
    let mut k = 0;
    for (pos, &i) in honest.iter().enumerate() {
        let b = &trace.blocks[i];
        k = k.max(pos);
        while k < times.len() && times[k] <= b.mined_at + d + EPS {
            k += 1;
        }
        if suffix_min[k] <= b.height {
            sink.push(ViolationKind::HeightOrder, b.mined_at, || {
                format!("block {} at height {} is followed more than delta later by an honest block at height {}", i, b.height, suffix_min[k])
            });
        }
    }

    // Validation within delta.
    for &i in &honest {
        let b = &trace.blocks[i];
        if b.is_es {
            continue;
        }
        for (j, validated) in trace.validated_at.iter().enumerate() {
            if validated[i] > b.mined_at + d + EPS {
                sink.push(ViolationKind::LateValidation, b.mined_at, || {
                    format!("block {} mined at {:.3} validated by miner {} at {:.3}", i, b.mined_at, trace.honest_miners[j].0, validated[i])
                });
            }
        }
    }

    // Chain growth over windows [s, s + T].
    let full: Vec<usize> = honest.iter().copied().filter(|&i| !trace.blocks[i].is_es).collect();
    let full_times: Vec<f64> = full.iter().map(|&i| trace.blocks[i].mined_at).collect();
    let mut prefix_max = Vec::with_capacity(full.len());
    let mut m = 0;
    for &i in &full {
        m = m.max(trace.blocks[i].height);
        prefix_max.push(m);
    }
    let window = WINDOW_INTERVALS * trace.interval;
    let step = trace.interval;
    let mut s = 0.0;
    while s + window <= trace.end_time {
        let before = full_times.partition_point(|&t| t <= s);
        let base = if before == 0 { 0 } else { prefix_max[before - 1] };
        let mut n = 0u64;
        let mut idx = full_times.partition_point(|&t| t < s + d - EPS);
        while idx < full_times.len() && full_times[idx] <= s + window - d + EPS {
            n += 1;
            let after = full_times[idx] + d - EPS;
            idx += 1 + full_times[idx + 1..].partition_point(|&t| t < after);
        }
        let end = s + window;
        let shortest = trace
            .head_history
            .iter()
            .map(|h| {
                let p = h.partition_point(|&(t, _)| t <= end);
                if p == 0 {
                    0
                } else {
                    h[p - 1].1
                }
            })
            .min()
            .unwrap_or(0);
        if shortest < base + n {
            sink.push(ViolationKind::ChainGrowth, s, || {
                format!("window [{:.1}, {:.1}]: shortest honest chain {} < {} + {} selected honest blocks", s, end, shortest, base, n)
            });
        }
        s += step;
    }

    for (k, &c) in sink.counts.iter().enumerate() {
        if c > MAX_REPORTED {
            let kind = [ViolationKind::HeightOrder, ViolationKind::ChainGrowth, ViolationKind::LateValidation][k];
            sink.out.push(Violation { kind, time: trace.end_time, detail: format!("{} further violations not listed", c - MAX_REPORTED) });
        }
    }
    sink.out
}
