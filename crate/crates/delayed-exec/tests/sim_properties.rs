use delayed_exec::analytic::{choose_zeta, md1_stationary, select_t_star, RateParams, TStarSearch, ZetaSearch};
use delayed_exec::markov::{chain_fractions, honest_chain, legacy_tau_for_ratio, skip_both_chain, HcaStrategy, MinerProfile};
use delayed_exec::profiles;
use delayed_exec::sim::{
    check_invariants, run, run_legacy_fairness, run_with, write_trace, AdversaryStrategy, ChainRule, DelayModel,
    Horizon, LegacyMode, MinerSpec, NetworkConfig, Protocol, RecordKind, RunOptions, SkipFlags, TraceRecord,
};
use proptest::prelude::*;

const I: f64 = 15.0;

fn miners(shares: &[f64]) -> Vec<MinerSpec> {
    shares.iter().map(|&power| MinerSpec { power, c: 1.0 }).collect()
}

fn det(shares: &[f64], delta: f64, zeta: u32, tau: f64, seed: u64, blocks: u64) -> NetworkConfig {
    NetworkConfig {
        miners: miners(shares),
        lambda: 1.0 / I,
        delay: DelayModel::UpTo { delta },
        protocol: Protocol::Det { zeta, tau },
        seed,
        horizon: Horizon::Blocks(blocks),
    }
}

fn strategy(k: u8, t_max: f64) -> AdversaryStrategy {
    match k % 6 {
        0 => AdversaryStrategy::Honest,
        1 => AdversaryStrategy::Withhold { t_max },
        2 => AdversaryStrategy::HiddenChain { variant: HcaStrategy::Rar, omega: 0.5, stall_honest: false },
        3 => AdversaryStrategy::HiddenChain { variant: HcaStrategy::Mar, omega: 0.3, stall_honest: true },
        4 => AdversaryStrategy::Oca { forge_every: 0 },
        _ => AdversaryStrategy::LegacySkip { validation: true, creation: true },
    }
}

fn shares_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 2..6).prop_map(|v| {
        let s: f64 = v.iter().sum();
        let mut out: Vec<f64> = v.iter().map(|x| x / s).collect();
        let rest: f64 = out[1..].iter().sum();
        out[0] = 1.0 - rest;
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_reproducible_and_conserve_blocks(
        shares in shares_strategy(),
        delta in 0.0f64..3.0,
        zeta in 1u32..12,
        tau_ratio in 0.0f64..0.6,
        seed in any::<u64>(),
        kind in any::<u8>(),
    ) {
        let cfg = det(&shares, delta, zeta, tau_ratio * I, seed, 400);
        let s = strategy(kind, 200.0);
        let a = run(&cfg, &s).unwrap();
        let b = run(&cfg, &s).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.mined.iter().sum::<u64>(), a.total_mined);
        prop_assert_eq!(a.main_chain.iter().sum::<u64>(), a.chain_length);
        prop_assert!(a.main_chain.iter().zip(&a.mined).all(|(m, n)| m <= n));
        prop_assert!((0.0..=1.0).contains(&a.mpu));
        prop_assert_eq!(a.fork_count, a.total_mined - a.chain_length);
        prop_assert!(a.adversary_queue_at_arrival.iter().sum::<u64>() <= a.arrivals());
        prop_assert!(a.late_blocks <= a.main_chain[0]);
    }

    /// zeta = 37 is the planned value for an adversary with at most a
    /// quarter of the power (tau/I = 0.5, I/delta = 10).
    #[test]
    fn invariants_hold_under_every_strategy(
        adversary in 0.0f64..=0.25,
        honest in prop::collection::vec(0.1f64..1.0, 1..5),
        seed in any::<u64>(),
        kind in any::<u8>(),
    ) {
        let total: f64 = honest.iter().sum();
        let mut shares = vec![adversary];
        shares.extend(honest.iter().map(|h| h / total * (1.0 - adversary)));
        let cfg = det(&shares, 1.5, 37, 0.5 * I, seed, 600);
        let opts = RunOptions { check_invariants: true, ..RunOptions::default() };
        let out = run_with(&cfg, &strategy(kind % 5, 600.0), &opts).unwrap();
        prop_assert!(out.metrics.invariant_violations.is_empty(), "{:?}", out.metrics.invariant_violations);
    }
}

#[test]
fn single_miner_without_delay_wastes_nothing() {
    for protocol in [Protocol::Det { zeta: 3, tau: 7.5 }, Protocol::Legacy { tau: 3.0, mode: LegacyMode::Full }] {
        let cfg = NetworkConfig {
            miners: miners(&[1.0]),
            lambda: 1.0 / I,
            delay: DelayModel::Uniform { delta: 0.0 },
            protocol,
            seed: 5,
            horizon: Horizon::Blocks(3000),
        };
        let m = run(&cfg, &AdversaryStrategy::Honest).unwrap();
        assert_eq!(m.mpu, 1.0);
        assert_eq!(m.fork_count, 0);
        assert_eq!(m.chain_length, 3000);
    }
}

#[test]
fn seconds_horizon_stops_on_time() {
    let mut cfg = det(&[0.5, 0.5], 1.0, 5, 3.0, 2, 1);
    cfg.horizon = Horizon::Seconds(3000.0);
    let m = run(&cfg, &AdversaryStrategy::Honest).unwrap();
    assert!(m.end_time <= 3000.0);
    // 200 expected blocks; far outside 6 sigma would mean a broken clock
    assert!((110..290).contains(&m.total_mined), "{}", m.total_mined);
}

#[test]
fn configuration_errors_are_reported() {
    let mut cfg = det(&[0.5, 0.5], 1.0, 5, 3.0, 2, 100);
    cfg.miners[1].power = 0.6;
    assert!(run(&cfg, &AdversaryStrategy::Honest).is_err());
    let cfg = det(&[1.0], 1.0, 5, 3.0, 2, 100);
    assert!(run(&cfg, &AdversaryStrategy::Oca { forge_every: 0 }).is_err());
    let cfg = det(&[0.5, 0.5], 1.0, 5, 3.0, 2, 100);
    let bad = AdversaryStrategy::HiddenChain { variant: HcaStrategy::Rar, omega: 1.5, stall_honest: false };
    assert!(run(&cfg, &bad).is_err());
    let mut legacy = cfg.clone();
    legacy.protocol = Protocol::Legacy { tau: 1.0, mode: LegacyMode::Simplified };
    assert!(run(&legacy, &AdversaryStrategy::Withhold { t_max: 10.0 }).is_err());
}

#[test]
fn hidden_chain_without_power_is_honest() {
    let cfg = det(&[0.0, 0.5, 0.5], 1.5, 5, 6.0, 9, 5000);
    for variant in [HcaStrategy::Rar, HcaStrategy::Mar] {
        let m = run(&cfg, &AdversaryStrategy::HiddenChain { variant, omega: 0.5, stall_honest: false }).unwrap();
        assert_eq!(m.mined[0], 0);
        assert_eq!(m.late_blocks, 0);
        assert_eq!(m.late_fraction, 0.0);
    }
}

/// All-honest DET at the planned zeta: the share of arrivals seeing a queue
/// of at least zeta stays under the planning target.
#[test]
fn planned_zeta_dominates_honest_queues() {
    let rates = RateParams::from_ratios(I, 0.25, 0.5, 10.0).unwrap();
    let (zeta, _) = choose_zeta(&rates, 0.001, 0.01, &ZetaSearch::default()).unwrap();
    let cfg = det(&profiles::equal(4), rates.delta, zeta, rates.tau, 3, 200_000);
    let m = run(&cfg, &AdversaryStrategy::Honest).unwrap();
    let over = 1.0 - m.queue_fraction_at_most(zeta as usize - 1);
    assert!(over < 0.01, "{over}");
}

/// Queue sizes seen by Poisson arrivals follow the M/D/1 law (one honest
/// miner, no delay). Sigma comes from independent seeds.
#[test]
fn arrivals_see_the_md1_law() {
    let rho = 0.5;
    let seeds = 12;
    let bins = 6;
    let mut per_seed = vec![Vec::new(); bins];
    for seed in 0..seeds {
        let mut cfg = det(&[1.0], 0.0, 200, rho * I, seed, 100_000);
        cfg.delay = DelayModel::Uniform { delta: 0.0 };
        let m = run(&cfg, &AdversaryStrategy::Honest).unwrap();
        for (k, v) in per_seed.iter_mut().enumerate() {
            v.push(m.queue_at_arrival.get(k).copied().unwrap_or(0) as f64 / m.arrivals() as f64);
        }
    }
    let law = md1_stationary(rho, bins).unwrap();
    for (k, v) in per_seed.iter().enumerate() {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        assert!((mean - law.probabilities[k]).abs() <= 4.0 * se.max(1e-5), "bin {k}: {mean} vs {}", law.probabilities[k]);
    }
}

#[test]
fn legacy_equal_miners_split_evenly() {
    let cfg = NetworkConfig {
        miners: miners(&profiles::equal(4)),
        lambda: 1.0 / I,
        delay: DelayModel::Uniform { delta: 0.0 },
        protocol: Protocol::Legacy { tau: 3.0, mode: LegacyMode::Simplified },
        seed: 11,
        horizon: Horizon::Blocks(400_000),
    };
    let shares = run_legacy_fairness(&cfg, 1.0, SkipFlags::default()).unwrap();
    let sigma = (0.25f64 * 0.75 / 400_000.0).sqrt();
    for s in shares {
        assert!((s - 0.25).abs() < 4.0 * sigma, "{s}");
    }
}

/// Simplified lockstep timing against the fairness chain at one point.
#[test]
fn legacy_lockstep_tracks_the_chain() {
    let shares = profiles::with_first_share(&profiles::top_pools(), 1.0 / 3.0);
    let lambda = 1.0 / I;
    let tau = legacy_tau_for_ratio(0.2, lambda).unwrap();
    let theory = chain_fractions(&honest_chain(&MinerProfile::from_shares(&shares, lambda, 0.5, tau).unwrap()).unwrap())
        .unwrap()[0];
    let cfg = NetworkConfig {
        miners: miners(&shares),
        lambda,
        delay: DelayModel::Uniform { delta: 0.0 },
        protocol: Protocol::Legacy { tau, mode: LegacyMode::Simplified },
        seed: 4,
        horizon: Horizon::Blocks(300_000),
    };
    let sim = run_legacy_fairness(&cfg, 0.5, SkipFlags::default()).unwrap()[0];
    assert!((sim - theory).abs() < 0.005, "{sim} vs {theory}");
}

/// With real propagation delays the skipping adversary does better than
/// the lockstep chain predicts.
#[test]
fn network_delay_helps_the_skipping_adversary() {
    let shares = profiles::with_first_share(&profiles::fifty_miners(), 0.33);
    let lambda = 1.0 / I;
    let tau = legacy_tau_for_ratio(0.2, lambda).unwrap();
    let theory =
        chain_fractions(&skip_both_chain(&MinerProfile::from_shares(&shares, lambda, 0.0, tau).unwrap()).unwrap())
            .unwrap()[0];
    let cfg = NetworkConfig {
        miners: miners(&shares),
        lambda,
        delay: DelayModel::UpTo { delta: 3.0 },
        protocol: Protocol::Legacy { tau, mode: LegacyMode::Full },
        seed: 8,
        horizon: Horizon::Blocks(100_000),
    };
    let full = run_legacy_fairness(&cfg, 0.0, SkipFlags { validation: true, creation: true }).unwrap()[0];
    assert!(full > theory, "{full} <= {theory}");
}

/// Withholding for t* succeeds at most eta of the time (within 3 sigma).
#[test]
fn withholding_beyond_t_star_rarely_wins() {
    let rates = RateParams::from_ratios(I, 0.25, 0.5, 10.0).unwrap();
    let eta = 0.01;
    let t_star = select_t_star(&rates, eta, TStarSearch::default()).unwrap();
    let cfg = det(&[0.25, 0.25, 0.25, 0.25], rates.delta, 37, rates.tau, 21, 100_000);
    let m = run(&cfg, &AdversaryStrategy::Withhold { t_max: t_star }).unwrap();
    let w = m.withhold.unwrap();
    assert!(w.attempts > 100, "{w:?}");
    let p = w.successes as f64 / w.attempts as f64;
    let sigma = (eta * (1.0 - eta) / w.attempts as f64).sqrt();
    assert!(p <= eta + 3.0 * sigma, "{p} with {w:?}");
    assert!(w.accepted_blocks <= w.released_blocks);
}

#[test]
fn broken_rule_is_caught() {
    let cfg = det(&[0.25, 0.25, 0.25, 0.25], 1.5, 37, 7.5, 1, 2000);
    let opts = RunOptions { rule: ChainRule::LongestKnown, check_invariants: true, record_events: false };
    let out = run_with(&cfg, &AdversaryStrategy::Oca { forge_every: 3 }, &opts).unwrap();
    assert!(!out.metrics.invariant_violations.is_empty());
    let trace = out.trace.expect("trace is kept when checking");
    assert_eq!(check_invariants(&trace), out.metrics.invariant_violations);
}

#[test]
fn trace_export_is_line_delimited() {
    let cfg = det(&[0.5, 0.5], 1.0, 4, 5.0, 3, 60);
    let opts = RunOptions { record_events: true, ..RunOptions::default() };
    let out = run_with(&cfg, &AdversaryStrategy::Honest, &opts).unwrap();
    assert!(!out.records.is_empty());
    let mut buf = Vec::new();
    write_trace(&mut buf, &out.records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<TraceRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, out.records);
    assert!(back.windows(2).all(|w| w[0].time <= w[1].time));
    let mined = back.iter().filter(|r| r.event == RecordKind::Mined).count() as u64;
    assert_eq!(mined, out.metrics.total_mined);
}
