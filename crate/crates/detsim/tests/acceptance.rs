//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use delayed_exec::analytic::{choose_zeta, md1_tail, RateParams, ZetaSearch};
use delayed_exec::markov::{
    chain_fractions, hca_late_fraction, build_hca_chain, honest_chain, legacy_tau_for_ratio, oca_late_bound,
    skip_both_chain, HcaParams, HcaStrategy, MinerProfile,
};
use delayed_exec::profiles;
use delayed_exec::sim::{
    run, run_batch, run_legacy_fairness, simulate_md1, AdversaryStrategy, DelayModel, Horizon, LegacyMode, MinerSpec,
    NetworkConfig, Protocol, SimError, SkipFlags,
};

const I: f64 = 15.0;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took > limit {
        return Err(format!("took {:.1} s, limit {:.0} s", took.as_secs_f64(), limit.as_secs_f64()));
    }
    Ok(())
}

fn miners(shares: &[f64]) -> Vec<MinerSpec> {
    shares.iter().map(|&power| MinerSpec { power, c: 1.0 }).collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn planner_anchor() -> Outcome {
    let started = Instant::now();
    let rates = RateParams::from_ratios(I, 0.25, 0.5, 10.0).map_err(|e| e.to_string())?;
    let (zeta, bound) = choose_zeta(&rates, 0.001, 0.01, &ZetaSearch::default()).map_err(|e| e.to_string())?;
    within(Duration::from_secs(10), started)?;
    check(
        (37..=41).contains(&zeta),
        format!("zeta={zeta} (39 +/- 2), bound={:.3e}, t*={:.1} s", bound.total, bound.t_star),
    )
}

fn honest_bound() -> Outcome {
    let rates = RateParams::from_ratios(I, 0.0, 0.5, 10.0).map_err(|e| e.to_string())?;
    let b = ZetaSearch::default().best_bound(&rates, 20, 0.0).map_err(|e| e.to_string())?;
    check(b.total <= 1e-9, format!("bound at zeta=20 is {:.4e} (<= 1e-9)", b.total))
}

fn fairness_floors() -> Outcome {
    let lambda = 1.0 / I;
    let tau = legacy_tau_for_ratio(0.26, lambda).map_err(|e| e.to_string())?;
    let shares = profiles::top_pools();
    let point = |c: f64, skip: bool| -> Result<(f64, Duration), String> {
        let started = Instant::now();
        let p = MinerProfile::from_shares(&shares, lambda, c, tau).map_err(|e| e.to_string())?;
        let m = if skip { skip_both_chain(&p) } else { honest_chain(&p) }.map_err(|e| e.to_string())?;
        let f = chain_fractions(&m).map_err(|e| e.to_string())?[0];
        Ok((f, started.elapsed()))
    };
    let (honest, t1) = point(0.5, false)?;
    let (skip, t2) = point(0.0, true)?;
    let slow = t1.max(t2) > Duration::from_secs(60);
    check(
        (0.46..=0.51).contains(&honest) && (0.53..=0.58).contains(&skip) && !slow,
        format!(
            "miner 0 share {:.2}: honest c=0.5 {honest:.5} (floor 0.46), skip-both c=0 {skip:.5} (floor 0.53), slowest point {:.2} s",
            shares[0],
            t1.max(t2).as_secs_f64()
        ),
    )
}

fn lockstep() -> Outcome {
    let started = Instant::now();
    let lambda = 1.0 / I;
    let shares = profiles::with_first_share(&profiles::top_pools(), 1.0 / 3.0);
    let seeds: Vec<u64> = (0..10).collect();
    let blocks = 200_000;
    let mut points = Vec::new();
    for c in [0.0, 0.5] {
        for ratio in [0.122, 0.26] {
            points.push((c, ratio));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let sims = run_batch(&jobs, None, |&(p, seed)| {
        let (c, ratio) = points[p];
        let tau = legacy_tau_for_ratio(ratio, lambda).map_err(|e| SimError::Config(e.to_string()))?;
        let cfg = NetworkConfig {
            miners: miners(&shares),
            lambda,
            delay: DelayModel::Uniform { delta: 0.0 },
            protocol: Protocol::Legacy { tau, mode: LegacyMode::Simplified },
            seed,
            horizon: Horizon::Blocks(blocks),
        };
        Ok(run_legacy_fairness(&cfg, c, SkipFlags::default())?[0])
    })
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, &(c, ratio)) in points.iter().enumerate() {
        let tau = legacy_tau_for_ratio(ratio, lambda).map_err(|e| e.to_string())?;
        let profile = MinerProfile::from_shares(&shares, lambda, c, tau).map_err(|e| e.to_string())?;
        let theory = chain_fractions(&honest_chain(&profile).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?[0];
        let (mean, sd) = mean_sd(&sims[p * seeds.len()..(p + 1) * seeds.len()]);
        let sigma = sd / (seeds.len() as f64).sqrt();
        let z = (mean - theory) / sigma;
        ok &= z.abs() <= 3.0;
        parts.push(format!("c={c} tau/I={ratio}: {mean:.5} vs {theory:.5} ({z:+.2} sigma)"));
    }
    within(Duration::from_secs(300), started)?;
    check(ok, format!("{} blocks per point; {}", blocks * seeds.len() as u64, parts.join("; ")))
}

fn md1_oracle() -> Outcome {
    let started = Instant::now();
    let arrivals = 10_000_000u64;
    let zetas = [1u64, 5, 10];
    let rhos = [0.3, 0.5, 0.8];
    let runs = run_batch(&rhos, None, |&rho| Ok(simulate_md1(rho, arrivals, 11, &zetas))).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut worst: (f64, String) = (0.0, String::new());
    for (&rho, est) in rhos.iter().zip(&runs) {
        for e in est {
            let theory = md1_tail(rho, e.zeta).map_err(|e| e.to_string())?;
            // batch means can be all zero in the deep tail; the binomial
            // error of the theoretical tail is the floor
            let sigma = e.std_err.max((theory * (1.0 - theory) / arrivals as f64).sqrt());
            let z = (e.fraction - theory) / sigma;
            ok &= z.abs() <= 3.0;
            if z.abs() >= worst.0 {
                worst = (z.abs(), format!("rho={rho} zeta={}: {:.4e} vs {theory:.4e} ({z:+.2} sigma)", e.zeta, e.fraction));
            }
        }
    }
    within(Duration::from_secs(300), started)?;
    check(ok, format!("9 points, {arrivals} arrivals each; worst {}", worst.1))
}

fn queue_floor() -> Outcome {
    let tau_ratio = 0.379;
    let rates = RateParams::from_ratios(I, 0.33, tau_ratio, 10.0).map_err(|e| e.to_string())?;
    let (zeta, _) = choose_zeta(&rates, 0.001, 0.01, &ZetaSearch::default()).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..20).collect();
    let shares = profiles::fifty_miners();
    let fractions = run_batch(&seeds, None, |&seed| {
        let cfg = NetworkConfig {
            miners: miners(&shares),
            lambda: 1.0 / I,
            delay: DelayModel::Uniform { delta: I / 10.0 },
            protocol: Protocol::Det { zeta, tau: tau_ratio * I },
            seed,
            horizon: Horizon::Blocks(100_000),
        };
        let m = run(&cfg, &AdversaryStrategy::LegacySkip { validation: true, creation: true })?;
        Ok(m.queue_fraction_at_most(4))
    })
    .map_err(|e| e.to_string())?;
    let worst = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let (mean, _) = mean_sd(&fractions);
    check(worst >= 0.99, format!("zeta={zeta}; queue <= 4 for {mean:.5} of arrivals, worst seed {worst:.5} (floor 0.99)"))
}

fn detsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detsim")).args(args).output().expect("binary runs")
}

fn fuzz_total(o: &Output) -> Result<u64, String> {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| format!("fuzz output: {e}"))?;
    v["total_violations"].as_u64().ok_or_else(|| "fuzz output has no total".to_string())
}

fn fuzzing() -> Outcome {
    let good = detsim(&["fuzz"]);
    let good_total = fuzz_total(&good)?;
    let v: serde_json::Value = serde_json::from_slice(&good.stdout).map_err(|e| e.to_string())?;
    let runs = v["runs"].as_array().map_or(0, |r| r.len());
    let bad = detsim(&["fuzz", "--set", "rule=longest_known"]);
    let bad_total = fuzz_total(&bad)?;
    check(
        runs == 100 && good_total == 0 && good.status.code() == Some(0) && bad_total >= 1 && bad.status.code() == Some(1),
        format!("{runs} runs (5 strategies x 20 seeds): {good_total} violations; longest-known control: {bad_total}"),
    )
}

fn hidden_chain() -> Outcome {
    let started = Instant::now();
    let lambda = 1.0 / I;
    let tau = 0.05 * I;
    let seeds: Vec<u64> = (0..10).collect();
    let blocks = 2_000_000;
    let mut points = Vec::new();
    for f in [0.25, 0.33] {
        for zeta in [2u32, 5, 10] {
            for variant in [HcaStrategy::Rar, HcaStrategy::Mar] {
                points.push((f, zeta, variant));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let sims = run_batch(&jobs, None, |&(p, seed)| {
        let (f, zeta, variant) = points[p];
        let cfg = NetworkConfig {
            miners: miners(&[f, 1.0 - f]),
            lambda,
            delay: DelayModel::Uniform { delta: 0.0 },
            protocol: Protocol::Det { zeta, tau },
            seed,
            horizon: Horizon::Blocks(blocks),
        };
        let strategy = AdversaryStrategy::HiddenChain { variant, omega: 0.5, stall_honest: true };
        Ok(run(&cfg, &strategy)?.late_fraction)
    })
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut worst = (0.0f64, String::new());
    for (p, &(f, zeta, variant)) in points.iter().enumerate() {
        let mut hp = HcaParams::new(zeta, tau, (1.0 - f) * lambda, f * lambda, variant);
        hp.omega = 0.5;
        let chain = build_hca_chain(hp).map_err(|e| e.to_string())?;
        let (theory, _) = hca_late_fraction(&chain).map_err(|e| e.to_string())?;
        let (sim, _) = mean_sd(&sims[p * seeds.len()..(p + 1) * seeds.len()]);
        let rel = sim / theory - 1.0;
        ok &= rel.abs() <= 0.10;
        if rel.abs() >= worst.0 {
            worst = (rel.abs(), format!("f={f} zeta={zeta} {variant:?}: {sim:.4e} vs {theory:.4e} ({:+.1}%)", 100.0 * rel));
        }
    }
    within(Duration::from_secs(600), started)?;
    check(ok, format!("12 points, {} blocks each; worst {}", blocks * seeds.len() as u64, worst.1))
}

fn oca_dominance() -> Outcome {
    let (f, tau_ratio, zeta) = (0.33, 0.6, 5u32);
    let rates = RateParams::from_ratios(I, f, tau_ratio, 10.0).map_err(|e| e.to_string())?;
    let bound = oca_late_bound(&rates, zeta).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..20).collect();
    let measured = run_batch(&seeds, None, |&seed| {
        let cfg = NetworkConfig {
            miners: miners(&[f, (1.0 - f) / 2.0, (1.0 - f) / 2.0]),
            lambda: 1.0 / I,
            delay: DelayModel::Uniform { delta: rates.delta },
            protocol: Protocol::Det { zeta, tau: rates.tau },
            seed,
            horizon: Horizon::Blocks(100_000),
        };
        Ok(run(&cfg, &AdversaryStrategy::Oca { forge_every: 0 })?.adversary_fraction_at_least(zeta as usize))
    })
    .map_err(|e| e.to_string())?;
    let worst = measured.iter().copied().fold(0.0, f64::max);
    check(worst <= bound, format!("tau/I={tau_ratio}, zeta={zeta}: worst seed {worst:.5} <= bound {bound:.5}"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Runs each invocation twice (default workers, then one worker) into two
/// output directories and compares stdout and every written file.
fn determinism() -> Outcome {
    let quick = repo("configs/fig_quick.json");
    let honest = repo("configs/honest.json");
    let sweep = repo("configs/sweep_oca.json");
    let (quick, honest, sweep) = (quick.to_str().unwrap(), honest.to_str().unwrap(), sweep.to_str().unwrap());
    let cases: Vec<Vec<&str>> = vec![
        vec!["plan"],
        vec!["simulate", "--config", honest, "--seeds", "0..4", "--check"],
        vec!["simulate", "--config", honest, "--set", "network.horizon.blocks=500", "--trace"],
        vec!["sweep", "--config", sweep, "--seeds", "0..2"],
        vec!["reproduce", "fig13"],
        vec!["reproduce", "queue_hist", "--config", quick],
        vec!["reproduce", "hca_compare", "--config", quick, "--set", "hca.blocks=20000"],
        vec!["fuzz", "--seeds", "0..4"],
    ];
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for (n, case) in cases.iter().enumerate() {
        let mut seen: Vec<(Vec<u8>, Vec<(String, Vec<u8>)>)> = Vec::new();
        for (k, dir) in dirs.iter().enumerate() {
            let out = dir.path().join(n.to_string());
            let mut args = case.clone();
            let out_s = out.to_str().unwrap().to_string();
            args.extend(["--out", &out_s]);
            if k == 1 {
                args.extend(["--workers", "1"]);
            }
            let o = detsim(&args);
            if !o.status.success() {
                return Err(format!("{}: {}", case.join(" "), String::from_utf8_lossy(&o.stderr)));
            }
            let mut files = Vec::new();
            for entry in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
                let path = entry.map_err(|e| e.to_string())?.path();
                files.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap()));
            }
            files.sort();
            seen.push((o.stdout, files));
        }
        if seen[0] != seen[1] || seen[0].1.is_empty() {
            return Err(format!("outputs differ for `{}`", case.join(" ")));
        }
    }
    Ok(format!("{} invocations byte-identical across repeats and worker counts", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("zeta planner anchor", planner_anchor),
        ("honest overflow bound", honest_bound),
        ("fairness floors", fairness_floors),
        ("legacy lockstep vs fairness chain", lockstep),
        ("M/D/1 oracle", md1_oracle),
        ("queue at arrival", queue_floor),
        ("invariant fuzzing", fuzzing),
        ("hidden-chain theory vs simulation", hidden_chain),
        ("overflow-chain bound", oca_dominance),
        ("CLI determinism", determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:2} PASS {name} [{secs:.1} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:2} FAIL {name} [{secs:.1} s]: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
