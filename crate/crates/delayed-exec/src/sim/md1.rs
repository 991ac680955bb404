use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

const BATCHES: u64 = 100;

/// Measured fraction of arrivals that found at least `zeta` customers in
/// the system, with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Md1Estimate {
    pub zeta: u64,
    pub fraction: f64,
    pub std_err: f64,
}

/// Simulates a single-server queue with unit-rate Poisson arrivals and
/// service time `rho`, recording the number in system seen by each arrival.
pub fn simulate_md1(rho: f64, arrivals: u64, seed: u64, zetas: &[u64]) -> Vec<Md1Estimate> {
    assert!(rho > 0.0 && rho < 1.0, "rho must be in (0, 1)");
    assert!(arrivals >= BATCHES, "need at least {BATCHES} arrivals");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(1.0).expect("unit rate");
    let per_batch = arrivals / BATCHES;
    let mut departures: VecDeque<f64> = VecDeque::new();
    let mut t = 0.0;
    let mut last_departure = 0.0f64;
    let mut batch_counts = vec![vec![0u64; BATCHES as usize]; zetas.len()];
    for batch in 0..BATCHES as usize {
        for _ in 0..per_batch {
            t += gap.sample(&mut rng);
            while departures.front().is_some_and(|&d| d <= t) {
                departures.pop_front();
            }
            let n = departures.len() as u64;
            for (k, &z) in zetas.iter().enumerate() {
                if n >= z {
                    batch_counts[k][batch] += 1;
                }
            }
            last_departure = last_departure.max(t) + rho;
            departures.push_back(last_departure);
        }
    }
    let b = BATCHES as f64;
    zetas
        .iter()
        .zip(batch_counts)
        .map(|(&zeta, counts)| {
            let means: Vec<f64> = counts.iter().map(|&c| c as f64 / per_batch as f64).collect();
            let mean = means.iter().sum::<f64>() / b;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
            Md1Estimate { zeta, fraction: mean, std_err: (var / b).sqrt() }
        })
        .collect()
}
