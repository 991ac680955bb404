use delayed_exec::analytic::{
    md1_stationary, md1_tail, poisson_burst_tail, poisson_cdf, poisson_pmf, withhold_success_prob, RateParams,
    ZetaSearch,
};
use delayed_exec::markov::{
    build_hca_chain, chain_fractions, hca_late_fraction, honest_chain, legacy_tau_for_ratio, skip_both_chain,
    skip_creation_only_chain, solve_stationary, ChainKind, HcaParams, HcaStrategy, MinerProfile, TransitionMatrix,
};
use proptest::prelude::*;

fn stochastic_rows(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), n).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn md1_law_is_a_distribution_with_falling_tail(rho in 0.01f64..0.95) {
        let law = md1_stationary(rho, 60).unwrap();
        let total: f64 = law.probabilities.iter().sum::<f64>() + law.residual;
        prop_assert!((total - 1.0).abs() < 1e-9, "{total}");
        prop_assert!((law.probabilities[0] - (1.0 - rho)).abs() < 1e-12);
        let tails: Vec<f64> = (1..40u64).map(|z| md1_tail(rho, z).unwrap()).collect();
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((tails[0] - rho).abs() < 1e-9);
    }

    #[test]
    fn poisson_pieces_agree(mean in 0.0f64..60.0, k in 0u64..120) {
        let cdf = poisson_cdf(mean, k);
        let sum: f64 = (0..=k).map(|j| poisson_pmf(mean, j)).sum();
        prop_assert!((cdf - sum).abs() < 1e-9, "{cdf} vs {sum}");
        let tail = poisson_burst_tail(mean, k + 1).unwrap();
        prop_assert!((tail + cdf - 1.0).abs() < 1e-9);
    }

    #[test]
    fn withholding_gets_harder_with_time(f in 0.05f64..0.3, short in 10.0f64..200.0) {
        let lambda = 1.0 / 15.0;
        let p = RateParams::new(lambda, f, 7.5, 1.5).unwrap();
        let a = withhold_success_prob(p.alpha, p.beta, p.delta, short).unwrap();
        let b = withhold_success_prob(p.alpha, p.beta, p.delta, short * 20.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-12, "{a} -> {b}");
    }

    #[test]
    fn queue_bound_does_not_rise_with_zeta(
        f in 0.0f64..0.3,
        tau_ratio in 0.05f64..0.5,
        delay_ratio in 2.0f64..30.0,
        t_star in 0.0f64..800.0,
    ) {
        let p = RateParams::from_ratios(15.0, f, tau_ratio, delay_ratio).unwrap();
        let search = ZetaSearch { eps_grid: (1..=12).map(|k| 0.25 * k as f64).collect(), ..ZetaSearch::default() };
        let mut last = f64::INFINITY;
        for z in [1u32, 3, 8, 20, 50] {
            let b = search.best_bound(&p, z, t_star).unwrap();
            prop_assert!((0.0..=1.0).contains(&b.total));
            prop_assert!(b.total <= last + 1e-15);
            last = b.total;
        }
    }

    #[test]
    fn stationary_law_is_fixed(rows in (2usize..7).prop_flat_map(stochastic_rows)) {
        let n = rows.len();
        let m = TransitionMatrix::from_dense((0..n).map(|i| format!("s{i}")).collect(), ChainKind::Hca, rows);
        let psi = solve_stationary(&m).unwrap().psi;
        prop_assert!((psi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut next = vec![0.0; n];
        m.left_mul(&psi, &mut next);
        for (a, b) in psi.iter().zip(&next) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fairness_chains_are_proper(
        raw in prop::collection::vec(0.05f64..1.0, 2..8),
        c in 0.0f64..1.0,
        ratio in 0.0f64..0.3,
    ) {
        let s: f64 = raw.iter().sum();
        let shares: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let lambda = 1.0 / 15.0;
        let tau = legacy_tau_for_ratio(ratio, lambda).unwrap();
        let p = MinerProfile::from_shares(&shares, lambda, c, tau).unwrap();
        let honest = chain_fractions(&honest_chain(&p).unwrap()).unwrap();
        let both = chain_fractions(&skip_both_chain(&p).unwrap()).unwrap();
        let creation = chain_fractions(&skip_creation_only_chain(&p).unwrap()).unwrap();
        for f in [&honest, &both, &creation] {
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(f.iter().all(|v| *v >= -1e-12));
        }
        // skipping never hurts miner 0
        prop_assert!(both[0] >= creation[0] - 1e-9);
        prop_assert!(both[0] >= shares[0] - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hca_ratios_are_fractions(
        f in 0.05f64..0.45,
        zeta in 1u32..12,
        tau_ratio in 0.01f64..0.8,
        omega in 0.0f64..=1.0,
        mar in any::<bool>(),
    ) {
        let lambda = 1.0 / 15.0;
        let strategy = if mar { HcaStrategy::Mar } else { HcaStrategy::Rar };
        let mut params = HcaParams::new(zeta, tau_ratio * 15.0, (1.0 - f) * lambda, f * lambda, strategy);
        params.omega = omega;
        let chain = build_hca_chain(params).unwrap();
        prop_assert!(chain.matrix.max_row_deviation() < 1e-9);
        let (late, adv) = hca_late_fraction(&chain).unwrap();
        prop_assert!((0.0..=1.0).contains(&late));
        prop_assert!((0.0..=1.0).contains(&adv));
        prop_assert!(late <= adv + 1e-12);
    }
}

#[test]
fn more_delay_means_more_late_blocks() {
    let lambda = 1.0 / 15.0;
    let late = |zeta| {
        let c = build_hca_chain(HcaParams::new(zeta, 0.75, 0.67 * lambda, 0.33 * lambda, HcaStrategy::Rar)).unwrap();
        hca_late_fraction(&c).unwrap().0
    };
    assert!(late(2) > late(5) && late(5) > late(10));
}
