use proptest::prelude::*;

use rcs_core::decoder::{detect_support_threshold, RcsConfig, VoteLedger};
use rcs_core::encoder::{encode_direct, encode_first, FourierRecursion, NoiseModel};
use rcs_core::numkernel::{flops, LinearOperator};
use rcs_core::sensing::{Ensemble, PermutationOffset, SensingMatrix};
use rcs_core::signal::{gen_stream, StreamConfig};
use rcs_core::solvers::{fista, kkt_satisfied, FistaOptions, LassoProblem};
use rcs_core::RcsDecoder;

fn ensemble(k: u8) -> Ensemble {
    [Ensemble::Gaussian, Ensemble::Bernoulli, Ensemble::Achlioptas][k as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recursive_encoding_drift_is_bounded(
        n in 8usize..48,
        m_frac in 0.2f64..0.9,
        tau in 1usize..8,
        p in 0.0f64..0.6,
        kind in 0u8..3,
        seed in 0u64..10_000,
    ) {
        let tau = tau.min(n);
        let m = ((n as f64 * m_frac) as usize).clamp(1, n - 1);
        let steps = 5 * n;
        let values = gen_stream(&StreamConfig::new(p, 0.5, 4.0, seed, n + steps * tau)).unwrap().values;
        let a = SensingMatrix::generate(ensemble(kind), m, n, seed + 1).unwrap();
        let mut enc = encode_first(&a, &values[..n], NoiseModel::noiseless(), tau).unwrap();
        let max_x = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut quiet = NoiseModel::noiseless().source().unwrap();
        for k in 1..=steps {
            let s = (k - 1) * tau;
            enc.step(&values[s..s + tau], &values[s + n..s + n + tau]).unwrap();
            if k % n == 0 || k == steps {
                let start = k * tau;
                let direct = encode_direct(&a, PermutationOffset::new(start, n), &values[start..start + n], &mut quiet).unwrap();
                let drift = enc.y().iter().zip(&direct).fold(0.0f64, |acc, (r, d)| acc.max((r - d).abs()));
                prop_assert!(drift <= 1e-10 * k as f64 * max_x.max(1.0), "k = {k}, drift = {drift:e}");
            }
        }
    }

    #[test]
    fn encode_step_costs_m_tau(n in 16usize..80, tau in 1usize..10, seed in 0u64..1000) {
        let tau = tau.min(n);
        let m = n / 2;
        let values = gen_stream(&StreamConfig::new(0.5, 1.0, 2.0, seed, n + tau)).unwrap().values;
        let a = SensingMatrix::generate(Ensemble::Gaussian, m, n, seed).unwrap();
        flops::reset();
        let mut enc = encode_first(&a, &values[..n], NoiseModel::noiseless(), tau).unwrap();
        prop_assert_eq!(flops::count(), (m * n) as u64);
        flops::reset();
        enc.step(&values[..tau], &values[n..n + tau]).unwrap();
        prop_assert_eq!(flops::count(), (m * tau) as u64);
    }

    #[test]
    fn fourier_recursion_tracks_direct_analysis(n in 2usize..40, seed in 0u64..1000) {
        let steps = 3 * n;
        let values = gen_stream(&StreamConfig::new(0.4, 0.0, 3.0, seed, n + steps)).unwrap().values;
        let f = FourierRecursion::new(n);
        let mut alpha = f.analyze(&values[..n]);
        for i in 0..steps {
            flops::reset();
            alpha = f.step(&alpha, values[i + n], values[i]).unwrap();
            prop_assert!(flops::count() <= 2 * n as u64);
            let direct = f.analyze(&values[i + 1..i + 1 + n]);
            for (a, d) in alpha.iter().zip(&direct) {
                prop_assert!((a - d).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn rotated_columns_match_the_materialized_product(n in 2usize..30, i in 0usize..60, seed in 0u64..1000) {
        let a = SensingMatrix::generate(Ensemble::Bernoulli, 1.max(n / 2), n.max(2), seed).unwrap();
        let off = PermutationOffset::new(i, n);
        let dense = a.view(off).materialize();
        for j in 0..n {
            prop_assert_eq!(a.view(off).column(j), dense.column(j));
        }
    }

    #[test]
    fn fista_certifies_and_never_increases_the_objective(
        n in 10usize..60,
        seed in 0u64..1000,
        lambda in 0.01f64..2.0,
        start in prop::collection::vec(-2.0f64..2.0, 60),
    ) {
        let m = n / 2;
        let a = SensingMatrix::generate(Ensemble::Gaussian, m, n, seed).unwrap();
        let dense = a.base().clone();
        let x = gen_stream(&StreamConfig::new(0.1, 1.0, 2.0, seed + 7, n)).unwrap().values;
        let mut noise = NoiseModel::gaussian(0.05, seed + 9).source().unwrap();
        let y = encode_direct(&a, PermutationOffset::identity(n), &x, &mut noise).unwrap();
        let prob = LassoProblem::new(&dense, &y, lambda).unwrap();
        let opts = FistaOptions { lipschitz: Some(a.lipschitz()), ..FistaOptions::default() };
        let x0 = &start[..n];
        let rep = fista(&prob, x0, &opts).unwrap();
        prop_assert!(rep.objective <= prob.objective(x0) * (1.0 + 1e-12));
        prop_assert!(rep.converged);
        // gradient recomputed from scratch
        let ax = dense.apply(&rep.x_hat);
        let r: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let g = dense.apply_t(&r);
        prop_assert!(kkt_satisfied(&g, &rep.x_hat, lambda, opts.resolved_eps(lambda)));
    }

    #[test]
    fn lower_threshold_never_detects_less(v in prop::collection::vec(-3.0f64..3.0, 1..50), lo in 0.01f64..1.0, gap in 0.0f64..1.0) {
        let loose = detect_support_threshold(&v, lo);
        let strict = detect_support_threshold(&v, lo + gap);
        prop_assert!(strict.iter().all(|j| loose.contains(j)));
    }

    #[test]
    fn higher_vote_bar_never_accepts_more(
        supports in prop::collection::vec(prop::collection::btree_set(0usize..20, 0..8), 1..10),
        xi2 in 1usize..5,
    ) {
        let (n, tau) = (20, 2);
        let mut ledger = VoteLedger::new(n, tau, None);
        for (w, s) in supports.iter().enumerate() {
            let s: Vec<usize> = s.iter().copied().collect();
            ledger.cast_votes(&s, w * tau);
        }
        let start = (supports.len() - 1) * tau;
        let low = ledger.accepted_support(start, xi2, n);
        let high = ledger.accepted_support(start, xi2 + 1, n);
        prop_assert!(high.iter().all(|j| low.contains(j)));
    }

    #[test]
    fn emissions_are_gapless_and_ordered(n in 8usize..30, tau in 1usize..6, windows in 1usize..12, seed in 0u64..500) {
        let tau = tau.min(n);
        let len = n + (windows - 1) * tau;
        let values = gen_stream(&StreamConfig::new(0.1, 1.0, 2.0, seed, len)).unwrap().values;
        let a = SensingMatrix::generate(Ensemble::Gaussian, n / 2, n, seed).unwrap();
        let mut cfg = RcsConfig::new(n, tau, 0.05);
        cfg.total_windows = Some(windows);
        let mut dec = RcsDecoder::new(cfg).unwrap();
        let mut enc = encode_first(&a, &values[..n], NoiseModel::gaussian(0.05, seed), tau).unwrap();
        let mut emitted = Vec::new();
        for i in 0..windows {
            if i > 0 {
                let s = (i - 1) * tau;
                enc.step(&values[s..s + tau], &values[s + n..s + n + tau]).unwrap();
            }
            let out = dec.step(&a.view(enc.offset()), enc.y()).unwrap();
            for e in &out.emitted {
                // window i is the last one covering the indices it emits
                prop_assert!(e.global_index >= i * tau && e.global_index < (i + 1) * tau);
            }
            emitted.extend(out.emitted);
        }
        emitted.extend(dec.finish());
        let idx: Vec<usize> = emitted.iter().map(|e| e.global_index).collect();
        prop_assert_eq!(idx, (0..len).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_matrix(kind in 0u8..3, seed in 0u64..10_000) {
        let a = SensingMatrix::generate(ensemble(kind), 7, 13, seed).unwrap();
        let b = SensingMatrix::generate(ensemble(kind), 7, 13, seed).unwrap();
        prop_assert_eq!(a.base().as_slice(), b.base().as_slice());
    }
}
