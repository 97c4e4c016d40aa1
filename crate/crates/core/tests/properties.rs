use proptest::prelude::*;

use spectra_core::checkpoint::Checkpoint;
use spectra_core::diagnostics::{cumulative_energy, relvar, spike_tail_split};
use spectra_core::matrix::io::{read_spcm, spcm_bytes};
use spectra_core::matrix::{exact_svd, mul, mul_nt, mul_tn, random_gaussian, thin_qr, DenseMatrix, FlopCounter};
use spectra_core::optim::{shape_update, spectra_step, SpectraConfig, SpectraState};
use spectra_core::spectral::{newton_schulz, power_iteration_svd, PowerIterConfig, SubspaceCache};
use spectra_core::theory::{check_instance, random_instance, InstanceSpec, SLACK_TOLERANCE};
use spectra_core::SvdFactors;

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..12, 2usize..12, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qr_reconstructs_with_orthonormal_q((m, n, seed) in dims()) {
        let (m, n) = (m.max(n), m.min(n));
        let a = random_gaussian(m, n, seed);
        let qr = thin_qr(&a, &FlopCounter::new()).unwrap();
        prop_assert!(qr.q.orthonormality_defect() < 1e-12);
        let back = mul(&qr.q, &qr.r).unwrap();
        prop_assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
        for i in 0..n {
            prop_assert!(qr.r[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn svd_is_sorted_and_reconstructs((m, n, seed) in dims()) {
        let a = random_gaussian(m, n, seed);
        let f = exact_svd(&a).unwrap();
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.orthonormality_defect() < 1e-10);
        prop_assert!(f.reconstruct().sub(&a).unwrap().frobenius_norm() <= 1e-10 * a.frobenius_norm());
        let fro: f64 = f.s.iter().map(|s| s * s).sum();
        prop_assert!((fro - a.frobenius_norm_sq()).abs() <= 1e-10 * fro);
    }

    #[test]
    fn split_is_orthogonal_and_exhaustive((m, n, seed) in dims(), k in 1usize..4) {
        let a = random_gaussian(m, n, seed);
        prop_assume!(k < m.min(n));
        let (s, t) = spike_tail_split(&a, k).unwrap();
        prop_assert!(s.add(&t).unwrap().sub(&a).unwrap().frobenius_norm() <= 1e-10 * a.frobenius_norm());
        prop_assert!(s.dot(&t).unwrap().abs() <= 1e-9 * a.frobenius_norm_sq());
    }

    #[test]
    fn shaped_update_flattens_the_spike((m, n, seed) in dims(), k in 1usize..3) {
        let g = random_gaussian(m, n, seed);
        prop_assume!(k < m.min(n));
        let f: SvdFactors = exact_svd(&g).unwrap().truncate(k);
        let (o, sigma_tail) = shape_update(&g, &f, &FlopCounter::new()).unwrap();
        let s = exact_svd(&o).unwrap().s;
        let tail: f64 = exact_svd(&g).unwrap().s[k..].iter().map(|x| x * x).sum();
        prop_assert!((sigma_tail - (tail / (m.min(n) - k) as f64).sqrt()).abs() <= 1e-10 * sigma_tail.max(1e-300));
        // The shaped spike cannot exceed the largest tail value.
        prop_assert!(s[0] <= exact_svd(&g).unwrap().s[k].max(sigma_tail) * (1.0 + 1e-9));
    }

    #[test]
    fn newton_schulz_is_bounded((m, n, seed) in dims()) {
        let g = random_gaussian(m, n, seed);
        let o = newton_schulz(&g, 5, &FlopCounter::new()).unwrap();
        prop_assert_eq!(o.shape(), g.shape());
        let s = exact_svd(&o).unwrap().s;
        prop_assert!(s[0] < 1.3, "{:?}", s);
    }

    #[test]
    fn power_iteration_recovers_planted_spike((m, n, seed) in (8usize..24, 8usize..24, any::<u64>())) {
        let r = m.min(n);
        let mut rng = spectra_core::seed::stream(seed, "prop", 0);
        let mut u = spectra_core::matrix::random_orthonormal(m, r, &mut rng);
        let v = spectra_core::matrix::random_orthonormal(n, r, &mut rng);
        let sig: Vec<f64> = (0..r).map(|i| if i < 2 { 100.0 / (i + 1) as f64 } else { 1.0 / (i + 1) as f64 }).collect();
        u.scale_columns(&sig);
        let g = mul_nt(&u, &v).unwrap();
        let cfg = PowerIterConfig { seed, ..PowerIterConfig::new(2, 3) };
        let mut cache = SubspaceCache::new();
        let f = FlopCounter::new();
        power_iteration_svd(&g, &cfg, &mut cache, &f).unwrap();
        let out = power_iteration_svd(&g, &cfg, &mut cache, &f).unwrap();
        for i in 0..2 {
            prop_assert!((out.factors.s[i] - sig[i]).abs() <= 1e-6 * sig[i]);
        }
        prop_assert_eq!(cache.v_cache.as_ref().unwrap().shape(), (n, 2));
    }

    #[test]
    fn spectra_update_has_calibrated_rms((m, n, seed) in (4usize..16, 4usize..16, any::<u64>())) {
        let cfg = SpectraConfig { rank_ratio: 0.2, lr: 0.1, seed, ..Default::default() };
        let mut st = SpectraState::new(m, n, &cfg).unwrap();
        let mut w = DenseMatrix::zeros(m, n);
        spectra_step(&mut w, &random_gaussian(m, n, seed), &mut st, &cfg, &FlopCounter::new()).unwrap();
        prop_assert!((w.rms() - 0.2 * 0.1).abs() < 1e-8);
    }

    #[test]
    fn spcm_and_checkpoint_round_trip_bitwise((m, n, seed) in dims()) {
        let a = random_gaussian(m, n, seed).map(|x| x * 1e-300 + x);
        prop_assert_eq!(read_spcm(&mut spcm_bytes(&a).as_slice()).unwrap(), a.clone());
        let mut ck = Checkpoint::new();
        ck.insert("a", a.clone());
        ck.set_meta("seed", seed).unwrap();
        let back = Checkpoint::read(&mut ck.to_bytes().as_slice()).unwrap();
        prop_assert_eq!(back.tensor("a").unwrap(), &a);
        prop_assert_eq!(back.meta_as::<u64>("seed").unwrap(), seed);
    }

    #[test]
    fn cumulative_energy_is_monotone(s in proptest::collection::vec(0.0f64..100.0, 1..40)) {
        prop_assume!(s.iter().any(|&x| x > 0.0));
        let cdf = cumulative_energy(&s);
        prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn relvar_is_nonnegative((m, n, seed) in dims()) {
        let gbar = random_gaussian(m, n, seed);
        let samples: Vec<_> = (0..5).map(|i| gbar.add(&random_gaussian(m, n, seed ^ (i + 1))).unwrap()).collect();
        let r = relvar(&gbar, &samples, 1).unwrap();
        prop_assert!(r.entries.iter().all(|e| e.relvar_k >= 0.0));
    }

    #[test]
    fn bound_chain_on_decoupled_instances(root in any::<u64>(), index in 0u64..1000) {
        let inst = random_instance(root, index, &InstanceSpec::default()).unwrap();
        let c = check_instance(&inst.model, &inst.proj).unwrap();
        prop_assert!(c.mid_slack >= SLACK_TOLERANCE, "{:?}", c);
        prop_assert!(c.loose_slack >= SLACK_TOLERANCE);
        prop_assert!(c.mu_slack.unwrap() >= SLACK_TOLERANCE);
        prop_assert!(c.trace_slack >= SLACK_TOLERANCE);
        prop_assert!(c.grid_gap_cells <= 1.0);
        prop_assert!(c.identity_error <= 1e-10);
    }
}

#[test]
fn gram_products_agree() {
    let a = random_gaussian(7, 5, 1);
    let b = random_gaussian(7, 4, 2);
    let explicit = mul(&a.transpose(), &b).unwrap();
    assert!(mul_tn(&a, &b).unwrap().sub(&explicit).unwrap().max_abs() < 1e-13);
}
