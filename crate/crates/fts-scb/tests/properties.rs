//! Property-based tests for the serialization layer and the multiplier
//! bootstrap algebra.

use fts_scb::bootstrap::{kernel_weights, BlockSumAccessor};
use fts_scb::io::{load_series_csv, save_series_csv};
use fts_scb::series::FunctionalSeries;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_csv_round_trip_is_exact(
        n in 1usize..10,
        p in 1usize..5,
        seed in any::<u64>(),
        a in -10.0f64..10.0,
        b_off in 0.5f64..10.0,
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let values: Vec<f64> = finite_matrix(&mut rng, n * p);
        let domain = (a, a + b_off);
        let series = FunctionalSeries::new(values, n, p, domain).unwrap();
        let dir = std::env::temp_dir().join("fts-scb-prop-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("round-trip-{seed}-{n}-{p}.csv"));
        save_series_csv(&series, &path).unwrap();
        let loaded = load_series_csv(&path, domain).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(loaded.n(), n);
        prop_assert_eq!(loaded.p(), p);
        // Bit-exact: the writer uses shortest round-trip formatting.
        prop_assert_eq!(loaded.values(), series.values());
    }

    #[test]
    fn bootstrap_draw_is_sign_symmetric(
        seed in any::<u64>(),
        n in 20usize..60,
        p in 1usize..4,
        m_half in 1usize..4,
    ) {
        let b = 0.2;
        let half = (n as f64 * b).ceil() as usize;
        let m_n = 2 * m_half;
        prop_assume!(2 * half > m_n && n >= 2 * half);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let kw = kernel_weights(n, b).unwrap();
        let acc = BlockSumAccessor::new(&e, n, p, &kw, m_n).unwrap();
        let mult: Vec<f64> =
            (0..acc.multiplier_len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let neg: Vec<f64> = mult.iter().map(|v| -v).collect();
        let t_pos = acc.draw_t(&mult);
        let t_neg = acc.draw_t(&neg);
        prop_assert!((t_pos - t_neg).abs() <= 1e-12 * t_pos.abs().max(1.0));
    }

    #[test]
    fn bootstrap_draw_is_scale_equivariant(
        seed in any::<u64>(),
        n in 20usize..60,
        p in 1usize..4,
        scale in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0, 8.0]),
    ) {
        let b = 0.2;
        let m_n = 4;
        let half = (n as f64 * b).ceil() as usize;
        prop_assume!(2 * half > m_n && n >= 2 * half);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let scaled: Vec<f64> = e.iter().map(|v| scale * v).collect();
        let kw = kernel_weights(n, b).unwrap();
        let acc = BlockSumAccessor::new(&e, n, p, &kw, m_n).unwrap();
        let acc_scaled = BlockSumAccessor::new(&scaled, n, p, &kw, m_n).unwrap();
        let mult: Vec<f64> =
            (0..acc.multiplier_len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let t = acc.draw_t(&mult);
        let t_scaled = acc_scaled.draw_t(&mult);
        // Powers of two scale exactly in floating point.
        prop_assert!((t_scaled - scale * t).abs() <= 1e-12 * t_scaled.abs().max(1e-300));
    }
}

fn finite_matrix(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            // Mix magnitudes to exercise the shortest round-trip formatter.
            let v: f64 = rng.sample(StandardNormal);
            let exp = rng.gen_range(-12i32..12);
            v * 10f64.powi(exp)
        })
        .collect()
}
