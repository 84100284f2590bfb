use camsim::encode::hamming;
use camsim::{
    build_banks, search, ArrayConfig, BitVector, ClockKind, ClockPolicy, MitigationConfig,
    MitigationKind, TechProfile, VariationConfig,
};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn vector(width: usize) -> impl Strategy<Value = BitVector> {
    prop::collection::vec(any::<bool>(), width).prop_map(|b| BitVector::from_bools(&b))
}

/// A query plus stored items of one width.
fn workload() -> impl Strategy<Value = (usize, BitVector, Vec<BitVector>)> {
    (8usize..=96).prop_flat_map(|w| (Just(w), vector(w), prop::collection::vec(vector(w), 1..40)))
}

fn profile_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["sot", "sram_0v5", "sram_0v7", "fefet"])
}

fn expected(query: &BitVector, items: &[BitVector], limit: usize) -> Vec<usize> {
    items
        .iter()
        .enumerate()
        .filter(|(_, it)| hamming(query, it).unwrap() <= limit)
        .map(|(i, _)| i)
        .collect()
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn packed_bytes_round_trip(bits in prop::collection::vec(any::<bool>(), 0..300)) {
        let v = BitVector::from_bools(&bits);
        let back = BitVector::from_packed_bytes(&v.to_packed_bytes(), bits.len()).unwrap();
        prop_assert_eq!(&back, &v);
        let text = BitVector::parse01(&v.to_string()).unwrap();
        prop_assert_eq!(text, v);
    }

    #[test]
    fn ideal_clock_matches_hamming_oracle(
        (w, query, items) in workload(),
        name in profile_name(),
        rows in 1usize..=64,
        limit_frac in 0.0f64..1.0,
    ) {
        let limit = 1 + ((w - 1) as f64 * limit_frac) as usize;
        let profile = TechProfile::builtin(name).unwrap().without_interconnect();
        let config = ArrayConfig::new(rows, w, profile, MitigationConfig::baseline()).unwrap();
        let banks = build_banks(&config, &items).unwrap();
        let policy = ClockPolicy::new(ClockKind::Ideal, limit);
        let out = search(&banks, &config, &query, &policy, &VariationConfig::none(), 0).unwrap();
        prop_assert_eq!(out.retrieved, expected(&query, &items, limit));
    }

    #[test]
    fn fixed_clock_never_misses_without_variation(
        (w, query, items) in workload(),
        name in profile_name(),
        rows in prop::sample::select(vec![16usize, 64, 128, 256]),
        limit_frac in 0.0f64..1.0,
        mitigation in prop::sample::select(vec![MitigationKind::Baseline, MitigationKind::S2x]),
    ) {
        let limit = 1 + ((w - 1) as f64 * limit_frac) as usize;
        let profile = TechProfile::builtin(name).unwrap();
        let m = MitigationConfig::for_profile(mitigation, &profile);
        let config = ArrayConfig::new(rows, w, profile, m).unwrap();
        let banks = build_banks(&config, &items).unwrap();
        let policy = ClockPolicy::new(ClockKind::Fixed, limit);
        let out = search(&banks, &config, &query, &policy, &VariationConfig::none(), 0).unwrap();
        for id in expected(&query, &items, limit) {
            prop_assert!(out.retrieved.binary_search(&id).is_ok(), "item {} missed", id);
        }
    }

    #[test]
    fn skew_grows_with_array_height(
        name in profile_name(),
        rows in 2usize..512,
        extra in 1usize..256,
        hdist in 1usize..=64,
    ) {
        let p = TechProfile::builtin(name).unwrap();
        let base = MitigationConfig::baseline();
        let lo = p.skew_percent(rows, 128, &base, hdist).unwrap();
        let hi = p.skew_percent(rows + extra, 128, &base, hdist).unwrap();
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo - 1e-9, "{} rows: {}, {} rows: {}", rows, lo, rows + extra, hi);
    }

    #[test]
    fn more_mismatches_discharge_sooner(
        name in profile_name(),
        cols in 2usize..=256,
        n_frac in 0.0f64..1.0,
        rows in 1usize..=256,
        row_frac in 0.0f64..1.0,
    ) {
        let n = 1 + ((cols - 1) as f64 * n_frac) as usize;
        prop_assume!(n < cols);
        let p = TechProfile::builtin(name).unwrap();
        let config = ArrayConfig::new(rows, cols, p, MitigationConfig::baseline()).unwrap();
        let row = ((rows - 1) as f64 * row_frac) as usize;
        prop_assert!(config.nominal_row_delay(n + 1, row) < config.nominal_row_delay(n, row));
        if row > 0 {
            prop_assert!(config.nominal_row_delay(n, row) > config.nominal_row_delay(n, row - 1));
        }
    }
}
