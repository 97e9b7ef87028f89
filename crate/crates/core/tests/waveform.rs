use std::f64::consts::PI;

use proptest::prelude::*;
use srs_sense::waveform::{
    apply_cyclic_shift, base_sequence, base_sequence_with, is_prime, largest_prime_below, papr_db, parse_base_table,
    synthesize_half, synthesize_symbol, zadoff_chu_extended, SequenceKind, ShortSequenceMode, SrsConfig, BASE_TABLE_TEXT,
};
use srs_sense::C64;

// plain O(L^2) inverse DFT, 1/L scaled
fn idft(x: &[C64]) -> Vec<C64> {
    let l = x.len();
    (0..l)
        .map(|n| {
            x.iter()
                .enumerate()
                .map(|(k, &v)| v * C64::from_polar(1.0, 2.0 * PI * (k * n) as f64 / l as f64))
                .sum::<C64>()
                / l as f64
        })
        .collect()
}

fn max_err(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn default_config_numbers() {
    let c = SrsConfig::default();
    assert_eq!(c.m_srs(), 24);
    assert_eq!(c.half_len(), 64);
    assert_eq!(c.symbol_len(), 137);
    assert!((c.sample_rate_hz() - 3.84e6).abs() < 1e-6);
    assert_eq!(c.period_samples(), 153_600);
    let w = SrsConfig::wide_13mhz();
    assert_eq!(w.m_srs(), 216);
    assert!((w.sample_rate_hz() - 15.36e6).abs() < 1e-6);
    w.validate().unwrap();
}

#[test]
fn half_symbol_matches_direct_idft() {
    for cfg in [SrsConfig::default().with_band_shift(0, 3), SrsConfig::default().with_band_shift(80, 6)] {
        let base = base_sequence(cfg.seq_id_q, cfg.m_srs()).unwrap();
        let q = apply_cyclic_shift(&base, cfg.shift_index_w).unwrap();
        let l = cfg.half_len();
        let mut grid = vec![C64::new(0.0, 0.0); l];
        for m in 0..cfg.m_srs() {
            // comb-2: subcarrier k0 + 2m lands on half-symbol bin (k0/2 + m) mod L
            grid[(cfg.k0 / 2 + m) % l] = q[m];
        }
        let scale = (0.5 * l as f64 / cfg.m_srs() as f64).sqrt();
        let want: Vec<C64> = idft(&grid).into_iter().map(|v| v * scale).collect();
        assert!(max_err(&synthesize_half(&cfg).unwrap(), &want) < 1e-12);
    }
}

#[test]
fn symbol_layout_cp_and_repetition() {
    let cfg = SrsConfig::default().with_band_shift(0, 2);
    let s = synthesize_symbol(&cfg).unwrap();
    let (l, cp) = (cfg.half_len(), cfg.cp_len);
    assert_eq!(s.samples.len(), cp + 2 * l);
    assert_eq!(&s.samples[..cp], &s.samples[2 * l..]);
    assert_eq!(&s.samples[cp..cp + l], &s.samples[cp + l..]);
    // body energy is normalized to one
    let e: f64 = s.body().iter().map(|v| v.norm_sqr()).sum();
    assert!((e - 1.0).abs() < 1e-12);
}

#[test]
fn zc_core_is_prime_and_unit_modulus() {
    assert_eq!(largest_prime_below(216), Some(211));
    assert_eq!(largest_prime_below(48), Some(47));
    assert!(is_prime(211) && !is_prime(213));
    let z = zadoff_chu_extended(5, 216).unwrap();
    assert_eq!(z.kind, SequenceKind::ZadoffChuExtended);
    assert!(z.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    // cyclic extension repeats the head of the core
    assert!((z.values[211] - z.values[0]).norm() < 1e-12);
}

#[test]
fn zc_circular_autocorrelation_is_low() {
    for &m in &[36usize, 48, 96, 216] {
        let z = zadoff_chu_extended(1, m).unwrap().values;
        let r0: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        for tau in 1..m {
            let r: C64 = (0..m).map(|k| z[(k + tau) % m] * z[k].conj()).sum();
            assert!(r.norm() / r0 < 0.2, "m={m} tau={tau} r={}", r.norm() / r0);
        }
    }
}

#[test]
fn q_multiple_of_core_rejected() {
    assert!(zadoff_chu_extended(47, 48).is_err());
}

#[test]
fn shipped_short_table_is_well_formed() {
    let t = parse_base_table(BASE_TABLE_TEXT).unwrap();
    for (&m, rows) in &t {
        assert!(m < 36, "table carries length {m}");
        assert_eq!(rows.len(), 30);
        for r in rows {
            assert_eq!(r.len(), m);
        }
    }
    let s = base_sequence(1, 24).unwrap();
    assert_eq!(s.kind, SequenceKind::FlatSpectrumTable);
    assert!(s.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    assert!(papr_db(&s.values, 16) < 3.0);
}

#[test]
fn zc_substitute_for_short_lengths() {
    let s = base_sequence_with(1, 24, ShortSequenceMode::ZadoffChu).unwrap();
    assert_eq!(s.kind, SequenceKind::ZadoffChuExtended);
    assert_eq!(s.values.len(), 24);
}

#[test]
fn table_parse_errors_name_the_line() {
    let e = parse_base_table("# c\n6 0 1 1 1 1 1\n").unwrap_err().to_string();
    assert!(e.contains("line 2"), "{e}");
    assert!(parse_base_table("6 0 1 1 1 1 1 2\n").is_err());
}

#[test]
fn distinct_shifts_are_orthogonal_in_time() {
    let cfg = SrsConfig::default();
    let l = cfg.half_len() as f64;
    let halves: Vec<Vec<C64>> = (0..8).map(|w| synthesize_half(&cfg.with_band_shift(0, w)).unwrap()).collect();
    for i in 0..8 {
        for j in 0..8 {
            let d = (i as i32 - j as i32).rem_euclid(8);
            if d < 2 || d > 6 {
                continue;
            }
            let x: C64 = halves[i].iter().zip(&halves[j]).map(|(a, b)| a * b.conj()).sum();
            // direct-summation check, normalised by the half energy
            let e: f64 = halves[i].iter().map(|v| v.norm_sqr()).sum();
            assert!(x.norm() / e / l * l < 1e-3, "w={i},{j}");
        }
    }
}

#[test]
fn invalid_configs_rejected() {
    let c = SrsConfig::default();
    assert!(SrsConfig { k0: 1, ..c.clone() }.validate().is_err());
    assert!(SrsConfig { m_srs_rb: 3, ..c.clone() }.validate().is_err());
    assert!(SrsConfig { shift_index_w: 8, ..c.clone() }.validate().is_err());
    assert!(SrsConfig { cp_len: 0, ..c.clone() }.validate().is_err());
    assert!(SrsConfig { k0: 128, ..c.clone() }.validate().is_err());
    assert!(SrsConfig { m_srs_rb: 11, ..c }.validate().is_err());
    assert!(apply_cyclic_shift(&base_sequence(1, 24).unwrap(), 8).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cyclic_shift_is_phase_ramp(w in 0u8..8, q in 1u32..30) {
        let b = base_sequence(q, 48).unwrap();
        let s = apply_cyclic_shift(&b, w).unwrap();
        for (k, (sv, bv)) in s.iter().zip(&b.values).enumerate() {
            let want = bv * C64::from_polar(1.0, 2.0 * PI * f64::from(w) * k as f64 / 8.0);
            prop_assert!((sv - want).norm() < 1e-12);
        }
    }

    #[test]
    fn wrapped_allocations_map_to_distinct_bins(k0 in (0usize..64).prop_map(|k| 2 * k), rb in 4usize..6) {
        let cfg = SrsConfig { k0, m_srs_rb: rb, ..SrsConfig::default() };
        prop_assert!(cfg.validate().is_ok());
        let mut kap = cfg.kappa();
        kap.sort_unstable();
        kap.dedup();
        prop_assert_eq!(kap.len(), cfg.m_srs());
        prop_assert!(kap.iter().all(|&k| k < cfg.half_len()));
    }

    #[test]
    fn halves_repeat_for_any_band_and_shift(k0 in (0usize..64).prop_map(|k| 2 * k), w in 0u8..8) {
        let cfg = SrsConfig::default().with_band_shift(k0, w);
        let s = synthesize_symbol(&cfg).unwrap();
        let (l, cp) = (cfg.half_len(), cfg.cp_len);
        prop_assert_eq!(&s.samples[cp..cp + l], &s.samples[cp + l..]);
    }
}
