//! SRS base sequences, cyclic shifts and comb-2 OFDM symbol synthesis.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::capture::IqCapture;
use crate::dsp;
use crate::error::{Error, Result};

/// Sequences shorter than this come from the flat-spectrum table (or the
/// length-30 formula) unless ZC is forced.
pub const ZC_MIN_LEN: usize = 36;

/// Number of sequence groups per length in the short-sequence table.
pub const TABLE_GROUPS: usize = 30;

/// Phase table for short lengths: `<length> <group> <phi_0> .. <phi_{M-1}>`,
/// each value is e^{j pi phi / 4}.
pub const BASE_TABLE_TEXT: &str = include_str!("../data/short_base_sequences.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShortSequenceMode {
    /// Flat-spectrum phase table for M in {6,12,18,24}, closed form for M = 30.
    #[default]
    Table,
    /// Cyclic-extended Zadoff-Chu at every length.
    ZadoffChu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrsConfig {
    pub numerology_mu: u32,
    pub n_fft: usize,
    pub comb_ktc: usize,
    pub m_srs_rb: usize,
    pub k0: usize,
    pub seq_id_q: u32,
    pub shift_index_w: u8,
    pub period_slots: u32,
    pub cp_len: usize,
    pub short_sequence: ShortSequenceMode,
}

impl Default for SrsConfig {
    fn default() -> Self {
        SrsConfig {
            numerology_mu: 1,
            n_fft: 128,
            comb_ktc: 2,
            m_srs_rb: 4,
            k0: 0,
            seq_id_q: 1,
            shift_index_w: 0,
            period_slots: 80,
            cp_len: 9,
            short_sequence: ShortSequenceMode::Table,
        }
    }
}

impl SrsConfig {
    /// 36 RB over a 512-point grid (about 13 MHz occupied).
    pub fn wide_13mhz() -> Self {
        // centred on DC so the band does not straddle fs/2
        SrsConfig { n_fft: 512, m_srs_rb: 36, cp_len: 36, k0: 512 - 216, ..Default::default() }
    }

    pub fn half_len(&self) -> usize {
        self.n_fft / self.comb_ktc.max(1)
    }

    pub fn m_srs(&self) -> usize {
        12 * self.m_srs_rb / self.comb_ktc.max(1)
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        15e3 * f64::from(1u32 << self.numerology_mu.min(6))
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.subcarrier_spacing_hz() * self.n_fft as f64
    }

    /// Samples per slot; a slot lasts 1 ms / 2^mu.
    pub fn slot_samples(&self) -> usize {
        (self.sample_rate_hz() * 1e-3 / f64::from(1u32 << self.numerology_mu.min(6))).round() as usize
    }

    pub fn period_samples(&self) -> usize {
        self.period_slots as usize * self.slot_samples()
    }

    pub fn period_s(&self) -> f64 {
        self.period_samples() as f64 / self.sample_rate_hz()
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    /// Half-symbol DFT bins kappa[m] = k0/K_TC + m.
    pub fn kappa(&self) -> Vec<usize> {
        let l = self.half_len();
        (0..self.m_srs()).map(|m| (self.k0 / self.comb_ktc + m) % l).collect()
    }

    /// Same configuration placed on another band / shift.
    pub fn with_band_shift(&self, k0: usize, w: u8) -> Self {
        SrsConfig { k0, shift_index_w: w, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.comb_ktc != 2 {
            return bad(format!("comb_ktc must be 2, got {}", self.comb_ktc));
        }
        if self.numerology_mu > 6 {
            return bad(format!("numerology {} out of range", self.numerology_mu));
        }
        if self.n_fft < 8 || !self.n_fft.is_multiple_of(2) {
            return bad(format!("n_fft must be even and >= 8, got {}", self.n_fft));
        }
        if self.m_srs_rb < 4 {
            return bad(format!("m_srs_rb must be >= 4, got {}", self.m_srs_rb));
        }
        if !self.k0.is_multiple_of(self.comb_ktc) {
            return bad(format!("k0 = {} must be a multiple of the comb size", self.k0));
        }
        let m = self.m_srs();
        if self.k0 >= self.n_fft || (m - 1) * self.comb_ktc >= self.n_fft {
            return bad(format!(
                "allocation overflow: k0 {} with span (M_SRS-1)*K_TC = {} does not fit N = {}",
                self.k0,
                (m - 1) * self.comb_ktc,
                self.n_fft
            ));
        }
        if self.shift_index_w > 7 {
            return bad(format!("shift index {} not in 0..=7", self.shift_index_w));
        }
        if self.cp_len == 0 || self.cp_len >= self.half_len() {
            return bad(format!("cp_len {} must be in 1..L", self.cp_len));
        }
        if self.period_samples() < 2 * self.symbol_len() {
            return bad("SRS period shorter than two symbols".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    ZadoffChuExtended,
    FlatSpectrumTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseSequence {
    pub values: Vec<C64>,
    pub kind: SequenceKind,
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest prime strictly below `m`.
pub fn largest_prime_below(m: usize) -> Option<usize> {
    (2..m).rev().find(|&p| is_prime(p))
}

/// Cyclic-extended ZC: e^{-j pi q k'(k'+1)/N_ZC} with k' = k mod N_ZC.
pub fn zadoff_chu_extended(q: u32, m: usize) -> Result<BaseSequence> {
    let nzc = largest_prime_below(m)
        .ok_or_else(|| Error::Config(format!("no prime below sequence length {m}")))?;
    if (q as usize).is_multiple_of(nzc) {
        return Err(Error::Config(format!(
            "sequence id q = {q} is a multiple of N_ZC = {nzc}; phase would be constant"
        )));
    }
    let two_n = 2 * nzc as u64;
    let qm = q as u64 % two_n;
    let values = (0..m)
        .map(|k| {
            let k = (k % nzc) as u64;
            // exact integer reduction keeps the phase accurate for large q, k
            let e = (qm * ((k * (k + 1)) % two_n)) % two_n;
            C64::from_polar(1.0, -PI * e as f64 / nzc as f64)
        })
        .collect();
    Ok(BaseSequence { values, kind: SequenceKind::ZadoffChuExtended })
}

type Table = BTreeMap<usize, Vec<Vec<i8>>>;

/// Parses the short-sequence table text. Public so the generator and the
/// tests can check the shipped file.
pub fn parse_base_table(text: &str) -> Result<Table> {
    let mut t: Table = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<i64> = line
            .split_whitespace()
            .map(|s| s.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("base table line {}: {e}", ln + 1)))?;
        if nums.len() < 3 {
            return Err(Error::Config(format!("base table line {}: too short", ln + 1)));
        }
        let m = nums[0] as usize;
        let g = nums[1] as usize;
        let phis = &nums[2..];
        if phis.len() != m {
            return Err(Error::Config(format!(
                "base table line {}: expected {m} phases, got {}",
                ln + 1,
                phis.len()
            )));
        }
        if phis.iter().any(|p| ![-3, -1, 1, 3].contains(p)) {
            return Err(Error::Config(format!("base table line {}: phase not in {{-3,-1,1,3}}", ln + 1)));
        }
        let rows = t.entry(m).or_default();
        if g != rows.len() {
            return Err(Error::Config(format!("base table line {}: group {g} out of order", ln + 1)));
        }
        rows.push(phis.iter().map(|&p| p as i8).collect());
    }
    Ok(t)
}

fn shipped_table() -> &'static Table {
    static T: OnceLock<Table> = OnceLock::new();
    T.get_or_init(|| parse_base_table(BASE_TABLE_TEXT).expect("shipped base table is valid"))
}

/// Base sequence of length `m_srs` for sequence id `q`.
pub fn base_sequence(q: u32, m_srs: usize) -> Result<BaseSequence> {
    base_sequence_with(q, m_srs, ShortSequenceMode::Table)
}

pub fn base_sequence_with(q: u32, m_srs: usize, mode: ShortSequenceMode) -> Result<BaseSequence> {
    if m_srs < 6 {
        return Err(Error::Config(format!("sequence length {m_srs} below minimum 6")));
    }
    if m_srs >= ZC_MIN_LEN || mode == ShortSequenceMode::ZadoffChu {
        return zadoff_chu_extended(q, m_srs);
    }
    let u = q as usize % TABLE_GROUPS;
    if m_srs == 30 {
        // closed form over a length-31 ZC core
        let values = (0..30u64)
            .map(|n| {
                let e = ((u as u64 + 1) * (n + 1) * (n + 2)) % 62;
                C64::from_polar(1.0, -PI * e as f64 / 31.0)
            })
            .collect();
        return Ok(BaseSequence { values, kind: SequenceKind::FlatSpectrumTable });
    }
    let rows = shipped_table()
        .get(&m_srs)
        .ok_or_else(|| Error::Config(format!("unsupported short sequence length {m_srs} (no table entry)")))?;
    let row = &rows[u % rows.len()];
    let values = row.iter().map(|&p| C64::from_polar(1.0, PI * f64::from(p) / 4.0)).collect();
    Ok(BaseSequence { values, kind: SequenceKind::FlatSpectrumTable })
}

/// Q_alpha[k] = e^{j 2 pi w k / 8} base[k].
pub fn apply_cyclic_shift(base: &BaseSequence, w: u8) -> Result<Vec<C64>> {
    if w > 7 {
        return Err(Error::Config(format!("shift index {w} not in 0..=7")));
    }
    Ok(base
        .values
        .iter()
        .enumerate()
        .map(|(k, &b)| if w == 0 { b } else { dsp::root8(w as u64 * k as u64) * b })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SrsSymbol {
    /// CP followed by the N-sample body.
    pub samples: Vec<C64>,
    pub config: SrsConfig,
}

impl SrsSymbol {
    pub fn body(&self) -> &[C64] {
        &self.samples[self.config.cp_len..]
    }

    pub fn half(&self) -> &[C64] {
        let c = self.config.cp_len;
        &self.samples[c..c + self.config.half_len()]
    }
}

/// Builds the half-symbol s[n] (length L) so that the N-sample body has unit energy.
pub fn synthesize_half(cfg: &SrsConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    let base = base_sequence_with(cfg.seq_id_q, cfg.m_srs(), cfg.short_sequence)?;
    let q = apply_cyclic_shift(&base, cfg.shift_index_w)?;
    let l = cfg.half_len();
    let mut buf = vec![C64::new(0.0, 0.0); l];
    for (m, &k) in cfg.kappa().iter().enumerate() {
        buf[k] = q[m];
    }
    dsp::ifft(&mut buf);
    // after the 1/L inverse each half has energy M/L; the body (two halves) gets 1
    let s = (0.5 * l as f64 / cfg.m_srs() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
    Ok(buf)
}

pub fn synthesize_symbol(cfg: &SrsConfig) -> Result<SrsSymbol> {
    let half = synthesize_half(cfg)?;
    let l = half.len();
    let mut samples = Vec::with_capacity(cfg.symbol_len());
    samples.extend_from_slice(&half[l - cfg.cp_len..]);
    samples.extend_from_slice(&half);
    samples.extend_from_slice(&half);
    Ok(SrsSymbol { samples, config: cfg.clone() })
}

/// Periodic SRS at unit mean sample power (0 dBfs) with zeros between symbols.
pub fn srs_frame(cfg: &SrsConfig, n_periods: usize, fs: f64) -> Result<IqCapture> {
    if n_periods == 0 {
        return Err(Error::Config("n_periods must be >= 1".into()));
    }
    let native = cfg.sample_rate_hz();
    if (fs - native).abs() > 1e-6 * native {
        return Err(Error::RateMismatch(fs, native));
    }
    let sym = synthesize_symbol(cfg)?;
    let per = cfg.period_samples();
    let mut samples = vec![C64::new(0.0, 0.0); per * n_periods];
    let amp = (cfg.n_fft as f64).sqrt();
    for p in 0..n_periods {
        for (i, &v) in sym.samples.iter().enumerate() {
            samples[p * per + i] = v * amp;
        }
    }
    IqCapture::new(samples, native, 0.0, 0)
}

/// Peak-to-average power ratio in dB of a sequence mapped on consecutive
/// bins, evaluated on an `oversample`-times finer time grid.
pub fn papr_db(seq: &[C64], oversample: usize) -> f64 {
    let n = (seq.len() * oversample.max(1)).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..seq.len()].copy_from_slice(seq);
    dsp::ifft(&mut buf);
    let p: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    let peak = p.iter().cloned().fold(0.0, f64::max);
    dsp::db10(peak / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        let c = SrsConfig::default();
        c.validate().unwrap();
        assert_eq!(c.m_srs(), 24);
        assert_eq!(c.half_len(), 64);
        assert_eq!(c.sample_rate_hz(), 3.84e6);
        assert_eq!(c.period_samples(), 153_600);
        SrsConfig::wide_13mhz().validate().unwrap();
        assert_eq!(SrsConfig::wide_13mhz().m_srs(), 216);
    }

    #[test]
    fn odd_k0_rejected() {
        let c = SrsConfig { k0: 1, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn length30_is_unit() {
        let b = base_sequence(3, 30).unwrap();
        assert!(b.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unsupported_short_length() {
        assert!(base_sequence(1, 27).is_err());
        assert!(base_sequence(1, 5).is_err());
    }
}
