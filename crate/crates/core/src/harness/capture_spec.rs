//! Synthetic captures for `generate` / `composite`: a few UEs with fixed
//! shift, power, sample offset and CFO, repeated every SRS period.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::capture::IqCapture;
use crate::channel::{self, ChannelPath, UeProfile};
use crate::dsp;
use crate::error::{Error, Result};
use crate::seed;
use crate::waveform::{synthesize_symbol, SrsConfig};

pub const CAPTURE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureUe {
    pub id: String,
    #[serde(default)]
    pub band: usize,
    pub shift: u8,
    /// Per-sample power during the SRS symbol, dB relative to full scale.
    #[serde(default)]
    pub power_dbfs: f64,
    /// Extra delay in (fractional) samples, negative means early.
    #[serde(default)]
    pub offset_samples: f64,
    #[serde(default)]
    pub cfo_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSpec {
    #[serde(default = "schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub srs: SrsConfig,
    #[serde(default = "one_band")]
    pub band_k0: Vec<usize>,
    #[serde(default = "two")]
    pub periods: usize,
    /// Start of the first SRS symbol (CP included) in the file.
    #[serde(default = "lead")]
    pub lead_samples: usize,
    /// Noise relative to the summed UE power. Mutually exclusive with `noise_dbfs`.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub noise_dbfs: Option<f64>,
    #[serde(default = "carrier")]
    pub carrier_hz: f64,
    #[serde(default)]
    pub antenna_id: u32,
    #[serde(rename = "ue")]
    pub ues: Vec<CaptureUe>,
}

fn schema() -> u32 {
    CAPTURE_SCHEMA_VERSION
}
fn one_band() -> Vec<usize> {
    vec![0]
}
fn two() -> usize {
    2
}
fn lead() -> usize {
    1000
}
fn carrier() -> f64 {
    2.4e9
}

/// Occupied subcarriers of a band, indices taken mod N.
fn band_bins(cfg: &SrsConfig, k0: usize) -> std::collections::BTreeSet<usize> {
    (0..cfg.m_srs()).map(|m| (k0 + m * cfg.comb_ktc) % cfg.n_fft).collect()
}

/// Errors when two bands share a subcarrier or a band does not fit the grid.
pub fn check_bands(cfg: &SrsConfig, band_k0: &[usize]) -> Result<()> {
    if band_k0.is_empty() {
        return Err(Error::Config("at least one band is required".into()));
    }
    for &k0 in band_k0 {
        cfg.with_band_shift(k0, 0).validate()?;
    }
    for (i, &a) in band_k0.iter().enumerate() {
        for &b in &band_k0[i + 1..] {
            if let Some(k) = band_bins(cfg, a).intersection(&band_bins(cfg, b)).next() {
                return Err(Error::Config(format!("band collision: k0={a} and k0={b} both occupy subcarrier {k}")));
            }
        }
    }
    Ok(())
}

impl CaptureSpec {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let s: CaptureSpec = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            offset: e.span().map_or(0, |s| s.start as u64),
            msg: e.message().to_string(),
        })?;
        if s.schema_version != CAPTURE_SCHEMA_VERSION {
            return Err(Error::Config(format!("{origin}: unsupported schema_version {}", s.schema_version)));
        }
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        check_bands(&self.srs, &self.band_k0)?;
        if self.periods == 0 {
            return Err(Error::Config("periods must be >= 1".into()));
        }
        if self.ues.is_empty() {
            return Err(Error::Config("capture has no UEs".into()));
        }
        if self.snr_db.is_some() && self.noise_dbfs.is_some() {
            return Err(Error::Config("give either snr_db or noise_dbfs, not both".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for u in &self.ues {
            if u.band >= self.band_k0.len() {
                return Err(Error::Config(format!("{}: band {} not defined", u.id, u.band)));
            }
            if u.shift > 7 {
                return Err(Error::Config(format!("{}: shift {} not in 0..=7", u.id, u.shift)));
            }
            if !seen.insert((u.band, u.shift)) {
                return Err(Error::Config(format!("{}: (band {}, shift {}) used twice", u.id, u.band, u.shift)));
            }
            if !(u.power_dbfs.is_finite() && u.offset_samples.is_finite() && u.cfo_hz.is_finite()) {
                return Err(Error::Config(format!("{}: non-finite parameter", u.id)));
            }
            if u.offset_samples.abs() > self.lead_samples as f64 {
                return Err(Error::Config(format!("{}: offset larger than the lead-in", u.id)));
            }
        }
        Ok(())
    }

    pub fn len_samples(&self) -> usize {
        self.lead_samples + self.periods * self.srs.period_samples()
    }

    /// Labels for processing: one profile per UE carrying id, band and shift.
    pub fn ue_profiles(&self) -> Vec<UeProfile> {
        self.ues.iter().map(|u| label_profile(&u.id, u.band, u.shift)).collect()
    }

    /// Per-sample noise power implied by the spec (0 when noiseless).
    pub fn noise_power(&self) -> f64 {
        if let Some(n) = self.noise_dbfs {
            return dsp::from_db10(n);
        }
        match self.snr_db {
            Some(snr) => self.ues.iter().map(|u| dsp::from_db10(u.power_dbfs)).sum::<f64>() / dsp::from_db10(snr),
            None => 0.0,
        }
    }
}

pub fn label_profile(id: &str, band: usize, shift: u8) -> UeProfile {
    UeProfile {
        ue_id: id.to_string(),
        position_m: [0.0; 3],
        band_id: band,
        shift_index_w: shift,
        tx_power_dbm: 0.0,
        cfo_hz: 0.0,
        timing_advance_s: 0.0,
        clock_drift_ppm: 0.0,
        antenna_gain_dbi: 0.0,
        los: true,
    }
}

/// Renders the capture. Only the noise depends on `seed_value`.
pub fn build_capture(spec: &CaptureSpec, seed_value: u64) -> Result<IqCapture> {
    spec.validate()?;
    let fs = spec.srs.sample_rate_hz();
    let per = spec.srs.period_samples();
    let mut out = vec![C64::new(0.0, 0.0); spec.len_samples()];
    let margin = dsp::FD_TAPS as i64;
    for u in &spec.ues {
        let cfg = spec.srs.with_band_shift(spec.band_k0[u.band], u.shift);
        let sym = synthesize_symbol(&cfg)?;
        // body energy 1 -> per-sample power 1/N; scale to the requested level
        let amp = (cfg.n_fft as f64 * dsp::from_db10(u.power_dbfs)).sqrt();
        let path = [ChannelPath { gain: C64::new(amp, 0.0), delay_s: 0.0, doppler_hz: 0.0 }];
        for p in 0..spec.periods {
            let start = (spec.lead_samples + p * per) as f64 + u.offset_samples;
            let a = (start.floor() as i64 - margin).max(0) as usize;
            let b = ((start.ceil() as i64 + sym.samples.len() as i64 + margin).max(0) as usize).min(out.len());
            if a >= b {
                continue;
            }
            channel::accumulate(&mut out[a..b], a as f64 / fs, &sym.samples, start / fs, fs, &path, u.cfo_hz, 0.0);
        }
    }
    let np = spec.noise_power();
    if np > 0.0 {
        let mut rng = seed::rng(seed_value, &[0x10]);
        channel::add_awgn(&mut out, np, &mut rng);
    }
    IqCapture::new(out, fs, 0.0, spec.antenna_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSpec {
    #[serde(default)]
    pub srs: SrsConfig,
    pub shifts: Vec<u8>,
    pub powers_dbfs: Vec<f64>,
    /// Sample offsets relative to the first UE.
    pub offsets_samples: Vec<f64>,
    #[serde(default)]
    pub cfos_hz: Vec<f64>,
    /// Copy the composite onto a second band (mirrored below DC by default).
    #[serde(default)]
    pub duplicate_band: bool,
    /// k0 of the copy; ends one comb step below the first band when absent.
    #[serde(default)]
    pub duplicate_k0: Option<usize>,
    #[serde(default = "two")]
    pub periods: usize,
    #[serde(default)]
    pub snr_db: Option<f64>,
}

impl CompositeSpec {
    /// Three UEs on shifts {0,4,2} at -5/-8/-15 dBfs, the second and third
    /// 1.5 samples late and early, duplicated on a second band below DC.
    pub fn laboratory() -> Self {
        CompositeSpec {
            srs: SrsConfig::default(),
            shifts: vec![0, 4, 2],
            powers_dbfs: vec![-5.0, -8.0, -15.0],
            offsets_samples: vec![0.0, 1.5, -1.5],
            cfos_hz: vec![],
            duplicate_band: true,
            duplicate_k0: None,
            periods: 2,
            snr_db: Some(20.0),
        }
    }

    pub fn to_capture_spec(&self) -> Result<CaptureSpec> {
        let n = self.shifts.len();
        if n == 0 || self.powers_dbfs.len() != n || self.offsets_samples.len() != n {
            return Err(Error::Config("shifts, powers and offsets must have the same nonzero length".into()));
        }
        if !self.cfos_hz.is_empty() && self.cfos_hz.len() != n {
            return Err(Error::Config("cfos must be empty or match the number of UEs".into()));
        }
        let k0 = self.srs.k0;
        let mut band_k0 = vec![k0];
        if self.duplicate_band {
            let n = self.srs.n_fft;
            let span = self.srs.m_srs() * self.srs.comb_ktc;
            band_k0.push(self.duplicate_k0.unwrap_or((k0 + 2 * n - span) % n));
        }
        let mut ues = Vec::new();
        for b in 0..band_k0.len() {
            for i in 0..n {
                ues.push(CaptureUe {
                    id: format!("UE{}", b * n + i + 1),
                    band: b,
                    shift: self.shifts[i],
                    power_dbfs: self.powers_dbfs[i],
                    offset_samples: self.offsets_samples[i],
                    cfo_hz: self.cfos_hz.get(i).copied().unwrap_or(0.0),
                });
            }
        }
        let spec = CaptureSpec {
            schema_version: CAPTURE_SCHEMA_VERSION,
            srs: SrsConfig { k0: 0, ..self.srs.clone() },
            band_k0,
            periods: self.periods,
            lead_samples: 1000,
            snr_db: self.snr_db,
            noise_dbfs: None,
            carrier_hz: 2.4e9,
            antenna_id: 0,
            ues,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn build_composite_capture(spec: &CompositeSpec, seed_value: u64) -> Result<(CaptureSpec, IqCapture)> {
    let cs = spec.to_capture_spec()?;
    let cap = build_capture(&cs, seed_value)?;
    Ok((cs, cap))
}
