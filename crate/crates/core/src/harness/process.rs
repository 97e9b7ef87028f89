//! Offline processing of a recorded capture: acquisition, per-period
//! reception windows, matching pursuit, classification and tracking.

use serde::{Deserialize, Serialize};

use crate::capture::IqCapture;
use crate::channel::UeProfile;
use crate::error::{Error, Result};
use crate::harness::capture_spec::{check_bands, CaptureSpec};
use crate::harness::config::ScenarioFile;
use crate::ident::{self, MpOptions, Verdict};
use crate::sync::{self, SyncParams, SyncState};
use crate::waveform::SrsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSetup {
    pub srs: SrsConfig,
    pub band_k0: Vec<usize>,
    /// Labels; only id, band and shift are used.
    pub ues: Vec<UeProfile>,
    pub sync: SyncParams,
    pub mp: MpOptions,
    pub misses_before_reacquire: usize,
}

impl ProcessSetup {
    pub fn from_capture_spec(s: &CaptureSpec) -> Self {
        ProcessSetup {
            srs: s.srs.clone(),
            band_k0: s.band_k0.clone(),
            ues: s.ue_profiles(),
            sync: SyncParams::default(),
            mp: MpOptions::default(),
            misses_before_reacquire: 25,
        }
    }

    pub fn from_scenario(f: &ScenarioFile) -> Self {
        ProcessSetup {
            srs: f.srs.clone(),
            band_k0: f.band_k0.clone(),
            ues: f.ues.iter().map(|u| crate::harness::capture_spec::label_profile(&u.id, u.band, u.shift)).collect(),
            sync: f.processing.sync,
            mp: f.processing.mp,
            misses_before_reacquire: f.processing.misses_before_reacquire,
        }
    }

    /// Accepts either a capture spec or a scenario file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let origin = path.display().to_string();
        match CaptureSpec::parse(&text, &origin) {
            Ok(s) => Ok(Self::from_capture_spec(&s)),
            Err(e1) => match ScenarioFile::parse(&text, &origin) {
                Ok(f) => Ok(Self::from_scenario(&f)),
                Err(_) => Err(e1),
            },
        }
    }

    pub fn band_ues(&self, band: usize) -> Vec<UeProfile> {
        self.ues.iter().filter(|u| u.band_id == band).cloned().collect()
    }
}

/// One detection-log row: a retained component, or a bare verdict when a
/// reception produced nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub time: f64,
    pub band: usize,
    pub antenna: u32,
    pub iteration: Option<usize>,
    pub f_hat: Option<f64>,
    pub gamma_db: Option<f64>,
    pub shift_hat: Option<u8>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptionRecord {
    pub time: f64,
    pub band: usize,
    pub window_start: i64,
    pub acquisition: bool,
    pub verdict: Verdict,
    pub components: Vec<ident::DetectionComponent>,
    /// Strongest gamma per labelled UE of the band.
    pub gamma_db: Vec<(String, Option<f64>)>,
    pub eps_hat_samples: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessOutput {
    pub rows: Vec<DetectionRow>,
    pub receptions: Vec<ReceptionRecord>,
}

impl ProcessOutput {
    /// Labels with at least one confirmed detection.
    pub fn detected_labels(&self) -> std::collections::BTreeSet<String> {
        self.receptions
            .iter()
            .flat_map(|r| r.gamma_db.iter().filter(|(_, g)| g.is_some()).map(|(id, _)| id.clone()))
            .collect()
    }
}

struct Rx<'a> {
    cap: &'a IqCapture,
    band: usize,
    cfg: SrsConfig,
    ues: Vec<UeProfile>,
    mp: MpOptions,
}

impl Rx<'_> {
    fn receive(&self, start: usize, acquisition: bool, snr_db: Option<f64>, out: &mut ProcessOutput) -> Result<ReceptionRecord> {
        let l = self.cfg.half_len();
        let c = ident::despread(&self.cap.samples, start, &self.cfg, self.band)?;
        let mut mp = ident::matching_pursuit(&c, l, &self.mp);
        let verdict = ident::false_positive_check(&mp, start);
        let time = self.cap.t0_s + start as f64 / self.cap.sample_rate_hz;
        let mut rec = ReceptionRecord {
            time,
            band: self.band,
            window_start: start as i64,
            acquisition,
            verdict,
            components: vec![],
            gamma_db: self.ues.iter().map(|u| (u.ue_id.clone(), None)).collect(),
            eps_hat_samples: None,
            snr_db,
        };
        if verdict == Verdict::FalsePositive || self.ues.is_empty() {
            out.rows.push(DetectionRow {
                time,
                band: self.band,
                antenna: self.cap.antenna_id,
                iteration: None,
                f_hat: None,
                gamma_db: None,
                shift_hat: None,
                verdict: verdict.as_str().into(),
            });
            rec.components = mp.components;
            return Ok(rec);
        }
        ident::classify_components(&mut mp.components, &self.ues, l)?;
        let cleaned = ident::clean(&mp.components, &self.ues, l);
        for c in &mp.components {
            out.rows.push(DetectionRow {
                time,
                band: self.band,
                antenna: self.cap.antenna_id,
                iteration: Some(c.iter),
                f_hat: Some(c.f_hat),
                gamma_db: Some(c.gamma_db),
                shift_hat: c.shift_hat,
                verdict: verdict.as_str().into(),
            });
        }
        for (j, g) in cleaned.gamma_max_db.iter().enumerate() {
            rec.gamma_db[j].1 = *g;
        }
        rec.eps_hat_samples = cleaned.eps_hat_samples;
        rec.components = mp.components;
        Ok(rec)
    }
}

/// Processes every band of `setup` (or only `only_band`) over the whole capture.
pub fn process_capture(cap: &IqCapture, setup: &ProcessSetup, only_band: Option<usize>) -> Result<ProcessOutput> {
    cap.validate()?;
    check_bands(&setup.srs, &setup.band_k0)?;
    let fs = setup.srs.sample_rate_hz();
    if (cap.sample_rate_hz - fs).abs() > 1e-6 * fs {
        return Err(Error::RateMismatch(cap.sample_rate_hz, fs));
    }
    let bands: Vec<usize> = match only_band {
        Some(b) if b >= setup.band_k0.len() => return Err(Error::Config(format!("band {b} not defined"))),
        Some(b) => vec![b],
        None => (0..setup.band_k0.len()).collect(),
    };
    let mut out = ProcessOutput::default();
    for band in bands {
        let cfg = setup.srs.with_band_shift(setup.band_k0[band], 0);
        let rx = Rx { cap, band, cfg: cfg.clone(), ues: setup.band_ues(band), mp: setup.mp };
        process_band(&rx, setup, &mut out)?;
    }
    Ok(out)
}

fn process_band(rx: &Rx, setup: &ProcessSetup, out: &mut ProcessOutput) -> Result<()> {
    let cfg = &rx.cfg;
    let l = cfg.half_len();
    let per = cfg.period_samples() as i64;
    let n = rx.cap.len();
    if n < cfg.symbol_len() + l {
        return Err(Error::Capture(format!("capture of {n} samples is shorter than one SRS symbol")));
    }
    let trace = sync::repetition_metric(&rx.cap.samples, l, cfg.cp_len)?;
    let last_start = n - l;
    let mut from = 0usize;
    let mut state: Option<SyncState> = None;
    let mut q: i64 = 0;
    let mut misses = 0usize;
    loop {
        match state.clone() {
            None => {
                if from >= trace.m_f.len() {
                    break;
                }
                let search = (per as usize).min(trace.m_f.len() - from);
                let Some(acq) = sync::acquire(&trace, from, search, cfg.symbol_len(), &setup.sync) else {
                    from += search;
                    continue;
                };
                if acq.n_sync > last_start {
                    break;
                }
                let rec = rx.receive(acq.n_sync, true, Some(acq.snr.db), out)?;
                if rec.verdict == Verdict::SrsConfirmed {
                    let mut st = SyncState::new(acq.n_sync as i64, per, setup.sync.beta, acq.m_f_peak)?;
                    if let Some(e) = rec.eps_hat_samples {
                        st.eps_filtered = e;
                    }
                    state = Some(st);
                    q = 1;
                    misses = 0;
                } else {
                    from = acq.n_sync + 1;
                }
                out.receptions.push(rec);
            }
            Some(st) => {
                let w = st.window(q);
                if w < 0 || w as usize > last_start {
                    break;
                }
                let rec = rx.receive(w as usize, false, None, out)?;
                if rec.verdict == Verdict::FalsePositive {
                    misses += 1;
                    if misses >= setup.misses_before_reacquire.max(1) {
                        state = None;
                        from = w as usize + l;
                    }
                } else {
                    misses = 0;
                    if let Some(e) = rec.eps_hat_samples {
                        state = Some(st.track_window(q, e));
                    }
                }
                out.receptions.push(rec);
                q += 1;
            }
        }
    }
    Ok(())
}
