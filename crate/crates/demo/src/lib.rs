//! Browser bindings. Every export returns a JSON string for the page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use srs_sense::channel::{self, ChannelPath};
use srs_sense::harness::capture_spec::{build_composite_capture, CompositeSpec};
use srs_sense::harness::config::ScenarioFile;
use srs_sense::harness::process::{process_capture, ProcessSetup};
use srs_sense::waveform::{synthesize_symbol, SrsConfig};
use srs_sense::{dsp, mission, seed, sync, C64};

fn to_js<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn err(e: srs_sense::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>, JsError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| JsError::new(&format!("not a number: {t:?}"))))
        .collect()
}

#[derive(Serialize)]
struct MetricOut {
    n: Vec<i64>,
    measured: Vec<f64>,
    filtered: Vec<f64>,
    predicted: Vec<f64>,
    n_sync: Option<i64>,
}

/// Two UEs on shifts 0 and 4, the second `delta` samples late and
/// `gap_db` weaker. Window positions are relative to the first UE's CP start.
#[wasm_bindgen]
pub fn metric_trace(delta: f64, gap_db: f64, snr_db: f64, seed_value: u64) -> Result<String, JsError> {
    let cfg = SrsConfig::default();
    let (l, cp, fs) = (cfg.half_len(), cfg.cp_len, cfg.sample_rate_hz());
    let lead = 3 * cfg.symbol_len();
    let len = lead + 4 * cfg.symbol_len() + delta.abs().ceil() as usize;
    let mut y = vec![C64::new(0.0, 0.0); len];
    let p2 = dsp::from_db10(-gap_db);
    for (w, d, p) in [(0u8, 0.0, 1.0), (4u8, delta, p2)] {
        let sym = synthesize_symbol(&cfg.with_band_shift(0, w)).map_err(err)?;
        let amp = (cfg.n_fft as f64 * p).sqrt();
        let path = [ChannelPath { gain: C64::new(amp, 0.0), delay_s: 0.0, doppler_hz: 0.0 }];
        channel::accumulate(&mut y, 0.0, &sym.samples, (lead as f64 + d) / fs, fs, &path, 0.0, 0.0);
    }
    let mut rng = seed::rng(seed_value, &[0xD1]);
    channel::add_awgn(&mut y, (1.0 + p2) / dsp::from_db10(snr_db), &mut rng);
    let trace = sync::repetition_metric(&y, l, cp).map_err(err)?;
    let lo = lead - 2 * l;
    let hi = (lead + 2 * l + delta.max(0.0) as usize).min(trace.m.len());
    let acq = sync::acquire(&trace, 0, trace.m_f.len(), cfg.symbol_len(), &sync::SyncParams::default());
    let mut out = MetricOut { n: vec![], measured: vec![], filtered: vec![], predicted: vec![], n_sync: acq.map(|a| a.n_sync as i64 - lead as i64) };
    for n in lo..hi {
        let rel = n as f64 - lead as f64;
        out.n.push(rel as i64);
        out.measured.push(trace.m[n]);
        out.filtered.push(trace.m_f[n]);
        out.predicted.push(sync::predict_metric(&[(1.0, -rel), (p2, delta - rel)], l, cp));
    }
    to_js(&out)
}

#[derive(Serialize)]
struct Component {
    f_hat: f64,
    gamma_db: f64,
    shift_hat: Option<u8>,
}

#[derive(Serialize)]
struct SpectrumOut {
    f: Vec<f64>,
    magnitude_db: Vec<f64>,
    components: Vec<Component>,
    verdict: String,
}

/// Composite capture of the given shifts/powers/offsets, first reception of band 0.
#[wasm_bindgen]
pub fn despread_spectrum(shifts: &str, powers_dbfs: &str, offsets: &str, snr_db: f64, seed_value: u64) -> Result<String, JsError> {
    let spec = CompositeSpec {
        shifts: parse_list(shifts)?.into_iter().map(|v| v as u8).collect(),
        powers_dbfs: parse_list(powers_dbfs)?,
        offsets_samples: parse_list(offsets)?,
        duplicate_band: false,
        periods: 1,
        snr_db: Some(snr_db),
        ..CompositeSpec::laboratory()
    };
    let (cs, cap) = build_composite_capture(&spec, seed_value).map_err(err)?;
    let setup = ProcessSetup::from_capture_spec(&cs);
    let res = process_capture(&cap, &setup, Some(0)).map_err(err)?;
    let rec = res.receptions.first().ok_or_else(|| JsError::new("no SRS acquired"))?;
    let cfg = cs.srs.with_band_shift(cs.band_k0[0], 0);
    let c = srs_sense::ident::despread(&cap.samples, rec.window_start as usize, &cfg, 0).map_err(err)?;
    let m = c.c.len();
    let d = 16 * m.next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); d];
    buf[..m].copy_from_slice(&c.c);
    dsp::ifft(&mut buf);
    let f = (0..d).map(|i| i as f64 / d as f64).collect();
    let magnitude_db = buf.iter().map(|v| 20.0 * (v.norm() * d as f64 / m as f64).max(1e-9).log10()).collect();
    let components = rec.components.iter().map(|c| Component { f_hat: c.f_hat, gamma_db: c.gamma_db, shift_hat: c.shift_hat }).collect();
    to_js(&SpectrumOut { f, magnitude_db, components, verdict: rec.verdict.as_str().into() })
}

#[derive(Serialize)]
struct UeOut {
    id: String,
    truth: [f64; 2],
    initial: Option<[f64; 2]>,
    refined: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct MissionOut {
    area: Vec<[f64; 2]>,
    path: Vec<[f64; 2]>,
    ues: Vec<UeOut>,
    ale_initial_m: Option<f64>,
    ale_refined_m: Option<f64>,
    flight_time_s: f64,
}

/// Full simulated mission on a preset ("rural" or "urban").
#[wasm_bindgen]
pub fn run_mission(preset: &str, seed_value: u64) -> Result<String, JsError> {
    let file = ScenarioFile::preset(preset).map_err(err)?;
    let (sc, plan) = file.build(seed_value).map_err(err)?;
    let rep = mission::run_mission(&sc, &plan, seed_value).map_err(err)?;
    let mut path: Vec<[f64; 2]> = rep.measurements.iter().map(|m| m.uav_xy_m).collect();
    path.dedup();
    let ues = rep
        .estimates
        .iter()
        .map(|e| UeOut {
            id: e.ue_id.clone(),
            truth: e.true_xy,
            initial: e.initial.as_ref().map(|v| v.m_hat_xy),
            refined: e.refined.as_ref().map(|v| v.m_hat_xy),
        })
        .collect();
    to_js(&MissionOut {
        area: plan.area_polygon.clone(),
        path,
        ues,
        ale_initial_m: rep.ale_initial_m,
        ale_refined_m: rep.ale_refined_m,
        flight_time_s: rep.total_time_s,
    })
}
