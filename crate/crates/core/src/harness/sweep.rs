//! Monte-Carlo sweeps: misidentification grids over inter-UE delay and
//! power spread, and localization-error CDFs over mission seeds.

use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelPath};
use crate::dsp;
use crate::error::{Error, Result};
use crate::harness::config::ScenarioFile;
use crate::harness::stats::{self, CdfPoint, Proportion};
use crate::ident::{self, MpOptions};
use crate::mission::{self, MissionReport};
use crate::seed;
use crate::sync::{self, SyncParams};
use crate::waveform::{synthesize_symbol, SrsConfig};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bandwidth {
    /// 4 RB comb-2 on a 128-point grid.
    #[serde(rename = "1.4MHz")]
    Narrow,
    /// 36 RB comb-2 on a 512-point grid.
    #[serde(rename = "13MHz")]
    Wide,
}

impl Bandwidth {
    pub fn config(self) -> SrsConfig {
        match self {
            Bandwidth::Narrow => SrsConfig::default(),
            Bandwidth::Wide => SrsConfig::wide_13mhz(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bandwidth::Narrow => "1.4MHz",
            Bandwidth::Wide => "13MHz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_end_matches("mhz") {
            "1.4" => Ok(Bandwidth::Narrow),
            "13" => Ok(Bandwidth::Wide),
            other => Err(Error::Config(format!("unknown bandwidth {other:?} (1.4, 13)"))),
        }
    }

    fn code(self) -> u64 {
        match self {
            Bandwidth::Narrow => 1,
            Bandwidth::Wide => 13,
        }
    }
}

/// Per-UE multipath: unit-power direct path plus Rayleigh taps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultipathSpec {
    pub taps: usize,
    pub first_tap_db: f64,
    pub decay_db: f64,
    pub spacing_s: f64,
}

impl Default for MultipathSpec {
    fn default() -> Self {
        MultipathSpec { taps: 4, first_tap_db: -3.0, decay_db: 2.0, spacing_s: 150e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisidSpec {
    pub ub: Vec<usize>,
    pub bandwidths: Vec<Bandwidth>,
    /// Max pairwise arrival-time difference among the band's UEs.
    pub delay_spreads_s: Vec<f64>,
    /// Max pairwise received-power gap in dB.
    pub power_spreads_db: Vec<f64>,
    pub trials: usize,
    /// Strongest UE's direct path over the per-sample noise.
    pub snr_db: f64,
    pub multipath: MultipathSpec,
    pub mp: MpOptions,
    pub sync: SyncParams,
    pub seed: u64,
}

impl Default for MisidSpec {
    fn default() -> Self {
        MisidSpec {
            ub: vec![2, 4, 8],
            bandwidths: vec![Bandwidth::Narrow],
            delay_spreads_s: (0..8).map(|i| i as f64 * 0.8e-6).collect(),
            power_spreads_db: (0..8).map(|i| i as f64 * 3.0).collect(),
            trials: 500,
            snr_db: 20.0,
            multipath: MultipathSpec::default(),
            mp: MpOptions::default(),
            sync: SyncParams::default(),
            seed: 0,
        }
    }
}

impl MisidSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.ub.is_empty() || self.bandwidths.is_empty() || self.delay_spreads_s.is_empty() || self.power_spreads_db.is_empty() {
            return Err(Error::Config("sweep axes must be nonempty".into()));
        }
        if let Some(u) = self.ub.iter().find(|&&u| u == 0 || u > 8) {
            return Err(Error::Config(format!("U_b = {u} not in 1..=8")));
        }
        if self.delay_spreads_s.iter().chain(&self.power_spreads_db).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("spreads must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delay_spread_s: f64,
    pub power_spread_db: f64,
    pub trials: u64,
    pub misid: Proportion,
    pub missed: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema_version: u32,
    pub kind: String,
    pub ub: usize,
    pub bandwidth: Bandwidth,
    pub snr_db: f64,
    pub ci_method: String,
    pub delay_spreads_s: Vec<f64>,
    pub power_spreads_db: Vec<f64>,
    /// Row-major: delay index outer, power index inner.
    pub cells: Vec<GridCell>,
}

impl ResultTable {
    pub fn cell(&self, di: usize, pi: usize) -> &GridCell {
        &self.cells[di * self.power_spreads_db.len() + pi]
    }

    /// Misidentification pooled over the power axis at delay index `di`.
    pub fn delay_column(&self, di: usize) -> Proportion {
        let np = self.power_spreads_db.len();
        let (k, n) = self.cells[di * np..(di + 1) * np].iter().fold((0, 0), |(k, n), c| (k + c.misid.k, n + c.misid.n));
        Proportion::new(k, n)
    }

    /// Misidentification pooled over the whole grid.
    pub fn pooled(&self) -> Proportion {
        let (k, n) = self.cells.iter().fold((0, 0), |(k, n), c| (k + c.misid.k, n + c.misid.n));
        Proportion::new(k, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub misidentified: bool,
    pub missed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub ub: usize,
    pub bandwidth: Bandwidth,
    pub delay_spread_s: f64,
    pub power_spread_db: f64,
    pub snr_db: f64,
    pub multipath: MultipathSpec,
    pub mp: MpOptions,
    pub sync: SyncParams,
}

/// Shifts spread evenly over the eight cyclic shifts.
pub fn spread_shifts(ub: usize) -> Vec<u8> {
    (0..ub).map(|i| (8 * i / ub.max(1)) as u8).collect()
}

/// Values in [lo, hi] whose extremes are exactly lo and hi (when n >= 2),
/// the rest uniform, in random order.
fn spread_values(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => lo,
            1 => hi,
            _ => lo + (hi - lo) * rng.random::<f64>(),
        })
        .collect();
    v.shuffle(rng);
    v
}

fn cn(rng: &mut impl Rng, power: f64) -> C64 {
    let s = (0.5 * power).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// One synthetic reception: U_b UEs on one band, acquired from the metric,
/// despread, matched-pursuit decomposed and classified. A retained component
/// (strongest per shift) is wrong when the closest true UE frequency belongs
/// to another UE.
pub fn misid_trial(p: &TrialParams, trial_seed: u64) -> Result<TrialOutcome> {
    let cfg = p.bandwidth.config();
    let fs = cfg.sample_rate_hz();
    let l = cfg.half_len();
    let mut rng = seed::rng(trial_seed, &[]);
    let shifts = spread_shifts(p.ub);
    let delays = spread_values(&mut rng, p.ub, 0.0, p.delay_spread_s);
    let powers_db = spread_values(&mut rng, p.ub, -p.power_spread_db, 0.0);

    let mp_span = p.multipath.taps as f64 * p.multipath.spacing_s;
    let lead = 2 * cfg.symbol_len();
    let tail = 2 * cfg.symbol_len() + dsp::FD_TAPS;
    let len = lead + cfg.symbol_len() + ((p.delay_spread_s + mp_span) * fs).ceil() as usize + tail;
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for u in 0..p.ub {
        let sym = synthesize_symbol(&cfg.with_band_shift(cfg.k0, shifts[u]))?;
        // symbol body has per-sample power 1/N; the direct path brings it to powers_db
        let amp = (cfg.n_fft as f64 * dsp::from_db10(powers_db[u])).sqrt();
        let mut paths = vec![ChannelPath { gain: C64::from_polar(amp, rng.random::<f64>() * std::f64::consts::TAU), delay_s: 0.0, doppler_hz: 0.0 }];
        for t in 0..p.multipath.taps {
            let pw = dsp::from_db10(p.multipath.first_tap_db - t as f64 * p.multipath.decay_db);
            paths.push(ChannelPath { gain: cn(&mut rng, pw) * amp, delay_s: (t + 1) as f64 * p.multipath.spacing_s, doppler_hz: 0.0 });
        }
        let t0 = lead as f64 / fs + delays[u];
        channel::accumulate(&mut buf, 0.0, &sym.samples, t0, fs, &paths, 0.0, 0.0);
    }
    channel::add_awgn(&mut buf, 1.0 / dsp::from_db10(p.snr_db), &mut rng);

    let trace = sync::repetition_metric(&buf, l, cfg.cp_len)?;
    let search = len.saturating_sub(l + cfg.symbol_len());
    let Some(acq) = sync::acquire(&trace, 0, search, cfg.symbol_len(), &p.sync) else {
        return Ok(TrialOutcome { misidentified: false, missed: true });
    };
    if acq.n_sync + l > len {
        return Ok(TrialOutcome { misidentified: false, missed: true });
    }
    let c = ident::despread(&buf, acq.n_sync, &cfg, 0)?;
    let mp = ident::matching_pursuit(&c, l, &p.mp);

    let lf = l as f64;
    let true_f: Vec<f64> = (0..p.ub)
        .map(|u| {
            let eps = (lead + cfg.cp_len) as f64 + delays[u] * fs - acq.n_sync as f64;
            (f64::from(shifts[u]) / 8.0 - eps / lf).rem_euclid(1.0)
        })
        .collect();
    let mut best: Vec<Option<(f64, f64)>> = vec![None; p.ub];
    for comp in &mp.components {
        let (w, _) = ident::classify_shift(comp.f_hat, &shifts, l)?;
        let j = shifts.iter().position(|&s| s == w).unwrap_or(0);
        if best[j].is_none_or(|(g, _)| comp.gamma_db > g) {
            best[j] = Some((comp.gamma_db, comp.f_hat));
        }
    }
    let mut out = TrialOutcome::default();
    for (j, b) in best.iter().enumerate() {
        match b {
            None => out.missed = true,
            Some((_, f)) => {
                let origin = (0..p.ub)
                    .min_by(|&a, &b| ident::circ_dist(*f, true_f[a]).total_cmp(&ident::circ_dist(*f, true_f[b])))
                    .unwrap_or(j);
                if origin != j {
                    out.misidentified = true;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// One table per (U_b, bandwidth), cells in row-major (delay, power) order.
pub fn run_misid_grid(spec: &MisidSpec) -> Result<Vec<ResultTable>> {
    spec.validate()?;
    let nd = spec.delay_spreads_s.len();
    let np = spec.power_spreads_db.len();
    let mut jobs = Vec::new();
    for &ub in &spec.ub {
        for &bw in &spec.bandwidths {
            for di in 0..nd {
                for pi in 0..np {
                    jobs.push((ub, bw, di, pi));
                }
            }
        }
    }
    let results = par_map(&jobs, |&(ub, bw, di, pi)| -> Result<GridCell> {
        let p = TrialParams {
            ub,
            bandwidth: bw,
            delay_spread_s: spec.delay_spreads_s[di],
            power_spread_db: spec.power_spreads_db[pi],
            snr_db: spec.snr_db,
            multipath: spec.multipath,
            mp: spec.mp,
            sync: spec.sync,
        };
        let (mut k_mis, mut k_miss) = (0u64, 0u64);
        for t in 0..spec.trials {
            let s = seed::derive(spec.seed, &[ub as u64, bw.code(), di as u64, pi as u64, t as u64]);
            let o = misid_trial(&p, s)?;
            k_mis += u64::from(o.misidentified);
            k_miss += u64::from(o.missed);
        }
        let n = spec.trials as u64;
        Ok(GridCell {
            delay_spread_s: p.delay_spread_s,
            power_spread_db: p.power_spread_db,
            trials: n,
            misid: Proportion::new(k_mis, n),
            missed: Proportion::new(k_miss, n),
        })
    });
    let mut cells = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let mut tables = Vec::new();
    for &ub in &spec.ub {
        for &bw in &spec.bandwidths {
            tables.push(ResultTable {
                schema_version: RESULT_SCHEMA_VERSION,
                kind: "misid_grid".into(),
                ub,
                bandwidth: bw,
                snr_db: spec.snr_db,
                ci_method: "wilson95".into(),
                delay_spreads_s: spec.delay_spreads_s.clone(),
                power_spreads_db: spec.power_spreads_db.clone(),
                cells: cells.by_ref().take(nd * np).collect(),
            });
        }
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAle {
    pub seed: u64,
    pub ale_initial_m: Option<f64>,
    pub ale_refined_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocCdfTable {
    pub schema_version: u32,
    pub kind: String,
    pub scenario: String,
    pub seeds: Vec<SeedAle>,
    /// Seed-mean of the per-mission ALE.
    pub ale_initial_m: Option<f64>,
    pub ale_refined_m: Option<f64>,
    pub le_initial_m: Vec<f64>,
    pub le_refined_m: Vec<f64>,
    pub cdf_initial: Vec<CdfPoint>,
    pub cdf_refined: Vec<CdfPoint>,
}

impl LocCdfTable {
    /// Fraction of seeds whose refined ALE exceeds `bound_m` (missing counts as exceeding).
    pub fn violation_fraction(&self, bound_m: f64) -> f64 {
        if self.seeds.is_empty() {
            return 0.0;
        }
        let bad = self.seeds.iter().filter(|s| s.ale_refined_m.is_none_or(|a| a > bound_m)).count();
        bad as f64 / self.seeds.len() as f64
    }
}

/// Missions for seeds `first_seed .. first_seed + n_seeds`, pooled.
pub fn run_loc_cdf(file: &ScenarioFile, first_seed: u64, n_seeds: u64) -> Result<LocCdfTable> {
    if n_seeds == 0 {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let seeds: Vec<u64> = (first_seed..first_seed + n_seeds).collect();
    let reports = par_map(&seeds, |&s| -> Result<MissionReport> {
        let (sc, plan) = file.build(s)?;
        mission::run_mission(&sc, &plan, s)
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(loc_table(&file.name, &seeds, &reports))
}

pub fn loc_table(name: &str, seeds: &[u64], reports: &[MissionReport]) -> LocCdfTable {
    let mut le_i = Vec::new();
    let mut le_r = Vec::new();
    let mut per_seed = Vec::new();
    for (&s, r) in seeds.iter().zip(reports) {
        for row in &r.estimates {
            if let Some(e) = &row.initial {
                le_i.push(e.le_m);
            }
            if let Some(e) = &row.refined {
                le_r.push(e.le_m);
            }
        }
        per_seed.push(SeedAle { seed: s, ale_initial_m: r.ale_initial_m, ale_refined_m: r.ale_refined_m });
    }
    let ai: Vec<f64> = per_seed.iter().filter_map(|s| s.ale_initial_m).collect();
    let ar: Vec<f64> = per_seed.iter().filter_map(|s| s.ale_refined_m).collect();
    LocCdfTable {
        schema_version: RESULT_SCHEMA_VERSION,
        kind: "loc_cdf".into(),
        scenario: name.to_string(),
        seeds: per_seed,
        ale_initial_m: stats::mean(&ai),
        ale_refined_m: stats::mean(&ar),
        cdf_initial: stats::ecdf(&le_i),
        cdf_refined: stats::ecdf(&le_r),
        le_initial_m: le_i,
        le_refined_m: le_r,
    }
}
