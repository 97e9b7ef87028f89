//! Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
//! are fixed here. `ACCEPTANCE_ONLY=1,4` runs a subset; `ACCEPTANCE_STRICT=1`
//! turns any FAIL into a nonzero exit.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use srs_sense::channel::{self, ChannelPath};
use srs_sense::harness::capture_spec::{build_composite_capture, CompositeSpec};
use srs_sense::harness::config::ScenarioFile;
use srs_sense::harness::iq::{read_iq, sidecar_path, write_iq};
use srs_sense::harness::process::{process_capture, ProcessSetup};
use srs_sense::harness::stats::Proportion;
use srs_sense::harness::sweep::{run_loc_cdf, run_misid_grid, spread_shifts, Bandwidth, LocCdfTable, MisidSpec, ResultTable};
use srs_sense::ident::{self, DespreadSpectrum, MpOptions};
use srs_sense::locate::{mean_shift, Vec2};
use srs_sense::sync;
use srs_sense::waveform::{synthesize_symbol, SrsConfig};
use srs_sense::{seed, IqCapture, C64};

// tolerances
const METRIC_TOL: f64 = 0.05;
const CFO_PPM: f64 = 0.5;
const CARRIER_HZ: f64 = 2.4e9;
const CFO_METRIC_TOL: f64 = 1e-6;
const MISID_TRIALS: usize = 500;
const SMALL_DELAY_S: f64 = 1.6e-6;
const NEAR_ZERO: f64 = 0.02;
const MP_CASES: usize = 1000;
const MP_AMP_TOL: f64 = 1e-6;
const MP_FREQ_TOL: f64 = 1e-9;
const COMPOSITE_SEEDS: u64 = 200;
const COMPOSITE_SNR_DB: f64 = 10.0;
const COMPOSITE_RATE: f64 = 0.99;
const LOC_SEEDS: u64 = 50;
const RURAL_ALE_M: f64 = 3.0;
const URBAN_ALE_M: f64 = 8.0;
const LOC_VIOLATIONS: f64 = 0.10;
const MS_SETS: usize = 100;
const MS_TOL_M: f64 = 0.1;
const GRID_STEP_M: f64 = 0.1;
const SNR_TRIALS: usize = 100;
const SNR_TOL_DB: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// One symbol whose CP starts at fractional sample `at`, scaled to `power` per sample.
fn place(y: &mut [C64], cfg: &SrsConfig, w: u8, at: f64, power: f64, phase: f64) {
    let sym = synthesize_symbol(&cfg.with_band_shift(cfg.k0, w)).unwrap();
    let amp = (cfg.n_fft as f64 * power).sqrt();
    let path = [ChannelPath { gain: C64::from_polar(amp, phase), delay_s: 0.0, doppler_hz: 0.0 }];
    let fs = cfg.sample_rate_hz();
    channel::accumulate(y, 0.0, &sym.samples, at / fs, fs, &path, 0.0, 0.0);
}

fn c1_metric() -> Outcome {
    let mut worst = Vec::new();
    for (name, cfg) in [("1.4MHz", SrsConfig::default()), ("13MHz", SrsConfig::wide_13mhz())] {
        let (l, cp) = (cfg.half_len(), cfg.cp_len);
        let n0 = 4 * l;
        let mut w_err = (0.0f64, 0.0);
        for w in 0..8u8 {
            let mut dt = -2.0 * l as f64;
            while dt <= 2.0 * l as f64 {
                let mut y = vec![C64::new(0.0, 0.0); 10 * l];
                place(&mut y, &cfg, w, n0 as f64 + dt, 1.0, 0.0);
                let e = (sync::metric_at(&y, n0, l) - sync::predict_metric(&[(1.0, dt)], l, cp)).abs();
                if e > w_err.0 {
                    w_err = (e, dt);
                }
                dt += 0.5;
            }
        }
        worst.push((name, w_err));
    }
    // two UEs on shifts 0 and 6: the second correlates with the first when
    // it is late by 6L/8 samples, which the prediction does not model
    let cfg = SrsConfig::default();
    let (l, cp) = (cfg.half_len(), cfg.cp_len);
    let n0 = 4 * l;
    let mut notch = (0.0f64, 0.0, 0.0);
    let mut dt = 0.0;
    while dt <= 2.0 * l as f64 {
        let mut y = vec![C64::new(0.0, 0.0); 10 * l];
        place(&mut y, &cfg, 0, n0 as f64 - 4.0, 1.0, 0.0);
        place(&mut y, &cfg, 6, n0 as f64 - 4.0 + dt, 1.0, 0.0);
        let m = sync::metric_at(&y, n0, l);
        let p = sync::predict_metric(&[(1.0, -4.0), (1.0, dt - 4.0)], l, cp);
        if (m - p).abs() > notch.0.abs() {
            notch = (m - p, dt, m);
        }
        dt += 1.0;
    }
    let pass = worst.iter().all(|(_, (e, _))| *e <= METRIC_TOL);
    let parts: Vec<String> =
        worst.iter().map(|(n, (e, d))| format!("{n} single-UE max |M-pred| {e:.3} at dt {d}")).collect();
    outcome(
        pass,
        format!(
            "{} (tol {METRIC_TOL}); two-UE shifts 0/6: max M-pred {:+.2} at dt {} (overlap at {})",
            parts.join(", "),
            notch.0,
            notch.1,
            6 * l / 8
        ),
    )
}

fn c2_cfo() -> Outcome {
    let cfg = SrsConfig::default();
    let (l, cp, fs) = (cfg.half_len(), cfg.cp_len, cfg.sample_rate_hz());
    let max_cfo = CFO_PPM * 1e-6 * CARRIER_HZ;
    let mut worst = 0.0f64;
    let cases = 256;
    for s in 0..cases {
        let mut rng = seed::rng(s, &[2]);
        let cfo = rng.random_range(-max_cfo..=max_cfo);
        let mut y = vec![C64::new(0.0, 0.0); 1200];
        place(&mut y, &cfg, rng.random_range(0..8), rng.random_range(200.0..600.0), 1.0, rng.random_range(0.0..TAU));
        channel::add_awgn(&mut y, rng.random_range(1e-3..1.0), &mut rng);
        let r: Vec<C64> = y.iter().enumerate().map(|(n, v)| v * C64::from_polar(1.0, TAU * cfo * n as f64 / fs)).collect();
        let a = sync::repetition_metric(&y, l, cp).unwrap().m;
        let b = sync::repetition_metric(&r, l, cp).unwrap().m;
        worst = a.iter().zip(&b).map(|(x, z)| (x - z).abs()).fold(worst, f64::max);
    }
    outcome(worst < CFO_METRIC_TOL, format!("{cases} random captures, CFO up to {max_cfo:.0} Hz: max |dM| {worst:.2e} (tol {CFO_METRIC_TOL:.0e})"))
}

fn small_delay_pool(t: &ResultTable) -> Proportion {
    let (mut k, mut n) = (0, 0);
    for (di, &d) in t.delay_spreads_s.iter().enumerate() {
        if d <= SMALL_DELAY_S + 1e-12 {
            let c = t.delay_column(di);
            k += c.k;
            n += c.n;
        }
    }
    Proportion::new(k, n)
}

fn c3_misid() -> Outcome {
    let narrow = MisidSpec { trials: MISID_TRIALS, ..MisidSpec::default() };
    let wide = MisidSpec { ub: vec![4], bandwidths: vec![Bandwidth::Wide], ..narrow.clone() };
    let n = match run_misid_grid(&narrow) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let w = match run_misid_grid(&wide) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let by_ub = |u: usize| n.iter().find(|t| t.ub == u).unwrap();
    let (p2, p4, p8) = (by_ub(2).pooled(), by_ub(4).pooled(), by_ub(8).pooled());
    let monotone = p2.ci_hi < p4.ci_lo && p4.ci_hi < p8.ci_lo;
    let (n4, w4) = (by_ub(4), &w[0]);
    let (pn, pw) = (n4.pooled(), w4.pooled());
    let columns_ok = (0..n4.delay_spreads_s.len()).all(|di| w4.delay_column(di).ci_lo <= n4.delay_column(di).ci_hi);
    let wider_better = pw.ci_hi < pn.ci_lo && columns_ok;
    let small = small_delay_pool(by_ub(2));
    let near_zero = small.ci_hi <= NEAR_ZERO;
    outcome(
        monotone && wider_better && near_zero,
        format!(
            "{MISID_TRIALS}/cell 8x8; pooled misid U2 {:.3} [{:.3},{:.3}] U4 {:.3} [{:.3},{:.3}] U8 {:.3} [{:.3},{:.3}] monotone={monotone}; \
             U4 13MHz {:.3} [{:.3},{:.3}] vs 1.4MHz {:.3} per-column not worse={columns_ok}; \
             U2 delay<={:.1}us {:.4} ci_hi {:.4} (<= {NEAR_ZERO})",
            p2.p, p2.ci_lo, p2.ci_hi, p4.p, p4.ci_lo, p4.ci_hi, p8.p, p8.ci_lo, p8.ci_hi,
            pw.p, pw.ci_lo, pw.ci_hi, pn.p,
            SMALL_DELAY_S * 1e6, small.p, small.ci_hi
        ),
    )
}

fn c4_mp() -> Outcome {
    let opts = MpOptions::default();
    let (mut order_ok, mut freq_err, mut amp_err) = (0usize, 0.0f64, 0.0f64);
    for case in 0..MP_CASES {
        let mut rng = seed::rng(case as u64, &[4]);
        let (m, l) = if case % 2 == 0 { (24, 64) } else { (216, 256) };
        let k = rng.random_range(1..=4usize);
        let mut bins: Vec<usize> = Vec::new();
        while bins.len() < k {
            let b = rng.random_range(0..m);
            if !bins.contains(&b) {
                bins.push(b);
            }
        }
        let truth: Vec<(f64, C64)> = bins
            .iter()
            .map(|&b| (b as f64 / m as f64, C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..TAU))))
            .collect();
        let c: Vec<C64> = (0..m)
            .map(|i| truth.iter().map(|&(f, a)| a * C64::from_polar(1.0, TAU * f * i as f64)).sum())
            .collect();
        let mp = ident::matching_pursuit(&DespreadSpectrum { c, band_id: 0 }, l, &opts);
        if mp.components.len() == k {
            order_ok += 1;
        }
        for &(f, a) in &truth {
            let Some(best) = mp.components.iter().min_by(|x, y| ident::circ_dist(x.f_hat, f).total_cmp(&ident::circ_dist(y.f_hat, f)))
            else {
                freq_err = f64::INFINITY;
                continue;
            };
            freq_err = freq_err.max(ident::circ_dist(best.f_hat, f));
            amp_err = amp_err.max((best.a_hat - a).norm());
        }
    }
    outcome(
        order_ok == MP_CASES && freq_err <= MP_FREQ_TOL && amp_err <= MP_AMP_TOL,
        format!("{MP_CASES} cases (M 24/216, K<=4): BIC order = K in {order_ok}; max freq err {freq_err:.1e}, max amp err {amp_err:.1e}"),
    )
}

fn c5_regions() -> Outcome {
    let cfg = SrsConfig::default();
    let (l, cp) = (cfg.half_len(), cfg.cp_len);
    let opts = MpOptions::default();
    let (mut total, mut wrong) = (0usize, Vec::new());
    for ub in [2usize, 4, 8] {
        let shifts = spread_shifts(ub);
        let half = l as f64 / (2 * ub) as f64;
        // quarter-sample grid, endpoints excluded
        let steps = (4.0 * half).round() as i64;
        for &w in &shifts {
            for s in (-steps + 1)..steps {
                let eps = s as f64 / 4.0;
                let n_sync = 3 * l;
                let mut y = vec![C64::new(0.0, 0.0); 8 * l];
                // a preceding symbol keeps the window filled when it starts before the CP
                place(&mut y, &cfg, w, n_sync as f64 + eps - (cp + 2 * l + cp) as f64, 1.0, 0.0);
                place(&mut y, &cfg, w, n_sync as f64 + eps - cp as f64, 1.0, 0.0);
                let c = ident::despread(&y, n_sync, &cfg, 0).unwrap();
                let mp = ident::matching_pursuit(&c, l, &opts);
                let got = mp
                    .components
                    .iter()
                    .max_by(|a, b| a.gamma_db.total_cmp(&b.gamma_db))
                    .map(|c| ident::classify_shift(c.f_hat, &shifts, l).unwrap().0);
                total += 1;
                if got != Some(w) {
                    wrong.push((ub, w, eps));
                }
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{total} (U, shift, eps) points on a 0.25-sample grid: {} misclassified{}", wrong.len(), match wrong.first() {
            Some(x) => format!(", first {x:?}"),
            None => String::new(),
        }),
    )
}

fn c6_composite() -> Outcome {
    let spec = CompositeSpec { snr_db: Some(COMPOSITE_SNR_DB), ..CompositeSpec::laboratory() };
    let mut ok = 0;
    let mut fails = Vec::new();
    for s in 0..COMPOSITE_SEEDS {
        let res = build_composite_capture(&spec, s)
            .and_then(|(cs, cap)| process_capture(&cap, &ProcessSetup::from_capture_spec(&cs), None));
        match res {
            Ok(out) if out.detected_labels().len() == 6 => ok += 1,
            _ => fails.push(s),
        }
    }
    let rate = ok as f64 / COMPOSITE_SEEDS as f64;
    outcome(
        rate >= COMPOSITE_RATE,
        format!("{ok}/{COMPOSITE_SEEDS} seeds recovered all 6 labels at {COMPOSITE_SNR_DB} dB (need {COMPOSITE_RATE}); failing seeds {fails:?}"),
    )
}

fn loc(name: &str) -> Result<LocCdfTable, String> {
    let f = ScenarioFile::preset(name).map_err(|e| e.to_string())?;
    run_loc_cdf(&f, 1, LOC_SEEDS).map_err(|e| e.to_string())
}

fn c7_loc(tables: &[(String, Result<LocCdfTable, String>, Duration)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t, dur) in tables {
        let bound = if name == "rural" { RURAL_ALE_M } else { URBAN_ALE_M };
        match t {
            Ok(t) => {
                let ale = t.ale_refined_m.unwrap_or(f64::INFINITY);
                let viol = t.violation_fraction(bound);
                let in_time = *dur <= Duration::from_secs(20 * 60);
                pass &= ale <= bound && viol <= LOC_VIOLATIONS && in_time;
                parts.push(format!(
                    "{name}: refined ALE {ale:.2} m (<= {bound}), seeds over bound {:.0}% (<= {:.0}%), {:.0}s",
                    100.0 * viol,
                    100.0 * LOC_VIOLATIONS,
                    dur.as_secs_f64()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, format!("{LOC_SEEDS} seeds each; {}", parts.join("; ")))
}

fn c8_refine(tables: &[(String, Result<LocCdfTable, String>, Duration)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t, _) in tables {
        match t {
            Ok(t) => {
                let (i, r) = (t.ale_initial_m.unwrap_or(f64::NAN), t.ale_refined_m.unwrap_or(f64::NAN));
                pass &= r <= i;
                parts.push(format!("{name}: initial {i:.2} m, refined {r:.2} m"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn kde(points: &[Vec2], w: &[f64], h: Vec2, m: Vec2) -> f64 {
    points
        .iter()
        .zip(w)
        .map(|(p, w)| w * (-0.5 * (((p[0] - m[0]) / h[0]).powi(2) + ((p[1] - m[1]) / h[1]).powi(2))).exp())
        .sum()
}

fn c9_mean_shift() -> Outcome {
    let mut worst = 0.0f64;
    for set in 0..MS_SETS {
        let mut rng = seed::rng(set as u64, &[9]);
        let n = rng.random_range(5..=200usize);
        let c = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
        let sd = rng.random_range(2.0..6.0);
        let nd = Normal::new(0.0, sd).unwrap();
        let pts: Vec<Vec2> = (0..n).map(|_| [c[0] + nd.sample(&mut rng), c[1] + nd.sample(&mut rng)]).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.0)).collect();
        // bandwidth above the spread keeps the density unimodal
        let h = [rng.random_range(1.5..3.0) * sd, rng.random_range(1.5..3.0) * sd];
        let ms = mean_shift(&pts, &w, h, None, 1e-9, 10_000).unwrap();
        let lo = [pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
        let hi = [pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)];
        let (nx, ny) = (((hi[0] - lo[0]) / GRID_STEP_M).ceil() as usize, ((hi[1] - lo[1]) / GRID_STEP_M).ceil() as usize);
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..=nx {
            for j in 0..=ny {
                let m = [lo[0] + GRID_STEP_M * i as f64, lo[1] + GRID_STEP_M * j as f64];
                let v = kde(&pts, &w, h, m);
                if v > best.0 {
                    best = (v, m);
                }
            }
        }
        worst = worst.max(((ms.xy[0] - best.1[0]).powi(2) + (ms.xy[1] - best.1[1]).powi(2)).sqrt());
    }
    outcome(worst <= MS_TOL_M, format!("{MS_SETS} sets: max distance to grid KDE maximizer {worst:.3} m (tol {MS_TOL_M})"))
}

fn c10_snr() -> Outcome {
    let cfg = SrsConfig::default();
    let (l, cp) = (cfg.half_len(), cfg.cp_len);
    let mut worst = (0.0f64, 0);
    let mut line = Vec::new();
    for snr in 0..=15 {
        let mut sum = 0.0;
        for t in 0..SNR_TRIALS {
            let mut rng = seed::rng(t as u64, &[10, snr as u64]);
            let at = rng.random_range(400.0..500.0f64).floor();
            let mut y = vec![C64::new(0.0, 0.0); 1200];
            place(&mut y, &cfg, rng.random_range(0..8), at, 1.0, rng.random_range(0.0..TAU));
            channel::add_awgn(&mut y, 1.0 / 10f64.powf(snr as f64 / 10.0), &mut rng);
            let tr = sync::repetition_metric(&y, l, cp).unwrap();
            let n = sync::peak_in(&tr, at as usize - l, at as usize + l, 0.0).unwrap();
            sum += sync::estimate_snr(tr.m_f[n]).db;
        }
        let mean = sum / SNR_TRIALS as f64;
        if (mean - snr as f64).abs() > worst.0 {
            worst = ((mean - snr as f64).abs(), snr);
        }
        if snr % 5 == 0 {
            line.push(format!("{snr}->{mean:.2}"));
        }
    }
    outcome(
        worst.0 <= SNR_TOL_DB,
        format!("{SNR_TRIALS} trials/point, mean estimate {} dB; worst error {:.2} dB at {} dB (tol {SNR_TOL_DB})", line.join(" "), worst.0, worst.1),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_srs-sense"))
        .args(["--out-dir", dir.to_str().unwrap()])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let d = dir.to_str().unwrap();
    cli(dir, &["--seed", "7", "composite"])?;
    let spec = format!("{d}/composite.spec.toml");
    let iq = format!("{d}/composite.iq");
    cli(dir, &["--config", &spec, "process", &iq])?;
    cli(dir, &["--config", &spec, "--format", "json", "process", &iq])?;
    cli(dir, &["--seed", "7", "mission", "--preset", "rural"])?;
    cli(dir, &["--seed", "7", "sweep", "--kind", "misid", "--ub", "2,4", "--trials", "2"])?;
    Ok(())
}

fn c11_repro() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = pipeline(a.path()).and_then(|_| pipeline(b.path())) {
        return outcome(false, e);
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let differing: Vec<&String> =
        names.iter().filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok()).collect();
    // lossless: re-writing a decoded capture gives the same bytes, and arbitrary f32 pairs survive
    let src = a.path().join("composite.iq");
    let copy = a.path().join("copy.iq");
    let cap = read_iq(&src).unwrap();
    write_iq(&copy, &cap, 2.4e9).unwrap();
    let same_payload = std::fs::read(&src).unwrap() == std::fs::read(&copy).unwrap();
    let same_sidecar = std::fs::read(sidecar_path(&src)).unwrap() == std::fs::read(sidecar_path(&copy)).unwrap();
    let mut rng = seed::rng(11, &[]);
    let raw: Vec<C64> = (0..4096)
        .map(|_| C64::new(f64::from(f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF)), f64::from(rng.random::<f32>() - 0.5)))
        .collect();
    let rnd = IqCapture::new(raw, 30.72e6, 0.1 + PI, 3).unwrap();
    let p = a.path().join("rnd.iq");
    write_iq(&p, &rnd, 2.4e9).unwrap();
    let back = read_iq(&p).unwrap();
    let lossless = back.samples == rnd.samples && back.t0_s == rnd.t0_s && back.sample_rate_hz == rnd.sample_rate_hz;
    outcome(
        differing.is_empty() && same_payload && same_sidecar && lossless,
        format!(
            "{} output files from two seeded runs, {} differ; IQ re-write identical={}, random cf32 round trip exact={lossless}",
            names.len(),
            differing.len(),
            same_payload && same_sidecar
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let want = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    // budgets in seconds
    let budget = [60u64, 10, 1800, 60, 60, 300, 1200, 1200, 120, 120, 60];
    let mut results: Vec<(u32, Outcome, Duration)> = Vec::new();
    let mut run = |n: u32, f: &dyn Fn() -> Outcome, before: Duration| {
        if want(n) {
            let t = Instant::now();
            let o = f();
            let d = t.elapsed() + before;
            report(n, &o, d, budget[n as usize - 1]);
            results.push((n, o, d));
        }
    };
    run(1, &c1_metric, Duration::ZERO);
    run(2, &c2_cfo, Duration::ZERO);
    run(3, &c3_misid, Duration::ZERO);
    run(4, &c4_mp, Duration::ZERO);
    run(5, &c5_regions, Duration::ZERO);
    run(6, &c6_composite, Duration::ZERO);
    if want(7) || want(8) {
        let tables: Vec<(String, Result<LocCdfTable, String>, Duration)> = ["rural", "urban"]
            .iter()
            .map(|n| {
                let t = Instant::now();
                let r = loc(n);
                (n.to_string(), r, t.elapsed())
            })
            .collect();
        // both criteria share the runs; the slower preset is charged to each
        let slowest = tables.iter().map(|t| t.2).max().unwrap_or_default();
        run(7, &|| c7_loc(&tables), slowest);
        run(8, &|| c8_refine(&tables), slowest);
    }
    run(9, &c9_mean_shift, Duration::ZERO);
    run(10, &c10_snr, Duration::ZERO);
    run(11, &c11_repro, Duration::ZERO);
    let failed = results.iter().filter(|(n, o, d)| !o.pass || d.as_secs() > budget[*n as usize - 1]).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}

fn report(n: u32, o: &Outcome, d: Duration, budget_s: u64) {
    let in_time = d.as_secs() <= budget_s;
    let verdict = if o.pass && in_time { "PASS" } else { "FAIL" };
    let time = if in_time { String::new() } else { format!(" over budget {budget_s}s") };
    println!("criterion {n:>2}: {verdict}  {}  [{:.1}s{time}]", o.detail, d.as_secs_f64());
}
