//! Despreading, matching pursuit with BIC stopping, cyclic-shift
//! classification, measurement cleaning and false-positive rejection.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::channel::UeProfile;
use crate::dsp;
use crate::error::{Error, Result};
use crate::waveform::{base_sequence_with, SrsConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DespreadSpectrum {
    pub c: Vec<C64>,
    pub band_id: usize,
}

/// c[m] = Y[kappa_m] conj(S[m]) sqrt(M)/L, with Y the L-point DFT of the
/// window. A unit-power SRS gives unit-magnitude c.
pub fn despread(y: &[C64], n_sync: usize, cfg: &SrsConfig, band_id: usize) -> Result<DespreadSpectrum> {
    cfg.validate()?;
    let l = cfg.half_len();
    if n_sync + l > y.len() {
        return Err(Error::Capture(format!(
            "despread window {}..{} outside capture of {} samples",
            n_sync,
            n_sync + l,
            y.len()
        )));
    }
    let mut buf = y[n_sync..n_sync + l].to_vec();
    dsp::fft(&mut buf);
    let base = base_sequence_with(cfg.seq_id_q, cfg.m_srs(), cfg.short_sequence)?;
    let scale = (cfg.m_srs() as f64).sqrt() / l as f64;
    let c = cfg
        .kappa()
        .iter()
        .zip(&base.values)
        .map(|(&k, s)| buf[k] * s.conj() * scale)
        .collect();
    Ok(DespreadSpectrum { c, band_id })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionComponent {
    /// Cycles per subcarrier index, in [0,1).
    pub f_hat: f64,
    pub a_hat: C64,
    pub gamma_db: f64,
    /// Set by classification; `None` straight out of matching pursuit.
    pub shift_hat: Option<u8>,
    /// 1-based extraction order.
    pub iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpOptions {
    pub oversample: usize,
    pub max_components: usize,
    /// Per-component BIC penalty weight, multiplies ln M.
    pub bic_penalty: f64,
    /// Ties in BIC count as an improvement.
    pub strict_bic: bool,
    /// Extractions allowed past the best BIC before stopping; the best model
    /// is returned. 1 stops at the first non-improving extraction.
    pub patience: usize,
    /// Cyclic re-fit of all frequencies after each extraction.
    pub refine: bool,
    pub max_refine_cycles: usize,
    /// Models up to this order also get a joint least-squares re-fit of all
    /// frequencies and amplitudes. 0 disables it.
    pub joint_refit_max: usize,
}

impl Default for MpOptions {
    fn default() -> Self {
        MpOptions {
            oversample: 4,
            max_components: 64,
            bic_penalty: 3.0,
            strict_bic: false,
            patience: 8,
            refine: true,
            max_refine_cycles: 8,
            joint_refit_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpResult {
    pub components: Vec<DetectionComponent>,
    /// BIC of the models up to the selected one, index 0 is the empty model.
    pub bic: Vec<f64>,
    /// Residual energy for the same models, index 0 is the input energy.
    pub residual_energy: Vec<f64>,
    /// BIC of the model one component larger than the selected one, if tried.
    pub rejected_bic: Option<f64>,
}

fn wrap01(f: f64) -> f64 {
    let r = f.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// S(f) = sum r[m] e^{-j 2 pi f m} and its first two derivatives in f.
// Tone phasors are produced by repeated multiplication, re-anchored with an
// exact evaluation every 64 samples to keep rounding drift negligible.
const REANCHOR: usize = 64;

fn phasors(f: f64, m: usize) -> impl Iterator<Item = C64> {
    let step = C64::from_polar(1.0, 2.0 * PI * f);
    let mut z = C64::new(1.0, 0.0);
    (0..m).map(move |k| {
        if k % REANCHOR == 0 {
            z = C64::from_polar(1.0, 2.0 * PI * f * k as f64);
        }
        let out = z;
        z *= step;
        out
    })
}

fn spectrum_derivs(r: &[C64], f: f64) -> (C64, C64, C64) {
    let (mut s0, mut s1, mut s2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for ((m, &v), z) in r.iter().enumerate().zip(phasors(-f, r.len())) {
        let e = v * z;
        let w = 2.0 * PI * m as f64;
        s0 += e;
        s1 += e * C64::new(0.0, -w);
        s2 += e * (-(w * w));
    }
    (s0, s1, s2)
}

fn project(r: &[C64], f: f64) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (&v, z) in r.iter().zip(phasors(-f, r.len())) {
        s += v * z;
    }
    s / r.len() as f64
}

fn add_tone(r: &mut [C64], a: C64, f: f64, sign: f64) {
    let a = a * sign;
    let n = r.len();
    for (v, z) in r.iter_mut().zip(phasors(f, n)) {
        *v += a * z;
    }
}

/// Newton ascent of |S(f)|^2 around `f`, steps clipped to `max_step`.
/// A step is only taken when it does not lower |S|.
fn newton_peak(r: &[C64], mut f: f64, max_step: f64) -> f64 {
    for _ in 0..4 {
        let (s0, s1, s2) = spectrum_derivs(r, f);
        let j0 = s0.norm_sqr();
        let d1 = 2.0 * (s1 * s0.conj()).re;
        let d2 = 2.0 * (s1.norm_sqr() + (s2 * s0.conj()).re);
        if d2 >= 0.0 || j0 == 0.0 {
            break;
        }
        let step = (-d1 / d2).clamp(-max_step, max_step);
        if step.abs() < 1e-15 {
            break;
        }
        let nf = f + step;
        if project(r, nf).norm_sqr() * (r.len() * r.len()) as f64 >= j0 {
            f = nf;
        } else {
            break;
        }
    }
    wrap01(f)
}

fn bic(order: usize, energy: f64, m: usize, e0: f64, penalty: f64) -> f64 {
    let mf = m as f64;
    let floor = 1e-20 * e0 / mf;
    penalty * order as f64 * mf.ln() + mf * (energy / mf).max(floor).max(f64::MIN_POSITIVE).ln()
}

/// Greedy extraction of complex exponentials from `c`, stopped by BIC.
pub fn matching_pursuit(c: &DespreadSpectrum, l: usize, opts: &MpOptions) -> MpResult {
    let m = c.c.len();
    let e0 = dsp::energy(&c.c);
    let mut out = MpResult { components: vec![], bic: vec![], residual_energy: vec![e0], rejected_bic: None };
    if m == 0 || !(e0 > 0.0) || !e0.is_finite() {
        out.bic.push(f64::NAN);
        return out;
    }
    let d = (opts.oversample.max(1) * l.max(m)).max(m);
    out.bic.push(bic(0, e0, m, e0, opts.bic_penalty));
    let mut res = c.c.clone();
    let mut comps: Vec<(f64, C64)> = Vec::new();
    let max_k = opts.max_components.min(m.saturating_sub(1)).max(1);
    let mut buf = vec![C64::new(0.0, 0.0); d];
    let mut best = (out.bic[0], Vec::new());
    let mut since_best = 0;
    let mut tried: Vec<(f64, f64)> = Vec::new();
    while comps.len() < max_k {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        buf[..m].copy_from_slice(&res);
        dsp::fft(&mut buf);
        let mag: Vec<f64> = buf.iter().map(|v| v.norm()).collect();
        let k = (0..d).fold(0, |b, i| if mag[i] > mag[b] { i } else { b });
        let mut f = k as f64 / d as f64;
        let (a, b0, cc) = (mag[(k + d - 1) % d], mag[k], mag[(k + 1) % d]);
        if a > 0.0 && b0 > 0.0 && cc > 0.0 {
            let (la, lb, lc) = (a.ln(), b0.ln(), cc.ln());
            let den = la - 2.0 * lb + lc;
            if den < 0.0 {
                let off = (0.5 * (la - lc) / den).clamp(-0.5, 0.5);
                f = wrap01((k as f64 + off) / d as f64);
            }
        }
        let amp = project(&res, f);
        add_tone(&mut res, amp, f, -1.0);
        comps.push((f, amp));
        if opts.refine {
            refine_all(&mut res, &mut comps, opts.max_refine_cycles, m);
            if comps.len() <= opts.joint_refit_max {
                joint_refit(&c.c, &mut res, &mut comps);
            }
        }
        let e = dsp::energy(&res);
        let b = bic(comps.len(), e, m, e0, opts.bic_penalty);
        tried.push((b, e));
        let better = if opts.strict_bic { b <= best.0 } else { b < best.0 };
        if better {
            best = (b, comps.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.patience.max(1) {
                break;
            }
        }
    }
    let comps = best.1;
    let k = comps.len();
    for &(b, e) in &tried[..k] {
        out.bic.push(b);
        out.residual_energy.push(e);
    }
    out.rejected_bic = tried.get(k).map(|t| t.0);
    out.components = comps
        .iter()
        .enumerate()
        .map(|(i, &(f, a))| DetectionComponent {
            f_hat: f,
            a_hat: a,
            gamma_db: dsp::db20(a.norm()),
            shift_hat: None,
            iter: i + 1,
        })
        .collect();
    out
}

fn model_residual(c: &[C64], comps: &[(f64, C64)]) -> Vec<C64> {
    let mut r = c.to_vec();
    for &(f, a) in comps {
        add_tone(&mut r, a, f, -1.0);
    }
    r
}

fn well_separated(comps: &[(f64, C64)], m: usize) -> bool {
    let min = 0.5 / m as f64;
    comps.iter().enumerate().all(|(i, a)| comps[i + 1..].iter().all(|b| circ_dist(a.0, b.0) >= min))
}

/// Levenberg-Marquardt on all tones at once. The coordinate re-fit crawls
/// when two tones sit about a bin apart; this finishes the job. Only steps
/// that lower the residual are kept, and only while tones stay half a bin
/// apart with model energy at most twice the data (else noise gets fitted by
/// near-coincident tones with cancelling amplitudes).
fn joint_refit(c: &[C64], res: &mut Vec<C64>, comps: &mut [(f64, C64)]) {
    let (m, k) = (c.len(), comps.len());
    let e0 = dsp::energy(c);
    let mut e = dsp::energy(res);
    let mut lambda = 1e-3;
    for _ in 0..50 {
        if e <= 1e-28 * e0 {
            break;
        }
        // rows: Re then Im of each sample; cols: f, Re a, Im a per tone
        let mut j = DMatrix::<f64>::zeros(2 * m, 3 * k);
        let mut r = DVector::<f64>::zeros(2 * m);
        for (n, v) in res.iter().enumerate() {
            r[n] = v.re;
            r[m + n] = v.im;
        }
        for (t, &(f, a)) in comps.iter().enumerate() {
            for n in 0..m {
                let z = C64::from_polar(1.0, 2.0 * PI * f * n as f64);
                let df = a * z * C64::new(0.0, 2.0 * PI * n as f64);
                let di = z * C64::new(0.0, 1.0);
                j[(n, t)] = df.re;
                j[(m + n, t)] = df.im;
                j[(n, k + t)] = z.re;
                j[(m + n, k + t)] = z.im;
                j[(n, 2 * k + t)] = di.re;
                j[(m + n, 2 * k + t)] = di.im;
            }
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * r;
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..3 * k {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(ch) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let d = ch.solve(&g);
            let trial: Vec<(f64, C64)> = comps
                .iter()
                .enumerate()
                .map(|(t, &(f, a))| (wrap01(f + d[t]), a + C64::new(d[k + t], d[2 * k + t])))
                .collect();
            if !well_separated(&trial, m) || trial.iter().map(|t| t.1.norm_sqr()).sum::<f64>() * m as f64 > 2.0 * e0 {
                lambda *= 10.0;
                continue;
            }
            let tr = model_residual(c, &trial);
            let te = dsp::energy(&tr);
            if te < e {
                let gain = e - te;
                comps.copy_from_slice(&trial);
                *res = tr;
                e = te;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = gain > 1e-6 * (e + gain);
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
}

/// Cyclic coordinate re-fit: each tone is put back into the residual,
/// re-peaked and re-projected. Residual energy never increases.
fn refine_all(res: &mut [C64], comps: &mut [(f64, C64)], cycles: usize, m: usize) {
    let max_step = 1.0 / (4.0 * m as f64);
    let mut e_prev = dsp::energy(res);
    for _ in 0..cycles {
        let mut moved: f64 = 0.0;
        for t in 0..comps.len() {
            let (f, a) = comps[t];
            add_tone(res, a, f, 1.0);
            let nf = newton_peak(res, f, max_step);
            let na = project(res, nf);
            let (nf, na) = if na.norm_sqr() >= a.norm_sqr() * (1.0 - 1e-15) { (nf, na) } else { (f, project(res, f)) };
            add_tone(res, na, nf, -1.0);
            let df = (nf - f + 0.5).rem_euclid(1.0) - 0.5;
            moved = moved.max(df.abs());
            comps[t] = (nf, na);
        }
        let e = dsp::energy(res);
        if moved < 1e-10 || e_prev - e <= 1e-9 * e_prev {
            break;
        }
        e_prev = e;
    }
}

/// Circular distance between two frequencies in cycles.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Fractional residual L (w/8 - f) wrapped to (-L/2, L/2].
pub fn residual_samples(f_hat: f64, w: u8, l: usize) -> f64 {
    let lf = l as f64;
    let mut e = (lf * (f64::from(w) / 8.0 - f_hat)).rem_euclid(lf);
    if e > lf / 2.0 {
        e -= lf;
    }
    e
}

/// Nearest assigned shift in circular distance (ties go to the lower
/// index) and the rounded timing residual in samples.
pub fn classify_shift(f_hat: f64, assigned: &[u8], l: usize) -> Result<(u8, i64)> {
    let mut shifts: Vec<u8> = assigned.to_vec();
    shifts.sort_unstable();
    shifts.dedup();
    if shifts.is_empty() || shifts.iter().any(|&w| w > 7) {
        return Err(Error::Config(format!("assigned shifts {assigned:?} must be a nonempty subset of 0..=7")));
    }
    let mut best = shifts[0];
    let mut bd = circ_dist(f_hat, f64::from(best) / 8.0);
    for &w in &shifts[1..] {
        let d = circ_dist(f_hat, f64::from(w) / 8.0);
        if d < bd - 1e-12 {
            best = w;
            bd = d;
        }
    }
    let mut e = residual_samples(f_hat, best, l).round() as i64;
    if e <= -(l as i64) / 2 {
        e += l as i64;
    }
    Ok((best, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedMeasurement {
    /// Strongest retained gamma per UE, in `band_ues` order.
    pub gamma_max_db: Vec<Option<f64>>,
    pub detected: Vec<bool>,
    /// Residual of the strongest component, fractional samples.
    pub eps_hat_samples: Option<f64>,
    /// Index into `band_ues` of the strongest component's UE.
    pub reference: Option<usize>,
}

/// Assigns shifts to `components` (in place) from the band's UE list.
pub fn classify_components(components: &mut [DetectionComponent], band_ues: &[UeProfile], l: usize) -> Result<()> {
    let shifts: Vec<u8> = band_ues.iter().map(|u| u.shift_index_w).collect();
    for c in components.iter_mut() {
        c.shift_hat = Some(classify_shift(c.f_hat, &shifts, l)?.0);
    }
    Ok(())
}

/// Keeps the strongest component per UE and the strongest overall as the
/// timing reference. Components without a shift are classified first.
pub fn clean(components: &[DetectionComponent], band_ues: &[UeProfile], l: usize) -> CleanedMeasurement {
    let mut out = CleanedMeasurement {
        gamma_max_db: vec![None; band_ues.len()],
        detected: vec![false; band_ues.len()],
        eps_hat_samples: None,
        reference: None,
    };
    if band_ues.is_empty() {
        return out;
    }
    let shifts: Vec<u8> = band_ues.iter().map(|u| u.shift_index_w).collect();
    let mut best_overall: Option<(f64, usize, f64)> = None;
    for c in components {
        let w = match c.shift_hat {
            Some(w) => w,
            None => match classify_shift(c.f_hat, &shifts, l) {
                Ok((w, _)) => w,
                Err(_) => continue,
            },
        };
        let Some(u) = band_ues.iter().position(|p| p.shift_index_w == w) else { continue };
        out.detected[u] = true;
        if out.gamma_max_db[u].is_none_or(|g| c.gamma_db > g) {
            out.gamma_max_db[u] = Some(c.gamma_db);
        }
        if best_overall.is_none_or(|(g, _, _)| c.gamma_db > g) {
            best_overall = Some((c.gamma_db, u, residual_samples(c.f_hat, w, l)));
        }
    }
    if let Some((_, u, e)) = best_overall {
        out.reference = Some(u);
        out.eps_hat_samples = Some(e);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SrsConfirmed,
    FalsePositive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SrsConfirmed => "srs_confirmed",
            Verdict::FalsePositive => "false_positive",
        }
    }
}

/// A detection is false when BIC keeps no component at all. `_trigger` is
/// the detection index, kept for the caller's logging.
pub fn false_positive_check(mp: &MpResult, _trigger: usize) -> Verdict {
    if mp.components.is_empty() {
        Verdict::FalsePositive
    } else {
        Verdict::SrsConfirmed
    }
}
