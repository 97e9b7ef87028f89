//! Coarse timing: repetition metric, filtered metric, detection, SNR
//! estimate, analytic metric prediction and periodic re-alignment.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sliding sums are recomputed from scratch this often to bound drift.
const RESYNC_EVERY: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    /// M[n] for every window start n = 0 ..= len - 2L.
    pub m: Vec<f64>,
    /// Causal moving average of M over L_CP samples.
    pub m_f: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncParams {
    pub m_th: f64,
    pub delta: f64,
    pub beta: f64,
}

impl Default for SyncParams {
    fn default() -> Self {
        SyncParams { m_th: 0.6, delta: 1e-4, beta: 0.5 }
    }
}

struct Sums {
    p: C64,
    e1: f64,
    e2: f64,
    nonzero: usize,
}

fn nz(v: C64) -> usize {
    usize::from(v.re != 0.0 || v.im != 0.0)
}

fn direct_sums(y: &[C64], n: usize, l: usize) -> Sums {
    let mut s = Sums { p: C64::new(0.0, 0.0), e1: 0.0, e2: 0.0, nonzero: 0 };
    for i in 0..l {
        let a = y[n + i];
        let b = y[n + i + l];
        s.p += a * b.conj();
        s.e1 += a.norm_sqr();
        s.e2 += b.norm_sqr();
        s.nonzero += nz(a) + nz(b);
    }
    s
}

fn metric_of(s: &Sums) -> f64 {
    if s.nonzero == 0 {
        return 0.0;
    }
    let r = 0.5 * (s.e1 + s.e2);
    if r <= 0.0 {
        return 0.0;
    }
    (s.p.norm_sqr() / (r * r)).clamp(0.0, 1.0)
}

/// M[n] at a single window start, by direct summation.
pub fn metric_at(y: &[C64], n: usize, l: usize) -> f64 {
    metric_of(&direct_sums(y, n, l))
}

/// Sliding repetition metric over the whole capture.
pub fn repetition_metric(y: &[C64], l: usize, cp_len: usize) -> Result<MetricTrace> {
    if l == 0 || y.len() < 2 * l + 1 {
        return Err(Error::Capture(format!(
            "capture of {} samples too short for half length {l}",
            y.len()
        )));
    }
    let count = y.len() - 2 * l + 1;
    let mut m = Vec::with_capacity(count);
    let mut s = direct_sums(y, 0, l);
    m.push(metric_of(&s));
    for n in 1..count {
        if n % RESYNC_EVERY == 0 {
            s = direct_sums(y, n, l);
        } else {
            let (a0, b0, c0) = (y[n - 1], y[n - 1 + l], y[n - 1 + 2 * l]);
            // window moves one sample: drop a0 (first half) and b0 (second half), add b0 and c0
            s.p += b0 * c0.conj() - a0 * b0.conj();
            s.e1 += b0.norm_sqr() - a0.norm_sqr();
            s.e2 += c0.norm_sqr() - b0.norm_sqr();
            s.nonzero = s.nonzero + nz(c0) - nz(a0);
            if s.nonzero == 0 {
                s.p = C64::new(0.0, 0.0);
                s.e1 = 0.0;
                s.e2 = 0.0;
            }
        }
        m.push(metric_of(&s));
    }
    let m_f = moving_average(&m, cp_len.max(1));
    Ok(MetricTrace { m, m_f })
}

/// Causal rectangular filter normalized by its length.
pub fn moving_average(m: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    let mut acc = 0.0;
    for n in 0..m.len() {
        acc += m[n];
        if n >= w {
            acc -= m[n - w];
        }
        if n % RESYNC_EVERY == 0 && n >= w {
            acc = m[n + 1 - w..=n].iter().sum();
        }
        out.push((acc / w as f64).clamp(0.0, 1.0));
    }
    out
}

/// First local maximum of M_F at or above `m_th`. D[n] = M_F[n+1] - M_F[n].
/// A flat top (|D| <= delta) resolves to its first index.
pub fn detect(trace: &MetricTrace, m_th: f64, delta: f64) -> Option<usize> {
    detect_from(trace, 0, trace.m_f.len(), m_th, delta)
}

/// [`detect`] restricted to indices in `start..end`.
pub fn detect_from(trace: &MetricTrace, start: usize, end: usize, m_th: f64, delta: f64) -> Option<usize> {
    let f = &trace.m_f;
    let end = end.min(f.len().saturating_sub(1));
    let mut n = start.max(1);
    while n < end {
        if f[n] >= m_th && f[n] - f[n - 1] > delta {
            let top = n;
            let mut k = n;
            while k < end && (f[k + 1] - f[k]).abs() <= delta {
                k += 1;
            }
            if k < end && f[k + 1] - f[k] < -delta {
                return Some(top);
            }
            n = k.max(n + 1);
            continue;
        }
        n += 1;
    }
    None
}

/// Index of the largest M_F in `start..end` (earliest on ties within `delta`).
pub fn peak_in(trace: &MetricTrace, start: usize, end: usize, delta: f64) -> Option<usize> {
    let end = end.min(trace.m_f.len());
    if start >= end {
        return None;
    }
    let mut best = start;
    for n in start..end {
        if trace.m_f[n] > trace.m_f[best] + delta {
            best = n;
        }
    }
    Some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub db: f64,
    /// M_F reached 1: the estimate is only a lower bound.
    pub saturated: bool,
}

pub const SNR_FLOOR_DB: f64 = -60.0;
pub const SNR_CEIL_DB: f64 = 60.0;

/// SNR from the filtered metric peak, sqrt(M_F) / (1 - sqrt(M_F)).
pub fn estimate_snr(m_f_peak: f64) -> SnrEstimate {
    if !(m_f_peak > 0.0) {
        return SnrEstimate { db: SNR_FLOOR_DB, saturated: false };
    }
    if m_f_peak >= 1.0 {
        return SnrEstimate { db: SNR_CEIL_DB, saturated: true };
    }
    let s = m_f_peak.sqrt();
    let db = (10.0 * (s / (1.0 - s)).log10()).clamp(SNR_FLOOR_DB, SNR_CEIL_DB);
    SnrEstimate { db, saturated: false }
}

/// Metric level expected for a clean repetition at the given SNR (inverse of [`estimate_snr`]).
pub fn metric_for_snr(snr_db: f64) -> f64 {
    let s = 10f64.powf(snr_db / 10.0);
    (s / (1.0 + s)).powi(2)
}

/// Correlation weight of a replica whose CP starts `dt` samples after the window start.
pub fn f0(dt: f64, l: f64, l_cp: f64) -> f64 {
    if dt >= -l - l_cp && dt < -l_cp {
        (dt + l_cp + l) / l
    } else if dt >= -l_cp && dt < 0.0 {
        1.0
    } else if dt >= 0.0 && dt < l {
        1.0 - dt / l
    } else {
        0.0
    }
}

/// Energy weight of the same replica.
pub fn g0(dt: f64, l: f64, l_cp: f64) -> f64 {
    if dt >= -2.0 * l - l_cp && dt < -l_cp {
        (dt + l_cp + 2.0 * l) / (2.0 * l)
    } else if dt >= -l_cp && dt < 0.0 {
        1.0
    } else if dt >= 0.0 && dt < 2.0 * l {
        1.0 - dt / (2.0 * l)
    } else {
        0.0
    }
}

/// Predicted M at the window start for replicas `(power, dt)`, dt in samples
/// from the window start to each replica's CP start. Cross terms are ignored.
pub fn predict_metric(components: &[(f64, f64)], l: usize, l_cp: usize) -> f64 {
    let (l, c) = (l as f64, l_cp as f64);
    let num: f64 = components.iter().map(|&(p, d)| p * f0(d, l, c)).sum();
    let den: f64 = components.iter().map(|&(p, d)| p * g0(d, l, c)).sum();
    if den <= 0.0 {
        0.0
    } else {
        (num / den).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncState {
    pub n_sync: i64,
    /// Filtered residual, positive when arrivals are later than nominal.
    pub eps_filtered: f64,
    pub beta: f64,
    pub last_metric: f64,
    pub est_snr_db: f64,
    pub period_samples: i64,
}

impl SyncState {
    pub fn new(n_sync: i64, period_samples: i64, beta: f64, metric: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("beta {beta} not in [0,1]")));
        }
        let metric = metric.clamp(0.0, 1.0);
        Ok(SyncState {
            n_sync,
            eps_filtered: 0.0,
            beta,
            last_metric: metric,
            est_snr_db: estimate_snr(metric).db,
            period_samples,
        })
    }

    /// Nominal start of reception q, before correction.
    pub fn nominal(&self, q: i64) -> i64 {
        self.n_sync + q * self.period_samples
    }

    /// Window start for reception q: n_sync + q T_per + eps_filtered.
    pub fn window(&self, q: i64) -> i64 {
        self.nominal(q) + self.eps_filtered.round() as i64
    }

    /// Filter update with a residual measured relative to the nominal instant of reception q.
    pub fn track(&self, _q: i64, eps_hat: f64) -> SyncState {
        let mut s = self.clone();
        s.eps_filtered = self.beta * eps_hat + (1.0 - self.beta) * self.eps_filtered;
        s
    }

    /// Same as [`track`](Self::track) but with a residual measured relative
    /// to the window actually used for reception q.
    pub fn track_window(&self, q: i64, eps_window: f64) -> SyncState {
        let used = (self.window(q) - self.nominal(q)) as f64;
        self.track(q, used + eps_window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub n_sync: usize,
    pub m_f_peak: f64,
    pub snr: SnrEstimate,
}

/// Searches `y[start..start+search_len]` for an SRS. After a detection the
/// M_F maximum in the following `hold` samples is taken as the sync point,
/// which keeps noise ripple on the rising edge from ending the search early.
pub fn acquire(
    trace: &MetricTrace,
    start: usize,
    search_len: usize,
    hold: usize,
    params: &SyncParams,
) -> Option<Acquisition> {
    let n = detect_from(trace, start, start + search_len, params.m_th, params.delta)?;
    let best = peak_in(trace, n, n + hold + 1, params.delta).unwrap_or(n);
    let m_f_peak = trace.m_f[best];
    Some(Acquisition { n_sync: best, m_f_peak, snr: estimate_snr(m_f_peak) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_algebra() {
        assert!((estimate_snr(0.25).db).abs() < 1e-12);
        assert_eq!(estimate_snr(0.0).db, SNR_FLOOR_DB);
        assert!(estimate_snr(1.0).saturated);
        let m = metric_for_snr(7.0);
        assert!((estimate_snr(m).db - 7.0).abs() < 1e-9);
    }

    #[test]
    fn f0_g0_half() {
        assert_eq!(f0(32.0, 64.0, 9.0), 0.5);
        assert_eq!(g0(32.0, 64.0, 9.0), 0.75);
        assert!((predict_metric(&[(1.0, 32.0)], 64, 9) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(predict_metric(&[(1.0, -3.0)], 64, 9), 1.0);
        assert_eq!(predict_metric(&[(1.0, 500.0)], 64, 9), 0.0);
    }

    #[test]
    fn flat_top_first_index() {
        let m_f = vec![0.0, 0.3, 0.7, 0.9, 0.9, 0.9, 0.5, 0.1];
        let t = MetricTrace { m: m_f.clone(), m_f };
        assert_eq!(detect(&t, 0.6, 0.0), Some(3));
        assert_eq!(detect(&t, 0.95, 0.0), None);
    }

    #[test]
    fn beta_limits() {
        let s = SyncState::new(100, 1000, 1.0, 0.9).unwrap();
        assert_eq!(s.track(1, 3.0).eps_filtered, 3.0);
        let s0 = SyncState::new(100, 1000, 0.0, 0.9).unwrap();
        assert_eq!(s0.track(1, 3.0).eps_filtered, 0.0);
        assert!(SyncState::new(0, 1, 1.5, 0.0).is_err());
    }
}
