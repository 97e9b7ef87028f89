//! Antenna selection, per-UE normalization/thresholding and weighted
//! Gaussian-kernel mean shift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub r: usize,
    pub uav_xy_m: Vec2,
    /// per_antenna_gamma[u][l] in dB, `None` when UE u was missed on antenna l.
    pub per_antenna_gamma: Vec<Vec<Option<f64>>>,
    pub timestamp_s: f64,
}

/// Best antenna for UE `u` in one record.
pub fn select_antenna(meas: &Measurement, u: usize) -> Option<f64> {
    meas.per_antenna_gamma
        .get(u)?
        .iter()
        .flatten()
        .copied()
        .filter(|g| g.is_finite())
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightDomain {
    /// 10^(gamma/10)
    #[default]
    Power,
    /// 10^(gamma/20)
    Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    /// Linear weight per entry of the input series, max 1, 0 for missing.
    pub weights: Vec<f64>,
    /// Indices with weight >= threshold.
    pub valid: Vec<usize>,
}

/// Converts a dB series to linear weights normalized by the row maximum and
/// keeps entries at or above `gamma_th`.
pub fn normalize_and_filter(series: &[Option<f64>], gamma_th: f64, domain: WeightDomain) -> Result<Normalized> {
    let max = series
        .iter()
        .flatten()
        .copied()
        .filter(|g| g.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Localization { ue: String::new(), reason: "no finite measurement".into() });
    }
    let div = match domain {
        WeightDomain::Power => 10.0,
        WeightDomain::Amplitude => 20.0,
    };
    let weights: Vec<f64> = series
        .iter()
        .map(|g| match g {
            Some(g) if g.is_finite() => 10f64.powf((g - max) / div),
            _ => 0.0,
        })
        .collect();
    let valid = (0..weights.len()).filter(|&i| weights[i] > 0.0 && weights[i] >= gamma_th).collect();
    Ok(Normalized { weights, valid })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub ue_id: String,
    pub m_hat_xy: Vec2,
    pub iterations: usize,
    pub converged: bool,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftResult {
    pub xy: Vec2,
    pub iterations: usize,
    pub converged: bool,
    /// Every iterate, starting with the initial point.
    pub path: Vec<Vec2>,
}

pub fn weighted_centroid(points: &[Vec2], weights: &[f64]) -> Vec2 {
    let s: f64 = weights.iter().sum();
    let mut c = [0.0, 0.0];
    for (p, w) in points.iter().zip(weights) {
        c[0] += w * p[0];
        c[1] += w * p[1];
    }
    [c[0] / s, c[1] / s]
}

/// One weighted mean-shift update with a diagonal Gaussian kernel.
pub fn mean_shift_update(points: &[Vec2], weights: &[f64], h: Vec2, m: Vec2) -> Vec2 {
    let e: Vec<f64> = points
        .iter()
        .map(|p| {
            let dx = (p[0] - m[0]) / h[0];
            let dy = (p[1] - m[1]) / h[1];
            -0.5 * (dx * dx + dy * dy)
        })
        .collect();
    // shift exponents so far-away starts do not underflow to 0/0
    let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for ((p, &w), &ei) in points.iter().zip(weights).zip(&e) {
        let k = w * (ei - top).exp();
        sx += k * p[0];
        sy += k * p[1];
        sw += k;
    }
    [sx / sw, sy / sw]
}

pub fn mean_shift(points: &[Vec2], weights: &[f64], h: Vec2, init: Option<Vec2>, delta: f64, i_max: usize) -> Result<MeanShiftResult> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::Config("mean shift needs matching, nonempty points and weights".into()));
    }
    if !(h[0] > 0.0 && h[1] > 0.0 && h[0].is_finite() && h[1].is_finite()) {
        return Err(Error::Config(format!("degenerate kernel bandwidth {h:?}")));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("mean shift weights must be positive".into()));
    }
    let mut m = init.unwrap_or_else(|| weighted_centroid(points, weights));
    let mut path = vec![m];
    let mut converged = false;
    let mut it = 0;
    while it < i_max {
        let n = mean_shift_update(points, weights, h, m);
        it += 1;
        let step = ((n[0] - m[0]).powi(2) + (n[1] - m[1]).powi(2)).sqrt();
        m = n;
        path.push(m);
        if step < delta {
            converged = true;
            break;
        }
    }
    Ok(MeanShiftResult { xy: m, iterations: it, converged, path })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocateParams {
    pub gamma_th: f64,
    pub domain: WeightDomain,
    pub delta: f64,
    pub i_max: usize,
}

impl Default for LocateParams {
    fn default() -> Self {
        LocateParams { gamma_th: 0.6, domain: WeightDomain::Power, delta: 1e-6, i_max: 50 }
    }
}

/// Kernel bandwidths from the area: half its width and height.
pub fn area_bandwidth(polygon: &[Vec2]) -> Vec2 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in polygon {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0]
}

/// Full per-UE chain over a measurement log.
pub fn localize_ue(log: &[Measurement], u: usize, ue_id: &str, h: Vec2, params: &LocateParams) -> Result<LocalizationEstimate> {
    let abort = |reason: &str| Error::Localization { ue: ue_id.to_string(), reason: reason.to_string() };
    let series: Vec<Option<f64>> = log.iter().map(|m| select_antenna(m, u)).collect();
    let norm = normalize_and_filter(&series, params.gamma_th, params.domain).map_err(|_| abort("no detections"))?;
    if norm.valid.is_empty() {
        return Err(abort("empty valid set"));
    }
    let pts: Vec<Vec2> = norm.valid.iter().map(|&i| log[i].uav_xy_m).collect();
    let w: Vec<f64> = norm.valid.iter().map(|&i| norm.weights[i]).collect();
    let ms = mean_shift(&pts, &w, h, None, params.delta, params.i_max)?;
    Ok(LocalizationEstimate {
        ue_id: ue_id.to_string(),
        m_hat_xy: ms.xy,
        iterations: ms.iterations,
        converged: ms.converged,
        n_valid: pts.len(),
    })
}

pub fn localization_error(m_hat: Vec2, m_true: Vec2) -> f64 {
    ((m_hat[0] - m_true[0]).powi(2) + (m_hat[1] - m_true[1]).powi(2)).sqrt()
}

/// Mean of the finite errors; `None` when there are none.
pub fn average_localization_error(errors: &[f64]) -> Option<f64> {
    let v: Vec<f64> = errors.iter().copied().filter(|e| e.is_finite()).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_max() {
        let m = Measurement { r: 0, uav_xy_m: [0.0, 0.0], per_antenna_gamma: vec![vec![Some(-12.0), Some(-9.0)], vec![None, None]], timestamp_s: 0.0 };
        assert_eq!(select_antenna(&m, 0), Some(-9.0));
        assert_eq!(select_antenna(&m, 1), None);
    }

    #[test]
    fn threshold_example() {
        // linear power 1.0, 0.7, 0.5
        let s = [Some(0.0), Some(10.0 * 0.7f64.log10()), Some(10.0 * 0.5f64.log10())];
        let n = normalize_and_filter(&s, 0.6, WeightDomain::Power).unwrap();
        assert_eq!(n.valid, vec![0, 1]);
        assert_eq!(n.weights[0], 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(localization_error([3.0, 4.0], [0.0, 0.0]), 5.0);
        assert_eq!(average_localization_error(&[1.0, f64::NAN, 3.0]), Some(2.0));
    }
}
