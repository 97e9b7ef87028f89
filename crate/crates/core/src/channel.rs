//! Tapped-delay-line channel between UEs and the UAV receiver: pathloss,
//! blockage, reflected taps, Doppler, CFO, timing advance, clock drift,
//! antenna patterns and thermal noise.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::capture::IqCapture;
use crate::dsp;
use crate::error::{Error, Result};
use crate::seed;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MAX_UAV_SPEED_MPS: f64 = 6.0;
/// UE oscillator tolerance as a fraction of the carrier.
pub const CFO_TOLERANCE_PPM: f64 = 0.5;
/// Thermal noise density at 290 K.
pub const KT_DBM_PER_HZ: f64 = -174.0;
/// Clock drift is re-corrected with this period.
pub const DRIFT_RESET_S: f64 = 1.0;

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeProfile {
    pub ue_id: String,
    pub position_m: Vec3,
    pub band_id: usize,
    pub shift_index_w: u8,
    pub tx_power_dbm: f64,
    pub cfo_hz: f64,
    /// Transmit advance relative to the network frame boundary.
    pub timing_advance_s: f64,
    pub clock_drift_ppm: f64,
    /// Gain of the UE antenna towards the receiver.
    #[serde(default)]
    pub antenna_gain_dbi: f64,
    /// Direct path unobstructed.
    #[serde(default = "yes")]
    pub los: bool,
}

fn yes() -> bool {
    true
}

/// Checks the (band, shift) uniqueness and the CFO tolerance.
pub fn validate_ues(ues: &[UeProfile], carrier_hz: f64) -> Result<()> {
    let lim = CFO_TOLERANCE_PPM * 1e-6 * carrier_hz;
    for (i, u) in ues.iter().enumerate() {
        if u.shift_index_w > 7 {
            return Err(Error::Config(format!("{}: shift {} not in 0..=7", u.ue_id, u.shift_index_w)));
        }
        if u.cfo_hz.abs() > lim * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "{}: CFO {} Hz exceeds tolerance {lim} Hz",
                u.ue_id, u.cfo_hz
            )));
        }
        if !u.position_m.iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("{}: non-finite position", u.ue_id)));
        }
        for v in &ues[..i] {
            if v.band_id == u.band_id && v.shift_index_w == u.shift_index_w {
                return Err(Error::Config(format!(
                    "{} and {} share band {} shift {}",
                    v.ue_id, u.ue_id, u.band_id, u.shift_index_w
                )));
            }
            if v.ue_id == u.ue_id {
                return Err(Error::Config(format!("duplicate UE id {}", u.ue_id)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    /// Complex amplitude in sqrt(mW) for a unit-power transmit signal.
    pub gain: C64,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

/// Gain table over azimuth/elevation in degrees, bilinear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPattern {
    /// Ascending azimuths, covering [-180, 180].
    pub az_deg: Vec<f64>,
    /// Ascending elevations, covering [-90, 90].
    pub el_deg: Vec<f64>,
    /// gain_db[el_index][az_index]
    pub gain_db: Vec<Vec<f64>>,
}

fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, t)
}

impl TabulatedPattern {
    pub fn new(az_deg: Vec<f64>, el_deg: Vec<f64>, gain_db: Vec<Vec<f64>>) -> Result<Self> {
        let asc = |g: &[f64]| !g.is_empty() && g.windows(2).all(|w| w[0] < w[1]);
        if !asc(&az_deg) || !asc(&el_deg) {
            return Err(Error::Config("pattern grids must be nonempty and strictly ascending".into()));
        }
        if gain_db.len() != el_deg.len() || gain_db.iter().any(|r| r.len() != az_deg.len()) {
            return Err(Error::Config("pattern table shape does not match its grids".into()));
        }
        Ok(TabulatedPattern { az_deg, el_deg, gain_db })
    }

    /// 2D pattern from a horizontal cut (vs azimuth, at el = 0) and a
    /// vertical cut (vs elevation, at az = 0): G = G_h + G_v - G_v(0).
    pub fn from_cuts(az_deg: Vec<f64>, h_cut_db: Vec<f64>, el_deg: Vec<f64>, v_cut_db: Vec<f64>) -> Result<Self> {
        if h_cut_db.len() != az_deg.len() || v_cut_db.len() != el_deg.len() {
            return Err(Error::Config("cut lengths do not match their grids".into()));
        }
        let probe = TabulatedPattern::new(vec![0.0], el_deg.clone(), v_cut_db.iter().map(|&v| vec![v]).collect())?;
        let v0 = probe.lookup(0.0, 0.0);
        let table = v_cut_db.iter().map(|&v| h_cut_db.iter().map(|&h| h + v - v0).collect()).collect();
        TabulatedPattern::new(az_deg, el_deg, table)
    }

    pub fn lookup(&self, az: f64, el: f64) -> f64 {
        let (i, s) = bracket(&self.az_deg, az);
        let (j, t) = bracket(&self.el_deg, el);
        let g = |jj: usize, ii: usize| self.gain_db[jj.min(self.el_deg.len() - 1)][ii.min(self.az_deg.len() - 1)];
        if self.az_deg.len() == 1 && self.el_deg.len() == 1 {
            return g(0, 0);
        }
        let (i1, j1) = (if self.az_deg.len() > 1 { i + 1 } else { i }, if self.el_deg.len() > 1 { j + 1 } else { j });
        let a = g(j, i) * (1.0 - s) + g(j, i1) * s;
        let b = g(j1, i) * (1.0 - s) + g(j1, i1) * s;
        a * (1.0 - t) + b * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaPattern {
    Isotropic,
    HalfWaveDipole,
    Tabulated(TabulatedPattern),
}

/// Gain floor of the analytic dipole along its axis.
pub const DIPOLE_NULL_DB: f64 = -40.0;

/// Half-wave dipole gain for a direction at angle `theta` from the axis.
pub fn dipole_gain_db(theta: f64) -> f64 {
    let s = theta.sin();
    if s.abs() < 1e-9 {
        return DIPOLE_NULL_DB;
    }
    let g = 1.64 * ((PI / 2.0 * theta.cos()).cos() / s).powi(2);
    dsp::db10(g).max(DIPOLE_NULL_DB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antenna {
    /// Position relative to the UAV reference point.
    pub offset_m: Vec3,
    /// Local z (dipole axis).
    pub axis: Vec3,
    /// Local x, azimuth zero of tabulated patterns.
    pub boresight: Vec3,
    pub pattern: AntennaPattern,
}

impl Antenna {
    pub fn isotropic() -> Self {
        Antenna { offset_m: [0.0; 3], axis: [0.0, 0.0, 1.0], boresight: [1.0, 0.0, 0.0], pattern: AntennaPattern::Isotropic }
    }
}

/// Gain in dB of `ant` towards the world-frame unit vector `direction`.
pub fn antenna_gain(ant: &Antenna, direction: Vec3) -> f64 {
    let d = unit(direction);
    let z = unit(ant.axis);
    match &ant.pattern {
        AntennaPattern::Isotropic => 0.0,
        AntennaPattern::HalfWaveDipole => dipole_gain_db(dot(d, z).clamp(-1.0, 1.0).acos()),
        AntennaPattern::Tabulated(t) => {
            let x = unit(ant.boresight);
            let y = cross(z, x);
            let az = dot(d, y).atan2(dot(d, x)).to_degrees();
            let el = dot(d, z).clamp(-1.0, 1.0).asin().to_degrees();
            t.lookup(az, el)
        }
    }
}

/// Two horizontal dipoles 30 cm apart, axes along x and y (90 degrees between them).
/// Both are broadside toward nadir, so the pattern ripple stays small under the UAV.
pub fn default_antennas() -> Vec<Antenna> {
    vec![
        Antenna { offset_m: [-0.15, 0.0, 0.0], axis: [1.0, 0.0, 0.0], boresight: [0.0, 0.0, -1.0], pattern: AntennaPattern::HalfWaveDipole },
        Antenna { offset_m: [0.15, 0.0, 0.0], axis: [0.0, 1.0, 0.0], boresight: [0.0, 0.0, -1.0], pattern: AntennaPattern::HalfWaveDipole },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position_m: Vec3,
    pub velocity_mps: Vec3,
    pub antennas: Vec<Antenna>,
}

impl UavState {
    pub fn new(position_m: Vec3, antennas: Vec<Antenna>) -> Self {
        UavState { position_m, velocity_mps: [0.0; 3], antennas }
    }

    pub fn antenna_position(&self, l: usize) -> Vec3 {
        let o = self.antennas[l].offset_m;
        [self.position_m[0] + o[0], self.position_m[1] + o[1], self.position_m[2] + o[2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Rural,
    Urban,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationModel {
    pub carrier_hz: f64,
    pub environment: Environment,
    /// Log-distance exponent (2 is free space).
    pub pathloss_exponent: f64,
    /// Extra loss on the direct path for UEs without line of sight.
    pub blockage_db: f64,
    pub reflected_taps: usize,
    /// Power of the first reflected tap relative to the unblocked direct path.
    pub first_tap_db: f64,
    pub tap_decay_db: f64,
    pub tap_spacing_s: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        PropagationModel::rural(2.4e9)
    }
}

impl PropagationModel {
    /// Free space plus weak Rayleigh taps (Rician K about 12 dB).
    pub fn rural(carrier_hz: f64) -> Self {
        PropagationModel {
            carrier_hz,
            environment: Environment::Rural,
            pathloss_exponent: 2.0,
            blockage_db: 15.0,
            reflected_taps: 2,
            first_tap_db: -15.0,
            tap_decay_db: 3.0,
            tap_spacing_s: 50e-9,
        }
    }

    /// Log-distance exponent 3, exponential power-delay profile.
    pub fn urban(carrier_hz: f64) -> Self {
        PropagationModel {
            carrier_hz,
            environment: Environment::Urban,
            pathloss_exponent: 3.0,
            blockage_db: 15.0,
            reflected_taps: 4,
            first_tap_db: -8.0,
            tap_decay_db: 3.0,
            tap_spacing_s: 100e-9,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Pathloss in dB at distance `d`: free space at 1 m plus 10 n log10(d).
    pub fn pathloss_db(&self, d: f64) -> f64 {
        let d = d.max(1e-3);
        free_space_loss_db(1.0, self.carrier_hz) + 10.0 * self.pathloss_exponent * d.log10()
    }
}

pub fn free_space_loss_db(d: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * PI * d * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// Per-antenna path lists for one UE at one UAV position. Reflected taps
/// get independent Rayleigh amplitudes on every antenna; the direct path is
/// deterministic.
pub fn geometry_paths(ue: &UeProfile, uav: &UavState, model: &PropagationModel, rng_seed: u64) -> Result<Vec<Vec<ChannelPath>>> {
    if uav.antennas.is_empty() {
        return Err(Error::Config("UAV has no antennas".into()));
    }
    let lambda = model.wavelength_m();
    let mut rng = seed::rng(rng_seed, &[seed::hash_str(&ue.ue_id)]);
    // reflected path geometry is shared by the antennas
    let taps: Vec<(f64, f64, Vec3, f64)> = (0..model.reflected_taps)
        .map(|i| {
            let excess = model.tap_spacing_s * (i as f64 + 1.0) * (0.75 + 0.5 * rng.random::<f64>());
            let p_db = model.first_tap_db - model.tap_decay_db * i as f64;
            let az = 2.0 * PI * rng.random::<f64>();
            let el = (-60.0 + 70.0 * rng.random::<f64>()).to_radians();
            let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
            let cos_dop = 2.0 * rng.random::<f64>() - 1.0;
            (excess, p_db, dir, cos_dop)
        })
        .collect();
    let speed = norm(uav.velocity_mps);
    let mut out = Vec::with_capacity(uav.antennas.len());
    for (l, ant) in uav.antennas.iter().enumerate() {
        let pa = uav.antenna_position(l);
        let to_ue = sub(ue.position_m, pa);
        let d = norm(to_ue);
        if !(d > 1e-6) {
            return Err(Error::Geometry(format!("UE {} coincides with UAV antenna {l}", ue.ue_id)));
        }
        let u = unit(to_ue);
        let tau = d / SPEED_OF_LIGHT;
        let base_db = ue.tx_power_dbm + ue.antenna_gain_dbi - model.pathloss_db(d);
        let block = if ue.los { 0.0 } else { model.blockage_db };
        let direct_db = base_db + antenna_gain(ant, u) - block;
        let mut paths = Vec::with_capacity(1 + taps.len());
        paths.push(ChannelPath {
            gain: C64::from_polar(dsp::from_db20(direct_db), -2.0 * PI * model.carrier_hz * tau),
            delay_s: tau,
            doppler_hz: dot(uav.velocity_mps, u) / lambda,
        });
        for &(excess, p_db, dir, cos_dop) in &taps {
            let g_db = base_db + p_db + antenna_gain(ant, [-dir[0], -dir[1], -dir[2]]);
            let (re, im): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let fade = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            paths.push(ChannelPath {
                gain: fade * dsp::from_db20(g_db),
                delay_s: tau + excess,
                doppler_hz: speed * cos_dop / lambda,
            });
        }
        out.push(paths);
    }
    Ok(out)
}

/// Thermal noise power in mW over bandwidth `fs` at noise figure `nf_db`.
pub fn noise_power_mw(fs: f64, nf_db: f64) -> f64 {
    dsp::from_db10(KT_DBM_PER_HZ + nf_db) * fs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverNoise {
    pub noise_figure_db: f64,
    pub seed: u64,
}

impl ReceiverNoise {
    pub const DEFAULT_NF_DB: f64 = 7.0;
}

/// Complex white Gaussian noise of total power `power`.
pub fn add_awgn(samples: &mut [C64], power: f64, rng: &mut impl Rng) {
    let s = (power / 2.0).sqrt();
    for v in samples.iter_mut() {
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        *v += C64::new(a * s, b * s);
    }
}

pub fn add_noise(cap: &mut IqCapture, noise: &ReceiverNoise) {
    let p = noise_power_mw(cap.sample_rate_hz, noise.noise_figure_db);
    let mut rng = seed::rng(noise.seed, &[u64::from(cap.antenna_id)]);
    add_awgn(&mut cap.samples, p, &mut rng);
}

/// Timing skew of a drifting UE clock at time `t`, reset every second.
pub fn drift_offset_s(drift_ppm: f64, t: f64) -> f64 {
    drift_ppm * 1e-6 * t.rem_euclid(DRIFT_RESET_S)
}

/// Adds the channel output for source `src` (sampled at `fs`, first sample
/// at time `src_t0`) into `out` (first sample at `out_t0`). Each path
/// contributes a_p src(t - tau_p) e^{j 2 pi (nu_p + cfo) t}.
pub fn accumulate(out: &mut [C64], out_t0: f64, src: &[C64], src_t0: f64, fs: f64, paths: &[ChannelPath], cfo_hz: f64, extra_delay_s: f64) {
    let mut tmp = vec![C64::new(0.0, 0.0); out.len()];
    for p in paths {
        tmp.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let delay = (src_t0 + p.delay_s + extra_delay_s - out_t0) * fs;
        dsp::add_delayed(&mut tmp, src, delay, C64::new(1.0, 0.0));
        let nu = p.doppler_hz + cfo_hz;
        if nu == 0.0 {
            for (o, &v) in out.iter_mut().zip(&tmp) {
                *o += p.gain * v;
            }
        } else {
            for (n, (o, &v)) in out.iter_mut().zip(&tmp).enumerate() {
                let t = out_t0 + n as f64 / fs;
                *o += p.gain * v * C64::from_polar(1.0, 2.0 * PI * nu * t);
            }
        }
    }
}

/// Applies paths, CFO, timing advance and clock drift of `ue` to `tx`.
/// The output shares the time base of `tx`; noise is added when given.
pub fn propagate(tx: &IqCapture, paths: &[ChannelPath], ue: &UeProfile, noise: Option<&ReceiverNoise>) -> Result<IqCapture> {
    tx.validate()?;
    let mut out = vec![C64::new(0.0, 0.0); tx.len()];
    let extra = -ue.timing_advance_s + drift_offset_s(ue.clock_drift_ppm, tx.t0_s);
    accumulate(&mut out, tx.t0_s, &tx.samples, tx.t0_s, tx.sample_rate_hz, paths, ue.cfo_hz, extra);
    let mut cap = IqCapture { samples: out, sample_rate_hz: tx.sample_rate_hz, t0_s: tx.t0_s, antenna_id: tx.antenna_id };
    if let Some(nz) = noise {
        add_noise(&mut cap, nz);
    }
    Ok(cap)
}

/// Sample-wise sum of captures on the same grid.
pub fn superpose(captures: &[IqCapture]) -> Result<IqCapture> {
    let first = captures.first().ok_or_else(|| Error::Capture("nothing to superpose".into()))?;
    let mut out = first.clone();
    for c in &captures[1..] {
        if (c.sample_rate_hz - first.sample_rate_hz).abs() > 1e-9 * first.sample_rate_hz {
            return Err(Error::RateMismatch(c.sample_rate_hz, first.sample_rate_hz));
        }
        if c.len() != first.len() || (c.t0_s - first.t0_s).abs() > 0.5 / first.sample_rate_hz {
            return Err(Error::Capture("captures are not on the same sample grid".into()));
        }
        for (o, &v) in out.samples.iter_mut().zip(&c.samples) {
            *o += v;
        }
    }
    Ok(out)
}

/// Draws a UE antenna gain from a dipole with uniformly random orientation.
/// Deep axial nulls are clipped at `floor_db`.
pub fn random_dipole_gain_db(rng: &mut impl Rng, floor_db: f64) -> f64 {
    // cos(theta) uniform on [-1,1] for an isotropic orientation
    let ct: f64 = 2.0 * rng.random::<f64>() - 1.0;
    dipole_gain_db(ct.acos()).max(floor_db)
}
