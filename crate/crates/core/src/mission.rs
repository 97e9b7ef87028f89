//! Simulated autonomous flight: center approach, perimeter sweep, one
//! hexagonal refinement pass per detected UE, return home. Receptions run
//! the full channel -> sync -> ident -> clean chain per (band, antenna).

use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Antenna, PropagationModel, UavState, UeProfile};
use crate::error::{Error, Result};
use crate::ident::{self, MpOptions, Verdict};
use crate::locate::{self, LocalizationEstimate, LocateParams, Measurement, Vec2};
use crate::seed;
use crate::sync::{self, SyncParams, SyncState};
use crate::waveform::{self, SrsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionPlan {
    pub area_polygon: Vec<Vec2>,
    pub center: Vec2,
    pub home: Vec2,
    pub altitude_m: f64,
    pub perimeter_margin_m: f64,
    pub hex_radius_m: f64,
    pub speed_mps: f64,
    pub min_sample_spacing_m: f64,
    /// Spacing of planned waypoints.
    pub waypoint_spacing_m: f64,
    pub dt_s: f64,
}

impl Default for MissionPlan {
    fn default() -> Self {
        MissionPlan {
            area_polygon: vec![[-60.0, -47.5], [60.0, -47.5], [60.0, 47.5], [-60.0, 47.5]],
            center: [0.0, 0.0],
            home: [0.0, -47.5],
            altitude_m: 25.0,
            perimeter_margin_m: 20.0,
            hex_radius_m: 15.0,
            speed_mps: 3.0,
            min_sample_spacing_m: 1.0,
            waypoint_spacing_m: 1.0,
            dt_s: 0.1,
        }
    }
}

impl MissionPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Planning(m));
        if !(self.speed_mps > 0.0 && self.speed_mps <= channel::MAX_UAV_SPEED_MPS) {
            return bad(format!("speed {} m/s outside (0, {}]", self.speed_mps, channel::MAX_UAV_SPEED_MPS));
        }
        if !(self.dt_s > 0.0) || !(self.waypoint_spacing_m > 0.0) || self.min_sample_spacing_m < 0.0 {
            return bad("dt, waypoint spacing must be positive and sample spacing non-negative".into());
        }
        if self.hex_radius_m < 0.0 || self.perimeter_margin_m < 0.0 {
            return bad("negative hex radius or margin".into());
        }
        check_polygon(&self.area_polygon)?;
        Ok(())
    }
}

fn signed_area(p: &[Vec2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i][0] * p[(i + 1) % n][1] - p[(i + 1) % n][0] * p[i][1]).sum::<f64>() / 2.0
}

fn seg_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn is_simple(p: &[Vec2]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if seg_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn check_polygon(p: &[Vec2]) -> Result<()> {
    if p.len() < 3 || p.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Planning("area polygon needs at least 3 finite vertices".into()));
    }
    if signed_area(p).abs() < 1e-9 || !is_simple(p) {
        return Err(Error::Planning("area polygon is degenerate or self-intersecting".into()));
    }
    Ok(())
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Polygon shrunk by `margin` (edges moved inward, consecutive offset lines intersected).
pub fn inset_polygon(area: &[Vec2], margin: f64) -> Result<Vec<Vec2>> {
    check_polygon(area)?;
    let mut p: Vec<Vec2> = area.to_vec();
    if signed_area(&p) < 0.0 {
        p.reverse();
    }
    if margin == 0.0 {
        return Ok(p);
    }
    let n = p.len();
    let line = |i: usize| {
        let (a, b) = (p[i], p[(i + 1) % n]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let nrm = [-d[1] / l, d[0] / l];
        ([a[0] + nrm[0] * margin, a[1] + nrm[1] * margin], [d[0] / l, d[1] / l])
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (p0, d0) = line((i + n - 1) % n);
        let (p1, d1) = line(i);
        let den = d0[0] * d1[1] - d0[1] * d1[0];
        if den.abs() < 1e-12 {
            out.push(p1);
        } else {
            let t = ((p1[0] - p0[0]) * d1[1] - (p1[1] - p0[1]) * d1[0]) / den;
            out.push([p0[0] + t * d0[0], p0[1] + t * d0[1]]);
        }
    }
    // every inset edge must keep the direction of its source edge
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        let (c, d) = (out[i], out[(i + 1) % n]);
        let dot = (b[0] - a[0]) * (d[0] - c[0]) + (b[1] - a[1]) * (d[1] - c[1]);
        if dot <= 0.0 {
            return Err(Error::Planning(format!("margin {margin} m too large for the area")));
        }
    }
    if signed_area(&out) <= 0.0 || !is_simple(&out) {
        return Err(Error::Planning(format!("margin {margin} m too large for the area")));
    }
    Ok(out)
}

fn nearest_on_segment(a: Vec2, b: Vec2, p: Vec2) -> (Vec2, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (q, dist(q, p))
}

/// Points from `a` (excluded) to `b` (included), at most `spacing` apart.
pub fn densify(a: Vec2, b: Vec2, spacing: f64) -> Vec<Vec2> {
    let l = dist(a, b);
    let k = (l / spacing - 1e-9).ceil().max(1.0) as usize;
    (1..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Closed loop over `vertices` starting and ending at `start`, which must
/// lie on edge `edge` (from vertex `edge` to `edge+1`).
fn loop_from(vertices: &[Vec2], edge: usize, start: Vec2, spacing: f64) -> Vec<Vec2> {
    let n = vertices.len();
    let mut out = vec![start];
    let mut cur = start;
    for k in 1..=n {
        let v = vertices[(edge + k) % n];
        if dist(cur, v) > 1e-9 {
            out.extend(densify(cur, v, spacing));
            cur = v;
        }
    }
    if dist(cur, start) > 1e-9 {
        out.extend(densify(cur, start, spacing));
    }
    out
}

/// Perimeter loop on the margin-inset area, starting at the point of the
/// loop nearest to `entry`.
pub fn plan_perimeter_from(area: &[Vec2], margin: f64, spacing: f64, entry: Vec2) -> Result<Vec<Vec2>> {
    if !(spacing > 0.0) {
        return Err(Error::Planning("waypoint spacing must be positive".into()));
    }
    let inset = inset_polygon(area, margin)?;
    let n = inset.len();
    let (mut best, mut bi, mut bd) = (inset[0], 0, f64::INFINITY);
    for i in 0..n {
        let (q, d) = nearest_on_segment(inset[i], inset[(i + 1) % n], entry);
        if d < bd - 1e-12 {
            best = q;
            bi = i;
            bd = d;
        }
    }
    Ok(loop_from(&inset, bi, best, spacing))
}

/// Perimeter loop entered from the polygon's vertex centroid.
pub fn plan_perimeter(area: &[Vec2], margin: f64, spacing: f64) -> Result<Vec<Vec2>> {
    let n = area.len().max(1) as f64;
    let c = [area.iter().map(|p| p[0]).sum::<f64>() / n, area.iter().map(|p| p[1]).sum::<f64>() / n];
    plan_perimeter_from(area, margin, spacing, c)
}

pub fn hex_vertices(center: Vec2, radius: f64) -> Vec<Vec2> {
    (0..6)
        .map(|k| {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

/// Closed hexagon around `center`; a zero radius collapses to the center.
pub fn plan_hex(center: Vec2, radius: f64, spacing: f64) -> Vec<Vec2> {
    if radius <= 1e-9 {
        return vec![center];
    }
    let v = hex_vertices(center, radius);
    loop_from(&v, 0, v[0], spacing)
}

/// Entry leg from `from` to the nearest hexagon vertex, then the closed hexagon from there.
pub fn plan_hex_from(center: Vec2, radius: f64, spacing: f64, from: Vec2) -> Vec<Vec2> {
    if radius <= 1e-9 {
        let mut out = densify(from, center, spacing);
        if out.is_empty() {
            out.push(center);
        }
        return out;
    }
    let v = hex_vertices(center, radius);
    let k = (0..6).fold(0, |b, i| if dist(v[i], from) < dist(v[b], from) - 1e-12 { i } else { b });
    let mut out = if dist(from, v[k]) > 1e-9 { densify(from, v[k], spacing) } else { vec![] };
    let ring = loop_from(&v, k, v[k], spacing);
    out.extend(ring.into_iter().skip(usize::from(dist(from, v[k]) > 1e-9)));
    out
}

/// Greedy nearest-neighbour visiting order.
pub fn nearest_neighbor_order(start: Vec2, pts: &[Vec2]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..pts.len()).collect();
    let mut cur = start;
    let mut out = Vec::new();
    while !left.is_empty() {
        let (j, _) = left.iter().enumerate().fold((0, f64::INFINITY), |(bj, bd), (j, &i)| {
            let d = dist(cur, pts[i]);
            if d < bd - 1e-12 {
                (j, d)
            } else {
                (bj, bd)
            }
        });
        let i = left.remove(j);
        cur = pts[i];
        out.push(i);
    }
    out
}

/// Everything the simulator needs besides the flight plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Shared SRS settings; `k0` and the shift are overridden per band/UE.
    pub srs: SrsConfig,
    /// Starting subcarrier of each band.
    pub band_k0: Vec<usize>,
    pub ues: Vec<UeProfile>,
    pub propagation: PropagationModel,
    pub antennas: Vec<Antenna>,
    pub noise_figure_db: f64,
    pub noise_enabled: bool,
    pub sync: SyncParams,
    pub mp: MpOptions,
    pub locate: LocateParams,
    /// Frame boundary offset on the receiver clock; drawn from the seed when absent.
    pub frame_offset_s: Option<f64>,
    /// Consecutive empty receptions before a lane re-acquires.
    pub misses_before_reacquire: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.srs.validate()?;
        if self.antennas.is_empty() {
            return Err(Error::Config("at least one UAV antenna required".into()));
        }
        for (b, &k0) in self.band_k0.iter().enumerate() {
            self.band_config(b, 0)?;
            for (c, &k1) in self.band_k0.iter().enumerate().skip(b + 1) {
                let span = 2 * self.srs.m_srs();
                if k0.max(k1) < k0.min(k1) + span {
                    return Err(Error::Config(format!("bands {b} and {c} overlap")));
                }
            }
        }
        for u in &self.ues {
            if u.band_id >= self.band_k0.len() {
                return Err(Error::Config(format!("{}: band {} not defined", u.ue_id, u.band_id)));
            }
        }
        channel::validate_ues(&self.ues, self.propagation.carrier_hz)
    }

    pub fn band_config(&self, band: usize, w: u8) -> Result<SrsConfig> {
        let k0 = *self.band_k0.get(band).ok_or_else(|| Error::Config(format!("band {band} not defined")))?;
        let c = self.srs.with_band_shift(k0, w);
        c.validate()?;
        Ok(c)
    }

    pub fn band_ues(&self, band: usize) -> Vec<UeProfile> {
        self.ues.iter().filter(|u| u.band_id == band).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ToCenter,
    Perimeter,
    /// Index into the scenario's UE list.
    Refine(usize),
    ReturnHome,
    Done,
}

impl Phase {
    /// Position in the fixed phase order; refinements share a rank.
    pub fn rank(&self) -> usize {
        match self {
            Phase::ToCenter => 0,
            Phase::Perimeter => 1,
            Phase::Refine(_) => 2,
            Phase::ReturnHome => 3,
            Phase::Done => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEstimate {
    pub estimate: LocalizationEstimate,
    pub time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UeEstimates {
    pub initial: Option<TimedEstimate>,
    pub refined: Option<TimedEstimate>,
}

#[derive(Debug, Clone)]
struct Lane {
    band: usize,
    antenna: usize,
    sync: Option<SyncState>,
    misses: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LaneStats {
    pub acquisitions: usize,
    pub false_positives: usize,
    pub receptions: usize,
    pub empty_receptions: usize,
}

#[derive(Debug, Clone)]
pub struct MissionState {
    pub phase: Phase,
    pub uav: UavState,
    pub waypoints: VecDeque<Vec2>,
    pub measurement_log: Vec<Measurement>,
    pub estimates: Vec<UeEstimates>,
    pub time_s: f64,
    pub phase_log: Vec<(Phase, f64, f64)>,
    refine_queue: VecDeque<usize>,
    phase_start_s: f64,
    last_sample_xy: Option<Vec2>,
    next_frame: i64,
}

pub struct MissionSim {
    pub scenario: Scenario,
    pub plan: MissionPlan,
    pub seed: u64,
    pub state: MissionState,
    lanes: Vec<Lane>,
    pub stats: LaneStats,
    symbols: Vec<Vec<Vec<C64>>>,
    frame_offset_s: f64,
    kernel_h: Vec2,
}

fn xy(p: [f64; 3]) -> Vec2 {
    [p[0], p[1]]
}

impl MissionSim {
    pub fn new(scenario: Scenario, plan: MissionPlan, seed_value: u64) -> Result<Self> {
        scenario.validate()?;
        plan.validate()?;
        // planning errors surface before flying
        inset_polygon(&plan.area_polygon, plan.perimeter_margin_m)?;
        let mut lanes = Vec::new();
        for b in 0..scenario.band_k0.len() {
            if scenario.ues.iter().any(|u| u.band_id == b) {
                for a in 0..scenario.antennas.len() {
                    lanes.push(Lane { band: b, antenna: a, sync: None, misses: 0 });
                }
            }
        }
        let amp = (scenario.srs.n_fft as f64).sqrt();
        let mut symbols = Vec::new();
        for b in 0..scenario.band_k0.len() {
            let mut per_w = Vec::new();
            for w in 0..8u8 {
                let s = waveform::synthesize_symbol(&scenario.band_config(b, w)?)?;
                per_w.push(s.samples.iter().map(|v| v * amp).collect());
            }
            symbols.push(per_w);
        }
        let period = scenario.srs.period_s();
        let frame_offset_s = match scenario.frame_offset_s {
            Some(v) => v,
            None => seed::rng(seed_value, &[0xF0]).random::<f64>() * period,
        };
        let home = [plan.home[0], plan.home[1], plan.altitude_m];
        let uav = UavState::new(home, scenario.antennas.clone());
        let mut waypoints: VecDeque<Vec2> = densify(plan.home, plan.center, plan.waypoint_spacing_m).into();
        if waypoints.is_empty() {
            waypoints.push_back(plan.center);
        }
        let kernel_h = locate::area_bandwidth(&plan.area_polygon);
        let state = MissionState {
            phase: Phase::ToCenter,
            uav,
            waypoints,
            measurement_log: Vec::new(),
            estimates: vec![UeEstimates::default(); scenario.ues.len()],
            time_s: 0.0,
            phase_log: Vec::new(),
            refine_queue: VecDeque::new(),
            phase_start_s: 0.0,
            last_sample_xy: None,
            next_frame: 0,
        };
        Ok(MissionSim { scenario, plan, seed: seed_value, state, lanes, stats: LaneStats::default(), symbols, frame_offset_s, kernel_h })
    }

    fn frame_time(&self, k: i64) -> f64 {
        self.frame_offset_s + k as f64 * self.scenario.srs.period_s()
    }

    /// Moves the UAV by at most `max_dist` along the waypoint queue.
    fn fly(&mut self, max_dist: f64, dt: f64) {
        let start = xy(self.state.uav.position_m);
        let mut left = max_dist;
        let mut pos = start;
        while let Some(&w) = self.state.waypoints.front() {
            let d = dist(pos, w);
            if d <= left + 1e-12 {
                pos = w;
                left -= d.min(left);
                self.state.waypoints.pop_front();
            } else {
                let t = left / d;
                pos = [pos[0] + t * (w[0] - pos[0]), pos[1] + t * (w[1] - pos[1])];
                break;
            }
        }
        let z = self.plan.altitude_m;
        self.state.uav.velocity_mps = if dt > 0.0 { [(pos[0] - start[0]) / dt, (pos[1] - start[1]) / dt, 0.0] } else { [0.0; 3] };
        self.state.uav.position_m = [pos[0], pos[1], z];
    }

    /// Advances the simulation clock by `dt`, taking receptions at SRS
    /// period boundaries and switching phases when the queue empties.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.state.phase == Phase::Done {
            return Ok(());
        }
        let t_end = self.state.time_s + dt;
        loop {
            let tf = self.frame_time(self.state.next_frame);
            if tf > t_end {
                break;
            }
            if tf >= self.state.time_s {
                let sub = tf - self.state.time_s;
                self.fly(self.plan.speed_mps * sub, sub);
                self.state.time_s = tf;
                let here = xy(self.state.uav.position_m);
                let due = self.state.last_sample_xy.is_none_or(|p| dist(p, here) >= self.plan.min_sample_spacing_m);
                if due && !self.lanes.is_empty() {
                    self.receive(self.state.next_frame)?;
                    self.state.last_sample_xy = Some(here);
                }
            }
            self.state.next_frame += 1;
        }
        let sub = t_end - self.state.time_s;
        self.fly(self.plan.speed_mps * sub, sub);
        self.state.time_s = t_end;
        if self.state.waypoints.is_empty() {
            self.advance_phase()?;
        }
        Ok(())
    }

    fn close_phase(&mut self, next: Phase) {
        let t = self.state.time_s;
        self.state.phase_log.push((self.state.phase, self.state.phase_start_s, t));
        self.state.phase = next;
        self.state.phase_start_s = t;
    }

    fn estimate(&self, u: usize) -> Option<TimedEstimate> {
        let ue = &self.scenario.ues[u];
        locate::localize_ue(&self.state.measurement_log, u, &ue.ue_id, self.kernel_h, &self.scenario.locate)
            .ok()
            .map(|e| TimedEstimate { estimate: e, time_s: self.state.time_s })
    }

    fn start_next_refine_or_home(&mut self) {
        let here = xy(self.state.uav.position_m);
        let s = self.plan.waypoint_spacing_m;
        if let Some(u) = self.state.refine_queue.pop_front() {
            let c = self.state.estimates[u].initial.as_ref().map(|e| e.estimate.m_hat_xy).unwrap_or(here);
            self.state.waypoints = plan_hex_from(c, self.plan.hex_radius_m, s, here).into();
            self.close_phase(Phase::Refine(u));
        } else {
            let mut w: VecDeque<Vec2> = densify(here, self.plan.home, s).into();
            if w.is_empty() {
                w.push_back(self.plan.home);
            }
            self.state.waypoints = w;
            self.close_phase(Phase::ReturnHome);
        }
    }

    fn advance_phase(&mut self) -> Result<()> {
        match self.state.phase {
            Phase::ToCenter => {
                let here = xy(self.state.uav.position_m);
                let s = self.plan.waypoint_spacing_m;
                let lp = plan_perimeter_from(&self.plan.area_polygon, self.plan.perimeter_margin_m, s, here)?;
                let mut w: VecDeque<Vec2> = densify(here, lp[0], s).into();
                if dist(here, lp[0]) <= 1e-9 {
                    w.clear();
                }
                w.extend(lp);
                self.state.waypoints = w;
                self.close_phase(Phase::Perimeter);
            }
            Phase::Perimeter => {
                let mut detected = Vec::new();
                for u in 0..self.scenario.ues.len() {
                    let e = self.estimate(u);
                    if e.is_some() {
                        detected.push(u);
                    }
                    self.state.estimates[u].initial = e;
                }
                let here = xy(self.state.uav.position_m);
                let pts: Vec<Vec2> = detected.iter().map(|&u| self.state.estimates[u].initial.as_ref().unwrap().estimate.m_hat_xy).collect();
                self.state.refine_queue = nearest_neighbor_order(here, &pts).into_iter().map(|i| detected[i]).collect();
                self.start_next_refine_or_home();
            }
            Phase::Refine(u) => {
                self.state.estimates[u].refined = self.estimate(u);
                self.start_next_refine_or_home();
            }
            Phase::ReturnHome => self.close_phase(Phase::Done),
            Phase::Done => {}
        }
        Ok(())
    }

    /// Noise-free arrival of every band UE's symbol for frame `k` into a
    /// buffer starting at receiver sample `n0`.
    fn render(&self, out: &mut [C64], n0: i64, band: usize, antenna: usize, k: i64) -> Result<()> {
        let fs = self.scenario.srs.sample_rate_hz();
        let tf = self.frame_time(k);
        for (ui, ue) in self.scenario.ues.iter().enumerate() {
            if ue.band_id != band {
                continue;
            }
            let ps = seed::derive(self.seed, &[1, k as u64, ui as u64]);
            let paths = channel::geometry_paths(ue, &self.state.uav, &self.scenario.propagation, ps)?;
            let t_tx = tf - ue.timing_advance_s + channel::drift_offset_s(ue.clock_drift_ppm, tf);
            let sym = &self.symbols[band][ue.shift_index_w as usize];
            channel::accumulate(out, n0 as f64 / fs, sym, t_tx, fs, &paths[antenna], ue.cfo_hz, 0.0);
        }
        Ok(())
    }

    fn add_noise(&self, out: &mut [C64], tag: &[u64]) {
        if self.scenario.noise_enabled {
            let p = channel::noise_power_mw(self.scenario.srs.sample_rate_hz(), self.scenario.noise_figure_db);
            let mut rng = seed::rng(self.seed, tag);
            channel::add_awgn(out, p, &mut rng);
        }
    }

    /// Two-period capture starting at frame `k`, searched for the first confirmed SRS.
    fn acquire(&mut self, li: usize, k: i64) -> Result<Option<SyncState>> {
        let (band, antenna) = (self.lanes[li].band, self.lanes[li].antenna);
        let cfg = self.scenario.band_config(band, 0)?;
        let fs = cfg.sample_rate_hz();
        let per = cfg.period_samples() as i64;
        let n0 = (self.frame_time(k) * fs).floor() as i64 - per / 4;
        let len = 2 * per as usize;
        let mut buf = vec![C64::new(0.0, 0.0); len];
        let guard = (cfg.symbol_len() + 4 * cfg.n_fft) as i64;
        for kk in k - 1..=k + 2 {
            let start = (self.frame_time(kk) * fs).floor() as i64 - guard - n0;
            let stop = start + 3 * guard;
            let (a, b) = (start.max(0) as usize, (stop.max(0) as usize).min(len));
            if a < b {
                self.render(&mut buf[a..b], n0 + a as i64, band, antenna, kk)?;
            }
        }
        self.add_noise(&mut buf, &[2, k as u64, li as u64]);
        let trace = sync::repetition_metric(&buf, cfg.half_len(), cfg.cp_len)?;
        self.stats.acquisitions += 1;
        let ues = self.scenario.band_ues(band);
        let mut from = 0;
        let search = per as usize;
        while let Some(acq) = sync::acquire(&trace, from, search.saturating_sub(from), cfg.symbol_len(), &self.scenario.sync) {
            let c = ident::despread(&buf, acq.n_sync, &cfg, band)?;
            let mp = ident::matching_pursuit(&c, cfg.half_len(), &self.scenario.mp);
            if ident::false_positive_check(&mp, acq.n_sync) == Verdict::SrsConfirmed {
                let cleaned = ident::clean(&mp.components, &ues, cfg.half_len());
                let n_sync = n0 + acq.n_sync as i64;
                // express relative to frame 0 so reception q lands at n_sync + q T
                let n_sync0 = n_sync - k * per;
                let mut st = SyncState::new(n_sync0, per, self.scenario.sync.beta, acq.m_f_peak)?;
                if let Some(e) = cleaned.eps_hat_samples {
                    st.eps_filtered = e;
                }
                return Ok(Some(st));
            }
            self.stats.false_positives += 1;
            from = acq.n_sync + 1;
        }
        Ok(None)
    }

    fn receive(&mut self, k: i64) -> Result<()> {
        let nu = self.scenario.ues.len();
        let na = self.scenario.antennas.len();
        let mut gam = vec![vec![None; na]; nu];
        for li in 0..self.lanes.len() {
            if self.lanes[li].sync.is_none() {
                let st = self.acquire(li, k)?;
                self.lanes[li].sync = st;
                self.lanes[li].misses = 0;
                if self.lanes[li].sync.is_none() {
                    continue;
                }
            }
            let (band, antenna) = (self.lanes[li].band, self.lanes[li].antenna);
            let cfg = self.scenario.band_config(band, 0)?;
            let st = self.lanes[li].sync.clone().unwrap();
            let n_w = st.window(k);
            let l = cfg.half_len();
            let mut buf = vec![C64::new(0.0, 0.0); l];
            self.render(&mut buf, n_w, band, antenna, k)?;
            self.add_noise(&mut buf, &[3, k as u64, li as u64]);
            let c = ident::despread(&buf, 0, &cfg, band)?;
            let mut mp = ident::matching_pursuit(&c, l, &self.scenario.mp);
            self.stats.receptions += 1;
            let ues = self.scenario.band_ues(band);
            if ident::false_positive_check(&mp, n_w.max(0) as usize) == Verdict::FalsePositive {
                self.stats.empty_receptions += 1;
                self.lanes[li].misses += 1;
                if self.lanes[li].misses >= self.scenario.misses_before_reacquire.max(1) {
                    self.lanes[li].sync = None;
                }
                continue;
            }
            self.lanes[li].misses = 0;
            ident::classify_components(&mut mp.components, &ues, l)?;
            let cleaned = ident::clean(&mp.components, &ues, l);
            for (j, ue) in ues.iter().enumerate() {
                let u = self.scenario.ues.iter().position(|x| x.ue_id == ue.ue_id).unwrap();
                gam[u][antenna] = cleaned.gamma_max_db[j];
            }
            if let Some(e) = cleaned.eps_hat_samples {
                self.lanes[li].sync = Some(st.track_window(k, e));
            }
        }
        if gam.iter().any(|r| r.iter().any(|g| g.is_some())) {
            let r = self.state.measurement_log.len();
            self.state.measurement_log.push(Measurement {
                r,
                uav_xy_m: xy(self.state.uav.position_m),
                per_antenna_gamma: gam,
                timestamp_s: self.state.time_s,
            });
        }
        Ok(())
    }

    /// Runs until done (or a generous time cap) and builds the report.
    pub fn run(mut self) -> Result<MissionReport> {
        let cap_s = 4.0 * 3600.0;
        while self.state.phase != Phase::Done {
            self.step(self.plan.dt_s)?;
            if self.state.time_s > cap_s {
                return Err(Error::Planning("mission did not finish within the time cap".into()));
            }
        }
        Ok(self.report())
    }

    pub fn report(&self) -> MissionReport {
        let mut rows = Vec::new();
        let mut le_i = Vec::new();
        let mut le_r = Vec::new();
        for (u, ue) in self.scenario.ues.iter().enumerate() {
            let truth = xy(ue.position_m);
            let out = |e: &Option<TimedEstimate>| {
                e.as_ref().map(|t| EstimateOut {
                    m_hat_xy: t.estimate.m_hat_xy,
                    le_m: locate::localization_error(t.estimate.m_hat_xy, truth),
                    iterations: t.estimate.iterations,
                    converged: t.estimate.converged,
                    n_valid: t.estimate.n_valid,
                    time_min: t.time_s / 60.0,
                })
            };
            let initial = out(&self.state.estimates[u].initial);
            let refined = out(&self.state.estimates[u].refined);
            if let Some(e) = &initial {
                le_i.push(e.le_m);
            }
            if let Some(e) = &refined {
                le_r.push(e.le_m);
            }
            rows.push(UeRow {
                ue_id: ue.ue_id.clone(),
                band: ue.band_id,
                shift: ue.shift_index_w,
                true_xy: truth,
                los: ue.los,
                detected: initial.is_some(),
                initial,
                refined,
            });
        }
        let phases = self
            .state
            .phase_log
            .iter()
            .map(|(p, a, b)| PhaseTiming {
                phase: phase_name(*p, &self.scenario),
                start_s: *a,
                end_s: *b,
            })
            .collect();
        MissionReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: self.scenario.clone(),
            plan: self.plan.clone(),
            seed: self.seed,
            phases,
            total_time_s: self.state.time_s,
            estimates: rows,
            ale_initial_m: locate::average_localization_error(&le_i),
            ale_refined_m: locate::average_localization_error(&le_r),
            stats: self.stats.clone(),
            measurements: self.state.measurement_log.clone(),
        }
    }
}

pub fn phase_name(p: Phase, sc: &Scenario) -> String {
    match p {
        Phase::ToCenter => "to_center".into(),
        Phase::Perimeter => "perimeter".into(),
        Phase::Refine(u) => format!("refine:{}", sc.ues.get(u).map_or("?", |x| x.ue_id.as_str())),
        Phase::ReturnHome => "return_home".into(),
        Phase::Done => "done".into(),
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOut {
    pub m_hat_xy: Vec2,
    pub le_m: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_valid: usize,
    /// Mission time at which the estimate was produced.
    pub time_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRow {
    pub ue_id: String,
    pub band: usize,
    pub shift: u8,
    pub true_xy: Vec2,
    pub los: bool,
    pub detected: bool,
    pub initial: Option<EstimateOut>,
    pub refined: Option<EstimateOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub plan: MissionPlan,
    pub seed: u64,
    pub phases: Vec<PhaseTiming>,
    pub total_time_s: f64,
    pub estimates: Vec<UeRow>,
    pub ale_initial_m: Option<f64>,
    pub ale_refined_m: Option<f64>,
    pub stats: LaneStats,
    pub measurements: Vec<Measurement>,
}

pub fn run_mission(scenario: &Scenario, plan: &MissionPlan, seed_value: u64) -> Result<MissionReport> {
    MissionSim::new(scenario.clone(), plan.clone(), seed_value)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_inset() {
        let p = MissionPlan::default();
        let r = inset_polygon(&p.area_polygon, 20.0).unwrap();
        let w = r.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max) - r.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let h = r.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max) - r.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        assert!((w - 80.0).abs() < 1e-9 && (h - 55.0).abs() < 1e-9);
        assert!(inset_polygon(&p.area_polygon, 50.0).is_err());
    }

    #[test]
    fn hex_zero_radius() {
        assert_eq!(plan_hex([1.0, 2.0], 0.0, 1.0), vec![[1.0, 2.0]]);
    }
}
