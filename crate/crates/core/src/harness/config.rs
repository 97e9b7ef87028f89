//! Scenario files (TOML) and the built-in presets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Antenna, Environment, PropagationModel, UeProfile, Vec3};
use crate::error::{Error, Result};
use crate::ident::MpOptions;
use crate::locate::LocateParams;
use crate::mission::{MissionPlan, Scenario};
use crate::seed;
use crate::sync::SyncParams;
use crate::waveform::SrsConfig;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

pub const RURAL_TOML: &str = include_str!("../../configs/rural.toml");
pub const URBAN_TOML: &str = include_str!("../../configs/urban.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub id: String,
    pub position_m: Vec3,
    pub band: usize,
    pub shift: u8,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    /// Drawn uniformly within the oscillator tolerance when absent.
    #[serde(default)]
    pub cfo_hz: Option<f64>,
    /// One-way delay to the gNB when absent (arrivals aligned at the gNB).
    #[serde(default)]
    pub timing_advance_s: Option<f64>,
    #[serde(default = "default_drift")]
    pub clock_drift_ppm: f64,
    /// Drawn from a randomly oriented dipole when absent.
    #[serde(default)]
    pub antenna_gain_dbi: Option<f64>,
    #[serde(default = "yes")]
    pub los: bool,
}

fn default_tx_power() -> f64 {
    23.0
}

fn default_drift() -> f64 {
    0.05
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavSpec {
    pub noise_figure_db: f64,
    pub noise_enabled: bool,
    /// Two crossed horizontal dipoles when absent.
    pub antennas: Option<Vec<Antenna>>,
}

impl Default for UavSpec {
    fn default() -> Self {
        UavSpec { noise_figure_db: 7.0, noise_enabled: true, antennas: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingSpec {
    pub sync: SyncParams,
    pub mp: MpOptions,
    pub locate: LocateParams,
    pub misses_before_reacquire: usize,
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        ProcessingSpec {
            sync: SyncParams::default(),
            mp: MpOptions::default(),
            locate: LocateParams::default(),
            misses_before_reacquire: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub environment: Environment,
    #[serde(default = "carrier")]
    pub carrier_hz: f64,
    #[serde(default)]
    pub srs: SrsConfig,
    #[serde(default = "bands")]
    pub band_k0: Vec<usize>,
    /// Overrides the environment's default channel parameters.
    #[serde(default)]
    pub channel: Option<PropagationModel>,
    #[serde(default)]
    pub gnb_position_m: Option<Vec3>,
    #[serde(default)]
    pub frame_offset_s: Option<f64>,
    #[serde(default)]
    pub uav: UavSpec,
    #[serde(default)]
    pub mission: MissionPlan,
    #[serde(default)]
    pub processing: ProcessingSpec,
    #[serde(default, rename = "ue")]
    pub ues: Vec<UeSpec>,
}

fn schema() -> u32 {
    SCENARIO_SCHEMA_VERSION
}

fn carrier() -> f64 {
    2.4e9
}

fn bands() -> Vec<usize> {
    vec![0, 80]
}

/// Floor for the random UE antenna gain draw.
pub const UE_GAIN_FLOOR_DB: f64 = -10.0;

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            offset: e.span().map_or(0, |s| s.start as u64),
            msg: e.message().to_string(),
        })?;
        if f.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!("{origin}: unsupported schema_version {}", f.schema_version)));
        }
        Ok(f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "rural" => Self::parse(RURAL_TOML, "preset:rural"),
            "urban" => Self::parse(URBAN_TOML, "preset:urban"),
            _ => Err(Error::Config(format!("unknown preset {name:?} (rural, urban)"))),
        }
    }

    /// Resolves defaults and seeded random fields into a runnable scenario.
    pub fn build(&self, seed_value: u64) -> Result<(Scenario, MissionPlan)> {
        let propagation = match &self.channel {
            Some(c) => PropagationModel { carrier_hz: self.carrier_hz, ..c.clone() },
            None => match self.environment {
                Environment::Rural => PropagationModel::rural(self.carrier_hz),
                Environment::Urban => PropagationModel::urban(self.carrier_hz),
            },
        };
        let cfo_lim = channel::CFO_TOLERANCE_PPM * 1e-6 * self.carrier_hz;
        let mut ues = Vec::with_capacity(self.ues.len());
        for u in &self.ues {
            let mut rng = seed::rng(seed_value, &[0xC0, seed::hash_str(&u.id)]);
            let cfo = u.cfo_hz.unwrap_or_else(|| cfo_lim * (2.0 * rng.random::<f64>() - 1.0));
            let gain = u.antenna_gain_dbi.unwrap_or_else(|| channel::random_dipole_gain_db(&mut rng, UE_GAIN_FLOOR_DB));
            let ta = match (u.timing_advance_s, self.gnb_position_m) {
                (Some(t), _) => t,
                (None, Some(g)) => channel::norm([u.position_m[0] - g[0], u.position_m[1] - g[1], u.position_m[2] - g[2]]) / channel::SPEED_OF_LIGHT,
                (None, None) => 0.0,
            };
            ues.push(UeProfile {
                ue_id: u.id.clone(),
                position_m: u.position_m,
                band_id: u.band,
                shift_index_w: u.shift,
                tx_power_dbm: u.tx_power_dbm,
                cfo_hz: cfo,
                timing_advance_s: ta,
                clock_drift_ppm: u.clock_drift_ppm,
                antenna_gain_dbi: gain,
                los: u.los,
            });
        }
        let scenario = Scenario {
            name: self.name.clone(),
            srs: self.srs.clone(),
            band_k0: self.band_k0.clone(),
            ues,
            propagation,
            antennas: self.uav.antennas.clone().unwrap_or_else(channel::default_antennas),
            noise_figure_db: self.uav.noise_figure_db,
            noise_enabled: self.uav.noise_enabled,
            sync: self.processing.sync,
            mp: self.processing.mp,
            locate: self.processing.locate,
            frame_offset_s: self.frame_offset_s,
            misses_before_reacquire: self.processing.misses_before_reacquire,
        };
        scenario.validate()?;
        self.mission.validate()?;
        Ok((scenario, self.mission.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for p in ["rural", "urban"] {
            let f = ScenarioFile::preset(p).unwrap();
            let (s, plan) = f.build(1).unwrap();
            assert_eq!(s.ues.len(), 6);
            assert_eq!(plan.perimeter_margin_m, 20.0);
        }
        assert!(ScenarioFile::preset("lunar").is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let t = "name = \"x\"\nenvironment = \"rural\"\nbogus = 1\n";
        assert!(ScenarioFile::parse(t, "t").is_err());
    }
}
