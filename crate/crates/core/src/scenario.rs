//! Scenario files (TOML) and built-in presets.
//!
//! Powers are in mW, lengths in meters, frequencies in Hz.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ArrayLayout, ChannelParams, PerLink};
use crate::error::{CcoError, Result};
use crate::geometry::{self, GridMap, RisPlacement};
use crate::starris::{InterferenceModel, RadioParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub radio: RadioConfig,
    pub env: EnvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub side_length: f64,
    pub grid_side: f64,
    pub bs_height: f64,
    #[serde(default)]
    pub surfaces: Vec<RisPlacement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_frequency: f64,
    /// Reference gain at 1 m in dB. When absent the free-space term
    /// `c / (4 pi f_c)` is used instead.
    pub reference_gain_db: Option<f64>,
    pub rician_db: PerLink<f64>,
    /// Drop the NLOS part on every link.
    #[serde(default)]
    pub los_only: bool,
    pub path_loss_exponent: PerLink<f64>,
    pub elements_per_row: usize,
    pub elements_per_col: usize,
    pub element_width: f64,
    pub element_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub max_power: f64,
    pub min_power: f64,
    pub initial_power: f64,
    pub rsrp_threshold: f64,
    pub noise_power: f64,
    pub bandwidth: f64,
    #[serde(default)]
    pub interference: InterferenceModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Grid step `z` of the energy split and of the power grid.
    pub amplitude_step: f64,
    pub phase_levels: usize,
    pub lambda_coverage: f64,
    pub lambda_capacity: f64,
    pub episode_steps: usize,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Candidate surface sites for the 3 m desk square, nested so that the
/// first `n` of them form the `n`-surface scenario.
const DESK_SITES: [(f64, f64); 4] = [(1.5, 1.5), (1.0, 0.6), (1.0, 2.4), (2.2, 1.5)];

impl Scenario {
    /// Desk-scale default: 3 m square (N = 9), two surfaces with 4x4
    /// elements, 3.5 GHz Rician channels.
    pub fn desk() -> Self {
        let surfaces = DESK_SITES[..2]
            .iter()
            .map(|&(x, y)| RisPlacement { x, y, height: 1.0, width: 0.5 })
            .collect();
        Scenario {
            name: "desk".into(),
            geometry: GeometryConfig { side_length: 3.0, grid_side: 1.0, bs_height: 7.0, surfaces },
            channel: ChannelConfig {
                carrier_frequency: 3.5e9,
                reference_gain_db: Some(-30.0),
                rician_db: PerLink { bs_ris: 3.0, ris_point: 3.0, bs_point: 3.0 },
                los_only: false,
                path_loss_exponent: PerLink { bs_ris: 3.5, ris_point: 2.8, bs_point: 2.2 },
                elements_per_row: 4,
                elements_per_col: 4,
                element_width: 0.025,
                element_height: 0.025,
            },
            radio: RadioConfig {
                max_power: 200.0,
                min_power: 0.1,
                initial_power: 2.1,
                rsrp_threshold: 2.0e-3,
                noise_power: 9e-12,
                bandwidth: 1.0,
                interference: InterferenceModel::default(),
            },
            env: EnvConfig {
                amplitude_step: 0.1,
                phase_levels: 8,
                lambda_coverage: 5.0,
                lambda_capacity: 64.0,
                episode_steps: 200,
            },
        }
    }

    /// Radio values exactly as tabulated (threshold 0.23 mW, 10 MHz).
    pub fn table_values() -> Self {
        let mut s = Self::desk();
        s.name = "table".into();
        s.radio.rsrp_threshold = 0.23;
        s.radio.bandwidth = 10e6;
        s.env.episode_steps = 5000;
        s
    }

    /// Desk scenario with the first `n` candidate sites (0 to 4).
    pub fn with_surface_count(mut self, n: usize) -> Result<Self> {
        if n > DESK_SITES.len() {
            return Err(CcoError::Scenario(format!(
                "at most {} surface sites are defined, asked for {n}",
                DESK_SITES.len()
            )));
        }
        let template = self.geometry.surfaces.first().copied().unwrap_or(RisPlacement {
            x: 0.0,
            y: 0.0,
            height: 1.0,
            width: 0.5,
        });
        let scale = self.geometry.side_length / 3.0;
        self.geometry.surfaces = DESK_SITES[..n]
            .iter()
            .map(|&(x, y)| RisPlacement { x: x * scale, y: y * scale, ..template })
            .collect();
        self.name = format!("{}-ns{n}", self.name);
        Ok(self)
    }

    /// Resizes the square to `n_per_side` grids of the current size, moving
    /// the surfaces proportionally.
    pub fn with_grid_side_count(mut self, n_per_side: usize) -> Result<Self> {
        if n_per_side == 0 {
            return Err(CcoError::Scenario("need at least one grid per side".into()));
        }
        let new_side = n_per_side as f64 * self.geometry.grid_side;
        let scale = new_side / self.geometry.side_length;
        for s in &mut self.geometry.surfaces {
            s.x *= scale;
            s.y *= scale;
        }
        self.geometry.side_length = new_side;
        self.name = format!("{}-n{}", self.name, n_per_side * n_per_side);
        Ok(self)
    }

    /// Changes the element grid to `per_row x per_col`.
    pub fn with_elements(mut self, per_row: usize, per_col: usize) -> Self {
        self.channel.elements_per_row = per_row;
        self.channel.elements_per_col = per_col;
        self.name = format!("{}-k{}", self.name, per_row * per_col);
        self
    }

    /// Physical-size cases on the desk square (height threshold 1.4 m,
    /// width threshold 0.6 m):
    /// 1. short and wide, only the height indicator holds;
    /// 2. tall and narrow, only the width indicator holds;
    /// 3. tall and wide, neither holds.
    ///
    /// Element count grows with panel area from 16 elements per 0.5 m^2.
    pub fn size_case(mut self, case: u8) -> Result<Self> {
        let (height, width, per_row, per_col) = match case {
            1 => (1.0, 1.0, 8, 4),
            2 => (2.0, 0.5, 8, 4),
            3 => (2.0, 1.0, 8, 8),
            _ => return Err(CcoError::Scenario(format!("unknown size case {case}"))),
        };
        for s in &mut self.geometry.surfaces {
            s.height = height;
            s.width = width;
        }
        self.channel.elements_per_row = per_row;
        self.channel.elements_per_col = per_col;
        self.name = format!("{}-case{case}", self.name);
        Ok(self)
    }

    /// 26 GHz with LOS-only links and the free-space reference gain.
    pub fn mmwave(mut self) -> Self {
        self.channel.carrier_frequency = 26e9;
        self.channel.los_only = true;
        self.channel.reference_gain_db = None;
        self.name = format!("{}-26ghz", self.name);
        self
    }

    /// Same scenario with every surface removed.
    pub fn without_surfaces(mut self) -> Self {
        self.geometry.surfaces.clear();
        self.name = format!("{}-noris", self.name);
        self
    }

    pub fn grid(&self) -> Result<GridMap> {
        let g = &self.geometry;
        geometry::build_grid(g.side_length, g.grid_side, g.bs_height, g.surfaces.clone())
    }

    pub fn layout(&self) -> ArrayLayout {
        ArrayLayout {
            per_row: self.channel.elements_per_row,
            per_col: self.channel.elements_per_col,
            elem_width: self.channel.element_width,
            elem_height: self.channel.element_height,
        }
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        let c = &self.channel;
        let gain = match c.reference_gain_db {
            Some(db) => db_to_linear(db),
            None => channel::free_space_reference_gain(c.carrier_frequency),
        };
        let rician = if c.los_only {
            PerLink { bs_ris: f64::INFINITY, ris_point: f64::INFINITY, bs_point: f64::INFINITY }
        } else {
            PerLink {
                bs_ris: db_to_linear(c.rician_db.bs_ris),
                ris_point: db_to_linear(c.rician_db.ris_point),
                bs_point: db_to_linear(c.rician_db.bs_point),
            }
        };
        ChannelParams::new(c.carrier_frequency, gain, rician, c.path_loss_exponent)
    }

    pub fn radio_params(&self) -> RadioParams {
        RadioParams {
            rsrp_threshold: self.radio.rsrp_threshold,
            noise_power: self.radio.noise_power,
            bandwidth: self.radio.bandwidth,
            interference: self.radio.interference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.channel_params()?;
        let c = &self.channel;
        if !self.geometry.surfaces.is_empty() && c.elements_per_row * c.elements_per_col < 2 {
            return Err(CcoError::Scenario("a surface needs at least 2 elements".into()));
        }
        if !(c.element_width > 0.0 && c.element_height > 0.0) {
            return Err(CcoError::Scenario("element size must be > 0".into()));
        }
        let r = &self.radio;
        if !(r.max_power > 0.0 && r.min_power > 0.0 && r.min_power <= r.max_power) {
            return Err(CcoError::Scenario("need 0 < min_power <= max_power".into()));
        }
        if !(r.initial_power >= r.min_power && r.initial_power <= r.max_power) {
            return Err(CcoError::Scenario("initial_power outside [min_power, max_power]".into()));
        }
        if !(r.noise_power > 0.0 && r.bandwidth > 0.0 && r.rsrp_threshold > 0.0) {
            return Err(CcoError::Scenario("noise, bandwidth and threshold must be > 0".into()));
        }
        let e = &self.env;
        let z = e.amplitude_step;
        if !(z > 0.0 && z <= 0.5) || ((1.0 / z).round() * z - 1.0).abs() > 1e-9 {
            return Err(CcoError::Scenario(format!(
                "amplitude_step {z} must divide 1 and lie in (0, 0.5]"
            )));
        }
        if e.phase_levels < 1 {
            return Err(CcoError::Scenario("phase_levels must be >= 1".into()));
        }
        if !(e.lambda_coverage > 0.0 && e.lambda_capacity > 0.0) {
            return Err(CcoError::Scenario("Poisson means must be > 0".into()));
        }
        if e.episode_steps == 0 {
            return Err(CcoError::Scenario("episode_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| CcoError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let desk = Scenario::desk();
        desk.validate().unwrap();
        assert_eq!(desk.grid().unwrap().n_points(), 9);
        assert_eq!(desk.layout().n_elements(), 16);
        for n in 0..=4 {
            Scenario::desk().with_surface_count(n).unwrap().validate().unwrap();
        }
        for n in [3, 4, 5] {
            let s = Scenario::desk().with_grid_side_count(n).unwrap();
            assert_eq!(s.grid().unwrap().n_points(), n * n);
        }
        for case in 1..=3 {
            Scenario::desk().size_case(case).unwrap().validate().unwrap();
        }
        Scenario::desk().mmwave().validate().unwrap();
        Scenario::table_values().validate().unwrap();
        assert!(Scenario::desk().with_surface_count(5).is_err());
    }

    #[test]
    fn size_cases_cross_the_intended_thresholds() {
        let expect = [(true, false), (false, true), (false, false)];
        for (case, (h, w)) in (1..=3).zip(expect) {
            let g = Scenario::desk().size_case(case).unwrap().grid().unwrap();
            let ind = g.indicators(0).unwrap();
            assert_eq!((ind.height, ind.width), (h, w), "case {case}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::desk().mmwave();
        let text = s.to_toml_string();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Scenario::from_toml_str("name = 1").is_err());
        let mut s = Scenario::desk();
        s.env.amplitude_step = 0.3;
        assert!(Scenario::from_toml_str(&s.to_toml_string()).is_err());
        let mut s = Scenario::desk();
        s.radio.initial_power = 500.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mmwave_drops_nlos() {
        let p = Scenario::desk().mmwave().channel_params().unwrap();
        assert!(p.rician.bs_ris.is_infinite());
        assert!((p.reference_gain - channel::free_space_reference_gain(26e9)).abs() < 1e-18);
    }
}
