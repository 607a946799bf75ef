//! Experiment plans: one sweep axis, a set of strategies and seeds.

use std::path::Path;

use cco_core::moppo::{Strategy, TrainConfig};
use cco_core::scenario::Scenario;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Total number of grids N (a perfect square).
    Grids,
    /// Number of surfaces.
    NRis,
    /// Elements per surface.
    Elements,
    /// Physical-size case 1, 2 or 3.
    SizeCase,
    /// Carrier frequency in GHz; 26 selects the LOS-only mmWave preset.
    Frequency,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Grids => "grids",
            Axis::NRis => "n_ris",
            Axis::Elements => "elements",
            Axis::SizeCase => "size_case",
            Axis::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategySpec {
    Avus,
    Lfus,
    Fixed { weights: [f64; 2] },
    /// AVUS on the same scenario with every surface removed.
    NoRis,
}

impl StrategySpec {
    pub const BM1: StrategySpec = StrategySpec::Fixed { weights: [0.3, 0.7] };
    pub const BM2: StrategySpec = StrategySpec::Fixed { weights: [0.6, 0.4] };

    pub fn trainer(self) -> Strategy {
        match self {
            StrategySpec::Avus | StrategySpec::NoRis => Strategy::Avus,
            StrategySpec::Lfus => Strategy::Lfus,
            StrategySpec::Fixed { weights } => Strategy::FixedWeight(weights),
        }
    }

    pub fn label(self) -> String {
        match self {
            StrategySpec::NoRis => "noris".into(),
            s => s.trainer().label(),
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "avus" => return Ok(StrategySpec::Avus),
            "lfus" => return Ok(StrategySpec::Lfus),
            "noris" => return Ok(StrategySpec::NoRis),
            "bm1" => return Ok(Self::BM1),
            "bm2" => return Ok(Self::BM2),
            _ => {}
        }
        let inner = lower
            .strip_prefix("fixed(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| HarnessError::Plan(format!("unknown strategy {s:?}")))?;
        let parts: Vec<f64> = inner
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Plan(format!("strategy {s:?}: {e}")))?;
        match parts[..] {
            [a, b] => Ok(StrategySpec::Fixed { weights: [a, b] }),
            _ => Err(HarnessError::Plan(format!("strategy {s:?} needs two weights"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub episodes: usize,
    pub steps: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { episodes: 200, steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub strategies: Vec<StrategySpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budget: Budget,
    /// Scenario every axis value is applied to; the desk preset if absent.
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub training: TrainConfig,
    /// Concurrent cells; 0 uses the rayon default.
    #[serde(default)]
    pub threads: usize,
}

/// One (axis value, strategy, seed) unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub axis_value: f64,
    pub strategy: StrategySpec,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let p: ExperimentPlan = toml::from_str(s).map_err(|e| HarnessError::Plan(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Plan(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Plan(m));
        if self.seeds.is_empty() {
            return bad("plan needs at least one seed".into());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) || self.values.iter().any(|v| !v.is_finite()) {
            return bad(format!("axis values must be finite and strictly increasing: {:?}", self.values));
        }
        for s in &self.strategies {
            if let StrategySpec::Fixed { weights } = s {
                if weights.iter().any(|w| *w < 0.0) || (weights[0] + weights[1] - 1.0).abs() > 1e-9 {
                    return bad(format!("fixed weights {weights:?} must be >= 0 and sum to 1"));
                }
            }
        }
        if self.budget.episodes == 0 || self.budget.steps == 0 {
            return bad("budget episodes and steps must be >= 1".into());
        }
        self.training.validate().map_err(|e| HarnessError::Plan(e.to_string()))?;
        for &v in &self.values {
            self.scenario_at(v).map_err(|e| HarnessError::Plan(format!("axis value {v}: {e}")))?;
        }
        Ok(())
    }

    /// Cells in table order: axis value, then strategy, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &axis_value in &self.values {
            for &strategy in &self.strategies {
                for &seed in &self.seeds {
                    out.push(Cell { axis_value, strategy, seed });
                }
            }
        }
        out
    }

    pub fn base_scenario(&self) -> Scenario {
        self.scenario.clone().unwrap_or_else(Scenario::desk)
    }

    /// Scenario at an axis value, surfaces included.
    pub fn scenario_at(&self, value: f64) -> Result<Scenario, HarnessError> {
        let base = self.base_scenario();
        let int = |v: f64| -> Result<usize, HarnessError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Plan(format!("{} axis needs integer values, got {v}", self.axis.name())))
            }
        };
        let mut sc = match self.axis {
            Axis::Grids => {
                let n = int(value)?;
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n || n == 0 {
                    return Err(HarnessError::Plan(format!("grid count {n} is not a positive square")));
                }
                base.with_grid_side_count(side)?
            }
            Axis::NRis => base.with_surface_count(int(value)?)?,
            Axis::Elements => {
                let (r, c) = element_shape(int(value)?)?;
                base.with_elements(r, c)
            }
            Axis::SizeCase => base.size_case(int(value)? as u8)?,
            Axis::Frequency => {
                if (value - 26.0).abs() < 1e-9 {
                    base.mmwave()
                } else {
                    let mut s = base;
                    s.channel.carrier_frequency = value * 1e9;
                    s.name = format!("{}-{value}ghz", s.name);
                    s
                }
            }
        };
        sc.env.episode_steps = self.budget.steps;
        sc.validate()?;
        Ok(sc)
    }

    pub fn cell_scenario(&self, cell: &Cell) -> Result<Scenario, HarnessError> {
        let sc = self.scenario_at(cell.axis_value)?;
        Ok(match cell.strategy {
            StrategySpec::NoRis => sc.without_surfaces(),
            _ => sc,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { episodes: self.budget.episodes, ..self.training.clone() }
    }

    /// Content hash of everything that determines a cell's outputs. The
    /// scenario name is excluded so that identical physics share a hash.
    pub fn cell_hash(&self, cell: &Cell) -> Result<String, HarnessError> {
        let mut sc = self.cell_scenario(cell)?;
        sc.name.clear();
        let mut h = Sha256::new();
        h.update(sc.to_toml_string().as_bytes());
        h.update(toml::to_string(&self.train_config()).expect("config serializes").as_bytes());
        h.update(cell.strategy.label().as_bytes());
        h.update(cell.seed.to_le_bytes());
        Ok(hex::encode(h.finalize())[..16].to_string())
    }
}

/// Closest-to-square `rows x cols` factorization with `rows >= cols`.
pub fn element_shape(k: usize) -> Result<(usize, usize), HarnessError> {
    if k == 0 {
        return Err(HarnessError::Plan("element count must be >= 1".into()));
    }
    let mut c = (k as f64).sqrt().floor() as usize;
    while k % c != 0 {
        c -= 1;
    }
    Ok((k / c, c))
}
