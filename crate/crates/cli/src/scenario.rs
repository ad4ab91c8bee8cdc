//! Named synthetic scenarios and their seeded datasets.

use std::fmt;
use std::str::FromStr;

use ortholoc_core::sim::{
    age_map, derive_seed, generate_world, hash_str, simulate_flight, AgeSpec, FlightPlan,
    FlightShape, TerrainKind,
};
use ortholoc_core::{FlightData, RasterMap};

use crate::config::{Config, ShapeKind};
use crate::error::CliError;

/// Terrain kind, flight shape and altitude, written like `FL-200`:
/// F(ractal) or U(rban), then L(ine), C(ircle) or R(ectangle), then meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub terrain: TerrainKind,
    pub shape: ShapeKind,
    pub altitude: f64,
}

impl Scenario {
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn flight_shape(&self, cfg: &Config) -> FlightShape {
        shape_of(self.shape, cfg)
    }
}

pub fn shape_of(kind: ShapeKind, cfg: &Config) -> FlightShape {
    match kind {
        ShapeKind::Line => FlightShape::Line {
            length: cfg.length_m,
        },
        ShapeKind::Rectangle => FlightShape::Rectangle {
            length: cfg.length_m,
            width: cfg.width_m,
        },
        ShapeKind::Circle => FlightShape::Circle {
            radius: cfg.radius_m,
        },
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            ShapeKind::Line => 'L',
            ShapeKind::Rectangle => 'R',
            ShapeKind::Circle => 'C',
        };
        write!(f, "{}{}-{}", self.terrain.letter(), shape, self.altitude)
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("scenario '{s}' is not of the form FL-200"));
        let (code, alt) = s.trim().split_once('-').ok_or_else(bad)?;
        let mut letters = code.chars();
        let terrain = match letters.next().map(|c| c.to_ascii_uppercase()) {
            Some('F') => TerrainKind::Fractal,
            Some('U') => TerrainKind::UrbanBlocks,
            _ => return Err(bad()),
        };
        let shape = match letters.next().map(|c| c.to_ascii_uppercase()) {
            Some('L') => ShapeKind::Line,
            Some('C') => ShapeKind::Circle,
            Some('R') => ShapeKind::Rectangle,
            _ => return Err(bad()),
        };
        if letters.next().is_some() {
            return Err(bad());
        }
        let altitude: f64 = alt.parse().map_err(|_| bad())?;
        if !(altitude > 0.0 && altitude.is_finite()) {
            return Err(bad());
        }
        Ok(Scenario {
            terrain,
            shape,
            altitude,
        })
    }
}

/// Seed of the world, frames and odometry for one repetition of a scenario.
pub fn dataset_seed(base: u64, scenario: &str, rep: usize) -> u64 {
    derive_seed(&[base, hash_str(scenario), rep as u64])
}

/// Filter seed for one run; every (scenario, conversion, repetition) cell
/// gets its own stream.
pub fn filter_seed(base: u64, scenario: &str, conversion: &str, rep: usize) -> u64 {
    derive_seed(&[base, hash_str(scenario), hash_str(conversion), rep as u64])
}

/// Seed of the aging perturbation applied to a dataset's map.
pub fn age_seed(dataset_seed: u64) -> u64 {
    derive_seed(&[dataset_seed, hash_str("age")])
}

pub struct Dataset {
    pub map: RasterMap,
    pub flight: FlightData,
}

/// The map of `gen-world` with this seed and terrain.
pub fn build_world(cfg: &Config, terrain: TerrainKind, seed: u64) -> Result<RasterMap, CliError> {
    Ok(generate_world(&cfg.world(terrain, seed))?)
}

/// The flight of `gen-flight` with this seed over `map`.
pub fn build_flight(
    cfg: &Config,
    map: &RasterMap,
    shape: FlightShape,
    altitude: f64,
    seed: u64,
) -> Result<FlightData, CliError> {
    let plan = FlightPlan::centered(shape, map, altitude, cfg.speed_mps, cfg.frame_rate_hz);
    Ok(simulate_flight(
        map,
        &plan,
        &cfg.camera(),
        cfg.sensor_noise,
        &cfg.odometry_noise(),
        seed,
    )?)
}

pub fn build_dataset(cfg: &Config, scenario: &Scenario, seed: u64) -> Result<Dataset, CliError> {
    let map = build_world(cfg, scenario.terrain, seed)?;
    let flight = build_flight(
        cfg,
        &map,
        scenario.flight_shape(cfg),
        scenario.altitude,
        seed,
    )?;
    Ok(Dataset { map, flight })
}

/// The dataset's map aged to `level`; level 0 is the map itself.
pub fn aged(
    cfg: &Config,
    map: &RasterMap,
    dataset_seed: u64,
    level: f64,
) -> Result<RasterMap, CliError> {
    let spec = AgeSpec {
        level,
        seed: age_seed(dataset_seed),
        profile: cfg.age_profile(),
    };
    Ok(age_map(map, &spec)?)
}

pub fn parse_scenarios(cfg: &Config) -> Result<Vec<Scenario>, CliError> {
    if cfg.scenarios.is_empty() {
        return Err(CliError::Config("no scenarios configured".into()));
    }
    cfg.scenarios.iter().map(|s| s.parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ["FL-200", "UC-300", "FR-250.5"] {
            let s: Scenario = name.parse().unwrap();
            assert_eq!(s.name(), name);
        }
        let s: Scenario = "ul-200".parse().unwrap();
        assert_eq!(s.terrain, TerrainKind::UrbanBlocks);
        assert_eq!(s.name(), "UL-200");
        for bad in ["FL200", "XL-200", "FX-200", "FLL-200", "FL--5", "FL-0"] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
    }

    #[test]
    fn seeds_are_isolated_per_cell() {
        let a = filter_seed(1, "FL-200", "linear", 0);
        assert_ne!(a, filter_seed(1, "FL-200", "linear", 1));
        assert_ne!(a, filter_seed(1, "UL-200", "linear", 0));
        assert_ne!(a, filter_seed(1, "FL-200", "softmax", 0));
        assert_ne!(a, filter_seed(2, "FL-200", "linear", 0));
        assert_eq!(a, filter_seed(1, "FL-200", "linear", 0));
        assert_eq!(dataset_seed(5, "FL-200", 3), dataset_seed(5, "FL-200", 3));
    }
}
