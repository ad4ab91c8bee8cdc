//! JSON run configuration.
//!
//! Every key is optional and flat; unknown keys are rejected so that typos do
//! not silently fall back to defaults. Relative paths are resolved against the
//! directory holding the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use ortholoc_core::sim::{AgeProfile, OdometryNoise, TerrainKind, WorldSpec};
use ortholoc_core::{
    CameraModel, ConversionKind, ConversionSpec, FilterConfig, HeadingMean, KldConfig, NoiseConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Line,
    Rectangle,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Map raster for `run` and `gen-flight`.
    pub map: Option<PathBuf>,
    /// Flight directory for `run`.
    pub flight: Option<PathBuf>,
    pub seed: u64,

    pub conversion: ConversionKind,
    /// `d` for rectifying, `v` for logistic; ignored otherwise.
    pub conversion_param: Option<f64>,

    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub eps_tran_scale: f64,
    pub eps_tran_min: f64,
    pub eps_rot: f64,
    pub eps_rot_init: f64,

    pub kld_epsilon: f64,
    pub kld_delta: f64,
    pub bin_size_m: f64,
    pub n_min: usize,
    pub n_max: usize,

    pub init_radius_m: f64,
    pub init_count: usize,
    pub batch_size: usize,
    pub heading_mean: HeadingMean,

    pub fov_deg: f64,
    pub patch_px: usize,

    pub world_size_px: usize,
    pub gsd_m_per_px: f64,
    pub terrain: TerrainKind,
    pub octaves: u32,
    pub roughness: f64,
    pub base_period_px: f64,

    pub shape: ShapeKind,
    pub length_m: f64,
    pub width_m: f64,
    pub radius_m: f64,
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub frame_rate_hz: f64,
    /// Camera pixel noise, intensity levels (1σ).
    pub sensor_noise: f64,
    pub odometry_drift: f64,
    pub odometry_sigma_tran: f64,
    pub odometry_sigma_rot: f64,

    /// Scenario names such as `FL-200` (terrain letter, shape letter, altitude).
    pub scenarios: Vec<String>,
    /// Conversion labels such as `linear` or `logistic:0.2`.
    pub grid: Vec<String>,
    pub repetitions: usize,
    pub age_levels: Vec<f64>,
    pub age_occlusion: f64,
    pub age_brightness: f64,
    pub age_contrast_loss: f64,
    pub age_blur_radius: f64,

    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let filter = FilterConfig::default();
        let world = WorldSpec::default();
        let odo = OdometryNoise::default();
        let age = AgeProfile::default();
        Config {
            map: None,
            flight: None,
            seed: 1,
            conversion: ConversionKind::Logistic,
            conversion_param: None,
            alpha1: filter.noise.alpha1,
            alpha2: filter.noise.alpha2,
            alpha3: filter.noise.alpha3,
            eps_tran_scale: filter.noise.eps_tran_scale,
            eps_tran_min: filter.noise.eps_tran_min,
            eps_rot: filter.noise.eps_rot,
            eps_rot_init: filter.eps_rot_init,
            kld_epsilon: filter.kld.epsilon,
            kld_delta: filter.kld.delta,
            bin_size_m: filter.kld.bin_size,
            n_min: filter.kld.n_min,
            n_max: filter.kld.n_max,
            init_radius_m: filter.init_radius,
            init_count: filter.init_count,
            batch_size: filter.batch_size,
            heading_mean: filter.heading_mean,
            fov_deg: filter.camera.fov_deg,
            patch_px: filter.camera.patch_px,
            world_size_px: world.size_px,
            gsd_m_per_px: world.gsd,
            terrain: world.terrain,
            octaves: world.octaves,
            roughness: world.roughness,
            base_period_px: world.base_period_px,
            shape: ShapeKind::Line,
            length_m: 1000.0,
            width_m: 400.0,
            radius_m: 300.0,
            altitude_m: 200.0,
            speed_mps: 25.0,
            frame_rate_hz: 5.0,
            sensor_noise: 30.0,
            odometry_drift: odo.drift,
            odometry_sigma_tran: odo.sigma_tran,
            odometry_sigma_rot: odo.sigma_rot,
            scenarios: vec!["FL-200".into(), "UL-200".into()],
            grid: vec![
                "linear".into(),
                "softmax".into(),
                "rectifying:0.2".into(),
                "rectifying:0.1".into(),
                "rectifying:0".into(),
                "rectifying:-0.1".into(),
                "rectifying:-0.2".into(),
                "logistic:0.7".into(),
                "logistic:0.4".into(),
                "logistic:0.2".into(),
                "logistic:0.1".into(),
                "logistic:0.05".into(),
            ],
            repetitions: 10,
            age_levels: vec![0.0, 0.25, 0.5],
            age_occlusion: age.occlusion_fraction,
            age_brightness: age.brightness_shift,
            age_contrast_loss: age.contrast_loss,
            age_blur_radius: age.blur_radius,
            base_dir: PathBuf::from("."),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.base_dir.as_os_str().is_empty() {
            cfg.base_dir = PathBuf::from(".");
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn map_path(&self) -> Result<PathBuf, CliError> {
        self.map
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Config("configuration lacks a 'map' entry".into()))
    }

    pub fn flight_path(&self) -> Result<PathBuf, CliError> {
        self.flight
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Config("configuration lacks a 'flight' entry".into()))
    }

    pub fn conversion_spec(&self) -> Result<ConversionSpec, CliError> {
        let param = match (self.conversion_param, self.conversion) {
            (Some(p), _) => p,
            (None, ConversionKind::Logistic) => 0.2,
            (None, _) => 0.0,
        };
        Ok(ConversionSpec::new(self.conversion, param)?)
    }

    pub fn camera(&self) -> CameraModel {
        CameraModel {
            fov_deg: self.fov_deg,
            patch_px: self.patch_px,
        }
    }

    /// Filter settings with the given conversion.
    pub fn filter_with(&self, conversion: ConversionSpec) -> Result<FilterConfig, CliError> {
        let cfg = FilterConfig {
            kld: KldConfig {
                epsilon: self.kld_epsilon,
                delta: self.kld_delta,
                bin_size: self.bin_size_m,
                n_min: self.n_min,
                n_max: self.n_max,
            },
            noise: NoiseConfig {
                alpha1: self.alpha1,
                alpha2: self.alpha2,
                alpha3: self.alpha3,
                eps_tran_scale: self.eps_tran_scale,
                eps_tran_min: self.eps_tran_min,
                eps_rot: self.eps_rot,
            },
            conversion,
            camera: self.camera(),
            init_radius: self.init_radius_m,
            init_count: self.init_count,
            eps_rot_init: self.eps_rot_init,
            batch_size: self.batch_size,
            heading_mean: self.heading_mean,
            parallel: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filter(&self) -> Result<FilterConfig, CliError> {
        self.filter_with(self.conversion_spec()?)
    }

    pub fn world(&self, terrain: TerrainKind, seed: u64) -> WorldSpec {
        WorldSpec {
            seed,
            size_px: self.world_size_px,
            gsd: self.gsd_m_per_px,
            terrain,
            octaves: self.octaves,
            roughness: self.roughness,
            base_period_px: self.base_period_px,
        }
    }

    pub fn odometry_noise(&self) -> OdometryNoise {
        OdometryNoise {
            drift: self.odometry_drift,
            sigma_tran: self.odometry_sigma_tran,
            sigma_rot: self.odometry_sigma_rot,
        }
    }

    pub fn age_profile(&self) -> AgeProfile {
        AgeProfile {
            occlusion_fraction: self.age_occlusion,
            brightness_shift: self.age_brightness,
            contrast_loss: self.age_contrast_loss,
            blur_radius: self.age_blur_radius,
        }
    }

    /// Parsed conversion grid, in configuration order.
    pub fn grid_specs(&self) -> Result<Vec<ConversionSpec>, CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Config("conversion grid is empty".into()));
        }
        self.grid
            .iter()
            .map(|g| {
                g.parse::<ConversionSpec>()
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect()
    }

    pub fn check_repetitions(&self) -> Result<(), CliError> {
        if self.repetitions == 0 {
            return Err(CliError::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.n_max, 20_000);
        assert_eq!(cfg.repetitions, 10);
        assert_eq!(cfg.conversion_spec().unwrap().label(), "logistic:0.2");
        cfg.filter().unwrap();
    }

    #[test]
    fn keys_map_onto_filter_settings() {
        let cfg: Config = serde_json::from_str(
            r#"{"conversion": "rectifying", "conversion_param": -0.1, "n_min": 50,
                "kld_epsilon": 0.1, "eps_rot": 0.01, "heading_mean": "linear"}"#,
        )
        .unwrap();
        let f = cfg.filter().unwrap();
        assert_eq!(f.conversion.label(), "rectifying:-0.1");
        assert_eq!(f.kld.n_min, 50);
        assert_eq!(f.kld.epsilon, 0.1);
        assert_eq!(f.noise.eps_rot, 0.01);
        assert_eq!(f.heading_mean, HeadingMean::Linear);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<Config>(r#"{"n_maxx": 3}"#).is_err());
        let cfg: Config =
            serde_json::from_str(r#"{"conversion": "logistic", "conversion_param": 0}"#).unwrap();
        assert!(matches!(cfg.filter(), Err(CliError::Config(_))));
        let cfg: Config = serde_json::from_str(r#"{"grid": ["cubic:1"]}"#).unwrap();
        assert!(cfg.grid_specs().is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"map": "maps/a.png", "flight": "/abs/flight"}"#).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.map_path().unwrap(), dir.path().join("maps/a.png"));
        assert_eq!(cfg.flight_path().unwrap(), PathBuf::from("/abs/flight"));
    }
}
