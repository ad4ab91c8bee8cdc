#![allow(dead_code)]

use std::path::Path;

use ortholoc_cli::Config;

/// A configuration small enough for unit-speed runs: a 512 m world, a 100 m
/// line at 100 m altitude and 16 px camera patches.
pub fn small_config() -> Config {
    Config {
        world_size_px: 256,
        patch_px: 16,
        altitude_m: 100.0,
        length_m: 100.0,
        n_min: 50,
        n_max: 300,
        init_radius_m: 30.0,
        init_count: 200,
        scenarios: vec!["FL-100".into()],
        grid: vec!["linear".into(), "logistic:0.2".into()],
        repetitions: 2,
        age_levels: vec![0.0, 0.5],
        ..Config::default()
    }
}

/// Writes `cfg` as JSON next to where its relative paths should resolve.
pub fn write_config(cfg: &Config, path: &Path) {
    std::fs::write(path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
}
