//! Fixtures shared by the benchmarks: a seeded world, a camera and a particle
//! cloud around a pose with a matching frame.

use ortholoc_core::filter::{init_particles, ParticleSet};
use ortholoc_core::sim::generate_world;
use ortholoc_core::{CameraModel, Patch, Pose2D, RasterMap, WorldSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ALTITUDE: f64 = 200.0;

pub struct Fixture {
    pub map: RasterMap,
    pub camera: CameraModel,
    pub truth: Pose2D,
    pub frame: Patch,
    pub particles: ParticleSet,
}

pub fn fixture(patch_px: usize) -> Fixture {
    let map = generate_world(&WorldSpec::default()).expect("default world");
    let camera = CameraModel::new(60.0, patch_px).expect("camera");
    let (cx, cy) = map.center();
    let truth = Pose2D::new(cx, cy, 0.4);
    let frame = map
        .extract_patch(&truth, ALTITUDE, &camera)
        .expect("valid altitude")
        .expect("centered footprint");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let particles = init_particles(&truth, 30.0, 1000, 0.05, &mut rng).expect("particles");
    Fixture {
        map,
        camera,
        truth,
        frame,
        particles,
    }
}
