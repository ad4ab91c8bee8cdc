//! Map-matching particle filter with KLD-adaptive sample sizes.
//!
//! Each [`step`] draws particles from the previous set by weight, moves them
//! with the odometry motion model, scores the map patch under each one
//! against the camera frame, and keeps sampling until the number of occupied
//! spatial bins says the set is large enough. Likelihoods are then normalized
//! into weights and the pose estimate is their weighted mean.
//!
//! Sampling and propagation consume a single RNG stream in order. Patch
//! scoring, the expensive part, runs in batches that may be spread over a
//! thread pool; the stop condition is re-checked between batches, so a step
//! may overshoot the bound by less than one batch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FlightData;
use crate::error::{Error, Result};
use crate::kld_sampler::{required_particles, BinGrid, KldConfig, WeightedSampler};
use crate::likelihood::{normalize, ConversionSpec};
use crate::motion::{dead_reckon, propagate, sample_normal, NoiseConfig, OdometryDelta};
use crate::pose::{wrap_angle, Pose2D};
use crate::raster_map::{CameraModel, Patch, RasterMap};
use crate::report::{FrameRecord, RunReport};
use crate::similarity::PreparedTemplate;

/// How particle headings are fused into the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingMean {
    /// `atan2(Σ b·sin θ, Σ b·cos θ)`.
    #[default]
    Circular,
    /// Plain weighted sum of angles; breaks across the ±π seam.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub kld: KldConfig,
    pub noise: NoiseConfig,
    pub conversion: ConversionSpec,
    pub camera: CameraModel,
    /// Radius of the initial particle disc, meters.
    pub init_radius: f64,
    pub init_count: usize,
    /// 3σ bound of the initial heading spread, radians.
    pub eps_rot_init: f64,
    pub batch_size: usize,
    pub heading_mean: HeadingMean,
    /// Score batches on the rayon pool.
    pub parallel: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            kld: KldConfig::default(),
            noise: NoiseConfig::default(),
            conversion: ConversionSpec::logistic(0.2).expect("valid default"),
            camera: CameraModel::default(),
            init_radius: 300.0,
            init_count: 5000,
            eps_rot_init: 0.05,
            batch_size: 64,
            heading_mean: HeadingMean::Circular,
            parallel: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.kld.validate()?;
        self.noise.validate()?;
        self.conversion.validate()?;
        self.camera.validate()?;
        if !(self.init_radius > 0.0 && self.init_radius.is_finite()) {
            return Err(Error::invalid(format!(
                "initial radius must be positive, got {}",
                self.init_radius
            )));
        }
        if self.init_count == 0 {
            return Err(Error::invalid("initial particle count must be positive"));
        }
        if !(self.eps_rot_init >= 0.0 && self.eps_rot_init.is_finite()) {
            return Err(Error::invalid(
                "initial heading spread must be non-negative",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub likelihood: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub generation: u64,
    /// Raised when every likelihood of the generation was zero.
    pub degenerate: bool,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose2D,
    pub n_evaluated: usize,
    pub k_bins: usize,
    pub degenerate: bool,
}

/// Uniform particles over a disc around `start`, with likelihood 1 and equal weights.
pub fn init_particles<R: Rng + ?Sized>(
    start: &Pose2D,
    radius: f64,
    n0: usize,
    eps_rot_init: f64,
    rng: &mut R,
) -> Result<ParticleSet> {
    if !(radius > 0.0 && radius.is_finite()) || n0 == 0 {
        return Err(Error::invalid(format!(
            "initial disc needs radius > 0 and at least one particle, got {radius} / {n0}"
        )));
    }
    let weight = 1.0 / n0 as f64;
    let particles = (0..n0)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let yaw = start.yaw + sample_normal(eps_rot_init, rng);
            Particle {
                pose: Pose2D::new(start.x + r * phi.cos(), start.y + r * phi.sin(), yaw),
                likelihood: 1.0,
                weight,
            }
        })
        .collect();
    Ok(ParticleSet {
        particles,
        generation: 0,
        degenerate: false,
    })
}

/// Weighted mean of particle poses; `weights` need not be normalized.
pub fn weighted_pose(poses: &[Pose2D], weights: &[f64], heading: HeadingMean) -> Pose2D {
    let total: f64 = weights.iter().sum();
    let (mut x, mut y, mut s, mut c, mut lin) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, &w) in poses.iter().zip(weights) {
        let b = w / total;
        x += b * p.x;
        y += b * p.y;
        s += b * p.yaw.sin();
        c += b * p.yaw.cos();
        lin += b * p.yaw;
    }
    let yaw = match heading {
        HeadingMean::Circular => s.atan2(c),
        HeadingMean::Linear => wrap_angle(lin),
    };
    Pose2D { x, y, yaw }
}

/// Everything a step needs besides the particles.
pub struct StepInput<'a> {
    pub frame: &'a Patch,
    pub altitude: f64,
    pub odometry: &'a OdometryDelta,
    pub map: &'a RasterMap,
}

/// One filter iteration.
pub fn step<R: Rng + ?Sized>(
    prev: &ParticleSet,
    input: &StepInput<'_>,
    cfg: &FilterConfig,
    rng: &mut R,
) -> Result<(ParticleSet, PoseEstimate)> {
    let patch_px = cfg.camera.patch_px;
    if input.frame.width() != patch_px || input.frame.height() != patch_px {
        return Err(Error::invalid(format!(
            "frame is {}x{}, camera patches are {patch_px}x{patch_px}",
            input.frame.width(),
            input.frame.height()
        )));
    }
    if prev.is_empty() {
        return Err(Error::invalid("previous particle set is empty"));
    }
    let side = cfg.camera.footprint_side(input.altitude)?;
    let sampler = WeightedSampler::new(&prev.weights())?;
    let template = PreparedTemplate::new(input.frame);
    let score = |buf: &mut Vec<f32>, pose: &Pose2D| -> f64 {
        if !input.map.extract_patch_into(pose, side, patch_px, buf) {
            return 0.0;
        }
        match template.correlate(buf) {
            Some(r) => cfg.conversion.apply(r),
            None => 0.0,
        }
    };

    let mut grid = BinGrid::new(cfg.kld.bin_size);
    let mut poses: Vec<Pose2D> = Vec::new();
    let mut likelihoods: Vec<f64> = Vec::new();
    let mut batch: Vec<Pose2D> = Vec::with_capacity(cfg.batch_size);
    while poses.len() < required_particles(grid.k(), &cfg.kld).min(cfg.kld.n_max) {
        let take = cfg.batch_size.min(cfg.kld.n_max - poses.len());
        batch.clear();
        for _ in 0..take {
            let parent = &prev.particles[sampler.sample(rng)];
            batch.push(propagate(&parent.pose, input.odometry, &cfg.noise, rng));
        }
        let scores: Vec<f64> = if cfg.parallel {
            batch
                .par_iter()
                .map_init(|| vec![0.0f32; patch_px * patch_px], score)
                .collect()
        } else {
            let mut buf = vec![0.0f32; patch_px * patch_px];
            batch.iter().map(|p| score(&mut buf, p)).collect()
        };
        for pose in &batch {
            grid.mark_bin(pose);
        }
        poses.extend_from_slice(&batch);
        likelihoods.extend(scores);
    }

    let weights = normalize(&likelihoods)?;
    let estimate = weighted_pose(&poses, &weights.weights, cfg.heading_mean);
    let particles = poses
        .into_iter()
        .zip(likelihoods)
        .zip(&weights.weights)
        .map(|((pose, likelihood), &weight)| Particle {
            pose,
            likelihood,
            weight,
        })
        .collect::<Vec<_>>();
    let n = particles.len();
    Ok((
        ParticleSet {
            particles,
            generation: prev.generation + 1,
            degenerate: weights.degenerate,
        },
        PoseEstimate {
            pose: estimate,
            n_evaluated: n,
            k_bins: grid.k(),
            degenerate: weights.degenerate,
        },
    ))
}

/// A filter instance owning its particles and RNG stream.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    cfg: FilterConfig,
    set: ParticleSet,
    rng: ChaCha8Rng,
}

impl ParticleFilter {
    pub fn new(cfg: FilterConfig, start: &Pose2D, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = init_particles(
            start,
            cfg.init_radius,
            cfg.init_count,
            cfg.eps_rot_init,
            &mut rng,
        )?;
        Ok(ParticleFilter { cfg, set, rng })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn step(
        &mut self,
        frame: &Patch,
        altitude: f64,
        odometry: &OdometryDelta,
        map: &RasterMap,
    ) -> Result<PoseEstimate> {
        let input = StepInput {
            frame,
            altitude,
            odometry,
            map,
        };
        let (set, estimate) = step(&self.set, &input, &self.cfg, &mut self.rng)?;
        self.set = set;
        Ok(estimate)
    }
}

/// Runs the filter over a whole flight, starting from the first ground-truth
/// pose. The flight's camera model overrides `cfg.camera`.
pub fn run_flight(
    flight: &FlightData,
    map: &RasterMap,
    cfg: &FilterConfig,
    seed: u64,
) -> Result<RunReport> {
    flight.validate()?;
    if let Some(s) = flight
        .truth
        .iter()
        .find(|s| !map.contains(s.pose.x, s.pose.y))
    {
        return Err(Error::Config(format!(
            "frame {} at ({:.1}, {:.1}) lies outside the map extent; check the map georeference",
            s.frame, s.pose.x, s.pose.y
        )));
    }
    let cfg = FilterConfig {
        camera: flight.camera,
        ..*cfg
    };
    let start = flight.truth[0].pose;
    let mut filter = ParticleFilter::new(cfg, &start, seed)?;
    let dr = dead_reckon(&start, &flight.odometry);
    let mut rows = Vec::with_capacity(flight.len());
    for (i, truth) in flight.truth.iter().enumerate() {
        let est = filter.step(&flight.frames[i], truth.altitude, &flight.odometry[i], map)?;
        rows.push(FrameRecord {
            frame: truth.frame,
            t_sec: truth.t_sec,
            gt_x: truth.pose.x,
            gt_y: truth.pose.y,
            gt_yaw: truth.pose.yaw,
            est_x: est.pose.x,
            est_y: est.pose.y,
            est_yaw: est.pose.yaw,
            error_m: est.pose.distance(&truth.pose),
            n_evaluated: est.n_evaluated,
            k_bins: est.k_bins,
            degenerate: est.degenerate,
            dr_x: dr[i].x,
            dr_y: dr[i].y,
            dr_error_m: dr[i].distance(&truth.pose),
        });
    }
    Ok(RunReport {
        seed,
        conversion: cfg.conversion.label(),
        rows,
    })
}
