//! Synthetic worlds and flights: procedural orthophotos, scripted
//! trajectories, rendered camera frames, map aging and noisy odometry.
//!
//! Every generator is a pure function of its spec and seed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::FlightData;
use crate::error::{Error, Result};
use crate::motion::OdometryDelta;
use crate::pose::{wrap_angle, Pose2D};
use crate::raster_map::{CameraModel, Patch, RasterMap};

/// SplitMix64 finalizer, used for lattice hashing and seed derivation.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5eed_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

/// FNV-1a over a string, for deriving seeds from names.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Fractal,
    UrbanBlocks,
}

impl TerrainKind {
    /// Letter used in scenario names.
    pub fn letter(self) -> char {
        match self {
            TerrainKind::Fractal => 'F',
            TerrainKind::UrbanBlocks => 'U',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    pub size_px: usize,
    pub gsd: f64,
    pub terrain: TerrainKind,
    pub octaves: u32,
    /// Amplitude ratio between successive octaves.
    pub roughness: f64,
    /// Lattice spacing of the coarsest octave, pixels.
    pub base_period_px: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 1,
            size_px: 1024,
            gsd: 2.0,
            terrain: TerrainKind::Fractal,
            octaves: 5,
            roughness: 0.85,
            base_period_px: 16.0,
        }
    }
}

impl WorldSpec {
    fn validate(&self) -> Result<()> {
        if self.size_px < 256 {
            return Err(Error::invalid(format!(
                "world size must be at least 256 px, got {}",
                self.size_px
            )));
        }
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return Err(Error::invalid("world gsd must be positive"));
        }
        if self.terrain == TerrainKind::Fractal {
            if self.octaves == 0 || self.octaves > 16 {
                return Err(Error::invalid("fractal octaves must lie in 1..=16"));
            }
            if !(self.roughness > 0.0 && self.roughness <= 2.0) {
                return Err(Error::invalid("fractal roughness must lie in (0, 2]"));
            }
            if !(self.base_period_px >= 2.0) {
                return Err(Error::invalid("base period must be at least 2 px"));
            }
        }
        Ok(())
    }
}

/// Procedural orthophoto with origin (0, 0).
pub fn generate_world(spec: &WorldSpec) -> Result<RasterMap> {
    spec.validate()?;
    for attempt in 0..16u64 {
        let seed = if attempt == 0 {
            spec.seed
        } else {
            derive_seed(&[spec.seed, attempt])
        };
        let pixels = match spec.terrain {
            TerrainKind::Fractal => fractal_pixels(spec, seed),
            TerrainKind::UrbanBlocks => urban_pixels(spec.size_px, seed),
        };
        if tiles_textured(&pixels, spec.size_px, 64) {
            return RasterMap::new(pixels, spec.size_px, spec.size_px, spec.gsd, (0.0, 0.0));
        }
    }
    Err(Error::invalid(
        "terrain generator kept producing flat 64x64 tiles; adjust the world spec",
    ))
}

fn tiles_textured(pixels: &[u8], size: usize, tile: usize) -> bool {
    (0..size).step_by(tile).all(|r0| {
        (0..size).step_by(tile).all(|c0| {
            let first = pixels[r0 * size + c0];
            (r0..(r0 + tile).min(size))
                .any(|r| (c0..(c0 + tile).min(size)).any(|c| pixels[r * size + c] != first))
        })
    })
}

fn lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let h = derive_seed(&[seed, u64::from(octave), ix as u64, iy as u64]);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn fractal_pixels(spec: &WorldSpec, seed: u64) -> Vec<u8> {
    let n = spec.size_px;
    let mut field = vec![0.0f64; n * n];
    let mut amplitude = 1.0;
    let mut period = spec.base_period_px;
    for octave in 0..spec.octaves {
        for r in 0..n {
            let fy = r as f64 / period;
            let iy = fy.floor();
            let ty = fade(fy - iy);
            for c in 0..n {
                let fx = c as f64 / period;
                let ix = fx.floor();
                let tx = fade(fx - ix);
                let (ix, iy) = (ix as i64, iy as i64);
                let v00 = lattice(seed, octave, ix, iy);
                let v10 = lattice(seed, octave, ix + 1, iy);
                let v01 = lattice(seed, octave, ix, iy + 1);
                let v11 = lattice(seed, octave, ix + 1, iy + 1);
                let top = v00 + (v10 - v00) * tx;
                let bottom = v01 + (v11 - v01) * tx;
                field[r * n + c] += amplitude * (top + (bottom - top) * ty);
            }
        }
        amplitude *= spec.roughness;
        period = (period / 2.0).max(1.0);
    }
    stretch_to_u8(&field)
}

fn stretch_to_u8(field: &[f64]) -> Vec<u8> {
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    field
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).round() as u8)
        .collect()
}

/// City-like blocks: dark street grid, blocks split into flat-shaded lots.
fn urban_pixels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let street = 40u8;
    let mut pixels = vec![street; n * n];
    let cuts = |rng: &mut ChaCha8Rng| {
        let mut v = vec![0usize];
        while *v.last().unwrap() < n {
            let last = *v.last().unwrap();
            v.push(last + rng.random_range(18..48));
        }
        v
    };
    let cols = cuts(&mut rng);
    let rows = cuts(&mut rng);
    for rw in rows.windows(2) {
        for cw in cols.windows(2) {
            let gap = rng.random_range(3..6);
            let (r0, r1) = (rw[0] + gap, rw[1].min(n));
            let (c0, c1) = (cw[0] + gap, cw[1].min(n));
            if r0 >= r1 || c0 >= c1 {
                continue;
            }
            // Split the block into 1-4 lots along its longer side.
            let lots = rng.random_range(1..=4usize);
            let horizontal = (c1 - c0) >= (r1 - r0);
            let len = if horizontal { c1 - c0 } else { r1 - r0 };
            let mut bounds: Vec<usize> = (1..lots).map(|_| rng.random_range(0..len)).collect();
            bounds.push(0);
            bounds.push(len);
            bounds.sort_unstable();
            bounds.dedup();
            for lot in bounds.windows(2) {
                let shade: u8 = rng.random_range(70..=255);
                for r in r0..r1 {
                    for c in c0..c1 {
                        let along = if horizontal { c - c0 } else { r - r0 };
                        if along >= lot[0] && along < lot[1] {
                            pixels[r * n + c] = shade;
                        }
                    }
                }
            }
        }
    }
    pixels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FlightShape {
    Line {
        length: f64,
    },
    /// Counter-clockwise lap; the start sits mid-way along the first side.
    Rectangle {
        length: f64,
        width: f64,
    },
    /// Counter-clockwise; the center lies `radius` to the left of the start.
    Circle {
        radius: f64,
    },
}

impl FlightShape {
    pub fn letter(&self) -> char {
        match self {
            FlightShape::Line { .. } => 'L',
            FlightShape::Rectangle { .. } => 'R',
            FlightShape::Circle { .. } => 'C',
        }
    }

    fn path_length(&self) -> f64 {
        match *self {
            FlightShape::Line { length } => length,
            FlightShape::Rectangle { length, width } => 2.0 * (length + width),
            FlightShape::Circle { radius } => TAU * radius,
        }
    }

    /// Point at arc length `s` in the shape's local frame (start at origin,
    /// heading +x).
    fn local_point(&self, s: f64) -> (f64, f64) {
        match *self {
            FlightShape::Line { .. } => (s, 0.0),
            FlightShape::Circle { radius } => {
                let a = s / radius;
                (radius * a.sin(), radius * (1.0 - a.cos()))
            }
            FlightShape::Rectangle { length, width } => {
                let half = length / 2.0;
                let legs = [
                    ((0.0, 0.0), (1.0, 0.0), half),
                    ((half, 0.0), (0.0, 1.0), width),
                    ((half, width), (-1.0, 0.0), length),
                    ((-half, width), (0.0, -1.0), width),
                    ((-half, 0.0), (1.0, 0.0), half),
                ];
                let mut rem = s;
                for (origin, dir, len) in legs {
                    if rem <= len {
                        return (origin.0 + dir.0 * rem, origin.1 + dir.1 * rem);
                    }
                    rem -= len;
                }
                (0.0, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    #[serde(flatten)]
    pub shape: FlightShape,
    pub altitude: f64,
    pub speed: f64,
    pub frame_rate: f64,
    pub start: Pose2D,
}

impl FlightPlan {
    /// Plan whose path is centered on the map.
    pub fn centered(
        shape: FlightShape,
        map: &RasterMap,
        altitude: f64,
        speed: f64,
        frame_rate: f64,
    ) -> Self {
        let (cx, cy) = map.center();
        let start = match shape {
            FlightShape::Line { length } => Pose2D::new(cx - length / 2.0, cy, 0.0),
            FlightShape::Rectangle { width, .. } => Pose2D::new(cx, cy - width / 2.0, 0.0),
            FlightShape::Circle { radius } => Pose2D::new(cx, cy - radius, 0.0),
        };
        FlightPlan {
            shape,
            altitude,
            speed,
            frame_rate,
            start,
        }
    }
}

/// Ground truth for one camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub frame: usize,
    pub t_sec: f64,
    pub pose: Pose2D,
    pub altitude: f64,
}

/// Constant-speed trajectory sampled at the frame rate. Each pose's heading
/// is the direction of travel into it, so odometry integrates exactly.
pub fn generate_flight(
    plan: &FlightPlan,
    map: &RasterMap,
    cam: &CameraModel,
) -> Result<Vec<TruthSample>> {
    let dims = match plan.shape {
        FlightShape::Line { length } => vec![length],
        FlightShape::Rectangle { length, width } => vec![length, width],
        FlightShape::Circle { radius } => vec![radius],
    };
    if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::invalid("flight shape dimensions must be positive"));
    }
    if !(plan.speed > 0.0 && plan.frame_rate > 0.0) {
        return Err(Error::invalid(
            "flight speed and frame rate must be positive",
        ));
    }
    let half_diag = cam.footprint_side(plan.altitude)? * std::f64::consts::FRAC_1_SQRT_2;

    let step = plan.speed / plan.frame_rate;
    let total = plan.shape.path_length();
    // Small tolerance so that e.g. 1000 m at 5 m spacing yields 201 frames.
    let frames = (total / step + 1e-9).floor() as usize + 1;
    let (sin, cos) = plan.start.yaw.sin_cos();
    let to_world = |(lx, ly): (f64, f64)| {
        (
            plan.start.x + lx * cos - ly * sin,
            plan.start.y + lx * sin + ly * cos,
        )
    };

    let mut out = Vec::with_capacity(frames);
    let mut prev: Option<(f64, f64)> = None;
    let mut heading = plan.start.yaw;
    for i in 0..frames {
        let (x, y) = to_world(plan.shape.local_point(i as f64 * step));
        if let Some((px, py)) = prev {
            heading = (y - py).atan2(x - px);
        }
        prev = Some((x, y));
        let inside = map.contains(x - half_diag, y - half_diag)
            && map.contains(x + half_diag, y + half_diag);
        if !inside {
            return Err(Error::invalid(format!(
                "flight leaves the map at frame {i} ({x:.1}, {y:.1}) with footprint margin {half_diag:.1} m"
            )));
        }
        out.push(TruthSample {
            frame: i,
            t_sec: i as f64 / plan.frame_rate,
            pose: Pose2D::new(x, y, heading),
            altitude: plan.altitude,
        });
    }
    Ok(out)
}

/// Camera frame at the true pose with additive Gaussian pixel noise.
pub fn render_frame<R: Rng + ?Sized>(
    map: &RasterMap,
    truth: &Pose2D,
    altitude: f64,
    cam: &CameraModel,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Patch> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("sensor noise sigma must be non-negative"));
    }
    let clean = map
        .extract_patch(truth, altitude, cam)?
        .ok_or_else(|| Error::invalid("camera footprint leaves the map"))?;
    if noise_sigma == 0.0 {
        return Ok(clean);
    }
    let data = clean
        .data()
        .iter()
        .map(|&v| {
            let g: f64 = rng.sample(StandardNormal);
            (f64::from(v) + noise_sigma * g).clamp(0.0, 255.0) as f32
        })
        .collect();
    Patch::new(clean.width(), clean.height(), data)
}

/// Strength of each aging mechanism at level 1; effects scale linearly with the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgeProfile {
    /// Fraction of the map area covered by replaced rectangles.
    pub occlusion_fraction: f64,
    /// Intensity offset, levels.
    pub brightness_shift: f64,
    /// Contrast reduction: the contrast factor is `1 - contrast_loss · level`.
    pub contrast_loss: f64,
    /// Box-blur radius, pixels.
    pub blur_radius: f64,
}

impl Default for AgeProfile {
    fn default() -> Self {
        AgeProfile {
            occlusion_fraction: 0.6,
            brightness_shift: 25.0,
            contrast_loss: 0.3,
            blur_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeSpec {
    /// 0 leaves the map untouched, 1 applies the full profile.
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub profile: AgeProfile,
}

/// Simulates a map captured at a different time.
pub fn age_map(map: &RasterMap, age: &AgeSpec) -> Result<RasterMap> {
    if !(0.0..=1.0).contains(&age.level) {
        return Err(Error::invalid(format!(
            "age level must lie in [0, 1], got {}",
            age.level
        )));
    }
    if age.level == 0.0 {
        return Ok(map.clone());
    }
    let (w, h) = (map.width(), map.height());
    let p = &age.profile;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[age.seed, 0xa9e]));
    let mut px: Vec<f64> = map.pixels().iter().map(|&v| f64::from(v)).collect();

    // Occlusions: rectangles until the covered area reaches the target.
    let target = (p.occlusion_fraction * age.level).clamp(0.0, 1.0) * (w * h) as f64;
    let mut covered = vec![false; w * h];
    let mut area = 0usize;
    let max_side = (w.min(h) / 8).max(4);
    let mut guard = 0;
    while (area as f64) < target && guard < 100_000 {
        guard += 1;
        let rw = rng.random_range(4..=max_side).min(w);
        let rh = rng.random_range(4..=max_side).min(h);
        let c0 = rng.random_range(0..=w - rw);
        let r0 = rng.random_range(0..=h - rh);
        let mut sum = 0.0;
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                sum += f64::from(map.get(c, r));
            }
        }
        let mean = (sum / (rw * rh) as f64).round();
        // A fresh surface: the lot's mean shade shifted to look different.
        let fill = (mean + rng.random_range(-40.0..40.0))
            .clamp(0.0, 255.0)
            .round();
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                let i = r * w + c;
                if !covered[i] {
                    covered[i] = true;
                    area += 1;
                }
                px[i] = fill;
            }
        }
    }

    let radius = (p.blur_radius * age.level).round() as usize;
    if radius > 0 {
        px = box_blur(&px, w, h, radius);
    }

    let contrast = 1.0 - p.contrast_loss * age.level;
    let shift = p.brightness_shift * age.level;
    let pixels = px
        .iter()
        .map(|&v| {
            ((v - 128.0) * contrast + 128.0 + shift)
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    map.with_pixels(pixels)
}

fn box_blur(src: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let pass = |src: &[f64], len: usize, lines: usize, idx: &dyn Fn(usize, usize) -> usize| {
        let mut out = vec![0.0; src.len()];
        for line in 0..lines {
            for i in 0..len {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(len - 1);
                let sum: f64 = (lo..=hi).map(|j| src[idx(line, j)]).sum();
                out[idx(line, i)] = sum / (hi - lo + 1) as f64;
            }
        }
        out
    };
    let horizontal = pass(src, w, h, &|row, col| row * w + col);
    pass(&horizontal, h, w, &|col, row| row * w + col)
}

/// Odometry corruption: scale drift plus per-frame Gaussian noise (1σ values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoise {
    /// Fractional scale error on traveled distance.
    pub drift: f64,
    pub sigma_tran: f64,
    pub sigma_rot: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        OdometryNoise {
            drift: 0.02,
            sigma_tran: 0.1,
            sigma_rot: 0.002,
        }
    }
}

/// Per-frame odometry from ground truth: distance and heading change between
/// consecutive poses, distance scaled by `1 + drift`, both channels noised.
/// Frame 0 carries a zero delta.
pub fn synth_odometry<R: Rng + ?Sized>(
    truth: &[Pose2D],
    noise: &OdometryNoise,
    rng: &mut R,
) -> Vec<OdometryDelta> {
    let mut out = Vec::with_capacity(truth.len());
    if truth.is_empty() {
        return out;
    }
    out.push(OdometryDelta::default());
    for pair in truth.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dist = a.distance(&b);
        let rot = wrap_angle(b.yaw - a.yaw);
        let gt: f64 = rng.sample(StandardNormal);
        let gr: f64 = rng.sample(StandardNormal);
        out.push(OdometryDelta {
            d_tran: (dist * (1.0 + noise.drift) + noise.sigma_tran * gt).max(0.0),
            d_rot: rot + noise.sigma_rot * gr,
        });
    }
    out
}

/// Ground-truth heading changes of a closed lap, summed without wrapping.
pub fn total_turn(truth: &[Pose2D]) -> f64 {
    truth
        .windows(2)
        .map(|p| wrap_angle(p[1].yaw - p[0].yaw))
        .sum()
}

/// Renders a complete flight: ground truth, 8-bit camera frames and noisy
/// odometry, all derived from `seed`.
pub fn simulate_flight(
    map: &RasterMap,
    plan: &FlightPlan,
    cam: &CameraModel,
    sensor_noise_sigma: f64,
    odometry: &OdometryNoise,
    seed: u64,
) -> Result<FlightData> {
    let truth = generate_flight(plan, map, cam)?;
    let mut frame_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0xf4a3e]));
    let frames = truth
        .iter()
        .map(|s| {
            render_frame(
                map,
                &s.pose,
                s.altitude,
                cam,
                sensor_noise_sigma,
                &mut frame_rng,
            )
            .map(|p| p.quantized())
        })
        .collect::<Result<Vec<_>>>()?;
    let poses: Vec<Pose2D> = truth.iter().map(|s| s.pose).collect();
    let mut odo_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x0d0]));
    let odometry = synth_odometry(&poses, odometry, &mut odo_rng);
    Ok(FlightData {
        truth,
        odometry,
        frames,
        camera: *cam,
        frame_rate: plan.frame_rate,
        map_ref: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::dead_reckon;
    use crate::similarity::pearson;

    fn map_patch(map: &RasterMap) -> Patch {
        Patch::from_u8(map.width(), map.height(), map.pixels()).unwrap()
    }

    #[test]
    fn world_is_deterministic_and_full_range() {
        let spec = WorldSpec {
            size_px: 256,
            ..WorldSpec::default()
        };
        let a = generate_world(&spec).unwrap();
        let b = generate_world(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(*a.pixels().iter().min().unwrap(), 0);
        assert_eq!(*a.pixels().iter().max().unwrap(), 255);
        assert!(tiles_textured(a.pixels(), 256, 64));
        let urban = generate_world(&WorldSpec {
            terrain: TerrainKind::UrbanBlocks,
            ..spec
        })
        .unwrap();
        assert!(tiles_textured(urban.pixels(), 256, 64));
    }

    #[test]
    fn world_rejects_degenerate_specs() {
        assert!(generate_world(&WorldSpec {
            size_px: 100,
            ..WorldSpec::default()
        })
        .is_err());
        assert!(generate_world(&WorldSpec {
            octaves: 0,
            size_px: 256,
            ..WorldSpec::default()
        })
        .is_err());
        assert!(generate_world(&WorldSpec {
            gsd: 0.0,
            size_px: 256,
            ..WorldSpec::default()
        })
        .is_err());
    }

    #[test]
    fn different_seeds_decorrelate() {
        let base = WorldSpec::default();
        for s in 0..20u64 {
            let a = generate_world(&WorldSpec {
                seed: 2 * s,
                ..base
            })
            .unwrap();
            let b = generate_world(&WorldSpec {
                seed: 2 * s + 1,
                ..base
            })
            .unwrap();
            let r = pearson(&map_patch(&a), &map_patch(&b)).unwrap().unwrap();
            assert!(r.abs() < 0.3, "seeds {} / {}: r = {r}", 2 * s, 2 * s + 1);
        }
    }

    #[test]
    fn urban_gradients_are_bimodal() {
        let map = generate_world(&WorldSpec {
            terrain: TerrainKind::UrbanBlocks,
            size_px: 512,
            ..WorldSpec::default()
        })
        .unwrap();
        let (w, h) = (map.width(), map.height());
        let mut flat = 0usize;
        let mut weak = 0usize;
        let mut strong = 0usize;
        for r in 0..h {
            for c in 0..w - 1 {
                let g = (i32::from(map.get(c + 1, r)) - i32::from(map.get(c, r))).abs();
                match g {
                    0 => flat += 1,
                    1..=9 => weak += 1,
                    _ => strong += 1,
                }
            }
        }
        // Most neighbors equal, edges are sharp, almost nothing in between.
        assert!(flat > 10 * strong, "flat {flat} strong {strong}");
        assert!(strong > 10 * weak.max(1), "strong {strong} weak {weak}");
    }

    fn test_map() -> RasterMap {
        generate_world(&WorldSpec::default()).unwrap()
    }

    #[test]
    fn line_flight_frames() {
        let map = test_map();
        let cam = CameraModel::default();
        let plan =
            FlightPlan::centered(FlightShape::Line { length: 1000.0 }, &map, 200.0, 25.0, 5.0);
        let truth = generate_flight(&plan, &map, &cam).unwrap();
        assert_eq!(truth.len(), 201);
        for pair in truth.windows(2) {
            assert!((pair[0].pose.distance(&pair[1].pose) - 5.0).abs() < 1e-9);
        }
        assert!((truth[200].t_sec - 40.0).abs() < 1e-12);
    }

    #[test]
    fn circle_flight_stays_on_radius() {
        let map = test_map();
        let cam = CameraModel::default();
        let plan = FlightPlan::centered(
            FlightShape::Circle { radius: 400.0 },
            &map,
            200.0,
            25.0,
            5.0,
        );
        let truth = generate_flight(&plan, &map, &cam).unwrap();
        let (cx, cy) = map.center();
        for s in &truth {
            assert!(((s.pose.x - cx).hypot(s.pose.y - cy) - 400.0).abs() < 1e-6);
        }
        assert!(truth[0].pose.distance(&truth[truth.len() - 1].pose) <= 5.0 + 1e-9);
    }

    #[test]
    fn rectangle_turns_a_full_lap() {
        let map = test_map();
        let cam = CameraModel::default();
        let plan = FlightPlan::centered(
            FlightShape::Rectangle {
                length: 800.0,
                width: 600.0,
            },
            &map,
            200.0,
            25.0,
            5.0,
        );
        let truth = generate_flight(&plan, &map, &cam).unwrap();
        let poses: Vec<Pose2D> = truth.iter().map(|s| s.pose).collect();
        assert!((total_turn(&poses) - TAU).abs() < 1e-9);
        assert!(poses[0].distance(&poses[poses.len() - 1]) < 1e-6);
    }

    #[test]
    fn flight_outside_map_is_rejected() {
        let map = test_map();
        let cam = CameraModel::default();
        let plan =
            FlightPlan::centered(FlightShape::Line { length: 1900.0 }, &map, 200.0, 25.0, 5.0);
        assert!(generate_flight(&plan, &map, &cam).is_err());
    }

    #[test]
    fn clean_render_equals_extraction() {
        let map = test_map();
        let cam = CameraModel::default();
        let pose = Pose2D::new(1000.0, 900.0, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = render_frame(&map, &pose, 200.0, &cam, 0.0, &mut rng).unwrap();
        assert_eq!(
            frame,
            map.extract_patch(&pose, 200.0, &cam).unwrap().unwrap()
        );
        assert!(render_frame(
            &map,
            &Pose2D::new(5.0, 5.0, 0.0),
            200.0,
            &cam,
            0.0,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn sensor_noise_statistics() {
        let map = test_map();
        let cam = CameraModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..20 {
            let pose = Pose2D::new(600.0 + 40.0 * i as f64, 1000.0, 0.1 * i as f64);
            let clean = map.extract_patch(&pose, 200.0, &cam).unwrap().unwrap();
            let noisy = render_frame(&map, &pose, 200.0, &cam, 2.0, &mut rng).unwrap();
            let mad = clean
                .data()
                .iter()
                .zip(noisy.data())
                .map(|(a, b)| f64::from((a - b).abs()))
                .sum::<f64>()
                / clean.data().len() as f64;
            assert!((1.2..=2.0).contains(&mad), "mad {mad}");
            assert!(pearson(&clean, &noisy).unwrap().unwrap() > 0.95);
        }
    }

    #[test]
    fn aging_level_zero_is_identity() {
        let map = test_map();
        let aged = age_map(
            &map,
            &AgeSpec {
                level: 0.0,
                seed: 3,
                profile: AgeProfile::default(),
            },
        )
        .unwrap();
        assert_eq!(aged, map);
        assert!(age_map(
            &map,
            &AgeSpec {
                level: 1.5,
                seed: 3,
                profile: AgeProfile::default()
            }
        )
        .is_err());
    }

    #[test]
    fn aging_degrades_monotonically() {
        let map = generate_world(&WorldSpec {
            size_px: 512,
            ..WorldSpec::default()
        })
        .unwrap();
        for seed in 0..10 {
            let r_at = |level| {
                let aged = age_map(
                    &map,
                    &AgeSpec {
                        level,
                        seed,
                        profile: AgeProfile::default(),
                    },
                )
                .unwrap();
                pearson(&map_patch(&map), &map_patch(&aged))
                    .unwrap()
                    .unwrap()
            };
            assert!(r_at(0.5) < r_at(0.25), "seed {seed}");
        }
    }

    #[test]
    fn occlusion_area_bookkeeping() {
        let map = generate_world(&WorldSpec {
            size_px: 512,
            ..WorldSpec::default()
        })
        .unwrap();
        let profile = AgeProfile {
            occlusion_fraction: 0.2,
            brightness_shift: 0.0,
            contrast_loss: 0.0,
            blur_radius: 0.0,
        };
        let aged = age_map(
            &map,
            &AgeSpec {
                level: 1.0,
                seed: 9,
                profile,
            },
        )
        .unwrap();
        let differ = map
            .pixels()
            .iter()
            .zip(aged.pixels())
            .filter(|(a, b)| a != b)
            .count();
        let frac = differ as f64 / map.pixels().len() as f64;
        assert!((0.15..=0.25).contains(&frac), "{frac}");
    }

    fn line_truth(length: f64) -> Vec<Pose2D> {
        (0..=(length / 5.0) as usize)
            .map(|i| Pose2D::new(100.0 + 5.0 * i as f64, 50.0, 0.0))
            .collect()
    }

    #[test]
    fn exact_odometry_reproduces_truth() {
        let map = test_map();
        let cam = CameraModel::default();
        let plan = FlightPlan::centered(
            FlightShape::Rectangle {
                length: 800.0,
                width: 600.0,
            },
            &map,
            200.0,
            25.0,
            5.0,
        );
        let truth: Vec<Pose2D> = generate_flight(&plan, &map, &cam)
            .unwrap()
            .iter()
            .map(|s| s.pose)
            .collect();
        let exact = OdometryNoise {
            drift: 0.0,
            sigma_tran: 0.0,
            sigma_rot: 0.0,
        };
        let odo = synth_odometry(&truth, &exact, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(odo.len(), truth.len());
        let path = dead_reckon(&truth[0], &odo);
        for (a, b) in path.iter().zip(&truth) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn drift_lengthens_the_path() {
        let truth = line_truth(1000.0);
        let noise = OdometryNoise {
            drift: 0.02,
            sigma_tran: 0.0,
            sigma_rot: 0.0,
        };
        let odo = synth_odometry(&truth, &noise, &mut ChaCha8Rng::seed_from_u64(0));
        let path = dead_reckon(&truth[0], &odo);
        let over = path.last().unwrap().x - truth.last().unwrap().x;
        assert!((over - 20.0).abs() < 0.5, "{over}");
    }

    #[test]
    fn noisy_odometry_error_grows_with_distance() {
        let truth = line_truth(1000.0);
        let noise = OdometryNoise {
            drift: 0.0,
            sigma_tran: 0.2,
            sigma_rot: 0.005,
        };
        let checkpoints = [50usize, 100, 200];
        let mut err = [0.0f64; 3];
        for seed in 0..20 {
            let odo = synth_odometry(&truth, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
            let path = dead_reckon(&truth[0], &odo);
            for (e, &i) in err.iter_mut().zip(&checkpoints) {
                *e += path[i].distance(&truth[i]) / 20.0;
            }
        }
        assert!(err[0] < err[1] && err[1] < err[2], "{err:?}");
    }
}
