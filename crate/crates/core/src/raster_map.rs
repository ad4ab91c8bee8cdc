//! Georeferenced raster maps, camera footprints and pose-aligned patch extraction.
//!
//! Pixel `(col, row)` covers the world square
//! `[origin_x + col·gsd, origin_x + (col+1)·gsd) × [origin_y + row·gsd, origin_y + (row+1)·gsd)`,
//! so the row index grows with the northing. Rasters are stored row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose2D;

/// Bilinear weights closer than this to a pixel center snap onto it.
const SNAP: f64 = 1e-9;

/// Single-channel 8-bit orthophoto with a uniform ground sample distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    pixels: Vec<u8>,
    width: usize,
    height: usize,
    gsd: f64,
    origin: (f64, f64),
}

/// Integer pixel coordinates (column, row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelIndex {
    pub col: usize,
    pub row: usize,
}

/// Downward pinhole camera at nadir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fov_deg: f64,
    pub patch_px: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            fov_deg: 60.0,
            patch_px: 64,
        }
    }
}

impl CameraModel {
    pub fn new(fov_deg: f64, patch_px: usize) -> Result<Self> {
        let cam = CameraModel { fov_deg, patch_px };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "field of view must lie in (0, 180) degrees, got {}",
                self.fov_deg
            )));
        }
        if self.patch_px == 0 {
            return Err(Error::invalid("patch_px must be positive"));
        }
        Ok(())
    }

    /// Side length in meters of the square ground area seen from `altitude`.
    pub fn footprint_side(&self, altitude: f64) -> Result<f64> {
        self.validate()?;
        if !(altitude > 0.0 && altitude.is_finite()) {
            return Err(Error::invalid(format!(
                "altitude must be positive, got {altitude}"
            )));
        }
        Ok(2.0 * altitude * (self.fov_deg.to_radians() / 2.0).tan())
    }
}

/// Dense intensity patch (camera frame or map sub-image), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(format!(
                "patch buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Patch {
            width,
            height,
            data,
        })
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Patch::new(width, height, data.iter().map(|&v| f32::from(v)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }

    /// Rounds to 8-bit intensities, clamping to [0, 255].
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Same patch with every value rounded to the nearest 8-bit level.
    pub fn quantized(&self) -> Patch {
        Patch {
            width: self.width,
            height: self.height,
            data: self.to_u8().into_iter().map(f32::from).collect(),
        }
    }
}

impl RasterMap {
    pub fn new(
        pixels: Vec<u8>,
        width: usize,
        height: usize,
        gsd: f64,
        origin: (f64, f64),
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("map dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "map buffer of {} bytes does not match {width}x{height}",
                pixels.len()
            )));
        }
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(Error::invalid(format!("gsd must be positive, got {gsd}")));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::invalid("map origin must be finite"));
        }
        Ok(RasterMap {
            pixels,
            width,
            height,
            gsd,
            origin,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gsd(&self) -> f64 {
        self.gsd
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// World extent in meters along x and y.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.gsd, self.height as f64 * self.gsd)
    }

    pub fn center(&self) -> (f64, f64) {
        let (w, h) = self.extent();
        (self.origin.0 + w / 2.0, self.origin.1 + h / 2.0)
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Same georeference, different content.
    pub fn with_pixels(&self, pixels: Vec<u8>) -> Result<Self> {
        RasterMap::new(pixels, self.width, self.height, self.gsd, self.origin)
    }

    /// True when the world point lies in `[origin, origin + extent]` on both axes.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (w, h) = self.extent();
        let dx = x - self.origin.0;
        let dy = y - self.origin.1;
        dx >= 0.0 && dx <= w && dy >= 0.0 && dy <= h
    }

    /// Pixel containing the world point, or `None` outside the map.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> Option<PixelIndex> {
        let fx = ((x - self.origin.0) / self.gsd).floor();
        let fy = ((y - self.origin.1) / self.gsd).floor();
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some(PixelIndex {
            col: fx as usize,
            row: fy as usize,
        })
    }

    /// World coordinates of a pixel center.
    pub fn pixel_to_world(&self, px: PixelIndex) -> (f64, f64) {
        (
            self.origin.0 + (px.col as f64 + 0.5) * self.gsd,
            self.origin.1 + (px.row as f64 + 0.5) * self.gsd,
        )
    }

    /// Map content under the camera footprint at `pose`, resampled to
    /// `patch_px × patch_px`. `Ok(None)` when any footprint corner leaves the map.
    pub fn extract_patch(
        &self,
        pose: &Pose2D,
        altitude: f64,
        cam: &CameraModel,
    ) -> Result<Option<Patch>> {
        let side = cam.footprint_side(altitude)?;
        let mut buf = vec![0.0f32; cam.patch_px * cam.patch_px];
        if self.extract_patch_into(pose, side, cam.patch_px, &mut buf) {
            Ok(Some(Patch {
                width: cam.patch_px,
                height: cam.patch_px,
                data: buf,
            }))
        } else {
            Ok(None)
        }
    }

    /// Allocation-free core of [`RasterMap::extract_patch`]. `out` must hold
    /// `patch_px²` values; returns false (leaving `out` untouched) when off-map.
    pub fn extract_patch_into(
        &self,
        pose: &Pose2D,
        side: f64,
        patch_px: usize,
        out: &mut [f32],
    ) -> bool {
        debug_assert_eq!(out.len(), patch_px * patch_px);
        let (sin, cos) = pose.yaw.sin_cos();
        let half = side / 2.0;
        for (a, b) in [(-half, -half), (half, -half), (half, half), (-half, half)] {
            let cx = pose.x + a * cos - b * sin;
            let cy = pose.y + a * sin + b * cos;
            if !self.contains(cx, cy) {
                return false;
            }
        }

        // Everything below works in continuous pixel coordinates where pixel
        // centers sit on integers.
        let step = side / patch_px as f64 / self.gsd;
        let ea = (cos * step, sin * step);
        let eb = (-sin * step, cos * step);
        let first = 0.5 - patch_px as f64 / 2.0;
        let cx = (pose.x - self.origin.0) / self.gsd - 0.5;
        let cy = (pose.y - self.origin.1) / self.gsd - 0.5;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;

        for v in 0..patch_px {
            let bv = first + v as f64;
            let row = &mut out[v * patch_px..(v + 1) * patch_px];
            let x0 = cx + first * ea.0 + bv * eb.0;
            let y0 = cy + first * ea.1 + bv * eb.1;
            for (u, dst) in row.iter_mut().enumerate() {
                let u = u as f64;
                let fx = (x0 + u * ea.0).clamp(0.0, max_x);
                let fy = (y0 + u * ea.1).clamp(0.0, max_y);
                *dst = self.bilinear(fx, fy);
            }
        }
        true
    }

    #[inline(always)]
    fn bilinear(&self, fx: f64, fy: f64) -> f32 {
        let (x0, tx) = snap_split(fx, self.width);
        let (y0, ty) = snap_split(fy, self.height);
        let x1 = (x0 + 1).min(self.width - 1);
        let r0 = y0 * self.width;
        let r1 = (y0 + 1).min(self.height - 1) * self.width;
        let px = &self.pixels;
        let (p00, p10, p01, p11) = (px[r0 + x0], px[r0 + x1], px[r1 + x0], px[r1 + x1]);
        let (tx, ty) = (tx as f32, ty as f32);
        let top = f32::from(p00) + (f32::from(p10) - f32::from(p00)) * tx;
        let bottom = f32::from(p01) + (f32::from(p11) - f32::from(p01)) * tx;
        top + (bottom - top) * ty
    }
}

/// Integer and fractional parts of a non-negative coordinate; fractions within
/// `SNAP` of a grid line are snapped onto it.
#[inline]
fn snap_split(f: f64, len: usize) -> (usize, f64) {
    // Truncation equals floor here because callers clamp to >= 0.
    let mut i = f as usize;
    let mut t = f - i as f64;
    if t < SNAP {
        t = 0.0;
    } else if t > 1.0 - SNAP {
        i += 1;
        t = 0.0;
    }
    (i.min(len - 1), t)
}

/// ITU-R BT.601 luma of an interleaved RGB buffer.
pub fn to_grayscale(pixels: &[u8], channels: usize) -> Result<Vec<u8>> {
    if channels != 3 {
        return Err(Error::invalid(format!(
            "grayscale conversion expects 3 channels, got {channels}"
        )));
    }
    if !pixels.len().is_multiple_of(3) {
        return Err(Error::invalid("RGB buffer length is not a multiple of 3"));
    }
    Ok(pixels
        .chunks_exact(3)
        .map(|px| {
            let luma =
                0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ramp_map(w: usize, h: usize, gsd: f64) -> RasterMap {
        let pixels = (0..w * h)
            .map(|i| {
                let (c, r) = (i % w, i / w);
                ((c * 7 + r * 13 + (c * r) % 11) % 256) as u8
            })
            .collect();
        RasterMap::new(pixels, w, h, gsd, (0.0, 0.0)).unwrap()
    }

    #[test]
    fn world_to_pixel_examples() {
        let map = ramp_map(10, 10, 1.0);
        assert_eq!(
            map.world_to_pixel(3.5, 2.5),
            Some(PixelIndex { col: 3, row: 2 })
        );
        assert_eq!(map.world_to_pixel(-1.0, 0.0), None);
        assert_eq!(map.world_to_pixel(10.0, 0.0), None);

        let fine = ramp_map(10, 10, 0.5);
        assert_eq!(
            fine.world_to_pixel(3.5, 2.5),
            Some(PixelIndex { col: 7, row: 5 })
        );
    }

    #[test]
    fn rejects_bad_maps_and_cameras() {
        assert!(RasterMap::new(vec![], 0, 1, 1.0, (0.0, 0.0)).is_err());
        assert!(RasterMap::new(vec![0; 4], 2, 2, 0.0, (0.0, 0.0)).is_err());
        assert!(RasterMap::new(vec![0; 3], 2, 2, 1.0, (0.0, 0.0)).is_err());
        assert!(CameraModel::new(180.0, 64).is_err());
        assert!(CameraModel::new(0.0, 64).is_err());
        assert!(CameraModel::new(60.0, 0).is_err());
        let map = ramp_map(64, 64, 1.0);
        let cam = CameraModel::default();
        assert!(map
            .extract_patch(&Pose2D::new(32.0, 32.0, 0.0), 0.0, &cam)
            .is_err());
        assert!(map
            .extract_patch(&Pose2D::new(32.0, 32.0, 0.0), -5.0, &cam)
            .is_err());
    }

    /// Camera whose footprint at `altitude` is exactly `side` meters.
    fn camera_for(side: f64, altitude: f64, patch_px: usize) -> CameraModel {
        let fov = 2.0 * (side / (2.0 * altitude)).atan();
        CameraModel::new(fov.to_degrees(), patch_px).unwrap()
    }

    #[test]
    fn native_resolution_patch_is_raw_crop() {
        let map = ramp_map(100, 80, 2.0);
        let cam = camera_for(32.0 * 2.0, 100.0, 32);
        // Footprint [60, 124) x [40, 104) meters -> columns 30.., rows 20..
        let patch = map
            .extract_patch(&Pose2D::new(92.0, 72.0, 0.0), 100.0, &cam)
            .unwrap()
            .unwrap();
        for v in 0..32 {
            for u in 0..32 {
                assert_eq!(patch.get(u, v), f32::from(map.get(30 + u, 20 + v)));
            }
        }
    }

    #[test]
    fn downsampled_patch_matches_independent_bilinear() {
        let map = ramp_map(200, 200, 1.0);
        let cam = camera_for(100.0, 150.0, 40);
        let patch = map
            .extract_patch(&Pose2D::new(100.0, 100.0, 0.0), 150.0, &cam)
            .unwrap()
            .unwrap();
        let step = 100.0 / 40.0;
        for v in 0..40 {
            for u in 0..40 {
                let wx = 50.0 + (u as f64 + 0.5) * step;
                let wy = 50.0 + (v as f64 + 0.5) * step;
                let (fx, fy) = (wx - 0.5, wy - 0.5);
                let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
                let p = |c: usize, r: usize| f64::from(map.get(c, r));
                let expect = (1.0 - ty) * ((1.0 - tx) * p(x0, y0) + tx * p(x0 + 1, y0))
                    + ty * ((1.0 - tx) * p(x0, y0 + 1) + tx * p(x0 + 1, y0 + 1));
                assert!((f64::from(patch.get(u, v)) - expect).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn half_turn_rotates_patch() {
        let map = ramp_map(300, 300, 1.0);
        let cam = camera_for(90.0, 200.0, 48);
        let pose = Pose2D::new(150.3, 149.1, 0.0);
        let p0 = map.extract_patch(&pose, 200.0, &cam).unwrap().unwrap();
        let rotated = Pose2D::new(pose.x, pose.y, PI);
        let p1 = map.extract_patch(&rotated, 200.0, &cam).unwrap().unwrap();
        for v in 0..48 {
            for u in 0..48 {
                assert!((p1.get(u, v) - p0.get(47 - u, 47 - v)).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn footprint_off_map_is_marked() {
        let map = ramp_map(1024, 1024, 1.0);
        let cam = CameraModel::default();
        let edge = Pose2D::new(1.0, 512.0, 0.0);
        assert_eq!(map.extract_patch(&edge, 200.0, &cam).unwrap(), None);
        let rotated_corner = Pose2D::new(512.0, 512.0, 0.3);
        assert!(map
            .extract_patch(&rotated_corner, 200.0, &cam)
            .unwrap()
            .is_some());
    }

    #[test]
    fn grayscale_examples() {
        let rgb = [255, 255, 255, 0, 0, 0, 255, 0, 0];
        assert_eq!(to_grayscale(&rgb, 3).unwrap(), vec![255, 0, 76]);
        assert!(to_grayscale(&[0, 0, 0, 0], 4).is_err());
        assert!(to_grayscale(&[0, 0], 3).is_err());
    }

    proptest! {
        #[test]
        fn pixel_center_round_trip(col in 0usize..37, row in 0usize..23, gsd in 0.1f64..5.0,
                                   ox in -1e3f64..1e3, oy in -1e3f64..1e3) {
            let map = RasterMap::new(vec![0; 37 * 23], 37, 23, gsd, (ox, oy)).unwrap();
            let px = PixelIndex { col, row };
            let (x, y) = map.pixel_to_world(px);
            prop_assert_eq!(map.world_to_pixel(x, y), Some(px));
        }

        #[test]
        fn yaw_zero_translation_equivariance(k in -20i32..20, j in -20i32..20) {
            let map = ramp_map(256, 256, 2.0);
            let cam = camera_for(64.0, 100.0, 24);
            let base = Pose2D::new(256.0, 256.0, 0.0);
            let moved = Pose2D::new(base.x + f64::from(k) * 2.0, base.y + f64::from(j) * 2.0, 0.0);
            let p0 = map.extract_patch(&base, 100.0, &cam).unwrap().unwrap();
            let p1 = map.extract_patch(&moved, 100.0, &cam).unwrap().unwrap();
            // Both patches sample the same sub-pixel grid, shifted by (k, j) map pixels.
            let shifted = RasterMap::new(
                (0..256 * 256).map(|i| {
                    let (c, r) = (i % 256, i / 256);
                    let (sc, sr) = (c + k, r + j);
                    if (0..256).contains(&sc) && (0..256).contains(&sr) {
                        map.get(sc as usize, sr as usize)
                    } else { 0 }
                }).collect(),
                256, 256, 2.0, (0.0, 0.0)).unwrap();
            let p_ref = shifted.extract_patch(&base, 100.0, &cam).unwrap().unwrap();
            for (a, b) in p1.data().iter().zip(p_ref.data()) {
                prop_assert!((a - b).abs() <= 1.0);
            }
            prop_assert_eq!(p0.width(), p1.width());
        }
    }
}
