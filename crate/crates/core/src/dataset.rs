//! On-disk map and flight formats.
//!
//! A map is an 8-bit grayscale or RGB PNG (or binary PGM) with a sidecar
//! `<stem>.txt` holding `gsd_m_per_px`, `origin_x_m` and `origin_y_m` as
//! `key=value` lines. Raster row 0 is the southern edge of the map.
//!
//! A flight is a directory:
//!
//! ```text
//! frames/000000.png   camera patches, one per frame
//! truth.csv           frame,t_sec,x_m,y_m,yaw_rad,altitude_m
//! odometry.csv        frame,d_tran_m,d_rot_rad
//! meta.txt            fov_deg, patch_px, frame_rate_hz, map
//! ```
//!
//! The `map` entry in `meta.txt` is a path relative to the flight directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::OdometryDelta;
use crate::pose::Pose2D;
use crate::raster_map::{to_grayscale, CameraModel, Patch, RasterMap};
use crate::sim::TruthSample;

/// Everything the filter consumes for one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightData {
    pub truth: Vec<TruthSample>,
    pub odometry: Vec<OdometryDelta>,
    pub frames: Vec<Patch>,
    pub camera: CameraModel,
    pub frame_rate: f64,
    /// Map location relative to the flight directory, when stored on disk.
    pub map_ref: Option<String>,
}

impl FlightData {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.truth.is_empty() {
            return Err(Error::Config("flight has no frames".into()));
        }
        if self.odometry.len() != self.truth.len() || self.frames.len() != self.truth.len() {
            return Err(Error::Config(format!(
                "flight has {} truth rows, {} odometry rows and {} frames",
                self.truth.len(),
                self.odometry.len(),
                self.frames.len()
            )));
        }
        let px = self.camera.patch_px;
        if let Some(bad) = self
            .frames
            .iter()
            .position(|f| f.width() != px || f.height() != px)
        {
            return Err(Error::Config(format!(
                "frame {bad} is not {px}x{px} as declared by the camera"
            )));
        }
        Ok(())
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {} is not key=value", no + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text, path)
}

fn get_f64(kv: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<f64> {
    kv.get(key)
        .ok_or_else(|| Error::format(path, format!("missing key '{key}'")))?
        .parse()
        .map_err(|_| Error::format(path, format!("key '{key}' is not a number")))
}

pub fn sidecar_path(map_path: &Path) -> PathBuf {
    map_path.with_extension("txt")
}

fn read_gray(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageRgb8(rgb) => to_grayscale(rgb.as_raw(), 3)?,
        other => {
            return Err(Error::format(
                path,
                format!(
                    "unsupported pixel layout {:?}; expected 8-bit gray or RGB",
                    other.color()
                ),
            ))
        }
    };
    Ok((pixels, w, h))
}

fn write_gray(path: &Path, pixels: Vec<u8>, w: usize, h: usize) -> Result<()> {
    let img = GrayImage::from_raw(w as u32, h as u32, pixels)
        .ok_or_else(|| Error::invalid("pixel buffer does not match image size"))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    if format == ImageFormat::Pnm {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let enc = PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        img.write_with_encoder(enc)
    } else {
        img.save_with_format(path, format)
    }
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a map raster and its sidecar metadata.
pub fn load_map(path: &Path) -> Result<RasterMap> {
    let (pixels, w, h) = read_gray(path)?;
    let meta_path = sidecar_path(path);
    let kv = read_key_values(&meta_path)?;
    let gsd = get_f64(&kv, "gsd_m_per_px", &meta_path)?;
    let ox = get_f64(&kv, "origin_x_m", &meta_path)?;
    let oy = get_f64(&kv, "origin_y_m", &meta_path)?;
    RasterMap::new(pixels, w, h, gsd, (ox, oy))
}

/// Writes the raster (PNG, or PGM for a `.pgm` path) and its sidecar.
pub fn save_map(map: &RasterMap, path: &Path) -> Result<()> {
    write_gray(path, map.pixels().to_vec(), map.width(), map.height())?;
    let (ox, oy) = map.origin();
    let meta = format!(
        "gsd_m_per_px={}\norigin_x_m={}\norigin_y_m={}\n",
        map.gsd(),
        ox,
        oy
    );
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    frame: usize,
    t_sec: f64,
    x_m: f64,
    y_m: f64,
    yaw_rad: f64,
    altitude_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OdometryRow {
    frame: usize,
    d_tran_m: f64,
    d_rot_rad: f64,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_rows<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

pub fn frame_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join("frames").join(format!("{frame:06}.png"))
}

/// Writes a flight directory. Frames are quantized to 8 bits.
pub fn save_flight(flight: &FlightData, dir: &Path) -> Result<()> {
    flight.validate()?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (i, frame) in flight.frames.iter().enumerate() {
        write_gray(
            &frame_path(dir, i),
            frame.to_u8(),
            frame.width(),
            frame.height(),
        )?;
    }
    write_rows(
        &dir.join("truth.csv"),
        flight.truth.iter().map(|s| TruthRow {
            frame: s.frame,
            t_sec: s.t_sec,
            x_m: s.pose.x,
            y_m: s.pose.y,
            yaw_rad: s.pose.yaw,
            altitude_m: s.altitude,
        }),
    )?;
    write_rows(
        &dir.join("odometry.csv"),
        flight
            .odometry
            .iter()
            .enumerate()
            .map(|(i, d)| OdometryRow {
                frame: i,
                d_tran_m: d.d_tran,
                d_rot_rad: d.d_rot,
            }),
    )?;
    let mut meta = format!(
        "fov_deg={}\npatch_px={}\nframe_rate_hz={}\n",
        flight.camera.fov_deg, flight.camera.patch_px, flight.frame_rate
    );
    if let Some(map) = &flight.map_ref {
        meta.push_str(&format!("map={map}\n"));
    }
    let meta_path = dir.join("meta.txt");
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

/// Reads a flight directory written by [`save_flight`] or converted from
/// another source.
pub fn load_flight(dir: &Path) -> Result<FlightData> {
    let meta_path = dir.join("meta.txt");
    let kv = read_key_values(&meta_path)?;
    let fov = get_f64(&kv, "fov_deg", &meta_path)?;
    let patch_px = get_f64(&kv, "patch_px", &meta_path)?;
    if patch_px < 1.0 || patch_px.fract() != 0.0 {
        return Err(Error::format(
            &meta_path,
            "patch_px must be a positive integer",
        ));
    }
    let camera = CameraModel::new(fov, patch_px as usize)?;
    let frame_rate = get_f64(&kv, "frame_rate_hz", &meta_path)?;

    let truth_path = dir.join("truth.csv");
    let truth: Vec<TruthSample> = read_rows::<TruthRow>(&truth_path)?
        .into_iter()
        .map(|r| TruthSample {
            frame: r.frame,
            t_sec: r.t_sec,
            pose: Pose2D::new(r.x_m, r.y_m, r.yaw_rad),
            altitude: r.altitude_m,
        })
        .collect();
    if truth.iter().enumerate().any(|(i, s)| s.frame != i) {
        return Err(Error::format(
            &truth_path,
            "frames must be numbered 0, 1, 2, ...",
        ));
    }
    let odo_path = dir.join("odometry.csv");
    let odometry = read_rows::<OdometryRow>(&odo_path)?
        .into_iter()
        .map(|r| OdometryDelta::new(r.d_tran_m, r.d_rot_rad))
        .collect::<Result<Vec<_>>>()?;

    let frames = (0..truth.len())
        .map(|i| {
            let path = frame_path(dir, i);
            let (px, w, h) = read_gray(&path)?;
            Patch::from_u8(w, h, &px)
        })
        .collect::<Result<Vec<_>>>()?;

    let flight = FlightData {
        truth,
        odometry,
        frames,
        camera,
        frame_rate,
        map_ref: kv.get("map").cloned(),
    };
    flight.validate()?;
    Ok(flight)
}
