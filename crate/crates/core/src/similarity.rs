//! Pearson correlation between a camera frame and a map patch.

use crate::error::{Error, Result};
use crate::raster_map::Patch;

/// Relative variance below which a patch counts as constant.
const ZERO_VARIANCE: f64 = 1e-12;

/// Pearson correlation coefficient of two equally sized patches.
///
/// `Ok(None)` marks an undefined similarity: either patch has zero variance.
pub fn pearson(i: &Patch, t: &Patch) -> Result<Option<f64>> {
    if i.width() != t.width() || i.height() != t.height() {
        return Err(Error::invalid(format!(
            "patch dimensions differ: {}x{} vs {}x{}",
            i.width(),
            i.height(),
            t.width(),
            t.height()
        )));
    }
    if i.data().len() < 2 {
        return Err(Error::invalid("correlation needs at least two pixels"));
    }
    Ok(pearson_slices(i.data(), t.data()))
}

/// Slice form of [`pearson`]; the inputs must have equal length.
pub fn pearson_slices(a: &[f32], b: &[f32]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let mean_b = b.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x) - mean_a, f64::from(y) - mean_b);
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    let scale_a = n * mean_a * mean_a + saa;
    let scale_b = n * mean_b * mean_b + sbb;
    if saa <= ZERO_VARIANCE * scale_a.max(1.0) || sbb <= ZERO_VARIANCE * scale_b.max(1.0) {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// A camera frame with its mean removed and norm cached, so that each
/// candidate patch costs a single pass.
#[derive(Debug, Clone)]
pub struct PreparedTemplate {
    centered: Vec<f64>,
    norm: f64,
    width: usize,
    height: usize,
}

impl PreparedTemplate {
    pub fn new(frame: &Patch) -> Self {
        let n = frame.data().len() as f64;
        let mean = frame.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let centered: Vec<f64> = frame.data().iter().map(|&v| f64::from(v) - mean).collect();
        let energy: f64 = centered.iter().map(|v| v * v).sum();
        let sum_sq: f64 = frame.data().iter().map(|&v| f64::from(v).powi(2)).sum();
        let norm = if energy <= ZERO_VARIANCE * sum_sq.max(1.0) {
            0.0
        } else {
            energy.sqrt()
        };
        PreparedTemplate {
            centered,
            norm,
            width: frame.width(),
            height: frame.height(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Correlation of a candidate patch buffer against the frame.
    pub fn correlate(&self, patch: &[f32]) -> Option<f64> {
        debug_assert_eq!(patch.len(), self.centered.len());
        if self.norm == 0.0 {
            return None;
        }
        let n = patch.len() as f64;
        let (mut s, mut ss, mut st) = (0.0f64, 0.0f64, 0.0f64);
        for (&x, &t) in patch.iter().zip(&self.centered) {
            let x = f64::from(x);
            s += x;
            ss += x * x;
            st += x * t;
        }
        // Σ I'·T' = Σ I·T' because T' sums to zero.
        let var = ss - s * s / n;
        if var <= ZERO_VARIANCE * ss.max(1.0) {
            return None;
        }
        Some((st / (var.sqrt() * self.norm)).clamp(-1.0, 1.0))
    }
}
