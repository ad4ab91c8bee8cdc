//! KLD-adaptive particle counts, the spatial bin grid and weighted draws.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose2D;

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9 over (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Adaptive sample-size settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldConfig {
    /// Bound on the KL distance between sampled and true posterior.
    pub epsilon: f64,
    /// The bound holds with probability `1 - delta`.
    pub delta: f64,
    pub bin_size: f64,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for KldConfig {
    fn default() -> Self {
        KldConfig {
            epsilon: 0.05,
            delta: 0.01,
            bin_size: 5.0,
            n_min: 100,
            n_max: 20_000,
        }
    }
}

impl KldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "kld epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "kld delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.bin_size > 0.0 && self.bin_size.is_finite()) {
            return Err(Error::invalid(format!(
                "bin size must be positive, got {}",
                self.bin_size
            )));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::invalid(format!(
                "particle limits need 1 <= n_min <= n_max, got {}..{}",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }

    /// Upper `1 - delta` quantile of the standard normal.
    pub fn z(&self) -> f64 {
        normal_quantile(1.0 - self.delta)
    }
}

/// Particle count needed for `k ≥ 2` occupied bins, clamped to
/// `[n_min, n_max]`. Uses the Wilson–Hilferty approximation of the
/// chi-square quantile.
pub fn kld_bound(k: usize, cfg: &KldConfig) -> usize {
    debug_assert!(k >= 2, "bound is defined for k >= 2");
    let km1 = (k.max(2) - 1) as f64;
    let a = 2.0 / (9.0 * km1);
    let n = km1 / (2.0 * cfg.epsilon) * (1.0 - a + a.sqrt() * cfg.z()).powi(3);
    let n = n.ceil();
    if n >= cfg.n_max as f64 {
        cfg.n_max
    } else {
        (n as usize).clamp(cfg.n_min, cfg.n_max)
    }
}

/// Sampling target for the running bin count `k`: the bound at `max(k, 2)`,
/// never below `n_min`.
pub fn required_particles(k: usize, cfg: &KldConfig) -> usize {
    kld_bound(k.max(2), cfg).max(cfg.n_min)
}

/// Occupancy of a square world-metric grid.
#[derive(Debug, Clone, Default)]
pub struct BinGrid {
    occupied: HashSet<(i64, i64)>,
    bin_size: f64,
}

impl BinGrid {
    pub fn new(bin_size: f64) -> Self {
        BinGrid {
            occupied: HashSet::new(),
            bin_size,
        }
    }

    pub fn bin_of(&self, pose: &Pose2D) -> (i64, i64) {
        (
            (pose.x / self.bin_size).floor() as i64,
            (pose.y / self.bin_size).floor() as i64,
        )
    }

    /// Marks the bin under `pose`; true iff it was empty before.
    pub fn mark_bin(&mut self, pose: &Pose2D) -> bool {
        let bin = self.bin_of(pose);
        self.occupied.insert(bin)
    }

    /// Number of non-empty bins.
    pub fn k(&self) -> usize {
        self.occupied.len()
    }

    pub fn clear(&mut self) {
        self.occupied.clear();
    }
}

/// Inverse-CDF sampler over a fixed weight vector: one uniform draw plus a
/// binary search over the cumulative sums.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("cannot sample from an empty particle set"));
        }
        let mut total = 0.0;
        let mut last_positive = None;
        let mut cumulative = Vec::with_capacity(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "weight {w} is not a non-negative number"
                )));
            }
            if w > 0.0 {
                last_positive = Some(i);
            }
            total += w;
            cumulative.push(total);
        }
        let last_positive =
            last_positive.ok_or_else(|| Error::invalid("all particle weights are zero"))?;
        Ok(WeightedSampler {
            cumulative,
            last_positive,
        })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Index `i` with probability `w_i / Σw`. Never returns a zero-weight index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        // First index whose cumulative sum exceeds u; zero-weight entries repeat
        // their predecessor's sum and are skipped.
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.last_positive)
    }
}

/// Draws one particle index from normalized weights.
pub fn weighted_sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    Ok(WeightedSampler::new(weights)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tabulated_quantiles() {
        for (p, z) in [
            (0.5, 0.0),
            (0.9, 1.281_551_565_545),
            (0.95, 1.644_853_626_951),
            (0.975, 1.959_963_984_540),
            (0.99, 2.326_347_874_041),
            (0.999, 3.090_232_306_168),
            (0.01, -2.326_347_874_041),
        ] {
            assert!((normal_quantile(p) - z).abs() < 1e-8, "p={p}");
        }
        assert!(normal_quantile(1.5).is_nan());
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn bound_examples() {
        let wide = KldConfig {
            n_min: 1,
            n_max: 1_000_000,
            ..KldConfig::default()
        };
        assert_eq!(kld_bound(2, &wide), 66);
        let capped = KldConfig { n_max: 50, ..wide };
        assert_eq!(kld_bound(2, &capped), 50);
        assert!(kld_bound(100, &wide) > kld_bound(10, &wide));
        assert_eq!(required_particles(0, &KldConfig::default()), 100);
        assert_eq!(required_particles(1, &wide), 66);
        assert_eq!(kld_bound(100_000, &KldConfig::default()), 20_000);
    }

    #[test]
    fn config_validation() {
        assert!(KldConfig::default().validate().is_ok());
        assert!(KldConfig {
            epsilon: 0.0,
            ..KldConfig::default()
        }
        .validate()
        .is_err());
        assert!(KldConfig {
            delta: 1.0,
            ..KldConfig::default()
        }
        .validate()
        .is_err());
        assert!(KldConfig {
            n_min: 10,
            n_max: 5,
            ..KldConfig::default()
        }
        .validate()
        .is_err());
        assert!(KldConfig {
            bin_size: -5.0,
            ..KldConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn bin_marking() {
        let mut grid = BinGrid::new(5.0);
        assert!(grid.mark_bin(&Pose2D::new(1.0, 1.0, 0.0)));
        assert!(!grid.mark_bin(&Pose2D::new(4.0, 4.0, 0.0)));
        assert!(grid.mark_bin(&Pose2D::new(6.0, 1.0, 0.0)));
        assert!(grid.mark_bin(&Pose2D::new(-0.5, 1.0, 0.0)));
        assert_eq!(grid.k(), 3);
        grid.clear();
        assert_eq!(grid.k(), 0);
    }

    #[test]
    fn degenerate_mass_always_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = WeightedSampler::new(&[1.0, 0.0, 0.0]).unwrap();
        assert!((0..10_000).all(|_| s.sample(&mut rng) == 0));
    }

    #[test]
    fn even_split_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = WeightedSampler::new(&[0.5, 0.5]).unwrap();
        let zeros = (0..100_000).filter(|_| s.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / 100_000.0;
        assert!((0.49..=0.51).contains(&freq), "{freq}");
    }

    #[test]
    fn trailing_zero_weights_never_drawn() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = WeightedSampler::new(&[0.0, 0.3, 0.0, 0.7, 0.0, 0.0]).unwrap();
        for _ in 0..100_000 {
            let i = s.sample(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn sampler_errors() {
        assert!(WeightedSampler::new(&[]).is_err());
        assert!(WeightedSampler::new(&[0.0, 0.0]).is_err());
        assert!(WeightedSampler::new(&[0.5, f64::NAN]).is_err());
    }
}
