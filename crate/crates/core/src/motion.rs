//! Planar odometry motion model with scaled Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{wrap_angle, Pose2D};

/// Standard deviation of the unit noise draw; `eps` is therefore a 3σ bound.
pub const UNIT_NOISE_SIGMA: f64 = 1.0 / 3.0;

/// Motion measured between two consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub d_tran: f64,
    pub d_rot: f64,
}

impl OdometryDelta {
    pub fn new(d_tran: f64, d_rot: f64) -> Result<Self> {
        if !(d_tran >= 0.0 && d_tran.is_finite()) || !d_rot.is_finite() {
            return Err(Error::invalid(format!(
                "odometry delta ({d_tran}, {d_rot}) needs finite values and d_tran >= 0"
            )));
        }
        Ok(OdometryDelta { d_tran, d_rot })
    }
}

/// Motion-model noise. The translational bound grows with the distance moved:
/// `eps_tran = eps_tran_scale · d_tran + eps_tran_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub eps_tran_scale: f64,
    pub eps_tran_min: f64,
    pub eps_rot: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            eps_tran_scale: 0.15,
            eps_tran_min: 0.1,
            eps_rot: 0.02,
        }
    }
}

impl NoiseConfig {
    /// Unit gains and no noise: exact dead reckoning.
    pub fn noiseless() -> Self {
        NoiseConfig {
            eps_tran_scale: 0.0,
            eps_tran_min: 0.0,
            eps_rot: 0.0,
            ..NoiseConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("eps_tran_scale", self.eps_tran_scale),
            ("eps_tran_min", self.eps_tran_min),
            ("eps_rot", self.eps_rot),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn eps_tran(&self, d_tran: f64) -> f64 {
        self.eps_tran_scale * d_tran + self.eps_tran_min
    }
}

/// `eps · g` with `g ~ N(0, σ = 1/3)`. Zero scale returns exactly zero
/// without consuming randomness.
pub fn sample_normal<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let g: f64 = rng.sample(StandardNormal);
    eps * UNIT_NOISE_SIGMA * g
}

/// Moves a pose by a noisy odometry delta: rotate by the sampled heading
/// change, then translate along the new heading.
pub fn propagate<R: Rng + ?Sized>(
    pose: &Pose2D,
    odo: &OdometryDelta,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Pose2D {
    let tran = odo.d_tran + sample_normal(noise.eps_tran(odo.d_tran), rng);
    let rot = odo.d_rot + sample_normal(noise.eps_rot, rng);
    apply_motion(pose, tran, rot, noise)
}

fn apply_motion(pose: &Pose2D, tran: f64, rot: f64, noise: &NoiseConfig) -> Pose2D {
    let heading = pose.yaw + noise.alpha3 * rot;
    let (sin, cos) = heading.sin_cos();
    Pose2D {
        x: pose.x + noise.alpha1 * tran * cos,
        y: pose.y + noise.alpha2 * tran * sin,
        yaw: wrap_angle(heading),
    }
}

/// Integrates odometry from `start` without noise.
pub fn dead_reckon(start: &Pose2D, deltas: &[OdometryDelta]) -> Vec<Pose2D> {
    let noise = NoiseConfig::noiseless();
    let mut pose = *start;
    deltas
        .iter()
        .map(|d| {
            pose = apply_motion(&pose, d.d_tran, d.d_rot, &noise);
            pose
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_scale_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(sample_normal(0.0, &mut rng), 0.0);
        }
    }

    #[test]
    fn sample_normal_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_normal(3.0, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.03, "std {}", var.sqrt());
    }

    #[test]
    fn sample_normal_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| sample_normal(1.0, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn noiseless_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = NoiseConfig::noiseless();
        let origin = Pose2D::new(0.0, 0.0, 0.0);

        let same = propagate(&origin, &OdometryDelta::default(), &noise, &mut rng);
        assert_eq!(same, origin);

        let east = propagate(
            &origin,
            &OdometryDelta::new(10.0, 0.0).unwrap(),
            &noise,
            &mut rng,
        );
        assert_eq!(east, Pose2D::new(10.0, 0.0, 0.0));

        let north = propagate(
            &origin,
            &OdometryDelta::new(10.0, FRAC_PI_2).unwrap(),
            &noise,
            &mut rng,
        );
        assert!(north.x.abs() < 1e-12);
        assert!((north.y - 10.0).abs() < 1e-12);
        assert!((north.yaw - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn heading_stays_wrapped() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = NoiseConfig {
            eps_rot: 1.0,
            ..NoiseConfig::default()
        };
        let mut pose = Pose2D::new(0.0, 0.0, 3.0);
        for _ in 0..1000 {
            pose = propagate(
                &pose,
                &OdometryDelta::new(1.0, 0.7).unwrap(),
                &noise,
                &mut rng,
            );
            assert!(pose.yaw > -PI && pose.yaw <= PI);
        }
    }

    #[test]
    fn noise_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = NoiseConfig::default();
        let odo = OdometryDelta::new(10.0, 0.0).unwrap();
        let start = Pose2D::new(0.0, 0.0, 0.0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| propagate(&start, &odo, &noise, &mut rng).x)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn dead_reckoning_integrates_deltas() {
        let deltas = [
            OdometryDelta::new(10.0, 0.0).unwrap(),
            OdometryDelta::new(10.0, FRAC_PI_2).unwrap(),
        ];
        let path = dead_reckon(&Pose2D::new(1.0, 1.0, 0.0), &deltas);
        assert!((path[1].x - 11.0).abs() < 1e-12 && (path[1].y - 11.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_translation() {
        assert!(OdometryDelta::new(-1.0, 0.0).is_err());
        assert!(NoiseConfig {
            alpha1: -1.0,
            ..NoiseConfig::default()
        }
        .validate()
        .is_err());
    }
}
