use ortholoc_core::sim::{generate_world, render_frame};
use ortholoc_core::similarity::pearson;
use ortholoc_core::{CameraModel, Pose2D, WorldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn true_pose_outscores_a_pose_100_m_away() {
    let map = generate_world(&WorldSpec {
        seed: 21,
        ..WorldSpec::default()
    })
    .unwrap();
    let cam = CameraModel::new(60.0, 32).unwrap();
    let altitude = 200.0;
    let margin = cam.footprint_side(altitude).unwrap() + 110.0;
    let (w, h) = map.extent();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut better = 0;
    let mut close = Vec::new();
    for _ in 0..100 {
        let truth = Pose2D::new(
            rng.random_range(margin..w - margin),
            rng.random_range(margin..h - margin),
            rng.random_range(-3.1..3.1),
        );
        let frame = render_frame(&map, &truth, altitude, &cam, 2.0, &mut rng).unwrap();
        let at_truth = map.extract_patch(&truth, altitude, &cam).unwrap().unwrap();
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let away = Pose2D::new(
            truth.x + 100.0 * phi.cos(),
            truth.y + 100.0 * phi.sin(),
            truth.yaw,
        );
        let at_away = map.extract_patch(&away, altitude, &cam).unwrap().unwrap();
        let r_true = pearson(&frame, &at_truth).unwrap().unwrap();
        let r_away = pearson(&frame, &at_away).unwrap().unwrap_or(-1.0);
        close.push(r_true);
        if r_true > r_away {
            better += 1;
        }
    }
    assert!(better >= 95, "true pose won {better}/100");
    assert!(close.iter().all(|&r| r > 0.95));
}
