use ortholoc_core::kld_sampler::{kld_bound, normal_quantile, BinGrid};
use ortholoc_core::{KldConfig, Pose2D};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Standard normal CDF by composite Simpson integration of the density from 0.
fn normal_cdf(z: f64) -> f64 {
    let n = 20_000;
    let h = z.abs() / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(z.abs());
    for i in 1..n {
        let x = i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    let half = s * h / 3.0;
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Quantile by bisection on the quadrature CDF.
fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn reference_bound(k: usize, epsilon: f64, z: f64) -> f64 {
    let km1 = (k - 1) as f64;
    let a = 2.0 / (9.0 * km1);
    (km1 / (2.0 * epsilon) * (1.0 - a + a.sqrt() * z).powi(3)).ceil()
}

fn wide(epsilon: f64, delta: f64) -> KldConfig {
    KldConfig {
        epsilon,
        delta,
        bin_size: 5.0,
        n_min: 1,
        n_max: usize::MAX / 2,
    }
}

#[test]
fn quadrature_quantile_agrees_with_tables() {
    assert!((bisect_quantile(0.99) - 2.326_347_874).abs() < 1e-7);
    assert!((bisect_quantile(0.95) - 1.644_853_627).abs() < 1e-7);
    for p in [0.9, 0.95, 0.975, 0.99, 0.995, 0.999] {
        assert!(
            (normal_quantile(p) - bisect_quantile(p)).abs() < 1e-7,
            "p={p}"
        );
    }
}

#[test]
fn bound_matches_independent_evaluation() {
    for delta in [0.01, 0.05] {
        let z = bisect_quantile(1.0 - delta);
        for epsilon in [0.01, 0.05, 0.1] {
            let cfg = wide(epsilon, delta);
            for k in 2..=500 {
                let got = kld_bound(k, &cfg) as f64;
                let want = reference_bound(k, epsilon, z);
                assert!(
                    (got - want).abs() <= 1.0,
                    "k={k} eps={epsilon} delta={delta}: {got} vs {want}"
                );
            }
        }
    }
    assert_eq!(kld_bound(2, &wide(0.05, 0.01)), 66);
}

#[test]
fn wilson_hilferty_tracks_exact_chi_square_quantile() {
    // The bound approximates χ²_{k−1, 1−δ} / (2ε); the approximation tightens
    // as k grows.
    let cfg = wide(0.05, 0.01);
    for k in [10usize, 50, 100, 500] {
        let exact = ChiSquared::new((k - 1) as f64).unwrap().inverse_cdf(0.99) / (2.0 * 0.05);
        let approx = kld_bound(k, &cfg) as f64;
        assert!(
            (approx - exact).abs() / exact < 0.01,
            "k={k}: {approx} vs {exact}"
        );
    }
}

proptest! {
    #[test]
    fn bin_count_between_one_and_inserted(
        pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 1..200)
    ) {
        let mut grid = BinGrid::new(5.0);
        for (i, (x, y)) in pts.iter().enumerate() {
            grid.mark_bin(&Pose2D::new(*x, *y, 0.0));
            prop_assert!(grid.k() >= 1 && grid.k() <= i + 1);
        }
    }

    #[test]
    fn bound_is_clamped(k in 2usize..5000, n_min in 1usize..500, span in 0usize..5000) {
        let cfg = KldConfig { n_min, n_max: n_min + span, ..KldConfig::default() };
        let n = kld_bound(k, &cfg);
        prop_assert!(n >= cfg.n_min && n <= cfg.n_max);
    }
}
