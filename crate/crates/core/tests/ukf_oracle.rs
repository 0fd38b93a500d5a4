//! The unscented filter on a linear system must reproduce the ordinary Kalman
//! filter, since the unscented transform is exact for linear maps.

use ftc_core::fdi::{measurement_matrix, ukf_predict_with, ukf_update, FilterNoise, FilterState, UtScaling};
use nalgebra::{Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn surrogate() -> Matrix4<f64> {
    Matrix4::new(
        0.99, 0.01, 0.0, 0.002, //
        -0.01, 0.98, 0.05, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

#[test]
fn ukf_matches_kalman_filter_on_linear_system() {
    let a = surrogate();
    let h = measurement_matrix();
    let noise = FilterNoise::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ukf = FilterState::default();
    let (mut m, mut p) = (ukf.mean, ukf.cov);
    let mut truth = Vector4::new(20.5, 0.3, 0.01, 22.0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        truth = a * truth;
        let z = h * truth
            + Vector3::from_fn(|i, _| {
                let e: f64 = StandardNormal.sample(&mut rng);
                noise.r[(i, i)].sqrt() * e
            });

        ukf = ukf_predict_with(&ukf, &noise, UtScaling::default(), |x| a * x).unwrap();
        ukf = ukf_update(&ukf, &z, &noise, UtScaling::default()).unwrap();

        m = a * m;
        p = a * p * a.transpose() + noise.q;
        let s = h * p * h.transpose() + noise.r;
        let k = p * h.transpose() * s.try_inverse().unwrap();
        m += k * (z - h * m);
        p = (Matrix4::identity() - k * h) * p;
        p = (p + p.transpose()) * 0.5;

        worst = worst.max((ukf.mean - m).amax()).max((ukf.cov - p).amax());
    }
    assert!(worst < 1e-8, "largest UKF/KF discrepancy {worst:e}");
}
