mod common;

use proptest::prelude::*;
use uisal::gaze::{
    fit_calibration, fixations_to_pixel_saliency, pixel_to_element_saliency, resolve_element_ownership,
    screen_ground_truth, FixationSet, GazePoint, GazeSession,
};
use uisal::SeededRng;

fn fixations(rng: &mut SeededRng, w: usize, h: usize, n: usize) -> FixationSet {
    let s = rng.uniform_range(1.0, 12.0);
    let r = rng.uniform_range(-0.5, 0.5);
    FixationSet {
        ui_id: "t".into(),
        points: (0..n)
            .map(|i| {
                GazePoint::new(
                    rng.uniform_range(0.0, w as f64),
                    rng.uniform_range(0.0, h as f64),
                    i as u64,
                )
            })
            .collect(),
        covariance: [[s * s, r * s * s], [r * s * s, s * s]],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masses_equal_owned_density(seed in any::<u64>(), k in 1usize..12) {
        let mut rng = SeededRng::new(seed);
        let (w, h) = (rng.int_range(8, 60), rng.int_range(8, 60));
        let elements = common::random_layout(&mut rng, w, h, k);
        let fx = fixations(&mut rng, w, h, 5);
        let map = fixations_to_pixel_saliency(&fx, w, h).unwrap();
        prop_assert!((map.total() - 1.0).abs() < 1e-6);
        let raster = resolve_element_ownership(&elements, w, h).unwrap();
        let s = pixel_to_element_saliency(&map, &elements, &raster).unwrap();
        prop_assert_eq!(&s.masses, &common::owned_mass(&map, &elements));
        prop_assert!(s.masses.iter().sum::<f64>() <= map.total() + 1e-12);
        prop_assert!((s.vector.values().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noise_free_affine_is_recovered(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let a = [
            [rng.uniform_range(0.8, 1.2), rng.uniform_range(-0.2, 0.2), rng.uniform_range(-30.0, 30.0)],
            [rng.uniform_range(-0.2, 0.2), rng.uniform_range(0.8, 1.2), rng.uniform_range(-30.0, 30.0)],
        ];
        // the fitted map goes raw -> truth, so raw is generated by inverting
        let truth: Vec<GazePoint> = (0..24)
            .map(|i| GazePoint::new(rng.uniform_range(0.0, 400.0), rng.uniform_range(0.0, 800.0), i))
            .collect();
        let raw: Vec<GazePoint> = truth
            .iter()
            .map(|t| GazePoint::new(
                a[0][0] * t.x + a[0][1] * t.y + a[0][2],
                a[1][0] * t.x + a[1][1] * t.y + a[1][2],
                t.frame,
            ))
            .collect();
        let m = fit_calibration(&raw, &truth).unwrap();
        for (r, t) in raw.iter().zip(&truth) {
            let p = m.apply(*r);
            prop_assert!((p.x - t.x).abs() < 1e-7 && (p.y - t.y).abs() < 1e-7);
        }
        prop_assert!(m.test_rmse < 1e-7);
    }
}

#[test]
fn screen_ground_truth_is_conserved() {
    let mut rng = SeededRng::new(5);
    let (w, h) = (90, 160);
    let elements = common::random_layout(&mut rng, w, h, 9);
    let grid: Vec<GazePoint> = (0..16)
        .map(|i| GazePoint::new(10.0 + 20.0 * (i % 4) as f64, 20.0 + 40.0 * (i / 4) as f64, i as u64))
        .collect();
    let sessions: Vec<GazeSession> = (0..3)
        .map(|_| GazeSession {
            calibration_raw: grid
                .iter()
                .map(|p| {
                    GazePoint::new(
                        1.05 * p.x + 4.0 + rng.normal(),
                        0.97 * p.y - 3.0 + rng.normal(),
                        p.frame,
                    )
                })
                .collect(),
            calibration_truth: grid.clone(),
            gaze: (0..30)
                .map(|i| GazePoint::new(rng.uniform_range(0.0, 90.0), rng.uniform_range(0.0, 160.0), i))
                .collect(),
        })
        .collect();
    let gt = screen_ground_truth("s", &sessions, &elements, w, h).unwrap();
    assert_eq!(gt.calibrations.len(), 3);
    assert!((gt.pixel_map.total() - 1.0).abs() < 1e-6);
    assert!((gt.elements.vector.values().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert_eq!(gt.elements.masses, common::owned_mass(&gt.pixel_map, &elements));
}
