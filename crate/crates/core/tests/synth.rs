use glucokin_core::dropdetect::{self, DropDetector, DropDetectorConfig};
use glucokin_core::frames;
use glucokin_core::synth::{
    self, generate_dataset, linspace, Jitter, KineticDefaults, MeasurementPlan, Region, SceneConfig,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn plan(g: f64, seed: u64) -> MeasurementPlan {
    MeasurementPlan::new(SceneConfig::compact(), KineticDefaults::default(), g, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn masks_partition_the_frame(g in 20.0f64..600.0, seed in any::<u64>()) {
        let gen = plan(g, seed).generator().unwrap();
        let t = gen.truth();
        let total: usize = [Region::Background, Region::Roi, Region::Edge, Region::Artefact]
            .iter()
            .map(|&r| t.count(r))
            .sum();
        prop_assert_eq!(total, t.rows * t.cols);
        prop_assert_eq!(t.mask.len(), t.rows * t.cols);
        prop_assert!(t.count(Region::Roi) > 0 && t.count(Region::Background) > 0);
    }

    #[test]
    fn kinetic_levels_are_ordered(g in 20.0f64..600.0) {
        let gen = plan(g, 1).generator().unwrap();
        let t = gen.truth();
        let bg = gen.plan().scene.background;
        prop_assert!(t.r_c < t.r_d && t.r_d < bg);
        prop_assert!(t.tau < 0.0);
        prop_assert!((synth::g_of_r_c(t.r_c) - g).abs() < 1e-9);
        let n_d = t.n_d;
        prop_assert_eq!(gen.region_value(Region::Roi, n_d - 1), bg);
        prop_assert_eq!(gen.region_value(Region::Roi, n_d), t.r_d);
        let mut prev = t.r_d;
        for n in n_d + 1..n_d + 400 {
            let v = gen.region_value(Region::Roi, n);
            prop_assert!(v < prev && v > t.r_c);
            prev = v;
        }
    }
}

#[test]
fn remission_falls_with_glucose() {
    let r: Vec<f64> = linspace(20.0, 600.0, 30)
        .into_iter()
        .map(synth::r_c_of_g)
        .collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn normalised_roi_mean_is_within_three_sigma_of_truth() {
    for (i, g) in [60.0, 250.0, 520.0].into_iter().enumerate() {
        let gen = plan(g, 40 + i as u64).generator().unwrap();
        let cal = frames::calibration_mean(&gen.calibration_frames()).unwrap();
        let mask = &gen.truth().mask;
        let sigma = gen.plan().scene.noise_sigma;
        let k = gen.plan().kinetics.calibration_frames as f64;
        for n in [gen.truth().n_d + 5, gen.truth().n_d + 200] {
            let norm = frames::normalize(&gen.frame_at(n), &cal).unwrap();
            let roi: Vec<f64> = norm
                .pixels()
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m == Region::Roi)
                .map(|(&p, _)| p)
                .collect();
            let mean = roi.iter().sum::<f64>() / roi.len() as f64;
            let se = sigma * (1.0 + 1.0 / k).sqrt() / (roi.len() as f64).sqrt();
            let truth = gen.region_value(Region::Roi, n);
            assert!(
                (mean - truth).abs() < 3.0 * se,
                "g {g}, n {n}: {mean} vs {truth}"
            );
        }
    }
}

#[test]
fn frames_are_reproducible_and_independent_of_order() {
    let gen = plan(200.0, 9).generator().unwrap();
    let again = plan(200.0, 9).generator().unwrap();
    assert_eq!(gen.frame_at(123), again.frame_at(123));
    let m = gen.measurement();
    assert_eq!(m.frames[123], gen.frame_at(123));
    assert_eq!(m.calibration_frames[3], gen.calibration_frame(3));
    assert_ne!(gen.frame_at(1).pixels(), gen.frame_at(2).pixels());
}

#[test]
fn dataset_is_level_major_with_jittered_drops() {
    let levels = linspace(50.0, 550.0, 4);
    let jitter = Jitter::default();
    let ds = generate_dataset(
        &levels,
        3,
        SceneConfig::compact(),
        KineticDefaults::default(),
        jitter,
        5,
    )
    .unwrap();
    assert_eq!(ds.entries.len(), 12);
    for (i, e) in ds.entries.iter().enumerate() {
        assert_eq!(e.id, i);
        assert_eq!(e.plan.g, levels[i / 3]);
        let n_d = e.plan.kinetics.n_d;
        assert!((50..=70).contains(&n_d));
    }
    let again = generate_dataset(
        &levels,
        3,
        SceneConfig::compact(),
        KineticDefaults::default(),
        jitter,
        5,
    )
    .unwrap();
    assert_eq!(ds, again);
}

#[test]
fn rejects_glucose_outside_the_modelled_range() {
    assert!(
        MeasurementPlan::new(SceneConfig::compact(), KineticDefaults::default(), 5.0, 0).is_err()
    );
    assert!(
        MeasurementPlan::new(SceneConfig::compact(), KineticDefaults::default(), 700.0, 0).is_err()
    );
}

#[test]
fn threshold_matches_gaussian_approximation() {
    let z = Normal::new(0.0, 1.0).unwrap();
    for &(s2, p, l) in &[(0.07, 0.01, 1210usize), (0.2, 1e-3, 660), (1.0, 0.2, 30)] {
        let cfg = DropDetectorConfig::new(s2, p);
        let lf = l as f64;
        let expect = s2 * (lf + (2.0 * lf).sqrt() * z.inverse_cdf(1.0 - p));
        let got = dropdetect::threshold(&cfg, l).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect, "{got} vs {expect}");
    }
    assert!(dropdetect::threshold(&DropDetectorConfig::new(1.0, 0.01), 29).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn statistic_is_centred_sum_of_squares(x in proptest::collection::vec(-50.0f64..50.0, 2..200)) {
        let n = x.len() as f64;
        let s: f64 = x.iter().sum();
        let s2: f64 = x.iter().map(|v| v * v).sum();
        let expect = s2 - s * s / n;
        let got = dropdetect::test_statistic(&x).unwrap();
        prop_assert!((got - expect).abs() <= 1e-9 * s2.max(1.0));
    }

    #[test]
    fn debounce_reports_start_of_first_long_run(
        above in proptest::collection::vec(any::<bool>(), 1..60), m in 1usize..5,
    ) {
        let cfg = DropDetectorConfig { min_consecutive: m, ..DropDetectorConfig::new(1.0, 0.01) };
        let mut det = DropDetector::new(&cfg, 40).unwrap();
        let quiet = vec![0.0; 40];
        let loud: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 10.0 } else { -10.0 }).collect();
        for (n, &a) in above.iter().enumerate() {
            det.push(n, if a { &loud } else { &quiet }).unwrap();
        }
        let mut expect = None;
        let mut run = 0;
        for (n, &a) in above.iter().enumerate() {
            run = if a { run + 1 } else { 0 };
            if run == m {
                expect = Some(n + 1 - m);
                break;
            }
        }
        prop_assert_eq!(det.detected(), expect);
    }
}
