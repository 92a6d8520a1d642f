use glucokin_core::modeseek::{
    self, mean_shift_step, medoid_shift_step, prune_modes, ModeSeekConfig, Representative,
    WeightVector,
};
use glucokin_core::sparse::{self, SubsetStop};
use glucokin_core::{GaussianKernel, Points, Variant};
use proptest::prelude::*;

/// Up to three clusters of 1-d or 2-d points.
fn dataset() -> impl Strategy<Value = Points> {
    (1usize..=2, 8usize..=48, 1usize..=3, any::<u64>()).prop_map(|(dim, n, blobs, seed)| {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let centres: Vec<Vec<f64>> = (0..blobs)
            .map(|_| (0..dim).map(|_| 10.0 * next()).collect())
            .collect();
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            let c = &centres[i % blobs];
            for v in c {
                data.push(v + next() - 0.5);
            }
        }
        Points::new(dim, data).unwrap()
    })
}

fn kernel(dim: usize, h: f64) -> GaussianKernel {
    GaussianKernel::with_bandwidths(vec![h; dim]).unwrap()
}

fn recorded(variant: Variant) -> ModeSeekConfig {
    ModeSeekConfig {
        record: true,
        ..ModeSeekConfig::new(variant)
    }
}

/// Plain Gaussian mean shift written out in full.
fn oracle_mean_shift(data: &Points, h: f64, start: &[f64]) -> Vec<f64> {
    let mut x = start.to_vec();
    for _ in 0..10_000 {
        let mut num = vec![0.0; x.len()];
        let mut den = 0.0;
        for p in data.iter() {
            let d2: f64 = p
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / (h * h);
            let w = (-0.5 * d2).exp();
            den += w;
            for (n, v) in num.iter_mut().zip(p) {
                *n += w * v;
            }
        }
        let next: Vec<f64> = num.iter().map(|n| n / den).collect();
        let step: f64 = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = next;
        if step < 1e-12 {
            break;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_variant_ascends_density(data in dataset(), h in 0.3f64..2.0) {
        let k = kernel(data.dim(), h);
        for v in Variant::ALL {
            let res = modeseek::run(&data, &k, &recorded(v)).unwrap();
            for traj in res.densities.as_ref().unwrap() {
                for w in traj.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-12, "{v:?}: {} after {}", w[1], w[0]);
                }
            }
        }
    }

    #[test]
    fn medoid_paths_are_cycle_free_and_stay_in_data(data in dataset(), h in 0.3f64..2.0) {
        let k = kernel(data.dim(), h);
        for v in Variant::ALL.into_iter().filter(|v| v.is_medoid()) {
            let res = modeseek::run(&data, &k, &recorded(v)).unwrap();
            prop_assert_eq!(res.cycles, 0);
            let idx = res.mode_indices.as_ref().unwrap();
            for (i, path) in res.paths.as_ref().unwrap().iter().enumerate() {
                let mut seen = path.clone();
                seen.sort_unstable();
                seen.dedup();
                prop_assert_eq!(seen.len(), path.len());
                prop_assert_eq!(path[0], i);
                prop_assert_eq!(*path.last().unwrap(), idx[i]);
                prop_assert_eq!(res.modes.point(i), data.point(idx[i]));
            }
        }
    }

    #[test]
    fn full_subset_reproduces_full_variants(data in dataset(), h in 0.3f64..2.0) {
        let k = kernel(data.dim(), h);
        for (sparse_v, full_v) in [(Variant::Ssms, Variant::Ms), (Variant::Ssmeds, Variant::Meds)] {
            let cfg = ModeSeekConfig {
                sparse: SubsetStop::Fixed(data.len()),
                ..ModeSeekConfig::new(sparse_v)
            };
            let a = modeseek::run(&data, &k, &cfg).unwrap();
            let b = modeseek::run(&data, &k, &ModeSeekConfig::new(full_v)).unwrap();
            for (x, y) in a.modes.as_slice().iter().zip(b.modes.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn sparse_coefficients_form_a_distribution(data in dataset(), h in 0.3f64..2.0, t in 1e-4f64..1e-1) {
        let k = kernel(data.dim(), h);
        let b = sparse::select_subset(&data, &WeightVector::uniform(data.len()), &k, SubsetStop::Threshold(t)).unwrap();
        prop_assert!(b.alphas.iter().all(|&a| a > 0.0));
        prop_assert!((b.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(b.nu_trace.windows(2).all(|w| w[1] >= w[0]));
        let mut idx = b.indices.clone();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), b.indices.len());
    }

    #[test]
    fn pruned_centres_are_separated_and_cover_every_datum(data in dataset(), h in 0.3f64..2.0) {
        let k = kernel(data.dim(), h);
        let res = modeseek::run(&data, &k, &ModeSeekConfig::new(Variant::Ms)).unwrap();
        for rep in [Representative::Mean, Representative::Medoid] {
            let c = prune_modes(&res.modes, &k, rep).unwrap();
            prop_assert_eq!(c.labels.len(), data.len());
            prop_assert_eq!(c.sizes.iter().sum::<usize>(), data.len());
            for (j, &size) in c.sizes.iter().enumerate() {
                prop_assert_eq!(c.labels.iter().filter(|&&l| l == j).count(), size);
            }
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    let d2: f64 = c.centers.point(a).iter().zip(c.centers.point(b))
                        .map(|(x, y)| (x - y) * (x - y)).sum();
                    prop_assert!(d2.sqrt() > h);
                }
            }
        }
    }
}

#[test]
fn mean_shift_modes_match_direct_iteration() {
    let data = Points::from_scalars(&[
        0.1, 0.3, -0.2, 0.05, 0.4, 5.0, 5.2, 4.9, 5.3, 5.1, 9.8, 10.1, 10.0,
    ])
    .unwrap();
    let h = 0.7;
    let k = kernel(1, h);
    let cfg = ModeSeekConfig {
        tol: Some(1e-12),
        max_iters: 10_000,
        ..ModeSeekConfig::new(Variant::Ms)
    };
    let res = modeseek::run(&data, &k, &cfg).unwrap();
    for i in 0..data.len() {
        let expect = oracle_mean_shift(&data, h, data.point(i));
        assert!(
            (res.modes.point(i)[0] - expect[0]).abs() < 1e-8,
            "datum {i}"
        );
    }
}

#[test]
fn medoid_step_minimises_weighted_spread() {
    let data = Points::new(
        2,
        vec![
            0.0, 0.0, 1.0, 0.2, 0.4, 1.1, 2.5, 2.4, 0.9, 0.8, 3.0, 0.1, 1.6, 1.4,
        ],
    )
    .unwrap();
    let h = 1.1;
    let k = kernel(2, h);
    let w = WeightVector::uniform(data.len());
    for x in data.iter() {
        let got = medoid_shift_step(x, &data, &w, &k).unwrap();
        // argmin over data of Σ_i g_i ‖y - x_i‖², g_i from the current point
        let g: Vec<f64> = data
            .iter()
            .map(|p| {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * (-0.5 * d2 / (h * h)).exp()
            })
            .collect();
        let cost = |y: &[f64]| -> f64 {
            data.iter()
                .zip(&g)
                .map(|(p, gi)| gi * p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum()
        };
        let best = (0..data.len())
            .min_by(|&a, &b| cost(data.point(a)).total_cmp(&cost(data.point(b))))
            .unwrap();
        assert_eq!(got, best);
        let m = mean_shift_step(x, &data, &w, &k).unwrap();
        assert!(cost(&m) <= cost(data.point(best)) + 1e-12);
    }
}
