use proptest::prelude::*;
use tangent_align::datasets::*;

fn hash_inputs(ds: &LabeledDataset) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in ds.inputs().iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn disk_is_deterministic_and_consistent(n in 1usize..300, seed in any::<u64>()) {
        let a = disk_dataset(n, seed).unwrap();
        prop_assert_eq!(&a, &disk_dataset(n, seed).unwrap());
        prop_assert_ne!(hash_inputs(&a), hash_inputs(&disk_dataset(n, seed.wrapping_add(1)).unwrap()));
        let Labels::Binary(y) = a.labels() else { unreachable!() };
        for i in 0..n {
            let (u, v) = (a.inputs()[(i, 0)], a.inputs()[(i, 1)]);
            let inside = (u * u + v * v).sqrt() <= (2.0 / std::f64::consts::PI).sqrt();
            prop_assert_eq!(y[i], if inside { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn corruption_touches_only_chosen_rows(per_class in 1usize..40, classes in 2usize..6, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let ds = gaussian_clusters(per_class, classes, 3, 2.0, 0.5, seed).unwrap();
        let bad = corrupt_labels(&ds, frac, seed ^ 1).unwrap();
        let n = ds.len();
        prop_assert_eq!(bad.meta().corrupted.len(), (frac * n as f64).floor() as usize);
        prop_assert_eq!(bad.inputs(), ds.inputs());
        let (Labels::Classes { indices: a, .. }, Labels::Classes { indices: b, .. }) = (ds.labels(), bad.labels()) else {
            unreachable!()
        };
        for i in 0..n {
            if bad.meta().corrupted.binary_search(&i).is_err() {
                prop_assert_eq!(a[i], b[i]);
            }
        }
        prop_assert_eq!(&bad, &corrupt_labels(&ds, frac, seed ^ 1).unwrap());
    }

    #[test]
    fn clusters_are_deterministic(per_class in 1usize..20, classes in 2usize..5, dim in 1usize..6, seed in any::<u64>()) {
        let a = gaussian_clusters(per_class, classes, dim, 3.0, 1.0, seed).unwrap();
        prop_assert_eq!(&a, &gaussian_clusters(per_class, classes, dim, 3.0, 1.0, seed).unwrap());
        prop_assert_ne!(hash_inputs(&a), hash_inputs(&gaussian_clusters(per_class, classes, dim, 3.0, 1.0, seed ^ 1).unwrap()));
    }

    #[test]
    fn grid_1d_is_equally_spaced(n in 2usize..200, lo in -10.0f64..10.0, width in 1e-3f64..10.0) {
        let g = grid_1d(n, lo, lo + width).unwrap();
        prop_assert_eq!(g[0], lo);
        prop_assert_eq!(g[n - 1], lo + width);
        let h = width / (n - 1) as f64;
        for i in 1..n {
            prop_assert!((g[i] - g[i - 1] - h).abs() <= 1e-12 * (1.0 + lo.abs() + width));
        }
    }
}
