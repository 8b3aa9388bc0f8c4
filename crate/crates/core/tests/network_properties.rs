use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tangent_align::spectral::*;
use tangent_align::tangent::*;
use tangent_align::trajectory::TrainingTrace;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn psd(n: usize, rank: usize, seed: u64) -> KernelMatrix {
    let a = gaussian_matrix(n, rank, seed);
    KernelMatrix::from_matrix(&a * a.transpose()).unwrap()
}

fn arch_strategy() -> impl Strategy<Value = MlpArch> {
    (1usize..4, 2usize..8, 2usize..4, 1usize..4, any::<bool>(), any::<bool>()).prop_map(
        |(input, width, depth, output, relu, bias)| {
            let mut widths = vec![input];
            widths.extend(std::iter::repeat_n(width, depth - 1));
            widths.push(output);
            let act = if relu { Activation::Relu } else { Activation::Tanh };
            MlpArch::new(widths, act, bias).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cka_range_and_scale_invariance(n in 3usize..10, r1 in 1usize..6, r2 in 1usize..6, seed in any::<u64>(), alpha in 1e-3f64..1e3) {
        let a = psd(n, r1, seed);
        let b = psd(n, r2, seed ^ 1);
        let v = cka(&a, &b).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        let scaled = cka(&a.scaled(alpha), &b).unwrap();
        prop_assert!((v - scaled).abs() <= 1e-10);
        prop_assert!((cka(&a, &a).unwrap() - 1.0).abs() <= 1e-10);
        prop_assert!((v - cka(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn effective_rank_bounds(n in 2usize..12, r in 1usize..8, seed in any::<u64>()) {
        let k = psd(n, r, seed);
        let e = effective_rank(k.spectrum()).unwrap();
        prop_assert!(e >= 1.0 - 1e-12);
        prop_assert!(e <= r.min(n) as f64 + 1e-9);
    }

    #[test]
    fn trace_ratios_monotone(n in 2usize..12, seed in any::<u64>()) {
        let k = psd(n, n, seed);
        let ks: Vec<usize> = (1..=n).collect();
        let t = trace_ratios(k.spectrum(), &ks).unwrap();
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        prop_assert!((t[n - 1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spectral_duality(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let phi = gaussian_matrix(rows, cols, seed);
        let outer = sym_eigenvalues(&(&phi * phi.transpose())).unwrap();
        let inner = sym_eigenvalues(&(phi.transpose() * &phi)).unwrap();
        let top = outer.max();
        for j in 0..rows.min(cols) {
            let (a, b) = (outer.values()[j], inner.values()[j]);
            prop_assert!((a - b).abs() <= 1e-10 * top);
        }
    }

    #[test]
    fn layer_kernels_sum_to_total(arch in arch_strategy(), n in 1usize..6, seed in any::<u64>()) {
        let params = mlp_init(&arch, seed);
        let x = gaussian_matrix(n, arch.input_dim(), seed ^ 2);
        let total = tangent_kernel_direct(&params, &x).unwrap();
        let layers = layerwise_kernels(&params, &x).unwrap();
        let sum = layers.iter().skip(1).fold(layers[0].entries().clone(), |acc, k| acc + k.entries());
        let scale = total.entries().amax().max(1.0);
        prop_assert!((sum - total.entries()).amax() <= 1e-10 * scale);
    }

    #[test]
    fn factored_kernel_matches_features(arch in arch_strategy(), n in 1usize..6, seed in any::<u64>()) {
        let params = mlp_init(&arch, seed);
        let x = gaussian_matrix(n, arch.input_dim(), seed ^ 3);
        let phi = tangent_features(&params, &x).unwrap();
        let direct = tangent_kernel_direct(&params, &x).unwrap();
        let via = tangent_kernel(&phi);
        let scale = via.entries().amax().max(1.0);
        prop_assert!((direct.entries() - via.entries()).amax() <= 1e-10 * scale);
        prop_assert!((tangent_feature_norm(&params, &x).unwrap() - phi.frobenius_norm()).abs() <= 1e-10 * phi.frobenius_norm().max(1.0));
    }

    #[test]
    fn centered_features_give_centered_kernel(arch in arch_strategy(), n in 2usize..6, seed in any::<u64>()) {
        let params = mlp_init(&arch, seed);
        let x = gaussian_matrix(n, arch.input_dim(), seed ^ 4);
        let phi = tangent_features(&params, &x).unwrap();
        let from_features = tangent_kernel(&center_features(&phi, Centering::Joint).unwrap());
        let from_kernel = center_kernel(&tangent_kernel(&phi));
        let scale = from_kernel.entries().amax().max(1.0);
        prop_assert!((from_features.entries() - from_kernel.entries()).amax() <= 1e-8 * scale);
    }

    #[test]
    fn features_match_finite_differences(arch in arch_strategy(), n in 1usize..4, seed in any::<u64>()) {
        // Zero biases put whole layers exactly on the ReLU kink; jitter first.
        let jitter = gaussian_matrix(arch.num_params(), 1, seed ^ 7).column(0).into_owned();
        let params = mlp_init(&arch, seed).offset(&jitter, 0.1).unwrap();
        let x = gaussian_matrix(n, arch.input_dim(), seed ^ 5);
        let phi = tangent_features(&params, &x).unwrap();
        let v = gaussian_matrix(params.num_params(), 1, seed ^ 6).column(0).into_owned();
        let v = &v / v.norm();
        let eps = 1e-5;
        let plus = forward(&params.offset(&v, eps).unwrap(), &x).unwrap();
        let minus = forward(&params.offset(&v, -eps).unwrap(), &x).unwrap();
        let fd = DVector::from_iterator(plus.len(), (0..n).flat_map(|i| {
            let (p, m) = (&plus, &minus);
            (0..p.ncols()).map(move |y| (p[(i, y)] - m[(i, y)]) / (2.0 * eps))
        }));
        let exact = phi.matrix() * &v;
        prop_assert!((&fd - &exact).amax() <= 1e-4 * exact.amax().max(1.0));
    }

    #[test]
    fn complexity_is_additive_and_monotone(
        a in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..20),
        b in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..20),
    ) {
        let mut first = TrainingTrace::new();
        let mut prev = 0.0;
        for (t, &(u, f)) in a.iter().enumerate() {
            first.record(t, u, f).unwrap();
            let c = first.complexity();
            prop_assert!(c >= prev);
            prev = c;
        }
        let mut second = TrainingTrace::new();
        for (t, &(u, f)) in b.iter().enumerate() {
            second.record(a.len() + t, u, f).unwrap();
        }
        let (ca, cb) = (first.complexity(), second.complexity());
        let joined = first.concat(second).unwrap();
        prop_assert!((joined.complexity() - (ca + cb)).abs() <= 1e-12 * (ca + cb).max(1.0));
    }
}
