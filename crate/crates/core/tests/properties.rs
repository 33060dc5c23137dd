use fpca_core::charfun::{
    cumulants_from_moments, empirical_cf, nd_expansion, reweighted_mean_cov, second_cf_derivative_tensor, CfGuard,
    SampleSet,
};
use fpca_core::gmm::recover_weights;
use fpca_core::linalg::{
    complex_symmetric_eig_blocked, general_eig, khatri_rao_power, match_columns, multilinear_power, subsets_lex,
    ComplexMatrix, ComplexSymmetricTensor, RealMatrix, C64,
};
use fpca_core::synth::{
    gaussian_noise, kr_condition_experiment, random_mixing_matrix, sample_ica, IcaModel, MixingKind, SourceKind,
    SourceSpec, MAX_ORACLE_ORDER,
};
use fpca_core::tensor_decomp::{tensor_decompose, DecomposeOptions, RankSpec, TensorPair};
use nalgebra::DVector;
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn real_matrix(rows: usize, cols: usize) -> impl Strategy<Value = RealMatrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| RealMatrix::from_vec(rows, cols, v))
}

/// A symmetric tensor with arbitrary canonical entries.
fn tensor() -> impl Strategy<Value = ComplexSymmetricTensor> {
    (1usize..4, prop::sample::select(vec![2usize, 4])).prop_flat_map(|(n, d)| {
        let count = ComplexSymmetricTensor::zeros(n, d).canonical_entries().len();
        prop::collection::vec(c64(), count)
            .prop_map(move |e| ComplexSymmetricTensor::from_canonical(n, d, e).unwrap())
    })
}

fn samples(n: usize, rows: usize) -> impl Strategy<Value = SampleSet> {
    prop::collection::vec(-1.5..1.5f64, n * rows).prop_map(move |v| SampleSet::new(n, v).unwrap())
}

fn source_spec() -> impl Strategy<Value = SourceSpec> {
    prop_oneof![
        Just(SourceKind::Rademacher),
        (-2.0..-0.1f64, 0.1..2.0f64).prop_map(|(a, b)| SourceKind::Uniform { a, b }),
        (0.2..2.0f64).prop_map(|b| SourceKind::Laplace { b }),
        (0.05..0.95f64).prop_map(|p| SourceKind::BernoulliCentered { p }),
        (0.2..2.0f64).prop_map(|sigma| SourceKind::Gaussian { sigma }),
        Just(SourceKind::Discrete { values: vec![-1.0, 0.5, 2.0], probs: vec![0.3, 0.5, 0.2] }),
    ]
    .prop_flat_map(|k| (Just(k), 0.5..2.0f64))
    .prop_map(|(k, scale)| SourceSpec::new(k).unwrap().scaled(scale))
}

/// `(A, mu, lambda)` with unit columns and ratios `mu_i / lambda_i` at least 1 apart.
fn exact_triples(n: usize, d: usize, m: usize) -> impl Strategy<Value = (RealMatrix, Vec<C64>, Vec<C64>)> {
    (any::<u64>(), prop::collection::vec((0.5..2.0f64, 0.0..std::f64::consts::TAU), m)).prop_map(move |(seed, lam)| {
        let (a, _) = random_mixing_matrix(n, m, MixingKind::GaussianColumns, d, seed, 0.02).unwrap();
        let lambda: Vec<C64> = lam.iter().map(|&(r, t)| C64::from_polar(r, t)).collect();
        let mu = lambda.iter().enumerate().map(|(j, l)| l * C64::new(1.0 + j as f64, 0.3 * j as f64)).collect();
        (a, mu, lambda)
    })
}

fn decompose(pair: &TensorPair, m: usize) -> RealMatrix {
    tensor_decompose(pair, RankSpec::Known(m), &DecomposeOptions::default()).unwrap().0
}

proptest! {
    #[test]
    fn tensor_entries_ignore_index_order(t in tensor(), seed in any::<u64>()) {
        let (n, d) = (t.dim(), t.order());
        let idx: Vec<usize> = (0..d).map(|k| ((seed >> (4 * k)) as usize) % n).collect();
        let mut rev = idx.clone();
        rev.reverse();
        let mut rot = idx.clone();
        rot.rotate_left(1);
        prop_assert_eq!(t.get(&idx), t.get(&rev));
        prop_assert_eq!(t.get(&idx), t.get(&rot));
    }

    #[test]
    fn flatten_round_trip_is_exact(t in tensor()) {
        let f = t.flatten().unwrap();
        prop_assert_eq!(&f, &f.transpose());
        let back = ComplexSymmetricTensor::unflatten(&f, t.dim(), t.order()).unwrap();
        prop_assert_eq!(back.canonical_entries(), t.canonical_entries());
    }

    #[test]
    fn khatri_rao_powers_compose(a in real_matrix(3, 4), d1 in 1usize..3, d2 in 1usize..3) {
        let whole = khatri_rao_power(&a, d1 + d2);
        let (p1, p2) = (khatri_rao_power(&a, d1), khatri_rao_power(&a, d2));
        for j in 0..a.ncols() {
            let expected = p1.column(j).kronecker(&p2.column(j));
            prop_assert!((whole.column(j) - &expected).amax() <= 1e-12 * expected.amax().max(1.0));
            let norm = a.column(j).norm().powi((d1 + d2) as i32);
            prop_assert!((whole.column(j).norm() - norm).abs() <= 1e-12 * norm.max(1.0));
        }
    }

    #[test]
    fn multilinear_rows_are_khatri_rao_rows(a in real_matrix(5, 3), d in 1usize..5) {
        let ml = multilinear_power(&a, d).unwrap();
        let kr = khatri_rao_power(&a, d);
        for (r, s) in subsets_lex(5, d).iter().enumerate() {
            let row = s.iter().fold(0, |acc, &i| acc * 5 + i);
            prop_assert_eq!(ml.row(r), kr.row(row));
        }
    }

    #[test]
    fn general_eig_residuals_within_bound(v in prop::collection::vec(c64(), 16)) {
        let m = ComplexMatrix::from_vec(4, 4, v);
        if let Ok(e) = general_eig(&m, 1e-8) {
            for (k, r) in e.residuals.iter().enumerate() {
                let direct = (&m * e.vectors.column(k) - e.vectors.column(k) * e.values[k]).norm();
                prop_assert!(*r <= e.residual_bound);
                prop_assert!(direct <= e.residual_bound);
            }
        }
    }

    #[test]
    fn blocked_eig_matches_general(seed in any::<u64>(), im in prop::collection::vec(-1.0..1.0f64, 4)) {
        let q = fpca_core::synth::random_orthogonal(4, seed);
        let diag: Vec<C64> = im.iter().enumerate().map(|(k, &b)| C64::new(k as f64, b)).collect();
        let qc = q.map(|x| C64::new(x, 0.0));
        let sigma = &qc * ComplexMatrix::from_diagonal(&DVector::from_vec(diag.clone())) * qc.transpose();
        let blocked = complex_symmetric_eig_blocked(&sigma, 0.25, 1e-9).unwrap();
        let general = general_eig(&sigma, 1e-9).unwrap();
        let key = |v: &Vec<C64>| {
            let mut v = v.clone();
            v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            v
        };
        for (a, b) in key(&blocked.values).iter().zip(&key(&general.values)) {
            prop_assert!((a - b).norm() <= 1e-8);
        }
    }

    #[test]
    fn match_cost_ignores_permutation_and_sign(a in real_matrix(3, 4), b in real_matrix(3, 4), seed in any::<u64>()) {
        let base = match_columns(&a, &b).unwrap().cost;
        let perm = [(seed % 4) as usize, ((seed + 1) % 4) as usize, ((seed + 2) % 4) as usize, ((seed + 3) % 4) as usize];
        let shuffled = RealMatrix::from_fn(3, 4, |i, j| {
            let sign = if (seed >> j) & 1 == 1 { -1.0 } else { 1.0 };
            sign * b[(i, perm[j])]
        });
        let flipped = RealMatrix::from_fn(3, 4, |i, j| if (seed >> (j + 8)) & 1 == 1 { -a[(i, j)] } else { a[(i, j)] });
        prop_assert!((match_columns(&a, &shuffled).unwrap().cost - base).abs() <= 1e-9);
        prop_assert!((match_columns(&flipped, &b).unwrap().cost - base).abs() <= 1e-9);
    }

    #[test]
    fn empirical_cf_bounded_and_conjugate(s in samples(3, 40), u in prop::collection::vec(-3.0..3.0f64, 3)) {
        let phi = empirical_cf(&s, &u);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        prop_assert!(phi.norm() <= 1.0 + 1e-12);
        prop_assert!((empirical_cf(&s, &neg) - phi.conj()).norm() <= 1e-12);
    }

    #[test]
    fn derivative_tensor_symmetric_and_convention(s in samples(2, 50), u in prop::collection::vec(-0.5..0.5f64, 2)) {
        let guard = CfGuard::default();
        if let Ok(t4) = second_cf_derivative_tensor(&s, &u, 4, &guard) {
            let f = t4.value.flatten().unwrap();
            prop_assert!((&f - f.transpose()).camax() <= 1e-12);
            prop_assert_eq!(t4.value.get(&[0, 1, 1, 0]), t4.value.get(&[1, 0, 0, 1]));
            prop_assert!(t4.cf_modulus <= 1.0 + 1e-12);
            let t2 = second_cf_derivative_tensor(&s, &u, 2, &guard).unwrap();
            let (_, sigma) = reweighted_mean_cov(&s, &u, &guard).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    prop_assert!((sigma[(a, b)] + t2.value.get(&[a, b])).norm() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn decomposition_invariant_to_common_scale((a, mu, lambda) in exact_triples(3, 4, 5), c in c64()) {
        prop_assume!(c.norm() > 0.1);
        let pair = TensorPair::from_components(&a, &mu, &lambda, 4).unwrap();
        let scaled = TensorPair::new(pair.mu.scale(c), pair.lambda.scale(c), pair.rank).unwrap();
        let base = decompose(&pair, 5);
        prop_assert!(match_columns(&base, &decompose(&scaled, 5)).unwrap().max_error <= 1e-8);
        let mu_only = TensorPair::new(pair.mu.scale(C64::new(c.norm() * 3.0, 0.0)), pair.lambda.clone(), pair.rank).unwrap();
        prop_assert!(match_columns(&base, &decompose(&mu_only, 5)).unwrap().max_error <= 1e-8);
    }

    #[test]
    fn decomposition_equivariant_to_triple_order((a, mu, lambda) in exact_triples(3, 4, 4), shift in 1usize..4) {
        let perm: Vec<usize> = (0..4).map(|j| (j + shift) % 4).collect();
        let pa = RealMatrix::from_fn(3, 4, |i, j| a[(i, perm[j])]);
        let pmu: Vec<C64> = perm.iter().map(|&j| mu[j]).collect();
        let plam: Vec<C64> = perm.iter().map(|&j| lambda[j]).collect();
        let base = decompose(&TensorPair::from_components(&a, &mu, &lambda, 4).unwrap(), 4);
        let permuted = decompose(&TensorPair::from_components(&pa, &pmu, &plam, 4).unwrap(), 4);
        prop_assert!(match_columns(&base, &permuted).unwrap().max_error <= 1e-8);
        prop_assert!(match_columns(&a, &base).unwrap().max_error <= 1e-8);
    }

    #[test]
    fn recovered_weights_on_simplex(t in real_matrix(4, 3)) {
        if let Ok(fit) = recover_weights(&t) {
            prop_assert!(fit.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn cumulants_agree_with_moments(spec in source_spec()) {
        let k = MAX_ORACLE_ORDER.min(8);
        let raw = spec.moments(k).unwrap();
        let via = cumulants_from_moments(&raw, k).unwrap();
        for j in 1..=k {
            let direct = spec.cumulant(j).unwrap();
            // order-j cumulants live on the scale m_2^{j/2}
            let scale = raw[1].powf(j as f64 / 2.0).max(1.0);
            prop_assert!((via[j - 1] - direct).abs() <= 1e-12 * scale, "order {}: {} vs {}", j, via[j - 1], direct);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_is_deterministic_and_noise_is_additive(seed in any::<u64>(), count in 1usize..5000, noise in 0.05..2.0f64) {
        let (a, _) = random_mixing_matrix(2, 3, MixingKind::GaussianColumns, 4, seed, 0.01).unwrap();
        let sources = vec![SourceSpec::rademacher(), SourceSpec::unit_uniform(), SourceSpec::gaussian(1.0)];
        let cov = RealMatrix::from_row_slice(2, 2, &[noise, 0.1, 0.1, 0.5]);
        let clean = IcaModel::new(&a, sources.clone(), None).unwrap();
        let noisy = IcaModel::new(&a, sources, Some(&cov)).unwrap();
        let x = sample_ica(&noisy, count, seed).unwrap();
        let again = sample_ica(&noisy, count, seed).unwrap();
        prop_assert_eq!(x.as_slice(), again.as_slice());
        let s = sample_ica(&clean, count, seed).unwrap();
        let e = gaussian_noise(&cov, count, seed).unwrap();
        for ((x, s), e) in x.as_slice().iter().zip(s.as_slice()).zip(e.as_slice()) {
            prop_assert_eq!(*x, s + e);
        }
    }

    #[test]
    fn kr_columns_have_exact_norm(n in 9usize..12, seed in any::<u64>()) {
        let root = ((n * (n - 1) * (n - 2) / 6) as f64).sqrt();
        for t in kr_condition_experiment(n, 3, 2, seed).unwrap() {
            prop_assert_eq!(t.min_column_norm, root);
            prop_assert_eq!(t.max_column_norm, root);
        }
    }
}

#[test]
fn expansion_coefficients_bounded() {
    for d in 1..=8usize {
        let bound = (1..d as i64).product::<i64>() << (d - 1);
        let e = nd_expansion(d).unwrap();
        assert!(e.abs_coefficient_sum() <= bound, "d = {d}: {} > {bound}", e.abs_coefficient_sum());
    }
}
