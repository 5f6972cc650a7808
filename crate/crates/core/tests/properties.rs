use nalgebra::DMatrix;
use proptest::prelude::*;

use pairspec::kernel::{
    build_gram, close_under_swap, eval_pairwise, normalize_pairwise, BaseKernel, Construction, KernelSpec, PairSample,
    PointSet, SwapMode, Transform,
};
use pairspec::linalg::{eigen_residual, symmetric_eigen};
use pairspec::regression::{
    bias_bound_check, bias_factors, krr_fit, krr_predict, regularization_bias, Symmetry, TargetFunction,
    TransformSpectra,
};
use pairspec::spectral::{
    check_majorization, effective_dimension, eigh_psd_matrix, permutation_matrix, project_gram, ProjectionMode,
};
use pairspec::testbed::{consistency_gap, gen_points, gen_target, TargetKind};

fn base_kernel() -> impl Strategy<Value = BaseKernel> {
    prop_oneof![
        Just(BaseKernel::Linear),
        (1u32..4, 0.0..2.0f64).prop_map(|(degree, offset)| BaseKernel::Polynomial { degree, offset }),
        (0.05..5.0f64).prop_map(|gamma| BaseKernel::Gaussian { gamma }),
    ]
}

fn construction() -> impl Strategy<Value = Construction> {
    prop_oneof![Just(Construction::Kronecker), Just(Construction::Pointwise)]
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d)
}

fn symmetric_matrix(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
            let m = DMatrix::from_vec(n, n, v);
            (&m + m.transpose()) * 0.5
        })
    })
}

/// Random PSD matrix `B·Bᵀ / k` of size `n` and rank at most `k`.
fn psd_matrix(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(n, k)| {
        prop::collection::vec(-1.0..1.0f64, n * k).prop_map(move |v| {
            let b = DMatrix::from_vec(n, k, v);
            let m = &b * b.transpose() / k as f64;
            (&m + m.transpose()) * 0.5
        })
    })
}

/// Swap-closed sample of `m` random unordered off-diagonal pairs over `n_v` points.
fn closed_sample(n_v: usize, m: usize, seed: u64) -> PairSample {
    use rand::seq::index;
    use rand::SeedableRng;
    let all: Vec<(usize, usize)> = (0..n_v).flat_map(|i| (i + 1..n_v).map(move |j| (i, j))).collect();
    let mut chosen = index::sample(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), all.len(), m.min(all.len())).into_vec();
    chosen.sort_unstable();
    let half: Vec<_> = chosen.iter().map(|&k| all[k]).collect();
    let sample = PairSample::unlabeled(half).unwrap();
    close_under_swap(&sample, SwapMode::Unlabeled).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_matches_reference_eigensolver(m in symmetric_matrix(12)) {
        let ours = symmetric_eigen(&m).unwrap();
        let mut reference: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        let scale = m.norm().max(1.0);
        for (a, b) in ours.values.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
        }
        prop_assert!(ours.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(eigen_residual(&m, &ours.values, &ours.vectors) <= 1e-12 * scale);
        let gram = ours.vectors.transpose() * &ours.vectors;
        prop_assert!((gram - DMatrix::identity(m.nrows(), m.nrows())).amax() <= 1e-12);
        let again = symmetric_eigen(&m).unwrap();
        prop_assert_eq!(again.values, ours.values);
    }

    #[test]
    fn transforms_decompose_and_have_exact_symmetry(
        base in base_kernel(), construction in construction(),
        v in point(2), vp in point(2), w in point(2), wp in point(2),
    ) {
        let spec = KernelSpec::new(base, construction, Transform::None).unwrap();
        let at = |t: Transform, a: (&[f64], &[f64]), b: (&[f64], &[f64])| eval_pairwise(&spec.with_transform(t), a, b).unwrap();
        let (a, b) = ((&v[..], &vp[..]), (&w[..], &wp[..]));
        let swapped = (&vp[..], &v[..]);
        let s = at(Transform::Symmetric, a, b);
        let anti = at(Transform::Antisymmetric, a, b);
        let pi = at(Transform::PermutationInvariant, a, b);
        prop_assert!((s + anti - pi).abs() <= 1e-12 * pi.abs().max(1.0));
        prop_assert_eq!(at(Transform::Symmetric, swapped, b), s);
        prop_assert_eq!(at(Transform::Antisymmetric, swapped, b), -anti);
        prop_assert_eq!(at(Transform::Antisymmetric, a, (&wp[..], &w[..])), -anti);
        let both = ((&vp[..], &v[..]), (&wp[..], &w[..]));
        prop_assert!((at(Transform::PermutationInvariant, both.0, both.1) - pi).abs() <= 1e-12 * pi.abs().max(1.0));
        prop_assert_eq!(at(Transform::Permuted, a, b), at(Transform::None, both.0, both.1));
    }

    #[test]
    fn gram_matrices_are_psd_for_every_transform(
        base in base_kernel(), construction in construction(), n_v in 2usize..6, seed in any::<u64>(),
    ) {
        let points = gen_points(n_v, 2, seed).unwrap();
        let sample = PairSample::all_ordered(n_v);
        for t in [Transform::None, Transform::PermutationInvariant, Transform::Symmetric, Transform::Antisymmetric] {
            let spec = KernelSpec::new(base, construction, t).unwrap();
            let g = build_gram(&spec, &points, &sample).unwrap();
            prop_assert!(eigh_psd_matrix(&g.values).is_ok());
        }
    }

    #[test]
    fn projections_are_complementary_and_psd_preserving(m in psd_matrix(8), pairs in 1usize..5) {
        // Pad or trim the matrix to the size of a swap-closed sample.
        let sample = closed_sample(6, pairs, 1);
        let n = sample.len();
        let g = DMatrix::from_fn(n, n, |i, j| if i < m.nrows() && j < m.nrows() { m[(i, j)] } else if i == j { 1.0 } else { 0.0 });
        let proj = permutation_matrix(&sample).unwrap();
        let (s, a) = (proj.s_matrix(), proj.a_matrix());
        prop_assert_eq!(&s + &a, DMatrix::identity(n, n));
        prop_assert!((&s * &s - &s).amax() <= 1e-15);
        for mode in [ProjectionMode::Symmetric, ProjectionMode::Antisymmetric, ProjectionMode::PermutationInvariant] {
            let p = project_gram(&g, &proj, mode).unwrap();
            prop_assert!(eigh_psd_matrix(&p).is_ok());
        }
    }

    #[test]
    fn averaging_strictly_raises_effective_dimension(
        s in prop::collection::vec(0.0..2.0f64, 2..20), mix in 0.05..0.95f64, shift in 1usize..19, reg in 1e-4..10.0f64,
    ) {
        // r = mix·s + (1−mix)·π(s) is a doubly-stochastic image of s, so r ≺ s.
        let n = s.len();
        let r: Vec<f64> = (0..n).map(|i| mix * s[i] + (1.0 - mix) * s[(i + shift) % n]).collect();
        let trace: f64 = s.iter().sum();
        let rep = check_majorization(&r, &s, 1e-12 * trace.max(1.0)).unwrap();
        prop_assert!(rep.majorized);
        let (nr, ns) = (effective_dimension(&r, reg).unwrap(), effective_dimension(&s, reg).unwrap());
        prop_assert!(nr >= ns - 1e-12);
        let mut rs = r.clone();
        let mut ss = s.clone();
        rs.sort_by(f64::total_cmp);
        ss.sort_by(f64::total_cmp);
        let differs = rs.iter().zip(&ss).any(|(a, b)| (a - b).abs() > 1e-3);
        if differs {
            prop_assert!(nr > ns, "{nr} vs {ns}");
        }
    }

    #[test]
    fn effective_dimension_is_monotone(values in prop::collection::vec(0.0..3.0f64, 1..20), a in 1e-6..1e2f64, b in 1e-6..1e2f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (n_lo, n_hi) = (effective_dimension(&values, lo).unwrap(), effective_dimension(&values, hi).unwrap());
        prop_assert!(n_hi <= n_lo + 1e-12);
        let rank = values.iter().filter(|&&x| x > 0.0).count() as f64;
        prop_assert!(n_lo >= 0.0 && n_lo <= rank + 1e-12);
    }

    #[test]
    fn bias_matches_smoother_residual(m in psd_matrix(64), seed in any::<u64>()) {
        let t = eigh_psd_matrix(&m).unwrap();
        let n = m.nrows();
        let f: Vec<f64> = gen_points(n, 1, seed).unwrap().iter().map(|p| 2.0 * p[0] - 1.0).collect();
        for reg in [1e-3, 1.0, 1e3] {
            prop_assert!(consistency_gap(&t, &f, reg).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn bias_is_non_decreasing_in_reg(m in psd_matrix(20), seed in any::<u64>(), a in 1e-4..1e2f64, b in 1e-4..1e2f64) {
        let t = eigh_psd_matrix(&m).unwrap();
        let f: Vec<f64> = gen_points(m.nrows(), 1, seed).unwrap().iter().map(|p| p[0] - 0.5).collect();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (e_lo, e_hi) = (regularization_bias(&t, &f, lo).unwrap(), regularization_bias(&t, &f, hi).unwrap());
        prop_assert!(e_lo <= e_hi * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn predictions_inherit_swap_symmetry(gamma in 0.2..5.0f64, construction in construction(), seed in any::<u64>()) {
        let points = gen_points(6, 2, seed).unwrap();
        let train = closed_sample(6, 6, seed);
        let test = PairSample::all_ordered(6);
        let proj = permutation_matrix(&test).unwrap();
        for (t, sign) in [(Transform::Symmetric, 1.0), (Transform::Antisymmetric, -1.0)] {
            let spec = KernelSpec::new(BaseKernel::Gaussian { gamma }, construction, t).unwrap();
            let y = gen_target(TargetKind::Generic, &points, &train, seed).unwrap().values;
            let sol = krr_fit(&build_gram(&spec, &points, &train).unwrap(), &y, 1e-3).unwrap();
            let pred = krr_predict(&spec, &points, &train, &sol, &test).unwrap();
            for (a, &b) in proj.perm().iter().enumerate() {
                prop_assert!((pred[b] - sign * pred[a]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn invariant_and_symmetric_kernels_fit_symmetric_targets_identically(
        gamma in 0.2..5.0f64, construction in construction(), seed in any::<u64>(), reg in 1e-4..1.0f64,
    ) {
        let points = gen_points(7, 1, seed).unwrap();
        let train = closed_sample(7, 8, seed ^ 1);
        let test = PairSample::all_ordered(7);
        let y = gen_target(TargetKind::Symmetric, &points, &train, seed).unwrap().values;
        let predict = |t: Transform| {
            let spec = KernelSpec::new(BaseKernel::Gaussian { gamma }, construction, t).unwrap();
            let sol = krr_fit(&build_gram(&spec, &points, &train).unwrap(), &y, reg).unwrap();
            krr_predict(&spec, &points, &train, &sol, &test).unwrap()
        };
        let (pi, s) = (predict(Transform::PermutationInvariant), predict(Transform::Symmetric));
        for (a, b) in pi.iter().zip(&s) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn bias_bounds_hold_for_normalized_gaussian_kernels(
        gamma in 0.1..10.0f64, construction in construction(), unordered in 4usize..33, seed in any::<u64>(), anti in any::<bool>(),
    ) {
        let points = gen_points(10, 2, seed).unwrap();
        let sample = closed_sample(10, unordered, seed);
        let spec = KernelSpec::new(BaseKernel::Gaussian { gamma }, construction, Transform::None).unwrap();
        let spectra = TransformSpectra::new(&spec, &points, &sample).unwrap();
        let kind = if anti { TargetKind::Antisymmetric } else { TargetKind::Symmetric };
        let target = gen_target(kind, &points, &sample, seed).unwrap();
        for reg in [0.01, 0.1, 1.0, 10.0] {
            let r = spectra.report(&target, reg).unwrap();
            let c = bias_bound_check(r.bias_full, r.bias_pi, reg, 1e-10 * r.bias_full);
            prop_assert!(c.passed, "{c:?}");
            prop_assert!(r.equality_holds, "{r:?}");
        }
    }

    #[test]
    fn virtual_examples_close_samples(pairs in prop::collection::btree_set((0usize..6, 0usize..6), 1..20), anti in any::<bool>()) {
        let pairs: Vec<_> = pairs.into_iter().filter(|(i, j)| if anti { i < j } else { i <= j }).collect();
        prop_assume!(!pairs.is_empty());
        let labels: Vec<f64> = (0..pairs.len()).map(|k| k as f64 + 1.0).collect();
        let sample = PairSample::new(pairs, Some(labels)).unwrap();
        let mode = if anti { SwapMode::Antisymmetric } else { SwapMode::Symmetric };
        let closed = close_under_swap(&sample, mode).unwrap();
        prop_assert!(closed.swap_closed());
        prop_assert_eq!(&closed.pairs()[..sample.len()], sample.pairs());
        prop_assert_eq!(close_under_swap(&closed, mode).unwrap(), closed.clone());
        let proj = permutation_matrix(&closed).unwrap();
        let symmetry = if anti { Symmetry::Antisymmetric } else { Symmetry::Symmetric };
        prop_assert!(TargetFunction::new(closed.labels().unwrap().to_vec(), symmetry).validate(&proj).is_ok());
    }

    #[test]
    fn generated_targets_have_declared_symmetry(seed in any::<u64>(), d in 1usize..4) {
        let points = gen_points(5, d, seed).unwrap();
        let sample = PairSample::all_ordered(5);
        let proj = permutation_matrix(&sample).unwrap();
        for kind in [TargetKind::Symmetric, TargetKind::Antisymmetric, TargetKind::Ranking] {
            let t = gen_target(kind, &points, &sample, seed).unwrap();
            prop_assert!(t.validate(&proj).is_ok());
        }
    }

    #[test]
    fn normalization_bounds_the_diagonal(base in base_kernel(), construction in construction(), seed in any::<u64>()) {
        let points = gen_points(5, 2, seed).unwrap();
        let sample = PairSample::all_ordered(5);
        let spec = KernelSpec::new(base, construction, Transform::None).unwrap();
        let Ok(norm) = normalize_pairwise(&spec, &points, &sample) else { return Ok(()); };
        let g = build_gram(&norm, &points, &sample).unwrap();
        let max = g.values.diagonal().iter().copied().fold(f64::MIN, f64::max);
        prop_assert!((max - 1.0).abs() <= 1e-12);
        prop_assert!(g.trace() / sample.len() as f64 <= 1.0 + 1e-12);
    }
}

#[test]
fn bias_factor_examples() {
    let (lo, hi) = bias_factors(1.0);
    assert!((lo - 0.64).abs() < 1e-15 && (hi - 1.125).abs() < 1e-15);
    // Both factors tend to 1 as the regularization grows.
    let (lo, hi) = bias_factors(1e6);
    assert!((1.0 - lo) < 1e-11 && (hi - 1.0) < 1e-11);
}

#[test]
fn symmetric_targets_decay_under_the_symmetric_kernel() {
    use pairspec::regression::{approximation_decay, DecayConfig};
    let spec = KernelSpec::new(BaseKernel::Gaussian { gamma: 20.0 }, Construction::Kronecker, Transform::Symmetric).unwrap();
    let cfg = DecayConfig { dim: 1, ..Default::default() };
    let curve = approximation_decay(&spec, TargetKind::Symmetric, &[25, 50, 100, 200], 42, &cfg).unwrap();
    assert!(curve.iter().all(|p| p.swap_residual == 0.0), "{curve:?}");
    assert!(curve[3].sup_error < curve[0].sup_error, "{curve:?}");
}

#[test]
fn ranking_targets_decay_under_the_transitive_kernel() {
    use pairspec::regression::{approximation_decay, DecayConfig};
    let spec = KernelSpec::transitive(BaseKernel::Gaussian { gamma: 20.0 });
    let curve = approximation_decay(&spec, TargetKind::Ranking, &[25, 200], 7, &DecayConfig::default()).unwrap();
    assert!(curve.iter().all(|p| p.swap_residual <= 1e-10), "{curve:?}");
    assert!(curve[1].sup_error < curve[0].sup_error, "{curve:?}");
}

#[test]
fn points_stay_in_the_unit_cube() {
    let p: PointSet = gen_points(100, 3, 5).unwrap();
    assert!(p.iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
}
