//! Properties of the set-level metrics.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use t2av_core::embedset::{project, select_rows};
use t2av_core::metrics::{favd, favtd, frechet_sets, inception_score, paired_kl, KlDirection};
use t2av_core::stats::Matrix;
use t2av_core::{EmbeddingSet, MetricKind, Modality, ProjectionSpec};

fn gaussian(n: usize, d: usize, shift: f32, rng: &mut ChaCha8Rng) -> EmbeddingSet {
    let data = (0..n * d).map(|i| shift * (i % d) as f32 / d as f32 + rng.sample::<f32, _>(StandardNormal)).collect();
    EmbeddingSet::new(d, 0, data).unwrap()
}

/// Random signed permutation: orthogonal and exact in single precision.
fn signed_permutation(d: usize, rng: &mut ChaCha8Rng) -> ProjectionSpec {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut m = Matrix::zeros(d, d);
    for (r, &c) in perm.iter().enumerate() {
        m[(r, c)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    ProjectionSpec::Matrix(m)
}

fn probs(n: usize, c: usize, rng: &mut ChaCha8Rng) -> EmbeddingSet {
    let mut data = Vec::with_capacity(n * c);
    for _ in 0..n {
        let row: Vec<f32> = (0..c).map(|_| rng.random::<f32>() + 1e-3).collect();
        let s: f32 = row.iter().sum();
        data.extend(row.iter().map(|x| x / s));
    }
    EmbeddingSet::new(c, 0, data).unwrap().with_modality(Modality::Probs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fd_invariant_under_shared_orthogonal_map(seed in any::<u64>(), d in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(300, d, 0.0, &mut rng);
        let b = gaussian(300, d, 1.5, &mut rng);
        let q = signed_permutation(d, &mut rng);
        let before = frechet_sets(&a, &b, MetricKind::FD).unwrap().value;
        let after = frechet_sets(&project(&a, &q).unwrap(), &project(&b, &q).unwrap(), MetricKind::FD).unwrap().value;
        prop_assert!((before - after).abs() <= 1e-8 * before.max(1.0));
    }

    #[test]
    fn favtd_with_repeated_video_equals_favd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(200, 6, 0.5, &mut rng);
        let v = gaussian(200, 6, 0.0, &mut rng);
        let id = ProjectionSpec::PadTruncate { target_dim: 6 };
        prop_assert_eq!(favtd(&a, &v, &v, &id).unwrap().value, favd(&a, &v, &id).unwrap().value);
    }

    #[test]
    fn inception_score_is_row_permutation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = probs(60, 5, &mut rng);
        let mut order: Vec<usize> = (0..60).collect();
        order.reverse();
        order.swap(3, 40);
        let shuffled = select_rows(&p, &order).unwrap().with_modality(Modality::Probs);
        let (x, y) = (inception_score(&p, 1).unwrap().value, inception_score(&shuffled, 1).unwrap().value);
        prop_assert!((x - y).abs() <= 1e-12 * x);
        prop_assert!((1.0..=5.0 + 1e-9).contains(&x));
    }

    #[test]
    fn paired_kl_is_nonnegative_and_zero_on_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (probs(30, 4, &mut rng), probs(30, 4, &mut rng));
        for dir in [KlDirection::RefToGen, KlDirection::GenToRef] {
            prop_assert!(paired_kl(&p, &q, dir).unwrap().value >= 0.0);
            prop_assert_eq!(paired_kl(&p, &p, dir).unwrap().value, 0.0);
        }
    }
}

#[test]
fn same_distribution_favd_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = gaussian(5000, 8, 0.0, &mut rng);
    let v = gaussian(5000, 8, 0.0, &mut rng);
    let id = ProjectionSpec::PadTruncate { target_dim: 8 };
    assert!(favd(&a, &v, &id).unwrap().value <= 0.5);
}
