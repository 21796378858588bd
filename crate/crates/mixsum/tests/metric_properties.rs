//! Property checks for the sliced metrics: the closed-form geodesic
//! projection against a numeric argmin oracle, metric axioms at finite L,
//! and pushforward invariants.

use mixsum::datasets::fixtures::{random_atom, random_measure, translate_measure};
use mixsum::linalg::{matrix_log, SpdMatrix};
use mixsum::measures::{Discrete1DMeasure, GaussianAtom, MixingMeasure};
use mixsum::ot::wasserstein_1d;
use mixsum::sliced::{
    distance_between_samples, mix_sw_project, sample_directions, sliced_distance, Direction,
    SlicedKind,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Golden-section search for the minimizer of a strictly unimodal function.
fn golden_section_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn geodesic_projection_matches_numeric_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    for trial in 0..40 {
        let d = 1 + trial % 5;
        let atom = random_atom(d, 3.0, &mut rng);
        let dirs = sample_directions(SlicedKind::MixSw, d, 1, 1000 + trial as u64);
        let Direction::MixSw(dir) = &dirs[0] else { unreachable!() };
        let closed_form = mix_sw_project(&atom, dir).unwrap();
        // squared geodesic distance from the atom to the curve point at t
        let log_cov = matrix_log(atom.cov()).unwrap();
        let objective = |t: f64| {
            let mean_part = (atom.mean() - t * dir.w[0] * dir.v.as_vector()).norm_squared();
            let cov_part = (log_cov.as_matrix() - t * dir.w[1] * dir.a.as_matrix()).norm_squared();
            mean_part + cov_part
        };
        let numeric = golden_section_argmin(objective, -1e3, 1e3, 1e-7);
        assert!(
            (closed_form - numeric).abs() < 1e-5,
            "trial {trial}: closed form {closed_form} vs numeric {numeric}"
        );
    }
}

#[test]
fn shared_direction_estimates_satisfy_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for kind in [SlicedKind::Vectorized, SlicedKind::MixSw, SlicedKind::SMixW] {
        for trial in 0..30 {
            let d = 2 + trial % 2;
            let g1 = random_measure(d, 1 + trial % 7, &mut rng);
            let g2 = random_measure(d, 1 + (trial + 3) % 7, &mut rng);
            let g3 = random_measure(d, 1 + (trial + 5) % 7, &mut rng);
            let dirs = sample_directions(kind, d, 64, trial as u64);
            let d12 = distance_between_samples(2.0, &dirs, &g1, &g2).unwrap();
            let d21 = distance_between_samples(2.0, &dirs, &g2, &g1).unwrap();
            assert_eq!(d12, d21, "{kind:?} symmetry");
            assert_eq!(distance_between_samples(2.0, &dirs, &g1, &g1).unwrap(), 0.0);
            let d13 = distance_between_samples(2.0, &dirs, &g1, &g3).unwrap();
            let d32 = distance_between_samples(2.0, &dirs, &g3, &g2).unwrap();
            assert!(
                d12.sqrt() <= d13.sqrt() + d32.sqrt() + 1e-12,
                "{kind:?} triangle inequality: {} vs {}",
                d12.sqrt(),
                d13.sqrt() + d32.sqrt()
            );
        }
    }
}

#[test]
fn perturbed_measures_are_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(61803);
    for kind in [SlicedKind::MixSw, SlicedKind::SMixW] {
        for trial in 0..30 {
            let d = 2 + trial % 2;
            let g1 = random_measure(d, 1 + trial % 8, &mut rng);
            let mut delta = DVector::zeros(d);
            delta[trial % d] = 0.1;
            let g2 = translate_measure(&g1, &delta);
            let est = sliced_distance(kind, 2.0, 1000, trial as u64, &g1, &g2).unwrap();
            assert!(est.value > 1e-6, "{kind:?} trial {trial}: {}", est.value);
        }
    }
}

#[test]
fn estimates_stay_finite_on_near_singular_covariances() {
    let spike = SpdMatrix::from_diagonal(&[1e-12, 1e6]).unwrap();
    let a = GaussianAtom::new(DVector::from_column_slice(&[0.0, 0.0]), spike).unwrap();
    let b = GaussianAtom::new(
        DVector::from_column_slice(&[1.0, 1.0]),
        SpdMatrix::from_diagonal(&[1e-12, 1e-12]).unwrap(),
    )
    .unwrap();
    let g1 = MixingMeasure::new(vec![0.5, 0.5], vec![a.clone(), b.clone()]).unwrap();
    let g2 = MixingMeasure::new(vec![1.0], vec![b]).unwrap();
    for kind in [SlicedKind::Vectorized, SlicedKind::MixSw, SlicedKind::SMixW] {
        let est = sliced_distance(kind, 2.0, 128, 3, &g1, &g2).unwrap();
        assert!(est.value.is_finite() && est.value >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Pushforwards carry the exact weight multiset and sort their support.
    #[test]
    fn projection_preserves_mass(seed in 0u64..1000, k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_measure(2, k, &mut rng);
        let dirs = sample_directions(SlicedKind::SMixW, 2, 1, seed);
        let Direction::SMixW(dir) = &dirs[0] else { unreachable!() };
        let p = g.project_1d(|a| mixsum::sliced::smix_project(a, dir));
        let mut carried = p.weights().to_vec();
        let mut original = g.weights().to_vec();
        carried.sort_by(|a, b| a.partial_cmp(b).unwrap());
        original.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(carried, original);
        prop_assert!(p.support().windows(2).all(|w| w[0] <= w[1]));
    }

    /// Relabeling atoms does not change pushforwards as measures: the 1D
    /// distance between the two orderings is exactly zero.
    #[test]
    fn projection_equivariant_under_relabeling(seed in 0u64..1000, k in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_measure(2, k, &mut rng);
        let mut order: Vec<usize> = (0..k).collect();
        order.reverse();
        let permuted = MixingMeasure::new(
            order.iter().map(|&i| g.weights()[i]).collect(),
            order.iter().map(|&i| g.atoms()[i].clone()).collect(),
        ).unwrap();
        let dirs = sample_directions(SlicedKind::MixSw, 2, 8, seed);
        let d = distance_between_samples(2.0, &dirs, &g, &permuted).unwrap();
        prop_assert_eq!(d, 0.0);
    }

    /// The 1D sweep is symmetric and nonnegative for any discrete inputs.
    #[test]
    fn w1d_symmetric_nonnegative(
        xs in prop::collection::vec(-50.0f64..50.0, 1..20),
        ys in prop::collection::vec(-50.0f64..50.0, 1..20),
    ) {
        let uniform = |n: usize| vec![1.0 / n as f64; n];
        let mut xs = xs;
        let mut ys = ys;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let wa = uniform(xs.len());
        let wb = uniform(ys.len());
        let g1 = Discrete1DMeasure::new(xs, wa).unwrap();
        let g2 = Discrete1DMeasure::new(ys, wb).unwrap();
        let ab = wasserstein_1d(2.0, &g1, &g2);
        let ba = wasserstein_1d(2.0, &g2, &g1);
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein_1d(2.0, &g1, &g1), 0.0);
    }
}
