use std::f64::consts::{PI, TAU};

use leggett_lab::geometry::{
    fig1_settings, frame_bound_sum, validate_ensemble, xy_plane_settings, AzimuthTable, SettingsEnsemble,
};
use leggett_lab::ghzform::{ghz_correlation_vectors, ghz_correlation_xy, ghz_subset_correlation};
use leggett_lab::ineq::{
    evaluate_general, evaluate_tight, min_form, tripartite_ghz_closed, GhzClosedCorrelator, InequalityAngles,
    QuantumCorrelator,
};
use leggett_lab::optim::Branch;
use leggett_lab::oracle::{
    product_correlators, sample_admissible, CorrelatorSet, LeggettHiddenVariable, SamplerPolicy,
};
use leggett_lab::qcore::{correlation_bruteforce, ghz_density, reduce_to, UnitVector3};
use leggett_lab::rng::LabRng;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = UnitVector3> {
    (-1.0f64..=1.0, 0.0f64..TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).max(0.0).sqrt();
        UnitVector3::normalized([r * phi.cos(), r * phi.sin(), z]).unwrap()
    })
}

fn random_table(n: usize, seed: u64) -> AzimuthTable {
    let mut rng = LabRng::new(seed);
    let mut row = || (0..n - 1).map(|_| rng.uniform_in(0.0, TAU)).collect::<Vec<_>>();
    AzimuthTable {
        unprimed: [row(), row(), row()],
        primed: [row(), row(), row()],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vector_form_matches_trace(dirs in prop::collection::vec(unit(), 2..=5)) {
        let rho = ghz_density(dirs.len()).unwrap();
        let brute = correlation_bruteforce(&rho, &dirs).unwrap();
        prop_assert!((ghz_correlation_vectors(&dirs).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn every_proper_subset_matches_trace(dirs in prop::collection::vec(unit(), 3..=5), mask in 1usize..31) {
        let n = dirs.len();
        let keep: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!keep.is_empty() && keep.len() < n);
        let rho = ghz_density(n).unwrap();
        let kept: Vec<UnitVector3> = keep.iter().map(|&i| dirs[i]).collect();
        let brute = correlation_bruteforce(&reduce_to(&rho, &keep).unwrap(), &kept).unwrap();
        prop_assert!((ghz_subset_correlation(n, &kept).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn xy_form_depends_only_on_azimuth_sum(a in prop::collection::vec(0.0f64..TAU, 2..=7), shift in -3.0f64..3.0) {
        let mut b = a.clone();
        b[0] += shift;
        b[1] -= shift;
        prop_assert!((ghz_correlation_xy(&a).unwrap() - ghz_correlation_xy(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn l_depends_on_phi_plus_psi(theta in 0.0f64..=PI, phi in 0.5f64..5.5, psi in 0.5f64..5.5, d in -0.5f64..0.5) {
        let a = tripartite_ghz_closed(&InequalityAngles::new(theta, phi, psi).unwrap());
        let b = tripartite_ghz_closed(&InequalityAngles::new(theta, phi + d, psi - d).unwrap());
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn plus_at_theta_is_minus_at_reflected_theta(theta in 0.0f64..=PI, s in 0.0f64..TAU) {
        let (lp, _) = tripartite_ghz_closed(&InequalityAngles::new(theta, s, 0.0).unwrap());
        // keep θ + φ + ψ fixed when θ moves to π − θ
        let phi = (s + 2.0 * theta - PI).rem_euclid(TAU);
        let (_, lm) = tripartite_ghz_closed(&InequalityAngles::new(PI - theta, phi, 0.0).unwrap());
        prop_assert!((lp - lm).abs() < 1e-12);
    }

    #[test]
    fn ghz_with_xy_partners_has_zero_alpha(theta in 0.0f64..=PI, seed in any::<u64>(), n in 2usize..=5) {
        let s = xy_plane_settings(n, 0, theta, &random_table(n, seed)).unwrap();
        let e = evaluate_general(&GhzClosedCorrelator { parties: n }, &s).unwrap();
        prop_assert!(e.terms.max_abs_alpha() < 1e-15);
        prop_assert!((e.lhs_general_plus - e.terms.sum_abs_beta()).abs() < 1e-15);
        prop_assert!((e.bound_general_plus - (6.0 - 2.0 * (theta / 2.0).cos().abs())).abs() < 1e-15);
    }

    #[test]
    fn min_form_is_bounded_by_beta_when_alpha_is_small(a in -1.0f64..1.0, b in -2.0f64..2.0) {
        prop_assume!(a.abs() <= 2.0 * b.abs());
        prop_assert!(min_form(a, b) <= b.abs() + 1e-15);
    }

    #[test]
    fn designated_party_choice_does_not_matter_for_ghz(theta in 0.0f64..=PI, seed in any::<u64>(), n in 2usize..=5) {
        let table = random_table(n, seed);
        let corr = QuantumCorrelator::new(ghz_density(n).unwrap()).unwrap();
        let first = evaluate_general(&corr, &xy_plane_settings(n, 0, theta, &table).unwrap()).unwrap();
        for i in 1..n {
            let e = evaluate_general(&corr, &xy_plane_settings(n, i, theta, &table).unwrap()).unwrap();
            prop_assert!((e.lhs_tight_plus - first.lhs_tight_plus).abs() < 1e-12);
            prop_assert!((e.lhs_general_minus - first.lhs_general_minus).abs() < 1e-12);
        }
    }

    #[test]
    fn global_rotation_keeps_settings_valid(seed in any::<u64>(), theta in 0.01f64..3.13) {
        let mut rng = LabRng::new(seed);
        let s = xy_plane_settings(3, 1, theta, &random_table(3, seed)).unwrap();
        let r = s.rotated(&rng.rotation());
        prop_assert!(validate_ensemble(&r).passed());
        prop_assert!((r.theta() - s.theta()).abs() < 1e-15);
    }

    #[test]
    fn frame_bound_holds(u in unit(), theta in 0.0f64..=PI) {
        let s = fig1_settings(theta, 0.0, 0.0).unwrap();
        prop_assert!(frame_bound_sum(&u, s.frame()) >= 1.0 - 1e-12);
        prop_assert!(frame_bound_sum(&u, s.frame_primed()) >= 1.0 - 1e-12);
    }

    #[test]
    fn settings_json_round_trip(theta in 0.0f64..=PI, phi in 0.0f64..=TAU, psi in 0.0f64..=TAU) {
        let s = fig1_settings(theta, phi, psi).unwrap();
        let back = SettingsEnsemble::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn sampled_sets_round_trip_and_stay_admissible(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = LabRng::new(seed);
        let lambda = LeggettHiddenVariable::random(n, &mut rng).unwrap();
        let dirs: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
        let set = sample_admissible(&lambda, &dirs, &mut rng, SamplerPolicy::default()).unwrap();
        prop_assert!(set.invariants(&lambda, &dirs).unwrap().passed());
        let back = CorrelatorSet::from_probabilities(n, &set.probabilities()).unwrap();
        for (x, y) in set.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn product_correlators_are_no_signaling(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = LabRng::new(seed);
        let lambda = LeggettHiddenVariable::random(n, &mut rng).unwrap();
        let dirs: Vec<UnitVector3> = (0..n).map(|_| rng.unit_vector()).collect();
        let j = rng.int_in(0, n - 1);
        let mut moved = dirs.clone();
        moved[j] = rng.unit_vector();
        let (a, b) = (product_correlators(&lambda, &dirs).unwrap(), product_correlators(&lambda, &moved).unwrap());
        for mask in (1usize..1 << n).filter(|m| m >> j & 1 == 0) {
            prop_assert_eq!(a.get(mask).to_bits(), b.get(mask).to_bits());
        }
    }
}

#[test]
fn global_maximum_is_never_exceeded() {
    let mut rng = LabRng::new(17);
    let max = 2.0 * (5f64.sqrt() + 1.0);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..1_000_000 {
        let (t, p, q) = (rng.uniform_in(0.0, PI), rng.uniform_in(0.0, TAU), rng.uniform_in(0.0, TAU));
        best = best.max(Branch::Plus.value(t, p, q)).max(Branch::Minus.value(t, p, q));
    }
    assert!(best <= max + 1e-9);
    assert!(best > 6.4);
}

#[test]
fn tight_and_general_agree_when_alpha_vanishes() {
    let corr = QuantumCorrelator::new(ghz_density(3).unwrap()).unwrap();
    let s = fig1_settings(0.7, 2.0, 1.0).unwrap();
    let (lp, lm) = evaluate_tight(&corr, &s).unwrap();
    let e = evaluate_general(&corr, &s).unwrap();
    assert!((lp - e.lhs_tight_plus).abs() < 1e-15 && (lm - e.lhs_tight_minus).abs() < 1e-15);
    assert!((e.lhs_general_plus - e.terms.sum_abs_beta()).abs() < 1e-15);
}
