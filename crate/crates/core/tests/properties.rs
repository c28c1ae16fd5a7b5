//! Property tests driven by seeds: each case draws its inputs from the library's
//! own samplers so that shrinking stays meaningful (a smaller seed is just another draw).

use std::f64::consts::PI;

use proptest::prelude::*;

use geoqm::dynamics::{speed_check, HamiltonianFunction};
use geoqm::ensembles::gibbs_density;
use geoqm::entanglement::{brute_force_delta, entanglement_measure, segre_embed, BipartiteSpace, Quadric};
use geoqm::linalg::{CVector, C64};
use geoqm::phase::{holonomy_phase, phase_difference, Loop};
use geoqm::projective::io::{observable_from_str, observable_to_json, state_from_str, state_to_json};
use geoqm::projective::{geodesic_distance, transition_probability};
use geoqm::sampling::{random_gauge, random_observable, random_state, random_unitary, rng};
use geoqm::spin::{measurement_probabilities, spin_eigenstates, tau_contraction, chord_decomposition, Spinor, SymSpinor};
use geoqm::statistics::{geometric_variance, heisenberg_slack, kahler_inequality_terms};
use geoqm::{ChartPoint, PureState};

fn regauge(state: &PureState, z: C64) -> PureState {
    PureState::new(state.components() * z).unwrap()
}

fn random_spinor(r: &mut impl rand::Rng) -> Spinor {
    let s = random_state(2, r);
    Spinor::new(s.components()[0], s.components()[1]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_and_probability_agree(seed in any::<u64>(), dim in 2usize..6) {
        let mut r = rng(seed);
        let (a, b) = (random_state(dim, &mut r), random_state(dim, &mut r));
        let p = transition_probability(&a, &b).unwrap();
        let d = geodesic_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=PI + 1e-12).contains(&d));
        prop_assert!((p - (d / 2.0).cos().powi(2)).abs() < 1e-12);
        prop_assert!((d - geodesic_distance(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn geometry_ignores_gauge(seed in any::<u64>(), dim in 2usize..5) {
        let mut r = rng(seed);
        let (a, b) = (random_state(dim, &mut r), random_state(dim, &mut r));
        let (za, zb) = (random_gauge(&mut r), random_gauge(&mut r));
        let (ga, gb) = (regauge(&a, za), regauge(&b, zb));
        let d = geodesic_distance(&a, &b).unwrap();
        prop_assert!((d - geodesic_distance(&ga, &gb).unwrap()).abs() < 1e-12);
        let f = random_observable(dim, &mut r);
        prop_assert!((f.expectation(&a).unwrap() - f.expectation(&ga).unwrap()).abs() < 1e-12 * (1.0 + f.expectation(&a).unwrap().abs()));
    }

    #[test]
    fn unitaries_preserve_distance(seed in any::<u64>(), dim in 2usize..5) {
        let mut r = rng(seed);
        let (a, b) = (random_state(dim, &mut r), random_state(dim, &mut r));
        let u = random_unitary(dim, &mut r);
        let (ua, ub) = (PureState::new(&u * a.components()).unwrap(), PureState::new(&u * b.components()).unwrap());
        prop_assert!((geodesic_distance(&a, &b).unwrap() - geodesic_distance(&ua, &ub).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn entanglement_is_gauge_and_locally_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = random_state(4, &mut r);
        let rep = entanglement_measure(&psi).unwrap();
        prop_assert!((0.0..=PI / 2.0 + 1e-12).contains(&rep.delta));
        let gauged = entanglement_measure(&regauge(&psi, random_gauge(&mut r))).unwrap();
        prop_assert!((rep.delta - gauged.delta).abs() < 1e-12);
        let local = random_unitary(2, &mut r).kronecker(&random_unitary(2, &mut r));
        let moved = entanglement_measure(&PureState::new(&local * psi.components()).unwrap()).unwrap();
        prop_assert!((rep.delta - moved.delta).abs() < 1e-10);
        // The nearest point is a product state at distance δ.
        let q = Quadric::two_qubit();
        prop_assert!(q.q(&rep.nearest).unwrap().norm() < 1e-10);
        prop_assert!((geodesic_distance(&psi, &rep.nearest).unwrap() - rep.delta).abs() < 1e-8);
    }

    #[test]
    fn products_have_zero_entanglement(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
        prop_assert!(entanglement_measure(&psi).unwrap().delta < 1e-10);
        prop_assert!(BipartiteSpace::qubits().segre_residual(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn tau_annihilates_rank_three(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = SymSpinor::from_state(&random_state(4, &mut r)).unwrap();
        let t = tau_contraction(&psi).unwrap();
        prop_assert!(t[0].norm() < 1e-12 && t[1].norm() < 1e-12);
        let dec = chord_decomposition(&psi).unwrap();
        prop_assert!(dec.residual(&psi).unwrap() < 1e-8);
    }

    #[test]
    fn spin_probabilities_sum_to_one(seed in any::<u64>(), k in 2usize..4) {
        let mut r = rng(seed);
        let state = random_state(k + 1, &mut r);
        let axis = random_spinor(&mut r);
        let family: Vec<PureState> = spin_eigenstates(&axis, k).unwrap().into_iter().map(|e| e.state).collect();
        let p = measurement_probabilities(&state, &family).unwrap();
        prop_assert_eq!(p.len(), k + 1);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kahler_forms_hold(seed in any::<u64>(), dim in 2usize..5) {
        let mut r = rng(seed);
        let (f, g) = (random_observable(dim, &mut r), random_observable(dim, &mut r));
        let psi = random_state(dim, &mut r);
        let x = ChartPoint::from_state(&psi);
        let terms = kahler_inequality_terms(&f, &g, &x).unwrap();
        let scale = 1.0 + terms.lhs();
        prop_assert!(terms.slack() >= -1e-10 * scale);
        prop_assert!(terms.sharp_slack() >= -1e-10 * scale);
        prop_assert!(heisenberg_slack(&f, &g, &psi).unwrap() >= -1e-10 * scale);
        let var = f.variance(&psi).unwrap();
        prop_assert!((geometric_variance(&f, &x).unwrap() - var).abs() < 1e-6 * (1.0 + var));
    }

    #[test]
    fn speed_matches_energy_spread(seed in any::<u64>(), dim in 2usize..4) {
        let mut r = rng(seed);
        let h = random_observable(dim, &mut r);
        let check = speed_check(&h, &random_state(dim, &mut r)).unwrap();
        prop_assert!(check.relative_error() < 1e-5);
    }

    #[test]
    fn reversing_a_loop_negates_its_phase(seed in any::<u64>()) {
        let mut r = rng(seed);
        let centre = random_state(3, &mut r);
        // Small perturbations of one ray keep consecutive overlaps large.
        let points: Vec<PureState> = (0..5)
            .map(|_| {
                let kick = random_state(3, &mut r);
                PureState::new(centre.components() + kick.components() * C64::new(0.3, 0.0)).unwrap()
            })
            .collect();
        let gamma = Loop::new(points).unwrap();
        let forward = holonomy_phase(&gamma);
        let back = holonomy_phase(&gamma.reversed());
        prop_assert!(phase_difference(forward, -back).abs() < 1e-12);
    }

    #[test]
    fn state_json_round_trips(seed in any::<u64>(), dim in 1usize..6) {
        let mut r = rng(seed);
        let psi = random_state(dim, &mut r);
        let text = serde_json::to_string(&state_to_json(&psi)).unwrap();
        let back = state_from_str(&text).unwrap();
        prop_assert!(back.ray_eq(&psi, 1e-15));
    }

    #[test]
    fn observable_json_round_trips(seed in any::<u64>(), dim in 1usize..5) {
        let mut r = rng(seed);
        let f = random_observable(dim, &mut r);
        let text = serde_json::to_string(&observable_to_json(&f)).unwrap();
        let back = observable_from_str(&text, 1.0).unwrap();
        prop_assert_eq!(back.matrix(), f.matrix());
    }

    #[test]
    fn gibbs_density_is_a_state(seed in any::<u64>(), beta in 0.0f64..5.0) {
        let mut r = rng(seed);
        let h = random_observable(3, &mut r);
        let rho = gibbs_density(&h, beta).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn oracle_agrees_with_closed_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = random_state(4, &mut r);
        let closed = entanglement_measure(&psi).unwrap().delta;
        let searched = brute_force_delta(&psi, &BipartiteSpace::qubits()).unwrap();
        prop_assert!((closed - searched).abs() < 1e-6, "closed {closed} searched {searched}");
    }

    #[test]
    fn oracle_finds_products(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = segre_embed(&random_state(2, &mut r), &random_state(2, &mut r));
        prop_assert!(brute_force_delta(&psi, &BipartiteSpace::qubits()).unwrap() < 1e-8);
    }
}

#[test]
fn basis_product_is_found_by_oracle() {
    // The pole sits between grid rows, which once stalled the search at ~1e-5.
    let psi = PureState::basis(4, 0);
    assert!(brute_force_delta(&psi, &BipartiteSpace::qubits()).unwrap() < 1e-10);
}

#[test]
fn nonlinear_generator_is_not_linear() {
    let h = HamiltonianFunction::Squared(geoqm::Observable::diagonal(&[0.0, 1.0]));
    assert!(!h.is_linear());
    let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    assert!((h.value_vec(&v) - 0.25).abs() < 1e-15);
}
