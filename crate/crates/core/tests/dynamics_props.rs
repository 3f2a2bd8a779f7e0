mod common;

use std::sync::Arc;

use geomech::dynamics::{
    covariant_value, energy_residual, free_field, kinetic_energy, prolong, work_form_of, zentral_residual,
    MechanicalSystem,
};
use geomech::expr::Expr;
use geomech::geometry::{grad_form, OneForm, TangentState};
use geomech::integrate::{integrate, Monitor};
use proptest::prelude::*;

fn random_system(seed: u64, n: usize) -> (MechanicalSystem, rand_chacha::ChaCha8Rng) {
    let mut rng = common::rng(seed);
    let c = common::chart(n);
    let g = common::random_metric(&mut rng, &c);
    let alpha = common::random_form(&mut rng, &c);
    let sys = MechanicalSystem::new(c, Arc::new(g)).unwrap().with_work_form(Arc::new(alpha)).unwrap();
    (sys, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_field_covariant_value_is_minus_grad(seed in any::<u64>()) {
        let (sys, mut rng) = random_system(seed, 3);
        let s = common::random_state(&mut rng, 3, 1.0);
        let cv = covariant_value(&free_field(&sys), &sys, &s).unwrap();
        let grad = grad_form(sys.metric().as_ref(), sys.work_form().unwrap().as_ref(), &s).unwrap();
        let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
        prop_assert!(common::max_abs_diff(&cv, &neg) <= 1e-10 * (1.0 + common::max_abs(&neg)));
    }

    #[test]
    fn work_form_round_trip(seed in any::<u64>()) {
        let (sys, mut rng) = random_system(seed, 3);
        let s = common::random_state(&mut rng, 3, 1.0);
        let recovered = work_form_of(&free_field(&sys), &sys, &s).unwrap();
        let alpha = sys.work_values(&s).unwrap();
        prop_assert!(common::max_abs_diff(&recovered, &alpha) <= 1e-10 * (1.0 + common::max_abs(&alpha)));
    }

    #[test]
    fn velocity_dependent_work_form_round_trip(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::chart(2);
        let g = common::random_metric(&mut rng, &c);
        let comps = vec![Expr::parse("q0_dot*q1 - q1_dot^2").unwrap(), Expr::parse("q0*q0_dot + 1").unwrap()];
        let alpha = OneForm::components(c.clone(), comps).unwrap();
        let sys = MechanicalSystem::new(c, Arc::new(g)).unwrap().with_work_form(Arc::new(alpha)).unwrap();
        let s = common::random_state(&mut rng, 2, 1.0);
        let recovered = work_form_of(&free_field(&sys), &sys, &s).unwrap();
        let want = sys.work_values(&s).unwrap();
        prop_assert!(common::max_abs_diff(&recovered, &want) <= 1e-10 * (1.0 + common::max_abs(&want)));
    }

    #[test]
    fn energy_residual_vanishes_for_free_fields(seed in any::<u64>()) {
        let (sys, mut rng) = random_system(seed, 3);
        let s = common::random_state(&mut rng, 3, 1.0);
        prop_assert!(energy_residual(&free_field(&sys), &sys, &s).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn zentral_residual_vanishes(seed in any::<u64>(), n in 1usize..4) {
        let (sys, mut rng) = random_system(seed, n);
        let v = common::random_vector_field(&mut rng, sys.chart());
        let s = common::random_state(&mut rng, n, 1.0);
        let r = zentral_residual(&free_field(&sys), &sys, &prolong(&v), &s).unwrap();
        prop_assert!(r.abs() <= 1e-8, "{r}");
    }

    #[test]
    fn euler_commutation_by_flow_differences(seed in any::<u64>()) {
        let (sys, mut rng) = random_system(seed, 3);
        let v = common::random_vector_field(&mut rng, sys.chart());
        let s = common::random_state(&mut rng, 3, 0.8);
        let (_, adot) = prolong(&v).at(&s).unwrap();
        let d = free_field(&sys);
        for i in 0..3 {
            let da = common::derivative_along_flow(&d, &s, |x| v.values(&x.q).unwrap()[i], 1e-3);
            prop_assert!((adot[i] - da).abs() <= 1e-6 * (1.0 + da.abs()), "{} vs {da}", adot[i]);
        }
    }
}

#[test]
fn kinetic_energy_is_positive_off_zero_section() {
    let (sys, mut rng) = random_system(7, 3);
    for _ in 0..20 {
        let s = common::random_state(&mut rng, 3, 1.0);
        assert!(kinetic_energy(&sys, &s).unwrap() > 0.0);
    }
}

#[test]
fn oscillator_energy_drift_over_ten_periods() {
    let (c, g) = common::euclidean(&["x", "y"]);
    let u = Expr::parse("0.5*(x^2+y^2)").unwrap();
    let sys = MechanicalSystem::new(c, g).unwrap().with_potential(u.clone()).unwrap();
    let energy = {
        let sys = sys.clone();
        Monitor::new("energy", move |s: &TangentState| {
            Ok(kinetic_energy(&sys, s)? + sys.potential_energy(&s.q)?.unwrap())
        })
    };
    let s0 = TangentState::new(vec![1.0, 0.0], vec![0.0, 0.5]).unwrap();
    let tr = integrate(&free_field(&sys), &s0, 1e-3, 20.0 * std::f64::consts::PI, &[energy], None).unwrap();
    assert!(tr.completed());
    assert!(tr.drift_of("energy").unwrap() <= 1e-6);
}
