mod common;

use std::sync::Arc;

use geomech::dynamics::{form_dot, GeodesicField};
use geomech::geometry::{
    christoffel, grad_form, invert_metric, second_fundamental_form, second_fundamental_form_of, CoForm, LocalGeometry,
    Metric, OneForm, TangentState, VectorField,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Christoffel symbols of the second kind from central differences of g.
fn fd_christoffel(g: &dyn Metric, q: &[f64], h: f64) -> Vec<f64> {
    let n = q.len();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut up = q.to_vec();
            let mut dn = q.to_vec();
            up[k] += h;
            dn[k] -= h;
            (g.at(&up).unwrap() - g.at(&dn).unwrap()) / (2.0 * h)
        })
        .collect();
    let inv = invert_metric(&g.at(q).unwrap(), q).unwrap();
    let mut out = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += inv[(l, k)] * 0.5 * (dg[j][(i, k)] + dg[i][(j, k)] - dg[k][(i, j)]);
                }
                out.push(s);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn christoffel_symmetric_and_compatible(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = common::rng(seed);
        let c = common::chart(n);
        let g = common::random_metric(&mut rng, &c);
        let q = common::random_vec(&mut rng, n, 1.0);
        let local = LocalGeometry::at(&g, &q).unwrap();
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(local.gamma.second(l, i, j), local.gamma.second(l, j, i));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = local.dg[k][(i, j)];
                    let rhs = local.gamma.first(k, i, j) + local.gamma.first(k, j, i);
                    prop_assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn christoffel_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::chart(3);
        let g = common::random_metric(&mut rng, &c);
        let q = common::random_vec(&mut rng, 3, 1.0);
        let exact = christoffel(&g, &q).unwrap();
        let fd = fd_christoffel(&g, &q, 1e-6);
        let mut idx = 0;
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let e = exact.second(l, i, j);
                    prop_assert!((e - fd[idx]).abs() <= 1e-5 * (1.0 + e.abs()));
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn grad_then_lower_is_identity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::chart(3);
        let g = common::random_metric(&mut rng, &c);
        let beta = common::random_form(&mut rng, &c);
        let s = common::random_state(&mut rng, 3, 1.0);
        let v = grad_form(&g, &beta, &s).unwrap();
        let lowered = LocalGeometry::at(&g, &s.q).unwrap().lower(&v);
        let b = beta.values(&s).unwrap();
        prop_assert!(common::max_abs_diff(&lowered, &b) <= 1e-10 * (1.0 + common::max_abs(&b)));
    }

    #[test]
    fn geodesic_rate_of_form_is_second_fundamental_form(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::chart(3);
        let g = Arc::new(common::random_metric(&mut rng, &c));
        let beta = common::random_form(&mut rng, &c);
        let s = common::random_state(&mut rng, 3, 0.8);
        let d = GeodesicField::new(g.clone());
        let fd = common::derivative_along_flow(&d, &s, |x| form_dot(&beta, x).unwrap(), 1e-3);
        let ii = second_fundamental_form_of(g.as_ref(), &beta, &s).unwrap();
        prop_assert!((fd - ii).abs() <= 1e-6 * (1.0 + ii.abs()), "{fd} vs {ii}");
    }

    #[test]
    fn vector_and_form_routes_agree(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::chart(3);
        let g = common::random_metric(&mut rng, &c);
        let v = common::random_vector_field(&mut rng, &c);
        let s = common::random_state(&mut rng, 3, 1.0);
        // The form i_v g has components g_jk vʲ; build it symbolically.
        let comps = (0..3)
            .map(|k| {
                let terms: Vec<String> = (0..3).map(|j| format!("({})*({})", g.entry(j, k), v.components()[j])).collect();
                geomech::Expr::parse(&terms.join(" + ")).unwrap()
            })
            .collect();
        let lowered = OneForm::components(c.clone(), comps).unwrap();
        let a = second_fundamental_form(&g, &v, &s).unwrap();
        let b = second_fundamental_form_of(&g, &lowered, &s).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

#[test]
fn sphere_second_fundamental_form_by_flow() {
    let (c, g) = common::euclidean(&["x", "y", "z"]);
    let v = VectorField::parse(c.clone(), &["x/sqrt(x^2+y^2+z^2)", "y/sqrt(x^2+y^2+z^2)", "z/sqrt(x^2+y^2+z^2)"]).unwrap();
    let dr = OneForm::exact(c, geomech::Expr::parse("sqrt(x^2+y^2+z^2)").unwrap()).unwrap();
    let d = GeodesicField::new(g.clone());
    for (qdot, want) in [([0.0, 1.0, 0.0], 1.0), ([1.0, 0.0, 0.0], 0.0)] {
        let s = TangentState::new(vec![1.0, 0.0, 0.0], qdot.to_vec()).unwrap();
        let ii = second_fundamental_form(g.as_ref(), &v, &s).unwrap();
        assert!((ii - want).abs() < 1e-14);
        let fd = common::derivative_along_flow(&d, &s, |x| form_dot(&dr, x).unwrap(), 1e-4);
        assert!((fd - want).abs() < 1e-6);
    }
}
