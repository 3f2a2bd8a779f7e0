//! Random polynomial data and finite-difference oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use geomech::dynamics::SecondOrderField;
use geomech::expr::Expr;
use geomech::geometry::{Chart, MetricField, OneForm, TangentState, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of `terms` monomials of total degree at most `max_deg`, with
/// coefficients in [−scale, scale].
pub fn poly(rng: &mut impl Rng, names: &[String], terms: usize, max_deg: u32, scale: f64) -> String {
    let mut parts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let c: f64 = rng.gen_range(-scale..scale);
        let mut s = format!("({c:?})");
        let deg = rng.gen_range(0..=max_deg);
        for _ in 0..deg {
            s.push('*');
            s.push_str(&names[rng.gen_range(0..names.len())]);
        }
        parts.push(s);
    }
    parts.join(" + ")
}

pub fn chart(n: usize) -> Chart {
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    Chart::new(&names).unwrap()
}

/// g = I + PᵀP with P a matrix of small polynomials; positive definite
/// everywhere.
pub fn random_metric(rng: &mut impl Rng, chart: &Chart) -> MetricField {
    let n = chart.dim();
    let names = chart.names();
    let p: Vec<Vec<String>> = (0..n).map(|_| (0..n).map(|_| poly(rng, names, 2, 2, 0.6)).collect()).collect();
    let rows = (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let mut s = if i == j { "1".to_string() } else { "0".to_string() };
                    for row in &p {
                        s.push_str(&format!(" + ({})*({})", row[i], row[j]));
                    }
                    Expr::parse(&s).unwrap()
                })
                .collect()
        })
        .collect();
    MetricField::from_lower(chart.clone(), rows).unwrap()
}

pub fn random_form(rng: &mut impl Rng, chart: &Chart) -> OneForm {
    let comps = (0..chart.dim()).map(|_| Expr::parse(&poly(rng, chart.names(), 3, 2, 1.0)).unwrap()).collect();
    OneForm::components(chart.clone(), comps).unwrap()
}

/// A form whose components are 1 + small polynomial in a chosen slot, so
/// that several of them stay independent near the origin.
pub fn random_constraint(rng: &mut impl Rng, chart: &Chart, lead: usize) -> OneForm {
    let comps = (0..chart.dim())
        .map(|i| {
            let base = if i == lead { "1 + " } else { "" };
            Expr::parse(&format!("{base}{}", poly(rng, chart.names(), 2, 2, 0.3))).unwrap()
        })
        .collect();
    OneForm::components(chart.clone(), comps).unwrap()
}

pub fn random_vector_field(rng: &mut impl Rng, chart: &Chart) -> VectorField {
    let comps = (0..chart.dim()).map(|_| Expr::parse(&poly(rng, chart.names(), 3, 2, 1.0)).unwrap()).collect();
    VectorField::new(chart.clone(), comps).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_state(rng: &mut impl Rng, n: usize, scale: f64) -> TangentState {
    TangentState::new(random_vec(rng, n, scale), random_vec(rng, n, scale)).unwrap()
}

pub fn euclidean(names: &[&str]) -> (Chart, Arc<MetricField>) {
    let c = Chart::new(names).unwrap();
    (c.clone(), Arc::new(MetricField::euclidean(c)))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Derivative of f along the flow of D at the state, by a central
/// difference of RK4 substeps forwards and backwards in time.
pub fn derivative_along_flow(
    d: &dyn SecondOrderField,
    state: &TangentState,
    f: impl Fn(&TangentState) -> f64,
    h: f64,
) -> f64 {
    let fwd = geomech::integrate::rk4_step(d, state, h).unwrap();
    let back = Reverse(d);
    let bwd = geomech::integrate::rk4_step(&back, &TangentState::new(state.q.clone(), state.qdot.iter().map(|v| -v).collect()).unwrap(), h).unwrap();
    let bwd = TangentState::new(bwd.q, bwd.qdot.iter().map(|v| -v).collect()).unwrap();
    (f(&fwd) - f(&bwd)) / (2.0 * h)
}

/// Time reversal: q̈(q, v) for the reversed curve is accel(q, −v).
struct Reverse<'a>(&'a dyn SecondOrderField);

impl SecondOrderField for Reverse<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn kind(&self) -> geomech::dynamics::FieldKind {
        geomech::dynamics::FieldKind::Custom
    }
    fn accel(&self, s: &TangentState) -> geomech::Result<Vec<f64>> {
        let flipped = TangentState::new(s.q.clone(), s.qdot.iter().map(|v| -v).collect())?;
        self.0.accel(&flipped)
    }
}
