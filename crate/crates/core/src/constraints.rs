//! Linear constraint systems, Lagrange multipliers and the constrained field.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{
    covariant_from, dot, form_dot_rate_from, free_accel, FieldKind, MechanicalSystem, SecondOrderField,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    check_dim, require_positive_definite, second_fundamental_from_form, Chart, CoForm, LocalGeometry, OneForm,
    TangentState,
};

/// Gram matrices with a larger condition number count as dependent.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// A Pfaff system β₁, …, β_r of q-only 1-forms on M.
#[derive(Clone)]
pub struct ConstraintSystem {
    dim: usize,
    forms: Vec<Arc<dyn CoForm>>,
    functions: Option<Vec<Expr>>,
    chart: Option<Chart>,
}

impl fmt::Debug for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSystem")
            .field("dim", &self.dim)
            .field("len", &self.forms.len())
            .field("functions", &self.functions)
            .finish()
    }
}

impl ConstraintSystem {
    pub fn new(dim: usize, forms: Vec<Arc<dyn CoForm>>) -> Result<ConstraintSystem> {
        for (k, f) in forms.iter().enumerate() {
            check_dim("constraint form", dim, f.dim())?;
            if f.velocity_dependent() {
                return Err(Error::NonlinearConstraint { index: k });
            }
        }
        if !forms.is_empty() && forms.len() >= dim {
            return Err(Error::InvalidData(format!(
                "{} constraints on a {dim}-dimensional manifold; need fewer than {dim}",
                forms.len()
            )));
        }
        Ok(ConstraintSystem { dim, forms, functions: None, chart: None })
    }

    pub fn empty(dim: usize) -> ConstraintSystem {
        ConstraintSystem { dim, forms: Vec::new(), functions: None, chart: None }
    }

    pub fn linear(chart: &Chart, forms: Vec<OneForm>) -> Result<ConstraintSystem> {
        let forms = forms.into_iter().map(|f| Arc::new(f) as Arc<dyn CoForm>).collect();
        let mut sys = ConstraintSystem::new(chart.dim(), forms)?;
        sys.chart = Some(chart.clone());
        Ok(sys)
    }

    /// β_k = dB_k for the given functions.
    pub fn holonomic(chart: &Chart, functions: Vec<Expr>) -> Result<ConstraintSystem> {
        let forms = functions
            .iter()
            .map(|b| OneForm::exact(chart.clone(), b.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut sys = ConstraintSystem::linear(chart, forms)?;
        sys.functions = Some(functions);
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self) -> &[Arc<dyn CoForm>] {
        &self.forms
    }

    pub fn is_holonomic(&self) -> bool {
        self.functions.is_some()
    }

    pub fn functions(&self) -> Option<&[Expr]> {
        self.functions.as_deref()
    }

    /// B_k(q) for holonomic systems.
    pub fn levels(&self, q: &[f64]) -> Result<Option<Vec<f64>>> {
        match (&self.functions, &self.chart) {
            (Some(fs), Some(chart)) => {
                let env = chart.env(q, None);
                Ok(Some(fs.iter().map(|f| f.eval(&env)).collect::<std::result::Result<_, _>>()?))
            }
            _ => Ok(None),
        }
    }
}

/// β̇_k = B_kj q̇ʲ for each constraint.
pub fn admissible(cons: &ConstraintSystem, state: &TangentState) -> Result<Vec<f64>> {
    cons.forms.iter().map(|f| Ok(dot(&f.values(state)?, &state.qdot))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierSolution {
    pub lambda: Vec<f64>,
    /// ‖Gλ − b‖ / (‖G‖‖λ‖ + ‖b‖), zero when both sides vanish.
    pub residual: f64,
    pub condition: f64,
}

/// Constraint data at one state: form values, their q-Jacobians and
/// gradients.
pub(crate) struct ConstraintFrame {
    pub b: Vec<Vec<f64>>,
    pub db: Vec<DMatrix<f64>>,
    pub v: Vec<Vec<f64>>,
}

pub(crate) fn constraint_frame(
    local: &LocalGeometry,
    forms: &[&dyn CoForm],
    state: &TangentState,
) -> Result<ConstraintFrame> {
    let mut b = Vec::with_capacity(forms.len());
    let mut db = Vec::with_capacity(forms.len());
    let mut v = Vec::with_capacity(forms.len());
    for f in forms {
        let bk = f.values(state)?;
        v.push(local.raise(&bk));
        db.push(f.q_jacobian(&state.q)?);
        b.push(bk);
    }
    Ok(ConstraintFrame { b, db, v })
}

fn condition_number(gram: &DMatrix<f64>) -> f64 {
    let sv = gram.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves λᵏ⟨v_k, v_l⟩ = −Dβ̇_l for the given base acceleration.
pub(crate) fn gram_solve(
    local: &LocalGeometry,
    frame: &ConstraintFrame,
    accel: &[f64],
    state: &TangentState,
) -> Result<MultiplierSolution> {
    let r = frame.b.len();
    if r == 0 {
        return Ok(MultiplierSolution { lambda: Vec::new(), residual: 0.0, condition: 1.0 });
    }
    let gram = DMatrix::from_fn(r, r, |k, l| local.inner(&frame.v[k], &frame.v[l]));
    let condition = condition_number(&gram);
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(Error::DependentConstraints { at: state.q.clone(), condition });
    }
    let rhs = DVector::from_fn(r, |l, _| -form_dot_rate_from(&frame.b[l], &frame.db[l], accel, &state.qdot));
    let lambda = gram
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DependentConstraints { at: state.q.clone(), condition })?;
    let scale = gram.norm() * lambda.norm() + rhs.norm();
    let residual = if scale == 0.0 { 0.0 } else { (&gram * &lambda - &rhs).norm() / scale };
    Ok(MultiplierSolution { lambda: lambda.as_slice().to_vec(), residual, condition })
}

pub(crate) fn form_refs(cons: &ConstraintSystem) -> Vec<&dyn CoForm> {
    cons.forms.iter().map(|f| f.as_ref() as &dyn CoForm).collect()
}

fn check_system(sys: &MechanicalSystem, cons: &ConstraintSystem, state: &TangentState) -> Result<()> {
    check_dim("constraints", sys.dim(), cons.dim)?;
    check_dim("state", sys.dim(), state.dim())
}

/// Multipliers of the constrained field; the right side is taken along the
/// free field of `sys`.
pub fn solve_multipliers(
    sys: &MechanicalSystem,
    cons: &ConstraintSystem,
    state: &TangentState,
) -> Result<MultiplierSolution> {
    check_system(sys, cons, state)?;
    let local = sys.local(&state.q)?;
    require_positive_definite(&local.g, &state.q)?;
    let frame = constraint_frame(&local, &form_refs(cons), state)?;
    let free = free_accel(sys, &local, state)?;
    gram_solve(&local, &frame, &free, state)
}

/// D̄ = D + Σ λᵏ grad β_k.
#[derive(Clone, Debug)]
pub struct ConstrainedField {
    sys: MechanicalSystem,
    cons: ConstraintSystem,
}

impl ConstrainedField {
    pub fn system(&self) -> &MechanicalSystem {
        &self.sys
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.cons
    }

    /// Acceleration together with the multipliers that produced it.
    pub fn accel_with_multipliers(&self, state: &TangentState) -> Result<(Vec<f64>, MultiplierSolution)> {
        check_system(&self.sys, &self.cons, state)?;
        let local = self.sys.local(&state.q)?;
        require_positive_definite(&local.g, &state.q)?;
        let frame = constraint_frame(&local, &form_refs(&self.cons), state)?;
        let mut acc = free_accel(&self.sys, &local, state)?;
        let sol = gram_solve(&local, &frame, &acc, state)?;
        for (lam, v) in sol.lambda.iter().zip(&frame.v) {
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += lam * vi;
            }
        }
        Ok((acc, sol))
    }
}

impl SecondOrderField for ConstrainedField {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Constrained
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        Ok(self.accel_with_multipliers(state)?.0)
    }
}

pub fn constrained_field(sys: &MechanicalSystem, cons: &ConstraintSystem) -> Result<ConstrainedField> {
    check_dim("constraints", sys.dim(), cons.dim)?;
    Ok(ConstrainedField { sys: sys.clone(), cons: cons.clone() })
}

/// Gram-Schmidt on the constraint gradients: v'_k = Σ_j c_kj v_j with
/// ⟨v'_k, v'_l⟩ = δ_kl.
pub(crate) struct Orthonormal {
    pub coeffs: Vec<Vec<f64>>,
    pub vectors: Vec<Vec<f64>>,
}

pub(crate) fn orthonormalize(local: &LocalGeometry, v: &[Vec<f64>], q: &[f64]) -> Result<Orthonormal> {
    let r = v.len();
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let mut c = vec![0.0; r];
        c[k] = 1.0;
        let mut w = v[k].clone();
        for (cj, ej) in coeffs.iter().zip(&vectors) {
            let p = local.inner(&v[k], ej);
            for (wi, ei) in w.iter_mut().zip(ej) {
                *wi -= p * ei;
            }
            for (ci, cji) in c.iter_mut().zip(cj) {
                *ci -= p * cji;
            }
        }
        let n0 = local.inner(&v[k], &v[k]);
        let n2 = local.inner(&w, &w);
        if !(n2 > 0.0) || n2 <= n0 * 1e-12 {
            return Err(Error::DependentConstraints { at: q.to_vec(), condition: f64::INFINITY });
        }
        let s = 1.0 / n2.sqrt();
        coeffs.push(c.iter().map(|x| x * s).collect());
        vectors.push(w.iter().map(|x| x * s).collect());
    }
    Ok(Orthonormal { coeffs, vectors })
}

fn require_admissible(cons: &ConstraintSystem, state: &TangentState) -> Result<()> {
    let vals = admissible(cons, state)?;
    let speed: f64 = state.qdot.iter().map(|x| x.abs()).sum::<f64>();
    for (k, (v, f)) in vals.iter().zip(&cons.forms).enumerate() {
        let scale: f64 = f.values(state)?.iter().map(|x| x.abs()).sum::<f64>() * speed;
        if v.abs() > 1e-8 * (1.0 + scale) {
            return Err(Error::Precondition(format!("state is not admissible: constraint {k} has rate {v:.3e}")));
        }
    }
    Ok(())
}

/// Constrained acceleration through an orthonormalized basis of
/// constraints: D̄ = D − Σ_k (Dβ̇'_k) v'_k. Agrees with the Gram route on
/// admissible states, where the derivative of the pointwise coefficients
/// drops out.
pub fn orthonormal_constrained_accel(
    sys: &MechanicalSystem,
    cons: &ConstraintSystem,
    state: &TangentState,
) -> Result<Vec<f64>> {
    check_system(sys, cons, state)?;
    let local = sys.local(&state.q)?;
    require_positive_definite(&local.g, &state.q)?;
    let frame = constraint_frame(&local, &form_refs(cons), state)?;
    let ortho = orthonormalize(&local, &frame.v, &state.q)?;
    let mut acc = free_accel(sys, &local, state)?;
    let rates: Vec<f64> = (0..cons.len())
        .map(|j| form_dot_rate_from(&frame.b[j], &frame.db[j], &acc, &state.qdot))
        .collect();
    let mut delta = vec![0.0; sys.dim()];
    for (c, e) in ortho.coeffs.iter().zip(&ortho.vectors) {
        let rate = dot(c, &rates);
        for (d, ei) in delta.iter_mut().zip(e) {
            *d -= rate * ei;
        }
    }
    for (a, d) in acc.iter_mut().zip(&delta) {
        *a += d;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovariantDecomposition {
    /// D^∇ minus its normal part.
    pub projection: Vec<f64>,
    /// −Σ II'_k(q̇, q̇) v'_k.
    pub curvature: Vec<f64>,
}

impl CovariantDecomposition {
    pub fn total(&self) -> Vec<f64> {
        self.projection.iter().zip(&self.curvature).map(|(a, b)| a + b).collect()
    }
}

/// Splits the covariant value of the constrained field at an admissible
/// state into the tangential part of the free covariant value and the
/// curvature term.
pub fn covariant_decomposition(
    sys: &MechanicalSystem,
    cons: &ConstraintSystem,
    state: &TangentState,
) -> Result<CovariantDecomposition> {
    check_system(sys, cons, state)?;
    require_admissible(cons, state)?;
    let local = sys.local(&state.q)?;
    require_positive_definite(&local.g, &state.q)?;
    let frame = constraint_frame(&local, &form_refs(cons), state)?;
    let ortho = orthonormalize(&local, &frame.v, &state.q)?;
    let free = free_accel(sys, &local, state)?;
    let cov = covariant_from(&local, &free, &state.qdot);
    let second: Vec<f64> = (0..cons.len())
        .map(|j| second_fundamental_from_form(&local, &frame.b[j], &frame.db[j], &state.qdot))
        .collect();

    let n = sys.dim();
    let mut projection = cov.clone();
    let mut curvature = vec![0.0; n];
    for (c, e) in ortho.coeffs.iter().zip(&ortho.vectors) {
        let p = local.inner(e, &cov);
        let ii = dot(c, &second);
        for i in 0..n {
            projection[i] -= p * e[i];
            curvature[i] -= ii * e[i];
        }
    }
    Ok(CovariantDecomposition { projection, curvature })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub qdot: Vec<f64>,
    /// Metric norm of the correction.
    pub magnitude: f64,
}

/// Metric-orthogonal projection of q̇ onto {β_k(q̇) = target_k}.
pub fn project_velocity(
    local: &LocalGeometry,
    forms: &[&dyn CoForm],
    targets: &[f64],
    state: &TangentState,
) -> Result<Projection> {
    check_dim("projection targets", forms.len(), targets.len())?;
    if forms.is_empty() {
        return Ok(Projection { qdot: state.qdot.clone(), magnitude: 0.0 });
    }
    let frame = constraint_frame(local, forms, state)?;
    let r = forms.len();
    let gram = DMatrix::from_fn(r, r, |k, l| local.inner(&frame.v[k], &frame.v[l]));
    let condition = condition_number(&gram);
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(Error::DependentConstraints { at: state.q.clone(), condition });
    }
    let excess = DVector::from_fn(r, |k, _| dot(&frame.b[k], &state.qdot) - targets[k]);
    let mu = gram
        .lu()
        .solve(&excess)
        .ok_or_else(|| Error::DependentConstraints { at: state.q.clone(), condition })?;
    let mut corr = vec![0.0; state.dim()];
    for (m, v) in mu.iter().zip(&frame.v) {
        for (c, vi) in corr.iter_mut().zip(v) {
            *c += m * vi;
        }
    }
    let qdot = state.qdot.iter().zip(&corr).map(|(a, c)| a - c).collect();
    Ok(Projection { qdot, magnitude: local.inner(&corr, &corr).abs().sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::covariant_value;
    use crate::geometry::MetricField;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn st(q: &[f64], v: &[f64]) -> TangentState {
        TangentState::new(q.to_vec(), v.to_vec()).unwrap()
    }

    fn euclid(names: &[&str]) -> MechanicalSystem {
        let c = Chart::new(names).unwrap();
        MechanicalSystem::new(c.clone(), Arc::new(MetricField::euclidean(c))).unwrap()
    }

    fn sphere() -> (MechanicalSystem, ConstraintSystem) {
        let e = euclid(&["x", "y", "z"]);
        let cons = ConstraintSystem::holonomic(e.chart(), vec![p("sqrt(x^2+y^2+z^2)")]).unwrap();
        (e, cons)
    }

    fn coord(sys: &MechanicalSystem, name: &str) -> OneForm {
        OneForm::coordinate(sys.chart().clone(), name).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn admissible_examples() {
        let e = euclid(&["x", "y"]);
        let dy = ConstraintSystem::linear(e.chart(), vec![coord(&e, "y")]).unwrap();
        assert_eq!(admissible(&dy, &st(&[0.3, 0.1], &[1.0, 0.0])).unwrap(), vec![0.0]);
        assert_eq!(admissible(&dy, &st(&[0.3, 0.1], &[0.0, 2.0])).unwrap(), vec![2.0]);
        let (_, s) = sphere();
        assert_eq!(admissible(&s, &st(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])).unwrap(), vec![0.0]);
    }

    #[test]
    fn multiplier_examples() {
        let e = euclid(&["x", "y"]);
        let dy = ConstraintSystem::linear(e.chart(), vec![coord(&e, "y")]).unwrap();
        assert_eq!(solve_multipliers(&e, &dy, &st(&[0.3, 0.1], &[1.0, 0.0])).unwrap().lambda, vec![0.0]);

        let (s, c) = sphere();
        let sol = solve_multipliers(&s, &c, &st(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])).unwrap();
        assert!(close(&sol.lambda, &[-1.0], 1e-14));
        assert!(sol.residual <= 1e-10);

        let e3 = euclid(&["x", "y", "z"]);
        let two = ConstraintSystem::linear(e3.chart(), vec![coord(&e3, "x"), coord(&e3, "y")]).unwrap();
        let sol = solve_multipliers(&e3, &two, &st(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(sol.lambda, vec![0.0, 0.0]);
    }

    #[test]
    fn constrained_field_examples() {
        let (s, c) = sphere();
        let f = constrained_field(&s, &c).unwrap();
        let acc = f.accel(&st(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])).unwrap();
        assert!(close(&acc, &[-1.0, 0.0, 0.0], 1e-14));
        let cv = covariant_value(&f, &s, &st(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])).unwrap();
        assert!(close(&cv, &[-1.0, 0.0, 0.0], 1e-14));

        let e = euclid(&["x", "y"]).with_potential(p("0.5*x^2")).unwrap();
        let dy = ConstraintSystem::linear(e.chart(), vec![coord(&e, "y")]).unwrap();
        let f = constrained_field(&e, &dy).unwrap();
        assert_eq!(f.accel(&st(&[0.7, 0.0], &[0.2, 0.0])).unwrap(), vec![-0.7, 0.0]);

        let empty = ConstraintSystem::empty(2);
        let f = constrained_field(&e, &empty).unwrap();
        assert_eq!(f.accel(&st(&[0.7, 0.4], &[0.2, 1.0])).unwrap(), vec![-0.7, 0.0]);
    }

    #[test]
    fn decomposition_examples() {
        let (s, c) = sphere();
        let d = covariant_decomposition(&s, &c, &st(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])).unwrap();
        assert!(close(&d.projection, &[0.0; 3], 1e-14));
        assert!(close(&d.curvature, &[-1.0, 0.0, 0.0], 1e-14));

        let e = euclid(&["x", "y"]);
        let dy = ConstraintSystem::linear(e.chart(), vec![coord(&e, "y")]).unwrap();
        let d = covariant_decomposition(&e, &dy, &st(&[0.0, 0.0], &[1.0, 0.0])).unwrap();
        assert_eq!(d.projection, vec![0.0, 0.0]);
        assert_eq!(d.curvature, vec![0.0, 0.0]);

        let g = euclid(&["x", "y", "z"]).with_potential(p("z")).unwrap();
        let state = st(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        let d = covariant_decomposition(&g, &c, &state).unwrap();
        assert!(close(&d.projection, &[0.0, 0.0, -1.0], 1e-14));
        assert!(close(&d.curvature, &[-1.0, 0.0, 0.0], 1e-14));
        let cv = covariant_value(&constrained_field(&g, &c).unwrap(), &g, &state).unwrap();
        assert!(close(&d.total(), &cv, 1e-12));
    }

    #[test]
    fn decomposition_rejects_inadmissible_state() {
        let (s, c) = sphere();
        let r = covariant_decomposition(&s, &c, &st(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn dependent_constraints_detected() {
        let e = euclid(&["x", "y", "z"]);
        let c = e.chart().clone();
        let twice = OneForm::components(c.clone(), vec![p("2"), p("0"), p("0")]).unwrap();
        let cons = ConstraintSystem::linear(&c, vec![coord(&e, "x"), twice]).unwrap();
        let r = solve_multipliers(&e, &cons, &st(&[0.0; 3], &[0.0, 1.0, 0.0]));
        assert!(matches!(r, Err(Error::DependentConstraints { .. })));
        let r = orthonormal_constrained_accel(&e, &cons, &st(&[0.0; 3], &[0.0, 1.0, 0.0]));
        assert!(matches!(r, Err(Error::DependentConstraints { .. })));
    }

    #[test]
    fn velocity_dependent_constraint_rejected() {
        let e = euclid(&["x", "y"]);
        let f = OneForm::components(e.chart().clone(), vec![p("x_dot"), p("0")]).unwrap();
        assert_eq!(
            ConstraintSystem::linear(e.chart(), vec![f]).unwrap_err(),
            Error::NonlinearConstraint { index: 0 }
        );
    }

    #[test]
    fn indefinite_metric_refused() {
        let c = Chart::new(&["t", "x"]).unwrap();
        let g = MetricField::diagonal(c.clone(), vec![p("-1"), p("1")]).unwrap();
        let sys = MechanicalSystem::new(c.clone(), Arc::new(g)).unwrap();
        let cons = ConstraintSystem::linear(&c, vec![OneForm::coordinate(c.clone(), "x").unwrap()]).unwrap();
        let r = solve_multipliers(&sys, &cons, &st(&[0.0, 0.0], &[1.0, 0.0]));
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn projection_hits_targets() {
        let (s, c) = sphere();
        let state = st(&[0.0, 0.6, 0.8], &[1.0, 1.0, 1.0]);
        let local = s.local(&state.q).unwrap();
        let pr = project_velocity(&local, &form_refs(&c), &[0.0], &state).unwrap();
        let after = TangentState::new(state.q.clone(), pr.qdot.clone()).unwrap();
        assert!(admissible(&c, &after).unwrap()[0].abs() < 1e-15);
        assert!((pr.magnitude - 1.4).abs() < 1e-12);
    }

    #[test]
    fn holonomic_levels() {
        let (_, c) = sphere();
        assert_eq!(c.levels(&[0.0, 3.0, 4.0]).unwrap(), Some(vec![5.0]));
        assert!(c.is_holonomic());
    }
}
