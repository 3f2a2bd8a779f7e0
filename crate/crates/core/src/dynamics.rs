//! Second-order fields built from mechanical data and the identities they
//! satisfy.
//!
//! A second-order field D = q̇ⁱ∂/∂qⁱ + q̈ⁱ∂/∂q̇ⁱ is represented by its
//! acceleration map alone; the q̇ⁱ∂/∂qⁱ part is implied, so every field here
//! is second order by construction.
//!
//! Sign convention: the work form α enters Newton's law as
//! i_Dω₂ + dT + α = 0, so D^∇ = −grad α and the classical force covector is
//! −α.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{check_dim, Chart, CoForm, LocalGeometry, Metric, OneForm, TangentState, VectorField};

/// (M, T₂, α) over one chart.
#[derive(Clone)]
pub struct MechanicalSystem {
    chart: Chart,
    metric: Arc<dyn Metric>,
    work: Option<Arc<dyn CoForm>>,
    potential: Option<Expr>,
}

impl fmt::Debug for MechanicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanicalSystem")
            .field("chart", &self.chart)
            .field("has_work_form", &self.work.is_some())
            .field("potential", &self.potential)
            .finish()
    }
}

impl MechanicalSystem {
    pub fn new(chart: Chart, metric: Arc<dyn Metric>) -> Result<MechanicalSystem> {
        check_dim("metric", chart.dim(), metric.dim())?;
        Ok(MechanicalSystem { chart, metric, work: None, potential: None })
    }

    pub fn with_work_form(mut self, alpha: Arc<dyn CoForm>) -> Result<MechanicalSystem> {
        check_dim("work form", self.chart.dim(), alpha.dim())?;
        self.work = Some(alpha);
        self.potential = None;
        Ok(self)
    }

    /// Conservative system α = dU.
    pub fn with_potential(mut self, u: Expr) -> Result<MechanicalSystem> {
        let form = OneForm::exact(self.chart.clone(), u.clone())?;
        self.work = Some(Arc::new(form));
        self.potential = Some(u);
        Ok(self)
    }

    /// Classical force components F_i; stored as α = −F.
    pub fn with_force(self, force: Vec<Expr>) -> Result<MechanicalSystem> {
        let alpha = force.into_iter().map(|f| Expr::Neg(Box::new(f))).collect();
        let form = OneForm::components(self.chart.clone(), alpha)?;
        self.with_work_form(Arc::new(form))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn metric(&self) -> &Arc<dyn Metric> {
        &self.metric
    }

    pub fn work_form(&self) -> Option<&Arc<dyn CoForm>> {
        self.work.as_ref()
    }

    pub fn potential(&self) -> Option<&Expr> {
        self.potential.as_ref()
    }

    /// Components of α at the state (zero when no work form is set).
    pub fn work_values(&self, state: &TangentState) -> Result<Vec<f64>> {
        match &self.work {
            Some(a) => a.values(state),
            None => Ok(vec![0.0; self.dim()]),
        }
    }

    pub fn potential_energy(&self, q: &[f64]) -> Result<Option<f64>> {
        match &self.potential {
            Some(u) => Ok(Some(u.eval(&self.chart.env(q, None))?)),
            None => Ok(None),
        }
    }

    pub fn local(&self, q: &[f64]) -> Result<LocalGeometry> {
        LocalGeometry::at(self.metric.as_ref(), q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Geodesic,
    Free,
    Constrained,
    TimeConstrained,
    TimeDependent,
    Transported,
    Custom,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldKind::Geodesic => "geodesic",
            FieldKind::Free => "free",
            FieldKind::Constrained => "constrained",
            FieldKind::TimeConstrained => "time-constrained",
            FieldKind::TimeDependent => "time-dependent",
            FieldKind::Transported => "transported",
            FieldKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A second-order differential equation on TM, given by q̈ = accel(q, q̇).
pub trait SecondOrderField: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> FieldKind;
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>>;
}

impl<F: SecondOrderField + ?Sized> SecondOrderField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> FieldKind {
        (**self).kind()
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        (**self).accel(state)
    }
}

impl<F: SecondOrderField + ?Sized> SecondOrderField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> FieldKind {
        (**self).kind()
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        (**self).accel(state)
    }
}

/// Field from a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&TangentState) -> Result<Vec<f64>> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> SecondOrderField for FnField<F>
where
    F: Fn(&TangentState) -> Result<Vec<f64>> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Custom
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        (self.f)(state)
    }
}

/// q̈ˡ = −Γˡ_ij q̇ⁱq̇ʲ.
#[derive(Clone)]
pub struct GeodesicField {
    metric: Arc<dyn Metric>,
}

impl GeodesicField {
    pub fn new(metric: Arc<dyn Metric>) -> Self {
        GeodesicField { metric }
    }
}

impl SecondOrderField for GeodesicField {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Geodesic
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        check_dim("state", self.dim(), state.dim())?;
        let local = LocalGeometry::at(self.metric.as_ref(), &state.q)?;
        Ok(local.gamma.contract(&state.qdot).into_iter().map(|v| -v).collect())
    }
}

/// Newton's law i_Dω₂ + dT + α = 0: q̈ˡ = −Γˡ_ij q̇ⁱq̇ʲ − gˡᵏA_k.
#[derive(Clone, Debug)]
pub struct FreeField {
    sys: MechanicalSystem,
}

impl FreeField {
    pub fn system(&self) -> &MechanicalSystem {
        &self.sys
    }
}

pub(crate) fn free_accel(sys: &MechanicalSystem, local: &LocalGeometry, state: &TangentState) -> Result<Vec<f64>> {
    let alpha = sys.work_values(state)?;
    let raised = local.raise(&alpha);
    let gq = local.gamma.contract(&state.qdot);
    Ok(gq.iter().zip(&raised).map(|(g, a)| -g - a).collect())
}

impl SecondOrderField for FreeField {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn kind(&self) -> FieldKind {
        if self.sys.work.is_none() {
            FieldKind::Geodesic
        } else {
            FieldKind::Free
        }
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        check_dim("state", self.dim(), state.dim())?;
        let local = self.sys.local(&state.q)?;
        free_accel(&self.sys, &local, state)
    }
}

pub fn kinetic_energy(sys: &MechanicalSystem, state: &TangentState) -> Result<f64> {
    let g = sys.metric.at(&state.q)?;
    let n = sys.dim();
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            t += g[(i, j)] * state.qdot[i] * state.qdot[j];
        }
    }
    Ok(0.5 * t)
}

pub fn geodesic_field(sys: &MechanicalSystem) -> GeodesicField {
    GeodesicField::new(sys.metric.clone())
}

pub fn free_field(sys: &MechanicalSystem) -> FreeField {
    FreeField { sys: sys.clone() }
}

/// D^∇ˡ = q̈ˡ + Γˡ_ij q̇ⁱq̇ʲ.
pub fn covariant_value(d: &dyn SecondOrderField, sys: &MechanicalSystem, state: &TangentState) -> Result<Vec<f64>> {
    let local = sys.local(&state.q)?;
    let acc = d.accel(state)?;
    Ok(covariant_from(&local, &acc, &state.qdot))
}

pub(crate) fn covariant_from(local: &LocalGeometry, accel: &[f64], qdot: &[f64]) -> Vec<f64> {
    let gq = local.gamma.contract(qdot);
    accel.iter().zip(&gq).map(|(a, g)| a + g).collect()
}

/// The horizontal work form of a field: α = −g_lk(q̈ˡ + Γˡ_ij q̇ⁱq̇ʲ) dqᵏ.
pub fn work_form_of(d: &dyn SecondOrderField, sys: &MechanicalSystem, state: &TangentState) -> Result<Vec<f64>> {
    let local = sys.local(&state.q)?;
    let cov = covariant_from(&local, &d.accel(state)?, &state.qdot);
    Ok(local.lower(&cov).into_iter().map(|v| -v).collect())
}

/// Components of i_Dω₂ + dT + α (zero for the field of `sys`).
pub fn newton_residual(d: &dyn SecondOrderField, sys: &MechanicalSystem, state: &TangentState) -> Result<Vec<f64>> {
    let local = sys.local(&state.q)?;
    let cov = covariant_from(&local, &d.accel(state)?, &state.qdot);
    let alpha = sys.work_values(state)?;
    Ok(local.lower(&cov).iter().zip(&alpha).map(|(a, b)| a + b).collect())
}

/// DT by the chain rule: ½ ∂_k g_ij q̇ᵏq̇ⁱq̇ʲ + g_ij q̇ⁱ q̈ʲ.
pub fn energy_rate(d: &dyn SecondOrderField, sys: &MechanicalSystem, state: &TangentState) -> Result<f64> {
    let local = sys.local(&state.q)?;
    let acc = d.accel(state)?;
    Ok(energy_rate_from(&local, &acc, &state.qdot))
}

fn energy_rate_from(local: &LocalGeometry, accel: &[f64], qdot: &[f64]) -> f64 {
    let n = qdot.len();
    let mut s = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                s += 0.5 * local.dg[k][(i, j)] * qdot[k] * qdot[i] * qdot[j];
            }
        }
    }
    s + local.inner(qdot, accel)
}

/// DT + ⟨α, D⟩; the constraint power for constrained fields.
pub fn energy_residual(d: &dyn SecondOrderField, sys: &MechanicalSystem, state: &TangentState) -> Result<f64> {
    let dt = energy_rate(d, sys, state)?;
    let alpha = sys.work_values(state)?;
    Ok(dt + dot(&alpha, &state.qdot))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// β̇ = B_l(q) q̇ˡ.
pub fn form_dot(beta: &dyn CoForm, state: &TangentState) -> Result<f64> {
    Ok(dot(&beta.values(state)?, &state.qdot))
}

/// Dβ̇ = q̇ᵏ ∂_k B_l q̇ˡ + B_l q̈ˡ for a form β on M.
pub fn form_dot_rate(beta: &dyn CoForm, accel: &[f64], state: &TangentState) -> Result<f64> {
    let b = beta.values(state)?;
    let db = beta.q_jacobian(&state.q)?;
    Ok(form_dot_rate_from(&b, &db, accel, &state.qdot))
}

pub(crate) fn form_dot_rate_from(b: &[f64], db: &DMatrix<f64>, accel: &[f64], qdot: &[f64]) -> f64 {
    let n = b.len();
    let mut s = dot(b, accel);
    for l in 0..n {
        for k in 0..n {
            s += qdot[k] * db[(l, k)] * qdot[l];
        }
    }
    s
}

/// Prolongation δ_v = aⁱ∂/∂qⁱ + ȧⁱ∂/∂q̇ⁱ of a vector field on M.
#[derive(Clone, Debug)]
pub struct Variation {
    base: VectorField,
}

impl Variation {
    pub fn base(&self) -> &VectorField {
        &self.base
    }

    /// (aⁱ, ȧⁱ) at the state, with ȧⁱ = q̇ʲ ∂aⁱ/∂qʲ.
    pub fn at(&self, state: &TangentState) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.base.values(&state.q)?;
        let jac = self.base.jacobian(&state.q)?;
        let n = a.len();
        let adot = (0..n).map(|i| (0..n).map(|j| jac[(i, j)] * state.qdot[j]).sum()).collect();
        Ok((a, adot))
    }
}

pub fn prolong(v: &VectorField) -> Variation {
    Variation { base: v.clone() }
}

/// D⟨θ, δ⟩ − δT + ⟨α, δ⟩, which vanishes for the field of `sys`.
pub fn zentral_residual(
    d: &dyn SecondOrderField,
    sys: &MechanicalSystem,
    delta: &Variation,
    state: &TangentState,
) -> Result<f64> {
    let n = sys.dim();
    check_dim("variation", n, delta.base.chart().dim())?;
    let local = sys.local(&state.q)?;
    let acc = d.accel(state)?;
    let (a, adot) = delta.at(state)?;
    let da = delta.base.jacobian(&state.q)?;
    let qd = &state.qdot;

    // ⟨θ, δ⟩ = g_jk q̇ᵏ aʲ, differentiated along D.
    let mut d_theta = 0.0;
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                d_theta += qd[l] * (local.dg[l][(j, k)] * a[j] + local.g[(j, k)] * da[(j, l)]) * qd[k];
            }
        }
    }
    d_theta += local.inner(&a, &acc);

    // δT = aⁱ ∂T/∂qⁱ + ȧⁱ ∂T/∂q̇ⁱ
    let mut delta_t = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                delta_t += 0.5 * a[i] * local.dg[i][(j, k)] * qd[j] * qd[k];
            }
        }
    }
    delta_t += local.inner(&adot, qd);

    let alpha = sys.work_values(state)?;
    Ok(d_theta - delta_t + dot(&alpha, &a))
}

/// ⟨τ, D⟩ = τ̇ at a state off the zero section.
pub fn time_class_check(tau: &dyn CoForm, d: &dyn SecondOrderField, state: &TangentState) -> Result<f64> {
    check_dim("field", d.dim(), state.dim())?;
    if state.qdot.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVelocity);
    }
    form_dot(tau, state)
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn polar() -> MechanicalSystem {
        let c = Chart::new(&["r", "th"]).unwrap();
        let g = MetricField::diagonal(c.clone(), vec![p("1"), p("r^2")]).unwrap();
        MechanicalSystem::new(c, Arc::new(g)).unwrap()
    }

    #[test]
    fn kinetic_energy_examples() {
        let e = euclid(&["x", "y"]);
        assert_eq!(kinetic_energy(&e, &st(&[0.0, 0.0], &[3.0, 4.0])).unwrap(), 12.5);
        assert_eq!(kinetic_energy(&e, &st(&[1.0, 2.0], &[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(kinetic_energy(&polar(), &st(&[2.0, 0.0], &[0.0, 1.0])).unwrap(), 2.0);
    }

    #[test]
    fn geodesic_examples() {
        let e = euclid(&["x", "y", "z"]);
        let g = geodesic_field(&e);
        assert_eq!(g.accel(&st(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])).unwrap(), vec![0.0; 3]);
        let pg = geodesic_field(&polar());
        assert_eq!(pg.accel(&st(&[2.0, 0.0], &[0.0, 1.0])).unwrap(), vec![2.0, 0.0]);
        assert_eq!(pg.accel(&st(&[2.0, 0.7], &[0.0, 0.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(covariant_value(&pg, &polar(), &st(&[1.3, 0.2], &[0.4, -0.9])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn free_field_examples() {
        let e = euclid(&["x", "y"]);
        assert_eq!(free_field(&e).accel(&st(&[1.0, 2.0], &[1.0, 1.0])).unwrap(), vec![0.0, 0.0]);
        let osc = euclid(&["x", "y"]).with_potential(p("0.5*(x^2+y^2)")).unwrap();
        let s = st(&[0.3, -1.2], &[0.5, 0.1]);
        assert_eq!(free_field(&osc).accel(&s).unwrap(), vec![-0.3, 1.2]);
        // D^∇ = −grad U
        assert_eq!(covariant_value(&free_field(&osc), &osc, &s).unwrap(), vec![-0.3, 1.2]);
        let k = euclid(&["x"]);
        let c = k.chart().clone();
        let k = k.with_work_form(Arc::new(OneForm::components(c, vec![p("2.5")]).unwrap())).unwrap();
        assert_eq!(free_field(&k).accel(&st(&[0.0], &[1.0])).unwrap(), vec![-2.5]);
    }

    #[test]
    fn force_sugar_negates() {
        let sys = euclid(&["x"]).with_force(vec![p("-x")]).unwrap();
        assert_eq!(free_field(&sys).accel(&st(&[2.0], &[0.0])).unwrap(), vec![-2.0]);
    }

    #[test]
    fn work_form_round_trip() {
        let osc = polar().with_potential(p("r^2*sin(th)")).unwrap();
        let s = st(&[1.5, 0.4], &[0.2, -0.3]);
        let alpha = work_form_of(&free_field(&osc), &osc, &s).unwrap();
        let want = osc.work_values(&s).unwrap();
        for (a, b) in alpha.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_residual_examples() {
        let pg = polar();
        let s = st(&[1.5, 0.4], &[0.2, -0.3]);
        assert!(energy_residual(&geodesic_field(&pg), &pg, &s).unwrap().abs() < 1e-12);
        let osc = euclid(&["x", "y"]).with_potential(p("0.5*(x^2+y^2)")).unwrap();
        assert!(energy_residual(&free_field(&osc), &osc, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn prolongation_examples() {
        let c = Chart::new(&["x", "y"]).unwrap();
        let s = st(&[0.5, 2.0], &[3.0, -1.0]);
        let d = prolong(&VectorField::parse(c.clone(), &["1", "0"]).unwrap());
        assert_eq!(d.at(&s).unwrap(), (vec![1.0, 0.0], vec![0.0, 0.0]));
        let d = prolong(&VectorField::parse(c.clone(), &["x", "0"]).unwrap());
        assert_eq!(d.at(&s).unwrap().1, vec![3.0, 0.0]);
        let d = prolong(&VectorField::parse(c, &["-y", "x"]).unwrap());
        assert_eq!(d.at(&s).unwrap(), (vec![-2.0, 0.5], vec![1.0, 3.0]));
    }

    #[test]
    fn zentral_examples() {
        let e = euclid(&["x", "y"]);
        let c = e.chart().clone();
        let s = st(&[0.5, 2.0], &[3.0, -1.0]);
        let dx = prolong(&VectorField::parse(c.clone(), &["1", "0"]).unwrap());
        assert_eq!(zentral_residual(&free_field(&e), &e, &dx, &s).unwrap(), 0.0);

        let osc = e.with_potential(p("0.5*(x^2+y^2)")).unwrap();
        let xdx = prolong(&VectorField::parse(c, &["x", "0"]).unwrap());
        assert!(zentral_residual(&free_field(&osc), &osc, &xdx, &s).unwrap().abs() <= 1e-10);

        let pg = polar();
        let dth = prolong(&VectorField::parse(pg.chart().clone(), &["0", "1"]).unwrap());
        let s = st(&[1.7, 0.3], &[0.4, 0.9]);
        assert!(zentral_residual(&geodesic_field(&pg), &pg, &dth, &s).unwrap().abs() < 1e-14);
    }

    #[test]
    fn time_class_examples() {
        let e = euclid(&["t", "x"]);
        let dt = OneForm::coordinate(e.chart().clone(), "t").unwrap();
        let d = free_field(&e);
        assert_eq!(time_class_check(&dt, &d, &st(&[0.0, 1.0], &[1.0, 5.0])).unwrap(), 1.0);
        assert_eq!(time_class_check(&dt, &d, &st(&[0.0, 1.0], &[2.5, 5.0])).unwrap(), 2.5);
        assert_eq!(time_class_check(&dt, &d, &st(&[0.0, 1.0], &[0.0, 0.0])), Err(Error::ZeroVelocity));

        let e3 = euclid(&["x", "y", "z"]);
        let dr = OneForm::exact(e3.chart().clone(), p("sqrt(x^2+y^2+z^2)")).unwrap();
        let v = time_class_check(&dr, &free_field(&e3), &st(&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(v, 1.0);
    }
}
