//! Reference frames φ: ℛ → ℳ: pullback metrics, transported fields,
//! inertial forces and the classification of one-parameter groups.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{covariant_from, FieldKind, GeodesicField, MechanicalSystem, SecondOrderField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{check_dim, Chart, CoForm, LocalGeometry, Metric, OneForm, TangentState};
use crate::sampling::Halton;
use crate::timeconstraint::{modified_field, TimeForm};

/// Tolerance used by the classifier for every sampled property.
pub const CLASSIFY_TOL: f64 = 1e-7;
/// Default number of quasi-random samples for classification.
pub const DEFAULT_BUDGET: usize = 64;

/// A list of expressions in the coordinates of a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprMap {
    chart: Chart,
    exprs: Vec<Expr>,
}

impl ExprMap {
    pub fn new(chart: Chart, exprs: Vec<Expr>) -> Result<ExprMap> {
        for e in &exprs {
            if let Some(v) = e.variables().into_iter().find(|v| chart.index_of(v).is_none()) {
                return Err(Error::InvalidData(format!("map expression `{e}` uses `{v}`, which is not a coordinate")));
            }
        }
        Ok(ExprMap { chart, exprs })
    }

    pub fn parse(chart: Chart, exprs: &[&str]) -> Result<ExprMap> {
        let exprs = exprs.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        ExprMap::new(chart, exprs)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn out_dim(&self) -> usize {
        self.exprs.len()
    }

    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim("point", self.chart.dim(), q.len())?;
        let env = self.chart.env(q, None);
        Ok(self.exprs.iter().map(|e| e.eval(&env)).collect::<std::result::Result<_, _>>()?)
    }

    /// J(a, i) = ∂φᵃ/∂qⁱ.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("point", self.chart.dim(), q.len())?;
        let env = self.chart.env(q, None);
        let names = self.chart.name_refs();
        let mut j = DMatrix::zeros(self.exprs.len(), names.len());
        for (a, e) in self.exprs.iter().enumerate() {
            let (_, grad) = e.value_and_gradient(&names, &env)?;
            for (i, g) in grad.into_iter().enumerate() {
                j[(a, i)] = g;
            }
        }
        Ok(j)
    }

    /// H[a](i, j) = ∂²φᵃ/∂qⁱ∂qʲ.
    pub fn hessians(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        check_dim("point", self.chart.dim(), q.len())?;
        let env = self.chart.env(q, None);
        let names = self.chart.name_refs();
        let n = names.len();
        self.exprs
            .iter()
            .map(|e| {
                if e.as_constant().is_some() {
                    return Ok(DMatrix::zeros(n, n));
                }
                let h = e.hessian(&names, &env)?;
                Ok(DMatrix::from_fn(n, n, |i, j| h[i][j]))
            })
            .collect()
    }

    /// self ∘ inner, by substitution.
    pub fn compose(&self, inner: &ExprMap) -> Result<ExprMap> {
        check_dim("composition", self.chart.dim(), inner.out_dim())?;
        let names = self.chart.names();
        let lookup = |v: &str| names.iter().position(|n| n == v).map(|i| inner.exprs[i].clone());
        let exprs = self.exprs.iter().map(|e| e.substitute(&lookup)).collect();
        ExprMap::new(inner.chart.clone(), exprs)
    }
}

fn solve_jacobian(j: &DMatrix<f64>, rhs: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if jacobian_is_singular(j) {
        return Err(Error::SingularJacobian { at: q.to_vec() });
    }
    j.clone()
        .lu()
        .solve(&DVector::from_column_slice(rhs))
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(|| Error::SingularJacobian { at: q.to_vec() })
}

fn jacobian_is_singular(j: &DMatrix<f64>) -> bool {
    let sv = j.clone().svd(false, false).singular_values;
    !(sv.min() > 1e-12 * sv.max().max(1.0))
}

/// A chart diffeomorphism φ with a user-supplied inverse.
#[derive(Clone, Debug)]
pub struct Frame {
    map: ExprMap,
    inverse: ExprMap,
}

impl Frame {
    /// `map` is written in the source coordinates and `inverse` in the
    /// target coordinates.
    pub fn new(map: ExprMap, inverse: ExprMap) -> Result<Frame> {
        let n = map.chart.dim();
        check_dim("frame map", n, map.out_dim())?;
        check_dim("frame inverse", n, inverse.chart.dim())?;
        check_dim("frame inverse", n, inverse.out_dim())?;
        Ok(Frame { map, inverse })
    }

    pub fn parse(source: Chart, map: &[&str], target: Chart, inverse: &[&str]) -> Result<Frame> {
        Frame::new(ExprMap::parse(source, map)?, ExprMap::parse(target, inverse)?)
    }

    pub fn identity(chart: &Chart) -> Frame {
        let exprs: Vec<Expr> = chart.names().iter().map(|n| Expr::var(n)).collect();
        let m = ExprMap { chart: chart.clone(), exprs };
        Frame { map: m.clone(), inverse: m }
    }

    pub fn dim(&self) -> usize {
        self.map.chart.dim()
    }

    pub fn source(&self) -> &Chart {
        &self.map.chart
    }

    pub fn target(&self) -> &Chart {
        &self.inverse.chart
    }

    pub fn map(&self) -> &ExprMap {
        &self.map
    }

    pub fn inverse_map(&self) -> &ExprMap {
        &self.inverse
    }

    pub fn apply(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.map.eval(q)
    }

    pub fn apply_inverse(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.inverse.eval(p)
    }

    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.map.jacobian(q)
    }

    /// max |φ⁻¹(φ(q)) − q| and max |φ(φ⁻¹(p)) − p| over the samples, with
    /// p = φ(q); fails above 1e−8 relative.
    pub fn check_inverse(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for q in samples {
            let p = self.apply(q)?;
            let back = self.apply_inverse(&p)?;
            let again = self.apply(&back)?;
            for (a, b) in back.iter().zip(q).chain(again.iter().zip(&p)) {
                let d = (a - b).abs() / (1.0 + b.abs());
                worst = worst.max(d);
                if d > 1e-8 {
                    return Err(Error::InvalidData(format!(
                        "frame inverse does not invert the map at q = {q:?} (defect {d:.3e})"
                    )));
                }
            }
        }
        Ok(worst)
    }

    /// φ ∘ ψ for ψ: ℛ' → ℛ.
    pub fn compose(&self, psi: &Frame) -> Result<Frame> {
        Frame::new(self.map.compose(&psi.map)?, psi.inverse.compose(&self.inverse)?)
    }

    /// Pushforward (φ(q), J q̇) of a source state.
    pub fn push_state(&self, state: &TangentState) -> Result<TangentState> {
        let p = self.apply(&state.q)?;
        let j = self.jacobian(&state.q)?;
        let v = &j * DVector::from_column_slice(&state.qdot);
        TangentState::new(p, v.as_slice().to_vec())
    }

    /// Source state whose pushforward is the given target state.
    pub fn pull_state(&self, state: &TangentState) -> Result<TangentState> {
        let q = self.apply_inverse(&state.q)?;
        let j = self.jacobian(&q)?;
        let v = solve_jacobian(&j, &state.qdot, &q)?;
        TangentState::new(q, v)
    }
}

/// dt² ⊕ g on ℝ × M, with t first.
#[derive(Clone)]
pub struct TimeProductMetric {
    spatial: Arc<dyn Metric>,
}

impl TimeProductMetric {
    pub fn new(spatial: Arc<dyn Metric>) -> Self {
        TimeProductMetric { spatial }
    }
}

impl Metric for TimeProductMetric {
    fn dim(&self) -> usize {
        self.spatial.dim() + 1
    }

    fn at(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("point", self.dim(), q.len())?;
        let g = self.spatial.at(&q[1..])?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (0, _) | (_, 0) => 0.0,
            _ => g[(i - 1, j - 1)],
        }))
    }

    fn derivatives(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        check_dim("point", self.dim(), q.len())?;
        let n = self.dim();
        let mut out = vec![DMatrix::zeros(n, n)];
        for d in self.spatial.derivatives(&q[1..])? {
            out.push(DMatrix::from_fn(n, n, |i, j| if i == 0 || j == 0 { 0.0 } else { d[(i - 1, j - 1)] }));
        }
        Ok(out)
    }
}

/// φ*ḡ evaluated as Jᵀ ḡ(φ(q)) J.
#[derive(Clone)]
pub struct PullbackMetric {
    frame: Frame,
    target: Arc<dyn Metric>,
}

impl PullbackMetric {
    pub fn new(frame: Frame, target: Arc<dyn Metric>) -> Result<PullbackMetric> {
        check_dim("target metric", frame.dim(), target.dim())?;
        Ok(PullbackMetric { frame, target })
    }
}

impl Metric for PullbackMetric {
    fn dim(&self) -> usize {
        self.frame.dim()
    }

    fn at(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.frame.jacobian(q)?;
        if jacobian_is_singular(&j) {
            return Err(Error::SingularJacobian { at: q.to_vec() });
        }
        let gb = self.target.at(&self.frame.apply(q)?)?;
        Ok(j.transpose() * gb * j)
    }

    fn derivatives(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        let j = self.frame.jacobian(q)?;
        let h = self.frame.map.hessians(q)?;
        let p = self.frame.apply(q)?;
        let gb = self.target.at(&p)?;
        let dgb = self.target.derivatives(&p)?;
        let jt = j.transpose();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            // ∂_k J(a, i) = H[a](i, k)
            let dj = DMatrix::from_fn(n, n, |a, i| h[a][(i, k)]);
            let mut dg_chain = DMatrix::zeros(n, n);
            for c in 0..n {
                dg_chain += &dgb[c] * j[(c, k)];
            }
            let term = dj.transpose() * &gb * &j + &jt * dg_chain * &j + &jt * &gb * &dj;
            out.push(term);
        }
        Ok(out)
    }
}

pub fn pullback_metric(frame: &Frame, target: Arc<dyn Metric>) -> Result<PullbackMetric> {
    PullbackMetric::new(frame.clone(), target)
}

/// φ*α: (φ*α)_i(q, q̇) = J_ai α_a(φ(q), J q̇).
#[derive(Clone)]
pub struct PulledBackForm {
    frame: Frame,
    form: Arc<dyn CoForm>,
}

impl PulledBackForm {
    pub fn new(frame: Frame, form: Arc<dyn CoForm>) -> Result<PulledBackForm> {
        check_dim("form", frame.dim(), form.dim())?;
        Ok(PulledBackForm { frame, form })
    }
}

impl CoForm for PulledBackForm {
    fn dim(&self) -> usize {
        self.frame.dim()
    }

    fn values(&self, state: &TangentState) -> Result<Vec<f64>> {
        let j = self.frame.jacobian(&state.q)?;
        let pushed = self.frame.push_state(state)?;
        let a = self.form.values(&pushed)?;
        Ok((j.transpose() * DVector::from_column_slice(&a)).as_slice().to_vec())
    }

    fn velocity_dependent(&self) -> bool {
        self.form.velocity_dependent()
    }

    fn q_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let j = self.frame.jacobian(q)?;
        let h = self.frame.map.hessians(q)?;
        let p = self.frame.apply(q)?;
        let a = self.form.values(&TangentState::new(p.clone(), vec![0.0; n])?)?;
        let da = self.form.q_jacobian(&p)?;
        let chain = j.transpose() * da * &j;
        Ok(DMatrix::from_fn(n, n, |i, k| (0..n).map(|b| h[b][(i, k)] * a[b]).sum::<f64>() + chain[(i, k)]))
    }
}

/// The field D₁ on ℛ with φ_*D₁ = D̄.
#[derive(Clone)]
pub struct TransportedField {
    frame: Frame,
    inner: Arc<dyn SecondOrderField>,
}

impl TransportedField {
    pub fn frame(&self) -> &Frame {
        &self.frame
    }
}

impl SecondOrderField for TransportedField {
    fn dim(&self) -> usize {
        self.frame.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Transported
    }
    /// J⁻¹(accel̄(φ(q), J q̇) − q̇ᵀ H q̇).
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        check_dim("state", self.dim(), state.dim())?;
        let j = self.frame.jacobian(&state.q)?;
        let h = self.frame.map.hessians(&state.q)?;
        let pushed = TangentState::new(
            self.frame.apply(&state.q)?,
            (&j * DVector::from_column_slice(&state.qdot)).as_slice().to_vec(),
        )?;
        let target = self.inner.accel(&pushed)?;
        let v = DVector::from_column_slice(&state.qdot);
        let rhs: Vec<f64> = target.iter().zip(&h).map(|(a, ha)| a - v.dot(&(ha * &v))).collect();
        solve_jacobian(&j, &rhs, &state.q)
    }
}

pub fn transported_field(frame: &Frame, inner: Arc<dyn SecondOrderField>) -> Result<TransportedField> {
    check_dim("field", frame.dim(), inner.dim())?;
    Ok(TransportedField { frame: frame.clone(), inner })
}

/// Transported geodesic field of ḡ minus the geodesic field of g.
pub fn inertial_force(frame: &Frame, g: &Arc<dyn Metric>, target: &Arc<dyn Metric>, state: &TangentState) -> Result<Vec<f64>> {
    check_dim("source metric", frame.dim(), g.dim())?;
    let moved = transported_field(frame, Arc::new(GeodesicField::new(target.clone())))?;
    let a = moved.accel(state)?;
    let b = GeodesicField::new(g.clone()).accel(state)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// Geodesic field of φ*ḡ minus that of g; agrees with `inertial_force`.
pub fn inertial_force_by_pullback(
    frame: &Frame,
    g: &Arc<dyn Metric>,
    target: &Arc<dyn Metric>,
    state: &TangentState,
) -> Result<Vec<f64>> {
    let pb: Arc<dyn Metric> = Arc::new(PullbackMetric::new(frame.clone(), target.clone())?);
    let a = GeodesicField::new(pb).accel(state)?;
    let b = GeodesicField::new(g.clone()).accel(state)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// (t, a) ↦ (t, φ_t(a)) on ℝ × M.
#[derive(Clone, Debug)]
pub struct GroupFrame {
    base: Chart,
    flow: Vec<Expr>,
    inverse_flow: Vec<Expr>,
    frame: Frame,
    name: String,
}

pub const TIME: &str = "t";

impl GroupFrame {
    /// `flow` gives φ_t(a) and `inverse_flow` gives φ_t⁻¹(a), both in the
    /// base coordinates and `t`.
    pub fn new(name: &str, base: Chart, flow: Vec<Expr>, inverse_flow: Vec<Expr>) -> Result<GroupFrame> {
        if base.index_of(TIME).is_some() {
            return Err(Error::InvalidChart(format!("`{TIME}` is reserved for the group parameter")));
        }
        check_dim("flow", base.dim(), flow.len())?;
        check_dim("inverse flow", base.dim(), inverse_flow.len())?;
        let full = time_chart(&base)?;
        let mut map = vec![Expr::var(TIME)];
        map.extend(flow.iter().cloned());
        let mut inv = vec![Expr::var(TIME)];
        inv.extend(inverse_flow.iter().cloned());
        let frame = Frame::new(ExprMap::new(full.clone(), map)?, ExprMap::new(full, inv)?)?;
        Ok(GroupFrame { base, flow, inverse_flow, frame, name: name.to_string() })
    }

    pub fn parse(name: &str, base: Chart, flow: &[&str], inverse_flow: &[&str]) -> Result<GroupFrame> {
        let p = |v: &[&str]| v.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<Vec<_>, _>>();
        GroupFrame::new(name, base, p(flow)?, p(inverse_flow)?)
    }

    /// φ_t(a) = a + t·d.
    pub fn translation(base: Chart, direction: &[f64]) -> Result<GroupFrame> {
        check_dim("direction", base.dim(), direction.len())?;
        let (mut f, mut inv) = (Vec::new(), Vec::new());
        for (name, d) in base.names().iter().zip(direction) {
            f.push(Expr::parse(&format!("{name} + t*({d:?})"))?);
            inv.push(Expr::parse(&format!("{name} - t*({d:?})"))?);
        }
        GroupFrame::new("translation", base, f, inv)
    }

    /// Counter-clockwise rotation at angular rate ω in the plane of the
    /// coordinates `plane`.
    pub fn rotation(base: Chart, rate: f64, plane: (usize, usize)) -> Result<GroupFrame> {
        let n = base.dim();
        let (i, j) = plane;
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidData(format!("rotation plane ({i}, {j}) is not valid in dimension {n}")));
        }
        let names = base.names();
        let (x, y) = (&names[i], &names[j]);
        let mut f: Vec<Expr> = names.iter().map(|s| Expr::var(s)).collect();
        let mut inv = f.clone();
        let w = format!("({rate:?})*t");
        f[i] = Expr::parse(&format!("{x}*cos({w}) - {y}*sin({w})"))?;
        f[j] = Expr::parse(&format!("{x}*sin({w}) + {y}*cos({w})"))?;
        inv[i] = Expr::parse(&format!("{x}*cos({w}) + {y}*sin({w})"))?;
        inv[j] = Expr::parse(&format!("-{x}*sin({w}) + {y}*cos({w})"))?;
        GroupFrame::new("rotation", base, f, inv)
    }

    /// φ_t(a) = e^{kt} a.
    pub fn dilatation(base: Chart, rate: f64) -> Result<GroupFrame> {
        let f = base.names().iter().map(|s| Expr::parse(&format!("exp(({rate:?})*t)*{s}"))).collect::<std::result::Result<Vec<_>, _>>()?;
        let inv = base.names().iter().map(|s| Expr::parse(&format!("exp(-({rate:?})*t)*{s}"))).collect::<std::result::Result<Vec<_>, _>>()?;
        GroupFrame::new("dilatation", base, f, inv)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn flow(&self) -> &[Expr] {
        &self.flow
    }

    pub fn inverse_flow(&self) -> &[Expr] {
        &self.inverse_flow
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    fn env_point(&self, t: f64, a: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(a.len() + 1);
        q.push(t);
        q.extend_from_slice(a);
        q
    }

    /// φ_t(a).
    pub fn flow_at(&self, t: f64, a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.frame.apply(&self.env_point(t, a))?[1..].to_vec())
    }

    /// Spatial Jacobian of φ_t at a.
    pub fn flow_jacobian(&self, t: f64, a: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.frame.jacobian(&self.env_point(t, a))?;
        let n = self.base.dim();
        Ok(j.view((1, 1), (n, n)).into_owned())
    }

    /// Infinitesimal generator u(a) = ∂_t φ_t(a) at t = 0.
    pub fn generator(&self, a: &[f64]) -> Result<Vec<f64>> {
        let q = self.env_point(0.0, a);
        let env = self.frame.source().env(&q, None);
        Ok(self.flow.iter().map(|e| e.diff(TIME, &env)).collect::<std::result::Result<_, _>>()?)
    }

    /// max |φ₀(a) − a| over the samples.
    pub fn identity_defect(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for a in samples {
            for (x, y) in self.flow_at(0.0, a)?.iter().zip(a) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// Pullback of dt² ⊕ ḡ through the group law:
    /// g_tt = 1 + ‖u(φ_t a)‖², g_ti = ⟨u(φ_t a), ∂_iφ_t⟩, g_ij = (φ_t*ḡ)_ij,
    /// with u(φ_t a) = Dφ_t · u(a).
    pub fn closed_form_pullback(&self, target: &dyn Metric, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.base.dim();
        check_dim("point", n + 1, q.len())?;
        let (t, a) = (q[0], &q[1..]);
        let p = self.flow_at(t, a)?;
        let gb = target.at(&p)?;
        let jt = self.flow_jacobian(t, a)?;
        let u = &jt * DVector::from_column_slice(&self.generator(a)?);
        let gu = &gb * &u;
        let spatial = jt.transpose() * &gb * &jt;
        let cross = jt.transpose() * &gu;
        let mut g = DMatrix::zeros(n + 1, n + 1);
        g[(0, 0)] = 1.0 + u.dot(&gu);
        for i in 0..n {
            g[(0, i + 1)] = cross[i];
            g[(i + 1, 0)] = cross[i];
            for j in 0..n {
                g[(i + 1, j + 1)] = spatial[(i, j)];
            }
        }
        Ok(g)
    }

    /// max |φ_t*ḡ − g| at (t, a).
    pub fn isometry_defect(&self, g: &dyn Metric, t: f64, a: &[f64]) -> Result<f64> {
        let jt = self.flow_jacobian(t, a)?;
        let pulled = jt.transpose() * g.at(&self.flow_at(t, a)?)? * &jt;
        Ok((pulled - g.at(a)?).amax())
    }
}

fn time_chart(base: &Chart) -> Result<Chart> {
    let mut names = vec![TIME.to_string()];
    names.extend(base.names().iter().cloned());
    Chart::new(&names)
}

/// Box of states for sampled classification.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Velocities are drawn from [−velocity, velocity].
    pub velocity: f64,
    pub t_range: (f64, f64),
}

impl SampleBox {
    pub fn cube(dim: usize, half: f64) -> SampleBox {
        SampleBox { lo: vec![-half; dim], hi: vec![half; dim], velocity: half, t_range: (-1.0, 1.0) }
    }
}

/// One sampled state (t, a; 1, ȧ) on ℝ × M.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSample {
    pub state: TangentState,
    pub force: Vec<f64>,
    pub isometry_defect: f64,
    pub congruence_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub inertial: bool,
    pub isometry_group: bool,
    /// Decided directly from the congruence of transported fields.
    pub preserves_equations: bool,
    /// inertial ∧ isometry_group.
    pub theorem_verdict: bool,
    /// Whether the direct test agrees with the theorem.
    pub consistent: bool,
    /// Whether the two computations of the inertial force agreed.
    pub force_routes_agree: bool,
    pub max_force: f64,
    pub max_isometry_defect: f64,
    pub max_congruence_defect: f64,
    pub inertial_count: usize,
    pub isometry_count: usize,
    pub preserving_count: usize,
    pub samples: Vec<FrameSample>,
}

/// Congruence of the transported field mod dt for a work form on the
/// target: spatial components of g(D₁^∇) + φ*ᾱ', where ᾱ' is the exact work
/// form of the modified target field.
pub fn preservation_defect(
    gf: &GroupFrame,
    g: &Arc<dyn Metric>,
    target_alpha: Arc<dyn CoForm>,
    state: &TangentState,
) -> Result<f64> {
    let full = gf.frame.source().clone();
    let g_ext: Arc<dyn Metric> = Arc::new(TimeProductMetric::new(g.clone()));
    let target_sys = MechanicalSystem::new(gf.frame.target().clone(), g_ext.clone())?.with_work_form(target_alpha)?;
    let dt = TimeForm::coordinate(gf.frame.target(), TIME)?;
    let dbar = Arc::new(modified_field(&target_sys, &dt)?);
    let d1 = transported_field(&gf.frame, dbar.clone())?;

    let pushed = gf.frame.push_state(state)?;
    let target_local = LocalGeometry::at(g_ext.as_ref(), &pushed.q)?;
    let cov_bar = covariant_from(&target_local, &dbar.accel(&pushed)?, &pushed.qdot);
    let alpha_prime: Vec<f64> = target_local.lower(&cov_bar).into_iter().map(|v| -v).collect();
    let j = gf.frame.jacobian(&state.q)?;
    let pulled = j.transpose() * DVector::from_column_slice(&alpha_prime);

    let source = MechanicalSystem::new(full, g_ext)?;
    let local = source.local(&state.q)?;
    let cov = covariant_from(&local, &d1.accel(state)?, &state.qdot);
    let lowered = local.lower(&cov);
    Ok((1..lowered.len()).map(|i| (lowered[i] + pulled[i]).abs()).fold(0.0, f64::max))
}

/// Affine work form A_i = c_i + Σ m_ij pʲ on the spatial directions of
/// the target, from a point of the unit cube.
fn affine_form(chart: &Chart, coeffs: &[f64]) -> Result<OneForm> {
    let n = chart.dim();
    let names = chart.names();
    let mut comps = vec![Expr::num(0.0)];
    let mut it = coeffs.iter().map(|u| 2.0 * u - 1.0);
    for _ in 1..n {
        let mut s = format!("{:?}", it.next().unwrap_or(0.0));
        for name in names.iter().skip(1) {
            s.push_str(&format!(" + ({:?})*{name}", it.next().unwrap_or(0.0)));
        }
        comps.push(Expr::parse(&s)?);
    }
    OneForm::components(chart.clone(), comps)
}

/// Samples the inertial, isometry and preservation properties of a group
/// frame over ℝ × M with metric g on M (and dt² ⊕ g on both sides).
pub fn classify_frame(gf: &GroupFrame, g: &Arc<dyn Metric>, bounds: &SampleBox, budget: usize) -> Result<Classification> {
    let n = gf.base.dim();
    check_dim("metric", n, g.dim())?;
    check_dim("sample box", n, bounds.lo.len())?;
    check_dim("sample box", n, bounds.hi.len())?;
    let g_ext: Arc<dyn Metric> = Arc::new(TimeProductMetric::new(g.clone()));
    let mut halton = Halton::new(1 + 2 * n);
    let mut coeff_seq = Halton::new((n * (n + 1)).min(24));
    let mut lo = vec![bounds.t_range.0];
    let mut hi = vec![bounds.t_range.1];
    lo.extend_from_slice(&bounds.lo);
    hi.extend_from_slice(&bounds.hi);
    lo.extend(std::iter::repeat(-bounds.velocity).take(n));
    hi.extend(std::iter::repeat(bounds.velocity).take(n));

    let mut samples = Vec::with_capacity(budget);
    let mut routes_agree = true;
    for _ in 0..budget {
        let x = halton.next_in(&lo, &hi);
        let mut qdot = vec![1.0];
        qdot.extend_from_slice(&x[1 + n..]);
        let state = TangentState::new(x[..=n].to_vec(), qdot)?;
        let force = inertial_force(&gf.frame, &g_ext, &g_ext, &state)?;
        let other = inertial_force_by_pullback(&gf.frame, &g_ext, &g_ext, &state)?;
        let scale = 1.0 + force.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if force.iter().zip(&other).any(|(a, b)| (a - b).abs() > 1e-8 * scale) {
            routes_agree = false;
        }
        let iso = gf.isometry_defect(g.as_ref(), state.q[0], &state.q[1..])?;
        let alpha = affine_form(gf.frame.target(), &coeff_seq.next_point())?;
        let cong = preservation_defect(gf, g, Arc::new(alpha), &state)?;
        samples.push(FrameSample { state, force, isometry_defect: iso, congruence_defect: cong });
    }

    let fmax = |s: &FrameSample| s.force.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_force = samples.iter().map(fmax).fold(0.0, f64::max);
    let max_iso = samples.iter().map(|s| s.isometry_defect).fold(0.0, f64::max);
    let max_cong = samples.iter().map(|s| s.congruence_defect).fold(0.0, f64::max);
    let inertial_count = samples.iter().filter(|s| fmax(s) <= CLASSIFY_TOL).count();
    let isometry_count = samples.iter().filter(|s| s.isometry_defect <= CLASSIFY_TOL).count();
    let preserving_count = samples.iter().filter(|s| s.congruence_defect <= CLASSIFY_TOL).count();
    let inertial = inertial_count == samples.len();
    let isometry_group = isometry_count == samples.len();
    let preserves_equations = preserving_count == samples.len();
    let theorem_verdict = inertial && isometry_group;
    Ok(Classification {
        inertial,
        isometry_group,
        preserves_equations,
        theorem_verdict,
        consistent: theorem_verdict == preserves_equations,
        force_routes_agree: routes_agree,
        max_force,
        max_isometry_defect: max_iso,
        max_congruence_defect: max_cong,
        inertial_count,
        isometry_count,
        preserving_count,
        samples,
    })
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.samples.len();
        writeln!(f, "inertial: {} ({}/{total} samples, max force {:.3e})", self.inertial, self.inertial_count, self.max_force)?;
        writeln!(
            f,
            "isometry_group: {} ({}/{total} samples, max defect {:.3e})",
            self.isometry_group, self.isometry_count, self.max_isometry_defect
        )?;
        writeln!(
            f,
            "preserves_equations: {} ({}/{total} samples, max defect {:.3e})",
            self.preserves_equations, self.preserving_count, self.max_congruence_defect
        )?;
        write!(f, "theorem verdict (inertial and isometry): {}; consistent: {}", self.theorem_verdict, self.consistent)
    }
}
