//! Time constraints τ̇ = 1, the modified field tangent to every level
//! τ̇ = c, and linear constraints that depend on time.

use std::fmt;
use std::sync::Arc;

use crate::constraints::{constraint_frame, form_refs, gram_solve, ConstraintSystem, MultiplierSolution};
use crate::dynamics::{dot, form_dot_rate_from, free_accel, newton_residual, FieldKind, MechanicalSystem, SecondOrderField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{check_dim, require_positive_definite, Chart, CoForm, LocalGeometry, OneForm, TangentState, VectorField};

/// Closedness tolerance for sampled checks.
pub const CLOSED_TOL: f64 = 1e-9;
/// ⟨grad τ, grad τ⟩ at or below this magnitude is treated as isotropic.
pub const ISOTROPIC_TOL: f64 = 1e-12;

/// A closed, nowhere-zero 1-form τ on M.
#[derive(Clone)]
pub struct TimeForm {
    form: Arc<dyn CoForm>,
    declared_exact: bool,
    coordinate: Option<usize>,
}

impl fmt::Debug for TimeForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeForm")
            .field("declared_exact", &self.declared_exact)
            .field("coordinate", &self.coordinate)
            .finish()
    }
}

impl TimeForm {
    /// τ = df.
    pub fn exact(chart: &Chart, f: Expr) -> Result<TimeForm> {
        let coordinate = match &f {
            Expr::Var(name) => chart.index_of(name),
            _ => None,
        };
        Ok(TimeForm { form: Arc::new(OneForm::exact(chart.clone(), f)?), declared_exact: true, coordinate })
    }

    /// τ = dqᵏ for a chart coordinate.
    pub fn coordinate(chart: &Chart, name: &str) -> Result<TimeForm> {
        let idx = chart
            .index_of(name)
            .ok_or_else(|| Error::InvalidChart(format!("unknown coordinate `{name}`")))?;
        Ok(TimeForm {
            form: Arc::new(OneForm::coordinate(chart.clone(), name)?),
            declared_exact: true,
            coordinate: Some(idx),
        })
    }

    /// A form given by components; closedness is checked at `samples`.
    pub fn from_form(form: Arc<dyn CoForm>, samples: &[Vec<f64>]) -> Result<TimeForm> {
        if form.velocity_dependent() {
            return Err(Error::InvalidData("a time form must depend on positions only".into()));
        }
        let tf = TimeForm { form, declared_exact: false, coordinate: None };
        for q in samples {
            let defect = tf.closedness_defect(q)?;
            if defect > CLOSED_TOL {
                return Err(Error::NotClosed { at: q.clone(), defect });
            }
        }
        Ok(tf)
    }

    pub fn form(&self) -> &dyn CoForm {
        self.form.as_ref()
    }

    pub fn form_arc(&self) -> Arc<dyn CoForm> {
        self.form.clone()
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn is_declared_exact(&self) -> bool {
        self.declared_exact
    }

    /// Index k when τ = dqᵏ.
    pub fn coordinate_index(&self) -> Option<usize> {
        self.coordinate
    }

    /// max |∂A_i/∂qʲ − ∂A_j/∂qⁱ|.
    pub fn closedness_defect(&self, q: &[f64]) -> Result<f64> {
        let jac = self.form.q_jacobian(q)?;
        let n = jac.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((jac[(i, j)] - jac[(j, i)]).abs());
            }
        }
        Ok(worst)
    }

    /// Components at q; an error where τ vanishes.
    pub fn values(&self, q: &[f64]) -> Result<Vec<f64>> {
        let zero = vec![0.0; q.len()];
        let state = TangentState::new(q.to_vec(), zero)?;
        let v = self.form.values(&state)?;
        if v.iter().all(|a| *a == 0.0) {
            return Err(Error::ZeroTimeForm { at: q.to_vec() });
        }
        Ok(v)
    }

    /// τ̇ = A_i q̇ⁱ.
    pub fn rate(&self, state: &TangentState) -> Result<f64> {
        Ok(dot(&self.values(&state.q)?, &state.qdot))
    }
}

/// D̄ = D − (Dτ̇ / ⟨grad τ, grad τ⟩) grad τ.
#[derive(Clone, Debug)]
pub struct ModifiedField {
    sys: MechanicalSystem,
    tau: TimeForm,
}

impl ModifiedField {
    pub fn system(&self) -> &MechanicalSystem {
        &self.sys
    }

    pub fn time_form(&self) -> &TimeForm {
        &self.tau
    }
}

pub(crate) fn modified_accel(
    sys: &MechanicalSystem,
    tau: &TimeForm,
    local: &LocalGeometry,
    state: &TangentState,
) -> Result<Vec<f64>> {
    let a = tau.values(&state.q)?;
    let da = tau.form.q_jacobian(&state.q)?;
    let grad = local.raise(&a);
    let norm = dot(&a, &grad);
    if norm.abs() <= ISOTROPIC_TOL {
        return Err(Error::IsotropicTimeForm { at: state.q.clone() });
    }
    let mut acc = free_accel(sys, local, state)?;
    let rate = form_dot_rate_from(&a, &da, &acc, &state.qdot);
    let s = rate / norm;
    for (x, g) in acc.iter_mut().zip(&grad) {
        *x -= s * g;
    }
    Ok(acc)
}

impl SecondOrderField for ModifiedField {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::TimeConstrained
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        check_dim("state", self.sys.dim(), state.dim())?;
        let local = self.sys.local(&state.q)?;
        modified_accel(&self.sys, &self.tau, &local, state)
    }
}

pub fn modified_field(sys: &MechanicalSystem, tau: &TimeForm) -> Result<ModifiedField> {
    check_dim("time form", sys.dim(), tau.dim())?;
    Ok(ModifiedField { sys: sys.clone(), tau: tau.clone() })
}

/// Residuals of the spatial equations in a chart adapted to τ = dq⁰ with
/// q̇⁰ = c, evaluated on the acceleration of the modified field:
/// g_μν q̈ᵛ + Γ_σν,μ q̇ˢq̇ᵛ + 2c Γ_ν0,μ q̇ᵛ + c²Γ_00,μ + A_μ.
pub fn adapted_equations_check(sys: &MechanicalSystem, tau: &TimeForm, state: &TangentState) -> Result<Vec<f64>> {
    let t0 = tau
        .coordinate_index()
        .ok_or_else(|| Error::Precondition("the time form is not a coordinate differential in this chart".into()))?;
    let field = modified_field(sys, tau)?;
    let acc = field.accel(state)?;
    let local = sys.local(&state.q)?;
    let alpha = sys.work_values(state)?;
    let c = state.qdot[t0];
    let n = sys.dim();
    let spatial: Vec<usize> = (0..n).filter(|&i| i != t0).collect();
    let gamma = &local.gamma;
    let mut out = Vec::with_capacity(n - 1);
    for &mu in &spatial {
        let mut r = alpha[mu] + c * c * gamma.first(t0, t0, mu);
        for &nu in &spatial {
            r += local.g[(mu, nu)] * acc[nu];
            r += 2.0 * c * gamma.first(nu, t0, mu) * state.qdot[nu];
            for &sg in &spatial {
                r += gamma.first(sg, nu, mu) * state.qdot[sg] * state.qdot[nu];
            }
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisplacementClass {
    /// ⟨τ, v⟩ ≡ 0.
    Admissible,
    /// ⟨τ, v⟩ constant but nonzero.
    Tangent,
    NotTangent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementVerdict {
    pub pairings: Vec<f64>,
    pub class: DisplacementClass,
}

/// Classifies a vector field as an infinitesimal displacement of the time
/// constraint from ⟨τ, v⟩ at the sample points.
pub fn admissible_displacement(tau: &TimeForm, v: &VectorField, samples: &[Vec<f64>]) -> Result<DisplacementVerdict> {
    check_dim("vector field", tau.dim(), v.chart().dim())?;
    let mut pairings = Vec::with_capacity(samples.len());
    for q in samples {
        let zero = TangentState::new(q.clone(), vec![0.0; q.len()])?;
        pairings.push(dot(&tau.form.values(&zero)?, &v.values(q)?));
    }
    let max = pairings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = pairings.iter().cloned().fold(f64::INFINITY, f64::min);
    let class = if pairings.iter().all(|p| p.abs() <= CLOSED_TOL) {
        DisplacementClass::Admissible
    } else if max - min <= CLOSED_TOL {
        DisplacementClass::Tangent
    } else {
        DisplacementClass::NotTangent
    };
    Ok(DisplacementVerdict { pairings, class })
}

/// A time form together with linear constraints on M.
#[derive(Clone, Debug)]
pub struct TimeDependentConstraints {
    tau: TimeForm,
    cons: ConstraintSystem,
    assume_definite_restrictions: bool,
}

impl TimeDependentConstraints {
    pub fn new(tau: TimeForm, cons: ConstraintSystem) -> Result<TimeDependentConstraints> {
        check_dim("constraints", tau.dim(), cons.dim())?;
        if cons.len() + 1 >= tau.dim() {
            return Err(Error::InvalidData(format!(
                "time form plus {} constraints leave no free direction in dimension {}",
                cons.len(),
                tau.dim()
            )));
        }
        Ok(TimeDependentConstraints { tau, cons, assume_definite_restrictions: false })
    }

    /// Accept an indefinite metric on the assumption that its restrictions
    /// to the constraint distribution and its orthogonal are definite.
    pub fn assuming_definite_restrictions(mut self) -> Self {
        self.assume_definite_restrictions = true;
        self
    }

    pub fn assumes_definite_restrictions(&self) -> bool {
        self.assume_definite_restrictions
    }

    pub fn time_form(&self) -> &TimeForm {
        &self.tau
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.cons
    }

    /// Forms τ, β₁, …, β_r in that order.
    pub fn augmented(&self) -> Vec<&dyn CoForm> {
        let mut v: Vec<&dyn CoForm> = vec![self.tau.form()];
        v.extend(form_refs(&self.cons));
        v
    }

    /// τ̇ and each β̇_k.
    pub fn rates(&self, state: &TangentState) -> Result<Vec<f64>> {
        self.augmented().iter().map(|f| Ok(dot(&f.values(state)?, &state.qdot))).collect()
    }
}

/// D̄ = D + Σ_{k=0}^r λᵏ grad β_k with β₀ = τ and D̄β̇_k = 0 for all k.
#[derive(Clone, Debug)]
pub struct TimeDependentField {
    sys: MechanicalSystem,
    tc: TimeDependentConstraints,
}

impl TimeDependentField {
    pub fn system(&self) -> &MechanicalSystem {
        &self.sys
    }

    pub fn constraints(&self) -> &TimeDependentConstraints {
        &self.tc
    }

    pub fn accel_with_multipliers(&self, state: &TangentState) -> Result<(Vec<f64>, MultiplierSolution)> {
        check_dim("state", self.sys.dim(), state.dim())?;
        let local = self.sys.local(&state.q)?;
        if !self.tc.assume_definite_restrictions {
            require_positive_definite(&local.g, &state.q)?;
        }
        self.tc.tau.values(&state.q)?;
        let frame = constraint_frame(&local, &self.tc.augmented(), state)?;
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

impl SecondOrderField for TimeDependentField {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::TimeDependent
    }
    fn accel(&self, state: &TangentState) -> Result<Vec<f64>> {
        Ok(self.accel_with_multipliers(state)?.0)
    }
}

pub fn time_dependent_field(sys: &MechanicalSystem, tc: &TimeDependentConstraints) -> Result<TimeDependentField> {
    check_dim("constraints", sys.dim(), tc.tau.dim())?;
    Ok(TimeDependentField { sys: sys.clone(), tc: tc.clone() })
}

/// How far i_Dω₂ + dT + α is from a multiple of τ: the residual covector
/// minus its component along τ, in max norm.
pub fn congruence_defect(
    d: &dyn SecondOrderField,
    sys: &MechanicalSystem,
    tau: &TimeForm,
    state: &TangentState,
) -> Result<f64> {
    let rho = newton_residual(d, sys, state)?;
    let t = tau.values(&state.q)?;
    let mu = dot(&rho, &t) / dot(&t, &t);
    Ok(rho.iter().zip(&t).map(|(r, a)| (r - mu * a).abs()).fold(0.0, f64::max))
}
