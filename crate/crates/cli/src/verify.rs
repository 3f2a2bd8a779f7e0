//! The `verify` subcommand: sampled identities and integrated invariants.

use std::fmt;
use std::io::Write;

use geomech::constraints::{covariant_decomposition, orthonormal_constrained_accel, solve_multipliers};
use geomech::dynamics::{energy_residual, form_dot_rate, free_field, newton_residual, SecondOrderField};
use geomech::frames::{inertial_force, inertial_force_by_pullback, pullback_metric};
use geomech::geometry::{christoffel, invert_metric, LocalGeometry, Metric, TangentState};
use geomech::integrate::{integrate, Trajectory};
use geomech::timeconstraint::{adapted_equations_check, congruence_defect, time_dependent_field};
use nalgebra::DMatrix;

use crate::error::CliError;
use crate::model::Model;

pub const IDENTITY_TOL: f64 = 1e-10;
pub const TANGENCY_TOL: f64 = 1e-8;
pub const ROUTE_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-5;
pub const DRIFT_TOL: f64 = 1e-6;
pub const LEAF_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    Above,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub value: Result<f64, String>,
    pub tol: f64,
    pub relation: Relation,
}

impl Check {
    fn at_most(name: &str, value: Result<f64, String>, tol: f64) -> Check {
        Check { name: name.to_string(), value, tol, relation: Relation::AtMost }
    }

    pub fn passed(&self) -> bool {
        match (&self.value, self.relation) {
            (Ok(v), Relation::AtMost) => *v <= self.tol,
            (Ok(v), Relation::Above) => *v > self.tol,
            (Err(_), _) => false,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::Above => ">",
        };
        match &self.value {
            Ok(v) => write!(f, "{:<32} {v:>11.3e} {rel} {:<9.1e} {verdict}", self.name, self.tol),
            Err(e) => write!(f, "{:<32} {verdict}: {e}", self.name),
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn describe(e: geomech::Error, s: &TangentState) -> String {
    format!("{e} (state q = {:?}, qdot = {:?})", s.q, s.qdot)
}

/// Largest value of `f` over the states, or the first error.
fn worst(states: &[TangentState], f: impl Fn(&TangentState) -> geomech::Result<f64>) -> Result<f64, String> {
    let mut m: f64 = 0.0;
    for s in states {
        let v = f(s).map_err(|e| describe(e, s))?;
        if !v.is_finite() {
            return Err(format!("non-finite value at q = {:?}, qdot = {:?}", s.q, s.qdot));
        }
        m = m.max(v);
    }
    Ok(m)
}

fn min_eigenvalue(g: &dyn Metric, points: &[Vec<f64>]) -> Result<f64, String> {
    let mut m = f64::INFINITY;
    for q in points {
        let e = g.at(q).map_err(|e| e.to_string())?.symmetric_eigenvalues().min();
        m = m.min(e);
    }
    Ok(m)
}

/// Relative difference between exact Γ and central differences of g.
fn christoffel_fd(g: &dyn Metric, q: &[f64], h: f64) -> geomech::Result<f64> {
    let n = q.len();
    let mut dg = Vec::with_capacity(n);
    for k in 0..n {
        let mut up = q.to_vec();
        let mut dn = q.to_vec();
        up[k] += h;
        dn[k] -= h;
        dg.push((g.at(&up)? - g.at(&dn)?) / (2.0 * h));
    }
    let inv: DMatrix<f64> = invert_metric(&g.at(q)?, q)?;
    let exact = christoffel(g, q)?;
    let mut m: f64 = 0.0;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let fd: f64 =
                    (0..n).map(|k| inv[(l, k)] * 0.5 * (dg[j][(i, k)] + dg[i][(j, k)] - dg[k][(i, j)])).sum();
                let e = exact.second(l, i, j);
                m = m.max((e - fd).abs() / (1.0 + e.abs()));
            }
        }
    }
    Ok(m)
}

/// ∂_k g_ij against Γ_ki,j + Γ_kj,i.
fn compatibility(g: &dyn Metric, q: &[f64]) -> geomech::Result<f64> {
    let local = LocalGeometry::at(g, q)?;
    let n = q.len();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = local.dg[k][(i, j)];
                let rhs = local.gamma.first(k, i, j) + local.gamma.first(k, j, i);
                m = m.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
            }
        }
    }
    Ok(m)
}

fn metric_checks(name: &str, g: &dyn Metric, points: &[Vec<f64>], out: &mut Vec<Check>) {
    out.push(Check {
        name: format!("{name}_positive_definite"),
        value: min_eigenvalue(g, points),
        tol: 0.0,
        relation: Relation::Above,
    });
    let fold = |f: &dyn Fn(&[f64]) -> geomech::Result<f64>| -> Result<f64, String> {
        let mut m: f64 = 0.0;
        for q in points {
            m = m.max(f(q).map_err(|e| format!("{e} at q = {q:?}"))?);
        }
        Ok(m)
    };
    out.push(Check::at_most(&format!("{name}_compatibility"), fold(&|q| compatibility(g, q)), IDENTITY_TOL));
    out.push(Check::at_most(&format!("{name}_christoffel_vs_fd"), fold(&|q| christoffel_fd(g, q, 1e-6)), FD_TOL));
}

fn sampled_checks(model: &Model, out: &mut Vec<Check>) {
    let count = model.sampling.count;
    let points = model.sample_points(count);
    metric_checks("metric", model.metric.as_ref(), &points, out);
    let sys = &model.system;

    if let Some(f) = &model.frame {
        let states = match model.admissible_states(count) {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::at_most("frame_samples", Err(e.to_string()), 0.0));
                return;
            }
        };
        let frame = f.group.frame();
        let qs: Vec<Vec<f64>> = states.iter().map(|s| s.q.clone()).collect();
        out.push(Check::at_most("frame_inverse", frame.check_inverse(&qs).map_err(|e| e.to_string()), 1e-8));
        let base: Vec<Vec<f64>> = qs.iter().map(|q| q[1..].to_vec()).collect();
        out.push(Check::at_most("group_identity_at_t0", f.group.identity_defect(&base).map_err(|e| e.to_string()), 1e-12));
        let pb = pullback_metric(frame, f.ext_metric.clone());
        out.push(Check::at_most(
            "pullback_closed_form",
            match &pb {
                Ok(pb) => worst(&states, |s| Ok((pb.at(&s.q)? - f.group.closed_form_pullback(model.metric.as_ref(), &s.q)?).amax())),
                Err(e) => Err(e.to_string()),
            },
            ROUTE_TOL,
        ));
        out.push(Check::at_most(
            "inertial_force_routes",
            worst(&states, |s| {
                let a = inertial_force(frame, &f.ext_metric, &f.ext_metric, s)?;
                let b = inertial_force_by_pullback(frame, &f.ext_metric, &f.ext_metric, s)?;
                Ok(diff(&a, &b) / (1.0 + sup(&a)))
            }),
            ROUTE_TOL,
        ));
        let c = geomech::frames::classify_frame(&f.group, &model.metric, &model.sampling.bounds, model.sampling.budget);
        out.push(Check::at_most(
            "classification_consistent",
            c.map(|c| if c.consistent && c.force_routes_agree { 0.0 } else { 1.0 }).map_err(|e| e.to_string()),
            0.0,
        ));
        return;
    }

    let raw = model.raw_states(count).unwrap_or_default();
    let free = free_field(sys);
    out.push(Check::at_most(
        "newton_residual_free",
        worst(&raw, |s| Ok(sup(&newton_residual(&free, sys, s)?) / (1.0 + sup(&sys.work_values(s)?)))),
        IDENTITY_TOL,
    ));
    out.push(Check::at_most(
        "energy_identity_free",
        worst(&raw, |s| Ok(energy_residual(&free, sys, s)?.abs() / (1.0 + sup(&sys.work_values(s)?) * sup(&s.qdot)))),
        IDENTITY_TOL,
    ));

    let states = model.admissible_states(count).map_err(|e| e.to_string());
    let states = match states {
        Ok(s) => s,
        Err(e) => {
            out.push(Check::at_most("admissible_samples", Err(e), 0.0));
            return;
        }
    };

    if let (Some(c), None) = (&model.constraints, &model.time) {
        out.push(Check::at_most("gram_residual", worst(&states, |s| Ok(solve_multipliers(sys, c, s)?.residual)), IDENTITY_TOL));
        let field = geomech::constraints::constrained_field(sys, c);
        match field {
            Ok(d) => {
                out.push(Check::at_most(
                    "constraint_tangency",
                    worst(&states, |s| {
                        let acc = d.accel(s)?;
                        let mut m: f64 = 0.0;
                        for b in c.forms() {
                            m = m.max(form_dot_rate(b.as_ref(), &acc, s)?.abs());
                        }
                        Ok(m)
                    }),
                    TANGENCY_TOL,
                ));
                out.push(Check::at_most(
                    "orthonormal_route",
                    worst(&states, |s| {
                        let a = d.accel(s)?;
                        Ok(diff(&a, &orthonormal_constrained_accel(sys, c, s)?) / (1.0 + sup(&a)))
                    }),
                    ROUTE_TOL,
                ));
                out.push(Check::at_most(
                    "decomposition_sum",
                    worst(&states, |s| {
                        let dec = covariant_decomposition(sys, c, s)?;
                        let cv = geomech::dynamics::covariant_value(&d, sys, s)?;
                        Ok(diff(&dec.total(), &cv) / (1.0 + sup(&cv)))
                    }),
                    TANGENCY_TOL,
                ));
                out.push(Check::at_most(
                    "energy_identity_constrained",
                    worst(&states, |s| Ok(energy_residual(&d, sys, s)?.abs() / (1.0 + sup(&sys.work_values(s)?) * sup(&s.qdot)))),
                    IDENTITY_TOL,
                ));
                if sys.work_form().is_none() {
                    let bare = geomech::dynamics::MechanicalSystem::new(sys.chart().clone(), sys.metric().clone());
                    out.push(Check::at_most(
                        "geodesic_projection_part",
                        match bare {
                            Ok(bare) => worst(&states, |s| Ok(sup(&covariant_decomposition(&bare, c, s)?.projection))),
                            Err(e) => Err(e.to_string()),
                        },
                        IDENTITY_TOL,
                    ));
                }
            }
            Err(e) => out.push(Check::at_most("constraint_tangency", Err(e.to_string()), TANGENCY_TOL)),
        }
    }

    if let Some(tau) = &model.time {
        out.push(Check::at_most(
            "time_form_closed",
            worst(&states, |s| tau.closedness_defect(&s.q)),
            geomech::timeconstraint::CLOSED_TOL,
        ));
        if model.constraints.is_none() {
            match model.field() {
                Ok(d) => {
                    out.push(Check::at_most(
                        "time_tangency",
                        worst(&states, |s| Ok(form_dot_rate(tau.form(), &d.accel(s)?, s)?.abs())),
                        ROUTE_TOL,
                    ));
                    out.push(Check::at_most("newton_mod_time_form", worst(&states, |s| congruence_defect(&d, sys, tau, s)), ROUTE_TOL));
                }
                Err(e) => out.push(Check::at_most("time_tangency", Err(e.to_string()), ROUTE_TOL)),
            }
            if tau.coordinate_index().is_some() {
                out.push(Check::at_most(
                    "adapted_equations",
                    worst(&states, |s| Ok(sup(&adapted_equations_check(sys, tau, s)?))),
                    TANGENCY_TOL,
                ));
            }
        }
    }

    if let Some(tc) = &model.time_dependent {
        match time_dependent_field(sys, tc) {
            Ok(d) => {
                out.push(Check::at_most(
                    "augmented_gram_residual",
                    worst(&states, |s| Ok(d.accel_with_multipliers(s)?.1.residual)),
                    IDENTITY_TOL,
                ));
                out.push(Check::at_most(
                    "augmented_tangency",
                    worst(&states, |s| {
                        let acc = d.accel(s)?;
                        let mut m: f64 = 0.0;
                        for b in tc.augmented() {
                            m = m.max(form_dot_rate(b, &acc, s)?.abs());
                        }
                        Ok(m)
                    }),
                    TANGENCY_TOL,
                ));
            }
            Err(e) => out.push(Check::at_most("augmented_tangency", Err(e.to_string()), TANGENCY_TOL)),
        }
    }
}

fn channel_check(tr: &Trajectory, name: &str, check: &str, abs: bool, out: &mut Vec<Check>) {
    let Some(c) = tr.channel(name) else { return };
    let v = if abs { sup(c) } else { c.iter().map(|v| (v - c[0]).abs()).fold(0.0, f64::max) };
    out.push(Check::at_most(check, Ok(v), DRIFT_TOL));
}

fn leaf_check(model: &Model, tr: &Trajectory) -> Result<f64, String> {
    let leaf = model.leaf.as_ref().expect("checked by caller");
    let integ = model.integration.as_ref().expect("checked by caller");
    let d: Box<dyn SecondOrderField> = match &leaf.time {
        Some(t) => Box::new(geomech::timeconstraint::modified_field(&leaf.system, t).map_err(|e| e.to_string())?),
        None => Box::new(free_field(&leaf.system)),
    };
    let lt = integrate(d.as_ref(), &leaf.state0, integ.h, integ.t_end, &[], None).map_err(|e| e.to_string())?;
    if let Some((t, e)) = &lt.error {
        return Err(format!("leaf integration stopped at t = {t}: {e}"));
    }
    if lt.len() != tr.len() {
        return Err(format!("leaf trajectory has {} nodes, ambient {}", lt.len(), tr.len()));
    }
    let mut m: f64 = 0.0;
    for (a, b) in tr.states.iter().zip(&lt.states) {
        let p = leaf.embedding.eval(&b.q).map_err(|e| e.to_string())?;
        m = m.max(diff(&a.q, &p));
    }
    Ok(m)
}

fn integration_checks(model: &Model, out: &mut Vec<Check>) {
    let Some(integ) = &model.integration else { return };
    let run = || -> Result<Trajectory, CliError> {
        let d = model.field()?;
        let monitors = model.monitors()?;
        Ok(integrate(d.as_ref(), &integ.state0, integ.h, integ.t_end, &monitors, model.projector().as_ref())?)
    };
    let tr = match run() {
        Ok(tr) => tr,
        Err(e) => {
            out.push(Check::at_most("integration_completed", Err(e.to_string()), 0.0));
            return;
        }
    };
    let completed = match &tr.error {
        None => Ok(0.0),
        Some((t, e)) => Err(format!("stopped at t = {t}: {e}")),
    };
    out.push(Check::at_most("integration_completed", completed, 0.0));
    channel_check(&tr, "energy", "energy_drift", false, out);
    for name in tr.monitor_names.clone() {
        if let Some(k) = name.strip_prefix("beta_dot_") {
            channel_check(&tr, &name, &format!("constraint_rate_{k}"), true, out);
        }
        if let Some(k) = name.strip_prefix("level_") {
            channel_check(&tr, &name, &format!("leaf_level_drift_{k}"), false, out);
        }
    }
    channel_check(&tr, "tau_dot", "time_rate_drift", false, out);
    if model.leaf.is_some() {
        out.push(Check::at_most("leaf_match", leaf_check(model, &tr), LEAF_TOL));
    }
}

pub fn checks(model: &Model) -> Vec<Check> {
    let mut out = Vec::new();
    sampled_checks(model, &mut out);
    integration_checks(model, &mut out);
    out
}

/// Prints one line per check; fails when any check fails.
pub fn verify(model: &Model, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "config: {}", model.name())?;
    let all = checks(model);
    for c in &all {
        writeln!(out, "{c}")?;
    }
    let failed = all.iter().filter(|c| !c.passed()).count();
    writeln!(out, "{} checks, {} passed, {} failed", all.len(), all.len() - failed, failed)?;
    if failed > 0 {
        return Err(CliError::Verify { failed, total: all.len() });
    }
    Ok(())
}
