//! The `derive`, `simulate` and `frame` subcommands.

use std::io::Write;
use std::sync::Arc;

use geomech::constraints::{solve_multipliers, MultiplierSolution};
use geomech::dynamics::{covariant_value, kinetic_energy, MechanicalSystem};
use geomech::frames::{classify_frame, inertial_force, pullback_metric};
use geomech::geometry::{christoffel, inverse_at, Chart, Metric, TangentState};
use geomech::integrate::integrate;
use geomech::timeconstraint::time_dependent_field;
use nalgebra::DMatrix;

use crate::error::CliError;
use crate::model::Model;

pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.12e}", x + 0.0)).collect();
    format!("[{}]", parts.join(", "))
}

fn write_matrix(out: &mut dyn Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().cloned().collect();
        writeln!(out, "  {}", fmt_vec(&row))?;
    }
    Ok(())
}

fn write_geometry(out: &mut dyn Write, chart: &Chart, g: &dyn Metric, q: &[f64]) -> Result<(), CliError> {
    let names = chart.names();
    writeln!(out, "metric g:")?;
    write_matrix(out, &g.at(q)?)?;
    writeln!(out, "inverse metric:")?;
    write_matrix(out, &inverse_at(g, q)?)?;
    writeln!(out, "christoffel symbols of the second kind (nonzero, i <= j):")?;
    let gamma = christoffel(g, q)?;
    let n = chart.dim();
    let mut any = false;
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = gamma.second(l, i, j);
                if v != 0.0 {
                    any = true;
                    writeln!(out, "  G^{}_{} {} = {v:.12e}", names[l], names[i], names[j])?;
                }
            }
        }
    }
    if !any {
        writeln!(out, "  (all zero)")?;
    }
    Ok(())
}

fn write_multipliers(out: &mut dyn Write, sol: &MultiplierSolution) -> std::io::Result<()> {
    writeln!(
        out,
        "  multipliers: {} (Gram residual {:.3e}, condition {:.3e})",
        fmt_vec(&sol.lambda),
        sol.residual,
        sol.condition
    )
}

/// Geometry and every applicable field at one state.
pub fn derive(model: &Model, state: &TangentState, out: &mut dyn Write) -> Result<(), CliError> {
    let math = |e: geomech::Error| CliError::at_state(e, &state.q, &state.qdot);
    writeln!(out, "config: {}", model.name())?;
    writeln!(out, "chart: ({})", model.state_chart().names().join(", "))?;
    writeln!(out, "state: q = {}, qdot = {}", fmt_vec(&state.q), fmt_vec(&state.qdot))?;

    if let Some(f) = &model.frame {
        let frame = f.group.frame();
        let pb = pullback_metric(frame, f.ext_metric.clone()).map_err(math)?;
        writeln!(out, "frame: {} (source metric is the pullback of dt^2 + g)", f.group.name())?;
        write_geometry(out, frame.source(), &pb, &state.q).map_err(|e| annotate(e, state))?;
        let source = MechanicalSystem::new(frame.source().clone(), Arc::new(pb)).map_err(math)?;
        writeln!(out, "kinetic energy: {:.12e}", kinetic_energy(&source, state).map_err(math)?)?;
        let d = model.field()?;
        let acc = d.accel(state).map_err(math)?;
        writeln!(out, "field transported: accel = {}", fmt_vec(&acc))?;
        let force = inertial_force(frame, &f.ext_metric, &f.ext_metric, state).map_err(math)?;
        writeln!(out, "  inertial force: {}", fmt_vec(&force))?;
        return Ok(());
    }

    let sys = &model.system;
    write_geometry(out, &model.chart, sys.metric().as_ref(), &state.q).map_err(|e| annotate(e, state))?;
    writeln!(out, "kinetic energy: {:.12e}", kinetic_energy(sys, state).map_err(math)?)?;
    if sys.work_form().is_some() {
        writeln!(out, "work form: {}", fmt_vec(&sys.work_values(state).map_err(math)?))?;
    }
    for (name, d) in model.fields()? {
        let acc = d.accel(state).map_err(math)?;
        writeln!(out, "field {name}: accel = {}", fmt_vec(&acc))?;
        writeln!(out, "  covariant value: {}", fmt_vec(&covariant_value(d.as_ref(), sys, state).map_err(math)?))?;
        match name.as_str() {
            "constrained" => {
                let c = model.constraints.as_ref().expect("constrained field implies constraints");
                write_multipliers(out, &solve_multipliers(sys, c, state).map_err(math)?)?;
            }
            "time-dependent" => {
                let tc = model.time_dependent.as_ref().expect("time-dependent field implies constraints");
                let (_, sol) = time_dependent_field(sys, tc).map_err(math)?.accel_with_multipliers(state).map_err(math)?;
                write_multipliers(out, &sol)?;
            }
            _ => {}
        }
    }
    Ok(())
}

fn annotate(e: CliError, state: &TangentState) -> CliError {
    match e {
        CliError::Math(m) => CliError::Math(format!("{m} (state q = {:?}, qdot = {:?})", state.q, state.qdot)),
        other => other,
    }
}

/// CSV of the trajectory on stdout: t, positions, velocities, monitors.
pub fn simulate(model: &Model, out: &mut dyn Write) -> Result<(), CliError> {
    let integ = model.integration.as_ref().ok_or_else(|| model.source.error("simulate needs an [integration] section"))?;
    let d = model.field()?;
    let monitors = model.monitors()?;
    let projector = model.projector();
    let tr = integrate(d.as_ref(), &integ.state0, integ.h, integ.t_end, &monitors, projector.as_ref())
        .map_err(|e| CliError::at_state(e, &integ.state0.q, &integ.state0.qdot))?;

    let chart = model.state_chart();
    let mut header = vec!["t".to_string()];
    header.extend(chart.names().iter().cloned());
    header.extend((0..chart.dim()).map(|i| chart.velocity_name(i)));
    header.extend(tr.monitor_names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for (k, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
        line.clear();
        line.push_str(&format!("{t:.16e}"));
        for v in s.q.iter().chain(&s.qdot).chain(tr.monitors.iter().map(|c| &c[k])) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    if let Some((t, e)) = &tr.error {
        let last = tr.last();
        return Err(CliError::Math(format!(
            "integration stopped at t = {t}: {e} (last good state q = {:?}, qdot = {:?})",
            last.q, last.qdot
        )));
    }
    Ok(())
}

/// Pullback metric and inertial force at samples, then the classification.
pub fn frame(model: &Model, out: &mut dyn Write) -> Result<(), CliError> {
    let f = model.frame.as_ref().ok_or_else(|| model.source.error("frame needs a [frame] section"))?;
    let frame = f.group.frame();
    let chart = frame.source();
    writeln!(out, "frame: {} on ({})", f.group.name(), chart.names().join(", "))?;
    let c = classify_frame(&f.group, &model.metric, &model.sampling.bounds, model.sampling.budget)?;
    let pb = pullback_metric(frame, f.ext_metric.clone())?;
    writeln!(out, "pullback metric at sample points:")?;
    for s in c.samples.iter().take(3) {
        writeln!(out, " at q = {}:", fmt_vec(&s.state.q))?;
        write_matrix(out, &pb.at(&s.state.q)?)?;
    }
    writeln!(out, "inertial force at sample states:")?;
    for s in c.samples.iter().take(5) {
        writeln!(out, "  q = {}, qdot = {}: {}", fmt_vec(&s.state.q), fmt_vec(&s.state.qdot), fmt_vec(&s.force))?;
    }
    writeln!(out, "classification over {} samples:", c.samples.len())?;
    writeln!(out, "{c}")?;
    writeln!(out, "inertial force routes agree: {}", c.force_routes_agree)?;
    writeln!(
        out,
        "verdict: inertial={} isometry={} preserves={}",
        c.inertial, c.isometry_group, c.preserves_equations
    )?;
    Ok(())
}
