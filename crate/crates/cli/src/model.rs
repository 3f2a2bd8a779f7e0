//! Turns a config into module inputs.

use std::sync::Arc;

use geomech::constraints::{constrained_field, project_velocity, ConstraintSystem};
use geomech::dynamics::{form_dot, free_field, kinetic_energy, MechanicalSystem, SecondOrderField};
use geomech::frames::{transported_field, ExprMap, GroupFrame, SampleBox, TimeProductMetric, DEFAULT_BUDGET, TIME};
use geomech::geometry::{Chart, CoForm, Metric, MetricField, OneForm, TangentState};
use geomech::integrate::{Monitor, Projector};
use geomech::sampling::Halton;
use geomech::timeconstraint::{modified_field, time_dependent_field, TimeDependentConstraints, TimeForm};
use geomech::Expr;

use crate::config::{Config, Source, Text};
use crate::error::CliError;

/// Which variables an expression may use.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Vars {
    Positions,
    States,
}

pub struct FrameModel {
    pub group: GroupFrame,
    /// (ℝ × M, dt² ⊕ g) with the forces, as seen in the target.
    pub target: MechanicalSystem,
    pub ext_metric: Arc<dyn Metric>,
}

pub struct LeafModel {
    pub system: MechanicalSystem,
    pub time: Option<TimeForm>,
    pub embedding: ExprMap,
    pub state0: TangentState,
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub h: f64,
    pub t_end: f64,
    pub state0: TangentState,
    pub project: bool,
}

#[derive(Clone, Debug)]
pub struct Sampling {
    pub bounds: SampleBox,
    pub count: usize,
    pub budget: usize,
}

pub struct Model {
    pub source: Source,
    pub chart: Chart,
    pub metric: Arc<dyn Metric>,
    pub system: MechanicalSystem,
    pub constraints: Option<ConstraintSystem>,
    pub time: Option<TimeForm>,
    pub time_dependent: Option<TimeDependentConstraints>,
    pub frame: Option<FrameModel>,
    pub leaf: Option<LeafModel>,
    pub integration: Option<Integration>,
    pub sampling: Sampling,
}

fn parse_expr(src: &Source, t: &Text, chart: &Chart, vars: Vars) -> Result<Expr, CliError> {
    let e = Expr::parse(t.get_ref()).map_err(|e| src.error_at(t, &format!("`{}`: {e}", t.get_ref())))?;
    for v in e.variables() {
        let known = chart.index_of(&v).is_some()
            || (vars == Vars::States && (0..chart.dim()).any(|i| chart.velocity_name(i) == v));
        if !known {
            let allowed = if vars == Vars::States { "coordinates and velocities" } else { "coordinates" };
            return Err(src.error_at(t, &format!("`{v}` is not one of the {allowed} of chart {:?}", chart.names())));
        }
    }
    Ok(e)
}

fn parse_list(src: &Source, ts: &[Text], chart: &Chart, vars: Vars) -> Result<Vec<Expr>, CliError> {
    ts.iter().map(|t| parse_expr(src, t, chart, vars)).collect()
}

fn check_len(src: &Source, what: &str, want: usize, got: usize) -> Result<(), CliError> {
    if want != got {
        return Err(src.error(&format!("{what}: expected {want} entries, got {got}")));
    }
    Ok(())
}

fn metric_field(
    src: &Source,
    chart: &Chart,
    rows: &Option<Vec<Vec<Text>>>,
    diagonal: &Option<Vec<Text>>,
    what: &str,
) -> Result<MetricField, CliError> {
    let loc = |e: geomech::Error| src.error(&format!("{what}: {e}"));
    match (rows, diagonal) {
        (Some(rows), None) => {
            check_len(src, &format!("{what} rows"), chart.dim(), rows.len())?;
            let mut parsed = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                check_len(src, &format!("{what} row {i}"), i + 1, row.len())?;
                parsed.push(parse_list(src, row, chart, Vars::Positions)?);
            }
            MetricField::from_lower(chart.clone(), parsed).map_err(loc)
        }
        (None, Some(d)) => {
            check_len(src, &format!("{what} diagonal"), chart.dim(), d.len())?;
            MetricField::diagonal(chart.clone(), parse_list(src, d, chart, Vars::Positions)?).map_err(loc)
        }
        _ => Err(src.error(&format!("{what}: give exactly one of `rows` or `diagonal`"))),
    }
}

/// Adds the configured forces to `sys`; `pad` zero components are put in
/// front of covector data (for the time direction of a frame).
fn with_forces(src: &Source, cfg: &Config, sys: MechanicalSystem, pad: usize) -> Result<MechanicalSystem, CliError> {
    let Some(f) = &cfg.forces else { return Ok(sys) };
    let chart = sys.chart().clone();
    let comps = |ts: &Vec<Text>| -> Result<Vec<Expr>, CliError> {
        check_len(src, "force components", chart.dim() - pad, ts.len())?;
        let mut v = vec![Expr::num(0.0); pad];
        v.extend(parse_list(src, ts, &chart, Vars::States)?);
        Ok(v)
    };
    let sys = match (&f.work_form, &f.potential, &f.force) {
        (None, None, None) => sys,
        (Some(w), None, None) => {
            let form = OneForm::components(chart.clone(), comps(w)?)?;
            sys.with_work_form(Arc::new(form))?
        }
        (None, Some(u), None) => sys.with_potential(parse_expr(src, u, &chart, Vars::Positions)?)?,
        (None, None, Some(fc)) => sys.with_force(comps(fc)?)?,
        _ => return Err(src.error("forces: give at most one of `work_form`, `potential`, `force`")),
    };
    Ok(sys)
}

fn coordinate_time(src: &Source, t: &Text, chart: &Chart) -> Result<TimeForm, CliError> {
    let s = t.get_ref().trim();
    let name = s.strip_prefix('d').filter(|n| chart.index_of(n).is_some());
    match name {
        Some(n) => Ok(TimeForm::coordinate(chart, n)?),
        None => Err(src.error_at(t, &format!("time form `{s}` must be d<coordinate> for one of {:?}", chart.names()))),
    }
}

fn halton_points(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut h = Halton::new(lo.len());
    (0..count).map(|_| h.next_in(lo, hi)).collect()
}

impl Model {
    pub fn load(spec: &str) -> Result<Model, CliError> {
        Model::build(Source::load(spec)?)
    }

    pub fn from_str(origin: &str, text: &str) -> Result<Model, CliError> {
        Model::build(Source::parse(origin, text)?)
    }

    pub fn build(src: Source) -> Result<Model, CliError> {
        let cfg = src.config.clone();
        let chart = Chart::new(&cfg.chart.coords).map_err(|e| src.error(&e.to_string()))?;
        let n = chart.dim();
        let metric: Arc<dyn Metric> = Arc::new(metric_field(&src, &chart, &cfg.metric.rows, &cfg.metric.diagonal, "metric")?);
        let system = with_forces(&src, &cfg, MechanicalSystem::new(chart.clone(), metric.clone())?, 0)?;

        let frame = match &cfg.frame {
            None => None,
            Some(fs) => {
                if cfg.constraints.is_some() || cfg.time.is_some() {
                    return Err(src.error("a frame cannot be combined with constraints or a time form"));
                }
                let rate = fs.rate.unwrap_or(1.0);
                let bad = |e: geomech::Error| src.error(&format!("frame: {e}"));
                let group = match fs.kind.as_str() {
                    "translation" => {
                        let d = fs.direction.as_ref().ok_or_else(|| src.error("frame: translation needs `direction`"))?;
                        GroupFrame::translation(chart.clone(), d).map_err(bad)?
                    }
                    "rotation" => {
                        let p = fs.plane.unwrap_or([0, 1]);
                        GroupFrame::rotation(chart.clone(), rate, (p[0], p[1])).map_err(bad)?
                    }
                    "dilatation" => GroupFrame::dilatation(chart.clone(), rate).map_err(bad)?,
                    "explicit" => {
                        let (Some(f), Some(inv)) = (&fs.flow, &fs.inverse) else {
                            return Err(src.error("frame: explicit frames need `flow` and `inverse`"));
                        };
                        check_len(&src, "frame flow", n, f.len())?;
                        check_len(&src, "frame inverse", n, inv.len())?;
                        let mut names = vec![TIME.to_string()];
                        names.extend(chart.names().iter().cloned());
                        let full = Chart::new(&names).map_err(bad)?;
                        let fl = parse_list(&src, f, &full, Vars::Positions)?;
                        let il = parse_list(&src, inv, &full, Vars::Positions)?;
                        GroupFrame::new("explicit", chart.clone(), fl, il).map_err(bad)?
                    }
                    other => {
                        return Err(src.error(&format!(
                            "frame: unknown kind `{other}` (translation, rotation, dilatation, explicit)"
                        )))
                    }
                };
                let ext_metric: Arc<dyn Metric> = Arc::new(TimeProductMetric::new(metric.clone()));
                let target = MechanicalSystem::new(group.frame().target().clone(), ext_metric.clone())?;
                let target = with_forces(&src, &cfg, target, 1)?;
                Some(FrameModel { group, target, ext_metric })
            }
        };
        let state_dim = if frame.is_some() { n + 1 } else { n };

        let integration = match &cfg.integration {
            None => None,
            Some(i) => {
                check_len(&src, "integration.q0", state_dim, i.q0.len())?;
                check_len(&src, "integration.qdot0", state_dim, i.qdot0.len())?;
                if !(i.h > 0.0) || !(i.t_end >= 0.0) {
                    return Err(src.error("integration: need h > 0 and t_end >= 0"));
                }
                Some(Integration {
                    h: i.h,
                    t_end: i.t_end,
                    state0: TangentState::new(i.q0.clone(), i.qdot0.clone())?,
                    project: i.project.unwrap_or(false),
                })
            }
        };

        let sampling = {
            let s = cfg.sampling.clone().unwrap_or_default();
            let (dlo, dhi) = match &integration {
                Some(i) => {
                    let q = &i.state0.q[state_dim - n..];
                    (q.iter().map(|v| v - 0.5).collect(), q.iter().map(|v| v + 0.5).collect())
                }
                None => (vec![-1.0; n], vec![1.0; n]),
            };
            let lo = s.lo.unwrap_or(dlo);
            let hi = s.hi.unwrap_or(dhi);
            check_len(&src, "sampling.lo", n, lo.len())?;
            check_len(&src, "sampling.hi", n, hi.len())?;
            let t_range = s.t_range.unwrap_or([-1.0, 1.0]);
            Sampling {
                bounds: SampleBox { lo, hi, velocity: s.velocity.unwrap_or(1.0), t_range: (t_range[0], t_range[1]) },
                count: s.count.unwrap_or(20),
                budget: s.budget.unwrap_or(DEFAULT_BUDGET),
            }
        };

        let constraints = match &cfg.constraints {
            None => None,
            Some(c) => Some(match (&c.forms, &c.functions) {
                (Some(forms), None) => {
                    let mut parsed = Vec::with_capacity(forms.len());
                    for f in forms {
                        check_len(&src, "constraint form", n, f.len())?;
                        parsed.push(OneForm::components(chart.clone(), parse_list(&src, f, &chart, Vars::Positions)?)?);
                    }
                    ConstraintSystem::linear(&chart, parsed).map_err(|e| src.error(&format!("constraints: {e}")))?
                }
                (None, Some(fs)) => ConstraintSystem::holonomic(&chart, parse_list(&src, fs, &chart, Vars::Positions)?)
                    .map_err(|e| src.error(&format!("constraints: {e}")))?,
                _ => return Err(src.error("constraints: give exactly one of `forms` or `functions`")),
            }),
        };

        let time = match &cfg.time {
            None => None,
            Some(t) => Some(match (&t.form, &t.components, &t.function) {
                (Some(f), None, None) => coordinate_time(&src, f, &chart)?,
                (None, Some(c), None) => {
                    check_len(&src, "time components", n, c.len())?;
                    let form = OneForm::components(chart.clone(), parse_list(&src, c, &chart, Vars::Positions)?)?;
                    let pts = halton_points(&sampling.bounds.lo, &sampling.bounds.hi, 8);
                    TimeForm::from_form(Arc::new(form), &pts).map_err(|e| src.error(&format!("time: {e}")))?
                }
                (None, None, Some(f)) => TimeForm::exact(&chart, parse_expr(&src, f, &chart, Vars::Positions)?)?,
                _ => return Err(src.error("time: give exactly one of `form`, `components`, `function`")),
            }),
        };

        let time_dependent = match (&time, &constraints) {
            (Some(t), Some(c)) => {
                let tc = TimeDependentConstraints::new(t.clone(), c.clone()).map_err(|e| src.error(&format!("time: {e}")))?;
                let definite = cfg.time.as_ref().and_then(|t| t.assume_definite).unwrap_or(false);
                Some(if definite { tc.assuming_definite_restrictions() } else { tc })
            }
            _ => None,
        };

        let leaf = match &cfg.leaf {
            None => None,
            Some(l) => {
                let lc = Chart::new(&l.coords).map_err(|e| src.error(&format!("leaf: {e}")))?;
                let lm = metric_field(&src, &lc, &l.rows, &l.diagonal, "leaf metric")?;
                let mut sys = MechanicalSystem::new(lc.clone(), Arc::new(lm))?;
                if let Some(u) = &l.potential {
                    sys = sys.with_potential(parse_expr(&src, u, &lc, Vars::Positions)?)?;
                }
                let time = l.time.as_ref().map(|t| coordinate_time(&src, t, &lc)).transpose()?;
                check_len(&src, "leaf embedding", state_dim, l.embedding.len())?;
                let embedding = ExprMap::new(lc.clone(), parse_list(&src, &l.embedding, &lc, Vars::Positions)?)?;
                check_len(&src, "leaf.q0", lc.dim(), l.q0.len())?;
                check_len(&src, "leaf.qdot0", lc.dim(), l.qdot0.len())?;
                let state0 = TangentState::new(l.q0.clone(), l.qdot0.clone())?;
                Some(LeafModel { system: sys, time, embedding, state0 })
            }
        };

        let model = Model { source: src, chart, metric, system, constraints, time, time_dependent, frame, leaf, integration, sampling };
        if model.integration.as_ref().is_some_and(|i| i.project) && model.projection_forms().0.is_empty() {
            return Err(model.source.error("integration.project needs constraints or a time form"));
        }
        Ok(model)
    }

    pub fn config(&self) -> &Config {
        &self.source.config
    }

    pub fn name(&self) -> &str {
        self.config().name.as_deref().unwrap_or(&self.source.origin)
    }

    /// Chart of the integrated states: (t, coordinates) for frames.
    pub fn state_chart(&self) -> &Chart {
        match &self.frame {
            Some(f) => f.group.frame().source(),
            None => &self.chart,
        }
    }

    /// The field that governs the motion: frame, then time with
    /// constraints, then time, then constraints, then free.
    pub fn field(&self) -> Result<Arc<dyn SecondOrderField>, CliError> {
        if let Some(f) = &self.frame {
            return Ok(Arc::new(transported_field(f.group.frame(), Arc::new(free_field(&f.target)))?));
        }
        if let Some(tc) = &self.time_dependent {
            return Ok(Arc::new(time_dependent_field(&self.system, tc)?));
        }
        if let Some(t) = &self.time {
            return Ok(Arc::new(modified_field(&self.system, t)?));
        }
        if let Some(c) = &self.constraints {
            return Ok(Arc::new(constrained_field(&self.system, c)?));
        }
        Ok(Arc::new(free_field(&self.system)))
    }

    /// Every field the config defines, governing field last.
    pub fn fields(&self) -> Result<Vec<(String, Arc<dyn SecondOrderField>)>, CliError> {
        let mut out: Vec<(String, Arc<dyn SecondOrderField>)> = Vec::new();
        if self.frame.is_some() {
            out.push(("transported".into(), self.field()?));
            return Ok(out);
        }
        out.push(("free".into(), Arc::new(free_field(&self.system))));
        if let Some(c) = &self.constraints {
            out.push(("constrained".into(), Arc::new(constrained_field(&self.system, c)?)));
        }
        if let Some(t) = &self.time {
            out.push(("time-constrained".into(), Arc::new(modified_field(&self.system, t)?)));
        }
        if let Some(tc) = &self.time_dependent {
            out.push(("time-dependent".into(), Arc::new(time_dependent_field(&self.system, tc)?)));
        }
        Ok(out)
    }

    /// Energy is conserved when the only force has a potential and nothing
    /// depends on time.
    pub fn conservative(&self) -> bool {
        let forces_ok = match &self.config().forces {
            None => true,
            Some(f) => f.work_form.is_none() && f.force.is_none(),
        };
        forces_ok && self.frame.is_none() && self.time.is_none()
    }

    /// Built-in monitor channels followed by the configured ones.
    pub fn monitors(&self) -> Result<Vec<Monitor>, CliError> {
        let mut out = Vec::new();
        if self.conservative() {
            let sys = self.system.clone();
            out.push(Monitor::new("energy", move |s| Ok(kinetic_energy(&sys, s)? + sys.potential_energy(&s.q)?.unwrap_or(0.0))));
        }
        if let Some(c) = &self.constraints {
            for (k, f) in c.forms().iter().enumerate() {
                let f = f.clone();
                out.push(Monitor::new(&format!("beta_dot_{}", k + 1), move |s| form_dot(f.as_ref(), s)));
            }
            if let Some(fs) = c.functions() {
                for (k, b) in fs.iter().enumerate() {
                    out.push(Monitor::expr(&self.chart, &format!("level_{}", k + 1), b.clone()));
                }
            }
        }
        if let Some(t) = &self.time {
            let t = t.clone();
            out.push(Monitor::new("tau_dot", move |s| t.rate(s)));
        }
        for (name, text) in &self.config().monitors {
            if out.iter().any(|m| m.name() == name) {
                return Err(self.source.error_at(text, &format!("monitor `{name}` clashes with a built-in channel")));
            }
            let e = parse_expr(&self.source, text, self.state_chart(), Vars::States)?;
            out.push(Monitor::expr(self.state_chart(), name, e));
        }
        Ok(out)
    }

    /// Forms and targets defining the admissible velocities: τ̇ = 1 first
    /// when a time form is present, then β̇_k = 0.
    pub fn projection_forms(&self) -> (Vec<Arc<dyn CoForm>>, Vec<f64>) {
        let mut forms = Vec::new();
        let mut targets = Vec::new();
        if let Some(t) = &self.time {
            forms.push(t.form_arc());
            targets.push(1.0);
        }
        if let Some(c) = &self.constraints {
            for f in c.forms() {
                forms.push(f.clone());
                targets.push(0.0);
            }
        }
        (forms, targets)
    }

    pub fn projector(&self) -> Option<Projector> {
        let i = self.integration.as_ref()?;
        if !i.project {
            return None;
        }
        let (forms, targets) = self.projection_forms();
        Some(Projector::onto_forms(&self.system, forms, targets))
    }

    /// Quasi-random positions in the sampling box.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        halton_points(&self.sampling.bounds.lo, &self.sampling.bounds.hi, count)
    }

    /// Quasi-random states, with velocities in [−v, v] and no projection.
    pub fn raw_states(&self, count: usize) -> Result<Vec<TangentState>, CliError> {
        let b = &self.sampling.bounds;
        let n = b.lo.len();
        let mut lo = b.lo.clone();
        let mut hi = b.hi.clone();
        lo.extend(std::iter::repeat(-b.velocity).take(n));
        hi.extend(std::iter::repeat(b.velocity).take(n));
        halton_points(&lo, &hi, count)
            .into_iter()
            .map(|x| Ok(TangentState::new(x[..n].to_vec(), x[n..].to_vec())?))
            .collect()
    }

    /// Sampled states on the admissible set of the governing field: for
    /// frames (t, a; 1, ȧ); otherwise velocities projected onto the
    /// constraint and time conditions.
    pub fn admissible_states(&self, count: usize) -> Result<Vec<TangentState>, CliError> {
        let raw = self.raw_states(count)?;
        if self.frame.is_some() {
            let (t0, t1) = self.sampling.bounds.t_range;
            let mut h = Halton::new(1);
            return raw
                .into_iter()
                .map(|s| {
                    let mut q = h.next_in(&[t0], &[t1]);
                    q.extend(s.q);
                    let mut v = vec![1.0];
                    v.extend(s.qdot);
                    Ok(TangentState::new(q, v)?)
                })
                .collect();
        }
        let (forms, targets) = self.projection_forms();
        if forms.is_empty() {
            return Ok(raw);
        }
        let refs: Vec<&dyn CoForm> = forms.iter().map(|f| f.as_ref()).collect();
        raw.into_iter()
            .map(|s| {
                let local = self.system.local(&s.q).map_err(|e| CliError::at_state(e, &s.q, &s.qdot))?;
                let p = project_velocity(&local, &refs, &targets, &s).map_err(|e| CliError::at_state(e, &s.q, &s.qdot))?;
                Ok(TangentState::new(s.q, p.qdot)?)
            })
            .collect()
    }

    /// Parses a state given as "q1,q2,..;qdot1,qdot2,..".
    pub fn parse_state(&self, text: &str) -> Result<TangentState, CliError> {
        let n = self.state_chart().dim();
        let bad = |m: &str| CliError::config("--state", None, m);
        let (q, v) = text.split_once(';').ok_or_else(|| bad("expected \"q1,..,qn;qdot1,..,qdotn\""))?;
        let nums = |s: &str| -> Result<Vec<f64>, CliError> {
            s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| bad(&format!("`{}`: {e}", x.trim())))).collect()
        };
        let (q, v) = (nums(q)?, nums(v)?);
        if q.len() != n || v.len() != n {
            return Err(bad(&format!("state needs {n} positions and {n} velocities for chart {:?}", self.state_chart().names())));
        }
        Ok(TangentState::new(q, v)?)
    }
}
