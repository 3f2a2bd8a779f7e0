//! Fixed-step classical Runge-Kutta for second-order fields, with monitors
//! evaluated at every node.

use std::fmt;
use std::sync::Arc;

use crate::constraints::project_velocity;
use crate::dynamics::{MechanicalSystem, SecondOrderField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Chart, CoForm, TangentState};

type StateFn = dyn Fn(&TangentState) -> Result<f64> + Send + Sync;
type ProjectFn = dyn Fn(&TangentState) -> Result<(TangentState, f64)> + Send + Sync;

/// A named scalar function of the state.
#[derive(Clone)]
pub struct Monitor {
    name: String,
    f: Arc<StateFn>,
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Monitor({})", self.name)
    }
}

impl Monitor {
    pub fn new(name: &str, f: impl Fn(&TangentState) -> Result<f64> + Send + Sync + 'static) -> Monitor {
        Monitor { name: name.to_string(), f: Arc::new(f) }
    }

    /// Expression in the coordinates and `<coord>_dot` velocities.
    pub fn expr(chart: &Chart, name: &str, e: Expr) -> Monitor {
        let chart = chart.clone();
        Monitor::new(name, move |s| Ok(e.eval(&chart.env(&s.q, Some(&s.qdot)))?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, state: &TangentState) -> Result<f64> {
        (self.f)(state)
    }
}

/// Velocity correction applied after each step; returns the corrected
/// state and the size of the correction.
#[derive(Clone)]
pub struct Projector {
    f: Arc<ProjectFn>,
}

impl Projector {
    pub fn new(f: impl Fn(&TangentState) -> Result<(TangentState, f64)> + Send + Sync + 'static) -> Projector {
        Projector { f: Arc::new(f) }
    }

    /// Metric-orthogonal projection of q̇ onto {β_k(q̇) = target_k}.
    pub fn onto_forms(sys: &MechanicalSystem, forms: Vec<Arc<dyn CoForm>>, targets: Vec<f64>) -> Projector {
        let sys = sys.clone();
        Projector::new(move |s| {
            let local = sys.local(&s.q)?;
            let refs: Vec<&dyn CoForm> = forms.iter().map(|f| f.as_ref() as &dyn CoForm).collect();
            let p = project_velocity(&local, &refs, &targets, s)?;
            Ok((TangentState::new(s.q.clone(), p.qdot)?, p.magnitude))
        })
    }

    pub fn apply(&self, state: &TangentState) -> Result<(TangentState, f64)> {
        (self.f)(state)
    }
}

fn checked_accel(d: &dyn SecondOrderField, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let s = TangentState { q: q.to_vec(), qdot: v.to_vec() };
    let a = d.accel(&s)?;
    if a.iter().any(|x| !x.is_finite()) || q.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { q: s.q, qdot: s.qdot });
    }
    Ok(a)
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// One classical RK4 step of (q̇, q̈) = (v, accel(q, v)).
pub fn rk4_step(d: &dyn SecondOrderField, state: &TangentState, h: f64) -> Result<TangentState> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step size must be positive, got {h}")));
    }
    let (q, v) = (&state.q, &state.qdot);
    let k1q = v.clone();
    let k1v = checked_accel(d, q, v)?;
    let k2q = axpy(v, 0.5 * h, &k1v);
    let k2v = checked_accel(d, &axpy(q, 0.5 * h, &k1q), &k2q)?;
    let k3q = axpy(v, 0.5 * h, &k2v);
    let k3v = checked_accel(d, &axpy(q, 0.5 * h, &k2q), &k3q)?;
    let k4q = axpy(v, h, &k3v);
    let k4v = checked_accel(d, &axpy(q, h, &k3q), &k4q)?;
    let n = q.len();
    let mut q1 = Vec::with_capacity(n);
    let mut v1 = Vec::with_capacity(n);
    for i in 0..n {
        q1.push(q[i] + h / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]));
        v1.push(v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]));
    }
    if q1.iter().chain(&v1).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { q: q1, qdot: v1 });
    }
    Ok(TangentState { q: q1, qdot: v1 })
}

/// max-norm difference between one step of h and two steps of h/2.
pub fn step_doubling_error(d: &dyn SecondOrderField, state: &TangentState, h: f64) -> Result<f64> {
    let full = rk4_step(d, state, h)?;
    let half = rk4_step(d, &rk4_step(d, state, 0.5 * h)?, 0.5 * h)?;
    Ok(full
        .q
        .iter()
        .chain(&full.qdot)
        .zip(half.q.iter().chain(&half.qdot))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Number of steps and the step actually used: the largest step not above
/// `h` that lands exactly on `t_end`.
pub fn aligned_step(h: f64, t_end: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !(t_end >= 0.0) || !h.is_finite() || !t_end.is_finite() {
        return Err(Error::Precondition(format!("need h > 0 and t_end >= 0, got h = {h}, t_end = {t_end}")));
    }
    if t_end == 0.0 {
        return Ok((0, h));
    }
    let steps = (t_end / h - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

#[derive(Debug)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<TangentState>,
    pub monitor_names: Vec<String>,
    /// One channel per monitor, one value per node.
    pub monitors: Vec<Vec<f64>>,
    /// Size of the velocity correction applied after each step.
    pub projections: Vec<f64>,
    /// Set when the run stopped early; the trajectory holds the nodes
    /// reached before the failure.
    pub error: Option<(f64, Error)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &TangentState {
        self.states.last().expect("a trajectory holds at least its initial state")
    }

    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    /// max_k |m_k − m_0| for a monitor channel.
    pub fn drift(&self, channel: usize) -> f64 {
        let c = &self.monitors[channel];
        c.iter().map(|v| (v - c[0]).abs()).fold(0.0, f64::max)
    }

    pub fn drift_of(&self, name: &str) -> Option<f64> {
        self.monitor_names.iter().position(|n| n == name).map(|i| self.drift(i))
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.monitor_names.iter().position(|n| n == name).map(|i| self.monitors[i].as_slice())
    }

    pub fn drift_summary(&self) -> Vec<(String, f64)> {
        self.monitor_names.iter().enumerate().map(|(i, n)| (n.clone(), self.drift(i))).collect()
    }

    pub fn max_projection(&self) -> f64 {
        self.projections.iter().cloned().fold(0.0, f64::max)
    }
}

/// Integrates from `state0` over [0, t_end]. Errors in the initial data are
/// returned directly; failures mid-run end the trajectory early and are
/// recorded in `Trajectory::error`.
pub fn integrate(
    d: &dyn SecondOrderField,
    state0: &TangentState,
    h: f64,
    t_end: f64,
    monitors: &[Monitor],
    projector: Option<&Projector>,
) -> Result<Trajectory> {
    let (steps, h) = aligned_step(h, t_end)?;
    let mut traj = Trajectory {
        h,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        monitor_names: monitors.iter().map(|m| m.name.clone()).collect(),
        monitors: vec![Vec::with_capacity(steps + 1); monitors.len()],
        projections: Vec::new(),
        error: None,
    };
    record(&mut traj, 0.0, state0.clone(), monitors)?;
    let mut state = state0.clone();
    for k in 1..=steps {
        let t = k as f64 * h;
        let next = rk4_step(d, &state, h).and_then(|s| match projector {
            Some(p) => p.apply(&s),
            None => Ok((s, 0.0)),
        });
        let (next, moved) = match next {
            Ok(v) => v,
            Err(e) => {
                traj.error = Some((t, e));
                break;
            }
        };
        if let Err(e) = record(&mut traj, t, next.clone(), monitors) {
            traj.error = Some((t, e));
            break;
        }
        if projector.is_some() {
            traj.projections.push(moved);
        }
        state = next;
    }
    Ok(traj)
}

fn record(traj: &mut Trajectory, t: f64, state: TangentState, monitors: &[Monitor]) -> Result<()> {
    let values = monitors.iter().map(|m| m.eval(&state)).collect::<Result<Vec<_>>>()?;
    for (c, v) in traj.monitors.iter_mut().zip(values) {
        c.push(v);
    }
    traj.times.push(t);
    traj.states.push(state);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{free_field, FnField};
    use crate::geometry::MetricField;

    fn st(q: &[f64], v: &[f64]) -> TangentState {
        TangentState::new(q.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn zero_field_step() {
        let d = FnField::new(1, |_| Ok(vec![0.0]));
        let s = rk4_step(&d, &st(&[0.0], &[1.0]), 0.5).unwrap();
        assert_eq!((s.q, s.qdot), (vec![0.5], vec![1.0]));
    }

    #[test]
    fn oscillator_returns() {
        let d = FnField::new(1, |s| Ok(vec![-s.q[0]]));
        let tr = integrate(&d, &st(&[1.0], &[0.0]), 1e-3, 2.0 * std::f64::consts::PI, &[], None).unwrap();
        let end = tr.last();
        assert!((end.q[0] - 1.0).abs() < 1e-9 && end.qdot[0].abs() < 1e-9);
    }

    #[test]
    fn node_grid() {
        let c = Chart::new(&["x"]).unwrap();
        let sys = MechanicalSystem::new(c.clone(), Arc::new(MetricField::euclidean(c.clone()))).unwrap();
        let m = Monitor::expr(&c, "p", Expr::parse("x_dot").unwrap());
        let tr = integrate(&free_field(&sys), &st(&[0.0], &[1.0]), 0.5, 1.0, &[m], None).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(tr.states.iter().map(|s| s.q[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(tr.drift_of("p"), Some(0.0));
    }

    #[test]
    fn aligned_step_lands_on_end() {
        let (n, h) = aligned_step(1e-3, 2.0 * std::f64::consts::PI).unwrap();
        assert_eq!(n, 6284);
        assert!((n as f64 * h - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(aligned_step(0.5, 1.0).unwrap(), (2, 0.5));
        assert!(aligned_step(0.0, 1.0).is_err());
    }

    #[test]
    fn abort_keeps_partial_trajectory() {
        let d = FnField::new(1, |s| if s.q[0] > 0.3 { Ok(vec![f64::NAN]) } else { Ok(vec![0.0]) });
        let tr = integrate(&d, &st(&[0.0], &[1.0]), 0.1, 1.0, &[], None).unwrap();
        assert!(!tr.completed());
        assert!(matches!(tr.error, Some((_, Error::NonFinite { .. }))));
        assert!(tr.len() >= 3 && tr.len() < 11);
    }

    #[test]
    fn step_doubling_shrinks() {
        let d = FnField::new(1, |s| Ok(vec![-s.q[0]]));
        let s = st(&[1.0], &[0.0]);
        let e1 = step_doubling_error(&d, &s, 0.2).unwrap();
        let e2 = step_doubling_error(&d, &s, 0.1).unwrap();
        assert!(e1 / e2 > 20.0);
    }
}
