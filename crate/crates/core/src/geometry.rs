//! Chart-level pseudo-Riemannian machinery.
//!
//! Everything here works in one chart: a metric g_ij(q), its inverse, the
//! Christoffel symbols of both kinds, index raising of 1-forms and second
//! fundamental forms of vector fields. Metric derivatives are exact (dual
//! numbers through [`Expr`]), never finite differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};

pub const VELOCITY_SUFFIX: &str = "_dot";

/// Ordered coordinate names (q¹, …, qⁿ).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Chart> {
        if names.is_empty() {
            return Err(Error::InvalidChart("a chart needs at least one coordinate".into()));
        }
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let mut chars = n.chars();
            let ok_start = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
            if !ok_start || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::InvalidChart(format!("`{n}` is not an identifier")));
            }
            if n.ends_with(VELOCITY_SUFFIX) {
                return Err(Error::InvalidChart(format!("`{n}` ends in `{VELOCITY_SUFFIX}`")));
            }
            if out.iter().any(|m| m == n) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{n}`")));
            }
            out.push(n.to_string());
        }
        Ok(Chart { names: out })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_refs(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn velocity_name(&self, i: usize) -> String {
        format!("{}{VELOCITY_SUFFIX}", self.names[i])
    }

    /// True when `e` references a velocity variable of this chart.
    pub fn mentions_velocity(&self, e: &Expr) -> bool {
        e.variables().iter().any(|v| {
            v.strip_suffix(VELOCITY_SUFFIX).is_some_and(|base| self.index_of(base).is_some())
        })
    }

    pub fn env<'a>(&'a self, q: &'a [f64], qdot: Option<&'a [f64]>) -> StateEnv<'a> {
        StateEnv { chart: self, q, qdot }
    }
}

/// A point of TM in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl TangentState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<TangentState> {
        if q.len() != qdot.len() {
            return Err(Error::Dimension(format!("{} positions but {} velocities", q.len(), qdot.len())));
        }
        if q.iter().chain(&qdot).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("state has non-finite entries".into()));
        }
        Ok(TangentState { q, qdot })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// Variable bindings for a chart at a state: `x` → qⁱ, `x_dot` → q̇ⁱ.
pub struct StateEnv<'a> {
    chart: &'a Chart,
    q: &'a [f64],
    qdot: Option<&'a [f64]>,
}

impl Bindings for StateEnv<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        if let Some(i) = self.chart.index_of(name) {
            return Some(self.q[i]);
        }
        let base = name.strip_suffix(VELOCITY_SUFFIX)?;
        let i = self.chart.index_of(base)?;
        self.qdot.map(|v| v[i])
    }
}

pub(crate) fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!("{what}: expected {expected}, got {got}")));
    }
    Ok(())
}

/// Metric coefficients g_ij(q) with exact first derivatives.
pub trait Metric: Send + Sync {
    fn dim(&self) -> usize;
    fn at(&self, q: &[f64]) -> Result<DMatrix<f64>>;
    /// `out[k][(i, j)] = ∂g_ij/∂qᵏ`.
    fn derivatives(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>>;
}

impl<M: Metric + ?Sized> Metric for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        (**self).at(q)
    }
    fn derivatives(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        (**self).derivatives(q)
    }
}

/// Symmetric grid of expression entries over a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Chart,
    entries: Vec<Expr>,
}

impl MetricField {
    /// From lower-triangular rows: row i holds g_i0 … g_ii.
    pub fn from_lower(chart: Chart, rows: Vec<Vec<Expr>>) -> Result<MetricField> {
        let n = chart.dim();
        check_dim("metric rows", n, rows.len())?;
        let mut entries = vec![Expr::Num(0.0); n * n];
        for (i, row) in rows.into_iter().enumerate() {
            check_dim(&format!("metric row {i}"), i + 1, row.len())?;
            for (j, e) in row.into_iter().enumerate() {
                entries[i * n + j] = e.clone();
                entries[j * n + i] = e;
            }
        }
        MetricField::checked(chart, entries)
    }

    /// From a full n×n grid; the grid must be symmetric as written.
    pub fn from_full(chart: Chart, rows: Vec<Vec<Expr>>) -> Result<MetricField> {
        let n = chart.dim();
        check_dim("metric rows", n, rows.len())?;
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            check_dim(&format!("metric row {i}"), n, row.len())?;
            entries.extend(row);
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidData(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        MetricField::checked(chart, entries)
    }

    pub fn diagonal(chart: Chart, diag: Vec<Expr>) -> Result<MetricField> {
        let n = chart.dim();
        check_dim("metric diagonal", n, diag.len())?;
        let rows = diag
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut row = vec![Expr::Num(0.0); i];
                row.push(d);
                row
            })
            .collect();
        MetricField::from_lower(chart, rows)
    }

    pub fn euclidean(chart: Chart) -> MetricField {
        let n = chart.dim();
        MetricField::diagonal(chart, vec![Expr::Num(1.0); n]).expect("dimensions agree")
    }

    fn checked(chart: Chart, entries: Vec<Expr>) -> Result<MetricField> {
        for e in &entries {
            if chart.mentions_velocity(e) {
                return Err(Error::InvalidData(format!("metric entry `{e}` depends on velocities")));
            }
        }
        Ok(MetricField { chart, entries })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.chart.dim() + j]
    }
}

impl Metric for MetricField {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn at(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        check_dim("point", n, q.len())?;
        let env = self.chart.env(q, None);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.entry(i, j).eval(&env)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    fn derivatives(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        check_dim("point", n, q.len())?;
        let env = self.chart.env(q, None);
        let mut out = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in 0..=i {
                let e = self.entry(i, j);
                if e.as_constant().is_some() {
                    continue;
                }
                for (k, dk) in out.iter_mut().enumerate() {
                    let v = e.diff(&self.chart.names()[k], &env)?;
                    dk[(i, j)] = v;
                    dk[(j, i)] = v;
                }
            }
        }
        Ok(out)
    }
}

pub fn metric_at(g: &(impl Metric + ?Sized), q: &[f64]) -> Result<DMatrix<f64>> {
    g.at(q)
}

/// Inverse of a metric matrix, rejecting (numerically) singular ones.
pub fn invert_metric(g: &DMatrix<f64>, q: &[f64]) -> Result<DMatrix<f64>> {
    // Hadamard ratio |det g| / Π‖row‖ is scale free and 1 for orthogonal rows.
    let det = g.determinant();
    let rows: f64 = g.row_iter().map(|r| r.norm()).product();
    if rows == 0.0 || !(det.abs() / rows > 1e-13) {
        return Err(Error::DegenerateMetric { at: q.to_vec() });
    }
    g.clone().try_inverse().ok_or_else(|| Error::DegenerateMetric { at: q.to_vec() })
}

pub fn inverse_at(g: &(impl Metric + ?Sized), q: &[f64]) -> Result<DMatrix<f64>> {
    invert_metric(&g.at(q)?, q)
}

pub fn require_positive_definite(g: &DMatrix<f64>, q: &[f64]) -> Result<()> {
    if nalgebra::Cholesky::new(g.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { at: q.to_vec() });
    }
    Ok(())
}

/// Christoffel symbols at a point.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Γ_ij,k (first kind).
    pub fn first(&self, i: usize, j: usize, k: usize) -> f64 {
        self.first[(i * self.n + j) * self.n + k]
    }

    /// Γˡ_ij (second kind).
    pub fn second(&self, l: usize, i: usize, j: usize) -> f64 {
        self.second[(l * self.n + i) * self.n + j]
    }

    /// Γˡ_ij q̇ⁱ q̇ʲ for each l.
    pub fn contract(&self, qdot: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|l| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.second(l, i, j) * qdot[i] * qdot[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Γ_ij,k q̇ⁱ q̇ʲ for each k.
    pub fn contract_first(&self, qdot: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.first(i, j, k) * qdot[i] * qdot[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn from_parts(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
        let n = g_inv.nrows();
        let mut first = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    first[(i * n + j) * n + k] = 0.5 * (dg[j][(i, k)] + dg[i][(j, k)] - dg[k][(i, j)]);
                }
            }
        }
        let mut second = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += g_inv[(l, k)] * first[(i * n + j) * n + k];
                    }
                    second[(l * n + i) * n + j] = s;
                }
            }
        }
        Christoffel { n, first, second }
    }
}

/// Metric, inverse, derivatives and Christoffel symbols at one point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub gamma: Christoffel,
}

impl LocalGeometry {
    pub fn at(metric: &(impl Metric + ?Sized), q: &[f64]) -> Result<LocalGeometry> {
        let g = metric.at(q)?;
        let g_inv = invert_metric(&g, q)?;
        let dg = metric.derivatives(q)?;
        let gamma = Christoffel::from_parts(&g_inv, &dg);
        Ok(LocalGeometry { g, g_inv, dg, gamma })
    }

    pub fn raise(&self, form: &[f64]) -> Vec<f64> {
        (&self.g_inv * DVector::from_column_slice(form)).as_slice().to_vec()
    }

    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        (&self.g * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.g[(i, j)] * a[i] * b[j];
            }
        }
        s
    }
}

pub fn christoffel(g: &(impl Metric + ?Sized), q: &[f64]) -> Result<Christoffel> {
    Ok(LocalGeometry::at(g, q)?.gamma)
}

/// A 1-form on TM that is horizontal: components A_i(q, q̇) dqⁱ.
pub trait CoForm: Send + Sync {
    fn dim(&self) -> usize;
    fn values(&self, state: &TangentState) -> Result<Vec<f64>>;
    fn velocity_dependent(&self) -> bool;
    /// `J[(i, j)] = ∂A_i/∂qʲ`; only meaningful for forms on M.
    fn q_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>>;
}

impl<F: CoForm + ?Sized> CoForm for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn values(&self, state: &TangentState) -> Result<Vec<f64>> {
        (**self).values(state)
    }
    fn velocity_dependent(&self) -> bool {
        (**self).velocity_dependent()
    }
    fn q_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        (**self).q_jacobian(q)
    }
}

#[derive(Clone, Debug)]
enum FormKind {
    Components(Vec<Expr>),
    /// df for the given f.
    Exact(Expr),
}

/// Expression-backed 1-form over a chart.
#[derive(Clone, Debug)]
pub struct OneForm {
    chart: Chart,
    kind: FormKind,
}

impl OneForm {
    pub fn components(chart: Chart, comps: Vec<Expr>) -> Result<OneForm> {
        check_dim("form components", chart.dim(), comps.len())?;
        Ok(OneForm { chart, kind: FormKind::Components(comps) })
    }

    /// The exact form df.
    pub fn exact(chart: Chart, f: Expr) -> Result<OneForm> {
        if chart.mentions_velocity(&f) {
            return Err(Error::InvalidData(format!("potential `{f}` depends on velocities")));
        }
        Ok(OneForm { chart, kind: FormKind::Exact(f) })
    }

    /// dqⁱ for the named coordinate.
    pub fn coordinate(chart: Chart, name: &str) -> Result<OneForm> {
        if chart.index_of(name).is_none() {
            return Err(Error::InvalidData(format!("`{name}` is not a coordinate")));
        }
        OneForm::exact(chart, Expr::var(name))
    }

    pub fn zero(chart: Chart) -> OneForm {
        let n = chart.dim();
        OneForm { chart, kind: FormKind::Components(vec![Expr::Num(0.0); n]) }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// The primitive f when the form was declared as df.
    pub fn primitive(&self) -> Option<&Expr> {
        match &self.kind {
            FormKind::Exact(f) => Some(f),
            FormKind::Components(_) => None,
        }
    }

    pub fn component_exprs(&self) -> Option<&[Expr]> {
        match &self.kind {
            FormKind::Components(c) => Some(c),
            FormKind::Exact(_) => None,
        }
    }

    pub fn values_at(&self, q: &[f64], qdot: Option<&[f64]>) -> Result<Vec<f64>> {
        let env = self.chart.env(q, qdot);
        match &self.kind {
            FormKind::Components(c) => c.iter().map(|e| Ok(e.eval(&env)?)).collect(),
            FormKind::Exact(f) => self.chart.names().iter().map(|n| Ok(f.diff(n, &env)?)).collect(),
        }
    }
}

impl CoForm for OneForm {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn values(&self, state: &TangentState) -> Result<Vec<f64>> {
        check_dim("state", self.dim(), state.dim())?;
        self.values_at(&state.q, Some(&state.qdot))
    }

    fn velocity_dependent(&self) -> bool {
        match &self.kind {
            FormKind::Components(c) => c.iter().any(|e| self.chart.mentions_velocity(e)),
            FormKind::Exact(_) => false,
        }
    }

    fn q_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        if self.velocity_dependent() {
            return Err(Error::Precondition("q-Jacobian of a velocity-dependent form".into()));
        }
        let n = self.dim();
        let env = self.chart.env(q, None);
        let names = self.chart.name_refs();
        let mut jac = DMatrix::zeros(n, n);
        match &self.kind {
            FormKind::Components(c) => {
                for i in 0..n {
                    if c[i].as_constant().is_some() {
                        continue;
                    }
                    for j in 0..n {
                        jac[(i, j)] = c[i].diff(names[j], &env)?;
                    }
                }
            }
            FormKind::Exact(f) => {
                let h = f.hessian(&names, &env)?;
                for i in 0..n {
                    for j in 0..n {
                        jac[(i, j)] = h[i][j];
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Vector field aⁱ(q) ∂/∂qⁱ on M.
#[derive(Clone, Debug)]
pub struct VectorField {
    chart: Chart,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: Chart, comps: Vec<Expr>) -> Result<VectorField> {
        check_dim("vector field components", chart.dim(), comps.len())?;
        if let Some(e) = comps.iter().find(|e| chart.mentions_velocity(e)) {
            return Err(Error::InvalidData(format!("vector field component `{e}` depends on velocities")));
        }
        Ok(VectorField { chart, comps })
    }

    pub fn parse(chart: Chart, comps: &[&str]) -> Result<VectorField> {
        let comps = comps.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        VectorField::new(chart, comps)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn values(&self, q: &[f64]) -> Result<Vec<f64>> {
        let env = self.chart.env(q, None);
        self.comps.iter().map(|e| Ok(e.eval(&env)?)).collect()
    }

    /// `J[(i, j)] = ∂aⁱ/∂qʲ`.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.chart.dim();
        let env = self.chart.env(q, None);
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = self.comps[i].diff(&self.chart.names()[j], &env)?;
            }
        }
        Ok(jac)
    }
}

/// grad β: the vector v with g v = β.
pub fn grad_form(g: &(impl Metric + ?Sized), beta: &dyn CoForm, state: &TangentState) -> Result<Vec<f64>> {
    let b = beta.values(state)?;
    let g_inv = inverse_at(g, &state.q)?;
    Ok((g_inv * DVector::from_column_slice(&b)).as_slice().to_vec())
}

/// II(q̇, q̇) for the field whose lowered form has components `b` and
/// q-Jacobian `db`: q̇ʰq̇ᵏ(∂B_k/∂qʰ − Γˡ_hk B_l).
pub fn second_fundamental_from_form(local: &LocalGeometry, b: &[f64], db: &DMatrix<f64>, qdot: &[f64]) -> f64 {
    let n = b.len();
    let mut s = 0.0;
    for h in 0..n {
        for k in 0..n {
            let mut gb = 0.0;
            for l in 0..n {
                gb += local.gamma.second(l, h, k) * b[l];
            }
            s += qdot[h] * qdot[k] * (db[(k, h)] - gb);
        }
    }
    s
}

/// II_v(q̇, q̇) = q̇ʰq̇ᵏ(∂(g_jk vʲ)/∂qʰ − Γ_hk,l vˡ).
pub fn second_fundamental_form(g: &(impl Metric + ?Sized), v: &VectorField, state: &TangentState) -> Result<f64> {
    let n = g.dim();
    check_dim("vector field", n, v.chart().dim())?;
    let local = LocalGeometry::at(g, &state.q)?;
    let a = v.values(&state.q)?;
    let da = v.jacobian(&state.q)?;
    let mut s = 0.0;
    for h in 0..n {
        for k in 0..n {
            let mut d_lowered = 0.0;
            for j in 0..n {
                d_lowered += local.dg[h][(j, k)] * a[j] + local.g[(j, k)] * da[(j, h)];
            }
            let mut gv = 0.0;
            for l in 0..n {
                gv += local.gamma.first(h, k, l) * a[l];
            }
            s += state.qdot[h] * state.qdot[k] * (d_lowered - gv);
        }
    }
    Ok(s)
}

/// II for the gradient of a 1-form on M.
pub fn second_fundamental_form_of(g: &(impl Metric + ?Sized), beta: &dyn CoForm, state: &TangentState) -> Result<f64> {
    let local = LocalGeometry::at(g, &state.q)?;
    let b = beta.values(state)?;
    let db = beta.q_jacobian(&state.q)?;
    Ok(second_fundamental_from_form(&local, &b, &db, &state.qdot))
}
