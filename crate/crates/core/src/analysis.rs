//! Manufactured solutions, broken-norm errors and convergence studies.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_brinkman, assemble_fourth_order, solve, AssemblyError, BrinkmanParams, FourthOrderParams,
    ScalarSpace, SparseSystem, VectorSpace,
};
use crate::element::{interpolate_scalar, interpolate_vector, sample_vector_dofs};
use crate::exec::{Clock, Executor};
use crate::geometry::Point;
use crate::mesh::{make_mesh, Mesh, MeshError, MeshFamily};
use crate::quadrature::{GaussRule, QuadratureRule};

// ---------------------------------------------------------------------------
// manufactured solutions

/// `S(t) = sin^2(k pi t)` and its first four derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinSquared {
    pub k: f64,
}

impl SinSquared {
    pub fn derivatives(&self, t: f64) -> [f64; 5] {
        let w = self.k * PI;
        let s = libm::sin(w * t);
        let (s2, c2) = (libm::sin(2.0 * w * t), libm::cos(2.0 * w * t));
        [s * s, w * s2, 2.0 * w * w * c2, -4.0 * w * w * w * s2, -8.0 * w * w * w * w * c2]
    }
}

/// `u = S(x) S(y)` on the unit square; clamped on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCase {
    pub profile: SinSquared,
}

impl ScalarCase {
    pub fn new(frequency: f64) -> Self {
        Self { profile: SinSquared { k: frequency } }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.profile.derivatives(p[0])[0] * self.profile.derivatives(p[1])[0]
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        [x[1] * y[0], x[0] * y[1]]
    }

    /// `(u_xx, u_xy, u_yy)`.
    pub fn hessian(&self, p: Point) -> [f64; 3] {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        [x[2] * y[0], x[1] * y[1], x[0] * y[2]]
    }

    /// `hess * Delta^2 u - grad * Delta u`.
    pub fn source(&self, params: FourthOrderParams, p: Point) -> f64 {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        let lap = x[2] * y[0] + x[0] * y[2];
        let bilap = x[4] * y[0] + 2.0 * x[2] * y[2] + x[0] * y[4];
        params.hess * bilap - params.grad * lap
    }
}

/// `u = curl(S(x) S(y))`, `p = sin(pi x) - 2/pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrinkmanCase {
    pub profile: SinSquared,
}

impl Default for BrinkmanCase {
    fn default() -> Self {
        Self { profile: SinSquared { k: 1.0 } }
    }
}

impl BrinkmanCase {
    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        [x[0] * y[1], -x[1] * y[0]]
    }

    /// `(du_x/dx, du_x/dy, du_y/dx, du_y/dy)`.
    pub fn velocity_jacobian(&self, p: Point) -> [f64; 4] {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        [x[1] * y[1], x[0] * y[2], -x[2] * y[0], -x[1] * y[1]]
    }

    pub fn pressure(&self, p: Point) -> f64 {
        libm::sin(PI * p[0]) - 2.0 / PI
    }

    /// `-nu Delta u + alpha u + grad p`.
    pub fn source(&self, params: BrinkmanParams, p: Point) -> [f64; 2] {
        let (x, y) = (self.profile.derivatives(p[0]), self.profile.derivatives(p[1]));
        let lap = [x[2] * y[1] + x[0] * y[3], -x[3] * y[0] - x[1] * y[2]];
        let u = self.velocity(p);
        let gp = [PI * libm::cos(PI * p[0]), 0.0];
        [
            -params.nu * lap[0] + params.alpha * u[0] + gp[0],
            -params.nu * lap[1] + params.alpha * u[1] + gp[1],
        ]
    }

    /// `div u`, identically zero.
    pub fn divergence(&self, _p: Point) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// error norms

/// Broken seminorms of `u - u_h`. `|e|_2^2` sums `|d^a e|^2` over the
/// multi-indices `a` with `|a| = 2`, so the mixed derivative enters once.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarErrors {
    /// `sqrt(hess |e|_2^2 + grad |e|_1^2)`.
    pub energy: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Errors of a piecewise function given by local DoF vectors.
pub fn scalar_errors_local<E: Executor>(
    space: &ScalarSpace<'_>,
    local_dofs: &[[f64; 12]],
    case: &ScalarCase,
    params: FourthOrderParams,
    quad_order: usize,
    exec: &E,
) -> ScalarErrors {
    let rule = QuadratureRule::new(quad_order);
    let parts = exec.map_cells(space.mesh.num_cells(), |k| {
        let el = &space.elements[k];
        let qps = rule.on_cell(&el.geometry);
        let points: Vec<Point> = qps.iter().map(|q| q.point).collect();
        let tab = el.tabulate(&points);
        let d = &local_dofs[k];
        let (mut e1, mut e2) = (0.0, 0.0);
        for (q, qp) in qps.iter().enumerate() {
            let mut g = case.gradient(qp.point);
            let mut h = case.hessian(qp.point);
            for j in 0..12 {
                g[0] -= d[j] * tab.grads[q][j][0];
                g[1] -= d[j] * tab.grads[q][j][1];
                for c in 0..3 {
                    h[c] -= d[j] * tab.hessians[q][j][c];
                }
            }
            e1 += qp.weight * (g[0] * g[0] + g[1] * g[1]);
            // Sobolev seminorm: one term per multi-index of order two
            e2 += qp.weight * (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
        }
        (e1, e2)
    });
    let (e1, e2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    ScalarErrors {
        energy: libm::sqrt(params.hess * e2 + params.grad * e1),
        h1: libm::sqrt(e1),
        h2: libm::sqrt(e2),
    }
}

pub fn error_norms_scalar<E: Executor>(
    space: &ScalarSpace<'_>,
    solution: &[f64],
    case: &ScalarCase,
    params: FourthOrderParams,
    quad_order: usize,
    exec: &E,
) -> ScalarErrors {
    let local: Vec<[f64; 12]> = (0..space.mesh.num_cells())
        .map(|k| space.dofs.scalar_local(space.mesh, k, solution))
        .collect();
    scalar_errors_local(space, &local, case, params, quad_order, exec)
}

/// Local DoFs of the canonical interpolant `I_h u`.
pub fn scalar_interpolant(space: &ScalarSpace<'_>, case: &ScalarCase) -> Vec<[f64; 12]> {
    space
        .elements
        .iter()
        .map(|el| interpolate_scalar(el, |p| (case.value(p), case.gradient(p))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BrinkmanErrors {
    /// `sqrt(nu |e|_{1,h}^2 + alpha |e|_0^2)`.
    pub velocity: f64,
    pub velocity_h1: f64,
    pub velocity_l2: f64,
    pub pressure: f64,
    /// `max_K |div u_h|`.
    pub max_divergence: f64,
}

pub fn brinkman_errors_local<E: Executor>(
    space: &VectorSpace<'_>,
    velocity: &[[f64; 12]],
    pressure: &[f64],
    case: &BrinkmanCase,
    params: BrinkmanParams,
    quad_order: usize,
    exec: &E,
) -> BrinkmanErrors {
    let rule = QuadratureRule::new(quad_order);
    let parts = exec.map_cells(space.mesh.num_cells(), |k| {
        let el = &space.elements[k];
        let qps = rule.on_cell(&el.geometry);
        let points: Vec<Point> = qps.iter().map(|q| q.point).collect();
        let tab = el.tabulate(&points);
        let d = &velocity[k];
        let (mut e0, mut e1, mut ep, mut div) = (0.0, 0.0, 0.0, 0.0f64);
        for (q, qp) in qps.iter().enumerate() {
            let mut u = case.velocity(qp.point);
            let mut j = case.velocity_jacobian(qp.point);
            let mut dv = 0.0;
            for i in 0..12 {
                u[0] -= d[i] * tab.values[q][i][0];
                u[1] -= d[i] * tab.values[q][i][1];
                for c in 0..4 {
                    j[c] -= d[i] * tab.jacobians[q][i][c];
                }
                dv += d[i] * tab.divergence(q, i);
            }
            let pe = case.pressure(qp.point) - pressure.get(k).copied().unwrap_or(0.0);
            e0 += qp.weight * (u[0] * u[0] + u[1] * u[1]);
            e1 += qp.weight * j.iter().map(|v| v * v).sum::<f64>();
            ep += qp.weight * pe * pe;
            div = div.max(dv.abs());
        }
        (e0, e1, ep, div)
    });
    let mut tot = (0.0, 0.0, 0.0, 0.0f64);
    for p in &parts {
        tot = (tot.0 + p.0, tot.1 + p.1, tot.2 + p.2, tot.3.max(p.3));
    }
    BrinkmanErrors {
        velocity: libm::sqrt(params.nu * tot.1 + params.alpha * tot.0),
        velocity_h1: libm::sqrt(tot.1),
        velocity_l2: libm::sqrt(tot.0),
        pressure: libm::sqrt(tot.2),
        max_divergence: tot.3,
    }
}

/// Velocity/pressure errors of a solved Brinkman system laid out as
/// `[velocity | pressure per cell | multiplier]`.
pub fn error_norms_brinkman<E: Executor>(
    space: &VectorSpace<'_>,
    solution: &[f64],
    case: &BrinkmanCase,
    params: BrinkmanParams,
    quad_order: usize,
    exec: &E,
) -> BrinkmanErrors {
    let nv = space.dofs.num_velocity;
    let local: Vec<[f64; 12]> = (0..space.mesh.num_cells())
        .map(|k| space.dofs.vector_local(space.mesh, k, &solution[..nv]))
        .collect();
    let pressure = &solution[nv..nv + space.dofs.num_pressure];
    brinkman_errors_local(space, &local, pressure, case, params, quad_order, exec)
}

/// Local DoFs of the canonical interpolant `Pi_h u`.
pub fn vector_interpolant(space: &VectorSpace<'_>, case: &BrinkmanCase) -> Vec<[f64; 12]> {
    let rule = GaussRule::new(12);
    space
        .elements
        .iter()
        .map(|el| interpolate_vector(el, &sample_vector_dofs(&el.geometry, |p| case.velocity(p), &rule)))
        .collect()
}

/// `sum_K |K| p_h|_K`.
pub fn pressure_mean(mesh: &Mesh, pressure: &[f64]) -> f64 {
    mesh.geometries.iter().zip(pressure).map(|(g, p)| g.area * p).sum()
}

// ---------------------------------------------------------------------------
// orders

/// `log(e_i / e_{i+1}) / log(n_{i+1} / n_i)` for consecutive entries.
pub fn pairwise_orders(ns: &[usize], errors: &[f64]) -> Vec<f64> {
    ns.windows(2)
        .zip(errors.windows(2))
        .map(|(n, e)| libm::log(e[0] / e[1]) / libm::log(n[1] as f64 / n[0] as f64))
        .collect()
}

/// Least-squares slope of `-log e` against `log n` over the last four
/// points (the last three pairs).
pub fn fitted_order(ns: &[usize], errors: &[f64]) -> f64 {
    let m = ns.len().min(errors.len());
    if m < 2 {
        return f64::NAN;
    }
    let start = m.saturating_sub(4);
    let xs: Vec<f64> = ns[start..m].iter().map(|&n| libm::log(n as f64)).collect();
    let ys: Vec<f64> = errors[start..m].iter().map(|&e| -libm::log(e)).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub pairwise: Vec<f64>,
    pub last: f64,
    pub fit: f64,
}

impl Orders {
    pub fn from_errors(ns: &[usize], errors: &[f64]) -> Self {
        let pairwise = pairwise_orders(ns, errors);
        let last = pairwise.last().copied().unwrap_or(f64::NAN);
        Self { pairwise, last, fit: fitted_order(ns, errors) }
    }
}

// ---------------------------------------------------------------------------
// studies

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarRow {
    pub label: String,
    pub params: FourthOrderParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrinkmanRow {
    pub label: String,
    pub params: BrinkmanParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", content = "rows", rename_all = "lowercase")]
pub enum StudyRows {
    Scalar(Vec<ScalarRow>),
    Brinkman(Vec<BrinkmanRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub rows: StudyRows,
    pub family: MeshFamily,
    pub ns: Vec<usize>,
    pub quad_order: usize,
    pub error_quad_order: usize,
    /// `k` in `u = sin^2(k pi x) sin^2(k pi y)` for the scalar problem.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub n: usize,
    pub h: f64,
    pub unknowns: usize,
    /// One entry per norm in `StudyReport::norms`.
    pub errors: Vec<f64>,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRowReport {
    pub label: String,
    pub points: Vec<StudyPoint>,
    /// Orders per norm.
    pub orders: Vec<Orders>,
}

impl StudyRowReport {
    pub fn errors(&self, norm: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.errors[norm]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub norms: Vec<String>,
    pub rows: Vec<StudyRowReport>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("{family} mesh, n = {n}: {source}")]
    Mesh { family: &'static str, n: usize, source: MeshError },
    #[error("{family} mesh, n = {n}, row {label}: {source}")]
    Assembly { family: &'static str, n: usize, label: String, source: AssemblyError },
    #[error("invalid study configuration: {0}")]
    Config(String),
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.ns.is_empty() {
            return Err(StudyError::Config("empty n list".into()));
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(StudyError::Config(format!("n = {n} is below 2")));
        }
        let empty = match &self.rows {
            StudyRows::Scalar(r) => r.is_empty(),
            StudyRows::Brinkman(r) => r.is_empty(),
        };
        if empty {
            return Err(StudyError::Config("no parameter rows".into()));
        }
        if !(2..=10).contains(&self.error_quad_order) {
            return Err(StudyError::Config(format!("error quadrature order {} outside 2..=10", self.error_quad_order)));
        }
        Ok(())
    }
}

pub fn run_convergence_study<E: Executor, C: Clock>(
    config: &StudyConfig,
    exec: &E,
    clock: &C,
) -> Result<StudyReport, StudyError> {
    run_convergence_study_observed(config, exec, clock, |_, _, _| {})
}

/// Like [`run_convergence_study`], calling `observe(n, label, system)` on
/// every solved system.
pub fn run_convergence_study_observed<E, C, O>(
    config: &StudyConfig,
    exec: &E,
    clock: &C,
    mut observe: O,
) -> Result<StudyReport, StudyError>
where
    E: Executor,
    C: Clock,
    O: FnMut(usize, &str, &SparseSystem),
{
    config.validate()?;
    let t_start = clock.now();
    let family = config.family.name();
    let mesh_err = |n, source| StudyError::Mesh { family, n, source };
    let asm_err = |n, label: &str, source| StudyError::Assembly { family, n, label: label.into(), source };

    let (norms, mut rows): (Vec<String>, Vec<StudyRowReport>) = match &config.rows {
        StudyRows::Scalar(r) => (
            ["energy", "h1", "h2"].iter().map(|s| String::from(*s)).collect(),
            r.iter().map(|row| empty_row(&row.label)).collect(),
        ),
        StudyRows::Brinkman(r) => (
            ["velocity", "pressure"].iter().map(|s| String::from(*s)).collect(),
            r.iter().map(|row| empty_row(&row.label)).collect(),
        ),
    };

    for &n in &config.ns {
        let mesh = make_mesh(n, config.family).map_err(|e| mesh_err(n, e))?;
        let h = mesh.mesh_size();
        match &config.rows {
            StudyRows::Scalar(specs) => {
                let case = ScalarCase::new(config.frequency);
                let space = ScalarSpace::new(&mesh, exec).map_err(|e| asm_err(n, "-", e))?;
                for (spec, out) in specs.iter().zip(&mut rows) {
                    let t0 = clock.now();
                    let src = |p: Point| case.source(spec.params, p);
                    let mut sys = assemble_fourth_order(&space, spec.params, &src, config.quad_order, exec)
                        .map_err(|e| asm_err(n, &spec.label, e))?;
                    solve(&mut sys).map_err(|e| asm_err(n, &spec.label, e))?;
                    observe(n, &spec.label, &sys);
                    let x = sys.solution.as_deref().unwrap_or(&[]);
                    let err = error_norms_scalar(&space, x, &case, spec.params, config.error_quad_order, exec);
                    out.points.push(StudyPoint {
                        n,
                        h,
                        unknowns: sys.dim(),
                        errors: alloc::vec![err.energy, err.h1, err.h2],
                        residual: sys.stats.map_or(0.0, |s| s.relative_residual),
                        seconds: clock.now() - t0,
                    });
                }
            }
            StudyRows::Brinkman(specs) => {
                let case = BrinkmanCase::default();
                let space = VectorSpace::new(&mesh, exec).map_err(|e| asm_err(n, "-", e))?;
                for (spec, out) in specs.iter().zip(&mut rows) {
                    let t0 = clock.now();
                    let f = |p: Point| case.source(spec.params, p);
                    let g = |p: Point| case.divergence(p);
                    let mut sys = assemble_brinkman(&space, spec.params, &f, &g, config.quad_order, exec)
                        .map_err(|e| asm_err(n, &spec.label, e))?;
                    solve(&mut sys).map_err(|e| asm_err(n, &spec.label, e))?;
                    observe(n, &spec.label, &sys);
                    let x = sys.solution.as_deref().unwrap_or(&[]);
                    let err = error_norms_brinkman(&space, x, &case, spec.params, config.error_quad_order, exec);
                    out.points.push(StudyPoint {
                        n,
                        h,
                        unknowns: sys.dim(),
                        errors: alloc::vec![err.velocity, err.pressure],
                        residual: sys.stats.map_or(0.0, |s| s.relative_residual),
                        seconds: clock.now() - t0,
                    });
                }
            }
        }
    }
    for row in &mut rows {
        row.orders = (0..norms.len())
            .map(|k| Orders::from_errors(&config.ns, &row.errors(k)))
            .collect();
    }
    Ok(StudyReport { config: config.clone(), norms, rows, seconds: clock.now() - t_start })
}

fn empty_row(label: &str) -> StudyRowReport {
    StudyRowReport { label: label.into(), points: Vec::new(), orders: Vec::new() }
}

/// Interpolation errors `|u - I_h u|_{1,h}` and `|u - I_h u|_{2,h}` per `n`.
pub fn scalar_interpolation_rates<E: Executor>(
    family: MeshFamily,
    ns: &[usize],
    case: &ScalarCase,
    quad_order: usize,
    exec: &E,
) -> Result<Vec<ScalarErrors>, StudyError> {
    let fam = family.name();
    ns.iter()
        .map(|&n| {
            let mesh = make_mesh(n, family).map_err(|source| StudyError::Mesh { family: fam, n, source })?;
            let space = ScalarSpace::new(&mesh, exec).map_err(|source| StudyError::Assembly {
                family: fam,
                n,
                label: "interpolation".into(),
                source,
            })?;
            let local = scalar_interpolant(&space, case);
            Ok(scalar_errors_local(&space, &local, case, FourthOrderParams::perturbation(0.0), quad_order, exec))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn profile_derivatives_by_finite_differences() {
        let s = SinSquared { k: 2.0 };
        let t = 0.3127;
        let step = 1e-5;
        let a = s.derivatives(t - step);
        let b = s.derivatives(t + step);
        let d = s.derivatives(t);
        for m in 0..4 {
            let fd = (b[m] - a[m]) / (2.0 * step);
            assert!((fd - d[m + 1]).abs() < 1e-5 * (1.0 + d[m + 1].abs()), "order {m}");
        }
    }

    #[test]
    fn zero_pressure_error_is_the_pressure_norm() {
        let mesh = make_mesh(8, MeshFamily::Rectangular).unwrap();
        let space = VectorSpace::new(&mesh, &Sequential).unwrap();
        let zero = alloc::vec![[0.0; 12]; mesh.num_cells()];
        let p = alloc::vec![0.0; mesh.num_cells()];
        let params = BrinkmanParams { nu: 0.0, alpha: 1.0 };
        let e = brinkman_errors_local(&space, &zero, &p, &BrinkmanCase::default(), params, 6, &Sequential);
        let exact = libm::sqrt(0.5 - 4.0 / (PI * PI));
        assert!((e.pressure - exact).abs() < 1e-6, "{}", e.pressure);
    }

    #[test]
    fn orders_of_a_power_law() {
        let ns = [4, 8, 16, 32];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 / (n as f64 * n as f64)).collect();
        let o = Orders::from_errors(&ns, &errs);
        assert!((o.last - 2.0).abs() < 1e-12 && (o.fit - 2.0).abs() < 1e-12);
        let printed = pairwise_orders(&[32, 64], &[2.804e-1, 1.368e-1])[0];
        assert!((printed - 1.04).abs() < 0.005);
    }
}
