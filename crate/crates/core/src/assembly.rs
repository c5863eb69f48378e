//! Global numbering, assembly and solution of the discrete problems.
//!
//! Fourth-order problem: find `u_h` in `W_h` with
//! `eps^2 (hess u_h, hess v_h)_h + (grad u_h, grad v_h)_h = (f, v_h)`.
//! Boundary-vertex DoFs are dropped, which imposes `u = du/dn = 0`.
//!
//! Brinkman problem: find `(u_h, p_h)` in `V_h x P_h` with
//! `nu (grad u_h, grad v_h)_h + alpha (u_h, v_h) - (div_h v_h, p_h) = (f, v_h)`
//! and `-(div_h u_h, q_h) = -(g, q_h)`, with one Lagrange multiplier for the
//! zero-mean pressure. Boundary-vertex values and boundary-edge fluxes are
//! dropped.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::element::{build_scalar_element, build_vector_element, ElementError, ScalarElement, VectorElement};
use crate::exec::Executor;
use crate::geometry::Point;
use crate::linalg::{solve_sparse, CsrMatrix, SolveError, SolveStats};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("cell {cell}: {source}")]
    Element { cell: usize, source: ElementError },
    #[error("invalid parameters: {0}")]
    Parameter(&'static str),
    #[error("quadrature order {0} outside 2..=8")]
    QuadratureOrder(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Global numbering of the scalar, vector and pressure unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    /// First of the three scalar unknowns `(w, dw/dx, dw/dy)` per interior vertex.
    pub scalar_vertex: Vec<Option<usize>>,
    pub num_scalar: usize,
    /// First of the two velocity unknowns `(v_x, v_y)` per interior vertex.
    pub vector_vertex: Vec<Option<usize>>,
    /// Normal flux unknown per interior edge, along the global edge normal.
    pub vector_edge: Vec<Option<usize>>,
    pub num_velocity: usize,
    pub num_pressure: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut scalar_vertex = vec![None; mesh.vertices.len()];
        let mut vector_vertex = vec![None; mesh.vertices.len()];
        let mut ns = 0;
        let mut nv = 0;
        for (v, &b) in mesh.boundary_vertex.iter().enumerate() {
            if !b {
                scalar_vertex[v] = Some(ns);
                vector_vertex[v] = Some(nv);
                ns += 3;
                nv += 2;
            }
        }
        let mut vector_edge = vec![None; mesh.edges.len()];
        for (e, edge) in mesh.edges.iter().enumerate() {
            if !edge.boundary {
                vector_edge[e] = Some(nv);
                nv += 1;
            }
        }
        Self {
            scalar_vertex,
            num_scalar: ns,
            vector_vertex,
            vector_edge,
            num_velocity: nv,
            num_pressure: mesh.num_cells(),
        }
    }

    /// Global index of each local scalar DoF of cell `k`.
    pub fn scalar_cell_dofs(&self, mesh: &Mesh, k: usize) -> [Option<usize>; 12] {
        let cell = mesh.cells[k];
        core::array::from_fn(|l| self.scalar_vertex[cell[l % 4]].map(|b| b + l / 4))
    }

    /// Global index and orientation sign of each local vector DoF of cell `k`.
    pub fn vector_cell_dofs(&self, mesh: &Mesh, k: usize) -> [(Option<usize>, f64); 12] {
        let cell = mesh.cells[k];
        core::array::from_fn(|l| {
            if l < 4 {
                (self.vector_edge[mesh.cell_edges[k][l]], mesh.edge_sign(k, l))
            } else {
                (self.vector_vertex[cell[l % 4]].map(|b| b + (l / 4 - 1)), 1.0)
            }
        })
    }

    /// Local DoF values of cell `k` from a global scalar vector.
    pub fn scalar_local(&self, mesh: &Mesh, k: usize, global: &[f64]) -> [f64; 12] {
        self.scalar_cell_dofs(mesh, k).map(|g| g.map_or(0.0, |i| global[i]))
    }

    /// Local DoF values of cell `k` from a global velocity vector.
    pub fn vector_local(&self, mesh: &Mesh, k: usize, global: &[f64]) -> [f64; 12] {
        self.vector_cell_dofs(mesh, k).map(|(g, s)| g.map_or(0.0, |i| s * global[i]))
    }
}

/// An assembled linear system. Rows `0..primal` form the positive definite
/// block; the remaining rows are constraints.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub primal: usize,
    pub solution: Option<Vec<f64>>,
    pub stats: Option<SolveStats>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.matrix.n
    }
}

/// Factors and solves, storing the solution in the system.
pub fn solve(system: &mut SparseSystem) -> Result<&[f64], AssemblyError> {
    let (x, stats) = solve_sparse(&system.matrix, &system.rhs, system.primal)?;
    system.solution = Some(x);
    system.stats = Some(stats);
    Ok(system.solution.as_deref().unwrap_or(&[]))
}

/// The per-cell scalar elements of a mesh and the global numbering.
#[derive(Debug, Clone)]
pub struct ScalarSpace<'m> {
    pub mesh: &'m Mesh,
    pub elements: Vec<ScalarElement>,
    pub dofs: DofMap,
}

impl<'m> ScalarSpace<'m> {
    pub fn new<E: Executor>(mesh: &'m Mesh, exec: &E) -> Result<Self, AssemblyError> {
        let elements = exec
            .map_cells(mesh.num_cells(), |k| {
                build_scalar_element(&mesh.geometries[k])
                    .map_err(|source| AssemblyError::Element { cell: k, source })
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { mesh, elements, dofs: DofMap::new(mesh) })
    }
}

/// The per-cell vector elements of a mesh and the global numbering.
#[derive(Debug, Clone)]
pub struct VectorSpace<'m> {
    pub mesh: &'m Mesh,
    pub elements: Vec<VectorElement>,
    pub dofs: DofMap,
}

impl<'m> VectorSpace<'m> {
    pub fn new<E: Executor>(mesh: &'m Mesh, exec: &E) -> Result<Self, AssemblyError> {
        let elements = exec
            .map_cells(mesh.num_cells(), |k| {
                build_vector_element(&mesh.geometries[k])
                    .map_err(|source| AssemblyError::Element { cell: k, source })
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { mesh, elements, dofs: DofMap::new(mesh) })
    }
}

/// Coefficients of the fourth-order form: `hess` multiplies the broken
/// Hessian product, `grad` the broken gradient product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthOrderParams {
    pub hess: f64,
    pub grad: f64,
}

impl FourthOrderParams {
    /// `eps^2 a_h + b_h`; `eps = 0` is the Poisson limit.
    pub fn perturbation(eps: f64) -> Self {
        Self { hess: eps * eps, grad: 1.0 }
    }

    pub fn biharmonic() -> Self {
        Self { hess: 1.0, grad: 0.0 }
    }

    fn validate(&self) -> Result<(), AssemblyError> {
        if !(self.hess >= 0.0 && self.grad >= 0.0) || !(self.hess > 0.0 || self.grad > 0.0) {
            return Err(AssemblyError::Parameter("fourth-order coefficients must be >= 0, not both zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrinkmanParams {
    pub nu: f64,
    pub alpha: f64,
}

impl BrinkmanParams {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        if !(self.nu >= 0.0 && self.alpha >= 0.0) {
            return Err(AssemblyError::Parameter("nu and alpha must be non-negative"));
        }
        if self.nu == 0.0 && self.alpha == 0.0 {
            return Err(AssemblyError::Parameter("nu and alpha cannot both vanish"));
        }
        Ok(())
    }
}

fn check_order(order: usize) -> Result<QuadratureRule, AssemblyError> {
    if (2..=8).contains(&order) {
        Ok(QuadratureRule::new(order))
    } else {
        Err(AssemblyError::QuadratureOrder(order))
    }
}

/// Local stiffness and load of the fourth-order problem on one cell.
pub fn scalar_local_system<F>(
    element: &ScalarElement,
    params: FourthOrderParams,
    source: &F,
    rule: &QuadratureRule,
) -> ([[f64; 12]; 12], [f64; 12])
where
    F: Fn(Point) -> f64,
{
    let qps = rule.on_cell(&element.geometry);
    let points: Vec<Point> = qps.iter().map(|q| q.point).collect();
    let tab = element.tabulate(&points);
    let mut k = [[0.0; 12]; 12];
    let mut f = [0.0; 12];
    for (q, qp) in qps.iter().enumerate() {
        let w = qp.weight;
        let fq = source(qp.point) * w;
        let (v, g, h) = (&tab.values[q], &tab.grads[q], &tab.hessians[q]);
        for i in 0..12 {
            f[i] += fq * v[i];
            for j in i..12 {
                let hh = h[i][0] * h[j][0] + 2.0 * h[i][1] * h[j][1] + h[i][2] * h[j][2];
                let gg = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                k[i][j] += w * (params.hess * hh + params.grad * gg);
            }
        }
    }
    for i in 0..12 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    (k, f)
}

pub fn assemble_fourth_order<F, E>(
    space: &ScalarSpace<'_>,
    params: FourthOrderParams,
    source: &F,
    quad_order: usize,
    exec: &E,
) -> Result<SparseSystem, AssemblyError>
where
    F: Fn(Point) -> f64 + Sync,
    E: Executor,
{
    params.validate()?;
    let rule = check_order(quad_order)?;
    let mesh = space.mesh;
    let locals = exec.map_cells(mesh.num_cells(), |k| {
        scalar_local_system(&space.elements[k], params, source, &rule)
    });
    let n = space.dofs.num_scalar;
    let mut triplets = Vec::with_capacity(locals.len() * 144);
    let mut rhs = vec![0.0; n];
    for (k, (lk, lf)) in locals.iter().enumerate() {
        let map = space.dofs.scalar_cell_dofs(mesh, k);
        for i in 0..12 {
            let Some(gi) = map[i] else { continue };
            rhs[gi] += lf[i];
            for j in 0..12 {
                if let Some(gj) = map[j] {
                    triplets.push((gi, gj, lk[i][j]));
                }
            }
        }
    }
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, &triplets),
        rhs,
        primal: n,
        solution: None,
        stats: None,
    })
}

/// Local velocity block, divergence row and loads of the Brinkman problem.
pub struct BrinkmanLocal {
    pub a: [[f64; 12]; 12],
    pub div: [f64; 12],
    pub f: [f64; 12],
    pub g: f64,
    pub area: f64,
}

pub fn brinkman_local_system<F, G>(
    element: &VectorElement,
    params: BrinkmanParams,
    f: &F,
    g: &G,
    rule: &QuadratureRule,
) -> BrinkmanLocal
where
    F: Fn(Point) -> [f64; 2],
    G: Fn(Point) -> f64,
{
    let qps = rule.on_cell(&element.geometry);
    let points: Vec<Point> = qps.iter().map(|q| q.point).collect();
    let tab = element.tabulate(&points);
    let mut out = BrinkmanLocal { a: [[0.0; 12]; 12], div: [0.0; 12], f: [0.0; 12], g: 0.0, area: 0.0 };
    for (q, qp) in qps.iter().enumerate() {
        let w = qp.weight;
        let fq = f(qp.point);
        out.g += w * g(qp.point);
        out.area += w;
        let (v, jac) = (&tab.values[q], &tab.jacobians[q]);
        for i in 0..12 {
            out.f[i] += w * (fq[0] * v[i][0] + fq[1] * v[i][1]);
            out.div[i] += w * (jac[i][0] + jac[i][3]);
            for j in i..12 {
                let gg: f64 = (0..4).map(|c| jac[i][c] * jac[j][c]).sum();
                let vv = v[i][0] * v[j][0] + v[i][1] * v[j][1];
                out.a[i][j] += w * (params.nu * gg + params.alpha * vv);
            }
        }
    }
    for i in 0..12 {
        for j in 0..i {
            out.a[i][j] = out.a[j][i];
        }
    }
    out
}

/// Layout: velocity unknowns, then one pressure per cell, then the
/// multiplier for the zero-mean constraint.
pub fn assemble_brinkman<F, G, E>(
    space: &VectorSpace<'_>,
    params: BrinkmanParams,
    f: &F,
    g: &G,
    quad_order: usize,
    exec: &E,
) -> Result<SparseSystem, AssemblyError>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    G: Fn(Point) -> f64 + Sync,
    E: Executor,
{
    params.validate()?;
    let rule = check_order(quad_order)?;
    let mesh = space.mesh;
    let locals = exec.map_cells(mesh.num_cells(), |k| {
        brinkman_local_system(&space.elements[k], params, f, g, &rule)
    });
    let nv = space.dofs.num_velocity;
    let np = space.dofs.num_pressure;
    let n = nv + np + 1;
    let mult = nv + np;
    let mut triplets = Vec::with_capacity(locals.len() * 170);
    let mut rhs = vec![0.0; n];
    for (k, loc) in locals.iter().enumerate() {
        let map = space.dofs.vector_cell_dofs(mesh, k);
        let pk = nv + k;
        for i in 0..12 {
            let (Some(gi), si) = map[i] else { continue };
            rhs[gi] += si * loc.f[i];
            let b = si * loc.div[i];
            triplets.push((gi, pk, -b));
            triplets.push((pk, gi, -b));
            for j in 0..12 {
                if let (Some(gj), sj) = map[j] {
                    triplets.push((gi, gj, si * sj * loc.a[i][j]));
                }
            }
        }
        rhs[pk] = -loc.g;
        triplets.push((pk, mult, loc.area));
        triplets.push((mult, pk, loc.area));
    }
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, &triplets),
        rhs,
        primal: nv,
        solution: None,
        stats: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::mesh::{make_mesh, MeshFamily};

    #[test]
    fn small_mesh_dimensions() {
        let mesh = make_mesh(2, MeshFamily::Rectangular).unwrap();
        let d = DofMap::new(&mesh);
        assert_eq!(d.num_scalar, 3);
        assert_eq!(d.num_velocity, 6);
        assert_eq!(d.num_pressure, 4);

        let ss = ScalarSpace::new(&mesh, &Sequential).unwrap();
        let sys = assemble_fourth_order(&ss, FourthOrderParams::perturbation(1.0), &|_| 1.0, 4, &Sequential)
            .unwrap();
        assert_eq!(sys.dim(), 3);
        let vs = VectorSpace::new(&mesh, &Sequential).unwrap();
        let params = BrinkmanParams { nu: 1.0, alpha: 0.0 };
        let sys = assemble_brinkman(&vs, params, &|_| [1.0, 0.0], &|_| 0.0, 4, &Sequential).unwrap();
        assert_eq!(sys.dim(), 11);
        assert!(sys.matrix.max_asymmetry() <= 1e-12);
    }

    #[test]
    fn parameter_errors() {
        assert!(BrinkmanParams { nu: 0.0, alpha: 0.0 }.validate().is_err());
        assert!(FourthOrderParams { hess: 0.0, grad: 0.0 }.validate().is_err());
        let mesh = make_mesh(2, MeshFamily::Rectangular).unwrap();
        let ss = ScalarSpace::new(&mesh, &Sequential).unwrap();
        let r = assemble_fourth_order(&ss, FourthOrderParams::perturbation(1.0), &|_| 1.0, 9, &Sequential);
        assert_eq!(r.unwrap_err(), AssemblyError::QuadratureOrder(9));
    }
}
