//! The two 12-DoF nodal elements on a convex quadrilateral.
//!
//! The scalar element `(K, W_K, T_K)` carries vertex values and vertex
//! gradients. Its shape space is the Adini-like space `P3 + span{phi1, phi2}`
//! enriched by four `H^1_0` bubbles and cut back to twelve dimensions by
//! requiring, on every edge, that the mean of the normal derivative equal
//! the average of its two endpoint values.
//!
//! The vector element `(K, V_K, Sigma_K)` carries edge normal fluxes and
//! vertex values. Its shape space is `[P1]^2 + curl(cubics, phi1, phi2)`
//! enriched by the curls of the same bubbles, cut back by the analogous
//! tangential condition.
//!
//! Nodal bases come from one generalized Vandermonde solve over the full
//! 16-function spanning set. The two-stage construction (auxiliary basis,
//! bubble duals, aggregation coefficients) is carried alongside and exposed
//! through `cross_check` so each route validates the other.
//!
//! Polynomials live in the cell-local frame `X = (x - b) / h`; physical
//! derivatives pick up a factor `1 / h`.

use alloc::vec::Vec;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Point, QuadGeometry};
use crate::poly::{axpy, Poly2, VecPoly2};
use crate::quadrature::GaussRule;

/// Points per edge for exact edge integrals of shape-function traces.
pub const EDGE_GAUSS_POINTS: usize = 5;

/// Upper bound on the condition number of a local DoF matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ElementError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("local DoF matrix is ill-conditioned (cond = {0:e})")]
    IllConditioned(f64),
    #[error("local DoF matrix is singular")]
    Singular,
    #[error("shape parameter outside the convex range: |s1| + |s2| = {0}")]
    ShapeOutOfRange(f64),
}

type Mat16 = SMatrix<f64, 16, 16>;
type Mat12 = SMatrix<f64, 12, 12>;
type Mat4 = SMatrix<f64, 4, 4>;

fn edge_rule() -> GaussRule {
    GaussRule::new(EDGE_GAUSS_POINTS)
}

// ---------------------------------------------------------------------------
// functionals

/// Physical gradient of a local-frame polynomial at a physical point.
fn grad_at(g: &QuadGeometry, w: &Poly2, p: Point) -> [f64; 2] {
    let x = g.to_local(p);
    let inv_h = 1.0 / g.diameter;
    [
        w.diff(crate::poly::Axis::X).eval(x) * inv_h,
        w.diff(crate::poly::Axis::Y).eval(x) * inv_h,
    ]
}

fn grad_poly_at(g: &QuadGeometry, grad: &VecPoly2, p: Point) -> [f64; 2] {
    let v = grad.eval(g.to_local(p));
    [v[0] / g.diameter, v[1] / g.diameter]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Mean over edge `i` of a local-frame polynomial.
fn poly_edge_mean(g: &QuadGeometry, rule: &GaussRule, w: &Poly2, i: usize) -> f64 {
    rule.unit_interval()
        .map(|(t, wt)| wt * w.eval(g.to_local(g.edge_point(i, t))))
        .sum()
}

/// `T_K`: vertex values, then x-derivatives, then y-derivatives.
pub fn scalar_dofs(g: &QuadGeometry, w: &Poly2) -> [f64; 12] {
    let grad = w.grad();
    let mut out = [0.0; 12];
    for j in 0..4 {
        let v = g.vertices[j];
        out[j] = w.eval(g.to_local(v));
        let gr = grad_poly_at(g, &grad, v);
        out[4 + j] = gr[0];
        out[8 + j] = gr[1];
    }
    out
}

/// `tau^b_i(w)`: mean normal derivative over edge `i`.
pub fn bubble_dofs(g: &QuadGeometry, w: &Poly2) -> [f64; 4] {
    let rule = edge_rule();
    let grad = w.grad();
    core::array::from_fn(|i| {
        let n = g.normals[i];
        rule.unit_interval()
            .map(|(t, wt)| wt * dot(grad_poly_at(g, &grad, g.edge_point(i, t)), n))
            .sum()
    })
}

/// Normal aggregation defect on each edge: mean normal derivative minus the
/// endpoint average of the normal derivative. Zero for members of `W_K`.
pub fn normal_aggregation_defects(g: &QuadGeometry, w: &Poly2) -> [f64; 4] {
    let means = bubble_dofs(g, w);
    let grad = w.grad();
    core::array::from_fn(|i| {
        let n = g.normals[i];
        let a = dot(grad_poly_at(g, &grad, g.vertices[i]), n);
        let b = dot(grad_poly_at(g, &grad, g.vertices[(i + 1) % 4]), n);
        means[i] - 0.5 * (a + b)
    })
}

/// Defect of the Simpson-type edge-mean identity
/// `mean(w) = (w(V_i) + w(V_i+1))/2 - |E_i|/12 (dw/dt(V_i+1) - dw/dt(V_i))`.
pub fn edge_mean_defects(g: &QuadGeometry, w: &Poly2) -> [f64; 4] {
    let rule = edge_rule();
    let grad = w.grad();
    core::array::from_fn(|i| {
        let (p, q) = (g.vertices[i], g.vertices[(i + 1) % 4]);
        let t = g.tangents[i];
        let mean = poly_edge_mean(g, &rule, w, i);
        let wp = w.eval(g.to_local(p));
        let wq = w.eval(g.to_local(q));
        let dp = dot(grad_poly_at(g, &grad, p), t);
        let dq = dot(grad_poly_at(g, &grad, q), t);
        mean - 0.5 * (wp + wq) + g.edge_lengths[i] / 12.0 * (dq - dp)
    })
}

/// `Sigma_K`: edge normal fluxes, then x-values, then y-values at vertices.
pub fn vector_dofs(g: &QuadGeometry, v: &VecPoly2) -> [f64; 12] {
    let rule = edge_rule();
    let mut out = [0.0; 12];
    for j in 0..4 {
        let vn = v.dot_const(g.normals[j]);
        out[j] = g.edge_lengths[j] * poly_edge_mean(g, &rule, &vn, j);
        let val = v.eval(g.to_local(g.vertices[j]));
        out[4 + j] = val[0];
        out[8 + j] = val[1];
    }
    out
}

/// `sigma^b_i(v)`: tangential flux through edge `i`.
pub fn tangential_fluxes(g: &QuadGeometry, v: &VecPoly2) -> [f64; 4] {
    let rule = edge_rule();
    core::array::from_fn(|i| {
        let vt = v.dot_const(g.tangents[i]);
        g.edge_lengths[i] * poly_edge_mean(g, &rule, &vt, i)
    })
}

/// Tangential aggregation defect: mean tangential component minus the
/// endpoint average. Zero for members of `V_K`.
pub fn tangential_aggregation_defects(g: &QuadGeometry, v: &VecPoly2) -> [f64; 4] {
    let flux = tangential_fluxes(g, v);
    core::array::from_fn(|i| {
        let t = g.tangents[i];
        let a = v.eval(g.to_local(g.vertices[i]));
        let b = v.eval(g.to_local(g.vertices[(i + 1) % 4]));
        flux[i] / g.edge_lengths[i] - 0.5 * (dot(a, t) + dot(b, t))
    })
}

/// Defect of the weighted normal identity
/// `mean(v.n xi_i) = (v(V_i+1) - v(V_i)).n / 6`.
pub fn weighted_normal_defects(g: &QuadGeometry, v: &VecPoly2) -> [f64; 4] {
    let rule = edge_rule();
    core::array::from_fn(|i| {
        let n = g.normals[i];
        let weighted = &v.dot_const(n) * &g.xi[i];
        let lhs = poly_edge_mean(g, &rule, &weighted, i);
        let a = v.eval(g.to_local(g.vertices[i]));
        let b = v.eval(g.to_local(g.vertices[(i + 1) % 4]));
        lhs - (dot(b, n) - dot(a, n)) / 6.0
    })
}

// ---------------------------------------------------------------------------
// spanning sets

/// The two non-cubic members of `W_K^-`.
pub fn build_phi12(g: &QuadGeometry) -> (Poly2, Poly2) {
    let [s1, s2] = g.s;
    let [l1, l2, l3, l4] = &g.lines;
    let (m13, m24) = (&g.m13, &g.m24);
    let l1l3 = l1 * l3;
    let l2l4 = l2 * l4;
    let m13m24 = m13 * m24;
    let m24sq = m24 * m24;
    let m13sq = m13 * m13;

    let mut phi1 = (&l1l3 * &m13m24).scale((s2 - 1.0) * (s2 + 1.0));
    axpy(&mut phi1, -s1 * s2, &(&l1l3 * &m24sq));
    axpy(&mut phi1, s1, &(&(&l1l3 * &m24sq) * m13));

    let mut phi2 = (&l2l4 * &m13m24).scale((s1 - 1.0) * (s1 + 1.0));
    axpy(&mut phi2, -s1 * s2, &(&l2l4 * &m13sq));
    axpy(&mut phi2, s2, &(&(&l2l4 * &m13sq) * m24));
    (phi1, phi2)
}

const CUBIC_EXPONENTS: [(u8, u8); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

/// `b0 * {1, X, Y, l13 l24}` with `b0 = l1 l2 l3 l4`.
pub fn bubble_spanning_set(g: &QuadGeometry) -> [Poly2; 4] {
    let [l1, l2, l3, l4] = &g.lines;
    let b0 = &(&(l1 * l2) * l3) * l4;
    [
        b0.clone(),
        &b0 * &Poly2::x(),
        &b0 * &Poly2::y(),
        &b0 * &(&g.l13 * &g.l24),
    ]
}

/// `P3` monomials in the local frame followed by `phi1, phi2`.
pub fn auxiliary_spanning_set(g: &QuadGeometry) -> [Poly2; 12] {
    let (phi1, phi2) = build_phi12(g);
    core::array::from_fn(|k| match k {
        0..=9 => {
            let (i, j) = CUBIC_EXPONENTS[k];
            Poly2::monomial(i, j, 1.0)
        }
        10 => phi1.clone(),
        _ => phi2.clone(),
    })
}

fn combine(funcs: &[Poly2], coeffs: impl Iterator<Item = f64>) -> Poly2 {
    let mut out = Poly2::zero();
    for (f, c) in funcs.iter().zip(coeffs) {
        axpy(&mut out, c, f);
    }
    out
}

fn combine_vec(funcs: &[VecPoly2], coeffs: impl Iterator<Item = f64> + Clone) -> VecPoly2 {
    let mut out = VecPoly2::zero();
    for (f, c) in funcs.iter().zip(coeffs) {
        axpy(&mut out.x_comp, c, &f.x_comp);
        axpy(&mut out.y_comp, c, &f.y_comp);
    }
    out
}

fn condition_number(m: &Mat16) -> f64 {
    let sv = m.svd_unordered(false, false).singular_values;
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_nodal(d: Mat16) -> Result<SMatrix<f64, 16, 12>, ElementError> {
    let cond = condition_number(&d);
    if !(cond <= MAX_CONDITION) {
        return Err(ElementError::IllConditioned(cond));
    }
    let mut rhs = SMatrix::<f64, 16, 12>::zeros();
    for j in 0..12 {
        rhs[(j, j)] = 1.0;
    }
    d.lu().solve(&rhs).ok_or(ElementError::Singular)
}

// ---------------------------------------------------------------------------
// scalar element

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarElement {
    pub geometry: QuadGeometry,
    /// Nodal basis dual to `T_K`.
    pub psi: [Poly2; 12],
    /// Nodal basis of the auxiliary element `(K, W_K^-, T_K^-)`.
    pub auxiliary: [Poly2; 12],
    /// `psi^b_i` with `tau^b_k(psi^b_i) = delta_ki`.
    pub bubble_basis: [Poly2; 4],
    /// `c_{i,j}` of the two-stage construction, indexed `[i][j]`.
    pub aggregation_coeffs: [[f64; 12]; 4],
    /// Largest normal aggregation defect over all basis functions and
    /// edges, multiplied by `h` so that it is frame-relative.
    pub constraint_residual: f64,
    grads: [VecPoly2; 12],
    hessians: [[Poly2; 3]; 12],
}

impl ScalarElement {
    /// Interpolant `sum_j dofs[j] psi_j` as a local-frame polynomial.
    pub fn combine(&self, dofs: &[f64; 12]) -> Poly2 {
        combine(&self.psi, dofs.iter().copied())
    }

    /// Two-stage basis `psi_j^- + sum_i c_ij psi_i^b`.
    pub fn two_stage_basis(&self) -> [Poly2; 12] {
        core::array::from_fn(|j| {
            let mut p = self.auxiliary[j].clone();
            for i in 0..4 {
                axpy(&mut p, self.aggregation_coeffs[i][j], &self.bubble_basis[i]);
            }
            p
        })
    }

    /// Largest coefficient difference between the direct and two-stage
    /// bases, relative to the largest basis coefficient.
    pub fn cross_check(&self) -> f64 {
        let other = self.two_stage_basis();
        let scale = self.psi.iter().map(Poly2::max_abs_coeff).fold(1.0, f64::max);
        self.psi
            .iter()
            .zip(&other)
            .map(|(a, b)| (a - b).max_abs_coeff())
            .fold(0.0, f64::max)
            / scale
    }

    /// Values, physical gradients and physical Hessians `(xx, xy, yy)` of
    /// the basis at physical points.
    pub fn tabulate(&self, points: &[Point]) -> ScalarTabulation {
        let h = self.geometry.diameter;
        let (ih, ih2) = (1.0 / h, 1.0 / (h * h));
        let mut tab = ScalarTabulation {
            values: Vec::with_capacity(points.len()),
            grads: Vec::with_capacity(points.len()),
            hessians: Vec::with_capacity(points.len()),
        };
        for &p in points {
            let x = self.geometry.to_local(p);
            let mut v = [0.0; 12];
            let mut gr = [[0.0; 2]; 12];
            let mut he = [[0.0; 3]; 12];
            for j in 0..12 {
                v[j] = self.psi[j].eval(x);
                let g = self.grads[j].eval(x);
                gr[j] = [g[0] * ih, g[1] * ih];
                for k in 0..3 {
                    he[j][k] = self.hessians[j][k].eval(x) * ih2;
                }
            }
            tab.values.push(v);
            tab.grads.push(gr);
            tab.hessians.push(he);
        }
        tab
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTabulation {
    pub values: Vec<[f64; 12]>,
    pub grads: Vec<[[f64; 2]; 12]>,
    pub hessians: Vec<[[f64; 3]; 12]>,
}

pub fn build_scalar_element(g: &QuadGeometry) -> Result<ScalarElement, ElementError> {
    let aux_span = auxiliary_spanning_set(g);
    let bubbles = bubble_spanning_set(g);
    let span: Vec<Poly2> = aux_span.iter().chain(bubbles.iter()).cloned().collect();

    let mut d = Mat16::zeros();
    for (c, f) in span.iter().enumerate() {
        let dofs = scalar_dofs(g, f);
        let defects = normal_aggregation_defects(g, f);
        for r in 0..12 {
            d[(r, c)] = dofs[r];
        }
        for i in 0..4 {
            d[(12 + i, c)] = defects[i];
        }
    }
    let coeffs = solve_nodal(d)?;
    let psi: [Poly2; 12] = core::array::from_fn(|j| combine(&span, coeffs.column(j).iter().copied()));

    // two-stage route
    let mut d_aux = Mat12::zeros();
    for r in 0..12 {
        for c in 0..12 {
            d_aux[(r, c)] = d[(r, c)];
        }
    }
    let aux_inv = d_aux.try_inverse().ok_or(ElementError::Singular)?;
    let auxiliary: [Poly2; 12] =
        core::array::from_fn(|j| combine(&aux_span, aux_inv.column(j).iter().copied()));

    let mut bmat = Mat4::zeros();
    for (k, b) in bubbles.iter().enumerate() {
        let t = bubble_dofs(g, b);
        for i in 0..4 {
            bmat[(i, k)] = t[i];
        }
    }
    let binv = bmat.try_inverse().ok_or(ElementError::Singular)?;
    let bubble_basis: [Poly2; 4] =
        core::array::from_fn(|i| combine(&bubbles, binv.column(i).iter().copied()));

    let mut aggregation_coeffs = [[0.0; 12]; 4];
    for (j, aux) in auxiliary.iter().enumerate() {
        let defects = normal_aggregation_defects(g, aux);
        for i in 0..4 {
            aggregation_coeffs[i][j] = -defects[i];
        }
    }

    let constraint_residual = psi
        .iter()
        .flat_map(|p| normal_aggregation_defects(g, p))
        .fold(0.0f64, |m, d| m.max(d.abs()))
        * g.diameter;

    let grads = core::array::from_fn(|j| psi[j].grad());
    let hessians = core::array::from_fn(|j| {
        let h = psi[j].hessian();
        let [[xx, xy], [_, yy]] = h;
        [xx, xy, yy]
    });

    Ok(ScalarElement {
        geometry: g.clone(),
        psi,
        auxiliary,
        bubble_basis,
        aggregation_coeffs,
        constraint_residual,
        grads,
        hessians,
    })
}

// ---------------------------------------------------------------------------
// vector element

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorElement {
    pub geometry: QuadGeometry,
    /// Nodal basis dual to `Sigma_K`.
    pub phi: [VecPoly2; 12],
    /// Physical divergence of each basis function.
    pub divergence: [Poly2; 12],
    pub auxiliary: [VecPoly2; 12],
    /// Duals of the curl bubbles with respect to the tangential fluxes.
    pub bubble_basis: [VecPoly2; 4],
    pub aggregation_coeffs: [[f64; 12]; 4],
    /// Largest tangential aggregation defect over basis functions and edges.
    pub constraint_residual: f64,
    jacobians: [[Poly2; 4]; 12],
}

/// `(dw/dY, -dw/dX)` scaled to physical units.
fn physical_curl(g: &QuadGeometry, w: &Poly2) -> VecPoly2 {
    w.curl().scale(1.0 / g.diameter)
}

/// `[P1]^2` followed by curls of the cubic monomials and of `phi1, phi2`.
pub fn vector_auxiliary_spanning_set(g: &QuadGeometry) -> [VecPoly2; 12] {
    let (phi1, phi2) = build_phi12(g);
    let z = Poly2::zero;
    core::array::from_fn(|k| match k {
        0 => VecPoly2::new(Poly2::constant(1.0), z()),
        1 => VecPoly2::new(Poly2::x(), z()),
        2 => VecPoly2::new(Poly2::y(), z()),
        3 => VecPoly2::new(z(), Poly2::constant(1.0)),
        4 => VecPoly2::new(z(), Poly2::x()),
        5 => VecPoly2::new(z(), Poly2::y()),
        6..=9 => {
            let (i, j) = CUBIC_EXPONENTS[k];
            physical_curl(g, &Poly2::monomial(i, j, 1.0))
        }
        10 => physical_curl(g, &phi1),
        _ => physical_curl(g, &phi2),
    })
}

impl VectorElement {
    pub fn combine(&self, dofs: &[f64; 12]) -> VecPoly2 {
        combine_vec(&self.phi, dofs.iter().copied())
    }

    pub fn two_stage_basis(&self) -> [VecPoly2; 12] {
        core::array::from_fn(|j| {
            let mut p = self.auxiliary[j].clone();
            for i in 0..4 {
                p += &self.bubble_basis[i].scale(self.aggregation_coeffs[i][j]);
            }
            p
        })
    }

    /// Relative coefficient gap between the direct and two-stage bases.
    pub fn cross_check(&self) -> f64 {
        let other = self.two_stage_basis();
        let scale = self.phi.iter().map(VecPoly2::max_abs_coeff).fold(1.0, f64::max);
        self.phi
            .iter()
            .zip(&other)
            .map(|(a, b)| (a - b).max_abs_coeff())
            .fold(0.0, f64::max)
            / scale
    }

    /// Values, physical Jacobians `(dvx/dx, dvx/dy, dvy/dx, dvy/dy)` and
    /// divergences of the basis at physical points.
    pub fn tabulate(&self, points: &[Point]) -> VectorTabulation {
        let ih = 1.0 / self.geometry.diameter;
        let mut tab = VectorTabulation {
            values: Vec::with_capacity(points.len()),
            jacobians: Vec::with_capacity(points.len()),
        };
        for &p in points {
            let x = self.geometry.to_local(p);
            let mut v = [[0.0; 2]; 12];
            let mut jac = [[0.0; 4]; 12];
            for j in 0..12 {
                v[j] = self.phi[j].eval(x);
                for k in 0..4 {
                    jac[j][k] = self.jacobians[j][k].eval(x) * ih;
                }
            }
            tab.values.push(v);
            tab.jacobians.push(jac);
        }
        tab
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorTabulation {
    pub values: Vec<[[f64; 2]; 12]>,
    pub jacobians: Vec<[[f64; 4]; 12]>,
}

impl VectorTabulation {
    pub fn divergence(&self, q: usize, j: usize) -> f64 {
        self.jacobians[q][j][0] + self.jacobians[q][j][3]
    }
}

pub fn build_vector_element(g: &QuadGeometry) -> Result<VectorElement, ElementError> {
    let aux_span = vector_auxiliary_spanning_set(g);
    let bubbles: [VecPoly2; 4] = bubble_spanning_set(g).map(|b| physical_curl(g, &b));
    let span: Vec<VecPoly2> = aux_span.iter().chain(bubbles.iter()).cloned().collect();

    let mut d = Mat16::zeros();
    for (c, f) in span.iter().enumerate() {
        let dofs = vector_dofs(g, f);
        let defects = tangential_aggregation_defects(g, f);
        for r in 0..12 {
            d[(r, c)] = dofs[r];
        }
        for i in 0..4 {
            d[(12 + i, c)] = defects[i];
        }
    }
    let coeffs = solve_nodal(d)?;
    let phi: [VecPoly2; 12] =
        core::array::from_fn(|j| combine_vec(&span, coeffs.column(j).iter().copied()));

    let mut d_aux = Mat12::zeros();
    for r in 0..12 {
        for c in 0..12 {
            d_aux[(r, c)] = d[(r, c)];
        }
    }
    let aux_inv = d_aux.try_inverse().ok_or(ElementError::Singular)?;
    let auxiliary: [VecPoly2; 12] =
        core::array::from_fn(|j| combine_vec(&aux_span, aux_inv.column(j).iter().copied()));

    let mut bmat = Mat4::zeros();
    for (k, b) in bubbles.iter().enumerate() {
        let t = tangential_fluxes(g, b);
        for i in 0..4 {
            bmat[(i, k)] = t[i];
        }
    }
    let binv = bmat.try_inverse().ok_or(ElementError::Singular)?;
    let bubble_basis: [VecPoly2; 4] =
        core::array::from_fn(|i| combine_vec(&bubbles, binv.column(i).iter().copied()));

    let mut aggregation_coeffs = [[0.0; 12]; 4];
    for (j, aux) in auxiliary.iter().enumerate() {
        let defects = tangential_aggregation_defects(g, aux);
        for i in 0..4 {
            aggregation_coeffs[i][j] = -defects[i] * g.edge_lengths[i];
        }
    }

    let constraint_residual = phi
        .iter()
        .flat_map(|p| tangential_aggregation_defects(g, p))
        .fold(0.0f64, |m, d| m.max(d.abs()));

    let ih = 1.0 / g.diameter;
    let divergence = core::array::from_fn(|j| phi[j].div().scale(ih));
    let jacobians = core::array::from_fn(|j| {
        let gx = phi[j].x_comp.grad();
        let gy = phi[j].y_comp.grad();
        [gx.x_comp, gx.y_comp, gy.x_comp, gy.y_comp]
    });

    Ok(VectorElement {
        geometry: g.clone(),
        phi,
        divergence,
        auxiliary,
        bubble_basis,
        aggregation_coeffs,
        constraint_residual,
        jacobians,
    })
}

// ---------------------------------------------------------------------------
// interpolation

/// `I_K`: the DoF values `tau_j(w)` from a sampler returning `(w, grad w)`.
pub fn interpolate_scalar<F>(element: &ScalarElement, sample: F) -> [f64; 12]
where
    F: Fn(Point) -> (f64, [f64; 2]),
{
    let mut out = [0.0; 12];
    for j in 0..4 {
        let (w, g) = sample(element.geometry.vertices[j]);
        out[j] = w;
        out[4 + j] = g[0];
        out[8 + j] = g[1];
    }
    out
}

/// DoF data of a vector field: vertex values and outward normal fluxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorDofSample {
    pub vertex_values: [[f64; 2]; 4],
    pub normal_fluxes: [f64; 4],
}

/// Samples a vector field's DoFs, integrating the normal fluxes with `rule`.
pub fn sample_vector_dofs<F>(g: &QuadGeometry, field: F, rule: &GaussRule) -> VectorDofSample
where
    F: Fn(Point) -> [f64; 2],
{
    VectorDofSample {
        vertex_values: g.vertices.map(&field),
        normal_fluxes: core::array::from_fn(|i| {
            let n = g.normals[i];
            g.edge_lengths[i]
                * rule
                    .unit_interval()
                    .map(|(t, w)| w * dot(field(g.edge_point(i, t)), n))
                    .sum::<f64>()
        }),
    }
}

/// `Pi_K`: the DoF values `sigma_j(v)`.
pub fn interpolate_vector(_element: &VectorElement, sample: &VectorDofSample) -> [f64; 12] {
    let mut out = [0.0; 12];
    for j in 0..4 {
        out[j] = sample.normal_fluxes[j];
        out[4 + j] = sample.vertex_values[j][0];
        out[8 + j] = sample.vertex_values[j][1];
    }
    out
}

// ---------------------------------------------------------------------------
// unisolvency oracles

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetOracles {
    pub det_m: f64,
    pub det_n: f64,
    pub det_b_minus: f64,
}

/// The rational factors `f1..f4` of the shape parameter.
pub fn shape_factors(s: [f64; 2]) -> [f64; 4] {
    let [s1, s2] = s;
    [
        (s1 + s2 - 1.0) * (s1 - s2 - 1.0) / ((s2 - 1.0) * (s2 + 1.0)),
        (s1 - s2 + 1.0) * (s1 + s2 + 1.0) / ((s2 - 1.0) * (s2 + 1.0)),
        (s1 + s2 + 1.0) * (s1 - s2 - 1.0) / ((s1 - 1.0) * (s1 + 1.0)),
        (s1 - s2 + 1.0) * (s1 + s2 - 1.0) / ((s1 - 1.0) * (s1 + 1.0)),
    ]
}

/// Closed-form determinants of `M`, `N` and `B^-` as functions of `s`.
pub fn det_oracles(s: [f64; 2]) -> Result<DetOracles, ElementError> {
    let [s1, s2] = s;
    let dist = s1.abs() + s2.abs();
    if !(dist < 1.0) {
        return Err(ElementError::ShapeOutOfRange(dist));
    }
    let [f1, f2, f3, f4] = shape_factors(s);
    let q = s1 * s1 + s2 * s2 - 1.0;
    let det_m = 4.0 * f3 * f3 * f4 * f4 * (s1 - s2 - 1.0) * q;
    let det_n = 4.0 * f1 * f1 * f2 * f2 * (s1 + s2 - 1.0) * q;
    let (a2, b2) = (s1 * s1, s2 * s2);
    let numer = (a2 * a2 * a2 + b2 * b2 * b2) - a2 * b2 * (a2 + b2) + 9.0 * (a2 * a2 + b2 * b2)
        - 26.0 * a2 * b2
        + 15.0 * (a2 + b2)
        - 25.0;
    let denom = 20250.0
        * (s1 - 1.0)
        * (s1 + 1.0)
        * (s2 - 1.0)
        * (s2 + 1.0)
        * (s1 + s2 + 1.0)
        * (s1 - s2 + 1.0);
    Ok(DetOracles { det_m, det_n, det_b_minus: f1 * f2 * f3 * f4 * numer / denom })
}

/// The matrices `M = [lambda_i(p_j)]`, `N = [mu_i(q_j)]` and
/// `B^-_{ij} = mean_{E_i}(b0 b_j / l_i)` assembled numerically on a cell.
pub fn oracle_matrices(g: &QuadGeometry) -> [[[f64; 4]; 4]; 3] {
    let [l1, l2, l3, l4] = &g.lines;
    let (phi1, phi2) = build_phi12(g);
    let l1l3 = l1 * l3;
    let l2l4 = l2 * l4;
    let p = [&l1l3 * l4, &l1l3 * l2, &l1l3 * &g.l13, phi1];
    let q = [&l2l4 * l1, &l2l4 * l3, &l2l4 * &g.l24, phi2];
    // (edge, vertex) pairs for the scaled tangential derivatives
    let lambda = [(1, 1), (1, 2), (3, 3), (3, 0)];
    let mu = [(0, 0), (0, 1), (2, 2), (2, 3)];
    let scaled_tangent = |w: &Poly2, (e, v): (usize, usize)| {
        let a = g.vertices[e];
        let b = g.vertices[(e + 1) % 4];
        dot(grad_at(g, w, g.vertices[v]), [b[0] - a[0], b[1] - a[1]])
    };
    let mut m = [[0.0; 4]; 4];
    let mut n = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = scaled_tangent(&p[j], lambda[i]);
            n[i][j] = scaled_tangent(&q[j], mu[i]);
        }
    }
    let rule = edge_rule();
    let bj = [Poly2::constant(1.0), g.m13.clone(), g.m24.clone(), &g.l13 * &g.l24];
    let mut bm = [[0.0; 4]; 4];
    for i in 0..4 {
        let others = (0..4)
            .filter(|&k| k != i)
            .fold(Poly2::constant(1.0), |acc, k| &acc * &g.lines[k]);
        for j in 0..4 {
            bm[i][j] = poly_edge_mean(g, &rule, &(&others * &bj[j]), i);
        }
    }
    [m, n, bm]
}

pub fn det4(m: &[[f64; 4]; 4]) -> f64 {
    Mat4::from_fn(|i, j| m[i][j]).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_geometry;

    fn unit_square() -> QuadGeometry {
        compute_geometry([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn skewed() -> QuadGeometry {
        compute_geometry([[0.1, -0.2], [1.3, 0.1], [1.1, 0.9], [-0.2, 0.7]]).unwrap()
    }

    #[test]
    fn closed_forms_at_the_square() {
        let d = det_oracles([0.0, 0.0]).unwrap();
        assert_eq!(d.det_m, 4.0);
        assert_eq!(d.det_n, 4.0);
        assert!((d.det_b_minus + 1.0 / 810.0).abs() < 1e-18);
        assert!(det_oracles([0.6, -0.4]).is_err());
    }

    #[test]
    fn numeric_matrices_match_closed_forms() {
        for g in [unit_square(), skewed()] {
            let [m, n, b] = oracle_matrices(&g);
            let d = det_oracles(g.s).unwrap();
            assert!((det4(&m) / d.det_m - 1.0).abs() < 1e-9);
            assert!((det4(&n) / d.det_n - 1.0).abs() < 1e-9);
            assert!((det4(&b) / d.det_b_minus - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn phi_vanishes_at_vertices_and_satisfies_edge_identity() {
        let g = skewed();
        let (p1, p2) = build_phi12(&g);
        for v in g.local_vertices() {
            assert!(p1.eval(v).abs() < 1e-13 && p2.eval(v).abs() < 1e-13);
        }
        for d in edge_mean_defects(&g, &p1).iter().chain(&edge_mean_defects(&g, &p2)) {
            assert!(d.abs() < 1e-13);
        }
    }

    #[test]
    fn scalar_basis_is_nodal() {
        let g = skewed();
        let e = build_scalar_element(&g).unwrap();
        for (j, p) in e.psi.iter().enumerate() {
            let dofs = scalar_dofs(&g, p);
            for (i, v) in dofs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "tau_{i}(psi_{j}) = {v}");
            }
        }
        assert!(e.constraint_residual < 1e-10);
        assert!(e.cross_check() < 1e-8, "cross-check {}", e.cross_check());
    }

    #[test]
    fn vector_basis_is_nodal() {
        let g = skewed();
        let e = build_vector_element(&g).unwrap();
        for (j, p) in e.phi.iter().enumerate() {
            let dofs = vector_dofs(&g, p);
            for (i, v) in dofs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "sigma_{i}(phi_{j}) = {v}");
            }
            let d = &e.divergence[j];
            let c = d.coeff(0, 0);
            let rest = (d - &Poly2::constant(c)).max_abs_coeff();
            assert!(rest < 1e-9 * (1.0 + c.abs()), "div phi_{j} not constant: {rest}");
        }
        assert!(e.constraint_residual < 1e-10);
        assert!(e.cross_check() < 1e-8, "cross-check {}", e.cross_check());
    }

    #[test]
    fn rectangle_phi_reduces_to_first_term() {
        let g = compute_geometry([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]).unwrap();
        let (p1, p2) = build_phi12(&g);
        let [l1, l2, l3, l4] = &g.lines;
        let mm = &g.m13 * &g.m24;
        let e1 = -(&(l1 * l3) * &mm);
        let e2 = -(&(l2 * l4) * &mm);
        assert!((&p1 - &e1).max_abs_coeff() < 1e-14);
        assert!((&p2 - &e2).max_abs_coeff() < 1e-14);
    }
}
