//! Property checks: element identities over random cells, the exactness of
//! `W_h -> V_h -> P_h`, the commuting identity of `Pi_h`, and a discrete
//! inf-sup witness.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyError, ScalarSpace, VectorSpace};
use crate::element::{
    build_phi12, build_scalar_element, build_vector_element, det4, det_oracles, edge_mean_defects,
    interpolate_vector, oracle_matrices, sample_vector_dofs, scalar_dofs, vector_dofs, weighted_normal_defects,
    ElementError, ScalarElement,
};
use crate::exec::Executor;
use crate::geometry::{compute_geometry, intermediate_vertices, is_strictly_convex, Point, QuadGeometry};
use crate::mesh::Mesh;
use crate::poly::{Poly2, VecPoly2};
use crate::quadrature::{GaussRule, QuadratureRule};

/// Relative singular-value cutoff for numerical ranks.
pub const RANK_CUTOFF: f64 = 1e-9;

/// Shapes of the random cells drawn by [`verify_elements`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadFamily {
    /// Axis-aligned rectangles.
    Rect,
    /// Trapezoids with two vertical sides.
    Trap,
    /// Unit squares with every vertex moved by up to 20%.
    Random,
    /// Shape parameter drawn over `|s1| + |s2| <= 0.95`, then a random
    /// affine map.
    Sweep,
}

/// Upper bound on `|s1| + |s2|` for sweep samples.
pub const SWEEP_RADIUS: f64 = 0.95;

pub fn random_quad<R: Rng>(family: QuadFamily, rng: &mut R) -> [Point; 4] {
    match family {
        QuadFamily::Rect => {
            let (w, h) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            [[x, y], [x + w, y], [x + w, y + h], [x, y + h]]
        }
        QuadFamily::Trap => {
            let w = rng.random_range(0.5..1.5);
            let (h1, h2) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
            let y1 = rng.random_range(-0.4..0.4);
            [[0.0, 0.0], [w, y1], [w, y1 + h2], [0.0, h1]]
        }
        QuadFamily::Random => loop {
            let base = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
            let q = base.map(|p| [p[0] + rng.random_range(-0.2..0.2), p[1] + rng.random_range(-0.2..0.2)]);
            if is_strictly_convex(&q) {
                return q;
            }
        },
        QuadFamily::Sweep => {
            let s = random_shape(rng);
            let theta = rng.random_range(0.0..2.0 * PI);
            let (sx, sy) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
            let shear = rng.random_range(-0.5..0.5);
            let (c, sn) = (libm::cos(theta), libm::sin(theta));
            // rotation * diag(sx, sy) * [[1, shear], [0, 1]]
            let m = [[c * sx, c * sx * shear - sn * sy], [sn * sx, sn * sx * shear + c * sy]];
            let t = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            intermediate_vertices(s).map(|p| {
                [m[0][0] * p[0] + m[0][1] * p[1] + t[0], m[1][0] * p[0] + m[1][1] * p[1] + t[1]]
            })
        }
    }
}

/// Uniform sample of the closed diamond `|s1| + |s2| <= SWEEP_RADIUS`.
pub fn random_shape<R: Rng>(rng: &mut R) -> [f64; 2] {
    loop {
        let s = [
            rng.random_range(-SWEEP_RADIUS..=SWEEP_RADIUS),
            rng.random_range(-SWEEP_RADIUS..=SWEEP_RADIUS),
        ];
        if s[0].abs() + s[1].abs() <= SWEEP_RADIUS {
            return s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Largest defect seen.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), worst: 0.0, tolerance, passed: true }
    }

    fn record(&mut self, defect: f64) {
        if !(defect <= self.worst) {
            self.worst = defect;
        }
        if !(defect <= self.tolerance) {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementCertificate {
    pub family: QuadFamily,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn kronecker_defect(dofs: &[f64; 12], j: usize) -> f64 {
    dofs.iter()
        .enumerate()
        .map(|(i, v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// A physical-coordinate polynomial re-expressed in the local frame.
fn to_local_frame(g: &QuadGeometry, p: &Poly2) -> Poly2 {
    p.compose_affine([[g.diameter, 0.0], [0.0, g.diameter]], g.b)
}

fn random_poly<R: Rng>(rng: &mut R, degree: u8) -> Poly2 {
    let mut p = Poly2::zero();
    for i in 0..=degree {
        for j in 0..=(degree - i) {
            p += &Poly2::monomial(i, j, rng.random_range(-1.0..1.0));
        }
    }
    p
}

/// Largest coefficient gap between `I_K p` and `p` for a random quadratic,
/// relative to the size of `p`.
pub fn p2_reproduction_defect<R: Rng>(element: &ScalarElement, rng: &mut R) -> f64 {
    let p = to_local_frame(&element.geometry, &random_poly(rng, 2));
    let back = element.combine(&scalar_dofs(&element.geometry, &p));
    (&back - &p).max_abs_coeff() / p.max_abs_coeff().max(1.0)
}

/// Largest coefficient residual of the Adini degeneration on a rectangle:
/// every auxiliary basis function lies in `P3 + span{X^3 Y, X Y^3}`, and
/// the auxiliary interpolant reproduces both extra monomials.
pub fn adini_defect(element: &ScalarElement) -> f64 {
    let adini = |i: u8, j: u8| i + j <= 3 || (i, j) == (3, 1) || (i, j) == (1, 3);
    let outside = element
        .auxiliary
        .iter()
        .flat_map(|p| p.terms().filter(|&((i, j), _)| !adini(i, j)).map(|(_, c)| c.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let g = &element.geometry;
    let reproduce = [Poly2::monomial(3, 1, 1.0), Poly2::monomial(1, 3, 1.0)]
        .iter()
        .map(|m| {
            let d = scalar_dofs(g, m);
            let mut back = Poly2::zero();
            for (c, f) in d.iter().zip(&element.auxiliary) {
                back += &f.scale(*c);
            }
            (&back - m).max_abs_coeff()
        })
        .fold(0.0, f64::max);
    outside.max(reproduce)
}

/// Runs every element identity over `samples` random cells.
pub fn verify_elements(family: QuadFamily, samples: usize, seed: u64) -> Result<ElementCertificate, ElementError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // near the degenerate boundary of the sweep the basis coefficients grow
    // like 1/det N, so identity defects are measured against that scale
    let sweep = family == QuadFamily::Sweep;
    let named = |plain: &'static str, scaled: &'static str| if sweep { scaled } else { plain };
    let mut det_m = Check::new("det M closed form (relative)", 1e-9);
    let mut det_n = Check::new("det N closed form (relative)", 1e-9);
    let mut det_b = Check::new("det B- closed form (relative)", 1e-9);
    let mut square = Check::new("closed forms at s = 0", 1e-15);
    let mut invariance = Check::new("shape parameter under the sampled map", 1e-12);
    let mut phi_zero = Check::new("phi1, phi2 vanish at vertices", 1e-12);
    let mut s_dual = Check::new(named("scalar basis duality", "scalar basis duality (basis-relative)"), 1e-10);
    let mut s_constraint = Check::new(named("scalar normal aggregation", "scalar normal aggregation (basis-relative)"), 1e-10);
    let mut s_edge = Check::new(named("scalar edge-mean identity", "scalar edge-mean identity (basis-relative)"), 1e-10);
    let mut s_cross = Check::new("scalar two-stage construction (relative)", 1e-9);
    let mut p2 = Check::new(named("P2 reproduction by I_K", "P2 reproduction by I_K (basis-relative)"), 1e-10);
    let mut v_dual = Check::new(named("vector basis duality", "vector basis duality (basis-relative)"), 1e-10);
    let mut v_constraint = Check::new(named("vector tangential aggregation", "vector tangential aggregation (basis-relative)"), 1e-10);
    let mut v_weighted = Check::new(named("vector weighted normal identity", "vector weighted normal identity (basis-relative)"), 1e-10);
    let mut v_cross = Check::new("vector two-stage construction (relative)", 1e-9);
    let mut p1 = Check::new(named("[P1]^2 reproduction by Pi_K", "[P1]^2 reproduction by Pi_K (basis-relative)"), 1e-10);
    let mut div_const = Check::new("divergence of basis is constant", 1e-9);
    let mut adini = Check::new("Adini degeneration of the auxiliary space", 1e-10);

    let sq = det_oracles([0.0, 0.0])?;
    square.record((sq.det_m - 4.0).abs().max((sq.det_n - 4.0).abs()).max((sq.det_b_minus + 1.0 / 810.0).abs()));

    for _ in 0..samples {
        let (quad, s_drawn) = if family == QuadFamily::Sweep {
            // redraw the shape so the invariance check knows it
            let mut probe = rng.clone();
            let s = random_shape(&mut probe);
            (random_quad(family, &mut rng), Some(s))
        } else {
            (random_quad(family, &mut rng), None)
        };
        let g = compute_geometry(quad)?;
        if let Some(s) = s_drawn {
            invariance.record((g.s[0] - s[0]).abs().max((g.s[1] - s[1]).abs()));
        }
        let oracle = det_oracles(g.s)?;
        let [m, n, b] = oracle_matrices(&g);
        det_m.record(rel(det4(&m), oracle.det_m));
        det_n.record(rel(det4(&n), oracle.det_n));
        det_b.record(rel(det4(&b), oracle.det_b_minus));

        let (phi1, phi2) = build_phi12(&g);
        for v in g.local_vertices() {
            phi_zero.record(phi1.eval(v).abs().max(phi2.eval(v).abs()));
        }

        let se = build_scalar_element(&g)?;
        let scale = if sweep { se.psi.iter().map(Poly2::max_abs_coeff).fold(1.0, f64::max) } else { 1.0 };
        for (j, psi) in se.psi.iter().enumerate() {
            s_dual.record(kronecker_defect(&scalar_dofs(&g, psi), j) / scale);
            for d in edge_mean_defects(&g, psi) {
                // the value basis is O(1); the gradient basis is O(h)
                s_edge.record(d.abs() / if j < 4 { 1.0 } else { g.diameter } / scale);
            }
        }
        s_constraint.record(se.constraint_residual / scale);
        s_cross.record(se.cross_check());
        p2.record(p2_reproduction_defect(&se, &mut rng) / scale);
        if family == QuadFamily::Rect {
            adini.record(adini_defect(&se));
        }

        let ve = build_vector_element(&g)?;
        let scale = if sweep { ve.phi.iter().map(VecPoly2::max_abs_coeff).fold(1.0, f64::max) } else { 1.0 };
        for (j, phi) in ve.phi.iter().enumerate() {
            v_dual.record(kronecker_defect(&vector_dofs(&g, phi), j) / scale);
            for d in weighted_normal_defects(&g, phi) {
                v_weighted.record(d.abs() * if j < 4 { g.edge_lengths[0] } else { 1.0 } / scale);
            }
            let div = &ve.divergence[j];
            let c = div.coeff(0, 0);
            div_const.record((div - &Poly2::constant(c)).max_abs_coeff() / (1.0 + c.abs()));
        }
        v_constraint.record(ve.constraint_residual / scale);
        v_cross.record(ve.cross_check());
        let lin = VecPoly2::new(random_poly(&mut rng, 1), random_poly(&mut rng, 1));
        let lin_local = VecPoly2::new(to_local_frame(&g, &lin.x_comp), to_local_frame(&g, &lin.y_comp));
        let back = ve.combine(&vector_dofs(&g, &lin_local));
        p1.record((&back - &lin_local).max_abs_coeff() / lin_local.max_abs_coeff().max(1.0) / scale);
    }

    let mut checks = vec![
        det_m, det_n, det_b, square, phi_zero, s_dual, s_constraint, s_edge, s_cross, p2, v_dual,
        v_constraint, v_weighted, v_cross, p1, div_const,
    ];
    if family == QuadFamily::Sweep {
        checks.push(invariance);
    }
    if family == QuadFamily::Rect {
        checks.push(adini);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ElementCertificate { family, samples, seed, checks, passed })
}

// ---------------------------------------------------------------------------
// exact sequence

/// Numerical rank of a singular-value list with the gap at the cutoff, in
/// decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankInfo {
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest singular value above the cutoff.
    pub sigma_kept: f64,
    /// Largest singular value below the cutoff; zero when none is dropped.
    pub sigma_dropped: f64,
    /// `log10(sigma_kept / max(sigma_dropped, eps * sigma_max))`.
    pub gap_decades: f64,
}

pub fn numerical_rank(singular_values: &[f64]) -> RankInfo {
    let sigma_max = singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = RANK_CUTOFF * sigma_max;
    let kept = singular_values.iter().filter(|&&s| s > cut);
    let rank = kept.clone().count();
    let sigma_kept = kept.fold(f64::INFINITY, |a, &b| a.min(b));
    let sigma_dropped = singular_values.iter().filter(|&&s| s <= cut).fold(0.0f64, |a, &b| a.max(b));
    let floor = sigma_dropped.max(f64::EPSILON * sigma_max);
    let gap_decades = if rank == 0 { 0.0 } else { libm::log10(sigma_kept / floor) };
    RankInfo { rank, sigma_max, sigma_kept, sigma_dropped, gap_decades }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub family: String,
    pub cells: usize,
    /// `(dim W_h, dim V_h, dim P_h)` with `P_h` the zero-mean constants.
    pub dims: (usize, usize, usize),
    /// `N_V^i - N_E^i + N_K`.
    pub euler: i64,
    /// Largest gap between `curl psi` and its re-interpolant in `V_K`.
    pub curl_reinterpolation: f64,
    /// Largest disagreement of shared DoFs of `curl_h w` between cells, and
    /// of boundary DoFs from zero.
    pub curl_continuity: f64,
    pub div_rank: RankInfo,
    pub div_nullity: usize,
    pub curl_rank: RankInfo,
    /// Rank of `[curl image | kernel basis of div_h]`.
    pub span_rank: RankInfo,
    /// `max |D C|`.
    pub div_curl: f64,
    /// Largest `|int_K div(Pi_K v) - int_K div v|` over cells and probes.
    pub commuting: f64,
    /// Largest `|int_K div(Pi_K curl w)| / |K|` for the stream-function probe.
    pub discrete_divergence_free: f64,
    pub exact: bool,
}

fn svd_values(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Divergence-free probe `curl(sin^2(pi x) sin^2(pi y))`.
fn probe_curl(p: Point) -> [f64; 2] {
    let (sx, sy) = (libm::sin(PI * p[0]), libm::sin(PI * p[1]));
    let (s2x, s2y) = (libm::sin(2.0 * PI * p[0]), libm::sin(2.0 * PI * p[1]));
    [sx * sx * PI * s2y, -PI * s2x * sy * sy]
}

/// Probe with nonzero divergence and its divergence.
fn probe_general(p: Point) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    [libm::sin(PI * x) * y * y, x * y * y * y + libm::cos(2.0 * y)]
}

fn probe_general_div(p: Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    PI * libm::cos(PI * x) * y * y + 3.0 * x * y * y - 2.0 * libm::sin(2.0 * y)
}

pub fn verify_exact_sequence<E: Executor>(mesh: &Mesh, exec: &E) -> Result<SequenceReport, AssemblyError> {
    let ss = ScalarSpace::new(mesh, exec)?;
    let vs = VectorSpace::new(mesh, exec)?;
    let (ns, nv, nk) = (ss.dofs.num_scalar, vs.dofs.num_velocity, mesh.num_cells());

    // curl_h as a map between global coefficient vectors
    let mut c = DMatrix::<f64>::zeros(nv, ns);
    let mut seen = vec![vec![false; ns]; nv];
    let mut reinterp = 0.0f64;
    let mut continuity = 0.0f64;
    for k in 0..nk {
        let (se, ve) = (&ss.elements[k], &vs.elements[k]);
        let g = &se.geometry;
        let smap = ss.dofs.scalar_cell_dofs(mesh, k);
        let vmap = vs.dofs.vector_cell_dofs(mesh, k);
        for (j, psi) in se.psi.iter().enumerate() {
            let Some(gj) = smap[j] else { continue };
            let curl = psi.curl().scale(1.0 / g.diameter);
            let sigma = vector_dofs(g, &curl);
            let back = ve.combine(&sigma);
            reinterp = reinterp.max((&back - &curl).max_abs_coeff() * g.diameter);
            for (i, &(gi, sign)) in vmap.iter().enumerate() {
                let val = sign * sigma[i];
                match gi {
                    Some(gi) if seen[gi][gj] => continuity = continuity.max((c[(gi, gj)] - val).abs()),
                    Some(gi) => {
                        c[(gi, gj)] = val;
                        seen[gi][gj] = true;
                    }
                    None => continuity = continuity.max(val.abs()),
                }
            }
        }
    }

    // div_h: N_K x N_V rows of int_K div phi_j
    let rule = QuadratureRule::new(4);
    let mut d = DMatrix::<f64>::zeros(nv.max(nk), nv);
    for k in 0..nk {
        let ve = &vs.elements[k];
        let vmap = vs.dofs.vector_cell_dofs(mesh, k);
        let qps = rule.on_cell(&ve.geometry);
        for (j, &(gj, sign)) in vmap.iter().enumerate() {
            let Some(gj) = gj else { continue };
            let integral: f64 = qps
                .iter()
                .map(|q| q.weight * ve.divergence[j].eval(ve.geometry.to_local(q.point)))
                .sum();
            d[(k, gj)] += sign * integral;
        }
    }
    let div_top = d.rows(0, nk).into_owned();
    let div_rank = numerical_rank(&svd_values(&div_top));
    let div_nullity = nv - div_rank.rank;

    // kernel basis from the right singular vectors of the zero-padded square
    let svd = d.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let cut = RANK_CUTOFF * div_rank.sigma_max;
    let kernel_rows: Vec<usize> = (0..nv).filter(|&r| svd.singular_values[r] <= cut).collect();
    let mut joined = DMatrix::<f64>::zeros(nv, ns + kernel_rows.len());
    joined.view_mut((0, 0), (nv, ns)).copy_from(&c);
    for (col, &r) in kernel_rows.iter().enumerate() {
        for i in 0..nv {
            joined[(i, ns + col)] = vt[(r, i)];
        }
    }
    let curl_rank = numerical_rank(&svd_values(&c));
    let span_rank = numerical_rank(&svd_values(&joined));
    let div_curl = (&div_top * &c).abs().max();

    // commuting identity on every cell
    let edge_rule = GaussRule::new(12);
    let fine = QuadratureRule::new(10);
    let mut commuting = 0.0f64;
    let mut div_free = 0.0f64;
    for k in 0..nk {
        let ve = &vs.elements[k];
        let g = &ve.geometry;
        let qps = fine.on_cell(g);
        let div_int = |dofs: &[f64; 12]| -> f64 {
            let v = ve.combine(dofs);
            let dv = v.div().scale(1.0 / g.diameter);
            qps.iter().map(|q| q.weight * dv.eval(g.to_local(q.point))).sum()
        };
        let a = interpolate_vector(ve, &sample_vector_dofs(g, probe_curl, &edge_rule));
        let da = div_int(&a);
        commuting = commuting.max(da.abs());
        div_free = div_free.max(da.abs() / g.area);
        let b = interpolate_vector(ve, &sample_vector_dofs(g, probe_general, &edge_rule));
        let exact: f64 = qps.iter().map(|q| q.weight * probe_general_div(q.point)).sum();
        commuting = commuting.max((div_int(&b) - exact).abs());
    }

    let dims = (ns, nv, nk - 1);
    let exact = div_rank.rank == nk - 1
        && div_nullity == ns
        && curl_rank.rank == ns
        && span_rank.rank == div_nullity
        && continuity <= 1e-10
        && reinterp <= 1e-10
        && div_curl <= 1e-10;
    Ok(SequenceReport {
        family: mesh.family.name().into(),
        cells: nk,
        dims,
        euler: mesh.euler_characteristic(),
        curl_reinterpolation: reinterp,
        curl_continuity: continuity,
        div_rank,
        div_nullity,
        curl_rank,
        span_rank,
        div_curl,
        commuting,
        discrete_divergence_free: div_free,
        exact,
    })
}

/// Smallest nonzero singular value of `A^{-1/2} B^T D^{-1/2}`, with `A` the
/// broken `H^1` velocity matrix, `B` the divergence block and `D` the cell
/// areas: a discrete inf-sup constant over zero-mean pressures.
pub fn inf_sup_constant<E: Executor>(mesh: &Mesh, exec: &E) -> Result<f64, AssemblyError> {
    let vs = VectorSpace::new(mesh, exec)?;
    let nv = vs.dofs.num_velocity;
    let nk = mesh.num_cells();
    let rule = QuadratureRule::new(4);
    let mut a = DMatrix::<f64>::zeros(nv, nv);
    let mut bt = DMatrix::<f64>::zeros(nv, nk);
    for k in 0..nk {
        let ve = &vs.elements[k];
        let vmap = vs.dofs.vector_cell_dofs(mesh, k);
        let qps = rule.on_cell(&ve.geometry);
        let pts: Vec<Point> = qps.iter().map(|q| q.point).collect();
        let tab = ve.tabulate(&pts);
        for (q, qp) in qps.iter().enumerate() {
            for i in 0..12 {
                let (Some(gi), si) = vmap[i] else { continue };
                bt[(gi, k)] += qp.weight * si * tab.divergence(q, i) / libm::sqrt(ve.geometry.area);
                for j in 0..12 {
                    let (Some(gj), sj) = vmap[j] else { continue };
                    let gg: f64 = (0..4).map(|c| tab.jacobians[q][i][c] * tab.jacobians[q][j][c]).sum();
                    a[(gi, gj)] += qp.weight * si * sj * gg;
                }
            }
        }
    }
    let chol = a.cholesky().ok_or(AssemblyError::Parameter("velocity block is not positive definite"))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&bt)
        .ok_or(AssemblyError::Parameter("triangular solve failed"))?;
    let mut sv = svd_values(&x);
    sv.sort_by(|a, b| a.total_cmp(b));
    // the constant pressure is annihilated; skip that one zero
    Ok(sv.get(1).copied().unwrap_or(0.0))
}
