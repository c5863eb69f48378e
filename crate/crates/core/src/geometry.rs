//! Per-cell geometry of a convex quadrilateral.
//!
//! The bilinear map from `[-1,1]^2` onto the cell factors as an affine map
//! `x = A x~ + b` composed with the simple distortion `x~ = x^ + x^ y^ s`.
//! The shape parameter `s` alone decides how far the cell is from a
//! parallelogram; convexity is equivalent to `|s1| + |s2| < 1`.
//!
//! All polynomial data (line forms, edge parameters) is expressed in the
//! cell-local frame `X = (x - b) / h` where `h` is the cell diameter.

use serde::{Deserialize, Serialize};

use crate::poly::Poly2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("cell is not strictly convex: |s1| + |s2| = {0}")]
    NotConvex(f64),
    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("vertices are not in counterclockwise order")]
    Clockwise,
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadGeometry {
    /// `V1..V4`, counterclockwise.
    pub vertices: [Point; 4],
    /// Row-major linear part of the affine map.
    pub a: [[f64; 2]; 2],
    pub b: Point,
    pub d: Point,
    pub s: [f64; 2],
    pub diameter: f64,
    pub area: f64,
    /// `l_i` vanishes on `E_i = V_i V_{i+1}`; `l_i(M_{i+2}) = 1`.
    pub lines: [Poly2; 4],
    pub l13: Poly2,
    pub l24: Poly2,
    pub m13: Poly2,
    pub m24: Poly2,
    pub midpoints: [Point; 4],
    pub edge_lengths: [f64; 4],
    pub normals: [Point; 4],
    pub tangents: [Point; 4],
    /// Affine edge parameter: `xi_i(V_i) = -1`, `xi_i(V_{i+1}) = 1`.
    pub xi: [Poly2; 4],
}

impl QuadGeometry {
    pub fn new(vertices: [Point; 4]) -> Result<Self, GeometryError> {
        compute_geometry(vertices)
    }

    pub fn to_local(&self, p: Point) -> Point {
        [(p[0] - self.b[0]) / self.diameter, (p[1] - self.b[1]) / self.diameter]
    }

    pub fn to_physical(&self, x: Point) -> Point {
        [self.b[0] + self.diameter * x[0], self.b[1] + self.diameter * x[1]]
    }

    pub fn local_vertices(&self) -> [Point; 4] {
        self.vertices.map(|v| self.to_local(v))
    }

    /// `|s1| + |s2|`.
    pub fn distortion(&self) -> f64 {
        self.s[0].abs() + self.s[1].abs()
    }

    /// Pulls a local-frame polynomial back to the intermediate reference
    /// cell: returns `p~ = p o A_K` as a polynomial in `x~`.
    pub fn pullback(&self, p: &Poly2) -> Poly2 {
        let h = self.diameter;
        let m = [[self.a[0][0] / h, self.a[0][1] / h], [self.a[1][0] / h, self.a[1][1] / h]];
        p.compose_affine(m, [0.0, 0.0])
    }

    /// Applies `A_K` to a point of the intermediate reference cell.
    pub fn affine_map(&self, xt: Point) -> Point {
        [
            self.a[0][0] * xt[0] + self.a[0][1] * xt[1] + self.b[0],
            self.a[1][0] * xt[0] + self.a[1][1] * xt[1] + self.b[1],
        ]
    }

    /// Bilinear reference map `F_K` from `[-1,1]^2`.
    pub fn bilinear_map(&self, r: Point) -> Point {
        let v = &self.vertices;
        let n = bilinear_shape(r);
        [
            n[0] * v[0][0] + n[1] * v[1][0] + n[2] * v[2][0] + n[3] * v[3][0],
            n[0] * v[0][1] + n[1] * v[1][1] + n[2] * v[2][1] + n[3] * v[3][1],
        ]
    }

    /// Determinant of the Jacobian of `F_K` at a reference point.
    pub fn bilinear_jacobian_det(&self, r: Point) -> f64 {
        let v = &self.vertices;
        let (xi, eta) = (r[0], r[1]);
        let mut dxi = [0.0; 2];
        let mut deta = [0.0; 2];
        for k in 0..2 {
            dxi[k] = 0.25 * ((1.0 - eta) * (v[1][k] - v[0][k]) + (1.0 + eta) * (v[2][k] - v[3][k]));
            deta[k] = 0.25 * ((1.0 - xi) * (v[3][k] - v[0][k]) + (1.0 + xi) * (v[2][k] - v[1][k]));
        }
        dxi[0] * deta[1] - dxi[1] * deta[0]
    }

    /// Point on edge `i` at parameter `t in [0, 1]` (from `V_i` to `V_{i+1}`).
    pub fn edge_point(&self, i: usize, t: f64) -> Point {
        let p = self.vertices[i];
        let q = self.vertices[(i + 1) % 4];
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }
}

fn bilinear_shape(r: Point) -> [f64; 4] {
    let (xi, eta) = (r[0], r[1]);
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

fn sub(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

fn norm(p: Point) -> f64 {
    libm::hypot(p[0], p[1])
}

/// Affine form vanishing on the line `PQ` and equal to one at `R`.
fn line_through(p: Point, q: Point, r: Point) -> Poly2 {
    let dir = sub(q, p);
    let nrm = [-dir[1], dir[0]];
    let scale = nrm[0] * (r[0] - p[0]) + nrm[1] * (r[1] - p[1]);
    let (cx, cy) = (nrm[0] / scale, nrm[1] / scale);
    Poly2::affine(-(cx * p[0] + cy * p[1]), cx, cy)
}

/// Shoelace area of a polygon given counterclockwise.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * twice
}

pub fn cell_area(geometry: &QuadGeometry) -> f64 {
    geometry.area
}

/// Shape parameter `s = A^{-1} d` straight from the vertices, plus `det A`.
pub fn shape_parameter(v: &[Point; 4]) -> ([f64; 2], f64) {
    let col1 = [
        0.25 * (v[2][0] - v[3][0] - v[0][0] + v[1][0]),
        0.25 * (v[2][1] - v[3][1] - v[0][1] + v[1][1]),
    ];
    let col2 = [
        0.25 * (v[2][0] + v[3][0] - v[0][0] - v[1][0]),
        0.25 * (v[2][1] + v[3][1] - v[0][1] - v[1][1]),
    ];
    let d = [
        0.25 * (v[2][0] - v[3][0] + v[0][0] - v[1][0]),
        0.25 * (v[2][1] - v[3][1] + v[0][1] - v[1][1]),
    ];
    let det = col1[0] * col2[1] - col2[0] * col1[1];
    let s1 = (d[0] * col2[1] - col2[0] * d[1]) / det;
    let s2 = (col1[0] * d[1] - d[0] * col1[1]) / det;
    ([s1, s2], det)
}

/// Quick convexity test used by mesh generation: counterclockwise and
/// `|s1| + |s2| < 1`.
pub fn is_strictly_convex(v: &[Point; 4]) -> bool {
    let (s, det) = shape_parameter(v);
    det > 0.0 && s[0].abs() + s[1].abs() < 1.0
}

pub fn compute_geometry(vertices: [Point; 4]) -> Result<QuadGeometry, GeometryError> {
    let v = vertices;
    let mut edge_lengths = [0.0; 4];
    let mut tangents = [[0.0; 2]; 4];
    let mut normals = [[0.0; 2]; 4];
    let mut midpoints = [[0.0; 2]; 4];
    for i in 0..4 {
        let e = sub(v[(i + 1) % 4], v[i]);
        let len = norm(e);
        if len == 0.0 {
            return Err(GeometryError::DegenerateEdge(i));
        }
        edge_lengths[i] = len;
        tangents[i] = [e[0] / len, e[1] / len];
        normals[i] = [tangents[i][1], -tangents[i][0]];
        midpoints[i] = [0.5 * (v[i][0] + v[(i + 1) % 4][0]), 0.5 * (v[i][1] + v[(i + 1) % 4][1])];
    }

    let (s, det) = shape_parameter(&v);
    if !(det > 0.0) {
        return Err(GeometryError::Clockwise);
    }
    let distortion = s[0].abs() + s[1].abs();
    if !(distortion < 1.0) {
        return Err(GeometryError::NotConvex(distortion));
    }
    let a = [
        [
            0.25 * (v[2][0] - v[3][0] - v[0][0] + v[1][0]),
            0.25 * (v[2][0] + v[3][0] - v[0][0] - v[1][0]),
        ],
        [
            0.25 * (v[2][1] - v[3][1] - v[0][1] + v[1][1]),
            0.25 * (v[2][1] + v[3][1] - v[0][1] - v[1][1]),
        ],
    ];
    let b = [
        0.25 * (v[0][0] + v[1][0] + v[2][0] + v[3][0]),
        0.25 * (v[0][1] + v[1][1] + v[2][1] + v[3][1]),
    ];
    let d = [
        0.25 * (v[2][0] - v[3][0] + v[0][0] - v[1][0]),
        0.25 * (v[2][1] - v[3][1] + v[0][1] - v[1][1]),
    ];

    let mut diameter: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            diameter = diameter.max(norm(sub(v[i], v[j])));
        }
    }

    let local = |p: Point| [(p[0] - b[0]) / diameter, (p[1] - b[1]) / diameter];
    let lv = v.map(local);
    let lm = midpoints.map(local);
    let lines = core::array::from_fn(|i| line_through(lv[i], lv[(i + 1) % 4], lm[(i + 2) % 4]));
    let m13 = line_through(lm[0], lm[2], lm[1]);
    let m24 = line_through(lm[1], lm[3], lm[2]);
    let l13 = line_through(lv[0], lv[2], lv[3]);
    let l24 = line_through(lv[1], lv[3], lv[2]);
    let xi = core::array::from_fn(|i| {
        let c = 2.0 * diameter / edge_lengths[i];
        let t = tangents[i];
        Poly2::affine(-c * (t[0] * lm[i][0] + t[1] * lm[i][1]), c * t[0], c * t[1])
    });

    Ok(QuadGeometry {
        vertices,
        a,
        b,
        d,
        s,
        diameter,
        area: polygon_area(&vertices),
        lines,
        l13,
        l24,
        m13,
        m24,
        midpoints,
        edge_lengths,
        normals,
        tangents,
        xi,
    })
}

/// Maps a reference-shape parameter to the vertices of the intermediate
/// cell: `V~_i = V^_i + (-1)^(i+1) s`.
pub fn intermediate_vertices(s: [f64; 2]) -> [Point; 4] {
    [
        [-1.0 + s[0], -1.0 + s[1]],
        [1.0 - s[0], -1.0 - s[1]],
        [1.0 + s[0], 1.0 + s[1]],
        [-1.0 - s[0], 1.0 - s[1]],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_square() {
        let g = compute_geometry([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.a, [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(g.b, [0.5, 0.5]);
        assert_eq!(g.d, [0.0, 0.0]);
        assert_eq!(g.s, [0.0, 0.0]);
        assert_eq!(g.area, 1.0);
    }

    #[test]
    fn right_trapezoid() {
        let g = compute_geometry([[0.0, 0.0], [1.0, 0.0], [1.5, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.a, [[0.625, 0.125], [0.0, 0.5]]);
        assert_eq!(g.d, [0.125, 0.0]);
        assert!(close(g.s[0], 0.2, 1e-15) && g.s[1] == 0.0);
        assert_eq!(g.area, 1.25);
    }

    #[test]
    fn line_normalization() {
        let g = compute_geometry([[0.1, -0.2], [1.3, 0.1], [1.1, 0.9], [-0.2, 0.7]]).unwrap();
        let lv = g.local_vertices();
        let lm = g.midpoints.map(|p| g.to_local(p));
        for i in 0..4 {
            assert!(close(g.lines[i].eval(lv[i]), 0.0, 1e-14));
            assert!(close(g.lines[i].eval(lv[(i + 1) % 4]), 0.0, 1e-14));
            assert!(close(g.lines[i].eval(lm[(i + 2) % 4]), 1.0, 1e-14));
            assert!(close(g.xi[i].eval(lv[i]), -1.0, 1e-13));
            assert!(close(g.xi[i].eval(lv[(i + 1) % 4]), 1.0, 1e-13));
        }
        assert!(close(g.m13.eval(lm[1]), 1.0, 1e-14));
        assert!(close(g.m24.eval(lm[2]), 1.0, 1e-14));
        assert!(close(g.l13.eval(lv[3]), 1.0, 1e-14));
        assert!(close(g.l24.eval(lv[2]), 1.0, 1e-14));
    }

    #[test]
    fn rejects_nonconvex_and_degenerate() {
        let dart = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.3], [0.0, 1.0]];
        assert!(matches!(compute_geometry(dart), Err(GeometryError::NotConvex(_))));
        let degenerate = [[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(compute_geometry(degenerate), Err(GeometryError::DegenerateEdge(0)));
        let cw = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert_eq!(compute_geometry(cw), Err(GeometryError::Clockwise));
    }

    #[test]
    fn intermediate_vertices_map_back() {
        let g = compute_geometry([[0.1, -0.2], [1.3, 0.1], [1.1, 0.9], [-0.2, 0.7]]).unwrap();
        for (i, vt) in intermediate_vertices(g.s).iter().enumerate() {
            let p = g.affine_map(*vt);
            assert!(close(p[0], g.vertices[i][0], 1e-12) && close(p[1], g.vertices[i][1], 1e-12));
        }
    }
}
