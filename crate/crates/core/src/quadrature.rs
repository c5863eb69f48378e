//! Gauss-Legendre rules on `[-1, 1]`, their tensor products on the reference
//! square, and the pushed-forward rules on cells and edges.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{Point, QuadGeometry};

/// Default per-axis order: the 16-node tensor rule.
pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point Gauss-Legendre rule on `[-1, 1]`, exact to degree `2n - 1`.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = libm::cos(PI * (k as f64 + 0.75) / (nf + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[0, 1]`; weights sum to one, so a
    /// weighted sum gives a mean value.
    pub fn unit_interval(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub point: Point,
    pub weight: f64,
}

/// Tensor Gauss-Legendre rule of per-axis order `g` on `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub reference: Vec<QuadPoint>,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Self {
        let rule = GaussRule::new(order);
        let mut reference = Vec::with_capacity(order * order);
        for (&xj, &wj) in rule.nodes.iter().zip(&rule.weights) {
            for (&xi, &wi) in rule.nodes.iter().zip(&rule.weights) {
                reference.push(QuadPoint { point: [xi, xj], weight: wi * wj });
            }
        }
        Self { order, reference }
    }

    /// Physical points and weights (including `|det DF_K|`) on a cell.
    pub fn on_cell(&self, geometry: &QuadGeometry) -> Vec<QuadPoint> {
        self.reference
            .iter()
            .map(|q| QuadPoint {
                point: geometry.bilinear_map(q.point),
                weight: q.weight * geometry.bilinear_jacobian_det(q.point).abs(),
            })
            .collect()
    }
}

pub fn quadrature_points(geometry: &QuadGeometry, order: usize) -> Vec<QuadPoint> {
    QuadratureRule::new(order).on_cell(geometry)
}

/// Mean value over edge `i` of `f`, by the given 1D rule.
pub fn edge_mean<F: FnMut(Point) -> f64>(
    geometry: &QuadGeometry,
    edge: usize,
    rule: &GaussRule,
    mut f: F,
) -> f64 {
    rule.unit_interval()
        .map(|(t, w)| w * f(geometry.edge_point(edge, t)))
        .sum()
}
