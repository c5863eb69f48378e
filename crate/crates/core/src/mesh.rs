//! Quadrilateral meshes of the unit square and their connectivity.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{compute_geometry, is_strictly_convex, GeometryError, Point, QuadGeometry};

/// Resampling budget per vertex for the random family.
pub const MAX_RESAMPLES: usize = 100;

/// Parallel sides of `0.6 h` and `1.4 h`.
pub const DEFAULT_TRAPEZOID_DELTA: f64 = 0.2;
pub const DEFAULT_RANDOM_DELTA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh needs n >= 2, got {0}")]
    TooCoarse(usize),
    #[error("perturbation amplitude {0} outside [0, 0.25]")]
    BadDelta(f64),
    #[error("no convex placement found for vertex {0} after {MAX_RESAMPLES} samples")]
    ConvexityUnachievable(usize),
    #[error("cell {cell}: {source}")]
    Cell { cell: usize, source: GeometryError },
    #[error("cell {0} references a missing vertex")]
    BadIndex(usize),
    #[error("edge {0:?} is shared by more than two cells")]
    NonManifold([usize; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeshFamily {
    Rectangular,
    Trapezoidal { delta: f64 },
    Random { delta: f64, seed: u64 },
    /// Imported or hand-built meshes.
    Custom,
}

impl MeshFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MeshFamily::Rectangular => "rect",
            MeshFamily::Trapezoidal { .. } => "trap",
            MeshFamily::Random { .. } => "random",
            MeshFamily::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent cells with the local edge index in each.
    pub cells: Vec<(usize, usize)>,
    /// Global unit normal: the direction from the lower to the higher
    /// vertex index rotated clockwise by a quarter turn.
    pub normal: Point,
    /// Global unit tangent, from lower to higher vertex index.
    pub tangent: Point,
    pub length: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub family: MeshFamily,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex indices.
    pub cells: Vec<[usize; 4]>,
    pub edges: Vec<Edge>,
    /// Global edge index of each local edge `i` (from `V_i` to `V_i+1`).
    pub cell_edges: Vec<[usize; 4]>,
    pub boundary_vertex: Vec<bool>,
    pub geometries: Vec<QuadGeometry>,
}

impl Mesh {
    /// Builds connectivity and per-cell geometry from raw arrays.
    pub fn from_cells(
        family: MeshFamily,
        vertices: Vec<Point>,
        cells: Vec<[usize; 4]>,
    ) -> Result<Self, MeshError> {
        let mut lookup: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut geometries = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::BadIndex(k));
            }
            let corners = cell.map(|v| vertices[v]);
            let g = compute_geometry(corners).map_err(|source| MeshError::Cell { cell: k, source })?;
            geometries.push(g);
            let mut local = [0; 4];
            for i in 0..4 {
                let (a, b) = (cell[i], cell[(i + 1) % 4]);
                let key = [a.min(b), a.max(b)];
                let idx = *lookup.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[key[0]], vertices[key[1]]);
                    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                    let length = libm::hypot(dx, dy);
                    let tangent = [dx / length, dy / length];
                    edges.push(Edge {
                        vertices: key,
                        cells: Vec::new(),
                        normal: [tangent[1], -tangent[0]],
                        tangent,
                        length,
                        boundary: false,
                    });
                    edges.len() - 1
                });
                if edges[idx].cells.len() == 2 {
                    return Err(MeshError::NonManifold(key));
                }
                edges[idx].cells.push((k, i));
                local[i] = idx;
            }
            cell_edges.push(local);
        }
        let mut boundary_vertex = alloc::vec![false; vertices.len()];
        for e in &mut edges {
            e.boundary = e.cells.len() == 1;
            if e.boundary {
                boundary_vertex[e.vertices[0]] = true;
                boundary_vertex[e.vertices[1]] = true;
            }
        }
        Ok(Self { family, vertices, cells, edges, cell_edges, boundary_vertex, geometries })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|b| !**b).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.boundary).count()
    }

    /// `N_V^i - N_E^i + N_K`; equals one on a simply connected domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_interior_vertices() as i64 - self.num_interior_edges() as i64
            + self.num_cells() as i64
    }

    /// Sign relating the outward normal of local edge `i` of cell `k` to
    /// the global edge normal.
    pub fn edge_sign(&self, k: usize, i: usize) -> f64 {
        let e = &self.edges[self.cell_edges[k][i]];
        let n = self.geometries[k].normals[i];
        if n[0] * e.normal[0] + n[1] * e.normal[1] >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.geometries.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }
}

fn grid_index(n: usize, i: usize, j: usize) -> usize {
    j * (n + 1) + i
}

fn grid_cells(n: usize) -> Vec<[usize; 4]> {
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([
                grid_index(n, i, j),
                grid_index(n, i + 1, j),
                grid_index(n, i + 1, j + 1),
                grid_index(n, i, j + 1),
            ]);
        }
    }
    cells
}

fn grid_vertices(n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push([i as f64 * h, j as f64 * h]);
        }
    }
    v
}

/// Generates an `n x n` mesh of the unit square.
pub fn make_mesh(n: usize, family: MeshFamily) -> Result<Mesh, MeshError> {
    if n < 2 {
        return Err(MeshError::TooCoarse(n));
    }
    let h = 1.0 / n as f64;
    let mut vertices = grid_vertices(n);
    let cells = grid_cells(n);
    let interior = |i: usize, j: usize| i > 0 && j > 0 && i < n && j < n;
    match family {
        MeshFamily::Rectangular | MeshFamily::Custom => {}
        MeshFamily::Trapezoidal { delta } => {
            check_delta(delta)?;
            for j in 1..n {
                for i in 1..n {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    vertices[grid_index(n, i, j)][1] += sign * delta * h;
                }
            }
        }
        MeshFamily::Random { delta, seed } => {
            check_delta(delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp = delta * h;
            for j in 0..=n {
                for i in 0..=n {
                    if !interior(i, j) {
                        continue;
                    }
                    let idx = grid_index(n, i, j);
                    let base = vertices[idx];
                    let mut placed = false;
                    for _ in 0..MAX_RESAMPLES {
                        let dx = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
                        let dy = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
                        vertices[idx] = [base[0] + dx, base[1] + dy];
                        if incident_cells_convex(&vertices, n, i, j) {
                            placed = true;
                            break;
                        }
                    }
                    if !placed {
                        return Err(MeshError::ConvexityUnachievable(idx));
                    }
                }
            }
        }
    }
    Mesh::from_cells(family, vertices, cells)
}

fn check_delta(delta: f64) -> Result<(), MeshError> {
    if (0.0..=0.25).contains(&delta) {
        Ok(())
    } else {
        Err(MeshError::BadDelta(delta))
    }
}

fn incident_cells_convex(vertices: &[Point], n: usize, i: usize, j: usize) -> bool {
    for cj in j.saturating_sub(1)..=j.min(n - 1) {
        for ci in i.saturating_sub(1)..=i.min(n - 1) {
            let quad = [
                vertices[grid_index(n, ci, cj)],
                vertices[grid_index(n, ci + 1, cj)],
                vertices[grid_index(n, ci + 1, cj + 1)],
                vertices[grid_index(n, ci, cj + 1)],
            ];
            if !is_strictly_convex(&quad) {
                return false;
            }
        }
    }
    true
}
