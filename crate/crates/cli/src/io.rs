//! Mesh documents and matrix dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nodalquad_core::geometry::Point;
use nodalquad_core::linalg::CsrMatrix;
use nodalquad_core::mesh::{Mesh, MeshFamily};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// JSON form of a mesh. `geometry_hash` is checked on import when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub family: MeshFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_hash: Option<String>,
}

/// SHA-256 over the vertex coordinate bits and the cell connectivity.
pub fn geometry_hash(vertices: &[Point], cells: &[[usize; 4]]) -> String {
    let mut h = Sha256::new();
    h.update((vertices.len() as u64).to_le_bytes());
    for v in vertices {
        h.update(v[0].to_bits().to_le_bytes());
        h.update(v[1].to_bits().to_le_bytes());
    }
    h.update((cells.len() as u64).to_le_bytes());
    for c in cells {
        for &i in c {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn mesh_document(mesh: &Mesh, n: Option<usize>) -> MeshDocument {
    MeshDocument {
        family: mesh.family,
        n,
        vertices: mesh.vertices.clone(),
        cells: mesh.cells.clone(),
        geometry_hash: Some(geometry_hash(&mesh.vertices, &mesh.cells)),
    }
}

pub fn mesh_from_document(doc: MeshDocument) -> Result<Mesh> {
    if let Some(want) = &doc.geometry_hash {
        let got = geometry_hash(&doc.vertices, &doc.cells);
        if &got != want {
            bail!("geometry hash mismatch: document says {want}, contents hash to {got}");
        }
    }
    Ok(Mesh::from_cells(doc.family, doc.vertices, doc.cells)?)
}

pub fn write_mesh(path: &Path, doc: &MeshDocument) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(doc)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_mesh(path: &Path) -> Result<MeshDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// MatrixMarket coordinate format, general real, 1-based indices.
pub fn matrix_market(a: &CsrMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n, a.n, a.nnz());
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            let _ = writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v);
        }
    }
    out
}
