//! Sparse symmetric matrices and a profile (skyline) LDL^T direct solver.
//!
//! The factorization does not pivot. For saddle-point systems the ordering
//! makes every leading principal submatrix nonsingular instead: primal
//! unknowns are ordered by reverse Cuthill-McKee, each constraint row is
//! placed directly after the last primal unknown it couples to, and a row
//! that only couples to constraint rows (a mean-value multiplier) goes
//! right before the final constraint row.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("factorization breakdown at row {row} (pivot {pivot:e}, row scale {scale:e})")]
    Breakdown { row: usize, pivot: f64, scale: f64 },
    #[error("relative residual {0:e} above tolerance")]
    Residual(f64),
}

/// Relative residual the solver must reach.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `max |K_ij - K_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy; for small systems and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

/// Reverse Cuthill-McKee ordering of the rows `0..m` using only couplings
/// inside that range.
pub fn rcm_order(a: &CsrMatrix, m: usize) -> Vec<usize> {
    let degree: Vec<usize> = (0..m).map(|i| a.row(i).filter(|&(j, _)| j < m && j != i).count()).collect();
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(m);
    let mut queue = VecDeque::new();
    let mut nbrs: Vec<usize> = Vec::new();
    while let Some(start) = (0..m).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
        let start = pseudo_peripheral(a, m, start, &visited);
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| j < m && !visited[j]));
            nbrs.sort_unstable_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// A node of large eccentricity in the component of `start`, found by
/// repeated breadth-first sweeps.
fn pseudo_peripheral(a: &CsrMatrix, m: usize, start: usize, visited: &[bool]) -> usize {
    let mut current = start;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (far, depth) = bfs_farthest(a, m, current, visited);
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        current = far;
    }
    current
}

fn bfs_farthest(a: &CsrMatrix, m: usize, start: usize, blocked: &[bool]) -> (usize, usize) {
    let mut level = vec![usize::MAX; m];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut far = (start, 0);
    while let Some(v) = queue.pop_front() {
        let l = level[v];
        if l > far.1 || (l == far.1 && v < far.0) {
            far = (v, l);
        }
        for (j, _) in a.row(v) {
            if j < m && !blocked[j] && level[j] == usize::MAX {
                level[j] = l + 1;
                queue.push_back(j);
            }
        }
    }
    far
}

/// Elimination order for a system whose first `primal` rows form an SPD
/// block and whose remaining rows are constraints with zero diagonal.
pub fn saddle_order(a: &CsrMatrix, primal: usize) -> Vec<usize> {
    let base = rcm_order(a, primal);
    if primal == a.n {
        return base;
    }
    let mut position = vec![0usize; primal];
    for (p, &v) in base.iter().enumerate() {
        position[v] = p;
    }
    // constraint rows keyed by the position of their last primal neighbor
    let mut attach: Vec<(usize, usize)> = Vec::new();
    let mut floating: Vec<usize> = Vec::new();
    for r in primal..a.n {
        match a.row(r).filter(|&(j, _)| j < primal).map(|(j, _)| position[j]).max() {
            Some(p) => attach.push((p, r)),
            None => floating.push(r),
        }
    }
    attach.sort_unstable();
    let mut order = Vec::with_capacity(a.n);
    let mut next = attach.iter().peekable();
    for (p, &v) in base.iter().enumerate() {
        order.push(v);
        while let Some(&&(q, r)) = next.peek() {
            if q != p {
                break;
            }
            order.push(r);
            next.next();
        }
    }
    if floating.is_empty() {
        return order;
    }
    let last = order.pop();
    order.extend(floating);
    order.extend(last);
    order
}

/// Profile-stored `L D L^T` factors of `P K P^T`.
#[derive(Debug, Clone)]
pub struct SkylineLdl {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, SolveError> {
        let n = a.n;
        let mut inv = vec![0usize; n];
        for (p, &v) in perm.iter().enumerate() {
            inv[v] = p;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, &v) in perm.iter().enumerate() {
            for (j, _) in a.row(v) {
                first[i] = first[i].min(inv[j]);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i]));
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        let mut scale = vec![0.0f64; n];
        for (i, &v) in perm.iter().enumerate() {
            for (j, val) in a.row(v) {
                let pj = inv[j];
                scale[i] = scale[i].max(val.abs());
                if pj < i {
                    lower[start[i] + pj - first[i]] = val;
                } else if pj == i {
                    diag[i] = val;
                }
            }
        }
        // Row-oriented Crout: row i first holds w_j = L_ij D_j, then L_ij.
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(start[i]);
            let row = &mut rest[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &done[start[j] + k0 - fj..start[j] + j - fj];
                let wi = &row[k0 - fi..j - fi];
                let s: f64 = wi.iter().zip(lj).map(|(a, b)| a * b).sum();
                row[j - fi] -= s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let w = row[j - fi];
                let l = w / diag[j];
                d -= w * l;
                row[j - fi] = l;
            }
            let tol = 1e-13 * scale[i].max(f64::MIN_POSITIVE);
            if !d.is_finite() || d.abs() <= tol {
                return Err(SolveError::Breakdown { row: perm[i], pivot: d, scale: scale[i] });
            }
            diag[i] = d;
        }
        Ok(Self { perm, first, start, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Stored entries below the diagonal.
    pub fn profile_size(&self) -> usize {
        self.lower.len()
    }

    /// Number of negative pivots, the inertia count of `K`.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|d| **d < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&v| b[v]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (l, x) in row.iter().zip(&mut y[fi..i]) {
                *x -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (p, &v) in self.perm.iter().enumerate() {
            x[v] = y[p];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub profile_size: usize,
    pub negative_pivots: usize,
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Factors and solves `K x = b`, refining until the relative residual is
/// below [`RESIDUAL_TOL`] (three refinement steps at most).
pub fn solve_sparse(
    a: &CsrMatrix,
    b: &[f64],
    primal: usize,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    if b.len() != a.n {
        return Err(SolveError::DimensionMismatch { matrix: a.n, vector: b.len() });
    }
    let ldl = SkylineLdl::factor(a, saddle_order(a, primal))?;
    let bnorm = norm2(b);
    let mut x = ldl.solve(b);
    let mut steps = 0;
    let rel = loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = if bnorm > 0.0 { norm2(&r) / bnorm } else { norm2(&r) };
        if rel <= 1e-14 || steps == 3 {
            break rel;
        }
        let dx = ldl.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        steps += 1;
    };
    if !(rel <= RESIDUAL_TOL) {
        return Err(SolveError::Residual(rel));
    }
    Ok((
        x,
        SolveStats {
            relative_residual: rel,
            refinement_steps: steps,
            profile_size: ldl.profile_size(),
            negative_pivots: ldl.negative_pivots(),
        },
    ))
}
