//! Envelope (skyline) Cholesky for sparse SPD matrices, after a reverse
//! Cuthill-McKee reordering to keep the envelope narrow.

use std::collections::VecDeque;

use crate::error::{DdmError, Result};

/// Symmetric sparse matrix as per-row `(column, value)` lists, both
/// triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }
}

/// Reverse Cuthill-McKee order of the sparsity graph: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = a.rows.iter().map(|r| r.len()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if placed[seed] {
            continue;
        }
        let start = peripheral(a, seed, &degree);
        placed[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.rows[v].iter().map(|e| e.0).filter(|&u| !placed[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            next.dedup();
            for u in next {
                placed[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

// Pseudo-peripheral vertex of `seed`'s component: walk to the last BFS
// level's lowest-degree vertex until the eccentricity stops growing.
fn peripheral(a: &SparseSym, seed: usize, degree: &[usize]) -> usize {
    let mut best = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let (levels, last) = bfs_levels(a, best);
        let cand = last.into_iter().min_by_key(|&v| (degree[v], v)).unwrap_or(best);
        if levels <= ecc {
            break;
        }
        ecc = levels;
        best = cand;
    }
    best
}

fn bfs_levels(a: &SparseSym, start: usize) -> (usize, Vec<usize>) {
    let mut seen = vec![false; a.dim()];
    seen[start] = true;
    let mut level = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &level {
            for &(u, _) in &a.rows[v] {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return (depth, level);
        }
        depth += 1;
        level = next;
    }
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, row) in a.rows.iter().enumerate() {
            let i = inv[old];
            for &(j_old, _) in row {
                let j = inv[j_old];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offset[n]];
        for (old, row) in a.rows.iter().enumerate() {
            let i = inv[old];
            for &(j_old, v) in row {
                let j = inv[j_old];
                if j <= i {
                    values[offset[i] + j - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = values[offset[i] + j - fi];
                let (ri, rj) = (offset[i] - fi, offset[j] - fj);
                for k in lo..j {
                    s -= values[ri + k] * values[rj + k];
                }
                if j < i {
                    values[ri + j] = s / values[offset[j] + j - fj];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(DdmError::InvalidMesh(format!(
                            "system matrix is not positive definite (pivot {s:e} at row {})",
                            perm[i]
                        )));
                    }
                    values[ri + i] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky {
            perm,
            inv,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y' = y
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        // Lᵀ x = y'
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        (0..n).map(|old| y[self.inv[old]]).collect()
    }
}
