//! Compressed sparse row matrices and a sparse `LDL^T` factorization.
//!
//! The factorization is the classic up-looking scheme driven by the
//! elimination tree, applied after a nested-dissection ordering computed from
//! the matrix graph. No pivoting is performed. Rows flagged as droppable whose
//! pivot vanishes are removed from the system (their unknown is pinned to
//! zero); that is how redundant constraint rows are handled.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                x[i] * c.iter().zip(v).map(|(&j, &a)| a * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let t = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, alpha * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Extracts the rows and columns selected by the maps (`map[i] = Some(new index)`).
    pub fn select(
        &self,
        row_map: &[Option<usize>],
        nrows: usize,
        col_map: &[Option<usize>],
        ncols: usize,
    ) -> Self {
        let t = self
            .triplets()
            .filter_map(|(i, j, v)| Some((row_map[i]?, col_map[j]?, v)))
            .collect();
        Self::from_triplets(nrows, ncols, t)
    }

    /// Block matrix `[[a, b^T], [b, c]]`.
    pub fn saddle(a: &CsrMatrix, b: &CsrMatrix, c: Option<&CsrMatrix>) -> Self {
        let (n, m) = (a.nrows, b.nrows);
        assert_eq!(b.ncols, n);
        let mut t: Vec<(usize, usize, f64)> = a.triplets().collect();
        for (i, j, v) in b.triplets() {
            t.push((n + i, j, v));
            t.push((j, n + i, v));
        }
        if let Some(c) = c {
            t.extend(c.triplets().map(|(i, j, v)| (n + i, n + j, v)));
        }
        Self::from_triplets(n + m, n + m, t)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol
    }

    /// Coordinate text export, one `i j value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{i} {j} {v}");
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Symmetric adjacency lists (diagonal excluded).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nrows];
        for (i, j, _) in self.triplets() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

const LEAF_SIZE: usize = 64;

/// Nested-dissection ordering (`perm[new] = old`) from level-structure bisection.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut tag = vec![0u32; n];
    let mut next_tag = 1u32;
    let mut level = vec![usize::MAX; n];
    let mut stack = vec![Task::Split((0..n).collect())];
    while let Some(task) = stack.pop() {
        let nodes = match task {
            Task::Emit(nodes) => {
                order.extend(nodes);
                continue;
            }
            Task::Split(nodes) => nodes,
        };
        if nodes.len() <= LEAF_SIZE {
            order.extend(nodes);
            continue;
        }
        let t = next_tag;
        next_tag += 1;
        for &v in &nodes {
            tag[v] = t;
        }
        // Connected components of the induced subgraph.
        let comps = components(adj, &nodes, &mut tag, t, &mut next_tag);
        if comps.len() > 1 {
            for c in comps.into_iter().rev() {
                stack.push(Task::Split(c));
            }
            continue;
        }
        let nodes = comps.into_iter().next().unwrap();
        let t = tag[nodes[0]];
        let root = pseudo_peripheral(adj, &nodes, &tag, t, &mut level);
        let levels = bfs_levels(adj, root, &tag, t, &mut level);
        if levels.len() < 3 {
            order.extend(nodes);
            continue;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut sep = 1;
        for (l, lv) in levels.iter().enumerate() {
            acc += lv.len();
            if acc >= half {
                sep = l.clamp(1, levels.len() - 2);
                break;
            }
        }
        let low: Vec<usize> = levels[..sep].concat();
        let high: Vec<usize> = levels[sep + 1..].concat();
        stack.push(Task::Emit(levels[sep].clone()));
        stack.push(Task::Split(high));
        stack.push(Task::Split(low));
    }
    order
}

fn components(adj: &[Vec<usize>], nodes: &[usize], tag: &mut [u32], t: u32, next_tag: &mut u32) -> Vec<Vec<usize>> {
    let mut comps = Vec::new();
    for &s in nodes {
        if tag[s] != t {
            continue;
        }
        let ct = *next_tag;
        *next_tag += 1;
        let mut comp = vec![s];
        tag[s] = ct;
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for &w in &adj[v] {
                if tag[w] == t {
                    tag[w] = ct;
                    comp.push(w);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, tag: &[u32], t: u32, level: &mut [usize]) -> Vec<Vec<usize>> {
    let mut levels = vec![vec![root]];
    level[root] = 0;
    let mut visited = vec![root];
    loop {
        let mut next = Vec::new();
        let d = levels.len();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if tag[w] == t && level[w] == usize::MAX {
                    level[w] = d;
                    next.push(w);
                    visited.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    for v in visited {
        level[v] = usize::MAX;
    }
    levels
}

fn pseudo_peripheral(adj: &[Vec<usize>], nodes: &[usize], tag: &[u32], t: u32, level: &mut [usize]) -> usize {
    let mut root = nodes[0];
    let mut depth = 0;
    for _ in 0..8 {
        let levels = bfs_levels(adj, root, tag, t, level);
        if levels.len() <= depth {
            break;
        }
        depth = levels.len();
        // Lowest-degree node of the last level.
        root = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (adj[v].iter().filter(|&&w| tag[w] == t).count(), v))
            .unwrap();
    }
    root
}

/// Sparse `P A P^T = L D L^T` factorization.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dropped: Vec<bool>,
}

/// Relative pivot size below which an ordinary row counts as singular.
pub const BREAKDOWN_TOL: f64 = 1e-13;
/// Relative pivot size below which a droppable row is treated as redundant.
pub const DROP_TOL: f64 = 1e-9;

impl LdlFactor {
    /// Factorizes the symmetric matrix `a` under ordering `perm` (`perm[new] = old`).
    ///
    /// `droppable[old]` marks rows that may be removed when their pivot vanishes.
    pub fn new(a: &CsrMatrix, perm: &[usize], droppable: Option<&[bool]>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(a.ncols(), n);
        assert_eq!(perm.len(), n);
        let mut iperm = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // Upper triangle of the permuted matrix, by column.
        let mut colcount = vec![0usize; n + 1];
        for (i, j, _) in a.triplets() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                colcount[pj + 1] += 1;
            }
        }
        for k in 0..n {
            colcount[k + 1] += colcount[k];
        }
        let ap = colcount.clone();
        let mut fill = colcount;
        let mut ai = vec![0usize; ap[n]];
        let mut ax = vec![0.0; ap[n]];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                ai[fill[pj]] = pi;
                ax[fill[pj]] = v;
                fill[pj] += 1;
            }
        }

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ai[ap[k]..ap[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // Numeric.
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut dropped = vec![false; n];
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        lnz.iter_mut().for_each(|c| *c = 0);
        for k in 0..n {
            y[k] = 0.0;
            let mut top = n;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                if dropped[i] {
                    continue;
                }
                y[i] += ax[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let diag = y[k];
            d[k] = diag;
            y[k] = 0.0;
            let mut update = 0.0f64;
            let row_start = top;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = if dropped[i] { 0.0 } else { yi / d[i] };
                d[k] -= l_ki * yi;
                update += (l_ki * yi).abs();
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            let scale = diag.abs().max(update);
            let may_drop = droppable.is_some_and(|m| m[perm[k]]);
            let tol = if may_drop { DROP_TOL } else { BREAKDOWN_TOL };
            if !(d[k].abs() > tol * scale) || !d[k].is_finite() {
                if may_drop {
                    // Remove row k: zero its entries of L and pin the unknown.
                    for &i in &pattern[row_start..n] {
                        lx[lp[i] + lnz[i] - 1] = 0.0;
                    }
                    d[k] = 1.0;
                    dropped[k] = true;
                } else {
                    return Err(Error::FactorizationBreakdown { index: perm[k], pivot: d[k] });
                }
            }
        }
        Ok(LdlFactor { n, perm: perm.to_vec(), lp, li, lx, d, dropped })
    }

    /// Factorization with a nested-dissection ordering of the matrix graph.
    pub fn with_nested_dissection(a: &CsrMatrix) -> Result<Self> {
        let perm = nested_dissection(&a.adjacency());
        Self::new(a, &perm, None)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Original indices of rows removed during factorization.
    pub fn dropped_rows(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.n).filter(|&k| self.dropped[k]).map(|k| self.perm[k]).collect();
        v.sort_unstable();
        v
    }

    /// Number of negative pivots (inertia of the factorized matrix, dropped rows excluded).
    pub fn negative_pivots(&self) -> usize {
        (0..self.n).filter(|&k| !self.dropped[k] && self.d[k] < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for k in 0..self.n {
            if self.dropped[k] {
                x[k] = 0.0;
            }
        }
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] = if self.dropped[j] { 0.0 } else { x[j] / self.d[j] };
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = if self.dropped[j] { 0.0 } else { s };
        }
        let mut out = vec![0.0; self.n];
        for (k, &o) in self.perm.iter().enumerate() {
            out[o] = x[k];
        }
        out
    }
}
