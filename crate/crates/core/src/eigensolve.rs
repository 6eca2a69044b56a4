//! Smallest eigenpairs of sparse symmetric pencils `K x = lambda M x`, with an
//! optional linear constraint `B x = 0` handled through a saddle-point solve.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{nested_dissection, CsrMatrix, LdlFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense below `dense_threshold` unknowns, subspace iteration above.
    Auto,
    Dense,
    /// Shift-invert preconditioned block iteration with Rayleigh-Ritz.
    Subspace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub n_eigs: usize,
    /// Spectral shift of the factorized operator.
    pub shift: f64,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub method: EigenMethod,
    pub dense_threshold: usize,
    /// Block size; defaults to `max(2k, k + 4)`.
    pub block_size: Option<usize>,
    /// Expected number of redundant constraint rows (for example the constant
    /// pressure); checked when set.
    pub expected_nullspace: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            n_eigs: 1,
            shift: 0.0,
            tol: 1e-9,
            max_iter: 500,
            seed: 0x5eed,
            method: EigenMethod::Auto,
            dense_threshold: 300,
            block_size: None,
            expected_nullspace: None,
        }
    }
}

impl SolveOptions {
    pub fn with_n_eigs(n_eigs: usize) -> Self {
        SolveOptions { n_eigs, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized to unit `M`-norm, largest entry positive.
    pub vector: Vec<f64>,
    /// Relative residual at termination.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub pairs: Vec<EigenPair>,
    pub iterations: usize,
    /// Shift actually used (after any breakdown retries).
    pub shift: f64,
    /// Constraint rows found redundant.
    pub nullspace_dim: usize,
}

impl EigenSolution {
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pencil(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<()> {
    let n = k.nrows();
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidArgument("stiffness and mass must be square and of equal size".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInterior);
    }
    if opts.n_eigs == 0 || opts.n_eigs > n {
        return Err(Error::InvalidArgument(format!("requested {} eigenpairs of a {n}-dimensional problem", opts.n_eigs)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(())
}

fn normalize_sign(v: &mut [f64]) {
    let i = (0..v.len()).fold(0, |b, i| if v[i].abs() > v[b].abs() + 1e-12 * v[b].abs() { i } else { b });
    if v[i] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn trace_ratio(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let tk: f64 = k.diagonal().iter().sum();
    let tm: f64 = m.diagonal().iter().sum();
    (tk / tm).abs().max(f64::MIN_POSITIVE)
}

/// Shifts tried in turn: the requested one, then two perturbed ones.
fn shift_sequence(k: &CsrMatrix, m: &CsrMatrix, shift: f64) -> [f64; 3] {
    let r = trace_ratio(k, m);
    [shift, shift - 1e-3 * r, shift - 1e-2 * r]
}

fn dense_smallest(k: &DMatrix<f64>, m: &DMatrix<f64>, n_eigs: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular mass factor".into()))?;
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt_inv = linv.transpose();
    Ok(idx
        .into_iter()
        .take(n_eigs)
        .map(|i| {
            let x = &lt_inv * eig.eigenvectors.column(i);
            (eig.eigenvalues[i], x.iter().copied().collect())
        })
        .collect())
}

/// Finalizes pairs: unit `M`-norm, sign, residual `||Kx - lambda Mx|| / ||Kx||`.
fn finish_pairs(k: &CsrMatrix, m: &CsrMatrix, raw: Vec<(f64, Vec<f64>)>) -> Vec<EigenPair> {
    raw.into_iter()
        .map(|(value, mut x)| {
            let mx = m.mul_vec(&x);
            let s = dot(&x, &mx).sqrt();
            x.iter_mut().for_each(|v| *v /= s);
            normalize_sign(&mut x);
            let kx = k.mul_vec(&x);
            let mx = m.mul_vec(&x);
            let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt();
            let nk = dot(&kx, &kx).sqrt();
            EigenPair { value, vector: x, residual: if nk > 0.0 { r / nk } else { r } }
        })
        .collect()
}

/// Rayleigh-Ritz on the span of `y`, robust to nearly dependent columns.
///
/// The columns are M-orthonormalized by Gram-Schmidt with one
/// reorthogonalization pass; directions that lose all but `1e-10` of their
/// norm are dropped. Returns Ritz values ascending and, per Ritz vector, its
/// coefficients in `y`.
fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, y: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let p = y.len();
    // q[j] = sum_i t[j][i] y[i], M-orthonormal.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut mq: Vec<Vec<f64>> = Vec::new();
    let mut t: Vec<Vec<f64>> = Vec::new();
    for (i, yi) in y.iter().enumerate() {
        let mut v = yi.clone();
        let mut c = vec![0.0; p];
        c[i] = 1.0;
        let norm0 = m.bilinear(&v, &v).sqrt();
        if norm0 == 0.0 || !norm0.is_finite() {
            continue;
        }
        for _ in 0..2 {
            let proj: Vec<f64> = mq.par_iter().map(|w| dot(w, &v)).collect();
            for (j, a) in proj.iter().enumerate() {
                v.iter_mut().zip(&q[j]).for_each(|(x, qv)| *x -= a * qv);
                c.iter_mut().zip(&t[j]).for_each(|(x, tv)| *x -= a * tv);
            }
        }
        let mv = m.mul_vec(&v);
        let norm = dot(&v, &mv).sqrt();
        if norm <= 1e-10 * norm0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        c.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
        mq.push(mv.into_iter().map(|x| x / norm).collect());
        t.push(c);
    }
    let r = q.len();
    let kq: Vec<Vec<f64>> = q.par_iter().map(|c| k.mul_vec(c)).collect();
    let h = DMatrix::from_fn(r, r, |i, j| 0.5 * (dot(&q[i], &kq[j]) + dot(&q[j], &kq[i])));
    let he = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    let tm = DMatrix::from_fn(p, r, |i, j| t[j][i]);
    let coef = tm * he.eigenvectors;
    let vals = idx.iter().map(|&i| he.eigenvalues[i]).collect();
    let coef = DMatrix::from_fn(p, r, |i, j| coef[(i, idx[j])]);
    (vals, coef)
}

/// `sum_j c[j] y[j]` for the columns of `y` listed in `range`.
fn combine(y: &[Vec<f64>], coef: &DMatrix<f64>, col: usize, range: std::ops::Range<usize>) -> Vec<f64> {
    let mut x = vec![0.0; y[0].len()];
    for j in range {
        let a = coef[(j, col)];
        if a != 0.0 {
            x.iter_mut().zip(&y[j]).for_each(|(xi, v)| *xi += a * v);
        }
    }
    x
}

fn m_normalize(m: &CsrMatrix, v: &mut [f64]) {
    let s = m.bilinear(v, v).sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Block iteration preconditioned by the shift-invert solve `apply`, which
/// maps a load vector `f` to `(K - shift M)^-1 f` (restricted to the
/// constraint space when there is one).
///
/// Each step runs Rayleigh-Ritz on `[X, apply(R), P]` with `R` the residual
/// block and `P` the previous update direction (locally optimal block
/// preconditioned iteration). `project` removes the part of a residual that
/// the constraint absorbs (identity when unconstrained).
fn subspace_iteration(
    k: &CsrMatrix,
    m: &CsrMatrix,
    opts: &SolveOptions,
    apply: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    project: &(dyn Fn(Vec<f64>) -> Vec<f64> + Sync),
) -> Result<(Vec<(f64, Vec<f64>)>, usize)> {
    let n = k.nrows();
    let nk = opts.n_eigs;
    let p = opts.block_size.unwrap_or((2 * nk).max(nk + 4)).max(nk).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    let y: Vec<Vec<f64>> = x0.par_iter().map(|x| apply(&m.mul_vec(x))).collect();
    let (vals, coef) = rayleigh_ritz(k, m, &y);
    let mut theta: Vec<f64> = vals.into_iter().take(p).collect();
    let mut x: Vec<Vec<f64>> = (0..theta.len()).map(|c| combine(&y, &coef, c, 0..y.len())).collect();
    let mut dir: Vec<Vec<f64>> = Vec::new();
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iter {
        if x.len() < nk {
            return Err(Error::NoConvergence { iterations: it, residual: f64::INFINITY });
        }
        x.iter_mut().for_each(|v| m_normalize(m, v));
        let res: Vec<(Vec<f64>, f64)> = x
            .par_iter()
            .zip(&theta)
            .map(|(v, &t)| {
                let kx = k.mul_vec(v);
                let mx = m.mul_vec(v);
                let r = project(kx.iter().zip(&mx).map(|(a, b)| a - t * b).collect());
                // The shift term keeps the measure meaningful for null eigenvalues.
                let scale = dot(&kx, &kx).sqrt() + opts.shift.abs() * dot(&mx, &mx).sqrt();
                let rel = dot(&r, &r).sqrt() / scale.max(f64::MIN_POSITIVE);
                (r, rel)
            })
            .collect();
        worst = res[..nk].iter().map(|(_, r)| *r).fold(0.0, f64::max);
        if worst <= opts.tol {
            let out = (0..nk).map(|j| (theta[j], x[j].clone())).collect();
            return Ok((out, it));
        }
        let mut w: Vec<Vec<f64>> = res.par_iter().map(|(r, _)| apply(r)).collect();
        w.iter_mut().for_each(|v| m_normalize(m, v));
        dir.iter_mut().for_each(|v| m_normalize(m, v));
        let nx = x.len();
        let basis: Vec<Vec<f64>> = x.iter().chain(&w).chain(&dir).cloned().collect();
        let (vals, coef) = rayleigh_ritz(k, m, &basis);
        let keep = p.min(vals.len());
        theta = vals[..keep].to_vec();
        x = (0..keep).map(|c| combine(&basis, &coef, c, 0..basis.len())).collect();
        dir = (0..keep).map(|c| combine(&basis, &coef, c, nx..basis.len())).collect();
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: worst })
}

/// Smallest `opts.n_eigs` eigenpairs of `K x = lambda M x` with `M` positive definite.
pub fn smallest_eigenpairs(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<EigenSolution> {
    check_pencil(k, m, opts)?;
    let n = k.nrows();
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Subspace => false,
        EigenMethod::Auto => n <= opts.dense_threshold,
    };
    if dense {
        let kd = DMatrix::from_row_slice(n, n, &k.to_dense().concat());
        let md = DMatrix::from_row_slice(n, n, &m.to_dense().concat());
        let raw = dense_smallest(&kd, &md, opts.n_eigs)?;
        return Ok(EigenSolution { pairs: finish_pairs(k, m, raw), iterations: 0, shift: opts.shift, nullspace_dim: 0 });
    }
    let perm = nested_dissection(&k.adjacency());
    let mut last = None;
    for shift in shift_sequence(k, m, opts.shift) {
        let op = k.add_scaled(m, -shift);
        match LdlFactor::new(&op, &perm, None) {
            Ok(ldl) => {
                let o = SolveOptions { shift, ..opts.clone() };
                let (raw, iterations) = subspace_iteration(k, m, &o, &|b| ldl.solve(b), &|r| r)?;
                return Ok(EigenSolution { pairs: finish_pairs(k, m, raw), iterations, shift, nullspace_dim: 0 });
            }
            Err(e @ Error::FactorizationBreakdown { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one shift tried"))
}

/// Factorization of the saddle matrix `[[A, B^T], [B, 0]]`.
///
/// Unknowns are ordered by nested dissection of `A`, with each constraint row
/// placed directly after the last unknown it couples to, so that no pivoting
/// is needed. Redundant constraint rows are dropped and their multipliers set
/// to zero.
#[derive(Debug, Clone)]
pub struct SaddleSolver {
    n: usize,
    m: usize,
    ldl: LdlFactor,
}

impl SaddleSolver {
    pub fn new(a: &CsrMatrix, b: &CsrMatrix) -> Result<Self> {
        let (n, m) = (a.nrows(), b.nrows());
        if a.ncols() != n || b.ncols() != n {
            return Err(Error::InvalidArgument("saddle blocks have inconsistent sizes".into()));
        }
        let s = CsrMatrix::saddle(a, b, None);
        // Dissect the coupled graph, then keep only the velocity order and
        // delay every constraint row until its last velocity neighbour.
        let order: Vec<usize> = nested_dissection(&s.adjacency()).into_iter().filter(|&v| v < n).collect();
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut after: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut trailing = Vec::new();
        for q in 0..m {
            let (cols, vals) = b.row(q);
            let last = cols.iter().zip(vals).filter(|(_, v)| **v != 0.0).map(|(&c, _)| pos[c]).max();
            match last {
                Some(l) => after[l].push(n + q),
                None => trailing.push(n + q),
            }
        }
        let mut perm = Vec::with_capacity(n + m);
        for (i, &v) in order.iter().enumerate() {
            perm.push(v);
            perm.extend_from_slice(&after[i]);
        }
        perm.extend(trailing);
        let droppable: Vec<bool> = (0..n + m).map(|i| i >= n).collect();
        let ldl = LdlFactor::new(&s, &perm, Some(&droppable))?;
        Ok(SaddleSolver { n, m, ldl })
    }

    pub fn nnz_l(&self) -> usize {
        self.ldl.nnz_l()
    }

    /// Number of dropped (redundant) constraint rows.
    pub fn nullspace_dim(&self) -> usize {
        self.ldl.dropped_rows().len()
    }

    /// Solves `A x + B^T p = f`, `B x = g`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rhs: Vec<f64> = f.iter().chain(g).copied().collect();
        let mut sol = self.ldl.solve(&rhs);
        let p = sol.split_off(self.n);
        debug_assert_eq!(p.len(), self.m);
        (sol, p)
    }
}

/// Smallest eigenpairs of `A x = lambda M x` restricted to `B x = 0`.
pub fn constrained_smallest(
    a: &CsrMatrix,
    m: &CsrMatrix,
    b: &CsrMatrix,
    opts: &SolveOptions,
) -> Result<EigenSolution> {
    check_pencil(a, m, opts)?;
    let n = a.nrows();
    if b.ncols() != n {
        return Err(Error::InvalidArgument("constraint matrix has the wrong number of columns".into()));
    }
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Subspace => false,
        EigenMethod::Auto => n + b.nrows() <= opts.dense_threshold,
    };
    if dense {
        let bd = DMatrix::from_row_slice(b.nrows(), n, &b.to_dense().concat());
        let btb = bd.transpose() * &bd;
        let e = SymmetricEigen::new(btb);
        let emax = e.eigenvalues.iter().copied().fold(0.0, f64::max);
        let null: Vec<usize> = (0..n).filter(|&i| e.eigenvalues[i] <= 1e-12 * emax.max(1e-300)).collect();
        let rank = n - null.len();
        let nullspace_dim = b.nrows().saturating_sub(rank);
        check_nullspace(opts, nullspace_dim)?;
        if null.len() < opts.n_eigs {
            return Err(Error::InvalidArgument("constraint leaves too few free directions".into()));
        }
        let z = DMatrix::from_fn(n, null.len(), |i, j| e.eigenvectors[(i, null[j])]);
        let ad = DMatrix::from_row_slice(n, n, &a.to_dense().concat());
        let md = DMatrix::from_row_slice(n, n, &m.to_dense().concat());
        let ar = z.transpose() * ad * &z;
        let mr = z.transpose() * md * &z;
        let raw = dense_smallest(&ar, &mr, opts.n_eigs)?
            .into_iter()
            .map(|(v, y)| (v, (&z * nalgebra::DVector::from_vec(y)).iter().copied().collect()))
            .collect();
        let pairs = finish_constrained(a, m, b, raw, None);
        return Ok(EigenSolution { pairs, iterations: 0, shift: opts.shift, nullspace_dim });
    }
    let mut last = None;
    let zeros = vec![0.0; b.nrows()];
    for shift in shift_sequence(a, m, opts.shift) {
        let op = a.add_scaled(m, -shift);
        match SaddleSolver::new(&op, b) {
            Ok(s) => {
                check_nullspace(opts, s.nullspace_dim())?;
                let o = SolveOptions { shift, ..opts.clone() };
                let bt = b.transpose();
                let project = |r: Vec<f64>| {
                    let (_, p) = s.solve(&r, &zeros);
                    let btp = bt.mul_vec(&p);
                    r.iter().zip(&btp).map(|(x, y)| x - y).collect()
                };
                let (raw, iterations) =
                    subspace_iteration(a, m, &o, &|f| s.solve(f, &zeros).0, &project)?;
                let pairs = finish_constrained(a, m, b, raw, Some(&s));
                return Ok(EigenSolution { pairs, iterations, shift, nullspace_dim: s.nullspace_dim() });
            }
            Err(e @ Error::FactorizationBreakdown { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one shift tried"))
}

fn check_nullspace(opts: &SolveOptions, got: usize) -> Result<()> {
    match opts.expected_nullspace {
        Some(want) if want != got => Err(Error::Topology(format!(
            "constraint nullspace has dimension {got}, expected {want}"
        ))),
        _ => Ok(()),
    }
}

/// Like [`finish_pairs`], but the residual is measured modulo `range(B^T)`:
/// `||A x - lambda M x - B^T p||` with `p` the least-squares multiplier.
fn finish_constrained(
    a: &CsrMatrix,
    m: &CsrMatrix,
    b: &CsrMatrix,
    raw: Vec<(f64, Vec<f64>)>,
    saddle: Option<&SaddleSolver>,
) -> Vec<EigenPair> {
    let mut pairs = finish_pairs(a, m, raw);
    let bt = b.transpose();
    for pair in pairs.iter_mut() {
        let ax = a.mul_vec(&pair.vector);
        let mx = m.mul_vec(&pair.vector);
        let r: Vec<f64> = ax.iter().zip(&mx).map(|(x, y)| x - pair.value * y).collect();
        let p = match saddle {
            Some(s) => {
                // Multiplier from the (shifted) saddle system with zero velocity load.
                let (_, p) = s.solve(&r, &vec![0.0; b.nrows()]);
                p
            }
            None => least_squares_multiplier(&bt, &r),
        };
        let btp = bt.mul_vec(&p);
        let res: f64 = r.iter().zip(&btp).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        pair.residual = res / dot(&ax, &ax).sqrt().max(f64::MIN_POSITIVE);
    }
    pairs
}

fn least_squares_multiplier(bt: &CsrMatrix, r: &[f64]) -> Vec<f64> {
    let (n, m) = (bt.nrows(), bt.ncols());
    let d = DMatrix::from_row_slice(n, m, &bt.to_dense().concat());
    let rv = nalgebra::DVector::from_column_slice(r);
    let svd = d.svd(true, true);
    svd.solve(&rv, 1e-12).map(|x| x.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; m])
}

/// Random vector with entries in `[-1/2, 1/2)`; exposed for deterministic tests.
pub fn seeded_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
}
