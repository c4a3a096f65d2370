//! Complex sparse matrices in CSR form, a left-looking sparse LU with
//! threshold partial pivoting and a Jacobi-preconditioned BiCGSTAB fallback.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Square complex matrix in compressed sparse row format with sorted,
/// duplicate-free column indices in each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

/// Accumulates `(row, col, value)` triplets; duplicates are summed in
/// insertion order, so assembly is deterministic.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn from_dense(a: &[Vec<C64>]) -> Self {
        let n = a.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in a.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                if v != C64::new(0.0, 0.0) {
                    b.add(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, C64::new(1.0, 0.0));
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(j, i, v);
            }
        }
        b.build()
    }

    /// Linear combination `alpha * self + beta * other` of two matrices of
    /// the same dimension.
    pub fn combine(&self, alpha: C64, other: &CsrMatrix, beta: C64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz() + other.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                b.add(i, j, alpha * v);
            }
            for (j, v) in other.row(i) {
                b.add(i, j, beta * v);
            }
        }
        b.build()
    }

    /// Symmetric pattern of `A + A^T` without the diagonal.
    fn symmetric_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for &j in &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]] {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Column-compressed copy, used by the factorization.
    fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<C64>) {
        let t = self.transpose();
        (t.row_ptr, t.col_idx, t.values)
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let wr = |w: &mut std::io::BufWriter<std::fs::File>, s: String| {
            w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
        };
        wr(&mut w, "%%MatrixMarket matrix coordinate complex general\n".to_string())?;
        wr(&mut w, format!("{} {} {}\n", self.n, self.n, self.nnz()))?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                wr(&mut w, format!("{} {} {:e} {:e}\n", i + 1, j + 1, v.re, v.im))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern. Each connected
/// component starts from a pseudo-peripheral node found by repeated BFS.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj = a.symmetric_adjacency();
    let degree: Vec<usize> = adj.iter().map(|v| v.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (eccentricity, a min-degree node in the last level)
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        level[start] = 0;
        q.push_back(start);
        let mut last = start;
        let mut depth = 0;
        while let Some(u) = q.pop_front() {
            if level[u] > depth || (level[u] == depth && degree[u] < degree[last]) {
                depth = level[u];
                last = u;
            }
            for &v in &adj[u] {
                if !visited[v] && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (depth, last)
    };

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let mut start = seed;
        let (mut ecc, mut cand) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (e2, c2) = bfs_levels(cand, &visited);
            if e2 > ecc {
                start = cand;
                ecc = e2;
                cand = c2;
            } else {
                break;
            }
        }
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                order.push(v);
            }
        }
    }
    order.reverse();
    order
}

/// Relative pivot magnitude (against the largest matrix entry) below which
/// the matrix is declared singular.
const SINGULAR_PIVOT: f64 = 1e-14;

/// Partial-pivoting threshold: the diagonal candidate is kept when its
/// modulus is at least this fraction of the largest candidate.
const PIVOT_THRESHOLD: f64 = 0.1;

/// Sparse LU factors `P A Q = L U` with `L` unit lower triangular.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    n: usize,
    a: CsrMatrix,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<C64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<C64>,
}

impl LuFactorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let q = reverse_cuthill_mckee(a);
        Self::with_ordering(a, q)
    }

    /// Left-looking (Gilbert-Peierls) factorization with the column order `q`.
    pub fn with_ordering(a: &CsrMatrix, q: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        assert_eq!(q.len(), n);
        let (ap, ai, ax) = a.to_csc();
        let scale = a.max_abs();
        if n > 0 && scale == 0.0 {
            return Err(Error::Singular {
                pivot: 0,
                magnitude: 0.0,
            });
        }

        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut lp = vec![0usize; n + 1];
        let mut up = vec![0usize; n + 1];
        let cap = 4 * ax.len() + n;
        let mut li: Vec<usize> = Vec::with_capacity(cap);
        let mut lx: Vec<C64> = Vec::with_capacity(cap);
        let mut ui: Vec<usize> = Vec::with_capacity(cap);
        let mut ux: Vec<C64> = Vec::with_capacity(cap);

        let zero = C64::new(0.0, 0.0);
        let mut x = vec![zero; n];
        let mut marked = vec![false; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        let mut pstack: Vec<usize> = Vec::with_capacity(n);

        for k in 0..n {
            lp[k] = li.len();
            up[k] = ui.len();
            let col = q[k];

            // Nonzero pattern of L \ A(:, col), in reverse topological order.
            reach.clear();
            for p in ap[col]..ap[col + 1] {
                let start = ai[p];
                if marked[start] {
                    continue;
                }
                stack.clear();
                pstack.clear();
                stack.push(start);
                pstack.push(usize::MAX);
                while let Some(&j) = stack.last() {
                    let top = stack.len() - 1;
                    let jnew = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        pstack[top] = if jnew == NONE { 0 } else { lp[jnew] };
                    }
                    let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                    let mut pushed = false;
                    let mut pp = pstack[top];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if !marked[i] {
                            pstack[top] = pp;
                            stack.push(i);
                            pstack.push(usize::MAX);
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        pstack[top] = pp;
                        stack.pop();
                        pstack.pop();
                        reach.push(j);
                    }
                }
            }
            for &j in &reach {
                marked[j] = false;
                x[j] = zero;
            }
            for p in ap[col]..ap[col + 1] {
                x[ai[p]] = ax[p];
            }
            // Sparse triangular solve in topological order.
            for idx in (0..reach.len()).rev() {
                let j = reach[idx];
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                for p in lp[jj] + 1..lp[jj + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for idx in (0..reach.len()).rev() {
                let i = reach[idx];
                if pinv[i] == NONE {
                    let t = x[i].norm();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= SINGULAR_PIVOT * scale {
                return Err(Error::Singular {
                    pivot: k,
                    magnitude: amax.max(0.0),
                });
            }
            if pinv[col] == NONE && x[col].norm() >= PIVOT_THRESHOLD * amax {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(C64::new(1.0, 0.0));
            for idx in (0..reach.len()).rev() {
                let i = reach[idx];
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = zero;
            }
        }
        lp[n] = li.len();
        up[n] = ui.len();
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            a: a.clone(),
            q,
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    /// Fill of the factors, `nnz(L) + nnz(U)`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    fn solve_raw(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            x[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let d = self.up[j + 1] - 1;
            x[j] /= self.ux[d];
            let xj = x[j];
            for p in self.up[j]..d {
                x[self.ui[p]] -= self.ux[p] * xj;
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            out[self.q[k]] = x[k];
        }
        out
    }

    /// Solve `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        // A = P^T L U Q^T, so A^H = Q U^H L^H P.
        let mut x = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            x[k] = b[self.q[k]];
        }
        for j in 0..n {
            let d = self.up[j + 1] - 1;
            let mut s = x[j];
            for p in self.up[j]..d {
                s -= self.ux[p].conj() * x[self.ui[p]];
            }
            x[j] = s / self.ux[d].conj();
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                s -= self.lx[p].conj() * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            out[i] = x[self.pinv[i]];
        }
        out
    }

    /// Solve `A x = b` with up to three steps of iterative refinement.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let mut x = self.solve_raw(b);
        let mut res = residual(&self.a, &x, b);
        let mut rn = norm2(&res);
        for _ in 0..3 {
            if rn == 0.0 {
                break;
            }
            let dx = self.solve_raw(&res);
            let trial: Vec<C64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let tres = residual(&self.a, &trial, b);
            let tn = norm2(&tres);
            if tn < 0.5 * rn {
                x = trial;
                res = tres;
                rn = tn;
            } else {
                if tn < rn {
                    x = trial;
                }
                break;
            }
        }
        x
    }

    /// Hager-Higham estimate of the 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let a_norm = self.a.transpose().norm_inf();
        let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve_raw(&x);
            let new_est: f64 = y.iter().map(|v| v.norm()).sum();
            let xi: Vec<C64> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m > 0.0 {
                        v / m
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if new_est <= est || zmax <= ztx {
                est = est.max(new_est);
                break;
            }
            est = new_est;
            x = vec![C64::new(0.0, 0.0); n];
            x[jmax] = C64::new(1.0, 0.0);
        }
        est * a_norm
    }
}

pub fn residual(a: &CsrMatrix, x: &[C64], b: &[C64]) -> Vec<C64> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Relative residual `||b - A x|| / ||b||` (absolute if `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[C64], b: &[C64]) -> f64 {
    let r = norm2(&residual(a, x, b));
    let bn = norm2(b);
    if bn > 0.0 {
        r / bn
    } else {
        r
    }
}

/// Normwise backward error `||b - A x|| / (||A|| ||x|| + ||b||)` in the
/// infinity norm.
pub fn backward_error(a: &CsrMatrix, x: &[C64], b: &[C64]) -> f64 {
    let inf = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r = inf(&residual(a, x, b));
    let d = a.norm_inf() * inf(x) + inf(b);
    if d > 0.0 {
        r / d
    } else {
        r
    }
}

/// Jacobi-preconditioned BiCGSTAB. Fails with the residual history if the
/// relative residual does not reach `tol` within `max_iter` iterations.
pub fn bicgstab(a: &CsrMatrix, b: &[C64], tol: f64, max_iter: usize) -> Result<Vec<C64>> {
    let n = a.dim();
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let dinv: Vec<C64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d.norm() > 0.0 { one / d } else { one })
        .collect();
    let prec = |v: &[C64]| -> Vec<C64> { v.iter().zip(&dinv).map(|(x, d)| x * d).collect() };

    let bn = norm2(b);
    let mut x = vec![zero; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho_old = one;
    let mut alpha = one;
    let mut omega = one;
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut history = Vec::new();
    for it in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        if it == 0 {
            p = r.clone();
        } else {
            let beta = (rho_new / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        let ph = prec(&p);
        v = a.matvec(&ph);
        let rv = dot(&r_hat, &v);
        if rv.norm() == 0.0 {
            break;
        }
        alpha = rho_new / rv;
        let s: Vec<C64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let sn = norm2(&s) / bn;
        if sn <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        let sh = prec(&s);
        let t = a.matvec(&sh);
        let tt = dot(&t, &t);
        omega = if tt.norm() > 0.0 { dot(&t, &s) / tt } else { zero };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        let rn = norm2(&r) / bn;
        history.push(rn);
        if rn <= tol {
            return Ok(x);
        }
        if omega.norm() == 0.0 {
            break;
        }
        rho_old = rho_new;
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::Convergence {
        iterations: history.len(),
        last,
        history,
    })
}

/// Direct solve with a BiCGSTAB fallback when the factorization fails for a
/// reason other than exact singularity.
pub fn solve(a: &CsrMatrix, b: &[C64]) -> Result<Vec<C64>> {
    match LuFactorization::new(a) {
        Ok(lu) => Ok(lu.solve(b)),
        Err(Error::Singular { pivot, magnitude }) if magnitude > 0.0 => {
            bicgstab(a, b, 1e-12, 10 * a.dim().max(10)).map_err(|_| Error::Singular { pivot, magnitude })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, c(2.0));
            if i > 0 {
                b.add(i, i - 1, c(-1.0));
            }
            if i + 1 < n {
                b.add(i, i + 1, c(-1.0));
            }
        }
        b.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, c(1.0));
        b.add(0, 0, c(2.0));
        b.add(1, 0, c(-1.0));
        let m = b.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), c(3.0));
        assert_eq!(m.get(0, 1), c(0.0));
    }

    #[test]
    fn lu_solves_tridiagonal() {
        let a = laplace_1d(50);
        let x: Vec<C64> = (0..50).map(|i| C64::new(i as f64, 1.0)).collect();
        let b = a.matvec(&x);
        let lu = LuFactorization::new(&a).unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn lu_pivots_on_zero_diagonal() {
        let a = CsrMatrix::from_dense(&[
            vec![c(0.0), c(1.0), c(0.0)],
            vec![c(1.0), c(0.0), c(2.0)],
            vec![c(0.0), c(2.0), c(1.0)],
        ]);
        let lu = LuFactorization::new(&a).unwrap();
        let b = vec![c(1.0), c(2.0), c(3.0)];
        let x = lu.solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-14);
        let z = lu.solve_adjoint(&b);
        let at = a.transpose();
        assert!(relative_residual(&at, &z, &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = CsrMatrix::from_dense(&[vec![c(1.0), c(-1.0)], vec![c(-1.0), c(1.0)]]);
        match LuFactorization::new(&a) {
            Err(Error::Singular { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn bicgstab_matches_lu() {
        let a = laplace_1d(30);
        let b: Vec<C64> = (0..30).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let x = bicgstab(&a, &b, 1e-12, 1000).unwrap();
        assert!(relative_residual(&a, &x, &b) < 1e-11);
    }

    #[test]
    fn bicgstab_reports_history_on_failure() {
        let a = laplace_1d(200);
        let b = vec![c(1.0); 200];
        match bicgstab(&a, &b, 1e-14, 3) {
            Err(Error::Convergence { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplace_1d(17);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(1e-6)]]);
        let lu = LuFactorization::new(&a).unwrap();
        let k = lu.condition_estimate();
        assert!((k - 1e6).abs() < 1e-3 * 1e6);
    }
}
