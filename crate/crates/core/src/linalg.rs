//! Small dense factorizations and a sparse symmetric direct solver.
//!
//! The dense routines serve the reference-simplex systems and the per-patch
//! Gram systems (at most a few hundred unknowns). The sparse solver is an
//! envelope Cholesky factorization after reverse Cuthill–McKee reordering,
//! which is adequate for the banded matrices of 1D and moderately sized 2D
//! meshes.

use std::collections::VecDeque;

use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Cholesky factorization; fails if the matrix is not numerically SPD.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        assert_eq!(self.rows, self.cols, "cholesky of a non-square matrix");
        let n = self.rows;
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::Singular(format!(
                            "cholesky: pivot {i} is {}",
                            s.as_f64()
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// LU factorization with full pivoting.
    pub fn lu(&self) -> Result<Lu<T>> {
        assert_eq!(self.rows, self.cols, "lu of a non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        let scale = self.max_abs().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::of(n.max(1)) * T::lit(16.0);
        for k in 0..n {
            let (mut pi, mut pj, mut best) = (k, k, T::zero());
            for i in k..n {
                for j in k..n {
                    let v = a[i * n + j].abs();
                    if v > best {
                        best = v;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if best <= tiny {
                return Err(Error::Singular(format!("lu: rank deficient at step {k}")));
            }
            if pi != k {
                for j in 0..n {
                    a.swap(k * n + j, pi * n + j);
                }
                row_perm.swap(k, pi);
            }
            if pj != k {
                for i in 0..n {
                    a.swap(i * n + k, i * n + pj);
                }
                col_perm.swap(k, pj);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = a[k * n + j];
                        a[i * n + j] -= f * u;
                    }
                }
            }
        }
        Ok(Lu {
            n,
            a,
            row_perm,
            col_perm,
        })
    }

    /// Least-squares solution of `A x ≈ b` through Householder QR (rows ≥ cols).
    pub fn lstsq(&self, b: &[T]) -> Result<Vec<T>> {
        let (m, n) = (self.rows, self.cols);
        assert!(m >= n, "lstsq needs at least as many rows as columns");
        assert_eq!(b.len(), m);
        let mut a = self.data.clone();
        let mut rhs = b.to_vec();
        let scale = self.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let norm = (k..m).map(|i| a[i * n + k].powi(2)).sum::<T>().sqrt();
            if norm <= scale * T::epsilon() * T::of(m) {
                return Err(Error::Singular(format!("lstsq: column {k} is dependent")));
            }
            let alpha = if a[k * n + k] > T::zero() { -norm } else { norm };
            let mut v: Vec<T> = (k..m).map(|i| a[i * n + k]).collect();
            v[0] -= alpha;
            let vnorm2: T = v.iter().map(|&x| x * x).sum();
            if vnorm2 == T::zero() {
                continue;
            }
            for j in k..n {
                let dot: T = (k..m).map(|i| v[i - k] * a[i * n + j]).sum();
                let f = T::lit(2.0) * dot / vnorm2;
                for i in k..m {
                    a[i * n + j] -= f * v[i - k];
                }
            }
            let dot: T = (k..m).map(|i| v[i - k] * rhs[i]).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in k..m {
                rhs[i] -= f * v[i - k];
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Ok(x)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    a: Vec<T>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.row_perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - self.a[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - self.a[i * n + k] * y[k];
            }
            y[i] /= self.a[i * n + i];
        }
        let mut x = vec![T::zero(); n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<T> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (i, j, v) = triplets[t];
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self + s·other`, assuming identical dimension.
    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        Self::from_triplets(self.n, &trip)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(self.matvec(y)).map(|(&a, b)| a * b).sum()
    }
}

/// Reverse Cuthill–McKee ordering of the symmetric sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_order<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(a, start, &degree);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row(v)
                .map(|(j, _)| j)
                .filter(|&j| !visited[j])
                .collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels<T: Real>(a: &CsrMatrix<T>, root: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; a.n];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = root;
    while let Some(v) = queue.pop_front() {
        last = v;
        for (j, _) in a.row(v) {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    (level, last)
}

fn pseudo_peripheral<T: Real>(a: &CsrMatrix<T>, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let (mut level, _) = bfs_levels(a, root);
    let mut ecc = level.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
    for _ in 0..8 {
        let candidate = (0..a.n)
            .filter(|&i| level[i] == ecc)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(root);
        let (l2, _) = bfs_levels(a, candidate);
        let e2 = l2.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if e2 <= ecc {
            break;
        }
        root = candidate;
        level = l2;
        ecc = e2;
    }
    root
}

/// Envelope (skyline) Cholesky factorization of a sparse SPD matrix.
#[derive(Clone, Debug)]
pub struct SparseCholesky<T> {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    l: Vec<T>,
}

impl<T: Real> SparseCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.n;
        let perm = rcm_order(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut l = vec![T::zero(); offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let nj = inv[j];
                if nj <= new {
                    l[offset[new] + nj - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = l[offset[i] + j - fi];
                let ri = offset[i] + start - fi;
                let rj = offset[j] + start - fj;
                for t in 0..j - start {
                    s -= l[ri + t] * l[rj + t];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return Err(Error::Singular(format!(
                            "sparse cholesky: pivot {i} is {}",
                            s.as_f64()
                        )));
                    }
                    l[offset[i] + i - fi] = s.sqrt();
                } else {
                    l[offset[i] + j - fi] = s / l[offset[j] + j - fj];
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offset,
            l,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for (t, j) in (fi..i).enumerate() {
                s -= row[t] * y[j];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.l[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (t, j) in (fi..i).enumerate() {
                y[j] -= row[t] * yi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn lu_solves_with_pivoting() {
        let a = DenseMatrix::<f64>::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ]);
        let x = [1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let got = a.lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(a.lu().is_err());
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let a = DenseMatrix::<f64>::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
        ]);
        let b = [1.0, 2.0, 2.0];
        let x = a.lstsq(&b).unwrap();
        // fit y = 7/6 + x/2
        assert!((x[0] - 7.0 / 6.0).abs() < 1e-14);
        assert!((x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cholesky_detects_indefinite() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(a.cholesky().is_err());
        let b = DenseMatrix::<f64>::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let x = b.cholesky().unwrap().solve(&[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn sparse_cholesky_matches_dense() {
        let n = 40;
        let a = laplacian_1d(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let got = SparseCholesky::factor(&a).unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn sparse_cholesky_on_scrambled_grid() {
        // 2D five-point Laplacian with a scrambled numbering
        let m = 12;
        let n = m * m;
        let scramble = |i: usize| (i * 37) % n;
        let mut t = Vec::new();
        for r in 0..m {
            for c in 0..m {
                let i = scramble(r * m + c);
                t.push((i, i, 4.0));
                if r + 1 < m {
                    let j = scramble((r + 1) * m + c);
                    t.push((i, j, -1.0));
                    t.push((j, i, -1.0));
                }
                if c + 1 < m {
                    let j = scramble(r * m + c + 1);
                    t.push((i, j, -1.0));
                    t.push((j, i, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.3).cos()).collect();
        let got = SparseCholesky::factor(&a).unwrap().solve(&a.matvec(&x));
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 5.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }
}
