//! Polynomials on the reference `d`-simplex in Bernstein form.
//!
//! A polynomial of degree `m` is stored as its coefficient vector in the
//! Bernstein basis `b_α = (|α|!/α!) λ^α`, `|α| = m`, with the multi-indices in
//! descending lexicographic order (see [`multi_indices`]). That ordering is the
//! coefficient layout used by every other module.
//!
//! Products, degree elevation, differentiation and integration are carried out
//! with exact combinatorial coefficients; no quadrature is involved.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::{Error, Real, Result};

/// Tolerance on `Σλ_j - 1` accepted by the checked evaluators.
pub const BARYCENTRIC_SLACK: f64 = 1e-12;

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of Bernstein polynomials of degree `m` in `d` dimensions.
pub fn basis_len(d: usize, m: usize) -> usize {
    binomial(m + d, d) as usize
}

/// `c_m = m!/(d+m)!`, the integral of any degree-`m` Bernstein polynomial over
/// the reference simplex of volume `1/d!`.
pub fn c_m<T: Real>(d: usize, m: usize) -> T {
    // m!/(d+m)! = 1 / ((m+1)(m+2)...(m+d))
    let den: u128 = (m + 1..=m + d).map(|i| i as u128).product();
    T::one() / T::lit(den as f64)
}

/// Volume of the reference simplex, `1/d!`.
pub fn ref_volume<T: Real>(d: usize) -> T {
    T::one() / T::lit(factorial(d) as f64)
}

/// A multi-index `α ∈ ℕ₀^{d+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        Self { entries }
    }

    /// The unit multi-index `e_j` in `d` dimensions.
    pub fn unit(d: usize, j: usize) -> Self {
        let mut entries = vec![0; d + 1];
        entries[j] = 1;
        Self { entries }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|&a| a as usize).sum()
    }

    /// Position of this index in the canonical ordering of its degree.
    pub fn rank(&self) -> usize {
        rank_of(&self.entries)
    }

    /// `|α|!/α!`.
    pub fn multinomial(&self) -> u128 {
        multinomial(&self.entries)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            entries: perm.iter().map(|&p| self.entries[p]).collect(),
        }
    }
}

fn multinomial(entries: &[u32]) -> u128 {
    let m: usize = entries.iter().map(|&a| a as usize).sum();
    entries
        .iter()
        .fold(factorial(m), |acc, &a| acc / factorial(a as usize))
}

/// Rank of `entries` among all indices of the same length and degree, in
/// descending lexicographic order.
pub fn rank_of(entries: &[u32]) -> usize {
    let parts = entries.len();
    let mut rem: usize = entries.iter().map(|&a| a as usize).sum();
    let mut rank = 0usize;
    for (j, &a) in entries.iter().enumerate().take(parts - 1) {
        let a = a as usize;
        let tail = parts - j - 1;
        // every value v > a for this slot precedes us
        for v in a + 1..=rem {
            rank += binomial(rem - v + tail - 1, tail - 1) as usize;
        }
        rem -= a;
    }
    rank
}

/// All multi-indices of length `d+1` and degree `m`, descending lexicographic.
pub fn multi_indices(d: usize, m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(basis_len(d, m));
    let mut current = vec![0u32; d + 1];
    fill(&mut current, 0, m, &mut out);
    out
}

fn fill(current: &mut [u32], pos: usize, rem: usize, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = rem as u32;
        out.push(MultiIndex::new(current.to_vec()));
        return;
    }
    for v in (0..=rem).rev() {
        current[pos] = v as u32;
        fill(current, pos + 1, rem - v, out);
    }
}

/// Shared cache of index lists, keyed by `(d, m)`.
pub fn cached_indices(d: usize, m: usize) -> Arc<Vec<MultiIndex>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<MultiIndex>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("index cache poisoned");
    guard
        .entry((d, m))
        .or_insert_with(|| Arc::new(multi_indices(d, m)))
        .clone()
}

fn check_barycentric<T: Real>(lambda: &[T]) -> Result<()> {
    let sum: T = lambda.iter().copied().sum();
    let dev = (sum - T::one()).abs().as_f64();
    if dev > BARYCENTRIC_SLACK {
        return Err(Error::NotBarycentric { sum: sum.as_f64() });
    }
    Ok(())
}

/// Evaluates `b_α(λ) = (|α|!/α!) λ^α`.
pub fn bernstein_eval<T: Real>(alpha: &MultiIndex, lambda: &[T]) -> Result<T> {
    if lambda.len() != alpha.entries.len() {
        return Err(Error::DimensionMismatch(format!(
            "multi-index of length {} evaluated at {} coordinates",
            alpha.entries.len(),
            lambda.len()
        )));
    }
    check_barycentric(lambda)?;
    Ok(bernstein_eval_unchecked(alpha.entries(), lambda))
}

#[inline]
pub fn bernstein_eval_unchecked<T: Real>(alpha: &[u32], lambda: &[T]) -> T {
    let mut v = T::lit(multinomial(alpha) as f64);
    for (&a, &l) in alpha.iter().zip(lambda) {
        v *= l.powi(a as i32);
    }
    v
}

/// Values of every degree-`m` Bernstein polynomial at `λ`, canonical order.
pub fn bernstein_values<T: Real>(d: usize, m: usize, lambda: &[T]) -> Vec<T> {
    cached_indices(d, m)
        .iter()
        .map(|a| bernstein_eval_unchecked(a.entries(), lambda))
        .collect()
}

/// Precomputed data for the product of degree `m` and degree `n` bases:
/// `b_α b_β = factor · b_{α+β}`.
struct ProductTable {
    cols: usize,
    target: Vec<usize>,
    factor: Vec<f64>,
}

fn product_table(d: usize, m: usize, n: usize) -> Arc<ProductTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<ProductTable>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("product cache poisoned").get(&(d, m, n)) {
        return t.clone();
    }
    let left = cached_indices(d, m);
    let right = cached_indices(d, n);
    let den = binomial(m + n, m);
    let mut target = Vec::with_capacity(left.len() * right.len());
    let mut factor = Vec::with_capacity(left.len() * right.len());
    let mut sum = vec![0u32; d + 1];
    for a in left.iter() {
        for b in right.iter() {
            let mut num: u128 = 1;
            for j in 0..=d {
                sum[j] = a.entries[j] + b.entries[j];
                num *= binomial(sum[j] as usize, a.entries[j] as usize);
            }
            target.push(rank_of(&sum));
            factor.push(num as f64 / den as f64);
        }
    }
    let table = Arc::new(ProductTable {
        cols: right.len(),
        target,
        factor,
    });
    cache
        .lock()
        .expect("product cache poisoned")
        .insert((d, m, n), table.clone());
    table
}

/// A polynomial on the reference `d`-simplex in the degree-`m` Bernstein basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BPoly<T> {
    dim: usize,
    degree: usize,
    coeffs: Vec<T>,
}

impl<T: Real> BPoly<T> {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            coeffs: vec![T::zero(); basis_len(dim, degree)],
        }
    }

    /// The constant `c` written in the degree-`m` basis (partition of unity).
    pub fn constant(dim: usize, degree: usize, c: T) -> Self {
        Self {
            dim,
            degree,
            coeffs: vec![c; basis_len(dim, degree)],
        }
    }

    /// The single basis polynomial `b_α`.
    pub fn basis(alpha: &MultiIndex) -> Self {
        let mut p = Self::zero(alpha.dim(), alpha.degree());
        p.coeffs[alpha.rank()] = T::one();
        p
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<T>) -> Result<Self> {
        let expected = basis_len(dim, degree);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "degree {degree} in {dim}D needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            dim,
            degree,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn eval(&self, lambda: &[T]) -> Result<T> {
        if lambda.len() != self.dim + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{}D polynomial evaluated at {} coordinates",
                self.dim,
                lambda.len()
            )));
        }
        check_barycentric(lambda)?;
        Ok(self.eval_unchecked(lambda))
    }

    /// Evaluation without validating `λ`; used in quadrature loops.
    pub fn eval_unchecked(&self, lambda: &[T]) -> T {
        cached_indices(self.dim, self.degree)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, &c)| c * bernstein_eval_unchecked(a.entries(), lambda))
            .sum()
    }

    pub fn scale(&mut self, s: T) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.scale(s);
        self
    }

    /// `self += s·other`; both must have the same degree.
    pub fn axpy(&mut self, s: T, other: &Self) {
        assert_eq!(self.degree, other.degree, "axpy across degrees");
        assert_eq!(self.dim, other.dim, "axpy across dimensions");
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        bernstein_product(self, other)
    }

    pub fn raise(&self, degree: usize) -> Self {
        degree_raise(self, degree)
    }

    pub fn integrate(&self) -> T {
        integrate_ref(self)
    }

    /// Coefficient vector after relabelling the barycentric coordinates:
    /// the result `q` satisfies `q(λ) = self(λ∘perm)`, i.e.
    /// `q_α = self_{α'}` with `α'[j] = α[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let idx = cached_indices(self.dim, self.degree);
        let mut out = Self::zero(self.dim, self.degree);
        let mut src = vec![0u32; self.dim + 1];
        for (r, a) in idx.iter().enumerate() {
            for (j, &p) in perm.iter().enumerate() {
                src[j] = a.entries[p];
            }
            out.coeffs[r] = self.coeffs[rank_of(&src)];
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Exact product of two Bernstein polynomials.
pub fn bernstein_product<T: Real>(a: &BPoly<T>, b: &BPoly<T>) -> BPoly<T> {
    assert_eq!(a.dim, b.dim, "product of polynomials in different dimensions");
    let table = product_table(a.dim, a.degree, b.degree);
    let mut out = BPoly::zero(a.dim, a.degree + b.degree);
    for (i, &ca) in a.coeffs.iter().enumerate() {
        if ca == T::zero() {
            continue;
        }
        let row = i * table.cols;
        for (j, &cb) in b.coeffs.iter().enumerate() {
            let k = row + j;
            out.coeffs[table.target[k]] += ca * cb * T::lit(table.factor[k]);
        }
    }
    out
}

/// Degree elevation to `degree ≥ p.degree()`.
pub fn degree_raise<T: Real>(p: &BPoly<T>, degree: usize) -> BPoly<T> {
    assert!(degree >= p.degree, "cannot lower the degree");
    if degree == p.degree {
        return p.clone();
    }
    bernstein_product(p, &BPoly::constant(p.dim, degree - p.degree, T::one()))
}

/// Partial derivatives `∂p/∂λ_j`, `j = 0..=d`, each of degree `m-1`.
pub fn bernstein_grad<T: Real>(p: &BPoly<T>) -> Vec<BPoly<T>> {
    let d = p.dim;
    if p.degree == 0 {
        return (0..=d).map(|_| BPoly::zero(d, 0)).collect();
    }
    let m = T::of(p.degree);
    let lower = cached_indices(d, p.degree - 1);
    let mut raised = vec![0u32; d + 1];
    (0..=d)
        .map(|j| {
            let coeffs = lower
                .iter()
                .map(|g| {
                    raised.copy_from_slice(g.entries());
                    raised[j] += 1;
                    m * p.coeffs[rank_of(&raised)]
                })
                .collect();
            BPoly {
                dim: d,
                degree: p.degree - 1,
                coeffs,
            }
        })
        .collect()
}

/// Integral over the reference simplex (volume `1/d!`).
pub fn integrate_ref<T: Real>(p: &BPoly<T>) -> T {
    c_m::<T>(p.dim, p.degree) * p.coeffs.iter().copied().sum::<T>()
}

/// `∫_{T̂} Π_i b_{α^i}` for any number of Bernstein factors, from
/// `∫_{T̂} λ^γ = γ!/(|γ|+d)!`.
pub fn integrate_bernstein_product<T: Real>(d: usize, factors: &[&[u32]]) -> T {
    let mut gamma = vec![0usize; d + 1];
    let mut coef: f64 = 1.0;
    for f in factors {
        debug_assert_eq!(f.len(), d + 1);
        coef *= multinomial(f) as f64;
        for (g, &a) in gamma.iter_mut().zip(f.iter()) {
            *g += a as usize;
        }
    }
    let total: usize = gamma.iter().sum();
    let mut num: u128 = 1;
    for &g in &gamma {
        num *= factorial(g);
    }
    let den = factorial(total + d);
    T::lit(coef * (num as f64 / den as f64))
}

/// Gram matrix `⟨b_α^{(m)}, b_β^{(n)}⟩_{T̂}`, rows indexed by `α`.
#[derive(Clone, Debug)]
pub struct RefMassMatrix<T> {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Real> RefMassMatrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let mut acc = T::zero();
        for (i, &ui) in u.iter().enumerate() {
            if ui == T::zero() {
                continue;
            }
            let row = self.row(i);
            acc += ui * row.iter().zip(v).map(|(&m, &vj)| m * vj).sum::<T>();
        }
        acc
    }
}

pub fn ref_mass_matrix<T: Real>(d: usize, m: usize, n: usize) -> RefMassMatrix<T> {
    let table = product_table(d, m, n);
    let c = c_m::<T>(d, m + n);
    let entries = table.factor.iter().map(|&f| T::lit(f) * c).collect();
    RefMassMatrix {
        d,
        m,
        n,
        rows: basis_len(d, m),
        cols: basis_len(d, n),
        entries,
    }
}

/// Cached `f64`-backed reference mass matrices converted on demand.
pub fn cached_ref_mass<T: Real>(d: usize, m: usize, n: usize) -> Arc<RefMassMatrix<T>> {
    use std::any::{Any, TypeId};
    type Key = (TypeId, usize, usize, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<dyn Any + Send + Sync>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (TypeId::of::<T>(), d, m, n);
    let mut guard = cache.lock().expect("mass cache poisoned");
    let entry = guard
        .entry(key)
        .or_insert_with(|| Arc::new(ref_mass_matrix::<T>(d, m, n)) as Arc<dyn Any + Send + Sync>)
        .clone();
    drop(guard);
    entry
        .downcast::<RefMassMatrix<T>>()
        .expect("mass cache type confusion")
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}
