//! Reference-simplex polynomials `p_α` of degree `3k` dual to the degree-`k`
//! Bernstein basis.
//!
//! Each `p_α` is sought as `b_α z_α` with `z_α = C + q_α − Σ_μ b_μ q_μ`,
//! `C = (d+k)!/k!` and unknown `q_α ∈ P_k`. Biorthogonality against `b_β`,
//! `β ≠ α`, is a linear system in the coefficients of the `q_α`; the diagonal
//! conditions then hold automatically. The `q_α` are only determined up to a
//! common additive polynomial, which is fixed by requiring `Σ_α q_α = 0`.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde_json::json;

use crate::linalg::DenseMatrix;
use crate::polyref::{
    basis_len, bernstein_product, cached_indices, cached_ref_mass, factorial,
    integrate_bernstein_product, permutations, rank_of, BPoly, MultiIndex,
};
use crate::{Error, Real, Result};

/// Largest `(d, k)` for which tables are built.
pub const MAX_DIM: usize = 2;
pub const MAX_DEGREE: usize = 3;

/// Residual bound used when certifying a freshly solved table.
pub const CERTIFY_TOL: f64 = 1e-10;

/// `(d+k)!/k!`.
pub fn sum_constant<T: Real>(d: usize, k: usize) -> T {
    T::lit((factorial(d + k) / factorial(k)) as f64)
}

fn check_envelope(d: usize, k: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&d) || !(1..=MAX_DEGREE).contains(&k) {
        return Err(Error::Unsupported(format!(
            "dual basis tables exist for d in 1..={MAX_DIM}, k in 1..={MAX_DEGREE}; got d={d}, k={k}"
        )));
    }
    Ok(())
}

/// The gauged linear system for the coefficients of `(q_α)_α`.
///
/// Unknown `a·N + c` is coefficient `c` of `q_α` for the `a`-th multi-index.
/// The first `N² − N` rows are the off-diagonal biorthogonality equations in
/// the order `(α, β)`, `β ≠ α`; the last `N` rows are the gauge.
#[derive(Clone, Debug)]
pub struct DualSystem<T> {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> DualSystem<T> {
    pub fn equation_rows(&self) -> usize {
        self.n * self.n - self.n
    }

    pub fn gauge_rows(&self) -> usize {
        self.n
    }

    pub fn unknowns(&self) -> usize {
        self.n * self.n
    }

    /// Max-norm residual of the off-diagonal equations for `x`.
    pub fn equation_residual(&self, x: &[T]) -> T {
        let ax = self.matrix.matvec(x);
        (0..self.equation_rows())
            .map(|r| (ax[r] - self.rhs[r]).abs())
            .fold(T::zero(), T::max)
    }
}

pub fn build_dual_system<T: Real>(d: usize, k: usize) -> Result<DualSystem<T>> {
    check_envelope(d, k)?;
    let idx = cached_indices(d, k);
    let n = idx.len();
    let c = sum_constant::<T>(d, k);
    let rows = n * n;
    let mut matrix = DenseMatrix::zeros(rows, n * n);
    let mut rhs = vec![T::zero(); rows];
    let mut row = 0;
    for (a, alpha) in idx.iter().enumerate() {
        for (b, beta) in idx.iter().enumerate() {
            if a == b {
                continue;
            }
            let (ea, eb) = (alpha.entries(), beta.entries());
            for (cc, gamma) in idx.iter().enumerate() {
                let eg = gamma.entries();
                // ⟨b_α q_α, b_β⟩
                matrix[(row, a * n + cc)] += integrate_bernstein_product::<T>(d, &[ea, eg, eb]);
                // -Σ_μ ⟨b_α b_μ q_μ, b_β⟩
                for (m, mu) in idx.iter().enumerate() {
                    matrix[(row, m * n + cc)] -=
                        integrate_bernstein_product::<T>(d, &[ea, mu.entries(), eg, eb]);
                }
            }
            rhs[row] = -c * integrate_bernstein_product::<T>(d, &[ea, eb]);
            row += 1;
        }
    }
    for cc in 0..n {
        for a in 0..n {
            matrix[(row, a * n + cc)] = T::one();
        }
        row += 1;
    }
    debug_assert_eq!(row, rows);
    Ok(DualSystem {
        d,
        k,
        n,
        matrix,
        rhs,
    })
}

/// Reference dual basis for one `(d, k)`.
#[derive(Clone, Debug)]
pub struct DualBasisTable<T> {
    pub d: usize,
    pub k: usize,
    /// `q_α`, degree `k`, canonical order of `α`.
    pub q: Vec<BPoly<T>>,
    /// `z_α`, degree `2k`.
    pub z: Vec<BPoly<T>>,
    /// `p_α = b_α z_α`, degree `3k`.
    pub p: Vec<BPoly<T>>,
}

impl<T: Real> DualBasisTable<T> {
    /// Builds `z_α` and `p_α` from given `q_α` without certification.
    pub fn from_q(d: usize, k: usize, q: Vec<BPoly<T>>) -> Self {
        let idx = cached_indices(d, k);
        assert_eq!(q.len(), idx.len(), "one q per multi-index");
        let c = sum_constant::<T>(d, k);
        let mut qbar = BPoly::zero(d, 2 * k);
        for (mu, qm) in idx.iter().zip(&q) {
            qbar.axpy(T::one(), &bernstein_product(&BPoly::basis(mu), qm));
        }
        let z: Vec<BPoly<T>> = q
            .iter()
            .map(|qa| {
                let mut za = qa.raise(2 * k);
                za.axpy(-T::one(), &qbar);
                za.coeffs_mut().iter_mut().for_each(|v| *v += c);
                za
            })
            .collect();
        let p = idx
            .iter()
            .zip(&z)
            .map(|(alpha, za)| bernstein_product(&BPoly::basis(alpha), za))
            .collect();
        Self { d, k, q, z, p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn indices(&self) -> Arc<Vec<MultiIndex>> {
        cached_indices(self.d, self.k)
    }

    /// `p_α` for the given multi-index.
    pub fn p_of(&self, alpha: &[u32]) -> &BPoly<T> {
        &self.p[rank_of(alpha)]
    }

    /// A copy with one coefficient of `p_α` shifted; a fixture for negative
    /// controls of the verifier.
    pub fn perturbed(&self, alpha: usize, coeff: usize, delta: T) -> Self {
        let mut t = self.clone();
        t.p[alpha].coeffs_mut()[coeff] += delta;
        t
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs =
            |v: &[BPoly<T>]| -> Vec<Vec<f64>> { v.iter().map(|p| p.coeffs().iter().map(|c| c.as_f64()).collect()).collect() };
        json!({
            "d": self.d,
            "k": self.k,
            "multi_indices": cached_indices(self.d, self.k).iter().map(|a| a.entries().to_vec()).collect::<Vec<_>>(),
            "p_degree": 3 * self.k,
            "p_multi_indices": cached_indices(self.d, 3 * self.k).iter().map(|a| a.entries().to_vec()).collect::<Vec<_>>(),
            "p": coeffs(&self.p),
            "z": coeffs(&self.z),
            "q": coeffs(&self.q),
        })
    }
}

/// Solves the gauged system and certifies the result.
pub fn solve_dual_basis<T: Real>(d: usize, k: usize) -> Result<DualBasisTable<T>> {
    let sys = build_dual_system::<T>(d, k)?;
    let x = match sys.matrix.lu() {
        Ok(lu) => lu.solve(&sys.rhs),
        Err(_) => sys
            .matrix
            .lstsq(&sys.rhs)
            .map_err(|_| Error::SingularDualSystem { d, k })?,
    };
    let n = sys.n;
    let q = (0..n)
        .map(|a| BPoly::from_coeffs(d, k, x[a * n..(a + 1) * n].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let table = symmetrize(DualBasisTable::from_q(d, k, q));
    certify(&table, T::lit(CERTIFY_TOL))?;
    Ok(table)
}

/// Image of `alpha` under the coordinate relabelling `perm`:
/// `out[perm[j]] = alpha[j]`.
fn relabel(alpha: &[u32], perm: &[usize]) -> Vec<u32> {
    let mut out = vec![0u32; alpha.len()];
    for (j, &s) in perm.iter().enumerate() {
        out[s] = alpha[j];
    }
    out
}

/// Removes rounding-level asymmetry from a solved table. The exact solution
/// satisfies `p_{σα}(λ) = p_α(σλ)`; here the entries for one representative
/// per orbit are averaged over its stabilizer (summing sorted terms so the
/// result is exactly invariant) and copied to the rest of the orbit.
fn symmetrize<T: Real>(t: DualBasisTable<T>) -> DualBasisTable<T> {
    let (d, k) = (t.d, t.k);
    let idx = cached_indices(d, k);
    let perms = permutations(d + 1);
    let fix = |family: &[BPoly<T>]| -> Vec<BPoly<T>> {
        let mut out = family.to_vec();
        for (a, alpha) in idx.iter().enumerate() {
            let mut rep = alpha.entries().to_vec();
            rep.sort_unstable_by(|x, y| y.cmp(x));
            let r = rank_of(&rep);
            if r != a {
                continue;
            }
            let stab: Vec<&Vec<usize>> = perms.iter().filter(|s| relabel(&rep, s) == rep).collect();
            let images: Vec<BPoly<T>> = stab.iter().map(|s| family[r].permuted(s)).collect();
            let mut avg = family[r].clone();
            for (c, v) in avg.coeffs_mut().iter_mut().enumerate() {
                let mut terms: Vec<T> = images.iter().map(|p| p.coeffs()[c]).collect();
                terms.sort_by(|x, y| x.partial_cmp(y).expect("finite coefficients"));
                *v = terms.into_iter().sum::<T>() / T::of(stab.len());
            }
            out[r] = avg;
        }
        for (a, alpha) in idx.iter().enumerate() {
            let mut rep = alpha.entries().to_vec();
            rep.sort_unstable_by(|x, y| y.cmp(x));
            let r = rank_of(&rep);
            if r == a {
                continue;
            }
            let s = perms
                .iter()
                .find(|s| relabel(&rep, s) == alpha.entries())
                .expect("orbit representative");
            out[a] = out[r].permuted(s);
        }
        out
    };
    DualBasisTable {
        d,
        k,
        q: fix(&t.q),
        z: fix(&t.z),
        p: fix(&t.p),
    }
}

/// Closed-form `k = 1` table. The classical lowest-order weights are
/// `ψ_ℓ = |ω_ℓ|⁻¹ p̃_ℓ` with
/// `p̃_ℓ = (d+1) λ_ℓ (1 + (d+3)(d+4)/2 · (λ_ℓ − Σ_j λ_j²))`,
/// i.e. `q_{e_ℓ} = (d+1)(d+3)(d+4)/2 · λ_ℓ` relative to the constant `d+1`.
/// This crate scales weights by `|T̂|/|ω_ℓ| = 1/(d!|ω_ℓ|)`, so the table
/// returned here is `p_ℓ = d! p̃_ℓ`, `q_{e_ℓ} = d!(d+1)(d+3)(d+4)/2 · λ_ℓ`.
/// The two coincide for `d = 1`.
pub fn closed_form_k1<T: Real>(d: usize) -> Result<DualBasisTable<T>> {
    check_envelope(d, 1)?;
    let s = T::lit(factorial(d) as f64) * closed_form_q_factor::<T>(d);
    let q = (0..=d)
        .map(|l| BPoly::basis(&MultiIndex::unit(d, l)).scaled(s))
        .collect();
    Ok(DualBasisTable::from_q(d, 1, q))
}

/// `(d+1)(d+3)(d+4)/2`, the factor of `λ_ℓ` in the classical `q_{e_ℓ}`.
pub fn closed_form_q_factor<T: Real>(d: usize) -> T {
    T::of((d + 1) * (d + 3) * (d + 4)) / T::lit(2.0)
}

/// Classical `p̃_ℓ(λ) = (d+1) λ_ℓ (1 + (d+3)(d+4)/2 · (λ_ℓ − Σ_j λ_j²))`.
pub fn closed_form_weight<T: Real>(ell: usize, lambda: &[T]) -> T {
    let d = lambda.len() - 1;
    let sq: T = lambda.iter().map(|&l| l * l).sum();
    let c = T::of((d + 3) * (d + 4)) / T::lit(2.0);
    T::of(d + 1) * lambda[ell] * (T::one() + c * (lambda[ell] - sq))
}

/// Cached certified table.
pub fn dual_basis<T: Real>(d: usize, k: usize) -> Result<Arc<DualBasisTable<T>>> {
    type Key = (TypeId, usize, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<dyn Any + Send + Sync>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (TypeId::of::<T>(), d, k);
    if let Some(t) = cache.lock().expect("dual cache poisoned").get(&key) {
        return Ok(t.clone().downcast().expect("dual cache type confusion"));
    }
    let table = Arc::new(solve_dual_basis::<T>(d, k)?);
    cache
        .lock()
        .expect("dual cache poisoned")
        .insert(key, table.clone() as Arc<dyn Any + Send + Sync>);
    Ok(table)
}

/// Maximum errors of the defining identities of a table.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct DualBasisReport {
    pub d: usize,
    pub k: usize,
    /// `max |⟨p_α, b_β⟩ − δ_{αβ}|`
    pub biorthogonality: f64,
    /// `max |Σ_α p_α − (d+k)!/k!|` over Bernstein coefficients (bounds the pointwise error)
    pub sum_identity: f64,
    /// `max |p_{σα}(λ) − p_α(σλ)|` coefficient-wise over all permutations σ
    pub symmetry: f64,
    /// `max |p_α − b_α z_α|`
    pub product_identity: f64,
    /// worst `(α, β)` pair for biorthogonality
    pub worst_pair: (usize, usize),
}

impl DualBasisReport {
    pub fn max_error(&self) -> f64 {
        self.biorthogonality
            .max(self.sum_identity)
            .max(self.symmetry)
            .max(self.product_identity)
    }
}

pub fn verify_dual_basis<T: Real>(t: &DualBasisTable<T>) -> DualBasisReport {
    let (d, k) = (t.d, t.k);
    let idx = cached_indices(d, k);
    let mass = cached_ref_mass::<T>(d, 3 * k, k);
    let mut report = DualBasisReport {
        d,
        k,
        ..Default::default()
    };
    for (a, pa) in t.p.iter().enumerate() {
        for b in 0..idx.len() {
            let v: T = pa
                .coeffs()
                .iter()
                .enumerate()
                .map(|(c, &pc)| pc * mass.get(c, b))
                .sum();
            let target = if a == b { T::one() } else { T::zero() };
            let err = (v - target).abs().as_f64();
            if err > report.biorthogonality {
                report.biorthogonality = err;
                report.worst_pair = (a, b);
            }
        }
    }
    let c = sum_constant::<T>(d, k);
    let mut total = BPoly::zero(d, 3 * k);
    for pa in &t.p {
        total.axpy(T::one(), pa);
    }
    report.sum_identity = total
        .coeffs()
        .iter()
        .map(|&v| (v - c).abs().as_f64())
        .fold(0.0, f64::max);
    for perm in permutations(d + 1) {
        for (a, alpha) in idx.iter().enumerate() {
            let mut image = vec![0u32; d + 1];
            for (j, &s) in perm.iter().enumerate() {
                image[s] = alpha.entries()[j];
            }
            let lhs = t.p[a].permuted(&perm);
            let rhs = &t.p[rank_of(&image)];
            report.symmetry = report.symmetry.max(lhs.max_abs_diff(rhs).as_f64());
        }
    }
    for ((alpha, pa), za) in idx.iter().zip(&t.p).zip(&t.z) {
        let prod = bernstein_product(&BPoly::basis(alpha), za);
        report.product_identity = report.product_identity.max(prod.max_abs_diff(pa).as_f64());
    }
    report
}

/// `max_β |⟨b_β(q_β − q̄), b_β⟩ − (1 − C⟨b_β, b_β⟩)|`, the diagonal equations
/// that are implied by the solved off-diagonal ones.
pub fn diagonal_residual<T: Real>(t: &DualBasisTable<T>) -> f64 {
    let (d, k) = (t.d, t.k);
    let idx = cached_indices(d, k);
    let c = sum_constant::<T>(d, k);
    let mut qbar = BPoly::zero(d, 2 * k);
    for (mu, qm) in idx.iter().zip(&t.q) {
        qbar.axpy(T::one(), &bernstein_product(&BPoly::basis(mu), qm));
    }
    let mut worst = 0.0f64;
    for (beta, qb) in idx.iter().zip(&t.q) {
        let bb = BPoly::basis(beta);
        let mut diff = qb.raise(2 * k);
        diff.axpy(-T::one(), &qbar);
        let lhs = bb.product(&diff).product(&bb).integrate();
        let rhs = T::one() - c * bb.product(&bb).integrate();
        worst = worst.max((lhs - rhs).abs().as_f64());
    }
    worst
}

fn certify<T: Real>(t: &DualBasisTable<T>, tol: T) -> Result<()> {
    let r = verify_dual_basis(t);
    let tol = tol.as_f64();
    let idx = cached_indices(t.d, t.k);
    let checks = [
        ("biorthogonality", r.biorthogonality),
        ("sum", r.sum_identity),
        ("symmetry", r.symmetry),
        ("product", r.product_identity),
    ];
    for (identity, residual) in checks {
        // single precision cannot reach the f64 bound; scale by epsilon ratio
        let bound = tol.max(T::epsilon().as_f64() * 1e6);
        if !(residual <= bound) {
            let (a, b) = r.worst_pair;
            return Err(Error::DualBasisResidual {
                identity,
                location: format!(
                    "d={}, k={}, alpha={:?}, beta={:?}",
                    t.d,
                    t.k,
                    idx[a].entries(),
                    idx[b].entries()
                ),
                residual,
            });
        }
    }
    Ok(())
}

/// Number of unknowns in the `(d, k)` system.
pub fn system_size(d: usize, k: usize) -> usize {
    let n = basis_len(d, k);
    n * n
}
