use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::SimplicialMesh;
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::polyref::{
    basis_len, bernstein_grad, bernstein_values, cached_indices, cached_ref_mass, factorial, BPoly,
};
use crate::{Error, Real, Result};

/// Continuous piecewise polynomials of a fixed degree on a mesh, with global
/// Lagrange node numbering. Coefficients of functions in the space are
/// Bernstein coefficients, one per node.
#[derive(Debug)]
pub struct LagrangeSpace<T> {
    mesh: Arc<SimplicialMesh<T>>,
    degree: usize,
    local_len: usize,
    l2g: Vec<usize>,
    node_coords: Vec<T>,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    supports: Vec<Vec<(usize, usize)>>,
    vertex_node: Vec<Option<usize>>,
}

impl<T: Real> LagrangeSpace<T> {
    pub fn new(mesh: Arc<SimplicialMesh<T>>, degree: usize) -> Result<Arc<Self>> {
        if degree == 0 {
            return Err(Error::Unsupported("Lagrange spaces need degree >= 1".into()));
        }
        let d = mesh.dim();
        let idx = cached_indices(d, degree);
        let local_len = idx.len();
        let ns = mesh.num_simplices();
        let mut keys: HashMap<Vec<(usize, u32)>, usize> = HashMap::new();
        let mut l2g = Vec::with_capacity(ns * local_len);
        let mut node_coords = Vec::new();
        let mut boundary = Vec::new();
        let mut supports: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut vertex_node = vec![None; mesh.num_vertices()];
        let m = T::of(degree);
        for t in 0..ns {
            let s = mesh.simplex(t);
            let on_bdry: Vec<bool> = (0..=d).map(|j| mesh.facet_on_boundary(t, j)).collect();
            for (loc, alpha) in idx.iter().enumerate() {
                let a = alpha.entries();
                let mut key: Vec<(usize, u32)> = (0..=d)
                    .filter(|&j| a[j] > 0)
                    .map(|j| (s[j], a[j]))
                    .collect();
                key.sort_unstable();
                let next = keys.len();
                let id = *keys.entry(key).or_insert(next);
                if id == next {
                    let lam: Vec<T> = a.iter().map(|&v| T::of(v as usize) / m).collect();
                    node_coords.extend(mesh.point(t, &lam));
                    boundary.push(false);
                    supports.push(Vec::new());
                    if let Some(j) = a.iter().position(|&v| v as usize == degree) {
                        vertex_node[s[j]] = Some(id);
                    }
                }
                if (0..=d).any(|j| a[j] == 0 && on_bdry[j]) {
                    boundary[id] = true;
                }
                supports[id].push((t, loc));
                l2g.push(id);
            }
        }
        let interior: Vec<usize> = (0..boundary.len()).filter(|&i| !boundary[i]).collect();
        let mut interior_index = vec![None; boundary.len()];
        for (k, &i) in interior.iter().enumerate() {
            interior_index[i] = Some(k);
        }
        Ok(Arc::new(Self {
            mesh,
            degree,
            local_len,
            l2g,
            node_coords,
            boundary,
            interior,
            interior_index,
            supports,
            vertex_node,
        }))
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh<T>> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn local_len(&self) -> usize {
        self.local_len
    }

    /// Global node ids of simplex `t`, in canonical multi-index order.
    pub fn local_nodes(&self, t: usize) -> &[usize] {
        &self.l2g[t * self.local_len..(t + 1) * self.local_len]
    }

    pub fn node_coords(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.node_coords[i * d..(i + 1) * d]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// `N°`, in increasing node order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, i: usize) -> Option<usize> {
        self.interior_index[i]
    }

    /// `ω_i` as `(simplex, local index)` pairs.
    pub fn node_support(&self, i: usize) -> &[(usize, usize)] {
        &self.supports[i]
    }

    /// `|ω_i|`.
    pub fn support_measure(&self, i: usize) -> T {
        self.supports[i].iter().map(|&(t, _)| self.mesh.measure(t)).sum()
    }

    /// Node sitting at mesh vertex `v`.
    pub fn vertex_node(&self, v: usize) -> Option<usize> {
        self.vertex_node[v]
    }

    /// Degree-of-freedom numbering for the chosen node set.
    pub fn dofs(&self, set: DofSet) -> Dofs {
        match set {
            DofSet::All => Dofs {
                index: (0..self.num_nodes()).map(Some).collect(),
                nodes: (0..self.num_nodes()).collect(),
            },
            DofSet::Interior => Dofs {
                index: self.interior_index.clone(),
                nodes: self.interior.clone(),
            },
        }
    }

    /// `⟨b_α, b_β⟩_T` for the local basis of `t`.
    pub fn local_mass(&self, t: usize) -> DenseMatrix<T> {
        let d = self.dim();
        let m = cached_ref_mass::<T>(d, self.degree, self.degree);
        let s = self.mesh.measure(t) * T::lit(factorial(d) as f64);
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| s * m.get(i, j))
    }

    /// `⟨∇b_α, ∇b_β⟩_T` for the local basis of `t`.
    pub fn local_stiffness(&self, t: usize) -> DenseMatrix<T> {
        let d = self.dim();
        let k = self.degree;
        let idx = cached_indices(d, k);
        let lower = cached_ref_mass::<T>(d, k - 1, k - 1);
        let g = self.mesh.bary_grads(t);
        let gram: Vec<Vec<T>> = (0..=d)
            .map(|i| (0..=d).map(|j| (0..d).map(|c| g[i][c] * g[j][c]).sum()).collect())
            .collect();
        let s = self.mesh.measure(t) * T::lit(factorial(d) as f64) * T::of(k * k);
        let mut out = DenseMatrix::zeros(idx.len(), idx.len());
        let mut down = vec![0u32; d + 1];
        let mut down2 = vec![0u32; d + 1];
        for (a, alpha) in idx.iter().enumerate() {
            for (b, beta) in idx.iter().enumerate() {
                let mut v = T::zero();
                for i in 0..=d {
                    if alpha.entries()[i] == 0 {
                        continue;
                    }
                    down.copy_from_slice(alpha.entries());
                    down[i] -= 1;
                    let ra = crate::polyref::rank_of(&down);
                    for j in 0..=d {
                        if beta.entries()[j] == 0 {
                            continue;
                        }
                        down2.copy_from_slice(beta.entries());
                        down2[j] -= 1;
                        v += gram[i][j] * lower.get(ra, crate::polyref::rank_of(&down2));
                    }
                }
                out[(a, b)] = s * v;
            }
        }
        out
    }

    fn assemble(&self, set: DofSet, local: impl Fn(usize) -> DenseMatrix<T> + Sync) -> CsrMatrix<T> {
        use rayon::prelude::*;
        let dofs = self.dofs(set);
        let blocks: Vec<DenseMatrix<T>> =
            (0..self.mesh.num_simplices()).into_par_iter().map(&local).collect();
        let mut trip = Vec::new();
        for (t, block) in blocks.iter().enumerate() {
            let nodes = self.local_nodes(t);
            for (a, &i) in nodes.iter().enumerate() {
                let Some(ri) = dofs.index[i] else { continue };
                for (b, &j) in nodes.iter().enumerate() {
                    if let Some(rj) = dofs.index[j] {
                        trip.push((ri, rj, block[(a, b)]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(dofs.len(), &trip)
    }

    /// Global mass matrix on the chosen degrees of freedom (exact integrals).
    pub fn mass_matrix(&self, set: DofSet) -> CsrMatrix<T> {
        self.assemble(set, |t| self.local_mass(t))
    }

    /// Global stiffness matrix on the chosen degrees of freedom.
    pub fn stiffness_matrix(&self, set: DofSet) -> CsrMatrix<T> {
        self.assemble(set, |t| self.local_stiffness(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofSet {
    All,
    Interior,
}

/// Map between global nodes and a contiguous unknown numbering.
#[derive(Clone, Debug)]
pub struct Dofs {
    pub index: Vec<Option<usize>>,
    pub nodes: Vec<usize>,
}

impl Dofs {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Shorthand for `LagrangeSpace::new`.
pub fn lagrange_space<T: Real>(mesh: &Arc<SimplicialMesh<T>>, degree: usize) -> Result<Arc<LagrangeSpace<T>>> {
    LagrangeSpace::new(mesh.clone(), degree)
}

/// Inverse of the reference Bernstein–Vandermonde matrix
/// `V[i][β] = b_β(α_i/m)`, mapping nodal values to Bernstein coefficients.
fn inverse_vandermonde<T: Real>(d: usize, m: usize) -> Arc<DenseMatrix<T>> {
    type Key = (TypeId, usize, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<dyn Any + Send + Sync>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (TypeId::of::<T>(), d, m);
    if let Some(v) = cache.lock().expect("vandermonde cache poisoned").get(&key) {
        return v.clone().downcast().expect("vandermonde cache type confusion");
    }
    let idx = cached_indices(d, m);
    let n = idx.len();
    let v = DenseMatrix::<f64>::from_fn(n, n, |i, j| {
        let lam: Vec<f64> = idx[i].entries().iter().map(|&a| a as f64 / m as f64).collect();
        bernstein_values::<f64>(d, m, &lam)[j]
    });
    let lu = v.lu().expect("Bernstein-Vandermonde matrix is invertible");
    let mut inv = DenseMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..n {
            inv[(i, j)] = T::lit(col[i]);
        }
    }
    let inv = Arc::new(inv);
    cache
        .lock()
        .expect("vandermonde cache poisoned")
        .insert(key, inv.clone() as Arc<dyn Any + Send + Sync>);
    inv
}

/// A function in a Lagrange space, stored by Bernstein coefficients.
#[derive(Clone, Debug)]
pub struct FEFunction<T> {
    space: Arc<LagrangeSpace<T>>,
    coeffs: Vec<T>,
}

impl<T: Real> FEFunction<T> {
    pub fn zero(space: &Arc<LagrangeSpace<T>>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![T::zero(); space.num_nodes()],
        }
    }

    pub fn from_coeffs(space: &Arc<LagrangeSpace<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "space has {} nodes, got {} coefficients",
                space.num_nodes(),
                coeffs.len()
            )));
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    /// Global Bernstein basis function `b_i`.
    pub fn basis(space: &Arc<LagrangeSpace<T>>, i: usize) -> Self {
        let mut f = Self::zero(space);
        f.coeffs[i] = T::one();
        f
    }

    /// Scatters values on the interior unknowns, zero on the boundary.
    pub fn from_interior(space: &Arc<LagrangeSpace<T>>, values: &[T]) -> Self {
        let mut f = Self::zero(space);
        for (&i, &v) in space.interior_nodes().iter().zip(values) {
            f.coeffs[i] = v;
        }
        f
    }

    /// Nodal interpolation of `f`.
    pub fn interpolate(space: &Arc<LagrangeSpace<T>>, f: impl Fn(&[T]) -> T + Sync) -> Self {
        Self::interpolate_local(space, |_, x| f(x))
    }

    /// Nodal interpolation of `f(t, x)`, where `t` is a simplex containing
    /// `x`; lets piecewise data be sampled from the correct side.
    pub fn interpolate_local(space: &Arc<LagrangeSpace<T>>, f: impl Fn(usize, &[T]) -> T + Sync) -> Self {
        use rayon::prelude::*;
        let d = space.dim();
        let m = space.degree();
        let inv = inverse_vandermonde::<T>(d, m);
        let idx = cached_indices(d, m);
        let mesh = space.mesh();
        let blocks: Vec<Vec<T>> = (0..mesh.num_simplices())
            .into_par_iter()
            .map(|t| {
                let vals: Vec<T> = idx
                    .iter()
                    .map(|a| {
                        let lam: Vec<T> = a.entries().iter().map(|&v| T::of(v as usize) / T::of(m)).collect();
                        f(t, &mesh.point(t, &lam))
                    })
                    .collect();
                inv.matvec(&vals)
            })
            .collect();
        let mut coeffs = vec![T::zero(); space.num_nodes()];
        let mut set = vec![false; space.num_nodes()];
        for (t, block) in blocks.iter().enumerate() {
            for (&i, &c) in space.local_nodes(t).iter().zip(block) {
                if !set[i] {
                    coeffs[i] = c;
                    set[i] = true;
                }
            }
        }
        Self {
            space: space.clone(),
            coeffs,
        }
    }

    /// Exact transfer into `target`, whose mesh descends from (or equals) this
    /// function's mesh and whose degree is at least this degree.
    pub fn transfer(&self, target: &Arc<LagrangeSpace<T>>) -> Self {
        let host = target.mesh().clone();
        Self::interpolate_local(target, |t, x| self.eval_in(&host, t, x))
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
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

    pub fn interior_values(&self) -> Vec<T> {
        self.space.interior_nodes().iter().map(|&i| self.coeffs[i]).collect()
    }

    pub fn local_poly(&self, t: usize) -> BPoly<T> {
        let c = self.space.local_nodes(t).iter().map(|&i| self.coeffs[i]).collect();
        BPoly::from_coeffs(self.space.dim(), self.space.degree(), c).expect("local layout")
    }

    pub fn eval_local(&self, t: usize, lam: &[T]) -> T {
        let vals = bernstein_values(self.space.dim(), self.space.degree(), lam);
        self.space
            .local_nodes(t)
            .iter()
            .zip(vals)
            .map(|(&i, b)| self.coeffs[i] * b)
            .sum()
    }

    pub fn grad_local(&self, t: usize, lam: &[T]) -> Vec<T> {
        let d = self.space.dim();
        let g = self.space.mesh().bary_grads(t);
        let dl = bernstein_grad(&self.local_poly(t));
        let mut out = vec![T::zero(); d];
        for (j, pj) in dl.iter().enumerate() {
            let v = pj.eval_unchecked(lam);
            for c in 0..d {
                out[c] += v * g[j][c];
            }
        }
        out
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        let (t, lam) = self
            .space
            .mesh()
            .locate(x)
            .ok_or_else(|| Error::OutsideDomain(x.iter().map(|v| v.as_f64()).collect()))?;
        Ok(self.eval_local(t, &lam))
    }

    pub fn grad(&self, x: &[T]) -> Result<Vec<T>> {
        let (t, lam) = self
            .space
            .mesh()
            .locate(x)
            .ok_or_else(|| Error::OutsideDomain(x.iter().map(|v| v.as_f64()).collect()))?;
        Ok(self.grad_local(t, &lam))
    }

    /// Value at `x`, known to lie in simplex `t` of `host`. Uses the lineage of
    /// `host` to find the simplex of this function's mesh; falls back to point
    /// location for unrelated meshes.
    pub fn eval_in(&self, host: &SimplicialMesh<T>, t: usize, x: &[T]) -> T {
        let mesh = self.space.mesh();
        match host.ancestor_simplex(mesh.id(), t) {
            Some(s) => self.eval_local(s, &mesh.barycentric(s, x)),
            None => self.eval(x).unwrap_or(T::zero()),
        }
    }

    pub fn grad_in(&self, host: &SimplicialMesh<T>, t: usize, x: &[T]) -> Vec<T> {
        let mesh = self.space.mesh();
        match host.ancestor_simplex(mesh.id(), t) {
            Some(s) => self.grad_local(s, &mesh.barycentric(s, x)),
            None => self.grad(x).unwrap_or_else(|_| vec![T::zero(); mesh.dim()]),
        }
    }

    pub fn scale(&mut self, s: T) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    /// `self += s·other` (same space).
    pub fn axpy(&mut self, s: T, other: &Self) {
        assert!(Arc::ptr_eq(&self.space, &other.space), "axpy across spaces");
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn max_coeff_diff(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Largest coefficient at a boundary node; zero iff the trace vanishes.
    pub fn boundary_trace_max(&self) -> T {
        (0..self.space.num_nodes())
            .filter(|&i| self.space.is_boundary(i))
            .map(|i| self.coeffs[i].abs())
            .fold(T::zero(), T::max)
    }

    /// `⟨self, other⟩_Ω` for two functions on the same mesh, exactly.
    pub fn inner(&self, other: &Self) -> T {
        let mesh = self.space.mesh();
        assert_eq!(mesh.id(), other.space.mesh().id(), "inner product across meshes");
        let d = mesh.dim();
        let mass = cached_ref_mass::<T>(d, self.space.degree(), other.space.degree());
        let vol = T::lit(factorial(d) as f64);
        (0..mesh.num_simplices())
            .map(|t| {
                let a = self.local_poly(t);
                let b = other.local_poly(t);
                mass.bilinear(a.coeffs(), b.coeffs()) * mesh.measure(t) * vol
            })
            .sum()
    }

    /// `∫_Ω self`.
    pub fn integral(&self) -> T {
        let mesh = self.space.mesh();
        let d = mesh.dim();
        (0..mesh.num_simplices())
            .map(|t| self.local_poly(t).integrate() * mesh.measure(t) * T::lit(factorial(d) as f64))
            .sum()
    }
}

/// A function given by one Bernstein polynomial per simplex on a subset of a
/// mesh, zero elsewhere. Blocks are sorted by simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly<T> {
    pub degree: usize,
    pub blocks: Vec<(usize, BPoly<T>)>,
}

impl<T: Real> PiecewisePoly<T> {
    pub fn new(degree: usize, mut blocks: Vec<(usize, BPoly<T>)>) -> Self {
        blocks.sort_by_key(|b| b.0);
        Self { degree, blocks }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(|b| b.0)
    }

    pub fn block(&self, t: usize) -> Option<&BPoly<T>> {
        self.blocks
            .binary_search_by_key(&t, |b| b.0)
            .ok()
            .map(|k| &self.blocks[k].1)
    }

    pub fn eval_local(&self, t: usize, lam: &[T]) -> T {
        self.block(t).map_or(T::zero(), |p| p.eval_unchecked(lam))
    }

    pub fn scaled(mut self, s: T) -> Self {
        for (_, p) in &mut self.blocks {
            p.scale(s);
        }
        self
    }

    /// Gradient inside simplex `t` of `mesh`.
    pub fn grad_local(&self, mesh: &SimplicialMesh<T>, t: usize, lam: &[T]) -> Vec<T> {
        let d = mesh.dim();
        let mut out = vec![T::zero(); d];
        if let Some(p) = self.block(t) {
            let g = mesh.bary_grads(t);
            for (j, pj) in bernstein_grad(p).iter().enumerate() {
                let v = pj.eval_unchecked(lam);
                for c in 0..d {
                    out[c] += v * g[j][c];
                }
            }
        }
        out
    }

    /// `∫ self · f` exactly, for `f` a Lagrange function on the same mesh.
    pub fn inner_fe(&self, mesh: &SimplicialMesh<T>, f: &FEFunction<T>) -> T {
        let d = mesh.dim();
        let mass = cached_ref_mass::<T>(d, self.degree, f.space().degree());
        let vol = T::lit(factorial(d) as f64);
        self.blocks
            .iter()
            .map(|(t, p)| mass.bilinear(p.coeffs(), f.local_poly(*t).coeffs()) * mesh.measure(*t) * vol)
            .sum()
    }

    /// Number of coefficients per block.
    pub fn block_len(&self, d: usize) -> usize {
        basis_len(d, self.degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(n: usize) -> Arc<SimplicialMesh<f64>> {
        Arc::new(SimplicialMesh::interval(n))
    }

    #[test]
    fn node_counts() {
        let m = interval(2);
        let s1 = lagrange_space(&m, 1).unwrap();
        assert_eq!((s1.num_nodes(), s1.interior_nodes().len()), (3, 1));
        let s2 = lagrange_space(&m, 2).unwrap();
        assert_eq!((s2.num_nodes(), s2.interior_nodes().len()), (5, 3));
        let sq = Arc::new(SimplicialMesh::<f64>::square(1));
        let s = lagrange_space(&sq, 1).unwrap();
        assert_eq!((s.num_nodes(), s.interior_nodes().len()), (4, 0));
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        for k in 1..=3 {
            let s = lagrange_space(&sq, k).unwrap();
            let n = 2 * k + 1;
            assert_eq!(s.num_nodes(), n * n);
            assert_eq!(s.interior_nodes().len(), (n - 2) * (n - 2));
            for t in 0..sq.num_simplices() {
                assert_eq!(s.local_nodes(t).len(), basis_len(2, k));
            }
        }
    }

    #[test]
    fn node_support_is_union_of_containing_simplices() {
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&sq, 2).unwrap();
        for i in 0..s.num_nodes() {
            let x = s.node_coords(i).to_vec();
            let expect: Vec<usize> = (0..sq.num_simplices())
                .filter(|&t| sq.barycentric(t, &x).iter().all(|&l| l > -1e-12))
                .collect();
            let got: Vec<usize> = s.node_support(i).iter().map(|p| p.0).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn hat_and_gradient() {
        let m = interval(2);
        let s = lagrange_space(&m, 1).unwrap();
        let hat = FEFunction::basis(&s, s.vertex_node(1).unwrap());
        assert!((hat.eval(&[0.5]).unwrap() - 1.0).abs() < 1e-15);
        let id = FEFunction::interpolate(&s, |x| x[0]);
        for x in [0.1, 0.5, 0.9] {
            assert!((id.grad(&[x]).unwrap()[0] - 1.0).abs() < 1e-14);
        }
        assert!(id.eval(&[1.5]).is_err());
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        for k in 1..=3 {
            let s = lagrange_space(&sq, k).unwrap();
            let c = if k > 1 { 1.0 } else { 0.0 };
            let p = move |x: &[f64]| (x[0] - 0.3).powi(k as i32) + x[1].powi(k as i32 - 1) * 2.0 - c * x[0] * x[1];
            let f = FEFunction::interpolate(&s, p);
            for i in 0..20 {
                let x = [(i as f64 * 0.137) % 1.0, (i as f64 * 0.291) % 1.0];
                assert!((f.eval(&x).unwrap() - p(&x)).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn gradient_against_finite_differences() {
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&sq, 3).unwrap();
        let f = FEFunction::interpolate(&s, |x| (3.0 * x[0]).sin() * x[1].exp());
        let x = [0.31, 0.62];
        let g = f.grad(&x).unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let fd = (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn continuity_across_faces() {
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&sq, 3).unwrap();
        let coeffs: Vec<f64> = (0..s.num_nodes()).map(|i| (i as f64 * 0.7).sin()).collect();
        let f = FEFunction::from_coeffs(&s, coeffs).unwrap();
        // midpoint of the diagonal shared by the first two triangles
        let x = [0.25, 0.25];
        let vals: Vec<f64> = (0..sq.num_simplices())
            .filter_map(|t| {
                let lam = sq.barycentric(t, &x);
                lam.iter().all(|&l| l > -1e-12).then(|| f.eval_local(t, &lam))
            })
            .collect();
        assert!(vals.len() >= 2);
        assert!(vals.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-13));
    }

    #[test]
    fn transfer_to_refined_mesh_is_exact() {
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&sq, 2).unwrap();
        let coeffs: Vec<f64> = (0..s.num_nodes()).map(|i| (i as f64).cos()).collect();
        let f = FEFunction::from_coeffs(&s, coeffs).unwrap();
        let fine = Arc::new(sq.uniform_refine());
        let fs = lagrange_space(&fine, 3).unwrap();
        let g = f.transfer(&fs);
        for i in 0..25 {
            let x = [(i as f64 * 0.173) % 1.0, (i as f64 * 0.379) % 1.0];
            assert!((g.eval(&x).unwrap() - f.eval(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_and_stiffness() {
        let m = interval(4);
        let s = lagrange_space(&m, 2).unwrap();
        let mass = s.mass_matrix(DofSet::All);
        let ones = vec![1.0; s.num_nodes()];
        assert!((mass.bilinear(&ones, &ones) - 1.0).abs() < 1e-14);
        let f = FEFunction::interpolate(&s, |x| x[0] * x[0]);
        let k = s.stiffness_matrix(DofSet::All);
        // ∫ (2x)² = 4/3
        assert!((k.bilinear(f.coeffs(), f.coeffs()) - 4.0 / 3.0).abs() < 1e-13);
        let sq = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&sq, 3).unwrap();
        let f = FEFunction::interpolate(&s, |x| x[0] * x[1]);
        let k = s.stiffness_matrix(DofSet::All);
        // ∫ y² + x² = 2/3
        assert!((k.bilinear(f.coeffs(), f.coeffs()) - 2.0 / 3.0).abs() < 1e-13);
        assert!((f.inner(&f) - 1.0 / 9.0).abs() < 1e-14);
        assert!((f.integral() - 0.25).abs() < 1e-14);
    }
}
