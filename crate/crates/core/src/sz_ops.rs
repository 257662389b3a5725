//! Global biorthogonal weights and the quasi-interpolation operators built
//! from them.
//!
//! `ψ_i|_T = (|T̂|/|ω_i|)·p_{α(i,T)}` where `α(i,T)` is the lattice position of
//! node `i` in `T` and `ω_i` is the support of `b_i` (the union of simplices
//! containing the node, not the vertex patch `ω_j`). Boundary nodes get the
//! zero-trace replacement `ψ̃_i = b_i·η·ρ_i`, `η` the sum of hat functions of
//! interior vertices.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dualbasis::{dual_basis, DualBasisTable};
use crate::functional::{DualFunctional, Moments};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::mesh::{FEFunction, LagrangeSpace, PiecewisePoly};
use crate::polyref::{cached_indices, cached_ref_mass, factorial, ref_volume, BPoly};
use crate::{Error, Real, Result};

/// Extra quadrature order spent on callable data when pairing with weights.
pub const DEFAULT_QUAD_EXTRA: usize = 6;

/// The weights `ψ_i` for every node of a Lagrange space.
#[derive(Clone, Debug)]
pub struct GlobalDualBasis<T> {
    space: Arc<LagrangeSpace<T>>,
    table: Arc<DualBasisTable<T>>,
    weights: Vec<PiecewisePoly<T>>,
    scale: Vec<T>,
}

impl<T: Real> GlobalDualBasis<T> {
    pub fn new(space: &Arc<LagrangeSpace<T>>) -> Result<Self> {
        let table = dual_basis::<T>(space.dim(), space.degree())?;
        Self::with_table(space, table)
    }

    /// Patches the local table together on every node support.
    pub fn with_table(space: &Arc<LagrangeSpace<T>>, table: Arc<DualBasisTable<T>>) -> Result<Self> {
        if table.d != space.dim() || table.k != space.degree() {
            return Err(Error::DimensionMismatch(format!(
                "table (d={}, k={}) for a space with d={}, k={}",
                table.d,
                table.k,
                space.dim(),
                space.degree()
            )));
        }
        let idx = cached_indices(space.dim(), space.degree());
        let vol = ref_volume::<T>(space.dim());
        let (weights, scale): (Vec<_>, Vec<_>) = (0..space.num_nodes())
            .into_par_iter()
            .map(|i| {
                let s = vol / space.support_measure(i);
                let blocks = space
                    .node_support(i)
                    .iter()
                    .map(|&(t, loc)| {
                        debug_assert_eq!(table.p_of(idx[loc].entries()), &table.p[loc]);
                        (t, table.p[loc].clone().scaled(s))
                    })
                    .collect();
                (PiecewisePoly::new(3 * space.degree(), blocks), s)
            })
            .unzip();
        Ok(Self {
            space: space.clone(),
            table,
            weights,
            scale,
        })
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    pub fn table(&self) -> &Arc<DualBasisTable<T>> {
        &self.table
    }

    pub fn weight(&self, i: usize) -> &PiecewisePoly<T> {
        &self.weights[i]
    }

    pub fn weights(&self) -> &[PiecewisePoly<T>] {
        &self.weights
    }

    /// `|T̂|/|ω_i|`.
    pub fn scale(&self, i: usize) -> T {
        self.scale[i]
    }
}

/// Weights with zero boundary trace: `ψ̃_i = ψ_i` at interior nodes and
/// `b_i·η·ρ_i` (raised to degree `3k`) at boundary nodes.
#[derive(Clone, Debug)]
pub struct CorrectedDualBasis<T> {
    space: Arc<LagrangeSpace<T>>,
    weights: Vec<PiecewisePoly<T>>,
}

impl<T: Real> CorrectedDualBasis<T> {
    pub fn new(raw: &GlobalDualBasis<T>) -> Result<Self> {
        let space = raw.space().clone();
        let weights: Result<Vec<_>> = (0..space.num_nodes())
            .into_par_iter()
            .map(|i| {
                if space.is_boundary(i) {
                    correct_node(&space, raw.weight(i), i)
                } else {
                    Ok(raw.weight(i).clone())
                }
            })
            .collect();
        Ok(Self {
            space,
            weights: weights?,
        })
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    pub fn weight(&self, i: usize) -> &PiecewisePoly<T> {
        &self.weights[i]
    }

    pub fn weights(&self) -> &[PiecewisePoly<T>] {
        &self.weights
    }
}

/// `η|_T` as a degree-1 polynomial.
fn cutoff<T: Real>(space: &LagrangeSpace<T>, t: usize) -> BPoly<T> {
    let mesh = space.mesh();
    let c = mesh
        .simplex(t)
        .iter()
        .map(|&v| if mesh.is_boundary_vertex(v) { T::zero() } else { T::one() })
        .collect();
    BPoly::from_coeffs(mesh.dim(), 1, c).expect("degree-1 layout")
}

/// Solves `⟨b_i η ρ_i, b_ℓ⟩ = ⟨ψ_i, b_ℓ⟩` for all `ℓ ∈ N ∩ ω_i`.
fn correct_node<T: Real>(space: &LagrangeSpace<T>, psi: &PiecewisePoly<T>, i: usize) -> Result<PiecewisePoly<T>> {
    let mesh = space.mesh();
    let d = space.dim();
    let k = space.degree();
    let idx = cached_indices(d, k);
    let support = space.node_support(i);
    let mut unknown: HashMap<usize, usize> = HashMap::new();
    let mut order = Vec::new();
    for &(t, _) in support {
        for &l in space.local_nodes(t) {
            unknown.entry(l).or_insert_with(|| {
                order.push(l);
                order.len() - 1
            });
        }
    }
    let n = order.len();
    let mass_w = cached_ref_mass::<T>(d, 2 * k + 1, k);
    let mass_psi = cached_ref_mass::<T>(d, 3 * k, k);
    let vol = T::lit(factorial(d) as f64);
    let mut gram = DenseMatrix::zeros(n, n);
    let mut rhs = vec![T::zero(); n];
    let mut weight = Vec::with_capacity(support.len());
    for &(t, loc) in support {
        let w = BPoly::basis(&idx[loc]).product(&cutoff(space, t));
        let s = mesh.measure(t) * vol;
        let nodes = space.local_nodes(t);
        for (m, &gm) in nodes.iter().enumerate() {
            let wm = w.product(&BPoly::basis(&idx[m]));
            for (l, &gl) in nodes.iter().enumerate() {
                let v: T = (0..wm.coeffs().len()).map(|g| wm.coeffs()[g] * mass_w.get(g, l)).sum();
                gram[(unknown[&gl], unknown[&gm])] += s * v;
            }
        }
        let p = psi.block(t).expect("weight lives on the node support");
        for (l, &gl) in nodes.iter().enumerate() {
            let v: T = (0..p.coeffs().len()).map(|g| p.coeffs()[g] * mass_psi.get(g, l)).sum();
            rhs[unknown[&gl]] += s * v;
        }
        weight.push((t, w));
    }
    let rho = gram
        .cholesky()
        .map_err(|_| Error::Singular(format!("boundary correction Gram matrix at node {i} (patch without interior vertex)")))?
        .solve(&rhs);
    let blocks = weight
        .into_iter()
        .map(|(t, w)| {
            let c = space.local_nodes(t).iter().map(|l| rho[unknown[l]]).collect();
            let r = BPoly::from_coeffs(d, k, c).expect("local layout");
            (t, w.product(&r).raise(3 * k))
        })
        .collect();
    Ok(PiecewisePoly::new(3 * k, blocks))
}

/// The operators `Π₀`, `Π₀*`, `Π`, `Π*` and `P` on one Lagrange space.
#[derive(Clone, Debug)]
pub struct Projections<T> {
    space: Arc<LagrangeSpace<T>>,
    high: Arc<LagrangeSpace<T>>,
    raw: GlobalDualBasis<T>,
    corrected: CorrectedDualBasis<T>,
    quad_extra: usize,
}

impl<T: Real> Projections<T> {
    pub fn new(space: &Arc<LagrangeSpace<T>>) -> Result<Self> {
        Self::from_raw(GlobalDualBasis::new(space)?)
    }

    pub fn from_raw(raw: GlobalDualBasis<T>) -> Result<Self> {
        let space = raw.space().clone();
        let high = LagrangeSpace::new(space.mesh().clone(), 3 * space.degree())?;
        let corrected = CorrectedDualBasis::new(&raw)?;
        Ok(Self {
            space,
            high,
            raw,
            corrected,
            quad_extra: DEFAULT_QUAD_EXTRA,
        })
    }

    pub fn with_quad_extra(mut self, q: usize) -> Self {
        self.quad_extra = q;
        self
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    /// The degree-`3k` space containing all weights.
    pub fn weight_space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.high
    }

    pub fn raw(&self) -> &GlobalDualBasis<T> {
        &self.raw
    }

    pub fn corrected(&self) -> &CorrectedDualBasis<T> {
        &self.corrected
    }

    fn weight_moments(&self, xi: &DualFunctional<T>) -> Result<Moments<T>> {
        xi.moments(self.space.mesh(), 3 * self.space.degree(), self.quad_extra)
    }

    fn coefficients(&self, xi: &DualFunctional<T>, weights: &[PiecewisePoly<T>], interior_only: bool) -> Result<FEFunction<T>> {
        let m = self.weight_moments(xi)?;
        let coeffs = (0..self.space.num_nodes())
            .into_par_iter()
            .map(|i| {
                if interior_only && self.space.is_boundary(i) {
                    T::zero()
                } else {
                    m.pair_piecewise(&weights[i])
                }
            })
            .collect();
        FEFunction::from_coeffs(&self.space, coeffs)
    }

    /// `Π₀ξ = Σ_{i∈N°} ⟨ξ,ψ_i⟩ b_i`.
    pub fn apply_pi0(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        self.coefficients(xi, self.raw.weights(), true)
    }

    /// `Πξ = Σ_{i∈N} ⟨ξ,ψ̃_i⟩ b_i`.
    pub fn apply_pi(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        self.coefficients(xi, self.corrected.weights(), false)
    }

    /// `Pξ = Σ_{i∈N} ⟨ξ,ψ_i⟩ b_i`, preserving `⟨·,1⟩`.
    pub fn apply_p_raw(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        self.coefficients(xi, self.raw.weights(), false)
    }

    /// `⟨ξ, b_i⟩` for every node.
    fn basis_pairings(&self, xi: &DualFunctional<T>) -> Result<Vec<T>> {
        let m = xi.moments(self.space.mesh(), self.space.degree(), self.quad_extra + 2 * self.space.degree())?;
        Ok((0..self.space.num_nodes())
            .map(|i| self.space.node_support(i).iter().map(|&(t, loc)| m.local(t)[loc]).sum())
            .collect())
    }

    fn combine(&self, c: &[T], weights: &[PiecewisePoly<T>], interior_only: bool) -> FEFunction<T> {
        let mesh = self.space.mesh();
        let d = mesh.dim();
        let high_deg = 3 * self.space.degree();
        let mut local: Vec<BPoly<T>> = (0..mesh.num_simplices()).map(|_| BPoly::zero(d, high_deg)).collect();
        for (i, w) in weights.iter().enumerate() {
            if interior_only && self.space.is_boundary(i) {
                continue;
            }
            for (t, p) in &w.blocks {
                local[*t].axpy(c[i], p);
            }
        }
        let mut out = FEFunction::zero(&self.high);
        let coeffs = out.coeffs_mut();
        for (t, p) in local.iter().enumerate() {
            for (&g, &v) in self.high.local_nodes(t).iter().zip(p.coeffs()) {
                coeffs[g] = v;
            }
        }
        out
    }

    /// `Π₀*ξ = Σ_{i∈N°} ⟨ξ,b_i⟩ ψ_i`, in the degree-`3k` space.
    pub fn apply_pi0_star(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        let c = self.basis_pairings(xi)?;
        Ok(self.combine(&c, self.raw.weights(), true))
    }

    /// `Π*v = Σ_{i∈N} ⟨v,b_i⟩ ψ̃_i`; defined for densities only.
    pub fn apply_pi_star(&self, v: &DualFunctional<T>) -> Result<FEFunction<T>> {
        if !v.is_density() {
            return Err(Error::InvalidFunctional(
                "the adjoint of the boundary-corrected operator accepts L¹ densities only".into(),
            ));
        }
        let c = self.basis_pairings(v)?;
        Ok(self.combine(&c, self.corrected.weights(), false))
    }

    /// Largest jump of a weight across the faces of its support, measured as
    /// the disagreement of per-simplex blocks at shared Lagrange nodes of the
    /// degree-`3k` space.
    pub fn continuity_defect(&self, w: &PiecewisePoly<T>) -> T {
        let mut seen: HashMap<usize, T> = HashMap::new();
        let mut worst = T::zero();
        for (t, p) in &w.blocks {
            for (&g, &v) in self.high.local_nodes(*t).iter().zip(p.coeffs()) {
                match seen.get(&g) {
                    Some(&u) => worst = worst.max((u - v).abs()),
                    None => {
                        seen.insert(g, v);
                    }
                }
            }
        }
        // nodes on the rim of the support must vanish where a neighbour has no block
        for (t, p) in &w.blocks {
            for (&g, &v) in self.high.local_nodes(*t).iter().zip(p.coeffs()) {
                let outside = self
                    .high
                    .node_support(g)
                    .iter()
                    .any(|&(s, _)| w.block(s).is_none());
                if outside {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    /// Exact Gram matrix `⟨ψ_i, ψ_j⟩` of the raw weights on interior nodes.
    pub fn interior_weight_gram(&self) -> CsrMatrix<T> {
        let mesh = self.space.mesh();
        let d = mesh.dim();
        let mass = cached_ref_mass::<T>(d, 3 * self.space.degree(), 3 * self.space.degree());
        let vol = T::lit(factorial(d) as f64);
        let interior = self.space.interior_nodes();
        let mut by_simplex: Vec<Vec<(usize, &BPoly<T>)>> = vec![Vec::new(); mesh.num_simplices()];
        for (r, &i) in interior.iter().enumerate() {
            for (t, p) in &self.raw.weight(i).blocks {
                by_simplex[*t].push((r, p));
            }
        }
        let mut trip = Vec::new();
        for (t, list) in by_simplex.iter().enumerate() {
            let s = mesh.measure(t) * vol;
            for &(a, pa) in list {
                for &(b, pb) in list {
                    trip.push((a, b, s * mass.bilinear(pa.coeffs(), pb.coeffs())));
                }
            }
        }
        CsrMatrix::from_triplets(interior.len(), &trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lagrange_space, SimplicialMesh};

    fn ops(mesh: SimplicialMesh<f64>, k: usize) -> Projections<f64> {
        let m = Arc::new(mesh);
        Projections::new(&lagrange_space(&m, k).unwrap()).unwrap()
    }

    fn pair_basis(ops: &Projections<f64>, w: &PiecewisePoly<f64>, l: usize) -> f64 {
        let b = FEFunction::basis(ops.space(), l);
        w.inner_fe(ops.space().mesh(), &b)
    }

    #[test]
    fn biorthogonality_on_the_whole_mesh() {
        for (mesh, k) in [
            (SimplicialMesh::interval(3), 1),
            (SimplicialMesh::interval(3), 3),
            (SimplicialMesh::square(2), 1),
            (SimplicialMesh::square(2), 2),
        ] {
            let o = ops(mesh, k);
            let n = o.space().num_nodes();
            for i in 0..n {
                for l in 0..n {
                    let e = if i == l { 1.0 } else { 0.0 };
                    let raw = pair_basis(&o, o.raw().weight(i), l);
                    let cor = pair_basis(&o, o.corrected().weight(i), l);
                    assert!((raw - e).abs() < 1e-10, "raw ({i},{l}) {raw}");
                    assert!((cor - e).abs() < 1e-9, "corrected ({i},{l}) {cor}");
                }
            }
        }
    }

    #[test]
    fn weight_bound_on_a_two_element_mesh() {
        let o = ops(SimplicialMesh::interval(2), 1);
        let i = o.space().vertex_node(1).unwrap();
        assert!((o.space().support_measure(i) - 1.0).abs() < 1e-15);
        let w = o.raw().weight(i);
        let sup = (0..=100)
            .map(|s| {
                let x = s as f64 / 100.0;
                let (t, lam) = o.space().mesh().locate(&[x]).unwrap();
                w.eval_local(t, &lam).abs()
            })
            .fold(0.0, f64::max);
        let c = o
            .raw()
            .table()
            .p
            .iter()
            .flat_map(|p| (0..=100).map(move |s| p.eval_unchecked(&[s as f64 / 100.0, 1.0 - s as f64 / 100.0]).abs()))
            .fold(0.0, f64::max);
        assert!(sup > 0.0 && sup <= c + 1e-12, "{sup} vs {c}");
    }

    #[test]
    fn weights_are_continuous_with_zero_rim() {
        let o = ops(SimplicialMesh::square(2), 2);
        for i in 0..o.space().num_nodes() {
            let w = o.raw().weight(i);
            if o.space().is_boundary(i) {
                continue;
            }
            assert!(o.continuity_defect(w) < 1e-11, "node {i}");
        }
        for i in 0..o.space().num_nodes() {
            let w = o.corrected().weight(i);
            assert!(o.continuity_defect(w) < 1e-11, "corrected node {i}");
        }
    }

    #[test]
    fn boundary_weights_have_zero_trace() {
        let o = ops(SimplicialMesh::square(2), 2);
        let high = o.weight_space();
        for w in o.corrected().weights() {
            for (t, p) in &w.blocks {
                for (&g, &c) in high.local_nodes(*t).iter().zip(p.coeffs()) {
                    if high.is_boundary(g) {
                        assert!(c.abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn operator_examples() {
        let o = ops(SimplicialMesh::interval(4), 1);
        let one = DualFunctional::density(|_| 1.0);
        let p = o.apply_pi(&one).unwrap();
        assert!(p.coeffs().iter().all(|&c| (c - 1.0).abs() < 1e-10));
        let x = o.apply_pi(&DualFunctional::density(|x| x[0])).unwrap();
        assert!(o.space().interior_nodes().iter().all(|_| true));
        for i in 0..o.space().num_nodes() {
            assert!((x.coeffs()[i] - o.space().node_coords(i)[0]).abs() < 1e-10);
        }
        let p0 = o.apply_pi0(&one).unwrap();
        for i in 0..o.space().num_nodes() {
            let e = if o.space().is_boundary(i) { 0.0 } else { 1.0 };
            assert!((p0.coeffs()[i] - e).abs() < 1e-10);
        }
        let star = o.apply_pi_star(&DualFunctional::atom(vec![0.3], 1.0));
        assert!(star.is_err());
    }
}
