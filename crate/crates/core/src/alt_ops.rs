//! Comparison operators: the `L²` projection onto the zero-trace space and the
//! self-adjoint Clément-type operator `C = Σ_j φ_j C_j`.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;

use crate::functional::DualFunctional;
use crate::linalg::{Cholesky, DenseMatrix, SparseCholesky};
use crate::mesh::{DofSet, FEFunction, LagrangeSpace};
use crate::polyref::{cached_indices, cached_ref_mass, factorial, BPoly, MultiIndex};
use crate::{Error, Real, Result};

/// Extra quadrature order for callable data.
const QUAD_EXTRA: usize = 8;

/// `Π₂`: `⟨Π₂ξ, w⟩ = ξ(w)` for all `w` in the zero-trace space.
#[derive(Debug)]
pub struct L2Projection<T> {
    space: Arc<LagrangeSpace<T>>,
    factor: SparseCholesky<T>,
}

impl<T: Real> L2Projection<T> {
    pub fn new(space: &Arc<LagrangeSpace<T>>) -> Result<Self> {
        let mass = space.mass_matrix(DofSet::Interior);
        let factor = SparseCholesky::factor(&mass)?;
        Ok(Self {
            space: space.clone(),
            factor,
        })
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    pub fn apply(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        let k = self.space.degree();
        let m = xi.moments(self.space.mesh(), k, QUAD_EXTRA)?;
        let rhs: Vec<T> = self
            .space
            .interior_nodes()
            .iter()
            .map(|&i| self.space.node_support(i).iter().map(|&(t, loc)| m.local(t)[loc]).sum())
            .collect();
        Ok(FEFunction::from_interior(&self.space, &self.factor.solve(&rhs)))
    }
}

/// The local space `{v of degree k−1 on ω_j : φ_j·v has zero trace}` with its
/// `φ_j`-weighted Gram matrix.
#[derive(Clone, Debug)]
pub struct ClementLocalSpace<T> {
    pub vertex: usize,
    /// simplices of `ω_j` with the position of `j` in each
    pub simplices: Vec<(usize, usize)>,
    /// per simplex, the unknown attached to each local degree-`(k−1)` index
    pub unknowns: Vec<Vec<Option<usize>>>,
    pub len: usize,
    gram: Option<Cholesky<T>>,
}

impl<T: Real> ClementLocalSpace<T> {
    fn new(space: &LagrangeSpace<T>, j: usize) -> Result<Self> {
        let mesh = space.mesh();
        let d = mesh.dim();
        let k = space.degree();
        let low = cached_indices(d, k - 1);
        // a key is dropped if it lies on a boundary facet through `j` in any
        // simplex of the patch
        let mut keyed: Vec<Vec<Vec<(usize, u32)>>> = Vec::new();
        let mut dropped: HashSet<Vec<(usize, u32)>> = HashSet::new();
        let mut simplices = Vec::new();
        for &t in mesh.vertex_patch(j) {
            let s = mesh.simplex(t);
            let pos = s.iter().position(|&v| v == j).expect("patch simplex contains its vertex");
            let mut row = Vec::with_capacity(low.len());
            for a in low.iter() {
                let e = a.entries();
                let mut key: Vec<(usize, u32)> = (0..=d).filter(|&m| e[m] > 0).map(|m| (s[m], e[m])).collect();
                key.sort_unstable();
                if (0..=d).any(|m| m != pos && e[m] == 0 && mesh.facet_on_boundary(t, m)) {
                    dropped.insert(key.clone());
                }
                row.push(key);
            }
            simplices.push((t, pos));
            keyed.push(row);
        }
        let mut keys: HashMap<Vec<(usize, u32)>, usize> = HashMap::new();
        let unknowns: Vec<Vec<Option<usize>>> = keyed
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|key| {
                        if dropped.contains(&key) {
                            return None;
                        }
                        let next = keys.len();
                        Some(*keys.entry(key).or_insert(next))
                    })
                    .collect()
            })
            .collect();
        let len = keys.len();
        let mut out = Self {
            vertex: j,
            simplices,
            unknowns,
            len,
            gram: None,
        };
        if len > 0 {
            let g = out.weighted_gram(space);
            out.gram = Some(
                g.cholesky()
                    .map_err(|_| Error::Singular(format!("weighted Gram matrix at vertex {j}")))?,
            );
        }
        Ok(out)
    }

    /// `⟨φ_j v_a, v_b⟩` over the local basis.
    pub fn weighted_gram(&self, space: &LagrangeSpace<T>) -> DenseMatrix<T> {
        let mesh = space.mesh();
        let d = mesh.dim();
        let k = space.degree();
        let low = cached_indices(d, k - 1);
        let mass = cached_ref_mass::<T>(d, k, k - 1);
        let vol = T::lit(factorial(d) as f64);
        let mut g = DenseMatrix::zeros(self.len, self.len);
        for ((t, pos), row) in self.simplices.iter().zip(&self.unknowns) {
            let phi = BPoly::<T>::basis(&MultiIndex::unit(d, *pos));
            let s = mesh.measure(*t) * vol;
            for (a, ua) in row.iter().enumerate() {
                let Some(ua) = ua else { continue };
                let w = phi.product(&BPoly::basis(&low[a]));
                for (b, ub) in row.iter().enumerate() {
                    let Some(ub) = ub else { continue };
                    let v: T = (0..w.coeffs().len()).map(|g| w.coeffs()[g] * mass.get(g, b)).sum();
                    g[(*ua, *ub)] += s * v;
                }
            }
        }
        g
    }

    /// Per-simplex pieces of `φ_j·C_jξ`, degree `k`.
    fn apply(&self, space: &LagrangeSpace<T>, m: &crate::functional::Moments<T>) -> Vec<(usize, BPoly<T>)> {
        let Some(gram) = &self.gram else {
            return Vec::new();
        };
        let d = space.dim();
        let k = space.degree();
        let low = cached_indices(d, k - 1);
        let mut rhs = vec![T::zero(); self.len];
        let mut phis = Vec::with_capacity(self.simplices.len());
        for ((t, pos), row) in self.simplices.iter().zip(&self.unknowns) {
            let phi = BPoly::basis(&MultiIndex::unit(d, *pos));
            for (a, ua) in row.iter().enumerate() {
                if let Some(ua) = ua {
                    rhs[*ua] += m.pair_local(*t, &phi.product(&BPoly::basis(&low[a])));
                }
            }
            phis.push(phi);
        }
        let c = gram.solve(&rhs);
        self.simplices
            .iter()
            .zip(&self.unknowns)
            .zip(phis)
            .map(|(((t, _), row), phi)| {
                let coeffs = row.iter().map(|u| u.map_or(T::zero(), |u| c[u])).collect();
                let v = BPoly::from_coeffs(d, k - 1, coeffs).expect("local layout");
                (*t, phi.product(&v))
            })
            .collect()
    }
}

/// `C = Σ_j φ_j C_j` with `C_j` the `φ_j`-weighted `L²` projection onto the
/// local space of vertex `j`.
#[derive(Debug)]
pub struct Clement<T> {
    space: Arc<LagrangeSpace<T>>,
    locals: Vec<ClementLocalSpace<T>>,
}

impl<T: Real> Clement<T> {
    pub fn new(space: &Arc<LagrangeSpace<T>>) -> Result<Self> {
        let locals: Result<Vec<_>> = (0..space.mesh().num_vertices())
            .into_par_iter()
            .map(|j| ClementLocalSpace::new(space, j))
            .collect();
        Ok(Self {
            space: space.clone(),
            locals: locals?,
        })
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    pub fn local(&self, j: usize) -> &ClementLocalSpace<T> {
        &self.locals[j]
    }

    pub fn apply(&self, xi: &DualFunctional<T>) -> Result<FEFunction<T>> {
        let mesh = self.space.mesh();
        let d = mesh.dim();
        let k = self.space.degree();
        let m = xi.moments(mesh, k, QUAD_EXTRA)?;
        let pieces: Vec<Vec<(usize, BPoly<T>)>> =
            self.locals.par_iter().map(|l| l.apply(&self.space, &m)).collect();
        let mut local: Vec<BPoly<T>> = (0..mesh.num_simplices()).map(|_| BPoly::zero(d, k)).collect();
        for list in pieces {
            for (t, p) in list {
                local[t].axpy(T::one(), &p);
            }
        }
        let mut out = FEFunction::zero(&self.space);
        let coeffs = out.coeffs_mut();
        for (t, p) in local.iter().enumerate() {
            for (&g, &v) in self.space.local_nodes(t).iter().zip(p.coeffs()) {
                coeffs[g] = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lagrange_space, SimplicialMesh};

    #[test]
    fn pi2_reproduces_discrete_functions() {
        let m = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&m, 2).unwrap();
        let p = L2Projection::new(&s).unwrap();
        let vals: Vec<f64> = (0..s.interior_nodes().len()).map(|i| (i as f64).sin()).collect();
        let v = FEFunction::from_interior(&s, &vals);
        let out = p.apply(&DualFunctional::discrete(v.clone())).unwrap();
        assert!(out.max_coeff_diff(&v) < 1e-12);
    }

    #[test]
    fn clement_degree_one_formula() {
        let m = Arc::new(SimplicialMesh::<f64>::interval(4));
        let s = lagrange_space(&m, 1).unwrap();
        let c = Clement::new(&s).unwrap();
        let f = |x: &[f64]| (2.0 * x[0]).exp();
        let out = c.apply(&DualFunctional::density(f)).unwrap();
        for i in 0..s.num_nodes() {
            let expect = if s.is_boundary(i) {
                0.0
            } else {
                let b = FEFunction::basis(&s, i);
                let num = DualFunctional::density(f).pair(&b, 10).unwrap();
                num / b.integral()
            };
            assert!((out.coeffs()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn clement_identity_on_lower_degree() {
        let m = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&m, 2).unwrap();
        let c = Clement::new(&s).unwrap();
        let low = lagrange_space(&m, 1).unwrap();
        let v = FEFunction::from_interior(&low, &[0.7]);
        let out = c.apply(&DualFunctional::discrete(v.clone())).unwrap();
        let vs = v.transfer(&s);
        assert!(out.max_coeff_diff(&vs) < 1e-12);
        // not the identity on degree k
        let w = FEFunction::from_interior(&s, &vec![1.0; s.interior_nodes().len()]);
        let cw = c.apply(&DualFunctional::discrete(w.clone())).unwrap();
        assert!(cw.max_coeff_diff(&w) > 1e-6);
    }
}
