//! Discrete `W^{-1,2}` norms: `sup ξ(v)/‖∇v‖` over the zero-trace Lagrange
//! space of degree `k+1` on the mesh refined `r` extra times. The value is a
//! lower bound of the true dual norm that increases under enrichment.

use std::sync::Arc;

use rayon::prelude::*;

use crate::functional::DualFunctional;
use crate::linalg::SparseCholesky;
use crate::mesh::{DofSet, LagrangeSpace, SimplicialMesh};
use crate::{Error, Real, Result};

/// Default number of extra uniform refinements of the evaluation mesh.
pub const DEFAULT_ENRICHMENT: usize = 2;

const QUAD_EXTRA: usize = 8;

#[derive(Debug)]
pub struct NegNormSolver<T> {
    space: Arc<LagrangeSpace<T>>,
    factor: SparseCholesky<T>,
}

impl<T: Real> NegNormSolver<T> {
    /// Evaluation space of degree `k+1` on `mesh` refined `r` times, for
    /// measuring functionals tested against degree-`k` data.
    pub fn new(mesh: &SimplicialMesh<T>, k: usize, r: usize) -> Result<Self> {
        let fine = Arc::new(mesh.refine_times(r));
        let space = LagrangeSpace::new(fine, k + 1)?;
        if space.interior_nodes().is_empty() {
            return Err(Error::InvalidMesh("evaluation space has no interior nodes".into()));
        }
        let factor = SparseCholesky::factor(&space.stiffness_matrix(DofSet::Interior))?;
        Ok(Self { space, factor })
    }

    /// Solver on the sub-mesh formed by `simplices` of `mesh`, with zero trace
    /// on the boundary of the patch.
    pub fn on_patch(mesh: &SimplicialMesh<T>, simplices: &[usize], k: usize, r: usize) -> Result<Self> {
        Self::new(&mesh.extract(simplices)?, k, r)
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    /// `sqrt(ξ(w))` where `w` is the discrete Riesz representative.
    pub fn norm(&self, xi: &DualFunctional<T>) -> Result<T> {
        let m = xi.moments(self.space.mesh(), self.space.degree(), QUAD_EXTRA)?;
        let rhs: Vec<T> = self
            .space
            .interior_nodes()
            .iter()
            .map(|&i| self.space.node_support(i).iter().map(|&(t, loc)| m.local(t)[loc]).sum())
            .collect();
        let w = self.factor.solve(&rhs);
        let e: T = rhs.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        Ok(e.max(T::zero()).sqrt())
    }
}

/// `‖ξ‖` on every vertex patch `ω_j` (or second patch `ω_j²`).
pub fn patch_norms<T: Real>(
    mesh: &SimplicialMesh<T>,
    xi: &DualFunctional<T>,
    k: usize,
    r: usize,
    second: bool,
) -> Result<Vec<T>> {
    (0..mesh.num_vertices())
        .into_par_iter()
        .map(|j| {
            let simplices = if second {
                mesh.second_patch(j)
            } else {
                mesh.vertex_patch(j).to_vec()
            };
            NegNormSolver::on_patch(mesh, &simplices, k, r)?.norm(xi)
        })
        .collect()
}

/// `(Σ_j v_j^p)^{1/p}`.
pub fn localized_sum<T: Real>(values: &[T], p: T) -> T {
    values.iter().map(|v| v.abs().powf(p)).sum::<T>().powf(T::one() / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_unit_interval() {
        let m = SimplicialMesh::<f64>::interval(4);
        let exact = 1.0 / (2.0 * 3f64.sqrt());
        let mut last = 0.0;
        for r in 0..=3 {
            let v = NegNormSolver::new(&m, 1, r).unwrap().norm(&DualFunctional::density(|_| 1.0)).unwrap();
            assert!(v >= last - 1e-14 && v <= exact + 1e-12, "r={r} v={v} last={last}");
            if r == DEFAULT_ENRICHMENT {
                assert!((v - exact).abs() < 1e-4, "{v}");
            }
            last = v;
        }
        let z = NegNormSolver::new(&m, 1, 2).unwrap().norm(&DualFunctional::zero()).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn single_interval_patch_scaling() {
        let m = SimplicialMesh::<f64>::interval(4);
        let h = 0.25f64;
        let v = NegNormSolver::on_patch(&m, &[1], 1, 3)
            .unwrap()
            .norm(&DualFunctional::density(|_| 1.0))
            .unwrap();
        assert!((v - h.powf(1.5) / (2.0 * 3f64.sqrt())).abs() < 1e-6);
        let all: Vec<usize> = (0..4).collect();
        let a = NegNormSolver::on_patch(&m, &all, 1, 2).unwrap().norm(&DualFunctional::density(|x: &[f64]| x[0].sin())).unwrap();
        let b = NegNormSolver::new(&m, 1, 2).unwrap().norm(&DualFunctional::density(|x: &[f64]| x[0].sin())).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn localized_sum_examples() {
        assert_eq!(localized_sum::<f64>(&[0.0, 0.0], 2.0), 0.0);
        assert!((localized_sum::<f64>(&[0.0, 2.5], 2.0) - 2.5).abs() < 1e-15);
        assert!((localized_sum::<f64>(&[3.0, 4.0], 2.0) - 5.0).abs() < 1e-14);
    }
}
