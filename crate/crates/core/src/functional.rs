//! Elements of `(W^{1,∞}₀(Ω))*`: densities, divergence-form fluxes and point
//! masses, paired against continuous piecewise polynomials.
//!
//! All pairings go through [`Moments`]: the action of the functional on every
//! local Bernstein basis function of one degree on every simplex. A continuous
//! piecewise polynomial is then paired by a dot product per simplex.

use std::sync::Arc;

use crate::mesh::{FEFunction, PiecewisePoly, SimplicialMesh};
use crate::polyref::{
    basis_len, bernstein_values, cached_indices, cached_ref_mass, degree_raise, factorial, rank_of, BPoly,
};
use crate::quadrature::simplex_rule;
use crate::{Error, Real, Result};

pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// An `L¹` part of a functional.
#[derive(Clone)]
pub enum Density<T> {
    Callable(ScalarFn<T>),
    Discrete(FEFunction<T>),
    /// Polynomial pieces on some simplices of a mesh, zero elsewhere.
    Piecewise(Arc<SimplicialMesh<T>>, PiecewisePoly<T>),
}

impl<T> std::fmt::Debug for Density<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Density::Callable(_) => write!(f, "Callable"),
            Density::Discrete(_) => write!(f, "Discrete"),
            Density::Piecewise(_, p) => write!(f, "Piecewise({} blocks)", p.blocks.len()),
        }
    }
}

/// `ξ = Σ c·f₀ − div F + Σ c_p δ_{x_p}`, acting as
/// `ξ(w) = Σ c⟨f₀,w⟩ + ⟨F,∇w⟩ + Σ c_p w(x_p)`.
#[derive(Clone, Debug, Default)]
pub struct DualFunctional<T> {
    densities: Vec<(T, Density<T>)>,
    fluxes: Vec<(T, FluxFn<T>)>,
    atoms: Vec<(Vec<T>, T)>,
}

#[derive(Clone)]
struct FluxFn<T>(VectorFn<T>);

impl<T> std::fmt::Debug for FluxFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Flux")
    }
}

impl<T: Real> DualFunctional<T> {
    pub fn density(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            densities: vec![(T::one(), Density::Callable(Arc::new(f)))],
            ..Self::default()
        }
    }

    pub fn discrete(f: FEFunction<T>) -> Self {
        Self {
            densities: vec![(T::one(), Density::Discrete(f))],
            ..Self::default()
        }
    }

    pub fn piecewise(mesh: Arc<SimplicialMesh<T>>, p: PiecewisePoly<T>) -> Self {
        Self {
            densities: vec![(T::one(), Density::Piecewise(mesh, p))],
            ..Self::default()
        }
    }

    /// `−div F`.
    pub fn flux(f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            fluxes: vec![(T::one(), FluxFn(Arc::new(f)))],
            ..Self::default()
        }
    }

    pub fn atom(x: Vec<T>, weight: T) -> Self {
        Self {
            atoms: vec![(x, weight)],
            ..Self::default()
        }
    }

    /// The zero functional (an identically zero density).
    pub fn zero() -> Self {
        Self::density(|_| T::zero())
    }

    pub fn plus(mut self, other: Self) -> Self {
        self.densities.extend(other.densities);
        self.fluxes.extend(other.fluxes);
        self.atoms.extend(other.atoms);
        self
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.densities.iter_mut().for_each(|d| d.0 *= s);
        self.fluxes.iter_mut().for_each(|d| d.0 *= s);
        self.atoms.iter_mut().for_each(|a| a.1 *= s);
        self
    }

    /// `self − f`.
    pub fn minus_discrete(mut self, f: FEFunction<T>) -> Self {
        self.densities.push((-T::one(), Density::Discrete(f)));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty() && self.fluxes.is_empty() && self.atoms.is_empty()
    }

    /// True if the functional is an `L¹` density (no flux, no atoms).
    pub fn is_density(&self) -> bool {
        self.fluxes.is_empty() && self.atoms.is_empty() && !self.densities.is_empty()
    }

    pub fn atoms(&self) -> &[(Vec<T>, T)] {
        &self.atoms
    }

    /// Pointwise value of the density part at `x`, if it has one.
    pub fn density_value(&self, x: &[T]) -> Result<T> {
        let mut s = T::zero();
        for (c, d) in &self.densities {
            s += *c * match d {
                Density::Callable(f) => f(x),
                Density::Discrete(f) => f.eval(x)?,
                Density::Piecewise(m, p) => match m.locate(x) {
                    Some((t, lam)) => p.eval_local(t, &lam),
                    None => T::zero(),
                },
            };
        }
        Ok(s)
    }

    /// `ξ(b_β)` for every degree-`degree` local Bernstein polynomial on every
    /// simplex of `mesh`. `quad_order` is the extra polynomial order spent on
    /// callable data.
    pub fn moments(&self, mesh: &SimplicialMesh<T>, degree: usize, quad_order: usize) -> Result<Moments<T>> {
        if self.is_empty() {
            return Err(Error::InvalidFunctional("functional has no parts".into()));
        }
        let d = mesh.dim();
        let len = basis_len(d, degree);
        let mut data = vec![T::zero(); len * mesh.num_simplices()];
        for (c, dens) in &self.densities {
            let part = density_moments(dens, mesh, degree, quad_order)?;
            for (a, b) in data.iter_mut().zip(part) {
                *a += *c * b;
            }
        }
        for (c, flux) in &self.fluxes {
            let part = flux_moments(&flux.0, mesh, degree, quad_order);
            for (a, b) in data.iter_mut().zip(part) {
                *a += *c * b;
            }
        }
        for (x, c) in &self.atoms {
            let (t, lam) = mesh
                .locate(x)
                .ok_or_else(|| Error::OutsideDomain(x.iter().map(|v| v.as_f64()).collect()))?;
            let vals = bernstein_values(d, degree, &lam);
            for (a, v) in data[t * len..(t + 1) * len].iter_mut().zip(vals) {
                *a += *c * v;
            }
        }
        Ok(Moments { degree, len, data })
    }

    /// `ξ(w)` for a continuous piecewise polynomial `w`.
    pub fn pair(&self, w: &FEFunction<T>, quad_order: usize) -> Result<T> {
        let mesh = w.space().mesh();
        let m = self.moments(mesh, w.space().degree(), quad_order)?;
        Ok((0..mesh.num_simplices()).map(|t| m.pair_local(t, &w.local_poly(t))).sum())
    }
}

fn density_moments<T: Real>(
    dens: &Density<T>,
    mesh: &SimplicialMesh<T>,
    degree: usize,
    quad_order: usize,
) -> Result<Vec<T>> {
    let d = mesh.dim();
    let len = basis_len(d, degree);
    let ns = mesh.num_simplices();
    let vol = T::lit(factorial(d) as f64);
    match dens {
        Density::Callable(f) => Ok(quad_moments(mesh, degree, degree + quad_order, |_, x| f(x))),
        Density::Discrete(g) => {
            let gm = g.space().mesh();
            let gk = g.space().degree();
            if gm.id() == mesh.id() {
                let mass = cached_ref_mass::<T>(d, degree, gk);
                let mut out = vec![T::zero(); len * ns];
                for t in 0..ns {
                    let gc = g.local_poly(t);
                    let s = mesh.measure(t) * vol;
                    for a in 0..len {
                        let row = mass.row(a);
                        out[t * len + a] = s * row.iter().zip(gc.coeffs()).map(|(&m, &c)| m * c).sum::<T>();
                    }
                }
                Ok(out)
            } else if mesh.ancestor_simplex(gm.id(), 0).is_some() {
                Ok(quad_moments(mesh, degree, degree + gk, |t, x| g.eval_in(mesh, t, x)))
            } else if gm.ancestor_simplex(mesh.id(), 0).is_some() {
                Ok(fine_moments(mesh, gm, degree, degree + gk, |tf, lam| g.eval_local(tf, lam)))
            } else {
                Ok(quad_moments(mesh, degree, degree + quad_order, |_, x| {
                    g.eval(x).unwrap_or(T::zero())
                }))
            }
        }
        Density::Piecewise(pm, p) => {
            if pm.id() == mesh.id() {
                let mass = cached_ref_mass::<T>(d, degree, p.degree);
                let mut out = vec![T::zero(); len * ns];
                for (t, poly) in &p.blocks {
                    let s = mesh.measure(*t) * vol;
                    for a in 0..len {
                        out[t * len + a] =
                            s * mass.row(a).iter().zip(poly.coeffs()).map(|(&m, &c)| m * c).sum::<T>();
                    }
                }
                Ok(out)
            } else if mesh.ancestor_simplex(pm.id(), 0).is_some() {
                Ok(quad_moments(mesh, degree, degree + p.degree, |t, x| {
                    let s = mesh.ancestor_simplex(pm.id(), t).expect("lineage");
                    p.eval_local(s, &pm.barycentric(s, x))
                }))
            } else if pm.ancestor_simplex(mesh.id(), 0).is_some() {
                Ok(fine_moments(mesh, pm, degree, degree + p.degree, |tf, lam| p.eval_local(tf, lam)))
            } else {
                Err(Error::InvalidFunctional(
                    "piecewise density lives on an unrelated mesh".into(),
                ))
            }
        }
    }
}

/// Per-simplex quadrature of `f(t, x)·b_β`.
fn quad_moments<T: Real>(
    mesh: &SimplicialMesh<T>,
    degree: usize,
    order: usize,
    f: impl Fn(usize, &[T]) -> T + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    let d = mesh.dim();
    let rule = simplex_rule(d, order);
    let pts: Vec<(Vec<T>, T, Vec<T>)> = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(l, &w)| {
            let lam: Vec<T> = l.iter().map(|&v| T::lit(v)).collect();
            let b = bernstein_values(d, degree, &lam);
            (lam, T::lit(w), b)
        })
        .collect();
    let len = basis_len(d, degree);
    let blocks: Vec<Vec<T>> = (0..mesh.num_simplices())
        .into_par_iter()
        .map(|t| {
            let mut out = vec![T::zero(); len];
            for (lam, w, b) in &pts {
                let x = mesh.point(t, lam);
                let v = *w * f(t, &x);
                for (o, &bb) in out.iter_mut().zip(b) {
                    *o += v * bb;
                }
            }
            let s = mesh.measure(t);
            out.iter_mut().for_each(|o| *o *= s);
            out
        })
        .collect();
    blocks.concat()
}

/// Moments on `coarse` of data living on its descendant `fine`.
fn fine_moments<T: Real>(
    coarse: &SimplicialMesh<T>,
    fine: &SimplicialMesh<T>,
    degree: usize,
    order: usize,
    f: impl Fn(usize, &[T]) -> T,
) -> Vec<T> {
    let d = coarse.dim();
    let len = basis_len(d, degree);
    let rule = simplex_rule(d, order);
    let mut out = vec![T::zero(); len * coarse.num_simplices()];
    for tf in 0..fine.num_simplices() {
        let t = fine.ancestor_simplex(coarse.id(), tf).expect("lineage");
        let s = fine.measure(tf);
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            let lam: Vec<T> = l.iter().map(|&v| T::lit(v)).collect();
            let x = fine.point(tf, &lam);
            let v = T::lit(w) * s * f(tf, &lam);
            let b = bernstein_values(d, degree, &coarse.barycentric(t, &x));
            for (o, bb) in out[t * len..(t + 1) * len].iter_mut().zip(b) {
                *o += v * bb;
            }
        }
    }
    out
}

/// `∫_T F·∇b_β` per simplex.
fn flux_moments<T: Real>(flux: &VectorFn<T>, mesh: &SimplicialMesh<T>, degree: usize, quad_order: usize) -> Vec<T> {
    use rayon::prelude::*;
    let d = mesh.dim();
    let len = basis_len(d, degree);
    let idx = cached_indices(d, degree);
    let rule = simplex_rule(d, degree + quad_order);
    // ∂b_α/∂λ_j = m·b_{α−e_j}
    let m = T::of(degree);
    let blocks: Vec<Vec<T>> = (0..mesh.num_simplices())
        .into_par_iter()
        .map(|t| {
            let g = mesh.bary_grads(t);
            let mut out = vec![T::zero(); len];
            for (l, &w) in rule.points.iter().zip(&rule.weights) {
                let lam: Vec<T> = l.iter().map(|&v| T::lit(v)).collect();
                let x = mesh.point(t, &lam);
                let fx = flux(&x);
                // F·∇λ_j
                let fg: Vec<T> = (0..=d).map(|j| (0..d).map(|c| fx[c] * g[j][c]).sum()).collect();
                let lower = if degree > 0 {
                    bernstein_values(d, degree - 1, &lam)
                } else {
                    Vec::new()
                };
                let mut down = vec![0u32; d + 1];
                for (a, alpha) in idx.iter().enumerate() {
                    let mut v = T::zero();
                    for j in 0..=d {
                        if alpha.entries()[j] == 0 {
                            continue;
                        }
                        down.copy_from_slice(alpha.entries());
                        down[j] -= 1;
                        v += fg[j] * lower[rank_of(&down)];
                    }
                    out[a] += T::lit(w) * m * v;
                }
            }
            let s = mesh.measure(t);
            out.iter_mut().for_each(|o| *o *= s);
            out
        })
        .collect();
    blocks.concat()
}

/// The action of a functional on all local Bernstein polynomials of one degree.
#[derive(Clone, Debug)]
pub struct Moments<T> {
    degree: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Real> Moments<T> {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn local(&self, t: usize) -> &[T] {
        &self.data[t * self.len..(t + 1) * self.len]
    }

    /// `ξ(p)` for a polynomial `p` on simplex `t` of degree at most the
    /// moment degree (raised as needed).
    pub fn pair_local(&self, t: usize, p: &BPoly<T>) -> T {
        let dot = |c: &[T]| c.iter().zip(self.local(t)).map(|(&a, &b)| a * b).sum();
        if p.degree() == self.degree {
            dot(p.coeffs())
        } else {
            assert!(p.degree() < self.degree, "moment degree too low");
            dot(degree_raise(p, self.degree).coeffs())
        }
    }

    /// `ξ(w)` for a piecewise polynomial (continuous where it matters).
    pub fn pair_piecewise(&self, p: &PiecewisePoly<T>) -> T {
        p.blocks.iter().map(|(t, b)| self.pair_local(*t, b)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::lagrange_space;
    use proptest::prelude::*;

    fn hat() -> FEFunction<f64> {
        let m = Arc::new(SimplicialMesh::<f64>::interval(2));
        let s = lagrange_space(&m, 1).unwrap();
        FEFunction::basis(&s, s.vertex_node(1).unwrap())
    }

    #[test]
    fn pairing_examples() {
        let w = hat();
        assert!((DualFunctional::density(|_| 1.0).pair(&w, 4).unwrap() - 0.5).abs() < 1e-14);
        assert!((DualFunctional::atom(vec![0.5], 1.0).pair(&w, 4).unwrap() - 1.0).abs() < 1e-14);
        assert!(DualFunctional::flux(|_: &[f64]| vec![1.0]).pair(&w, 4).unwrap().abs() < 1e-14);
        assert!(matches!(
            DualFunctional::atom(vec![1.5], 1.0).pair(&w, 4),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn flux_matches_integration_by_parts() {
        let m = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&m, 2).unwrap();
        let w = FEFunction::interpolate(&s, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
        // F = (x², 0) ⇒ −div F = −2x
        let a = DualFunctional::flux(|x: &[f64]| vec![x[0] * x[0], 0.0]).pair(&w, 4).unwrap();
        let b = DualFunctional::density(|x| -2.0 * x[0]).pair(&w, 4).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn discrete_density_is_exact() {
        let m = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&m, 3).unwrap();
        let f = FEFunction::interpolate(&s, |x| (2.0 * x[0]).sin() + x[1]);
        let g = FEFunction::interpolate(&s, |x| x[0] * x[1] + 1.0);
        let exact = f.inner(&g);
        let xi = DualFunctional::discrete(f.clone());
        assert!((xi.pair(&g, 0).unwrap() - exact).abs() < 1e-13);
        // across a refinement, in both directions
        let fine = Arc::new(m.uniform_refine());
        let fs = lagrange_space(&fine, 3).unwrap();
        let gf = g.transfer(&fs);
        assert!((xi.pair(&gf, 0).unwrap() - exact).abs() < 1e-13);
        let ff = f.transfer(&fs);
        assert!((DualFunctional::discrete(ff).pair(&g, 0).unwrap() - exact).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn pairing_is_bilinear(a in -2.0f64..2.0, b in -2.0f64..2.0, x0 in 0.05f64..0.95) {
            let m = Arc::new(SimplicialMesh::<f64>::interval(4));
            let s = lagrange_space(&m, 2).unwrap();
            let w1 = FEFunction::interpolate(&s, |x| x[0] * (1.0 - x[0]));
            let w2 = FEFunction::interpolate(&s, |x| (3.0 * x[0]).sin() * x[0] * (1.0 - x[0]));
            let xi = DualFunctional::density(|x: &[f64]| x[0].exp())
                .plus(DualFunctional::flux(|x: &[f64]| vec![x[0].cos()]))
                .plus(DualFunctional::atom(vec![x0], 0.7));
            let eta = DualFunctional::density(|x: &[f64]| x[0] * x[0]);
            let comb = xi.clone().scaled(a).plus(eta.clone().scaled(b));
            let lhs = comb.pair(&w1, 6).unwrap();
            let rhs = a * xi.pair(&w1, 6).unwrap() + b * eta.pair(&w1, 6).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let mut w = w1.clone();
            w.scale(a);
            w.axpy(b, &w2);
            let lhs = xi.pair(&w, 6).unwrap();
            let rhs = a * xi.pair(&w1, 6).unwrap() + b * xi.pair(&w2, 6).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
