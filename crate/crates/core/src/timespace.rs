//! Space-time operators: the time operator `Π_t` (boundary-corrected, no
//! zero-trace constraint), the spatial operator `Π_x = Π₀` applied per time
//! sample, their composition `Π_⊗`, and the averaged Taylor polynomial.

use std::sync::Arc;

use rayon::prelude::*;

use crate::functional::DualFunctional;
use crate::mesh::{h1_error, l2_error, FEFunction, LagrangeSpace, SimplicialMesh};
use crate::polyref::{bernstein_values, binomial, factorial};
use crate::quadrature::gauss_legendre;
use crate::sz_ops::Projections;
use crate::{Error, Real, Result};

/// Gauss points per time interval used for sampling: `2k_t + 4`.
pub fn gauss_points_per_interval(k_t: usize) -> usize {
    2 * k_t + 4
}

/// Time samples with quadrature weights.
#[derive(Clone, Debug)]
pub struct TimeGrid<T> {
    pub mesh: Arc<SimplicialMesh<T>>,
    pub times: Vec<T>,
    pub weights: Vec<T>,
    /// interval of `mesh` holding each sample
    pub interval: Vec<usize>,
}

impl<T: Real> TimeGrid<T> {
    /// `n` Gauss–Legendre points on every interval of a 1D mesh.
    pub fn gauss(mesh: &Arc<SimplicialMesh<T>>, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut times = Vec::new();
        let mut weights = Vec::new();
        let mut interval = Vec::new();
        for t in 0..mesh.num_simplices() {
            let s = mesh.simplex(t);
            let (a, b) = (mesh.vertex(s[0])[0], mesh.vertex(s[1])[0]);
            for (&xi, &wi) in x.iter().zip(&w) {
                times.push(a + (b - a) * T::lit(xi));
                weights.push((b - a) * T::lit(wi));
                interval.push(t);
            }
        }
        Self {
            mesh: mesh.clone(),
            times,
            weights,
            interval,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Samples `v(t_q, ·)` of a space-time function as spatial Lagrange functions.
#[derive(Clone, Debug)]
pub struct TensorFunction<T> {
    pub grid: Arc<TimeGrid<T>>,
    pub space: Arc<LagrangeSpace<T>>,
    pub samples: Vec<FEFunction<T>>,
}

impl<T: Real> TensorFunction<T> {
    pub fn sample(grid: &Arc<TimeGrid<T>>, space: &Arc<LagrangeSpace<T>>, f: impl Fn(T, &[T]) -> T + Sync) -> Self {
        let samples = grid
            .times
            .par_iter()
            .map(|&t| FEFunction::interpolate(space, |x| f(t, x)))
            .collect();
        Self {
            grid: grid.clone(),
            space: space.clone(),
            samples,
        }
    }

    pub fn from_samples(grid: &Arc<TimeGrid<T>>, space: &Arc<LagrangeSpace<T>>, samples: Vec<FEFunction<T>>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} time points",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            space: space.clone(),
            samples,
        })
    }

    /// `‖v − u‖_{L²(J;L²(Ω))}` against an exact `u(t, x)`.
    pub fn l2l2_error(&self, order: usize, u: impl Fn(T, &[T]) -> T + Sync) -> T {
        self.samples
            .par_iter()
            .zip(&self.grid.times)
            .zip(&self.grid.weights)
            .map(|((s, &t), &w)| {
                let e = l2_error(s, order, |x| u(t, x));
                w * e * e
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum::<T>()
            .sqrt()
    }

    /// `‖∇_x(v − u)‖_{L²(J;L²(Ω))}` against an exact spatial gradient.
    pub fn l2h1_error(&self, order: usize, grad_u: impl Fn(T, &[T]) -> Vec<T> + Sync) -> T {
        self.samples
            .par_iter()
            .zip(&self.grid.times)
            .zip(&self.grid.weights)
            .map(|((s, &t), &w)| {
                let e = h1_error(s, order, |x| grad_u(t, x));
                w * e * e
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum::<T>()
            .sqrt()
    }

    /// `‖v‖_{L²(J;L²(Ω))}`.
    pub fn l2l2_norm(&self) -> T {
        self.samples
            .iter()
            .zip(&self.grid.weights)
            .map(|(s, &w)| w * s.inner(s))
            .sum::<T>()
            .sqrt()
    }

    pub fn max_coeff_diff(&self, other: &Self) -> T {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(T::zero(), T::max)
    }
}

/// The time partition with its degree-`k_t` Lagrange space and weights.
#[derive(Clone, Debug)]
pub struct TimeMesh<T> {
    ops: Projections<T>,
}

impl<T: Real> TimeMesh<T> {
    pub fn new(mesh: &Arc<SimplicialMesh<T>>, k_t: usize) -> Result<Self> {
        if mesh.dim() != 1 {
            return Err(Error::DimensionMismatch("time meshes are one-dimensional".into()));
        }
        let space = LagrangeSpace::new(mesh.clone(), k_t)?;
        Ok(Self {
            ops: Projections::new(&space)?,
        })
    }

    /// `n` equal intervals of `(0, t_end)`.
    pub fn uniform(t_end: T, n: usize, k_t: usize) -> Result<Self> {
        let pts: Vec<T> = (0..=n).map(|i| t_end * T::of(i) / T::of(n)).collect();
        Self::new(&Arc::new(SimplicialMesh::interval_from_points(&pts)?), k_t)
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh<T>> {
        self.ops.space().mesh()
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        self.ops.space()
    }

    pub fn projections(&self) -> &Projections<T> {
        &self.ops
    }

    /// `h_K / |ω_K|` for every interval, `ω_K` the intervals touching `K`.
    pub fn shape_ratios(&self) -> Vec<T> {
        let m = self.mesh();
        (0..m.num_simplices())
            .map(|t| m.measure(t) / m.simplex_patch(t).iter().map(|&s| m.measure(s)).sum::<T>())
            .collect()
    }

    fn locate(&self, grid: &TimeGrid<T>, q: usize) -> (usize, Vec<T>) {
        let m = self.mesh();
        let x = [grid.times[q]];
        match grid.mesh.ancestor_simplex(m.id(), grid.interval[q]) {
            Some(s) => (s, m.barycentric(s, &x)),
            None => m.locate(&x).expect("sample inside the time interval"),
        }
    }

    /// `w_q ψ_{t,i}(t_q)` as rows over samples.
    fn weight_rows(&self, grid: &TimeGrid<T>) -> Vec<Vec<(usize, T)>> {
        let space = self.space();
        (0..grid.len())
            .map(|q| {
                let (s, lam) = self.locate(grid, q);
                space
                    .local_nodes(s)
                    .iter()
                    .map(|&i| (i, grid.weights[q] * self.ops.corrected().weight(i).eval_local(s, &lam)))
                    .collect()
            })
            .collect()
    }

    /// `b_{t,i}(t_q)` as rows over samples.
    fn basis_rows(&self, grid: &TimeGrid<T>) -> Vec<Vec<(usize, T)>> {
        let space = self.space();
        (0..grid.len())
            .map(|q| {
                let (s, lam) = self.locate(grid, q);
                let b = bernstein_values(1, space.degree(), &lam);
                space.local_nodes(s).iter().copied().zip(b).collect()
            })
            .collect()
    }

    /// `⟨v(·,x), ψ_{t,i}⟩_J` for every time node, as spatial functions.
    pub fn coefficients(&self, v: &TensorFunction<T>) -> Vec<FEFunction<T>> {
        let mut out = vec![FEFunction::zero(&v.space); self.space().num_nodes()];
        for (q, row) in self.weight_rows(&v.grid).into_iter().enumerate() {
            for (i, w) in row {
                out[i].axpy(w, &v.samples[q]);
            }
        }
        out
    }

    /// Time expansion `Σ_i b_{t,i}(t) c_i` sampled on `grid`.
    pub fn expand(&self, coeffs: &[FEFunction<T>], grid: &Arc<TimeGrid<T>>) -> Result<TensorFunction<T>> {
        let space = coeffs
            .first()
            .map(|c| c.space().clone())
            .ok_or_else(|| Error::DimensionMismatch("no time coefficients".into()))?;
        let samples = self
            .basis_rows(grid)
            .into_iter()
            .map(|row| {
                let mut s = FEFunction::zero(&space);
                for (i, b) in row {
                    s.axpy(b, &coeffs[i]);
                }
                s
            })
            .collect();
        TensorFunction::from_samples(grid, &space, samples)
    }

    /// `Π_t v` on the grid of `v`.
    pub fn apply(&self, v: &TensorFunction<T>) -> Result<TensorFunction<T>> {
        self.expand(&self.coefficients(v), &v.grid)
    }
}

/// `Π_x v`: the zero-trace operator `Π₀` in space at every time sample.
pub fn apply_pi_x<T: Real>(v: &TensorFunction<T>, space_ops: &Projections<T>) -> Result<TensorFunction<T>> {
    let samples: Result<Vec<_>> = v
        .samples
        .par_iter()
        .map(|s| space_ops.apply_pi0(&DualFunctional::discrete(s.clone())))
        .collect();
    TensorFunction::from_samples(&v.grid, space_ops.space(), samples?)
}

/// Coefficients `∬ v ψ_{t,i} ψ_{x,j}` of `Π_⊗ v` over `N_t × N°_x`, indexed by
/// time node and interior spatial node.
pub fn apply_pi_tensor<T: Real>(v: &TensorFunction<T>, time: &TimeMesh<T>, space_ops: &Projections<T>) -> Result<Vec<Vec<T>>> {
    let coeffs = time.coefficients(v);
    coeffs
        .par_iter()
        .map(|c| Ok(space_ops.apply_pi0(&DualFunctional::discrete(c.clone()))?.interior_values()))
        .collect()
}

/// Samples of `Σ_{i,j} C_{ij} b_{t,i} b_{x,j}` on `grid`.
pub fn tensor_eval<T: Real>(
    coeffs: &[Vec<T>],
    time: &TimeMesh<T>,
    space: &Arc<LagrangeSpace<T>>,
    grid: &Arc<TimeGrid<T>>,
) -> Result<TensorFunction<T>> {
    let fe: Vec<FEFunction<T>> = coeffs.iter().map(|c| FEFunction::from_interior(space, c)).collect();
    time.expand(&fe, grid)
}

/// Averaged Taylor polynomial of order `s` on an interval, averaged against
/// the bump `η(σ) = C·exp(−1/(1−u²))`, `u = (σ−c)/ρ`, centred at the
/// midpoint `c` with half-width `ρ` a quarter of the interval length.
#[derive(Clone, Debug)]
pub struct AvgTaylor<T> {
    a: T,
    b: T,
    order: usize,
    center: T,
    radius: T,
    scale: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

/// Composite Gauss rule on `(−1, 1)`: 64 pieces × 20 points.
const BUMP_PIECES: usize = 64;
const BUMP_POINTS: usize = 20;

impl<T: Real> AvgTaylor<T> {
    pub fn new(a: T, b: T, order: usize) -> Result<Self> {
        if b <= a {
            return Err(Error::InvalidMesh("empty interval".into()));
        }
        let (x, w) = gauss_legendre(BUMP_POINTS);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let h = 2.0 / BUMP_PIECES as f64;
        for p in 0..BUMP_PIECES {
            let lo = -1.0 + p as f64 * h;
            for (&xi, &wi) in x.iter().zip(&w) {
                nodes.push(T::lit(lo + h * xi));
                weights.push(T::lit(h * wi));
            }
        }
        let mass: T = nodes
            .iter()
            .zip(&weights)
            .map(|(&u, &w)| w * (-T::one() / (T::one() - u * u)).exp())
            .sum();
        let radius = (b - a) / T::lit(4.0);
        Ok(Self {
            a,
            b,
            order,
            center: (a + b) / T::lit(2.0),
            radius,
            scale: T::one() / (mass * radius),
            nodes,
            weights,
        })
    }

    pub fn interval(&self) -> (T, T) {
        (self.a, self.b)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn center(&self) -> T {
        self.center
    }

    /// Derivatives `η^{(r)}(σ)`, `r = 0..=n`.
    pub fn bump_derivatives(&self, sigma: T, n: usize) -> Vec<T> {
        let u = (sigma - self.center) / self.radius;
        if u.abs() >= T::one() {
            return vec![T::zero(); n + 1];
        }
        // Taylor coefficients in u of −1/(1−u²), then of its exponential
        let base = [T::one() - u * u, -T::lit(2.0) * u, -T::one()];
        let mut recip = vec![T::zero(); n + 1];
        recip[0] = T::one() / base[0];
        for k in 1..=n {
            let mut s = T::zero();
            for j in 1..=k.min(2) {
                s += base[j] * recip[k - j];
            }
            recip[k] = -s / base[0];
        }
        let g: Vec<T> = recip.iter().map(|&r| -r).collect();
        let mut e = vec![T::zero(); n + 1];
        e[0] = g[0].exp();
        for k in 1..=n {
            let mut s = T::zero();
            for j in 1..=k {
                s += T::of(j) * g[j] * e[k - j];
            }
            e[k] = s / T::of(k);
        }
        (0..=n)
            .map(|r| self.scale * e[r] * T::lit(factorial(r) as f64) / self.radius.powi(r as i32))
            .collect()
    }

    pub fn bump(&self, sigma: T) -> T {
        self.bump_derivatives(sigma, 0)[0]
    }

    /// `∫ η` by the internal rule.
    pub fn bump_mass(&self) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * self.radius * self.bump(self.center + self.radius * u))
            .sum()
    }

    /// Coefficients `a_m` of `T^s v(τ) = Σ_m a_m (τ − c)^m`, from the
    /// derivative-free form `∫ v(σ) Σ_ℓ (−1)^ℓ/ℓ! ∂_σ^ℓ[(τ−σ)^ℓ η(σ)] dσ`.
    pub fn apply(&self, v: impl Fn(T) -> T) -> Vec<T> {
        let s = self.order;
        let mut a = vec![T::zero(); s + 1];
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            let y = self.radius * u;
            let eta = self.bump_derivatives(self.center + y, s);
            let vy = v(self.center + y) * w * self.radius;
            for (m, am) in a.iter_mut().enumerate() {
                let mut kern = T::zero();
                for l in m..=s {
                    let n = l - m;
                    let mut inner = T::zero();
                    for r in 0..=n {
                        // ∂^r (−y)^n
                        let dr = T::lit(if n % 2 == 0 { 1.0 } else { -1.0 })
                            * T::lit((factorial(n) / factorial(n - r)) as f64)
                            * y.powi((n - r) as i32);
                        inner += T::lit(binomial(l, r) as f64) * dr * eta[l - r];
                    }
                    let sign = if l % 2 == 0 { T::one() } else { -T::one() };
                    kern += sign / T::lit(factorial(l) as f64) * T::lit(binomial(l, m) as f64) * inner;
                }
                *am += vy * kern;
            }
        }
        a
    }

    pub fn eval(&self, coeffs: &[T], tau: T) -> T {
        let x = tau - self.center;
        coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }
}
