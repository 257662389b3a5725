//! Gauss rules on the interval and on simplices in barycentric form.
//!
//! Weights are normalized to sum to one, so `∫_T f ≈ |T| Σ w_q f(x_q)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre nodes and weights on `[0, 1]`, weights summing to one.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for root i of P_n on [-1, 1]
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (x, w)
}

/// A quadrature rule on the reference `d`-simplex.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub d: usize,
    /// Barycentric coordinates, `d+1` per point.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn build_rule(d: usize, order: usize) -> SimplexRule {
    match d {
        1 => {
            let (x, w) = gauss_legendre(order / 2 + 1);
            SimplexRule {
                d,
                points: x.iter().map(|&t| vec![1.0 - t, t]).collect(),
                weights: w,
            }
        }
        2 => {
            // collapsed tensor rule: λ1 = u, λ2 = (1-u) v, Jacobian (1-u)
            let n = (order + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&u, &wu) in x.iter().zip(&w) {
                for (&v, &wv) in x.iter().zip(&w) {
                    let l1 = u;
                    let l2 = (1.0 - u) * v;
                    points.push(vec![1.0 - l1 - l2, l1, l2]);
                    weights.push(2.0 * wu * wv * (1.0 - u));
                }
            }
            SimplexRule { d, points, weights }
        }
        _ => panic!("quadrature only for d in 1..=2"),
    }
}

/// Rule exact for polynomials of total degree `order`, cached.
pub fn simplex_rule(d: usize, order: usize) -> Arc<SimplexRule> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SimplexRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry((d, order))
        .or_insert_with(|| Arc::new(build_rule(d, order)))
        .clone()
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        let mut s = 0.0;
        for (&xi, &wi) in x.iter().zip(&w) {
            s += wi * f(lo + xi * h);
        }
        acc += s * h;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyref::{factorial, multi_indices};

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(&t, &wi)| wi * t.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn simplex_rules_integrate_monomials() {
        for d in 1..=2 {
            for order in 0..=12 {
                let rule = simplex_rule(d, order);
                for m in 0..=order {
                    for g in multi_indices(d, m) {
                        // ∫ λ^γ over T̂ divided by |T̂| = d! γ!/(|γ|+d)!
                        let exact = g
                            .entries()
                            .iter()
                            .fold(factorial(d) as f64, |a, &e| a * factorial(e as usize) as f64)
                            / factorial(m + d) as f64;
                        let q: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(l, &w)| {
                                w * l
                                    .iter()
                                    .zip(g.entries())
                                    .map(|(&li, &e)| li.powi(e as i32))
                                    .product::<f64>()
                            })
                            .sum();
                        assert!((q - exact).abs() < 1e-13, "d={d} order={order} {:?}", g);
                    }
                }
            }
        }
    }

    #[test]
    fn composite_integral() {
        let v = integrate_interval(|x| x.sin(), 0.0, std::f64::consts::PI, 4, 8);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
