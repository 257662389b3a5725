use super::{FEFunction, SimplicialMesh};
use crate::Real;

/// Quadrature order used when a discrete function meets arbitrary data.
pub fn default_order(degree: usize) -> usize {
    2 * degree + 6
}

/// `‖f‖_{L²(Ω)}` by quadrature on `mesh`.
pub fn l2_norm_fn<T: Real>(mesh: &SimplicialMesh<T>, order: usize, f: impl Fn(&[T]) -> T + Sync) -> T {
    mesh.integrate(order, |_, _, x| {
        let v = f(x);
        v * v
    })
    .sqrt()
}

/// `|f|_{H¹(Ω)}` from a gradient callable.
pub fn h1_semi_fn<T: Real>(mesh: &SimplicialMesh<T>, order: usize, grad: impl Fn(&[T]) -> Vec<T> + Sync) -> T {
    mesh.integrate(order, |_, _, x| grad(x).iter().map(|&g| g * g).sum())
        .sqrt()
}

pub fn l2_norm<T: Real>(f: &FEFunction<T>) -> T {
    f.inner(f).max(T::zero()).sqrt()
}

pub fn h1_seminorm<T: Real>(f: &FEFunction<T>) -> T {
    let mesh = f.space().mesh();
    mesh.integrate(2 * f.space().degree(), |t, lam, _| {
        f.grad_local(t, lam).iter().map(|&g| g * g).sum()
    })
    .max(T::zero())
    .sqrt()
}

/// `‖f_h − u‖_{L²}`, integrated on the mesh of `f_h`.
pub fn l2_error<T: Real>(fh: &FEFunction<T>, order: usize, u: impl Fn(&[T]) -> T + Sync) -> T {
    let mesh = fh.space().mesh();
    mesh.integrate(order, |t, lam, x| {
        let e = fh.eval_local(t, lam) - u(x);
        e * e
    })
    .sqrt()
}

/// `|f_h − u|_{H¹}` given `∇u`.
pub fn h1_error<T: Real>(fh: &FEFunction<T>, order: usize, grad_u: impl Fn(&[T]) -> Vec<T> + Sync) -> T {
    let mesh = fh.space().mesh();
    mesh.integrate(order, |t, lam, x| {
        let g = fh.grad_local(t, lam);
        g.iter().zip(grad_u(x)).map(|(&a, b)| (a - b) * (a - b)).sum()
    })
    .sqrt()
}

/// `‖a − b‖_{L²}` for functions on meshes related by refinement, integrated
/// on `host`, which must refine both.
pub fn l2_diff<T: Real>(host: &SimplicialMesh<T>, order: usize, a: &FEFunction<T>, b: &FEFunction<T>) -> T {
    host.integrate(order, |t, _, x| {
        let e = a.eval_in(host, t, x) - b.eval_in(host, t, x);
        e * e
    })
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::lagrange_space;
    use std::sync::Arc;

    #[test]
    fn norms_of_simple_functions() {
        let m = Arc::new(SimplicialMesh::<f64>::square(2));
        let s = lagrange_space(&m, 2).unwrap();
        let f = FEFunction::interpolate(&s, |x| x[0] * x[0]);
        assert!((l2_norm(&f) - (0.2f64).sqrt()).abs() < 1e-14);
        assert!((h1_seminorm(&f) - (4.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!(l2_error(&f, 6, |x| x[0] * x[0]) < 1e-14);
        assert!(h1_error(&f, 6, |x| vec![2.0 * x[0], 0.0]) < 1e-13);
        assert!((l2_norm_fn(&m, 8, |x| x[0] * x[1]) - 1.0 / 3.0).abs() < 1e-14);
        assert!((h1_semi_fn(&m, 8, |x| vec![x[1], x[0]]) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn diff_on_common_refinement() {
        let m = Arc::new(SimplicialMesh::<f64>::interval(2));
        let fine = Arc::new(m.uniform_refine());
        let a = FEFunction::interpolate(&lagrange_space(&m, 1).unwrap(), |x| x[0] * x[0]);
        let fs = lagrange_space(&fine, 1).unwrap();
        let b = FEFunction::interpolate(&fs, |x| x[0] * x[0]);
        let direct = {
            let at = a.transfer(&fs);
            let mut d = at.clone();
            d.axpy(-1.0, &b);
            l2_norm(&d)
        };
        assert!((l2_diff(&fine, 6, &a, &b) - direct).abs() < 1e-14);
        assert!(direct > 1e-3);
    }
}
