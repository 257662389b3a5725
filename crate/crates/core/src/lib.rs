//! Quasi-interpolation onto Lagrange finite element spaces of arbitrary degree
//! with continuous, locally supported biorthogonal weights.
//!
//! The weights are piecewise polynomials of degree `3k` dual to the degree-`k`
//! Bernstein basis. Because they are continuous and vanish on the boundary, the
//! resulting projections are well defined for functionals in `W^{-1,2}` and
//! larger dual spaces (point masses, divergence-form data).
//!
//! Everything numeric is generic over a [`Real`] scalar (`f32` or `f64`);
//! the `*64` aliases at the crate root fix the scalar to `f64`, which is what the
//! verification tolerances are calibrated for.

pub mod alt_ops;
pub mod dualbasis;
mod error;
pub mod experiments;
pub mod functional;
pub mod linalg;
pub mod mesh;
pub mod negnorm;
pub mod polyref;
pub mod quadrature;
pub mod sz_ops;
pub mod timespace;

pub use error::{Error, Result};

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar field used throughout the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the two supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("f64 literal")
    }

    #[inline]
    fn of(n: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(n).expect("usize literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type BPoly64 = polyref::BPoly<f64>;
pub type DualBasisTable64 = dualbasis::DualBasisTable<f64>;
pub type Mesh64 = mesh::SimplicialMesh<f64>;
pub type LagrangeSpace64 = mesh::LagrangeSpace<f64>;
pub type FEFunction64 = mesh::FEFunction<f64>;
pub type DualFunctional64 = functional::DualFunctional<f64>;
pub type GlobalDualBasis64 = sz_ops::GlobalDualBasis<f64>;
pub type CorrectedDualBasis64 = sz_ops::CorrectedDualBasis<f64>;
pub type Projections64 = sz_ops::Projections<f64>;
pub type NegNormSolver64 = negnorm::NegNormSolver<f64>;
