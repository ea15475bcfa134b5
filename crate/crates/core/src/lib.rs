//! Matrix-valued time-and-band limiting on spheres.
//!
//! A 2x2 matrix weight W_{p,n} on [−1, 1] carries a family of monic matrix
//! orthogonal polynomials R_w built from Gegenbauer polynomials and their
//! orthonormal versions Q_w. Truncating expansions to degree N and
//! restricting to the cap [−1, α] yields an integral operator S with kernel
//! k(x, y) = Σ_{w≤N} Q_w(x)* Q_w(y). The second-order operator D̃ commutes
//! with S, and its spread-out spectrum is used to compute the eigenfunctions
//! of S stably.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! verification tolerances assume.

pub mod error;
pub mod gegenbauer;
pub mod linalg;
pub mod matpoly;
pub mod operators;
pub mod quadrature;
pub mod scalar;
pub mod timeband;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{BlockMat, Mat2, SquareMat};
pub use matpoly::{MatPoly, Params, PolyFamily};
pub use operators::{RightDiffOp, Weight};
pub use quadrature::{Domain, QuadRule, WeightedQuadrature};
pub use scalar::Scalar;
pub use timeband::{CoeffVec, SpectrumReport, TbConfig, TimeBand};

pub type Mat2f64 = Mat2<f64>;
pub type Mat2f32 = Mat2<f32>;
pub type BlockMat64 = BlockMat<f64>;
pub type MatPoly64 = MatPoly<f64>;
pub type MatPoly32 = MatPoly<f32>;
pub type Params64 = Params<f64>;
pub type Params32 = Params<f32>;
pub type PolyFamily64 = PolyFamily<f64>;
pub type RightDiffOp64 = RightDiffOp<f64>;
pub type QuadRule64 = QuadRule<f64>;
pub type TbConfig64 = TbConfig<f64>;
pub type TimeBand64 = TimeBand<f64>;
pub type CoeffVec64 = CoeffVec<f64>;
