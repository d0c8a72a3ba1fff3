//! Relational linear programs: LP templates grounded against logical
//! knowledge bases, solved directly or after lifting by color passing.

pub mod ground;
pub mod lifting;
pub mod lp;
pub mod logkb;
pub mod pipeline;
pub mod rlp;
pub mod scalar;
pub mod syntax;

pub use scalar::{Rational, Scalar};

/// Dual-form LP over exact rationals.
pub type ExactLp = lp::DualFormLp<Rational>;
/// Dual-form LP over `f64`.
pub type FloatLp = lp::DualFormLp<f64>;
pub type ExactSolution = lp::Solution<Rational>;
pub type FloatSolution = lp::Solution<f64>;
pub type ExactLiftedLp = lifting::LiftedLp<Rational>;
pub type FloatLiftedLp = lifting::LiftedLp<f64>;
