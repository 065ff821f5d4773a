pub mod commodity;
pub mod error;
pub mod graph;
pub mod lp;
pub mod policy;
pub mod queue;
pub mod scenario;
pub mod scalar;
pub mod sim;
pub mod wireless;

pub use error::{Error, Result};
pub use scalar::{BigRational, LpScalar, Rational};

/// Double-precision flow model solution.
pub type MinCostF64 = lp::MinCost<f64>;
/// Exact flow model solution.
pub type MinCostExact = lp::MinCost<BigRational>;
/// Exact linear program over arbitrary-precision rationals.
pub type ExactProgram = lp::LinearProgram<BigRational>;
/// Floating-point linear program.
pub type FloatProgram = lp::LinearProgram<f64>;
