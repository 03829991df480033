//! Numerical building blocks: special functions, quadrature, Richardson
//! differentiation, root finding and quasi-Newton minimisation.

pub mod bfgs;
pub mod quad;
pub mod richardson;
pub mod roots;
pub mod special;

pub use richardson::Richardson;
