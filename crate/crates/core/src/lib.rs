//! Parametric ROC analysis and cost-weighted optimal cutoffs for two-group
//! biomarker data modelled by skew-normal or skew-t laws.
//!
//! The pieces, bottom up: [`dist`] (densities, distribution functions,
//! sampling), [`fit`] (maximum likelihood and information matrices),
//! [`roc`] (ROC curve, AUC, Youden), [`cutoff`] (risk, estimating function,
//! optimal cutoff), [`inference`] (delta-method variance and Wald intervals),
//! [`sim`] (Monte Carlo harness) and [`pipeline`] (end-to-end analyses).

// `!(x < y)` is used on purpose: it is also true when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoff;
pub mod dist;
pub mod error;
pub mod fit;
pub mod inference;
pub mod numeric;
pub mod pipeline;
pub mod roc;
pub mod sim;

pub use cutoff::{AdmissibleInterval, CutoffResult, DecisionConfig};
pub use dist::{DistSpec, Family, Theta};
pub use error::{Error, Result};
pub use fit::{GroupFit, JointCovariance};
pub use inference::CutoffInference;
