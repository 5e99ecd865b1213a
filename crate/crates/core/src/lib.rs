//! Confidence intervals for solutions of stochastic variational inequalities
//! estimated by sample average approximation.

pub mod bench;
pub mod box_qp;
pub mod dense;
pub mod error;
pub mod gauss;
pub mod inference;
pub mod io;
pub mod normal_map;
pub mod polyhedral;
pub mod pwnormal;
pub mod report;
pub mod special;
pub mod svi;

pub use error::{Error, Result};
