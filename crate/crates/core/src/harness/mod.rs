//! Configuration, fitting, run records, and the acceptance criteria.

pub mod config;
pub mod criteria;
pub mod fit;
pub mod run;
