//! Stability certification for two-time-scale switched and impulsive linear
//! systems.

pub mod certify;
pub mod config;
pub mod decouple;
pub mod linalg;
pub mod model;
pub mod simulate;
pub mod tol;
