//! Coverage of aerial and ground users in a cellular network where a fraction
//! of the base stations tilt their antennas upward.

pub mod analytic;
pub mod cli;
pub mod model;
pub mod montecarlo;
