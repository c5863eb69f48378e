//! Command-line driver for the nodal quadrilateral element library:
//! convergence studies, verification certificates, mesh files.

pub mod commands;
pub mod config;
pub mod io;
pub mod parallel;
pub mod params;
pub mod report;

pub use commands::run;
