pub mod cli;
pub mod error;
pub mod graph;
pub mod growth;
pub mod io;
pub mod lp;
pub mod mdist;
pub mod matrix;
pub mod pmetric;
pub mod polytope;
pub mod rng;
pub mod spectra;
pub mod stats;
pub mod universality;

pub use error::{Error, Result};
pub use matrix::{AmalgamationInterval, DistanceMatrix, UpperBound, ValidationReport, DEFAULT_TOL};
