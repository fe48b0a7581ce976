//! Approximation of probability measures by measures carried by connected
//! one-dimensional sets.

pub mod error;
pub mod graph;
pub mod hull;
pub mod io;
pub mod length;
pub mod measure;
pub mod solver;
pub mod svg;
pub mod transport;
pub mod validation;

pub use error::{Error, Result};
pub use graph::{EmbeddedGraph, Projection};
pub use length::CurveMeasure;
pub use measure::{DiscreteMeasure, Point};
pub use solver::{solve, Mode, SolveResult, SolverConfig};
