//! Numerics for pluricanonical sections on hyperbolic collars.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bergman;
pub mod corona;
pub mod dbar;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod logspace;
pub mod peak;
pub mod quadrature;
pub mod sections;
pub mod weights;

pub use dbar::{DbarRhs, DbarSolution};
pub use error::{CollarError, Result};
pub use geometry::{Collar, CollarPoint};
pub use grid::YGrid;
pub use logspace::{Amplitude, LogComplex};
pub use quadrature::QuadratureSpec;
pub use sections::{CoeffMap, ModeSection};
pub use weights::WeightSpec;
