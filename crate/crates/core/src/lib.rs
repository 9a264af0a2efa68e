//! Weighted multi-Toeplitz operators on truncated tensor Fock spaces.
//!
//! The crate builds the finite compressions of the weighted creation
//! operators of noncommutative poly-hyperballs, detects and synthesizes
//! weighted multi-Toeplitz operators, checks the Brown-Halmos equations,
//! decomposes operators into multi-homogeneous parts and evaluates Berezin
//! transforms at matrix tuples.
//!
//! Numeric code is generic over [`scalar::Real`]; the aliases below fix
//! `f64`.

pub mod berezin;
pub mod error;
pub mod exact;
pub mod fock;
pub mod io;
pub mod operators;
pub mod random;
pub mod scalar;
pub mod sparse;
pub mod suite;
pub mod toeplitz;
pub mod words;

pub use error::{Error, Result};
pub use exact::SqrtRatio;
pub use fock::{weight_b, GradedBasis, TruncationSpec};
pub use words::{DegreeVector, MultiWord, Word};

pub type Operator = operators::MatrixOperator<f64>;
pub type Matrix = scalar::CMatrix<f64>;
pub type Sym = toeplitz::Symbol<f64>;
pub type Point = berezin::PointTuple<f64>;
pub type Kernel = berezin::BerezinKernel<f64>;
