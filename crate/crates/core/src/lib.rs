//! Outlier-robust regression of multivariate polynomials on [-1,1]^n.
//!
//! Samples `(x, y)` are labelled by an unknown polynomial of individual degree
//! `d` up to bounded noise `σ`, except that each label is replaced by an
//! arbitrary value with probability `ρ < 1/2`. Recovery bins the samples on a
//! Chebyshev grid, takes per-cell medians of the residuals and fits them with
//! a minimax LP, iterating until the error contracts to about `2σ`.

pub mod error;
pub mod lowerbounds;
pub mod lp;
pub mod norms;
pub mod partition;
pub mod poly;
pub mod quadrature;
pub mod regression;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use partition::{alpha_for_rho, AaBox, AlphaReport, CellIndex, ChebPartition, Distribution};
pub use poly::{Basis, MultiPoly, UniPoly};
pub use regression::{FitReport, RecoveryConfig, Variant};
pub use sampling::{Adversary, InlierNoise, NoiseModel, Points, SampleSet};
