//! Exact spectral computations and Monte Carlo simulation for the number of
//! value changes `C_f` of a Boolean function `f` along the continuous-time
//! p-biased random walk on `{0,1}^n`.
//!
//! Every coordinate is resampled from Bernoulli(p) at the times of an
//! independent rate-one Poisson process, starting from the product measure
//! `π_n`. The crate computes influences, Fourier–Walsh spectra and the first
//! two moments of `C_f` by several independent routes, and simulates `C_f`.

pub mod cube;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod function;
pub mod moments;
pub mod simulate;
pub mod spectral;
pub mod sum;

pub use cube::{BiasParam, Point, ProductMeasure, SubsetMask};
pub use error::{Error, Result};
pub use function::{is_increasing, BooleanFunction, FamilySpec, TruthTable};
pub use moments::{MomentReport, TruncationPolicy};
pub use simulate::{CountDistribution, McConfig, TrajectoryStats};
pub use spectral::{BasisScale, Spectrum};
