//! Shrinkage covariance estimation for high-dimensional time series.
//!
//! The sample covariance `Σ̂ₙ` is combined with a tapered (banded) estimator
//! `Σ̂†` and a Toeplitz estimator `Σ̂⋄` through a weight `w` in the
//! 2-simplex. Data-driven weights come from a small quadratic program whose
//! coefficients are plug-in risk estimates. The same three estimators drive a
//! CUSUM test for a break in `vᵀΣₜv`, calibrated by a block multiplier
//! bootstrap.
//!
//! Modules:
//! - [`linalg`]: symmetric matrices, the scaled Frobenius geometry, projection
//!   weights, simplex weights
//! - [`estimators`]: sample, tapered, Toeplitz and shrinkage estimators
//! - [`weights`]: risk estimates and the simplex QP
//! - [`changepoint`]: CUSUM statistic and bootstrap test
//! - [`simulate`]: Models A, B and C
//! - [`bench`]: manifest-driven Monte Carlo studies
//!
//! ```
//! use covshrink::{EstimatorSet, Simplex3Weight, TaperSpec, TimeSeriesSample};
//!
//! let x = TimeSeriesSample::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0], vec![0.2, -0.3]])?;
//! let spec = TaperSpec::uniform(2.0)?;
//! let est = EstimatorSet::from_data(&x, &spec);
//! let shrunk = est.combine(&Simplex3Weight::new(0.3, 0.3, 0.4)?);
//! assert_eq!(shrunk.dim(), 2);
//! # Ok::<(), covshrink::CovError>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod changepoint;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod simulate;
pub mod weights;

pub use changepoint::{
    changepoint_test, cusum_stat, cusum_sup, BlockLength, BootstrapConfig, TestResult, WeightChoice,
};
pub use error::{CovError, Result};
pub use estimators::{
    default_thresholds, partial_sample_cov, shrink_combine, taper_estimator, toeplitz_estimator,
    EstimatorSet, TaperSpec, ThresholdMode, TimeSeriesSample,
};
pub use linalg::{
    build_projection_weights, scaled_inner, scaled_norm, simplex_grid, ProjectionVector,
    ProjectionWeights, Simplex3Weight, SymMatrix,
};
pub use weights::{optimal_weights, risk_components, LrvConfig, RiskComponents};
