//! Fractional Brownian motion on `[0, 1]` from a truncated Haar-wavelet
//! expansion of the Mandelbrot-van Ness moving-average integral.
//!
//! ```
//! use haarfbm::{generate_path, GeneratorConfig, HurstParams};
//!
//! let cfg = GeneratorConfig::new(HurstParams::new(0.7).unwrap(), 1023, 42);
//! let path = generate_path(&[0.25, 0.5, 1.0], &cfg).unwrap();
//! assert_eq!(path.values().len(), 3);
//! ```

pub mod coefficients;
pub mod error;
pub mod expansion;
pub mod haar;
pub mod noise;
pub mod oracle;
pub mod summation;
pub mod validation;

pub use coefficients::{big_g, coeff_f1, coeff_f2, coeff_g, coeff_vector, CoefficientKind, CoefficientVector, HurstParams};
pub use error::{Error, Result};
pub use expansion::{
    generate_ensemble, generate_path, validate_times, CoefficientTable, Components, DriftCoupling, Expansion, GeneratorConfig,
    Normalization, PathSample,
};
pub use haar::{haar_antiderivative, haar_eval, haar_eval_shifted, split_index, DyadicInterval, WaveletIndex};
pub use noise::{draw_bundle, extend_bundle, inverse_normal_cdf, NoiseBundle};
pub use oracle::{cholesky_sample, exact_covariance, quad_coefficient, CholeskyEnsemble, CovarianceMatrix, QuadratureSpec};
pub use validation::{CheckRecord, RateFit, Status, ValidationReport};
