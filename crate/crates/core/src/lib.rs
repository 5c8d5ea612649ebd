//! Fully-connected networks whose hidden weights are built from pairs of
//! training points instead of being trained by gradient descent.
//!
//! Each hidden neuron takes a pair `(x1, x2)` of inputs (or of the previous
//! layer's outputs), points its weight along `x2 − x1` and places its
//! activation's steepest region between the two points. Pairs are drawn with
//! probability proportional to how fast the target changes between them.
//! Only the linear readout is solved, by ridge regression.
//!
//! ```
//! use swimnet::{fit, ActivationKind, FitConfig, Matrix};
//!
//! let x = Matrix::from_fn(200, 1, |i, _| i as f64 / 100.0 - 1.0);
//! let y = Matrix::from_fn(200, 1, |i, _| (3.0 * x.get(i, 0)).sin());
//! let cfg = FitConfig::new(vec![64], ActivationKind::Tanh).with_seed(1);
//! let net = fit(&x, &y, &cfg).unwrap();
//! let pred = net.forward(&x).unwrap();
//! assert!(pred.max_abs_diff(&y) < 1e-2);
//! ```

pub mod baseline;
pub mod benchmark;
pub mod dataio;
pub mod error;
pub mod network;
pub mod numerics;
pub mod sampler;

pub use baseline::{fit_random_features, BaselineConfig};
pub use error::{Error, Result};
pub use network::{Activation, ActivationKind, LayerParams, OutputLayer, SampledNetwork};
pub use numerics::{matmul, solve_ridge, Matrix, RidgeSolution};
pub use sampler::{fit, FitConfig, Norm};
