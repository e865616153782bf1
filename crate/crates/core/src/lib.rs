//! Implicit maximum likelihood estimation (IMLE) and its rejection-sampling
//! variant (RS-IMLE) on low-dimensional toy data.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`tensor`], [`net`] | dense matrices, MLP generator, reverse mode, Adam |
//! | [`nn_index`] | distances, epsilon filtering, nearest-sample assignment, random projection |
//! | [`sampler`] | Gaussian prior and epsilon-rejection sampling of latent codes |
//! | [`trainer`] | IMLE / RS-IMLE epochs and test-time evaluation |
//! | [`theory`] | order statistics of nearest-sample distances, checked by Monte Carlo |
//! | [`datasets`] | toy 2D shapes and CSV I/O |
//! | [`metrics`] | Fréchet distance of Gaussian fits, k-NN precision/recall |
//! | [`runner`] | config files, experiment orchestration, CSV/SVG artifacts |

pub mod datasets;
pub mod error;
pub mod metrics;
pub mod net;
pub mod nn_index;
pub mod quad;
pub mod runner;
pub mod sampler;
pub mod tensor;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use net::{Activation, GeneratorNet};
pub use tensor::Tensor2;
