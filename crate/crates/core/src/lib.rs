//! Blur-kernel estimation from the Fourier amplitude spectrum of a degraded
//! low-resolution image.
//!
//! The crate is organised bottom-up:
//!
//! * [`imaging`]: grayscale rasters, PNG ingestion and resampling.
//! * [`kernels`]: Gaussian, camera-shake and disk point-spread functions.
//! * [`degradation`]: the downsample/blur/noise forward model.
//! * [`spectral`]: DFT helpers, network input preparation and Gaussian
//!   duality fits.
//! * [`theory`]: the truncated ℓ0 shape distance and the frequency-vs-spatial
//!   comparison built on it.
//! * [`nn`]: a small reverse-mode autodiff engine with the layers, losses and
//!   optimizer needed by the estimator, plus the `S2K1` tensor file format.
//! * [`model`]: the spectrum-to-kernel generator, the conditional patch
//!   discriminator, adversarial training and inference.
//! * [`baseline`]: a learning-free Gaussian estimator based on moment fits.
//! * [`metrics`]: kernel distances and PSNR/SSIM.
//! * [`restoration`]: Wiener deconvolution and the blind restoration loop.
//! * [`scenes`]: procedural natural-image surrogates for experiments.
//! * [`dataset`]: on-disk synthetic datasets used by the CLI.
//! * [`evaluation`]: kernel and restoration scores against fixed baselines.

pub mod baseline;
pub mod dataset;
pub mod degradation;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod restoration;
pub mod scenes;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use imaging::GrayImage;
pub use kernels::{Kernel, KernelFamily, KernelParams};
pub use spectral::Spectrum;
