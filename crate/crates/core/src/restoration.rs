//! Non-blind restoration: Wiener deconvolution followed by bicubic upsampling.

use ndarray::Zip;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imaging::{upsample_bicubic, GrayImage};
use crate::kernels::Kernel;
use crate::spectral::{fft2, ifft2, pad_kernel_wrapped};

/// Default noise-to-signal ratio for noiseless synthetic inputs.
pub const DEFAULT_NSR: f64 = 1e-3;

/// Applies `conj(H)/(|H|² + nsr)` in the frequency domain and clamps the
/// result to `[0, 1]`.
///
/// The DC bin is passed through with gain `1/H(0)` so the image mean is kept
/// for any `nsr`; bins where the denominator vanishes are zeroed.
pub fn wiener_deconvolve(img: &GrayImage, k: &Kernel, nsr: f64) -> Result<GrayImage> {
    if !(nsr >= 0.0) {
        return Err(Error::invalid(format!("nsr must be >= 0, got {nsr}")));
    }
    let (h, w) = img.dims();
    let kernel_ft = fft2(&pad_kernel_wrapped(k, h, w)?);
    let mut spectrum = fft2(img.pixels());
    let dc_gain = kernel_ft[[0, 0]];
    Zip::from(&mut spectrum).and(&kernel_ft).for_each(|g, &hk| {
        let denom = hk.norm_sqr() + nsr;
        *g = if denom > 0.0 && denom.is_finite() {
            *g * hk.conj() / denom
        } else {
            Complex64::new(0.0, 0.0)
        };
    });
    if dc_gain.norm() > 0.0 {
        spectrum[[0, 0]] = fft2(img.pixels())[[0, 0]] / dc_gain;
    }
    let out = ifft2(&spectrum).mapv(|c| c.re.clamp(0.0, 1.0));
    GrayImage::from_array(out)
}

/// Blind super-resolution with a given kernel estimate: deconvolve, then
/// upsample by `scale`.
pub fn blind_sr(img_lr: &GrayImage, k_est: &Kernel, scale: usize, nsr: f64) -> Result<GrayImage> {
    let sharp = wiener_deconvolve(img_lr, k_est, nsr)?;
    upsample_bicubic(&sharp, scale)
}
