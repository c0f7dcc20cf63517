//! DFT helpers, amplitude spectra and Gaussian duality.
//!
//! Forward transforms are unnormalised; inverse transforms divide by the
//! number of samples.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imaging::{resize_array_bilinear, GrayImage};
use crate::kernels::{gaussian_kernel, GaussianParams, Kernel};
use crate::nn::TensorRecord;

/// Input sizes accepted by [`prepare_net_input`].
pub const NET_INPUT_SIZES: [usize; 4] = [32, 64, 128, 256];

/// A DC-centred amplitude (or log-amplitude) spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    data: Array2<f64>,
}

impl Spectrum {
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("spectrum has a zero dimension"));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("spectrum entries must be finite and nonnegative".into()));
        }
        Ok(Self { data })
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Index of the DC bin after shifting.
    pub fn dc(&self) -> (usize, usize) {
        (self.height() / 2, self.width() / 2)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_record(&self, name: &str) -> Result<TensorRecord> {
        TensorRecord::from_f64(
            name,
            vec![self.height(), self.width()],
            self.data.as_slice().expect("standard layout"),
        )
    }
}

fn transform_rows(data: &mut Array2<Complex64>, inverse: bool, planner: &mut FftPlanner<f64>) {
    let w = data.ncols();
    let fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let buf = data.as_slice_mut().expect("standard layout");
    fft.process(buf);
}

fn transform(data: &mut Array2<Complex64>, inverse: bool) {
    let mut planner = FftPlanner::new();
    transform_rows(data, inverse, &mut planner);
    let mut t = data.t().as_standard_layout().into_owned();
    transform_rows(&mut t, inverse, &mut planner);
    data.assign(&t.t());
}

/// Unnormalised forward 2-D DFT of a real array.
pub fn fft2(x: &Array2<f64>) -> Array2<Complex64> {
    let mut c = x.mapv(|v| Complex64::new(v, 0.0));
    transform(&mut c, false);
    c
}

/// Forward 2-D DFT of a complex array.
pub fn fft2_complex(x: &Array2<Complex64>) -> Array2<Complex64> {
    let mut c = x.as_standard_layout().into_owned();
    transform(&mut c, false);
    c
}

/// Inverse 2-D DFT including the `1/(h·w)` factor.
pub fn ifft2(x: &Array2<Complex64>) -> Array2<Complex64> {
    let mut c = x.as_standard_layout().into_owned();
    transform(&mut c, true);
    let scale = 1.0 / c.len() as f64;
    c.mapv_inplace(|v| v * scale);
    c
}

fn roll<T: Clone>(x: &Array2<T>, dr: usize, dc: usize) -> Array2<T> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(r, c)| x[[(r + h - dr) % h, (c + w - dc) % w]].clone())
}

/// Moves the zero-frequency bin to `(h/2, w/2)`.
pub fn fftshift<T: Clone>(x: &Array2<T>) -> Array2<T> {
    let (h, w) = x.dim();
    roll(x, h / 2, w / 2)
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: Clone>(x: &Array2<T>) -> Array2<T> {
    let (h, w) = x.dim();
    roll(x, h - h / 2, w - w / 2)
}

/// DC-centred DFT modulus of `x`.
pub fn amplitude_of(x: &Array2<f64>) -> Array2<f64> {
    fftshift(&fft2(x).mapv(|c| c.norm()))
}

/// Amplitude spectrum of an image.
pub fn amplitude_spectrum(img: &GrayImage) -> Spectrum {
    amplitude_spectrum_with(img, false)
}

/// Amplitude spectrum, optionally of the mean-subtracted image.
pub fn amplitude_spectrum_with(img: &GrayImage, subtract_mean: bool) -> Spectrum {
    let mut x = img.pixels().clone();
    if subtract_mean {
        let m = img.mean();
        x.mapv_inplace(|v| v - m);
    }
    Spectrum {
        data: amplitude_of(&x),
    }
}

/// Zero-pads `k` to `h`×`w` with its centre moved to index `(0, 0)`; the
/// parts at negative offsets wrap to the far edges.
pub fn pad_kernel_wrapped(k: &Kernel, h: usize, w: usize) -> Result<Array2<f64>> {
    let size = k.size();
    if size > h || size > w {
        return Err(Error::invalid(format!("{size}x{size} kernel does not fit {h}x{w}")));
    }
    let c = k.center() as isize;
    let mut out = Array2::<f64>::zeros((h, w));
    for ((i, j), &v) in k.values().indexed_iter() {
        let r = (i as isize - c).rem_euclid(h as isize) as usize;
        let col = (j as isize - c).rem_euclid(w as isize) as usize;
        out[[r, col]] = v;
    }
    Ok(out)
}

/// Zero-pads `k` to `h`×`w` with its centre at `(h/2, w/2)`.
pub fn pad_kernel_centered(k: &Kernel, h: usize, w: usize) -> Result<Array2<f64>> {
    Ok(fftshift(&pad_kernel_wrapped(k, h, w)?))
}

/// Circular convolution through the DFT product.
pub fn spectral_convolve(img: &GrayImage, k: &Kernel) -> Result<GrayImage> {
    let (h, w) = img.dims();
    let kp = pad_kernel_wrapped(k, h, w)?;
    let mut spectrum = fft2(img.pixels());
    Zip::from(&mut spectrum).and(&fft2(&kp)).for_each(|a, &b| *a *= b);
    GrayImage::from_array(ifft2(&spectrum).mapv(|c| c.re))
}

/// Network input: square centre crop, amplitude spectrum, optional
/// `log(1 + A)`, division by the maximum and bilinear resize to
/// `out_size`×`out_size`. The result is rescaled once more after the resize
/// so its maximum is exactly 1.
pub fn prepare_net_input(img_lr: &GrayImage, out_size: usize, log_scale: bool) -> Result<Spectrum> {
    if !NET_INPUT_SIZES.contains(&out_size) {
        return Err(Error::invalid(format!(
            "network input size {out_size} is not one of {NET_INPUT_SIZES:?}"
        )));
    }
    img_lr.ensure_pipeline_size()?;
    let (h, w) = img_lr.dims();
    let side = h.min(w);
    let square = img_lr.center_crop(side, side)?;
    let mut a = amplitude_spectrum(&square).into_array();
    if log_scale {
        a.mapv_inplace(f64::ln_1p);
    }
    normalize_max(&mut a);
    let mut resized = if side == out_size {
        a
    } else {
        resize_array_bilinear(&a, out_size, out_size)
    };
    normalize_max(&mut resized);
    Spectrum::from_array(resized)
}

fn normalize_max(a: &mut Array2<f64>) {
    let m = a.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        a.mapv_inplace(|v| v / m);
    }
}

/// Principal-axis Gaussian fit of a spectrum, in bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGaussian {
    /// Width along the axis at angle `theta` from the horizontal-frequency axis.
    pub sigma_u: f64,
    /// Width along the perpendicular axis.
    pub sigma_v: f64,
    /// Axis angle in `(-π/4, π/4]`.
    pub theta: f64,
}

/// Weighted second-moment fit of the squared amplitude about the DC bin.
///
/// For `A = exp(-d²/(2σ²))` the weight `A²` has variance `σ²/2`, so each
/// principal width is `sqrt(2·λ)`. The axis labelled `u` is the one closer to
/// the horizontal frequency axis.
pub fn fit_spectrum_gaussian(spec: &Spectrum) -> Result<SpectrumGaussian> {
    let (dr, dc) = spec.dc();
    let (mut total, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0);
    for ((r, c), &a) in spec.values().indexed_iter() {
        let weight = a * a;
        let u = c as f64 - dc as f64;
        let v = r as f64 - dr as f64;
        total += weight;
        suu += weight * u * u;
        svv += weight * v * v;
        suv += weight * u * v;
    }
    if !(total > 0.0) {
        return Err(Error::EstimationFailed("spectrum carries no energy".into()));
    }
    let (suu, svv, suv) = (suu / total, svv / total, suv / total);
    let mut theta = 0.5 * (2.0 * suv).atan2(suu - svv);
    let along = |t: f64| suu * t.cos().powi(2) + 2.0 * suv * t.sin() * t.cos() + svv * t.sin().powi(2);
    if theta > PI / 4.0 {
        theta -= PI / 2.0;
    } else if theta <= -PI / 4.0 {
        theta += PI / 2.0;
    }
    let lu = along(theta);
    let lv = along(theta + PI / 2.0);
    if !(lu > 0.0 && lv > 0.0) {
        return Err(Error::EstimationFailed(format!(
            "non-positive spectral moments ({lu}, {lv})"
        )));
    }
    Ok(SpectrumGaussian {
        sigma_u: (2.0 * lu).sqrt(),
        sigma_v: (2.0 * lv).sqrt(),
        theta,
    })
}

/// Products `σ_u·σ_x` (horizontal) and `σ_v·σ_y` (vertical) linking spatial
/// and spectral Gaussian widths for a given DFT size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityConstants {
    pub c1: f64,
    pub c2: f64,
}

/// Spatial widths used by [`DualityConstants::calibrate`].
pub const CALIBRATION_SIGMAS: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];

/// Kernel support used for calibration; wide enough that a σ = 3 Gaussian is
/// not truncated.
pub const CALIBRATION_KERNEL_SIZE: usize = 31;

impl DualityConstants {
    /// Continuous Fourier-transform value: `N/(2π)` for an `N`-bin axis.
    pub fn analytic(height: usize, width: usize) -> Self {
        Self {
            c1: width as f64 / (2.0 * PI),
            c2: height as f64 / (2.0 * PI),
        }
    }

    /// Measures the constants by fitting padded isotropic Gaussians.
    pub fn calibrate(height: usize, width: usize) -> Result<Self> {
        let products = duality_products(height, width, &CALIBRATION_SIGMAS)?;
        let n = products.len() as f64;
        let c1 = products.iter().map(|p| p.0).sum::<f64>() / n;
        let c2 = products.iter().map(|p| p.1).sum::<f64>() / n;
        Ok(Self { c1, c2 })
    }
}

/// `(σ_u·σ, σ_v·σ)` for each isotropic spatial width `σ`.
pub fn duality_products(height: usize, width: usize, sigmas: &[f64]) -> Result<Vec<(f64, f64)>> {
    sigmas
        .iter()
        .map(|&s| {
            let k = gaussian_kernel(
                &GaussianParams {
                    sigma_x: s,
                    sigma_y: s,
                    theta: 0.0,
                },
                CALIBRATION_KERNEL_SIZE,
            )?;
            let spec = Spectrum::from_array(amplitude_of(&pad_kernel_wrapped(&k, height, width)?))?;
            let fit = fit_spectrum_gaussian(&spec)?;
            Ok((fit.sigma_u * s, fit.sigma_v * s))
        })
        .collect()
}
