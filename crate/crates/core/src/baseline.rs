//! Learning-free Gaussian kernel estimation from spectral moments.
//!
//! The LR amplitude spectrum is whitened by a radial natural-image prior, a
//! Gaussian is fitted to what remains, and the spectral widths are inverted
//! through the duality constants.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::kernels::{gaussian_kernel, GaussianParams, Kernel};
use crate::spectral::{amplitude_spectrum_with, fit_spectrum_gaussian, DualityConstants, Spectrum};

/// Accepted range of estimated spatial widths, in pixels.
pub const SIGMA_RANGE: (f64, f64) = (0.5, 5.0);

/// Radial amplitude model of the unblurred image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudePrior {
    /// White carrier: no whitening.
    Flat,
    /// `A(r) ∝ (r + 1)^-exponent`, `r` in bins from DC.
    InverseRadial { exponent: f64 },
}

impl AmplitudePrior {
    fn gain(&self, r: f64) -> f64 {
        match *self {
            AmplitudePrior::Flat => 1.0,
            AmplitudePrior::InverseRadial { exponent } => (r + 1.0).powf(exponent),
        }
    }
}

fn radius(r: usize, c: usize, dc: (usize, usize)) -> f64 {
    let (dy, dx) = (r as f64 - dc.0 as f64, c as f64 - dc.1 as f64);
    (dx * dx + dy * dy).sqrt()
}

/// Least-squares slope of `log A` against `log(r + 1)` over all non-DC bins
/// of the given clean images, returned as an [`AmplitudePrior::InverseRadial`].
pub fn fit_radial_prior(images: &[GrayImage]) -> Result<AmplitudePrior> {
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for img in images {
        let spec = amplitude_spectrum_with(img, true);
        let dc = spec.dc();
        let lim = spec.height().min(spec.width()) as f64 / 2.0;
        for ((r, c), &a) in spec.values().indexed_iter() {
            let d = radius(r, c, dc);
            if d == 0.0 || d > lim || a <= 0.0 {
                continue;
            }
            let (x, y) = ((d + 1.0).ln(), a.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            n += 1.0;
        }
    }
    let denom = n * sxx - sx * sx;
    if n < 2.0 || denom <= 0.0 {
        return Err(Error::EstimationFailed("not enough spectral samples to fit a prior".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    Ok(AmplitudePrior::InverseRadial { exponent: -slope })
}

/// Mean-removed amplitude spectrum multiplied by the inverse prior.
pub fn whitened_spectrum(img: &GrayImage, prior: AmplitudePrior) -> Result<Spectrum> {
    let spec = amplitude_spectrum_with(img, true);
    let dc = spec.dc();
    let data = Array2::from_shape_fn(spec.values().dim(), |(r, c)| {
        spec.values()[[r, c]] * prior.gain(radius(r, c, dc))
    });
    Spectrum::from_array(data)
}

/// Fitted spatial widths before kernel synthesis.
pub fn estimate_gaussian_params(
    img_lr: &GrayImage,
    consts: &DualityConstants,
    prior: AmplitudePrior,
) -> Result<GaussianParams> {
    img_lr.ensure_pipeline_size()?;
    let fit = fit_spectrum_gaussian(&whitened_spectrum(img_lr, prior)?)?;
    let sigma_x = consts.c1 / fit.sigma_u;
    let sigma_y = consts.c2 / fit.sigma_v;
    for s in [sigma_x, sigma_y] {
        if !(SIGMA_RANGE.0..=SIGMA_RANGE.1).contains(&s) {
            return Err(Error::OutOfModel(format!(
                "estimated sigma {s:.3} outside [{}, {}]",
                SIGMA_RANGE.0, SIGMA_RANGE.1
            )));
        }
    }
    // Spatial and spectral covariances share eigenvectors, so the fitted axis
    // angle carries over unchanged.
    Ok(GaussianParams {
        sigma_x,
        sigma_y,
        theta: fit.theta.rem_euclid(std::f64::consts::TAU),
    })
}

/// Closed-form Gaussian kernel estimate of size `native_size`.
pub fn estimate_gaussian_spectral(
    img_lr: &GrayImage,
    consts: &DualityConstants,
    native_size: usize,
    prior: AmplitudePrior,
) -> Result<Kernel> {
    let p = estimate_gaussian_params(img_lr, consts, prior)?;
    gaussian_kernel(&p, native_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::{convolve2d, Boundary};
    use crate::scenes::dead_leaves;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn white_noise(n: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(n, n, |_| rng.random())
    }

    fn blurred(n: usize, sx: f64, sy: f64, theta: f64, seed: u64) -> GrayImage {
        let k = gaussian_kernel(
            &GaussianParams {
                sigma_x: sx,
                sigma_y: sy,
                theta,
            },
            31,
        )
        .unwrap();
        convolve2d(&white_noise(n, seed), &k, Boundary::Circular).unwrap()
    }

    #[test]
    fn isotropic_white_noise() {
        let img = blurred(128, 2.0, 2.0, 0.0, 1);
        let c = DualityConstants::analytic(128, 128);
        let p = estimate_gaussian_params(&img, &c, AmplitudePrior::Flat).unwrap();
        assert!((1.8..=2.2).contains(&p.sigma_x), "{p:?}");
        assert!((1.8..=2.2).contains(&p.sigma_y), "{p:?}");
        assert!((p.sigma_x - p.sigma_y).abs() / p.sigma_x < 0.1);
        let k = estimate_gaussian_spectral(&img, &c, 15, AmplitudePrior::Flat).unwrap();
        assert!((k.values().sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn anisotropic_axes_invert() {
        let img = blurred(128, 1.0, 3.0, 0.0, 2);
        let spec = whitened_spectrum(&img, AmplitudePrior::Flat).unwrap();
        let fit = fit_spectrum_gaussian(&spec).unwrap();
        // Kernel wide along y -> spectrum narrow along v.
        assert!(fit.sigma_v < fit.sigma_u, "{fit:?}");
        let p = estimate_gaussian_params(&img, &DualityConstants::analytic(128, 128), AmplitudePrior::Flat).unwrap();
        assert!(p.sigma_x < p.sigma_y);
    }

    #[test]
    fn fitted_width_decreases_with_blur() {
        let widths: Vec<f64> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&s| {
                let spec = whitened_spectrum(&blurred(128, s, s, 0.0, 3), AmplitudePrior::Flat).unwrap();
                fit_spectrum_gaussian(&spec).unwrap().sigma_u
            })
            .collect();
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn radial_prior_on_scenes() {
        let scenes: Vec<GrayImage> = (0..4).map(|i| dead_leaves(64, i)).collect();
        let AmplitudePrior::InverseRadial { exponent } = fit_radial_prior(&scenes).unwrap() else {
            panic!("expected a radial prior");
        };
        assert!((0.5..2.5).contains(&exponent), "{exponent}");
        assert!(fit_radial_prior(&[]).is_err());
    }

    #[test]
    fn out_of_model_is_reported() {
        // A flat image has no spectral energy outside DC.
        let err = estimate_gaussian_params(
            &GrayImage::filled(32, 32, 0.5),
            &DualityConstants::analytic(32, 32),
            AmplitudePrior::Flat,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EstimationFailed(_)));
        // Unblurred white noise has a flat spectrum, i.e. a sub-pixel kernel.
        let err = estimate_gaussian_params(
            &white_noise(64, 4),
            &DualityConstants::analytic(64, 64),
            AmplitudePrior::Flat,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfModel(_)));
    }
}
