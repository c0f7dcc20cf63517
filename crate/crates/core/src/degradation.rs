//! The forward model `I_LR = (I_HR ↓s) ⊗ k + n`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::{downsample_bicubic, mirror_index, GrayImage};
use crate::kernels::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Indices wrap around, so convolution matches the DFT product exactly.
    #[default]
    Circular,
    /// Half-sample symmetric mirroring.
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    DownsampleThenConvolve,
    ConvolveThenDownsample,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::DownsampleThenConvolve => "downsample-then-convolve",
            Order::ConvolveThenDownsample => "convolve-then-downsample",
        })
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "downsample-then-convolve" => Ok(Order::DownsampleThenConvolve),
            "convolve-then-downsample" => Ok(Order::ConvolveThenDownsample),
            other => Err(Error::invalid(format!("unknown degradation order `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationConfig {
    pub scale: usize,
    pub order: Order,
    pub boundary: Boundary,
    pub noise_sigma: f64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self {
            scale: 2,
            order: Order::default(),
            boundary: Boundary::default(),
            noise_sigma: 0.0,
        }
    }
}

impl DegradationConfig {
    pub fn with_scale(scale: usize) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.scale) {
            return Err(Error::invalid(format!("scale {} is not in 1..=4", self.scale)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}

/// Same-size convolution `out[y, x] = Σ k[i, j] · img[y - i + c, x - j + c]`
/// where `c` is the kernel centre.
pub fn convolve2d(img: &GrayImage, k: &Kernel, boundary: Boundary) -> Result<GrayImage> {
    let (h, w) = img.dims();
    let size = k.size();
    if size > h || size > w {
        return Err(Error::invalid(format!(
            "{size}x{size} kernel does not fit a {h}x{w} image"
        )));
    }
    let c = k.center() as isize;
    let wrap = |i: isize, n: usize| match boundary {
        Boundary::Circular => i.rem_euclid(n as isize) as usize,
        Boundary::Reflect => mirror_index(i, n),
    };
    let src = img.pixels();
    let kv = k.values();
    let taps: Vec<(isize, isize, f64)> = kv
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j), &v)| (c - i as isize, c - j as isize, v))
        .collect();
    let mut out = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for &(dy, dx, v) in &taps {
                acc += v * src[[wrap(y as isize + dy, h), wrap(x as isize + dx, w)]];
            }
            out[[y, x]] = acc;
        }
    }
    GrayImage::from_array(out)
}

/// Adds i.i.d. Gaussian noise drawn from a seeded stream.
pub fn add_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.pixels().clone();
    out.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
    GrayImage::from_array(out)
}

/// Downsamples, blurs and adds noise in the configured order; the result is
/// clamped to `[0, 1]`. Images whose sides are not multiples of the scale are
/// centre-cropped first.
pub fn degrade(img: &GrayImage, k: &Kernel, cfg: &DegradationConfig, seed: u64) -> Result<GrayImage> {
    cfg.validate()?;
    let blurred = match cfg.order {
        Order::DownsampleThenConvolve => {
            let small = downsample_bicubic(img, cfg.scale, true)?;
            convolve2d(&small, k, cfg.boundary)?
        }
        Order::ConvolveThenDownsample => {
            let cropped = img.crop_to_multiple(cfg.scale)?;
            let sharp = convolve2d(&cropped, k, cfg.boundary)?;
            if cfg.scale == 1 {
                sharp
            } else {
                downsample_bicubic(&sharp, cfg.scale, false)?
            }
        }
    };
    Ok(add_noise(&blurred, cfg.noise_sigma, seed)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gaussian_kernel, GaussianParams};
    use rand::Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(h, w, |_| rng.random())
    }

    fn gaussian(sigma: f64) -> Kernel {
        gaussian_kernel(
            &GaussianParams {
                sigma_x: sigma,
                sigma_y: sigma,
                theta: 0.0,
            },
            15,
        )
        .unwrap()
    }

    #[test]
    fn delta_is_identity() {
        let img = random_image(20, 24, 1);
        for b in [Boundary::Circular, Boundary::Reflect] {
            assert_eq!(convolve2d(&img, &Kernel::delta(5).unwrap(), b).unwrap(), img);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(32, 32, 0.37);
        for b in [Boundary::Circular, Boundary::Reflect] {
            let out = convolve2d(&img, &gaussian(2.3), b).unwrap();
            assert!(out.pixels().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn is_a_true_convolution() {
        // A one-hot kernel off centre shifts the image *towards* that offset.
        let mut data = Array2::<f64>::zeros((3, 3));
        data[[1, 2]] = 1.0;
        let k = Kernel::new(data).unwrap();
        let img = random_image(16, 16, 2);
        let out = convolve2d(&img, &k, Boundary::Circular).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(out.get(y, x), img.get(y, (x + 15) % 16));
            }
        }
    }

    #[test]
    fn reflect_boundary_mirrors() {
        let mut data = Array2::<f64>::zeros((3, 3));
        data[[1, 2]] = 1.0;
        let k = Kernel::new(data).unwrap();
        let img = random_image(16, 16, 3);
        let out = convolve2d(&img, &k, Boundary::Reflect).unwrap();
        for y in 0..16 {
            assert_eq!(out.get(y, 0), img.get(y, 0));
            assert_eq!(out.get(y, 5), img.get(y, 4));
        }
    }

    #[test]
    fn circular_preserves_mean() {
        let img = random_image(40, 36, 4);
        let out = convolve2d(&img, &gaussian(1.7), Boundary::Circular).unwrap();
        assert!((out.mean() - img.mean()).abs() < 1e-12);
    }

    #[test]
    fn kernel_must_fit() {
        let img = random_image(10, 30, 5);
        assert!(convolve2d(&img, &gaussian(1.0), Boundary::Circular).is_err());
    }

    #[test]
    fn degrade_identity_and_determinism() {
        let img = random_image(32, 32, 6);
        let cfg = DegradationConfig::with_scale(1);
        assert_eq!(degrade(&img, &Kernel::delta(3).unwrap(), &cfg, 0).unwrap(), img);
        let noisy = DegradationConfig {
            noise_sigma: 0.02,
            ..DegradationConfig::with_scale(2)
        };
        let a = degrade(&img, &gaussian(1.5), &noisy, 9).unwrap();
        let b = degrade(&img, &gaussian(1.5), &noisy, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, degrade(&img, &gaussian(1.5), &noisy, 10).unwrap());
        assert!(a.min() >= 0.0 && a.max() <= 1.0);
    }

    #[test]
    fn degrade_composes_its_stages() {
        let ramp = GrayImage::from_fn(128, 128, |(r, c)| (r + c) as f64 / 254.0);
        let k = gaussian(2.0);
        let got = degrade(&ramp, &k, &DegradationConfig::with_scale(2), 0).unwrap();
        let small = downsample_bicubic(&ramp, 2, false).unwrap();
        let expected = convolve2d(&small, &k, Boundary::Circular).unwrap().clamped();
        assert_eq!(got, expected);
        assert_eq!(got.dims(), (64, 64));
    }

    #[test]
    fn reversed_order_at_unit_scale_is_plain_convolution() {
        let img = random_image(30, 30, 7);
        let k = gaussian(1.2);
        let cfg = DegradationConfig {
            order: Order::ConvolveThenDownsample,
            ..DegradationConfig::with_scale(1)
        };
        let expected = convolve2d(&img, &k, Boundary::Circular).unwrap();
        assert_eq!(degrade(&img, &k, &cfg, 0).unwrap(), expected.clamped());
    }

    #[test]
    fn config_validation() {
        assert!(DegradationConfig::with_scale(5).validate().is_err());
        let bad = DegradationConfig {
            noise_sigma: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("convolve-then-downsample".parse::<Order>().unwrap(), Order::ConvolveThenDownsample);
    }
}
