//! Kernel distances and image-quality scores.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Value returned by [`psnr`] for identical images.
pub const PSNR_CAP: f64 = 100.0;
pub const DS_EPS: f64 = 1e-12;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn same_shape(x: &Array2<f64>, y: &Array2<f64>, what: &str) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Mean absolute difference `(1/(h·w)) Σ |x - y|`.
pub fn dv(x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    same_shape(x, y, "dv")?;
    let total: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / x.len() as f64)
}

/// Relative shape distance `Σ x·ln((x+ε)/(y+ε))`; terms with `x = 0`
/// contribute nothing. By convention `x` is the ground truth.
pub fn ds(x: &Array2<f64>, y: &Array2<f64>, eps: f64) -> Result<f64> {
    same_shape(x, y, "ds")?;
    if x.iter().chain(y.iter()).any(|&v| v < 0.0) {
        return Err(Error::invalid("ds needs nonnegative entries"));
    }
    Ok(x.iter()
        .zip(y.iter())
        .filter(|(&a, _)| a != 0.0)
        .map(|(&a, &b)| a * ((a + eps) / (b + eps)).ln())
        .sum())
}

fn mse(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    same_shape(x.pixels(), y.pixels(), "image comparison")?;
    let total: f64 = x
        .pixels()
        .iter()
        .zip(y.pixels().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(total / x.pixels().len() as f64)
}

/// Peak signal-to-noise ratio for unit peak, capped at [`PSNR_CAP`].
pub fn psnr(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    let m = mse(x, y)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> Array2<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w = Array2::from_shape_fn((SSIM_WINDOW, SSIM_WINDOW), |(r, col)| {
        let (dy, dx) = (r as f64 - c, col as f64 - c);
        (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let s = w.sum();
    w / s
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), averaged over
/// window positions that lie fully inside the image.
pub fn ssim(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    same_shape(x.pixels(), y.pixels(), "ssim")?;
    let (h, w) = x.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let win = gaussian_window();
    let (xp, yp) = (x.pixels(), y.pixels());
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut total = 0.0;
    for r in 0..oh {
        for c in 0..ow {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ((i, j), &g) in win.indexed_iter() {
                let (a, b) = (xp[[r + i, c + j]], yp[[r + i, c + j]]);
                mx += g * a;
                my += g * b;
                sxx += g * a * a;
                syy += g * b * b;
                sxy += g * a * b;
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
        }
    }
    Ok(total / (oh * ow) as f64)
}
