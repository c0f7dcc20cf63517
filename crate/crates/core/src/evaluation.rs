//! Kernel and end-to-end restoration scores for one estimate against the
//! fixed bicubic-approximant kernel and the ground truth.

use crate::dataset::DatasetSample;
use crate::error::Result;
use crate::kernels::{gaussian_kernel, GaussianParams, Kernel};
use crate::metrics::{ds, dv, psnr, ssim, DS_EPS};
use crate::restoration::blind_sr;

pub const RESULTS_HEADER: [&str; 14] = [
    "id",
    "family",
    "dv_s2k",
    "ds_s2k",
    "psnr_s2k",
    "ssim_s2k",
    "dv_bicubic",
    "ds_bicubic",
    "psnr_bicubic",
    "ssim_bicubic",
    "dv_gt",
    "ds_gt",
    "psnr_gt",
    "ssim_gt",
];

/// Isotropic Gaussian with `sigma = 0.5 * scale`, the usual stand-in for a
/// bicubic degradation.
pub fn bicubic_approximant(scale: usize, size: usize) -> Result<Kernel> {
    let sigma = 0.5 * scale as f64;
    gaussian_kernel(
        &GaussianParams {
            sigma_x: sigma,
            sigma_y: sigma,
            theta: 0.0,
        },
        size,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub dv: f64,
    pub ds: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl Scores {
    pub fn fields(&self) -> [f64; 4] {
        [self.dv, self.ds, self.psnr, self.ssim]
    }
}

/// Kernel distances to the truth and quality of `blind_sr` against the HR image.
pub fn score(sample: &DatasetSample, k: &Kernel, scale: usize, nsr: f64) -> Result<Scores> {
    let sr = blind_sr(&sample.lr, k, scale, nsr)?;
    Ok(Scores {
        dv: dv(sample.kernel.values(), k.values())?,
        ds: ds(sample.kernel.values(), k.values(), DS_EPS)?,
        psnr: psnr(&sr, &sample.hr)?,
        ssim: ssim(&sr, &sample.hr)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub estimated: Scores,
    pub bicubic: Scores,
    pub ground_truth: Scores,
}

pub fn evaluate_sample(sample: &DatasetSample, k_est: &Kernel, scale: usize, nsr: f64) -> Result<EvalRow> {
    let bicubic = bicubic_approximant(scale, sample.kernel.size())?;
    Ok(EvalRow {
        estimated: score(sample, k_est, scale, nsr)?,
        bicubic: score(sample, &bicubic, scale, nsr)?,
        ground_truth: score(sample, &sample.kernel, scale, nsr)?,
    })
}

impl EvalRow {
    pub fn values(&self) -> Vec<f64> {
        [self.estimated, self.bicubic, self.ground_truth]
            .iter()
            .flat_map(|s| s.fields())
            .collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
