//! Truncated ℓ0 shape distance and the frequency-vs-spatial comparison.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};

use crate::degradation::{degrade, DegradationConfig};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::kernels::{Kernel, KernelParams};
use crate::spectral::{amplitude_of, pad_kernel_centered, pad_kernel_wrapped};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the largest magnitude.
    #[default]
    Peak1,
    /// Divide by the Euclidean norm.
    Energy1,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Peak1 => "peak1",
            Normalization::Energy1 => "energy1",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak1" => Ok(Normalization::Peak1),
            "energy1" => Ok(Normalization::Energy1),
            other => Err(Error::invalid(format!("unknown normalization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeConfig {
    pub tau: f64,
    pub normalization: Normalization,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            normalization: Normalization::Peak1,
        }
    }
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// `0` where `|x| < tau`, `|x|` elsewhere.
pub fn truncate(x: &Array2<f64>, tau: f64) -> Array2<f64> {
    x.mapv(|v| if v.abs() < tau { 0.0 } else { v.abs() })
}

/// Number of entries surviving [`truncate`].
pub fn support(x: &Array2<f64>, tau: f64) -> usize {
    x.iter().filter(|v| v.abs() >= tau).count()
}

/// Scales `x` per `norm`; an all-zero input is returned unchanged.
pub fn normalize(x: &Array2<f64>, norm: Normalization) -> Array2<f64> {
    let scale = match norm {
        Normalization::Peak1 => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Normalization::Energy1 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    if scale > 0.0 {
        x / scale
    } else {
        x.clone()
    }
}

/// `‖δτ(X̂ − Ŷ)‖₀` with both operands normalised per `cfg`.
pub fn phi(x: &Array2<f64>, y: &Array2<f64>, cfg: &ShapeConfig) -> Result<usize> {
    cfg.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!("phi: {:?} vs {:?}", x.dim(), y.dim())));
    }
    Ok(phi_normalized(&normalize(x, cfg.normalization), &normalize(y, cfg.normalization), cfg.tau))
}

fn phi_normalized(x: &Array2<f64>, y: &Array2<f64>, tau: f64) -> usize {
    x.iter().zip(y.iter()).filter(|(a, b)| (*a - *b).abs() >= tau).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageReport {
    /// `φ(G, F)`: LR amplitude vs kernel amplitude.
    pub phi_freq: usize,
    /// `φ(k_p, I_LR)`: padded kernel vs LR image.
    pub phi_spatial: usize,
    /// `‖δτ(F)‖₀`.
    pub upper_bound_freq: usize,
    /// `‖δ2τ(I_LR)‖₀ − ‖δτ(k_p)‖₀`, floored at 0.
    pub lower_bound_spatial: usize,
    /// `phi_freq / max(phi_spatial, 1)`.
    pub ratio: f64,
    pub normalization: Normalization,
    pub tau: f64,
}

impl AdvantageReport {
    pub fn upper_bound_holds(&self) -> bool {
        self.phi_freq <= self.upper_bound_freq
    }

    pub fn lower_bound_holds(&self) -> bool {
        self.phi_spatial >= self.lower_bound_spatial
    }
}

/// Compares kernel and degraded image in both domains for one noiseless
/// degradation of `img_hr`.
pub fn frequency_advantage(
    img_hr: &GrayImage,
    params: &KernelParams,
    degradation: &DegradationConfig,
    cfg: &ShapeConfig,
) -> Result<AdvantageReport> {
    let k = params.synthesize()?;
    let noiseless = DegradationConfig {
        noise_sigma: 0.0,
        ..*degradation
    };
    let lr = degrade(img_hr, &k, &noiseless, 0)?;
    advantage_for(&lr, &k, cfg)
}

/// [`frequency_advantage`] for an already degraded image and its kernel.
pub fn advantage_for(img_lr: &GrayImage, k: &Kernel, cfg: &ShapeConfig) -> Result<AdvantageReport> {
    cfg.validate()?;
    let (h, w) = img_lr.dims();
    let norm = cfg.normalization;
    let f = normalize(&amplitude_of(&pad_kernel_wrapped(k, h, w)?), norm);
    let g = normalize(&amplitude_of(img_lr.pixels()), norm);
    let kp = normalize(&pad_kernel_centered(k, h, w)?, norm);
    let lr = normalize(img_lr.pixels(), norm);
    let phi_freq = phi_normalized(&g, &f, cfg.tau);
    let phi_spatial = phi_normalized(&kp, &lr, cfg.tau);
    let upper_bound_freq = support(&f, cfg.tau);
    let lower_bound_spatial = support(&lr, 2.0 * cfg.tau).saturating_sub(support(&kp, cfg.tau));
    Ok(AdvantageReport {
        phi_freq,
        phi_spatial,
        upper_bound_freq,
        lower_bound_spatial,
        ratio: phi_freq as f64 / phi_spatial.max(1) as f64,
        normalization: norm,
        tau: cfg.tau,
    })
}

fn row_profile(x: &Array2<f64>) -> Array1<f64> {
    let p = x.sum_axis(Axis(0));
    let m = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        p / m
    } else {
        p
    }
}

fn mean_abs(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Profiles summed over rows, normalised to peak 1, compared by mean absolute
/// difference. Returns `(frequency, spatial)`.
pub fn profile_distance(img_lr: &GrayImage, k: &Kernel) -> Result<(f64, f64)> {
    let (h, w) = img_lr.dims();
    let f = amplitude_of(&pad_kernel_wrapped(k, h, w)?);
    let g = amplitude_of(img_lr.pixels());
    let kp = pad_kernel_centered(k, h, w)?;
    let freq = mean_abs(&row_profile(&g), &row_profile(&f));
    let spatial = mean_abs(&row_profile(&kp), &row_profile(img_lr.pixels()));
    Ok((freq, spatial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sample_params_seeded, KernelFamily};
    use crate::scenes::dead_leaves;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((h, w), |_| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn truncate_examples() {
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(truncate(&z, 0.1), z);
        assert_eq!(truncate(&array![[0.4, 0.6, -0.7]], 0.5), array![[0.0, 0.6, 0.7]]);
        assert_eq!(truncate(&array![[0.4, -0.2]], 1.0), array![[0.0, 0.0]]);
    }

    #[test]
    fn phi_examples() {
        let cfg = ShapeConfig {
            tau: 0.5,
            ..Default::default()
        };
        let x = random(6, 6, 1);
        let y = random(6, 6, 2);
        assert_eq!(phi(&x, &x, &cfg).unwrap(), 0);
        assert_eq!(phi(&x, &y, &cfg).unwrap(), phi(&y, &x, &cfg).unwrap());
        assert_eq!(phi(&Array2::ones((4, 4)), &Array2::zeros((4, 4)), &cfg).unwrap(), 16);
        assert!(phi(&x, &Array2::zeros((2, 2)), &cfg).is_err());
        let bad = ShapeConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(phi(&x, &y, &bad).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_permutation_equivariant(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
            let (x, y) = (random(5, 5, s1), random(5, 5, s2));
            let mut order: Vec<usize> = (0..25).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(s3));
            let permute = |a: &Array2<f64>| {
                let flat: Vec<f64> = a.iter().copied().collect();
                Array2::from_shape_vec((5, 5), order.iter().map(|&i| flat[i]).collect()).unwrap()
            };
            let cfg = ShapeConfig { tau: 0.1, ..Default::default() };
            prop_assert_eq!(phi(&x, &y, &cfg).unwrap(), phi(&permute(&x), &permute(&y), &cfg).unwrap());
        }

        #[test]
        fn phi_is_monotone_in_tau(s1 in any::<u64>(), s2 in any::<u64>(), t1 in 1e-4f64..0.5, dt in 0.0f64..0.5) {
            let (x, y) = (random(6, 6, s1), random(6, 6, s2));
            let a = ShapeConfig { tau: t1, ..Default::default() };
            let b = ShapeConfig { tau: t1 + dt, ..Default::default() };
            prop_assert!(phi(&x, &y, &a).unwrap() >= phi(&x, &y, &b).unwrap());
        }
    }

    #[test]
    fn normalizations() {
        let x = array![[3.0, -4.0]];
        assert_eq!(normalize(&x, Normalization::Peak1), array![[0.75, -1.0]]);
        assert_eq!(normalize(&x, Normalization::Energy1), array![[0.6, -0.8]]);
        assert_eq!("energy1".parse::<Normalization>().unwrap(), Normalization::Energy1);
    }

    #[test]
    fn report_fields_are_consistent() {
        let hr = dead_leaves(96, 3);
        let p = sample_params_seeded(KernelFamily::Gaussian, 4);
        let r = frequency_advantage(&hr, &p, &DegradationConfig::with_scale(2), &ShapeConfig::default()).unwrap();
        assert_eq!(r.ratio, r.phi_freq as f64 / r.phi_spatial.max(1) as f64);
        assert!(r.lower_bound_holds());
        assert!(r.phi_freq <= 48 * 48 && r.phi_spatial <= 48 * 48);
        assert_eq!(r.normalization, Normalization::Peak1);
    }

    #[test]
    fn spatial_lower_bound_is_a_theorem() {
        // The spatial bound needs no modelling assumption, so it must hold for
        // any pair of arrays.
        for seed in 0..20 {
            let img = GrayImage::from_array(random(32, 32, seed).mapv(|v| v + 0.5)).unwrap();
            let p = sample_params_seeded(KernelFamily::ALL[seed as usize % 3], seed);
            let r = advantage_for(&img, &p.synthesize().unwrap(), &ShapeConfig::default()).unwrap();
            assert!(r.lower_bound_holds(), "{r:?}");
        }
    }

    #[test]
    fn profiles() {
        let img = dead_leaves(64, 8);
        let k = sample_params_seeded(KernelFamily::Gaussian, 1).synthesize().unwrap();
        let (f, s) = profile_distance(&img, &k).unwrap();
        assert!(f >= 0.0 && s >= 0.0);
        // The kernel against itself (as an "image") is distance 0 in both domains.
        let kimg = GrayImage::from_array(pad_kernel_centered(&k, 64, 64).unwrap()).unwrap();
        let (f0, s0) = profile_distance(&kimg, &k).unwrap();
        assert!(f0 < 1e-12 && s0 < 1e-12);
        assert!(row_profile(&amplitude_of(img.pixels())).iter().all(|&v| v >= 0.0));
    }
}
