//! Ground-truth blur kernels: anisotropic Gaussians, camera-shake motion
//! trajectories and defocus disks.
//!
//! Symmetry: Gaussian kernels are point-symmetric about the centre, disk
//! kernels are exactly invariant under transposition and both flips, and
//! motion kernels have no symmetry but are reproduced bit for bit from their
//! parameters (seed included).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const GAUSSIAN_SIZE: usize = 15;
pub const MOTION_SIZE: usize = 23;
pub const DISK_SIZE: usize = 15;

pub const GAUSSIAN_SIGMA_RANGE: (f64, f64) = (1.0, 3.0);
pub const MOTION_EXPOSURE_RANGE: (f64, f64) = (0.15, 0.3);
pub const MOTION_ANXIETY: f64 = 0.005;
pub const MOTION_STEPS: usize = 2000;
pub const DISK_RADIUS_RANGE: (f64, f64) = (1.0, 3.0);

const SUM_TOLERANCE: f64 = 1e-9;

/// A square, odd-sized, nonnegative point-spread function summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    data: Array2<f64>,
}

impl Kernel {
    /// Validates an already-normalised kernel.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        check_shape(&data)?;
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("kernel entries must be finite and nonnegative"));
        }
        let sum = data.sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("kernel sums to {sum}, expected 1")));
        }
        Ok(Self { data })
    }

    /// Scales a nonnegative array so that it sums to one.
    pub fn normalized(data: Array2<f64>) -> Result<Self> {
        check_shape(&data)?;
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("kernel entries must be finite and nonnegative"));
        }
        let sum = data.sum();
        if sum <= 0.0 {
            return Err(Error::invalid("kernel has no mass"));
        }
        Ok(Self {
            data: data / sum,
        })
    }

    /// A unit impulse at the centre.
    pub fn delta(size: usize) -> Result<Self> {
        let mut data = Array2::zeros((size, size));
        check_shape(&data)?;
        data[[size / 2, size / 2]] = 1.0;
        Ok(Self { data })
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn center(&self) -> usize {
        self.size() / 2
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }
}

fn check_shape(data: &Array2<f64>) -> Result<()> {
    let (h, w) = data.dim();
    if h != w || h % 2 == 0 {
        return Err(Error::invalid(format!(
            "kernel must be square with odd size, got {h}x{w}"
        )));
    }
    Ok(())
}

fn check_size(size: usize) -> Result<()> {
    if size.is_multiple_of(2) {
        return Err(Error::invalid(format!("kernel size {size} is not odd")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
    Motion,
    Disk,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [Self::Gaussian, Self::Motion, Self::Disk];

    pub fn default_size(self) -> usize {
        match self {
            Self::Gaussian => GAUSSIAN_SIZE,
            Self::Motion => MOTION_SIZE,
            Self::Disk => DISK_SIZE,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Motion => "motion",
            Self::Disk => "disk",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "motion" => Ok(Self::Motion),
            "disk" => Ok(Self::Disk),
            other => Err(Error::invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Anisotropic Gaussian: standard deviations along the axis at angle `theta`
/// and its perpendicular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub seed: u64,
    pub exposure: f64,
    pub anxiety: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskParams {
    pub radius: f64,
}

/// Parameters of one ground-truth kernel, range-checked at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelParams {
    Gaussian(GaussianParams),
    Motion(MotionParams),
    Disk(DiskParams),
}

fn in_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo..=hi).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl KernelParams {
    pub fn gaussian(sigma_x: f64, sigma_y: f64, theta: f64) -> Result<Self> {
        in_range("sigma_x", sigma_x, GAUSSIAN_SIGMA_RANGE)?;
        in_range("sigma_y", sigma_y, GAUSSIAN_SIGMA_RANGE)?;
        if !(0.0..TAU).contains(&theta) {
            return Err(Error::invalid(format!("theta = {theta} outside [0, 2pi)")));
        }
        Ok(Self::Gaussian(GaussianParams {
            sigma_x,
            sigma_y,
            theta,
        }))
    }

    pub fn motion(seed: u64, exposure: f64, anxiety: f64, steps: usize) -> Result<Self> {
        in_range("exposure", exposure, MOTION_EXPOSURE_RANGE)?;
        if !(0.0..=1.0).contains(&anxiety) {
            return Err(Error::invalid(format!("anxiety = {anxiety} outside [0, 1]")));
        }
        if steps < 100 {
            return Err(Error::invalid(format!("{steps} trajectory steps; need at least 100")));
        }
        Ok(Self::Motion(MotionParams {
            seed,
            exposure,
            anxiety,
            steps,
        }))
    }

    pub fn disk(radius: f64) -> Result<Self> {
        in_range("radius", radius, DISK_RADIUS_RANGE)?;
        Ok(Self::Disk(DiskParams { radius }))
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Self::Gaussian(_) => KernelFamily::Gaussian,
            Self::Motion(_) => KernelFamily::Motion,
            Self::Disk(_) => KernelFamily::Disk,
        }
    }

    /// Renders the kernel at the family's default size.
    pub fn synthesize(&self) -> Result<Kernel> {
        self.synthesize_with_size(self.family().default_size())
    }

    pub fn synthesize_with_size(&self, size: usize) -> Result<Kernel> {
        match self {
            Self::Gaussian(p) => gaussian_kernel(p, size),
            Self::Motion(p) => motion_kernel(p, &MotionConfig::default(), size),
            Self::Disk(p) => disk_kernel(p.radius, size),
        }
    }
}

/// Samples a rotated Gaussian density at pixel centres and normalises it.
pub fn gaussian_kernel(p: &GaussianParams, size: usize) -> Result<Kernel> {
    check_size(size)?;
    if !(p.sigma_x > 0.0 && p.sigma_y > 0.0) {
        return Err(Error::invalid("Gaussian standard deviations must be positive"));
    }
    let c = (size / 2) as f64;
    let (sin, cos) = p.theta.sin_cos();
    let (ix, iy) = (1.0 / (p.sigma_x * p.sigma_x), 1.0 / (p.sigma_y * p.sigma_y));
    let density = Array2::from_shape_fn((size, size), |(r, col)| {
        let (x, y) = (col as f64 - c, r as f64 - c);
        let along = cos * x + sin * y;
        let across = -sin * x + cos * y;
        (-0.5 * (along * along * ix + across * across * iy)).exp()
    });
    Kernel::normalized(density)
}

/// Constants of the camera-shake trajectory simulation. These are not the
/// constants of any reference implementation; they produce blur extents of a
/// few to ~15 pixels for the default exposure range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    /// Fraction of velocity lost per step.
    pub damping: f64,
    /// Standard deviation of the per-step Gaussian velocity perturbation (px/step).
    pub shake_std: f64,
    /// Speed of the initial drift (px/step) in a random direction.
    pub initial_speed: f64,
    /// Magnitude of an impulsive velocity jump (px/step).
    pub impulse_gain: f64,
    pub max_retries: u32,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            damping: 0.1,
            shake_std: 0.01,
            initial_speed: 0.6,
            impulse_gain: 0.4,
            max_retries: 10,
        }
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// Positions of a simulated hand-shake trajectory, starting at the origin.
pub fn motion_trajectory(p: &MotionParams, cfg: &MotionConfig, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.random::<f64>() * TAU;
    let mut v = (cfg.initial_speed * angle.cos(), cfg.initial_speed * angle.sin());
    let mut pos = (0.0, 0.0);
    let kept = ((p.exposure * p.steps as f64).round() as usize).clamp(1, p.steps);
    let mut out = Vec::with_capacity(kept);
    out.push(pos);
    for _ in 1..kept {
        let (gx, gy) = complex_normal(&mut rng);
        v.0 = v.0 * (1.0 - cfg.damping) + cfg.shake_std * gx;
        v.1 = v.1 * (1.0 - cfg.damping) + cfg.shake_std * gy;
        // Draw unconditionally so the stream does not depend on `anxiety`.
        let fire: f64 = rng.random();
        let dir: f64 = rng.random::<f64>() * TAU;
        if fire < p.anxiety {
            v.0 += cfg.impulse_gain * dir.cos();
            v.1 += cfg.impulse_gain * dir.sin();
        }
        pos = (pos.0 + v.0, pos.1 + v.1);
        out.push(pos);
    }
    out
}

/// Splats trajectory positions (x right, y down) into a `size`×`size` grid
/// centred on their centroid. Returns `None` if any sample leaves the grid.
fn rasterize(points: &[(f64, f64)], size: usize) -> Option<Array2<f64>> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
    let c = (size / 2) as f64;
    let mut grid = Array2::<f64>::zeros((size, size));
    let last = (size - 1) as f64;
    for &(x, y) in points {
        let (gx, gy) = (x - mx + c, y - my + c);
        if !(0.0..=last).contains(&gx) || !(0.0..=last).contains(&gy) {
            return None;
        }
        let (x0, y0) = (gx.floor(), gy.floor());
        let (tx, ty) = (gx - x0, gy - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        let (x1, y1) = ((x0 + 1).min(size - 1), (y0 + 1).min(size - 1));
        grid[[y0, x0]] += (1.0 - tx) * (1.0 - ty);
        grid[[y0, x1]] += tx * (1.0 - ty);
        grid[[y1, x0]] += (1.0 - tx) * ty;
        grid[[y1, x1]] += tx * ty;
    }
    Some(grid)
}

/// Camera-shake kernel: a damped random-velocity trajectory with occasional
/// impulsive jumps, truncated to the exposure window and rasterised.
///
/// Identical parameters give bitwise-identical kernels. A trajectory that does
/// not fit the grid is re-simulated from a derived seed.
pub fn motion_kernel(p: &MotionParams, cfg: &MotionConfig, size: usize) -> Result<Kernel> {
    check_size(size)?;
    if p.steps < 100 {
        return Err(Error::invalid("motion kernels need at least 100 steps"));
    }
    for attempt in 0..=cfg.max_retries {
        let seed = p
            .seed
            .wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let points = motion_trajectory(p, cfg, seed);
        if let Some(grid) = rasterize(&points, size) {
            return Kernel::normalized(grid);
        }
    }
    Err(Error::Synthesis(format!(
        "trajectory for seed {} escaped the {size}x{size} grid after {} retries",
        p.seed, cfg.max_retries
    )))
}

const DISK_SUPERSAMPLING: usize = 16;

/// Fraction of the pixel centred at `(dx, dy)` covered by a disk of `radius`
/// about the origin: exact for fully inside/outside pixels, supersampled on
/// the boundary.
fn disk_coverage(dx: f64, dy: f64, radius: f64, samples: usize) -> f64 {
    let r2 = radius * radius;
    let near = |d: f64| (d.abs() - 0.5).max(0.0);
    let far = |d: f64| d.abs() + 0.5;
    if near(dx).powi(2) + near(dy).powi(2) >= r2 {
        return 0.0;
    }
    if far(dx).powi(2) + far(dy).powi(2) <= r2 {
        return 1.0;
    }
    let step = 1.0 / samples as f64;
    let mut inside = 0usize;
    for a in 0..samples {
        let y = dy - 0.5 + (a as f64 + 0.5) * step;
        for b in 0..samples {
            let x = dx - 0.5 + (b as f64 + 0.5) * step;
            if x * x + y * y <= r2 {
                inside += 1;
            }
        }
    }
    inside as f64 / (samples * samples) as f64
}

/// Uniform defocus disk, pixel values proportional to covered area.
pub fn disk_kernel(radius: f64, size: usize) -> Result<Kernel> {
    check_size(size)?;
    let max_radius = (size - 1) as f64 / 2.0;
    if !(0.5..=max_radius).contains(&radius) {
        return Err(Error::invalid(format!(
            "disk radius {radius} must lie in [0.5, {max_radius}] for size {size}"
        )));
    }
    let c = (size / 2) as f64;
    let data = Array2::from_shape_fn((size, size), |(r, col)| {
        disk_coverage(col as f64 - c, r as f64 - c, radius, DISK_SUPERSAMPLING)
    });
    Kernel::normalized(data)
}

/// Draws parameters uniformly from the experimental ranges of `family`.
pub fn sample_params<R: Rng + ?Sized>(family: KernelFamily, rng: &mut R) -> KernelParams {
    let uniform = |rng: &mut R, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    match family {
        KernelFamily::Gaussian => {
            let sigma_x = uniform(rng, GAUSSIAN_SIGMA_RANGE);
            let sigma_y = uniform(rng, GAUSSIAN_SIGMA_RANGE);
            let theta = rng.random::<f64>() * TAU;
            KernelParams::Gaussian(GaussianParams {
                sigma_x,
                sigma_y,
                theta: if theta >= TAU { 0.0 } else { theta },
            })
        }
        KernelFamily::Motion => KernelParams::Motion(MotionParams {
            seed: rng.random(),
            exposure: uniform(rng, MOTION_EXPOSURE_RANGE),
            anxiety: MOTION_ANXIETY,
            steps: MOTION_STEPS,
        }),
        KernelFamily::Disk => KernelParams::Disk(DiskParams {
            radius: uniform(rng, DISK_RADIUS_RANGE),
        }),
    }
}

/// [`sample_params`] driven by a fresh generator seeded with `seed`.
pub fn sample_params_seeded(family: KernelFamily, seed: u64) -> KernelParams {
    sample_params(family, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Analytic area of a disk, `pi r^2`.
pub fn disk_area(radius: f64) -> f64 {
    PI * radius * radius
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(sx: f64, sy: f64, theta: f64) -> GaussianParams {
        GaussianParams {
            sigma_x: sx,
            sigma_y: sy,
            theta,
        }
    }

    #[test]
    fn gaussian_point_symmetry_and_sum() {
        let k = gaussian_kernel(&gauss(2.0, 2.0, 0.0), 15).unwrap();
        let v = k.values();
        for i in 0..15 {
            for j in 0..15 {
                assert!((v[[i, j]] - v[[14 - i, 14 - j]]).abs() < 1e-15);
            }
        }
        assert!((v.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_center_neighbor_ratio() {
        let k = gaussian_kernel(&gauss(1.0, 1.0, 0.0), 15).unwrap();
        let ratio = k.values()[[7, 7]] / k.values()[[7, 8]];
        assert!((ratio - 1.648_721_270_700_128).abs() < 1e-6);
    }

    #[test]
    fn gaussian_half_turn_invariance() {
        let a = gaussian_kernel(&gauss(1.3, 2.7, 0.4), 15).unwrap();
        let b = gaussian_kernel(&gauss(1.3, 2.7, 0.4 + PI), 15).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_errors() {
        assert!(gaussian_kernel(&gauss(1.0, 1.0, 0.0), 14).is_err());
        assert!(gaussian_kernel(&gauss(0.0, 1.0, 0.0), 15).is_err());
        assert!(KernelParams::gaussian(0.5, 1.0, 0.0).is_err());
        assert!(KernelParams::gaussian(1.0, 1.0, TAU).is_err());
    }

    #[test]
    fn motion_is_deterministic() {
        let p = MotionParams {
            seed: 42,
            exposure: 0.2,
            anxiety: MOTION_ANXIETY,
            steps: MOTION_STEPS,
        };
        let a = motion_kernel(&p, &MotionConfig::default(), 23).unwrap();
        let b = motion_kernel(&p, &MotionConfig::default(), 23).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&v| v >= 0.0));
        assert!((a.values().sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn straight_line_without_shake() {
        let p = MotionParams {
            seed: 7,
            exposure: 0.3,
            anxiety: 0.0,
            steps: MOTION_STEPS,
        };
        let cfg = MotionConfig {
            shake_std: 0.0,
            ..MotionConfig::default()
        };
        // Constant direction, geometrically decaying speed: every position lies
        // on the ray from the origin along the initial velocity.
        let traj = motion_trajectory(&p, &cfg, p.seed);
        let (dx, dy) = (traj[1].0, traj[1].1);
        let norm = (dx * dx + dy * dy).sqrt();
        let (ux, uy) = (dx / norm, dy / norm);
        for &(x, y) in &traj {
            assert!((x * uy - y * ux).abs() < 1e-9);
        }
        let length = (traj.last().unwrap().0 * ux + traj.last().unwrap().1 * uy).abs();
        // The first step already applies damping, so the drift sums to v0 (1-d)/d.
        let expected = cfg.initial_speed * (1.0 - cfg.damping) / cfg.damping;
        assert!((length - expected).abs() < 1e-6, "{length} vs {expected}");

        // Rasterised support: a one-pixel-thick band around that line. Bilinear
        // splatting reaches pixel centres less than one pixel away on each axis.
        let k = motion_kernel(&p, &cfg, 23).unwrap();
        let v = k.values();
        let (mut mx, mut my) = (0.0, 0.0);
        for ((r, c), w) in v.indexed_iter() {
            mx += w * c as f64;
            my += w * r as f64;
        }
        let mut perp_moment = 0.0;
        for ((r, c), &w) in v.indexed_iter() {
            if w > 0.0 {
                let (x, y) = (c as f64 - mx, r as f64 - my);
                let perp = (x * uy - y * ux).abs();
                assert!(perp < std::f64::consts::SQRT_2, "pixel ({r},{c}) is {perp} px off the line");
                let along = (x * ux + y * uy).abs();
                assert!(along <= length + 1.5);
                perp_moment += w * perp * perp;
            }
        }
        assert!(perp_moment.sqrt() < 0.5);
    }

    #[test]
    fn motion_gives_up_when_grid_is_too_small() {
        let p = MotionParams {
            seed: 1,
            exposure: 0.3,
            anxiety: 0.0,
            steps: MOTION_STEPS,
        };
        let err = motion_kernel(&p, &MotionConfig::default(), 3).unwrap_err();
        assert!(matches!(err, Error::Synthesis(_)));
    }

    #[test]
    fn disk_support_and_symmetry() {
        let k = disk_kernel(3.0, 15).unwrap();
        let v = k.values();
        for ((r, c), &w) in v.indexed_iter() {
            let cheb = (r as i64 - 7).abs().max((c as i64 - 7).abs());
            if cheb >= 5 {
                assert_eq!(w, 0.0);
            }
        }
        for radius in [1.0, 1.7, 2.5, 3.0] {
            let k = disk_kernel(radius, 15).unwrap();
            let v = k.values();
            for i in 0..15 {
                for j in 0..15 {
                    assert_eq!(v[[i, j]], v[[j, i]]);
                    assert_eq!(v[[i, j]], v[[14 - i, j]]);
                }
            }
        }
    }

    #[test]
    fn disk_interior_matches_area_oracle() {
        // Independent oracle: plain 256x256 supersampling of every pixel.
        let radius = 2.0;
        let mut total = 0.0;
        for r in 0..15 {
            for c in 0..15 {
                let (dx, dy) = (c as f64 - 7.0, r as f64 - 7.0);
                let mut inside = 0u32;
                for a in 0..256 {
                    for b in 0..256 {
                        let x = dx - 0.5 + (b as f64 + 0.5) / 256.0;
                        let y = dy - 0.5 + (a as f64 + 0.5) / 256.0;
                        if x * x + y * y <= radius * radius {
                            inside += 1;
                        }
                    }
                }
                total += inside as f64 / 65536.0;
            }
        }
        let oracle = 1.0 / total;
        let k = disk_kernel(radius, 15).unwrap();
        let centre = k.values()[[7, 7]];
        // 16x16 boundary sampling is good to about half a percent of area.
        assert!((centre - oracle).abs() / oracle < 5e-3, "{centre} vs {oracle}");
        let analytic = 1.0 / disk_area(radius);
        assert!((centre - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn disk_errors() {
        assert!(disk_kernel(7.5, 15).is_err());
        assert!(disk_kernel(0.4, 15).is_err());
        assert!(disk_kernel(2.0, 16).is_err());
    }

    #[test]
    fn sampled_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            match sample_params(KernelFamily::Gaussian, &mut rng) {
                KernelParams::Gaussian(p) => {
                    assert!((1.0..=3.0).contains(&p.sigma_x));
                    assert!((1.0..=3.0).contains(&p.sigma_y));
                    assert!((0.0..TAU).contains(&p.theta));
                }
                _ => unreachable!(),
            }
        }
        for _ in 0..1000 {
            match sample_params(KernelFamily::Motion, &mut rng) {
                KernelParams::Motion(p) => {
                    assert!((0.15..=0.3).contains(&p.exposure));
                    assert_eq!(p.anxiety, 0.005);
                }
                _ => unreachable!(),
            }
            match sample_params(KernelFamily::Disk, &mut rng) {
                KernelParams::Disk(p) => assert!((1.0..=3.0).contains(&p.radius)),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let a: Vec<_> = (0..20)
            .map(|i| sample_params_seeded(KernelFamily::Motion, i))
            .collect();
        let b: Vec<_> = (0..20)
            .map(|i| sample_params_seeded(KernelFamily::Motion, i))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn family_parsing() {
        for f in KernelFamily::ALL {
            assert_eq!(f.to_string().parse::<KernelFamily>().unwrap(), f);
        }
        assert!("box".parse::<KernelFamily>().is_err());
    }
}
