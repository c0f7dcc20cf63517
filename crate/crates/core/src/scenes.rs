//! Procedural stand-ins for natural images.
//!
//! A dead-leaves scene stacks opaque disks whose radii follow `p(r) ∝ r^-3`,
//! which gives the scale invariance and roughly `1/f` amplitude fall-off of
//! natural photographs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadLeavesConfig {
    pub leaves: usize,
    pub min_radius: f64,
    /// Largest radius as a fraction of the image side.
    pub max_radius_fraction: f64,
    pub gray_range: (f64, f64),
}

impl Default for DeadLeavesConfig {
    fn default() -> Self {
        Self {
            leaves: 600,
            min_radius: 2.0,
            max_radius_fraction: 1.0 / 3.0,
            gray_range: (0.05, 0.95),
        }
    }
}

/// A `size`×`size` dead-leaves image with the default configuration.
pub fn dead_leaves(size: usize, seed: u64) -> GrayImage {
    dead_leaves_with(size, seed, &DeadLeavesConfig::default())
}

pub fn dead_leaves_with(size: usize, seed: u64, cfg: &DeadLeavesConfig) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = rng.random_range(0.2..0.8);
    let mut pixels = GrayImage::filled(size, size, background).into_array();
    let n = size as f64;
    let (rmin, rmax) = (cfg.min_radius, (n * cfg.max_radius_fraction).max(cfg.min_radius));
    let (lo, hi) = cfg.gray_range;
    // Painter's order: later leaves cover earlier ones.
    for _ in 0..cfg.leaves {
        let u: f64 = rng.random();
        let r = 1.0 / ((1.0 - u) / (rmin * rmin) + u / (rmax * rmax)).sqrt();
        let cx = rng.random::<f64>() * n;
        let cy = rng.random::<f64>() * n;
        let value = lo + (hi - lo) * rng.random::<f64>();
        let r0 = (cy - r).floor().max(0.0) as usize;
        let r1 = ((cy + r).ceil() as usize).min(size.saturating_sub(1));
        let c0 = (cx - r).floor().max(0.0) as usize;
        let c1 = ((cx + r).ceil() as usize).min(size.saturating_sub(1));
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (dx, dy) = (col as f64 - cx, row as f64 - cy);
                if dx * dx + dy * dy < r * r {
                    pixels[[row, col]] = value;
                }
            }
        }
    }
    GrayImage::from_array(pixels).expect("finite values")
}

/// `count` scenes with seeds derived from `seed`.
pub fn scene_set(count: usize, size: usize, seed: u64) -> Vec<GrayImage> {
    (0..count)
        .map(|i| dead_leaves(size, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)))
        .collect()
}
