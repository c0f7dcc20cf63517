use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

use super::ops::{self, ConvGeometry};
use super::tensor::Tensor;

/// Standard deviation of the normal weight initialisation.
pub const INIT_STD: f64 = 0.02;

fn normal_init(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dist = Normal::new(0.0, INIT_STD).expect("positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Convolution layer with weight `[cout, cin, k, k]` and bias `[cout]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub geom: ConvGeometry,
}

impl Conv2d {
    pub fn new(cin: usize, cout: usize, geom: ConvGeometry, rng: &mut ChaCha8Rng) -> Self {
        let k = geom.kernel;
        let weight = Tensor::parameter(&[cout, cin, k, k], normal_init(cout * cin * k * k, rng))
            .expect("consistent shape");
        let bias = Tensor::parameter(&[cout], vec![0.0; cout]).expect("consistent shape");
        Self { weight, bias, geom }
    }

    pub fn seeded(cin: usize, cout: usize, geom: ConvGeometry, seed: u64) -> Self {
        Self::new(cin, cout, geom, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ops::conv2d(x, &self.weight, Some(&self.bias), self.geom)
    }

    pub fn parameters(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }
}

/// Transposed convolution layer with weight `[cin, cout, k, k]` and bias
/// `[cout]`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub geom: ConvGeometry,
}

impl ConvTranspose2d {
    pub fn new(cin: usize, cout: usize, geom: ConvGeometry, rng: &mut ChaCha8Rng) -> Self {
        let k = geom.kernel;
        let weight = Tensor::parameter(&[cin, cout, k, k], normal_init(cin * cout * k * k, rng))
            .expect("consistent shape");
        let bias = Tensor::parameter(&[cout], vec![0.0; cout]).expect("consistent shape");
        Self { weight, bias, geom }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ops::conv_transpose2d(x, &self.weight, Some(&self.bias), self.geom)
    }

    pub fn parameters(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }
}
