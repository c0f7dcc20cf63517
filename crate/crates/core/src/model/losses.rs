use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::ops::{self, Reduction};
use crate::nn::Tensor;

use super::networks::Discriminator;

/// Weights of the ℓ1, adversarial and total-variation generator terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 100.0,
            lambda2: 1.0,
            lambda3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::invalid(format!("loss weights must be >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// `l1,adv,tv`, e.g. `100,1,1`.
impl FromStr for LossWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("loss weights `{s}` are not three numbers")))?;
        let [lambda1, lambda2, lambda3] = parts[..] else {
            return Err(Error::invalid(format!("loss weights `{s}` are not three numbers")));
        };
        let w = Self {
            lambda1,
            lambda2,
            lambda3,
        };
        w.validate()?;
        Ok(w)
    }
}

/// A differentiable total plus the values of its terms.
#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub total: Tensor,
    pub l1: f64,
    pub adv: f64,
    pub tv: f64,
}

/// `λ1·ℓ1(fake, real) + λ2·mean((D(s, fake) − 1)²) + λ3·TV(fake)`, with ℓ1 and
/// TV averaged per element. The discriminator is evaluated with frozen
/// parameters, so backward reaches only the generator.
pub fn generator_loss(
    disc: &Discriminator,
    spec: &Tensor,
    fake: &Tensor,
    real: &Tensor,
    weights: &LossWeights,
) -> Result<GeneratorLoss> {
    let l1 = ops::l1_loss(fake, real)?;
    let adv = ops::mse_to_const(&disc.forward_frozen(spec, fake)?, 1.0);
    let tv = ops::tv_loss(fake, Reduction::Mean)?;
    let total = ops::weighted_sum(&[
        (weights.lambda1, &l1),
        (weights.lambda2, &adv),
        (weights.lambda3, &tv),
    ])?;
    Ok(GeneratorLoss {
        l1: l1.item(),
        adv: adv.item(),
        tv: tv.item(),
        total,
    })
}

/// `mean(D(s, fake)²) + mean((D(s, real) − 1)²)`. `fake` is detached first.
pub fn discriminator_loss(disc: &Discriminator, spec: &Tensor, fake: &Tensor, real: &Tensor) -> Result<Tensor> {
    let fake_scores = disc.forward(spec, &fake.detach())?;
    let real_scores = disc.forward(spec, real)?;
    ops::add(&ops::mse_to_const(&fake_scores, 0.0), &ops::mse_to_const(&real_scores, 1.0))
}
