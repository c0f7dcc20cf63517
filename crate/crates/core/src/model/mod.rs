//! The spectrum-to-kernel estimator: a U-net generator mapping a prepared
//! amplitude spectrum to an up-sampled kernel map, a conditional patch
//! discriminator, least-squares adversarial training and inference.

mod losses;
mod maps;
mod networks;
mod train;

pub use losses::{discriminator_loss, generator_loss, GeneratorLoss, LossWeights};
pub use maps::{extract_kernel, target_kernel_map};
pub use networks::{Arch, Discriminator, Generator, GeneratorConfig};
pub use train::{
    estimate, estimate_batch, load_generator, make_sample, predict_maps, train, validation_dv, EpochRecord,
    Sample, TrainConfig, TrainOutcome, LOSS_CSV, LOSS_HEADER,
};
