//! Reverse-mode automatic differentiation, layers, losses and the Adam
//! optimizer, all in `f64`.

pub mod adam;
pub mod layers;
pub mod ops;
pub mod s2k1;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use layers::{Conv2d, ConvTranspose2d};
pub use ops::{ConvGeometry, Reduction};
pub use s2k1::{load_tensors, save_tensors, TensorRecord};
pub use tensor::Tensor;
