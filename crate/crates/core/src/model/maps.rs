use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imaging::resize_array_bilinear;
use crate::kernels::Kernel;

/// Bilinear up-interpolation of `k` to `input_size`×`input_size`, rescaled to
/// a maximum of 1.
pub fn target_kernel_map(k: &Kernel, input_size: usize) -> Result<Array2<f64>> {
    if k.size() > input_size {
        return Err(Error::invalid(format!(
            "{} px kernel does not fit a {input_size} px map",
            k.size()
        )));
    }
    let mut map = resize_array_bilinear(k.values(), input_size, input_size);
    let m = map.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        map.mapv_inplace(|v| v / m);
    }
    Ok(map)
}

/// Bilinear down-interpolation to `native_size`, negatives clamped to zero,
/// renormalised to unit sum.
pub fn extract_kernel(map: &Array2<f64>, native_size: usize) -> Result<Kernel> {
    if map.iter().any(|v| !v.is_finite()) {
        return Err(Error::EstimationFailed("kernel map contains non-finite values".into()));
    }
    let small = resize_array_bilinear(map, native_size, native_size).mapv(|v| v.max(0.0));
    if !(small.sum() > 0.0) {
        return Err(Error::EstimationFailed("kernel map is all zero".into()));
    }
    Kernel::normalized(small)
}
