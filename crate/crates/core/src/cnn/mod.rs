//! Forward-only inference for the radiance map network.

mod blur;
mod drcw;
mod network;
pub mod ops;
mod tensor;

pub use blur::{gaussian_blur, gaussian_kernel, GaussianBlur};
pub use drcw::{parse_drcw, read_drcw, write_drcw, NamedTensor, WeightFile, DRCW_MAGIC, DRCW_VERSION};
pub(crate) use drcw::Cursor;
pub use network::{
    architecture, blur_weights, random_weights, tensor_table, zero_weights, LayerKind, LayerSpec, Network,
    BN_EPS, DEFAULT_K, DEFAULT_SLOPE, INPUT_CHANNELS, OUTPUT_CHANNELS,
};
pub use tensor::Tensor;

use crate::error::Result;
use crate::hemimap::{HemiMap, InputStack};

/// Anything that turns a `(7, 32, 32)` input stack into a `(3, 32, 32)`
/// normalized radiance prediction.
pub trait MapPredictor: Send + Sync {
    fn predict(&self, input: &Tensor) -> Result<Tensor>;

    fn name(&self) -> String;
}

/// Predicts the physical radiance map for an input stack: the normalized
/// output is rescaled by the stack's radiance scale and placed in its frame.
pub fn predict_radiance(predictor: &dyn MapPredictor, stack: &InputStack) -> Result<HemiMap> {
    let out = predictor.predict(&stack.to_tensor())?;
    Ok(HemiMap::from_data(3, out.into_vec(), stack.frame())?.with_scale(stack.radiance_scale()))
}
