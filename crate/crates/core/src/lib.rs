//! CPU renderer that approximates indirect illumination with radiance maps
//! predicted by a convolutional network and interpolated across the image.

pub mod cache;
pub mod cnn;
pub mod dataset;
pub mod error;
pub mod hemimap;
pub mod image;
pub mod integrator;
pub mod math;
pub mod metrics;
pub mod render;
pub mod scene;

pub use error::{Error, Result};
