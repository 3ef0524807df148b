use super::{MapPredictor, Tensor};
use crate::error::{Error, Result};
use crate::hemimap::{HemiMap, MAP_RES};

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ⌈3σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable blur of a `32×32` plane: columns wrap around the azimuthal
/// seam, rows clamp at the pole and the horizon.
fn blur_plane(plane: &[f32], kernel: &[f64]) -> Vec<f32> {
    let n = MAP_RES as i64;
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f64; plane.len()];
    for v in 0..n {
        for u in 0..n {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let su = (u + j as i64 - r).rem_euclid(n);
                acc += k * plane[(v * n + su) as usize] as f64;
            }
            tmp[(v * n + u) as usize] = acc;
        }
    }
    let mut out = vec![0.0f32; plane.len()];
    for v in 0..n {
        for u in 0..n {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let sv = (v + j as i64 - r).clamp(0, n - 1);
                acc += k * tmp[(sv * n + u) as usize];
            }
            out[(v * n + u) as usize] = acc as f32;
        }
    }
    out
}

/// Gaussian blur of every channel of a map; frame and scale are kept.
pub fn gaussian_blur(map: &HemiMap, sigma: f64) -> Result<HemiMap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("blur sigma must be positive, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let mut data = Vec::with_capacity(map.data().len());
    for c in 0..map.channels() {
        data.extend(blur_plane(map.channel(c), &kernel));
    }
    Ok(HemiMap::from_data(map.channels(), data, map.frame)?.with_scale(map.scale))
}

/// Baseline predictor: returns the blurred input radiance channels.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBlur {
    pub sigma: f64,
}

impl Default for GaussianBlur {
    fn default() -> Self {
        GaussianBlur { sigma: 1.0 }
    }
}

impl MapPredictor for GaussianBlur {
    fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let (c, h, w) = input.shape();
        if c < 3 || h != MAP_RES || w != MAP_RES {
            return Err(Error::ShapeMismatch {
                name: "input".into(),
                expected: vec![7, MAP_RES, MAP_RES],
                found: vec![c, h, w],
            });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!("blur sigma must be positive, got {}", self.sigma)));
        }
        let kernel = gaussian_kernel(self.sigma);
        let mut data = Vec::with_capacity(3 * h * w);
        for ch in 0..3 {
            data.extend(blur_plane(input.plane(ch), &kernel));
        }
        Tensor::from_vec(3, h, w, data)
    }

    fn name(&self) -> String {
        format!("blur(sigma={})", self.sigma)
    }
}
