//! U-Net style map-to-map network: three encoder stages, a bottleneck,
//! three decoder stages with concatenated skips and an output head.
//!
//! With base width `K` (64 for the shipped model):
//!
//! | stage      | layers                                            | size |
//! |------------|---------------------------------------------------|------|
//! | enc1       | conv 7→K, conv K→K                                | 32²  |
//! | enc2       | pool, conv K→2K, conv 2K→2K                       | 16²  |
//! | enc3       | pool, conv 2K→4K, conv 4K→4K                      | 8²   |
//! | bottleneck | pool, conv 4K→8K, conv 8K→8K                      | 4²   |
//! | dec3       | upsample, concat enc3, deconv 12K→4K, deconv 4K→4K | 8²   |
//! | dec2       | upsample, concat enc2, deconv 6K→2K, deconv 2K→2K  | 16²  |
//! | dec1       | upsample, concat enc1, deconv 3K→K, deconv K→K     | 32²  |
//! | head       | deconv K→K/2, deconv K/2→K/4, conv1x1 K/4→3, relu | 32²  |
//!
//! Every conv/deconv except the final 1×1 is followed by batch norm and
//! leaky ReLU. Tensor names are `<stage>.<layer>.<param>`, for example
//! `enc1.conv1.weight`, `dec2.bn2.running_var`, `head.conv.bias`. Conv
//! weights are `(out, in, k, k)`, deconv weights `(in, out, 3, 3)`.

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;

use super::drcw::{NamedTensor, WeightFile, DRCW_VERSION};
use super::ops::{
    batchnorm_in_place, concat, conv2d, leaky_relu_in_place, maxpool2x2, relu_in_place, transpose_kernel,
    upsample_bilinear2x2,
};
use super::{MapPredictor, Tensor};
use crate::error::{Error, Result};

pub const INPUT_CHANNELS: usize = 7;
pub const OUTPUT_CHANNELS: usize = 3;
pub const DEFAULT_K: usize = 64;
pub const BN_EPS: f32 = 1e-5;
pub const DEFAULT_SLOPE: f32 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    Deconv3x3,
    Conv1x1,
    BatchNorm,
    LeakyRelu,
    Relu,
    MaxPool2x2,
    UpsampleBilinear2x2,
    ConcatSkip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Parameter tensors with their expected shapes, in the order the layer
    /// consumes them.
    pub params: Vec<(String, Vec<usize>)>,
    /// For `ConcatSkip`, the index of the layer whose output is appended.
    pub skip_from: Option<usize>,
}

struct GraphBuilder {
    layers: Vec<LayerSpec>,
    channels: usize,
}

impl GraphBuilder {
    fn push(&mut self, kind: LayerKind, out: usize, params: Vec<(String, Vec<usize>)>, skip: Option<usize>) -> usize {
        self.layers.push(LayerSpec {
            kind,
            in_channels: self.channels,
            out_channels: out,
            params,
            skip_from: skip,
        });
        self.channels = out;
        self.layers.len() - 1
    }

    fn conv_bn(&mut self, prefix: &str, idx: usize, kind: LayerKind, out: usize) -> usize {
        let c_in = self.channels;
        let (conv_name, shape) = match kind {
            LayerKind::Deconv3x3 => (format!("{prefix}.deconv{idx}"), vec![c_in, out, 3, 3]),
            _ => (format!("{prefix}.conv{idx}"), vec![out, c_in, 3, 3]),
        };
        self.push(
            kind,
            out,
            vec![(format!("{conv_name}.weight"), shape), (format!("{conv_name}.bias"), vec![out])],
            None,
        );
        let bn = format!("{prefix}.bn{idx}");
        self.push(
            LayerKind::BatchNorm,
            out,
            ["weight", "bias", "running_mean", "running_var"]
                .iter()
                .map(|p| (format!("{bn}.{p}"), vec![out]))
                .collect(),
            None,
        );
        self.push(LayerKind::LeakyRelu, out, vec![], None)
    }

    fn pass(&mut self, kind: LayerKind, skip: Option<usize>, extra: usize) -> usize {
        let out = self.channels + extra;
        self.push(kind, out, vec![], skip)
    }
}

/// Layer graph for base width `k`.
pub fn architecture(k: usize) -> Result<Vec<LayerSpec>> {
    if k < 4 || !k.is_multiple_of(4) {
        return Err(Error::Config(format!("base width must be a positive multiple of 4, got {k}")));
    }
    let mut g = GraphBuilder {
        layers: Vec::new(),
        channels: INPUT_CHANNELS,
    };
    let mut skips = Vec::new();
    for (i, name) in ["enc1", "enc2", "enc3", "bottleneck"].iter().enumerate() {
        if i > 0 {
            g.pass(LayerKind::MaxPool2x2, None, 0);
        }
        let w = k << i;
        g.conv_bn(name, 1, LayerKind::Conv3x3, w);
        skips.push(g.conv_bn(name, 2, LayerKind::Conv3x3, w));
    }
    skips.pop();
    for (i, name) in ["dec3", "dec2", "dec1"].iter().enumerate() {
        let w = k << (2 - i);
        g.pass(LayerKind::UpsampleBilinear2x2, None, 0);
        let skip = skips.pop().unwrap();
        g.pass(LayerKind::ConcatSkip, Some(skip), w);
        g.conv_bn(name, 1, LayerKind::Deconv3x3, w);
        g.conv_bn(name, 2, LayerKind::Deconv3x3, w);
    }
    g.conv_bn("head", 1, LayerKind::Deconv3x3, k / 2);
    g.conv_bn("head", 2, LayerKind::Deconv3x3, k / 4);
    let c = g.channels;
    g.push(
        LayerKind::Conv1x1,
        OUTPUT_CHANNELS,
        vec![
            ("head.conv.weight".into(), vec![OUTPUT_CHANNELS, c, 1, 1]),
            ("head.conv.bias".into(), vec![OUTPUT_CHANNELS]),
        ],
        None,
    );
    g.push(LayerKind::Relu, OUTPUT_CHANNELS, vec![], None);
    Ok(g.layers)
}

/// All parameter tensors of the architecture, in graph order.
pub fn tensor_table(k: usize) -> Result<Vec<(String, Vec<usize>)>> {
    Ok(architecture(k)?.into_iter().flat_map(|l| l.params).collect())
}

/// Layer parameters resolved into the form the forward pass consumes.
#[derive(Debug, Clone)]
enum Params {
    None,
    Conv { kernel: Vec<f32>, bias: Vec<f32>, k: usize },
    Norm { gamma: Vec<f32>, beta: Vec<f32>, mean: Vec<f32>, var: Vec<f32> },
}

/// Loaded, validated network. Immutable and shareable between threads.
#[derive(Debug, Clone)]
pub struct Network {
    k: usize,
    slope: f32,
    layers: Vec<LayerSpec>,
    params: Vec<Params>,
    weights: WeightFile,
}

impl Network {
    /// Validates `file` against the canonical architecture. The base width
    /// is read from the shape of `enc1.conv1.weight`.
    pub fn from_weights(file: WeightFile) -> Result<Network> {
        let first = file
            .get("enc1.conv1.weight")
            .ok_or_else(|| Error::MissingTensor("enc1.conv1.weight".into()))?;
        let k = first.dims.first().copied().unwrap_or(0);
        let layers = architecture(k).map_err(|_| Error::ShapeMismatch {
            name: "enc1.conv1.weight".into(),
            expected: vec![DEFAULT_K, INPUT_CHANNELS, 3, 3],
            found: first.dims.clone(),
        })?;
        if !file.slope.is_finite() {
            return Err(Error::Config("leaky slope is not finite".into()));
        }

        let mut by_name: HashMap<&str, &NamedTensor> = HashMap::new();
        for t in &file.tensors {
            if by_name.insert(t.name.as_str(), t).is_some() {
                return Err(Error::UnexpectedTensor(format!("{} (duplicate)", t.name)));
            }
        }
        let mut used = 0;
        let mut fetch = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let t = by_name.get(name).ok_or_else(|| Error::MissingTensor(name.into()))?;
            if t.dims != shape {
                return Err(Error::ShapeMismatch {
                    name: name.into(),
                    expected: shape.to_vec(),
                    found: t.dims.clone(),
                });
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("tensor `{name}` has non-finite values")));
            }
            used += 1;
            Ok(t.data.clone())
        };

        let mut params = Vec::with_capacity(layers.len());
        for l in &layers {
            let p = match l.kind {
                LayerKind::Conv3x3 | LayerKind::Conv1x1 | LayerKind::Deconv3x3 => {
                    let (wn, ws) = &l.params[0];
                    let (bn, bs) = &l.params[1];
                    let w = fetch(wn, ws)?;
                    let bias = fetch(bn, bs)?;
                    let k = ws[3];
                    let kernel = if l.kind == LayerKind::Deconv3x3 {
                        transpose_kernel(&w, l.in_channels, l.out_channels, k)
                    } else {
                        w
                    };
                    Params::Conv { kernel, bias, k }
                }
                LayerKind::BatchNorm => {
                    let mut v = Vec::with_capacity(4);
                    for (n, s) in &l.params {
                        v.push(fetch(n, s)?);
                    }
                    let var = v.pop().unwrap();
                    let mean = v.pop().unwrap();
                    let beta = v.pop().unwrap();
                    let gamma = v.pop().unwrap();
                    if let Some(i) = var.iter().position(|&x| !(x + BN_EPS > 0.0)) {
                        return Err(Error::Config(format!(
                            "tensor `{}` has nonpositive variance at index {i}",
                            l.params[3].0
                        )));
                    }
                    Params::Norm { gamma, beta, mean, var }
                }
                _ => Params::None,
            };
            params.push(p);
        }
        if used != file.tensors.len() {
            let known: std::collections::HashSet<_> =
                layers.iter().flat_map(|l| l.params.iter().map(|p| p.0.as_str())).collect();
            let extra = file
                .tensors
                .iter()
                .find(|t| !known.contains(t.name.as_str()))
                .map(|t| t.name.clone())
                .unwrap_or_default();
            return Err(Error::UnexpectedTensor(extra));
        }
        Ok(Network {
            k,
            slope: file.slope,
            layers,
            params,
            weights: file,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        Network::from_weights(super::drcw::parse_drcw(bytes)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Network> {
        Network::from_bytes(&std::fs::read(path)?)
    }

    pub fn base_width(&self) -> usize {
        self.k
    }

    pub fn slope(&self) -> f32 {
        self.slope
    }

    pub fn version(&self) -> u32 {
        DRCW_VERSION
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &WeightFile {
        &self.weights
    }

    /// Encoder stages, bottleneck and decoder stages by name.
    pub fn stage_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for l in &self.layers {
            if let Some((n, _)) = l.params.first() {
                let stage = n.split('.').next().unwrap().to_string();
                if names.last() != Some(&stage) {
                    names.push(stage);
                }
            }
        }
        names
    }

    /// Runs the network on a `(7, H, W)` stack, `H` and `W` divisible by 8.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (c, h, w) = input.shape();
        if c != INPUT_CHANNELS || h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch {
                name: "input".into(),
                expected: vec![INPUT_CHANNELS, 32, 32],
                found: vec![c, h, w],
            });
        }
        let keep: Vec<bool> = {
            let mut k = vec![false; self.layers.len()];
            for l in &self.layers {
                if let Some(s) = l.skip_from {
                    k[s] = true;
                }
            }
            k
        };
        let mut saved: HashMap<usize, Tensor> = HashMap::new();
        let mut x = input.clone();
        for (i, (l, p)) in self.layers.iter().zip(&self.params).enumerate() {
            x = match (l.kind, p) {
                (LayerKind::Conv3x3 | LayerKind::Conv1x1 | LayerKind::Deconv3x3, Params::Conv { kernel, bias, k }) => {
                    conv2d(&x, kernel, bias, l.out_channels, *k)?
                }
                (LayerKind::BatchNorm, Params::Norm { gamma, beta, mean, var }) => {
                    batchnorm_in_place(&mut x, gamma, beta, mean, var, BN_EPS)?;
                    x
                }
                (LayerKind::LeakyRelu, _) => {
                    leaky_relu_in_place(&mut x, self.slope);
                    x
                }
                (LayerKind::Relu, _) => {
                    relu_in_place(&mut x);
                    x
                }
                (LayerKind::MaxPool2x2, _) => maxpool2x2(&x)?,
                (LayerKind::UpsampleBilinear2x2, _) => upsample_bilinear2x2(&x),
                (LayerKind::ConcatSkip, _) => {
                    let skip = saved
                        .remove(&l.skip_from.expect("concat layer has a skip source"))
                        .expect("skip source precedes concat");
                    concat(&x, &skip)?
                }
                _ => unreachable!("layer parameters match their kind"),
            };
            if keep[i] {
                saved.insert(i, x.clone());
            }
        }
        Ok(x)
    }
}

impl MapPredictor for Network {
    fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input)
    }

    fn name(&self) -> String {
        format!("cnn(K={})", self.k)
    }
}

/// Weights with every tensor zero except unit running variances.
pub fn zero_weights(k: usize) -> Result<WeightFile> {
    let tensors = tensor_table(k)?
        .into_iter()
        .map(|(name, dims)| {
            let v = if name.ends_with("running_var") { 1.0 } else { 0.0 };
            NamedTensor::filled(name, dims, v)
        })
        .collect();
    Ok(WeightFile {
        slope: DEFAULT_SLOPE,
        tensors,
    })
}

/// Randomly initialized weights: fan-in scaled uniform kernels, small
/// biases and plausible batch-norm statistics.
pub fn random_weights(k: usize, seed: u64) -> Result<WeightFile> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let mut uniform = |lo: f32, hi: f32| lo + (hi - lo) * rng.random::<f32>();
    let mut tensors = Vec::new();
    for (name, dims) in tensor_table(k)? {
        let n: usize = dims.iter().product();
        let data: Vec<f32> = if name.ends_with(".weight") && dims.len() == 4 {
            let fan_in = if name.contains("deconv") { dims[0] } else { dims[1] } * dims[2] * dims[3];
            let a = (3.0 / fan_in as f32).sqrt();
            (0..n).map(|_| uniform(-a, a)).collect()
        } else if name.ends_with("running_var") {
            (0..n).map(|_| uniform(0.5, 1.5)).collect()
        } else if name.contains(".bn") && name.ends_with(".weight") {
            (0..n).map(|_| uniform(0.8, 1.2)).collect()
        } else {
            (0..n).map(|_| uniform(-0.1, 0.1)).collect()
        };
        tensors.push(NamedTensor::new(name, dims, data));
    }
    Ok(WeightFile {
        slope: DEFAULT_SLOPE,
        tensors,
    })
}

/// A network that ignores every input channel except radiance and returns
/// it smoothed by a 5×5 binomial filter (two 3×3 `[1,2,1]/4` passes), with
/// zero padding at the borders.
///
/// Useful as a deterministic stand-in for trained weights: the encoder
/// copies radiance through the first skip connection, all deeper stages are
/// zero, and the last decoder stage applies the two blur passes.
pub fn blur_weights(k: usize) -> Result<WeightFile> {
    if k < 12 {
        return Err(Error::Config(format!("the blur network needs a base width of at least 12, got {k}")));
    }
    let mut file = zero_weights(k)?;
    let binomial = [1.0f32, 2.0, 1.0];
    let blur_tap = |ky: usize, kx: usize| binomial[ky] * binomial[kx] / 16.0;
    // BN with var = 1 - eps is an identity up to rounding of 1 - eps + eps.
    let identity_var = 1.0 - BN_EPS;
    for t in &mut file.tensors {
        let d = t.dims.clone();
        let name = t.name.as_str();
        if name.ends_with("running_var") {
            t.data.fill(identity_var);
        } else if name.contains(".bn") && name.ends_with(".weight") {
            t.data.fill(1.0);
        }
        match name {
            "enc1.conv1.weight" | "enc1.conv2.weight" => {
                for c in 0..3 {
                    t.data[((c * d[1] + c) * 3 + 1) * 3 + 1] = 1.0;
                }
            }
            "dec1.deconv1.weight" => {
                // Input channels are [upsampled dec2 (2K), enc1 skip (K)].
                for c in 0..3 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            t.data[(((2 * k + c) * d[1] + c) * 3 + ky) * 3 + kx] = blur_tap(ky, kx);
                        }
                    }
                }
            }
            "dec1.deconv2.weight" => {
                for c in 0..3 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            t.data[((c * d[1] + c) * 3 + ky) * 3 + kx] = blur_tap(ky, kx);
                        }
                    }
                }
            }
            "head.deconv1.weight" | "head.deconv2.weight" => {
                for c in 0..3 {
                    t.data[((c * d[1] + c) * 3 + 1) * 3 + 1] = 1.0;
                }
            }
            "head.conv.weight" => {
                for c in 0..3 {
                    t.data[c * d[1] + c] = 1.0;
                }
            }
            _ => {}
        }
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_table_shapes() {
        let t: HashMap<_, _> = tensor_table(64).unwrap().into_iter().collect();
        assert_eq!(t["enc1.conv1.weight"], vec![64, 7, 3, 3]);
        assert_eq!(t["bottleneck.conv2.weight"], vec![512, 512, 3, 3]);
        assert_eq!(t["dec3.deconv1.weight"], vec![768, 256, 3, 3]);
        assert_eq!(t["dec1.deconv1.weight"], vec![192, 64, 3, 3]);
        assert_eq!(t["head.deconv2.weight"], vec![32, 16, 3, 3]);
        assert_eq!(t["head.conv.weight"], vec![3, 16, 1, 1]);
    }

    #[test]
    fn stages_in_order() {
        let net = Network::from_weights(zero_weights(8).unwrap()).unwrap();
        assert_eq!(
            net.stage_names(),
            ["enc1", "enc2", "enc3", "bottleneck", "dec3", "dec2", "dec1", "head"]
        );
    }

    #[test]
    fn rejects_bad_width() {
        assert!(architecture(6).is_err());
        assert!(architecture(0).is_err());
    }
}
