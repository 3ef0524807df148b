//! Paired training examples (1-spp input stacks and high sample count
//! reference maps) and their container format.
//!
//! ```text
//! "DRCD" | u32 version | u32 count | u16 resolution
//! per example: u32 scene id length | scene id (UTF-8) | u32 x | u32 y
//!              | f32 s_r | f32 s_d | f32 input[7·32·32] | f32 target[3·32·32]
//! ```

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::cnn::{Cursor, Tensor};
use crate::error::{Error, Result};
use crate::hemimap::{render_input_stack, render_reference_map, InputStack, MAP_RES, MAP_TEXELS};
use crate::integrator::{find_primary_intersection, hash2, PathSettings, Sampler, SamplerKind};
use crate::math::Frame;
use crate::scene::Scene;

pub const DRCD_MAGIC: &[u8; 4] = b"DRCD";
pub const DRCD_VERSION: u32 = 1;
pub const MIN_REF_SPP: u32 = 256;
pub const INPUT_LEN: usize = 7 * MAP_TEXELS;
pub const TARGET_LEN: usize = 3 * MAP_TEXELS;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub scene_id: String,
    pub pixel: (u32, u32),
    pub s_r: f32,
    pub s_d: f32,
    /// `(7, 32, 32)`: normalized radiance, normals, normalized distance.
    pub input: Vec<f32>,
    /// `(3, 32, 32)`: reference radiance divided by `s_r`.
    pub target: Vec<f32>,
}

impl TrainingExample {
    pub fn input_tensor(&self) -> Tensor {
        Tensor::from_vec(7, MAP_RES, MAP_RES, self.input.clone()).expect("input length checked")
    }

    pub fn target_tensor(&self) -> Tensor {
        Tensor::from_vec(3, MAP_RES, MAP_RES, self.target.clone()).expect("target length checked")
    }

    pub fn input_stack(&self) -> InputStack {
        InputStack::from_tensor(&self.input_tensor(), self.s_r, self.s_d, Frame::IDENTITY)
    }
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub grid: (u32, u32),
    pub ref_spp: u32,
    pub seed: u64,
    pub path: PathSettings,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            grid: (8, 8),
            ref_spp: 1024,
            seed: 0,
            path: PathSettings::default(),
        }
    }
}

/// Pixel of grid cell `(i, j)` on an `n × m` grid: the cell centers.
pub fn grid_pixel(i: u32, j: u32, grid: (u32, u32), resolution: [u32; 2]) -> (u32, u32) {
    let x = ((2 * i as u64 + 1) * resolution[0] as u64 / (2 * grid.0 as u64)) as u32;
    let y = ((2 * j as u64 + 1) * resolution[1] as u64 / (2 * grid.1 as u64)) as u32;
    (x.min(resolution[0] - 1), y.min(resolution[1] - 1))
}

/// One example per grid cell whose camera ray reaches a non-specular
/// surface, in row-major grid order. Sampler kind and seed vary per cell.
pub fn generate_examples(scene: &Scene, scene_id: &str, config: &DatasetConfig) -> Result<Vec<TrainingExample>> {
    let (n, m) = config.grid;
    if n == 0 || m == 0 {
        return Err(Error::Config("dataset grid is empty".into()));
    }
    let res = scene.camera.resolution();
    if n > res[0] || m > res[1] {
        return Err(Error::Config(format!(
            "grid {n}x{m} exceeds the {}x{} image",
            res[0], res[1]
        )));
    }
    if config.ref_spp < MIN_REF_SPP {
        return Err(Error::Config(format!(
            "ref-spp must be at least {MIN_REF_SPP}, got {}",
            config.ref_spp
        )));
    }
    let cells: Vec<(u32, u32)> = (0..m).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
    let examples: Vec<Option<TrainingExample>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let pixel = grid_pixel(i, j, config.grid, res);
            let ray = scene.camera.pixel_center_ray(pixel.0, pixel.1);
            let primary = find_primary_intersection(scene, &ray)?;
            let h = hash2(config.seed, k as u64);
            let kind = if h & 1 == 0 {
                SamplerKind::Independent
            } else {
                SamplerKind::Stratified
            };
            let sampler = Sampler::new(kind, h >> 1);
            let stack = render_input_stack(scene, &primary, &sampler, &config.path);
            let reference = render_reference_map(scene, &primary, &sampler, config.ref_spp, &config.path);
            let s_r = stack.radiance_scale();
            Some(TrainingExample {
                scene_id: scene_id.to_string(),
                pixel,
                s_r,
                s_d: stack.distance_scale(),
                input: stack.to_tensor().into_vec(),
                target: reference.data().iter().map(|v| v / s_r).collect(),
            })
        })
        .collect();
    Ok(examples.into_iter().flatten().collect())
}

pub fn write_dataset<W: Write>(mut w: W, examples: &[TrainingExample]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(DRCD_MAGIC);
    buf.extend_from_slice(&DRCD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(examples.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(MAP_RES as u16).to_le_bytes());
    for e in examples {
        if e.input.len() != INPUT_LEN || e.target.len() != TARGET_LEN {
            return Err(Error::ShapeMismatch {
                name: format!("example {}@{:?}", e.scene_id, e.pixel),
                expected: vec![INPUT_LEN, TARGET_LEN],
                found: vec![e.input.len(), e.target.len()],
            });
        }
        buf.extend_from_slice(&(e.scene_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.scene_id.as_bytes());
        buf.extend_from_slice(&e.pixel.0.to_le_bytes());
        buf.extend_from_slice(&e.pixel.1.to_le_bytes());
        buf.extend_from_slice(&e.s_r.to_le_bytes());
        buf.extend_from_slice(&e.s_d.to_le_bytes());
        for v in e.input.iter().chain(&e.target) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Vec<TrainingExample>> {
    let mut c = Cursor::new("DRCD", bytes);
    if c.take(4, "magic")? != DRCD_MAGIC {
        return Err(Error::framing("DRCD", 0, "bad magic"));
    }
    let version = c.u32("version")?;
    if version != DRCD_VERSION {
        return Err(Error::framing("DRCD", 4, format!("unsupported version {version}")));
    }
    let count = c.u32("count")?;
    let res = c.u16("resolution")?;
    if res as usize != MAP_RES {
        return Err(Error::framing("DRCD", 12, format!("unsupported map resolution {res}")));
    }
    let mut out = Vec::with_capacity((count as usize).min(c.remaining() / (4 * (INPUT_LEN + TARGET_LEN)) + 1));
    for k in 0..count {
        let start = c.pos;
        let len = c.u32("scene id length")? as usize;
        let scene_id = std::str::from_utf8(c.take(len, "scene id")?)
            .map_err(|_| Error::framing("DRCD", start + 4, format!("scene id of example {k} is not UTF-8")))?
            .to_string();
        let x = c.u32("pixel")?;
        let y = c.u32("pixel")?;
        let s_r = c.f32s(1, "s_r")?[0];
        let s_d = c.f32s(1, "s_d")?[0];
        let input = c.f32s(INPUT_LEN, "input maps")?;
        let target = c.f32s(TARGET_LEN, "target map")?;
        out.push(TrainingExample {
            scene_id,
            pixel: (x, y),
            s_r,
            s_d,
            input,
            target,
        });
    }
    if c.remaining() != 0 {
        return Err(c.error(format!("{} bytes after the last of {count} examples", c.remaining())));
    }
    Ok(out)
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Vec<TrainingExample>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_dataset(&bytes)
}
