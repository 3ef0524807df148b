use super::{texel_local_direction, HemiMap, MAP_RES, MAP_TEXELS};
use crate::cnn::Tensor;
use crate::integrator::{li_path, spawn_ray, PathSettings, PrimaryHit, Sampler};
use crate::math::{Frame, Rgb};
use crate::scene::Scene;

/// Added to the mean luminance when choosing the radiance scale.
pub const RADIANCE_EPSILON: f32 = 1e-3;
/// Distance scale used when every map ray escapes.
pub const DISTANCE_EPSILON: f32 = 1.0;

const REFERENCE_STREAM: u64 = 0x7265_6600_0000_0000;

/// The seven network input channels rendered at one surface point.
///
/// `radiance` and `distance` hold normalized values; their `scale` fields
/// carry `s_r` and `s_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputStack {
    pub radiance: HemiMap,
    pub normals: HemiMap,
    pub distance: HemiMap,
}

impl InputStack {
    pub fn radiance_scale(&self) -> f32 {
        self.radiance.scale
    }

    pub fn distance_scale(&self) -> f32 {
        self.distance.scale
    }

    pub fn frame(&self) -> Frame {
        self.radiance.frame
    }

    /// Channel stack `(7, 32, 32)`: radiance RGB, normal XYZ, distance.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(7 * MAP_TEXELS);
        data.extend_from_slice(self.radiance.data());
        data.extend_from_slice(self.normals.data());
        data.extend_from_slice(self.distance.data());
        Tensor::from_vec(7, MAP_RES, MAP_RES, data).expect("input stack has 7 channels")
    }

    /// Rebuilds a stack from a `(7, 32, 32)` tensor and its scales.
    pub fn from_tensor(t: &Tensor, s_r: f32, s_d: f32, frame: Frame) -> InputStack {
        let d = t.data();
        let map = |range: std::ops::Range<usize>, ch| {
            HemiMap::from_data(ch, d[range].to_vec(), frame).expect("slice length matches")
        };
        InputStack {
            radiance: map(0..3 * MAP_TEXELS, 3).with_scale(s_r),
            normals: map(3 * MAP_TEXELS..6 * MAP_TEXELS, 3),
            distance: map(6 * MAP_TEXELS..7 * MAP_TEXELS, 1).with_scale(s_d),
        }
    }
}

/// Renders the radiance, normal and distance maps seen from a primary hit.
///
/// One path per texel along the texel center. Emission found directly by a
/// map ray is excluded, so the radiance map only holds light that has
/// scattered at least once. Normals are expressed in the map frame and face
/// the map origin; misses encode zero normal and zero distance.
pub fn render_input_stack(
    scene: &Scene,
    primary: &PrimaryHit,
    sampler: &Sampler,
    settings: &PathSettings,
) -> InputStack {
    let frame = Frame::from_normal_and_up(primary.normal, scene.global_up);
    let p = primary.hit.position;
    let mut radiance = HemiMap::zeros(3, frame);
    let mut normals = HemiMap::zeros(3, frame);
    let mut distance = HemiMap::zeros(1, frame);

    let mut lum_sum = 0.0f64;
    let mut max_dist = 0.0f64;
    for v in 0..MAP_RES {
        for u in 0..MAP_RES {
            let dir = frame.to_world(texel_local_direction(u, v));
            let ray = spawn_ray(p, primary.normal, dir);
            let mut s = sampler.fork((v * MAP_RES + u) as u64);
            s.start_sample(0, 1);
            let l = li_path(scene, &ray, &mut s, settings, true);
            radiance.set(0, u, v, l.x as f32);
            radiance.set(1, u, v, l.y as f32);
            radiance.set(2, u, v, l.z as f32);
            lum_sum += l.luminance();

            if let Some(h) = scene.intersect(&ray) {
                let n = frame.to_local(h.shading_normal(ray.dir));
                normals.set(0, u, v, n.x as f32);
                normals.set(1, u, v, n.y as f32);
                normals.set(2, u, v, n.z as f32);
                distance.set(0, u, v, h.distance as f32);
                max_dist = max_dist.max(h.distance);
            }
        }
    }

    let s_r = (lum_sum / MAP_TEXELS as f64) as f32 + RADIANCE_EPSILON;
    let s_d = if max_dist > 0.0 {
        max_dist as f32
    } else {
        DISTANCE_EPSILON
    };
    InputStack {
        radiance: radiance.normalized(s_r),
        normals,
        distance: distance.normalized(s_d),
    }
}

/// High sample count radiance map in physical units, over the same texel
/// centers and frame as [`render_input_stack`] but from an independent
/// random stream.
pub fn render_reference_map(
    scene: &Scene,
    primary: &PrimaryHit,
    sampler: &Sampler,
    spp: u32,
    settings: &PathSettings,
) -> HemiMap {
    let frame = Frame::from_normal_and_up(primary.normal, scene.global_up);
    let p = primary.hit.position;
    let mut map = HemiMap::zeros(3, frame);
    let spp = spp.max(1);
    for v in 0..MAP_RES {
        for u in 0..MAP_RES {
            let dir = frame.to_world(texel_local_direction(u, v));
            let ray = spawn_ray(p, primary.normal, dir);
            let base = sampler.fork(REFERENCE_STREAM ^ (v * MAP_RES + u) as u64);
            let mut sum = Rgb::ZERO;
            for i in 0..spp {
                let mut s = base.clone();
                s.start_sample(i, spp);
                sum += li_path(scene, &ray, &mut s, settings, true);
            }
            let mean = sum / spp as f64;
            map.set(0, u, v, mean.x as f32);
            map.set(1, u, v, mean.y as f32);
            map.set(2, u, v, mean.z as f32);
        }
    }
    map
}
