//! Monte Carlo light transport estimators.

mod indirect;
mod sampler;

use std::sync::atomic::{AtomicU64, Ordering};

pub use indirect::shade_indirect;
pub use sampler::{hash2, mix64, permute, Sampler, SamplerKind};

use crate::math::{Frame, Rgb, Vec3};
use crate::scene::{Hit, Light, Material, Ray, Scene};

/// Offset applied to spawned ray origins, in scene units.
pub const RAY_EPSILON: f64 = 1e-6;
/// Longest mirror/transmission chain followed when locating a primary hit.
pub const MAX_SPECULAR_CHAIN: usize = 16;
/// Chains whose throughput falls below this are treated as absorbed.
pub const SPECULAR_CUTOFF: f64 = 1e-4;

static NON_FINITE_SAMPLES: AtomicU64 = AtomicU64::new(0);

/// Number of non-finite radiance samples replaced by zero so far.
pub fn non_finite_samples() -> u64 {
    NON_FINITE_SAMPLES.load(Ordering::Relaxed)
}

fn sanitize(v: Rgb) -> Rgb {
    if v.is_finite() {
        v.max(Rgb::ZERO)
    } else {
        NON_FINITE_SAMPLES.fetch_add(1, Ordering::Relaxed);
        Rgb::ZERO
    }
}

/// Power heuristic with exponent 2 for technique `a` against `b`.
#[inline]
pub fn power_heuristic(pdf_a: f64, pdf_b: f64) -> f64 {
    if pdf_a.is_infinite() {
        return 1.0;
    }
    let (a2, b2) = (pdf_a * pdf_a, pdf_b * pdf_b);
    if a2 + b2 == 0.0 {
        return 0.0;
    }
    a2 / (a2 + b2)
}

/// Depth and termination settings shared by the path-based estimators.
#[derive(Debug, Clone, Copy)]
pub struct PathSettings {
    pub max_depth: u32,
    pub rr_start_depth: u32,
}

impl Default for PathSettings {
    fn default() -> Self {
        PathSettings {
            max_depth: 8,
            rr_start_depth: 5,
        }
    }
}

/// Spawns a ray leaving `p` in direction `dir`, offset off the surface on
/// the side `dir` points to.
#[inline]
pub fn spawn_ray(p: Vec3, n: Vec3, dir: Vec3) -> Ray {
    let side = if n.dot(dir) >= 0.0 { n } else { -n };
    Ray::new(p + side * RAY_EPSILON, dir)
}

/// Shadow ray from `p` toward `target`, stopping just short of it.
fn shadow_ray(p: Vec3, n: Vec3, target: Vec3) -> (Ray, Vec3, f64) {
    let origin = p + n.face_forward(target - p) * RAY_EPSILON;
    let d = target - origin;
    let dist = d.length();
    let dir = d / dist;
    (Ray::with_range(origin, dir, 0.0, dist * (1.0 - 1e-7) - RAY_EPSILON), dir, dist)
}

/// Next-event estimation at a non-specular vertex: one uniformly chosen
/// light, one shadow ray, MIS-weighted against BSDF sampling for area
/// lights. Always consumes three sampler dimensions.
pub fn sample_direct_light(
    scene: &Scene,
    p: Vec3,
    n: Vec3,
    frame: &Frame,
    wo: Vec3,
    material: &Material,
    sampler: &mut Sampler,
) -> Rgb {
    let pick = sampler.next_1d();
    let u = sampler.next_2d();
    let count = scene.lights.len();
    if count == 0 {
        return Rgb::ZERO;
    }
    let index = ((pick * count as f64) as usize).min(count - 1);
    match scene.lights[index] {
        Light::Point {
            position,
            intensity,
        } => {
            let (ray, wi, dist) = shadow_ray(p, n, position);
            let cos = wi.dot(n);
            if cos <= 0.0 {
                return Rgb::ZERO;
            }
            let f = material.eval(frame, wo, wi).unwrap_or(Rgb::ZERO);
            if f.is_black() || !scene.unoccluded(&ray) {
                return Rgb::ZERO;
            }
            f * intensity * (cos * count as f64 / (dist * dist))
        }
        Light::Area { primitive } => {
            let sample = scene.primitives[primitive].shape.sample_area(u);
            let (ray, wi, dist) = shadow_ray(p, n, sample.position);
            let cos = wi.dot(n);
            if cos <= 0.0 {
                return Rgb::ZERO;
            }
            let light_pdf = scene.area_light_pdf(primitive, wi, dist, sample.normal);
            if light_pdf <= 0.0 || !light_pdf.is_finite() {
                return Rgb::ZERO;
            }
            let f = material.eval(frame, wo, wi).unwrap_or(Rgb::ZERO);
            if f.is_black() || !scene.unoccluded(&ray) {
                return Rgb::ZERO;
            }
            let le = scene.material(scene.primitives[primitive].material_id).emission;
            let w = power_heuristic(light_pdf, material.pdf(frame, wo, wi));
            f * le * (cos * w / light_pdf)
        }
    }
}

/// MIS weight for emission found by BSDF sampling with density `bsdf_pdf`.
fn emission_weight(scene: &Scene, hit: &Hit, dir: Vec3, bsdf_pdf: f64, specular: bool) -> f64 {
    if specular {
        return 1.0;
    }
    match scene.light_of_primitive(hit.primitive) {
        Some(_) => {
            let light_pdf = scene.area_light_pdf(hit.primitive, dir, hit.distance, hit.normal);
            power_heuristic(bsdf_pdf, light_pdf)
        }
        None => 1.0,
    }
}

/// Path-traced radiance arriving along `ray` (i.e. leaving the first hit
/// toward `-ray.dir`), with next-event estimation and BSDF sampling
/// combined by the power heuristic.
///
/// With `skip_first_emission` the emission of the first surface (or the
/// background, if the ray escapes immediately) is dropped, leaving only
/// light that has scattered at least once.
pub fn li_path(
    scene: &Scene,
    ray: &Ray,
    sampler: &mut Sampler,
    settings: &PathSettings,
    skip_first_emission: bool,
) -> Rgb {
    let mut radiance = Rgb::ZERO;
    let mut beta = Rgb::ONE;
    let mut ray = *ray;
    let mut specular = true;
    let mut prev_pdf = 0.0;
    let mut depth = 0u32;
    loop {
        let first = depth == 0;
        let Some(hit) = scene.intersect(&ray) else {
            if !(first && skip_first_emission) {
                radiance += beta * scene.background;
            }
            break;
        };
        if hit.is_emitter && !(first && skip_first_emission) {
            let w = emission_weight(scene, &hit, ray.dir, prev_pdf, specular);
            radiance += beta * hit.emitted * w;
        }
        if depth >= settings.max_depth {
            break;
        }

        let material = scene.material(hit.material_id);
        let wo = -ray.dir;
        let n = hit.shading_normal(ray.dir);
        let frame = Frame::from_z(n);
        if !material.is_specular() {
            radiance += beta
                * sample_direct_light(scene, hit.position, n, &frame, wo, material, sampler);
        }
        let u = sampler.next_2d();
        let bs = material.sample(&frame, wo, u, hit.front_face(ray.dir));
        let weight = bs.weight(n);
        if weight.is_black() || !weight.is_finite() {
            break;
        }
        beta *= weight;
        specular = bs.is_specular;
        prev_pdf = bs.pdf;
        ray = spawn_ray(hit.position, n, bs.wi);
        depth += 1;

        if depth >= settings.rr_start_depth {
            let survive = beta.max_component().clamp(0.05, 1.0);
            if sampler.next_1d() >= survive {
                break;
            }
            beta = beta / survive;
        }
    }
    sanitize(radiance)
}

/// First non-specular surface reached from the camera, with the
/// throughput of the mirror/transmission chain that led to it.
#[derive(Debug, Clone, Copy)]
pub struct PrimaryHit {
    pub hit: Hit,
    /// Shading normal, flipped toward `wo`.
    pub normal: Vec3,
    /// Direction back toward the previous vertex.
    pub wo: Vec3,
    pub front_face: bool,
    pub throughput: Rgb,
    pub specular_bounces: u32,
}

/// Where a deterministic specular chain ends.
#[derive(Debug, Clone, Copy)]
pub enum ChainEnd {
    Surface(PrimaryHit),
    Escaped { throughput: Rgb, dir: Vec3 },
    Absorbed,
}

/// Follows mirror and transmission bounces (refraction preferred, weighted
/// by `1 - F`) until a non-specular surface is hit.
pub fn trace_specular_chain(scene: &Scene, ray: &Ray) -> ChainEnd {
    let mut ray = *ray;
    let mut throughput = Rgb::ONE;
    for bounces in 0..=MAX_SPECULAR_CHAIN {
        let Some(hit) = scene.intersect(&ray) else {
            return ChainEnd::Escaped {
                throughput,
                dir: ray.dir,
            };
        };
        let material = scene.material(hit.material_id);
        let normal = hit.shading_normal(ray.dir);
        let front_face = hit.front_face(ray.dir);
        let wo = -ray.dir;
        if !material.is_specular() {
            return ChainEnd::Surface(PrimaryHit {
                hit,
                normal,
                wo,
                front_face,
                throughput,
                specular_bounces: bounces as u32,
            });
        }
        if bounces == MAX_SPECULAR_CHAIN {
            break;
        }
        let b = material.specular_bounce(normal, wo, front_face, None);
        throughput *= b.throughput;
        if throughput.max_component() < SPECULAR_CUTOFF {
            break;
        }
        ray = spawn_ray(hit.position, normal, b.wi);
    }
    ChainEnd::Absorbed
}

/// Closest non-specular intersection along `ray`.
pub fn find_primary_intersection(scene: &Scene, ray: &Ray) -> Option<PrimaryHit> {
    match trace_specular_chain(scene, ray) {
        ChainEnd::Surface(p) => Some(p),
        _ => None,
    }
}

/// Emission at the primary intersection plus single-bounce direct
/// lighting. Specular chains in front of the primary hit do not count
/// toward the depth.
pub fn li_direct(scene: &Scene, ray: &Ray, sampler: &mut Sampler) -> Rgb {
    let primary = match trace_specular_chain(scene, ray) {
        ChainEnd::Surface(p) => p,
        ChainEnd::Escaped { throughput, .. } => return sanitize(throughput * scene.background),
        ChainEnd::Absorbed => return Rgb::ZERO,
    };
    sanitize(primary.throughput * direct_at(scene, &primary, sampler))
}

/// Emission plus direct lighting leaving a primary hit toward `wo`.
pub fn direct_at(scene: &Scene, primary: &PrimaryHit, sampler: &mut Sampler) -> Rgb {
    let hit = &primary.hit;
    let n = primary.normal;
    let wo = primary.wo;
    let material = scene.material(hit.material_id);
    let frame = Frame::from_z(n);

    let mut radiance = hit.emitted;
    radiance += sample_direct_light(scene, hit.position, n, &frame, wo, material, sampler);

    let u = sampler.next_2d();
    let bs = material.sample(&frame, wo, u, primary.front_face);
    let weight = bs.weight(n);
    if !weight.is_black() && weight.is_finite() {
        let ray = spawn_ray(hit.position, n, bs.wi);
        match scene.intersect(&ray) {
            None => radiance += weight * scene.background,
            Some(h2) if h2.is_emitter => {
                let w = emission_weight(scene, &h2, ray.dir, bs.pdf, false);
                radiance += weight * h2.emitted * w;
            }
            Some(_) => {}
        }
    }
    radiance
}
