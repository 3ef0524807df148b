use super::{power_heuristic, Sampler};
use crate::error::{Error, Result};
use crate::hemimap::{build_map_distribution, sample_map, HemiMap};
use crate::math::{Frame, Rgb, Vec3};
use crate::scene::Material;

/// Reflected radiance toward `wo` from a predicted radiance map, treating
/// the map as a fully visible environment around the point.
///
/// Half of the `mis_samples` draws come from the map's luminance
/// distribution and half from the BSDF; the two are combined with the power
/// heuristic.
pub fn shade_indirect(
    material: &Material,
    normal: Vec3,
    wo: Vec3,
    radmap: &HemiMap,
    sampler: &mut Sampler,
    mis_samples: u32,
) -> Result<Rgb> {
    if mis_samples < 2 {
        return Err(Error::Config(format!(
            "shade_indirect needs at least 2 MIS samples, got {mis_samples}"
        )));
    }
    if material.is_specular() {
        return Err(Error::Contract(format!(
            "shade_indirect called on specular material `{}`",
            material.name
        )));
    }
    let n_map = mis_samples / 2;
    let n_bsdf = mis_samples - n_map;
    let frame = Frame::from_z(normal);
    let dist = build_map_distribution(radmap);

    let mut map_sum = Rgb::ZERO;
    for _ in 0..n_map {
        let s = sample_map(&dist, radmap, sampler.next_2d());
        let cos = s.dir.dot(normal);
        if cos <= 0.0 || s.radiance.is_black() {
            continue;
        }
        let f = material.eval(&frame, wo, s.dir)?;
        if f.is_black() {
            continue;
        }
        let bsdf_pdf = material.pdf(&frame, wo, s.dir);
        let w = power_heuristic(n_map as f64 * s.pdf, n_bsdf as f64 * bsdf_pdf);
        map_sum += f * s.radiance * (cos * w / s.pdf);
    }

    let mut bsdf_sum = Rgb::ZERO;
    for _ in 0..n_bsdf {
        let bs = material.sample(&frame, wo, sampler.next_2d(), true);
        let cos = bs.wi.dot(normal);
        if bs.pdf <= 0.0 || cos <= 0.0 || bs.value.is_black() {
            continue;
        }
        let radiance = radmap.lookup(bs.wi);
        if radiance.is_black() {
            continue;
        }
        let map_pdf = dist.pdf_direction(radmap, bs.wi);
        let w = power_heuristic(n_bsdf as f64 * bs.pdf, n_map as f64 * map_pdf);
        bsdf_sum += bs.value * radiance * (cos * w / bs.pdf);
    }

    let total = map_sum / n_map as f64 + bsdf_sum / n_bsdf as f64;
    Ok(if total.is_finite() {
        total.max(Rgb::ZERO)
    } else {
        Rgb::ZERO
    })
}
