//! Hemispherical latitude-longitude radiance maps.
//!
//! A map covers the hemisphere around a surface normal. Columns index the
//! azimuth `φ ∈ [0, 2π)` measured from the frame's tangent, rows index the
//! polar angle `θ ∈ [0, π/2]` with row 0 at the pole (the normal itself).
//! Texel `(u, v)` is represented by its center direction
//! `φ = 2π(u + ½)/32`, `θ = (π/2)(v + ½)/32`.

mod distribution;
mod stack;

use std::f64::consts::{FRAC_PI_2, PI};

pub use distribution::{build_map_distribution, sample_map, Distribution2D, MapSample};
pub use stack::{render_input_stack, render_reference_map, InputStack, DISTANCE_EPSILON, RADIANCE_EPSILON};

use crate::error::{Error, Result};
use crate::math::{Frame, Rgb, Vec3};

/// Texels per side.
pub const MAP_RES: usize = 32;
/// Texels per channel.
pub const MAP_TEXELS: usize = MAP_RES * MAP_RES;

const DPHI: f64 = 2.0 * PI / MAP_RES as f64;
const DTHETA: f64 = FRAC_PI_2 / MAP_RES as f64;

/// Polar angle of texel row `v`.
#[inline]
pub fn row_theta(v: usize) -> f64 {
    DTHETA * (v as f64 + 0.5)
}

/// Azimuth of texel column `u`.
#[inline]
pub fn column_phi(u: usize) -> f64 {
    DPHI * (u as f64 + 0.5)
}

/// Solid angle attributed to a texel in row `v`: `Δφ · Δθ · sin θ_v`.
#[inline]
pub fn texel_solid_angle(v: usize) -> f64 {
    DPHI * DTHETA * row_theta(v).sin()
}

/// Local-frame direction of texel `(u, v)`.
#[inline]
pub fn texel_local_direction(u: usize, v: usize) -> Vec3 {
    let (theta, phi) = (row_theta(v), column_phi(u));
    let s = theta.sin();
    Vec3::new(s * phi.cos(), s * phi.sin(), theta.cos())
}

/// World-space direction through the center of texel `(u, v)`.
pub fn texel_to_direction(u: usize, v: usize, frame: &Frame) -> Result<Vec3> {
    if u >= MAP_RES || v >= MAP_RES {
        return Err(Error::Contract(format!(
            "texel ({u}, {v}) outside the {MAP_RES}x{MAP_RES} map"
        )));
    }
    Ok(frame.to_world(texel_local_direction(u, v)))
}

/// Texel containing a local-frame direction, or `None` below the horizon.
pub fn local_direction_to_texel(local: Vec3) -> Option<(usize, usize)> {
    if local.z < 0.0 {
        return None;
    }
    let theta = local.z.clamp(-1.0, 1.0).acos();
    let mut phi = local.y.atan2(local.x);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    let u = ((phi / DPHI) as usize).min(MAP_RES - 1);
    let v = ((theta / DTHETA) as usize).min(MAP_RES - 1);
    Some((u, v))
}

/// Texel whose cell contains `dir`, or `None` below the hemisphere.
pub fn direction_to_texel(dir: Vec3, frame: &Frame) -> Option<(usize, usize)> {
    local_direction_to_texel(frame.to_local(dir))
}

/// A 32×32 map with one or three channels, stored channel-planar
/// (`data[c * 1024 + v * 32 + u]`), oriented by `frame`.
///
/// `scale` converts stored values to physical units; normalized maps keep
/// their normalization constant here.
#[derive(Debug, Clone, PartialEq)]
pub struct HemiMap {
    channels: usize,
    data: Vec<f32>,
    pub frame: Frame,
    pub scale: f32,
}

impl HemiMap {
    pub fn zeros(channels: usize, frame: Frame) -> HemiMap {
        HemiMap {
            channels,
            data: vec![0.0; channels * MAP_TEXELS],
            frame,
            scale: 1.0,
        }
    }

    pub fn from_data(channels: usize, data: Vec<f32>, frame: Frame) -> Result<HemiMap> {
        if channels != 1 && channels != 3 {
            return Err(Error::Contract(format!("maps have 1 or 3 channels, not {channels}")));
        }
        if data.len() != channels * MAP_TEXELS {
            return Err(Error::ShapeMismatch {
                name: "hemimap".into(),
                expected: vec![channels, MAP_RES, MAP_RES],
                found: vec![data.len()],
            });
        }
        Ok(HemiMap {
            channels,
            data,
            frame,
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f32) -> HemiMap {
        self.scale = scale;
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Stored (possibly normalized) values.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * MAP_TEXELS..(c + 1) * MAP_TEXELS]
    }

    #[inline]
    pub fn get(&self, c: usize, u: usize, v: usize) -> f32 {
        self.data[c * MAP_TEXELS + v * MAP_RES + u]
    }

    #[inline]
    pub fn set(&mut self, c: usize, u: usize, v: usize, value: f32) {
        self.data[c * MAP_TEXELS + v * MAP_RES + u] = value;
    }

    /// Physical RGB value of a texel (`stored · scale`). Single-channel
    /// maps replicate their value.
    #[inline]
    pub fn texel(&self, u: usize, v: usize) -> Rgb {
        let s = self.scale as f64;
        if self.channels == 1 {
            Rgb::splat(self.get(0, u, v) as f64 * s)
        } else {
            Rgb::new(
                self.get(0, u, v) as f64 * s,
                self.get(1, u, v) as f64 * s,
                self.get(2, u, v) as f64 * s,
            )
        }
    }

    /// Physical radiance arriving from world direction `dir`.
    pub fn lookup(&self, dir: Vec3) -> Rgb {
        match direction_to_texel(dir, &self.frame) {
            Some((u, v)) => self.texel(u, v),
            None => Rgb::ZERO,
        }
    }

    /// Divides stored values by `s` and records `s` as the scale.
    pub fn normalized(&self, s: f32) -> HemiMap {
        let data = self.data.iter().map(|&x| x / s).collect();
        HemiMap {
            channels: self.channels,
            data,
            frame: self.frame,
            scale: self.scale * s,
        }
    }

    /// Map in physical units (scale folded into the values).
    pub fn denormalized(&self) -> HemiMap {
        let data = self.data.iter().map(|&x| x * self.scale).collect();
        HemiMap {
            channels: self.channels,
            data,
            frame: self.frame,
            scale: 1.0,
        }
    }

    /// Quadrature of the physical values over the hemisphere,
    /// `Σ value · ω(texel)`, per channel.
    pub fn integrate(&self) -> Rgb {
        let mut sum = Rgb::ZERO;
        for v in 0..MAP_RES {
            let w = texel_solid_angle(v);
            for u in 0..MAP_RES {
                sum += self.texel(u, v) * w;
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_texel_direction() {
        let d = texel_to_direction(0, 0, &Frame::IDENTITY).unwrap();
        assert!((d.z - 0.99970).abs() < 1e-5);
        let theta = PI / 128.0;
        let phi = PI / 32.0;
        assert!((d.x - theta.sin() * phi.cos()).abs() < 1e-12);
        assert!((d.y - theta.sin() * phi.sin()).abs() < 1e-12);
    }

    #[test]
    fn grazing_row() {
        for u in [0, 5, 31] {
            let d = texel_to_direction(u, 31, &Frame::IDENTITY).unwrap();
            assert!((d.z - 0.02454).abs() < 1e-5);
            assert!((d.length() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_texel() {
        assert!(matches!(
            texel_to_direction(32, 0, &Frame::IDENTITY),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn normal_maps_to_top_row_and_below_is_none() {
        let f = Frame::from_normal_and_up(Vec3::new(0.0, 0.6, 0.8), Vec3::Y);
        let (_, v) = direction_to_texel(f.n, &f).unwrap();
        assert_eq!(v, 0);
        assert!(direction_to_texel(-f.n, &f).is_none());
    }

    #[test]
    fn solid_angles_sum_to_hemisphere() {
        let total: f64 = (0..MAP_RES).map(|v| texel_solid_angle(v) * MAP_RES as f64).sum();
        // midpoint rule on ∫ sinθ dθ over [0, π/2]
        assert!((total - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
    }

    #[test]
    fn normalization_round_trip_within_an_ulp() {
        let mut m = HemiMap::zeros(3, Frame::IDENTITY);
        for (i, x) in m.data_mut().iter_mut().enumerate() {
            *x = (i as f32 * 0.731).sin().abs() * 17.0;
        }
        let back = m.normalized(3.3).denormalized();
        for (a, b) in m.data().iter().zip(back.data()) {
            let ulp = f32::EPSILON * a.abs().max(f32::MIN_POSITIVE);
            assert!((a - b).abs() <= ulp, "{a} vs {b}");
        }
    }
}
