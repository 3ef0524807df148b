//! Surface scattering models.
//!
//! All directions passed to the BSDF routines point away from the surface.
//! Frames are built around the normal flipped to the side of `wo`.

use std::f64::consts::{FRAC_1_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Frame, Rgb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Diffuse,
    Glossy,
    Mirror,
    Transmission,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub kind: MaterialKind,
    pub albedo: Rgb,
    pub roughness: f64,
    pub ior: f64,
    pub emission: Rgb,
}

#[derive(Debug, Clone, Copy)]
pub struct BsdfSample {
    pub wi: Vec3,
    /// Solid-angle density for non-specular lobes; 1 for delta lobes.
    pub pdf: f64,
    /// BSDF value for non-specular lobes; the full path throughput factor
    /// for delta lobes.
    pub value: Rgb,
    pub is_specular: bool,
}

impl BsdfSample {
    /// Multiplier applied to the path throughput when following this sample.
    pub fn weight(&self, n: Vec3) -> Rgb {
        if self.is_specular {
            self.value / self.pdf
        } else if self.pdf > 0.0 {
            self.value * (self.wi.dot(n).abs() / self.pdf)
        } else {
            Rgb::ZERO
        }
    }
}

/// Schlick's approximation of the Fresnel reflectance.
pub fn schlick(f0: Rgb, cos_theta: f64) -> Rgb {
    let m = (1.0 - cos_theta.clamp(0.0, 1.0)).powi(5);
    f0 + (Rgb::ONE - f0) * m
}

fn schlick_scalar(f0: f64, cos_theta: f64) -> f64 {
    f0 + (1.0 - f0) * (1.0 - cos_theta.clamp(0.0, 1.0)).powi(5)
}

/// Refracts `wo` (pointing away from the surface, on the side of `n`)
/// through an interface with relative index `eta = n_incident / n_transmitted`.
pub fn refract(wo: Vec3, n: Vec3, eta: f64) -> Option<Vec3> {
    let cos_i = wo.dot(n);
    let sin2_t = eta * eta * (1.0 - cos_i * cos_i).max(0.0);
    if sin2_t >= 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Some((-wo * eta + n * (eta * cos_i - cos_t)).normalized())
}

/// Outcome of following a delta lobe deterministically.
#[derive(Debug, Clone, Copy)]
pub struct SpecularBounce {
    pub wi: Vec3,
    pub throughput: Rgb,
}

impl Material {
    pub fn diffuse(name: &str, albedo: Rgb) -> Material {
        Material {
            name: name.to_string(),
            kind: MaterialKind::Diffuse,
            albedo,
            roughness: 1.0,
            ior: 1.5,
            emission: Rgb::ZERO,
        }
    }

    pub fn is_specular(&self) -> bool {
        matches!(self.kind, MaterialKind::Mirror | MaterialKind::Transmission)
    }

    pub fn is_emitter(&self) -> bool {
        !self.emission.is_black()
    }

    /// Phong exponent for the glossy lobe.
    pub fn phong_exponent(&self) -> f64 {
        (2.0 / (self.roughness * self.roughness) - 2.0).max(0.0)
    }

    /// BSDF value `f(wo, wi)` for non-specular materials.
    pub fn eval(&self, frame: &Frame, wo: Vec3, wi: Vec3) -> Result<Rgb> {
        let (lo, li) = (frame.to_local(wo), frame.to_local(wi));
        match self.kind {
            MaterialKind::Diffuse => {
                if lo.z <= 0.0 || li.z <= 0.0 {
                    return Ok(Rgb::ZERO);
                }
                Ok(self.albedo * FRAC_1_PI)
            }
            MaterialKind::Glossy => {
                if lo.z <= 0.0 || li.z <= 0.0 {
                    return Ok(Rgb::ZERO);
                }
                let r = Vec3::new(-lo.x, -lo.y, lo.z);
                let cos_a = r.dot(li);
                if cos_a <= 0.0 {
                    return Ok(Rgb::ZERO);
                }
                let e = self.phong_exponent();
                Ok(self.albedo * ((e + 2.0) / (2.0 * PI) * cos_a.powf(e)))
            }
            MaterialKind::Mirror | MaterialKind::Transmission => Err(Error::Contract(format!(
                "eval_bsdf called on specular material `{}`",
                self.name
            ))),
        }
    }

    /// Solid-angle density of `sample` producing `wi`. Zero for delta lobes.
    pub fn pdf(&self, frame: &Frame, wo: Vec3, wi: Vec3) -> f64 {
        let (lo, li) = (frame.to_local(wo), frame.to_local(wi));
        match self.kind {
            MaterialKind::Diffuse => {
                if lo.z <= 0.0 || li.z <= 0.0 {
                    0.0
                } else {
                    li.z * FRAC_1_PI
                }
            }
            MaterialKind::Glossy => {
                let r = Vec3::new(-lo.x, -lo.y, lo.z);
                let cos_a = r.dot(li);
                if cos_a <= 0.0 {
                    0.0
                } else {
                    let e = self.phong_exponent();
                    (e + 1.0) / (2.0 * PI) * cos_a.powf(e)
                }
            }
            MaterialKind::Mirror | MaterialKind::Transmission => 0.0,
        }
    }

    /// Draws an incident direction. `front_face` tells transmissive materials
    /// whether `wo` lies outside the object.
    pub fn sample(&self, frame: &Frame, wo: Vec3, u: (f64, f64), front_face: bool) -> BsdfSample {
        match self.kind {
            MaterialKind::Diffuse => {
                let local = cosine_hemisphere(u);
                let wi = frame.to_world(local);
                BsdfSample {
                    wi,
                    pdf: local.z * FRAC_1_PI,
                    value: if frame.to_local(wo).z > 0.0 {
                        self.albedo * FRAC_1_PI
                    } else {
                        Rgb::ZERO
                    },
                    is_specular: false,
                }
            }
            MaterialKind::Glossy => {
                let lo = frame.to_local(wo);
                let r = Vec3::new(-lo.x, -lo.y, lo.z);
                let e = self.phong_exponent();
                let cos_a = u.0.powf(1.0 / (e + 1.0));
                let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
                let phi = 2.0 * PI * u.1;
                let lobe = Frame::from_z(r);
                let li = lobe.to_world(Vec3::new(sin_a * phi.cos(), sin_a * phi.sin(), cos_a));
                let wi = frame.to_world(li);
                let pdf = (e + 1.0) / (2.0 * PI) * cos_a.powf(e);
                let value = if li.z > 0.0 && lo.z > 0.0 {
                    self.albedo * ((e + 2.0) / (2.0 * PI) * cos_a.powf(e))
                } else {
                    Rgb::ZERO
                };
                BsdfSample {
                    wi,
                    pdf,
                    value,
                    is_specular: false,
                }
            }
            MaterialKind::Mirror => {
                let b = self.specular_bounce(frame.n, wo, front_face, None);
                BsdfSample {
                    wi: b.wi,
                    pdf: 1.0,
                    value: b.throughput,
                    is_specular: true,
                }
            }
            MaterialKind::Transmission => {
                let b = self.specular_bounce(frame.n, wo, front_face, Some(u.0));
                BsdfSample {
                    wi: b.wi,
                    pdf: 1.0,
                    value: b.throughput,
                    is_specular: true,
                }
            }
        }
    }

    /// Follows a delta lobe. For transmission, `choice` selects reflection
    /// with probability equal to the Fresnel term; without it the refracted
    /// branch is taken deterministically and weighted by `1 - F`.
    pub fn specular_bounce(
        &self,
        n: Vec3,
        wo: Vec3,
        front_face: bool,
        choice: Option<f64>,
    ) -> SpecularBounce {
        let cos_o = wo.dot(n).max(0.0);
        match self.kind {
            MaterialKind::Transmission => {
                let eta = if front_face { 1.0 / self.ior } else { self.ior };
                let f0 = ((self.ior - 1.0) / (self.ior + 1.0)).powi(2);
                match refract(wo, n, eta) {
                    None => SpecularBounce {
                        wi: wo.reflect(n),
                        throughput: self.albedo,
                    },
                    Some(wt) => {
                        // Schlick uses the cosine on the optically thinner side.
                        let cos = if front_face { cos_o } else { wt.dot(-n) };
                        let f = schlick_scalar(f0, cos);
                        match choice {
                            Some(u) if u < f => SpecularBounce {
                                wi: wo.reflect(n),
                                throughput: self.albedo,
                            },
                            Some(_) => SpecularBounce {
                                wi: wt,
                                throughput: self.albedo,
                            },
                            None => SpecularBounce {
                                wi: wt,
                                throughput: self.albedo * (1.0 - f),
                            },
                        }
                    }
                }
            }
            _ => SpecularBounce {
                wi: wo.reflect(n),
                throughput: schlick(self.albedo, cos_o),
            },
        }
    }
}

/// Cosine-weighted direction about +z (Malley's method).
pub fn cosine_hemisphere(u: (f64, f64)) -> Vec3 {
    let r = u.0.sqrt();
    let phi = 2.0 * PI * u.1;
    Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u.0).max(0.0).sqrt())
}
