use std::f64::consts::PI;

use crate::math::{Rgb, Vec3};

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Ray {
        Ray {
            origin,
            dir,
            t_min: 0.0,
            t_max: f64::INFINITY,
        }
    }

    pub fn with_range(origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Ray {
        Ray {
            origin,
            dir,
            t_min,
            t_max,
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Nearest surface hit along a ray.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub position: Vec3,
    /// Geometric normal as authored (outward for spheres, `u × v` for quads).
    pub normal: Vec3,
    pub distance: f64,
    pub material_id: usize,
    pub primitive: usize,
    pub is_emitter: bool,
    pub emitted: Rgb,
}

impl Hit {
    /// True when the ray arrived on the side the geometric normal points to.
    pub fn front_face(&self, ray_dir: Vec3) -> bool {
        self.normal.dot(ray_dir) < 0.0
    }

    /// Normal flipped to the side the ray came from.
    pub fn shading_normal(&self, ray_dir: Vec3) -> Vec3 {
        if self.front_face(ray_dir) {
            self.normal
        } else {
            -self.normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat(f64::INFINITY),
        max: Vec3::splat(f64::NEG_INFINITY),
    };

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        Aabb {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 || d.y < 0.0 || d.z < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    pub fn centroid(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Slab test. Returns the entry distance when the ray overlaps the box
    /// within `[t_min, t_max]`.
    #[inline]
    pub fn hit(&self, origin: Vec3, inv_dir: Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf leaves the bound unchanged.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    /// Parallelogram spanned by two edges from a corner.
    Quad { corner: Vec3, edge_u: Vec3, edge_v: Vec3 },
    Triangle { p0: Vec3, p1: Vec3, p2: Vec3 },
}

/// A single intersectable element with its material binding.
#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub shape: Shape,
    pub material_id: usize,
}

/// Point sampled uniformly by area on a primitive.
#[derive(Debug, Clone, Copy)]
pub struct AreaSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub pdf_area: f64,
}

impl Shape {
    /// Distance and outward geometric normal of the hit, with the distance in
    /// `(t_min, t_max]`.
    #[inline]
    pub fn intersect(&self, ray: &Ray) -> Option<(f64, Vec3)> {
        match *self {
            Shape::Sphere { center, radius } => {
                let oc = ray.origin - center;
                let a = ray.dir.length_squared();
                let half_b = oc.dot(ray.dir);
                let c = oc.length_squared() - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let mut t = (-half_b - sq) / a;
                if t <= ray.t_min || t > ray.t_max {
                    t = (-half_b + sq) / a;
                    if t <= ray.t_min || t > ray.t_max {
                        return None;
                    }
                }
                let n = (ray.at(t) - center) / radius;
                Some((t, n))
            }
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => {
                let n = edge_u.cross(edge_v);
                let denom = n.dot(ray.dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = n.dot(corner - ray.origin) / denom;
                if t <= ray.t_min || t > ray.t_max {
                    return None;
                }
                let d = ray.at(t) - corner;
                let nn = n.length_squared();
                let alpha = n.dot(d.cross(edge_v)) / nn;
                let beta = n.dot(edge_u.cross(d)) / nn;
                if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
                    return None;
                }
                Some((t, n / nn.sqrt()))
            }
            Shape::Triangle { p0, p1, p2 } => {
                // Möller–Trumbore
                let e1 = p1 - p0;
                let e2 = p2 - p0;
                let pv = ray.dir.cross(e2);
                let det = e1.dot(pv);
                if det.abs() < 1e-14 {
                    return None;
                }
                let inv = 1.0 / det;
                let tv = ray.origin - p0;
                let u = tv.dot(pv) * inv;
                if !(0.0..=1.0).contains(&u) {
                    return None;
                }
                let qv = tv.cross(e1);
                let v = ray.dir.dot(qv) * inv;
                if v < 0.0 || u + v > 1.0 {
                    return None;
                }
                let t = e2.dot(qv) * inv;
                if t <= ray.t_min || t > ray.t_max {
                    return None;
                }
                Some((t, e1.cross(e2).normalized()))
            }
        }
    }

    pub fn bounds(&self) -> Aabb {
        match *self {
            Shape::Sphere { center, radius } => Aabb {
                min: center - Vec3::splat(radius),
                max: center + Vec3::splat(radius),
            },
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => Aabb::EMPTY
                .grow(corner)
                .grow(corner + edge_u)
                .grow(corner + edge_v)
                .grow(corner + edge_u + edge_v),
            Shape::Triangle { p0, p1, p2 } => Aabb::EMPTY.grow(p0).grow(p1).grow(p2),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Quad { edge_u, edge_v, .. } => edge_u.cross(edge_v).length(),
            Shape::Triangle { p0, p1, p2 } => 0.5 * (p1 - p0).cross(p2 - p0).length(),
        }
    }

    /// Uniform-by-area point sample.
    pub fn sample_area(&self, u: (f64, f64)) -> AreaSample {
        let pdf_area = 1.0 / self.area();
        match *self {
            Shape::Sphere { center, radius } => {
                let z = 1.0 - 2.0 * u.0;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = 2.0 * PI * u.1;
                let n = Vec3::new(r * phi.cos(), r * phi.sin(), z);
                AreaSample {
                    position: center + n * radius,
                    normal: n,
                    pdf_area,
                }
            }
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => AreaSample {
                position: corner + edge_u * u.0 + edge_v * u.1,
                normal: edge_u.cross(edge_v).normalized(),
                pdf_area,
            },
            Shape::Triangle { p0, p1, p2 } => {
                let su = u.0.sqrt();
                let b0 = 1.0 - su;
                let b1 = u.1 * su;
                AreaSample {
                    position: p0 * b0 + p1 * b1 + p2 * (1.0 - b0 - b1),
                    normal: (p1 - p0).cross(p2 - p0).normalized(),
                    pdf_area,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_axis_hit() {
        let s = Shape::Sphere {
            center: Vec3::ZERO,
            radius: 1.0,
        };
        let ray = Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::Z);
        let (t, n) = s.intersect(&ray).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert!((n - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-12);

        let short = Ray::with_range(ray.origin, ray.dir, 0.0, 3.0);
        assert!(s.intersect(&short).is_none());
    }

    #[test]
    fn sphere_from_inside_hits_far_side() {
        let s = Shape::Sphere {
            center: Vec3::ZERO,
            radius: 2.0,
        };
        let (t, n) = s.intersect(&Ray::new(Vec3::ZERO, Vec3::X)).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!((n - Vec3::X).length() < 1e-12);
    }

    #[test]
    fn quad_inside_and_outside() {
        let q = Shape::Quad {
            corner: Vec3::new(-1.0, -1.0, 2.0),
            edge_u: Vec3::new(2.0, 0.0, 0.0),
            edge_v: Vec3::new(0.0, 2.0, 0.0),
        };
        let (t, n) = q.intersect(&Ray::new(Vec3::ZERO, Vec3::Z)).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!((n - Vec3::Z).length() < 1e-12);
        let miss = Ray::new(Vec3::new(1.5, 0.0, 0.0), Vec3::Z);
        assert!(q.intersect(&miss).is_none());
        assert!((q.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_hit() {
        let tri = Shape::Triangle {
            p0: Vec3::new(0.0, 0.0, 1.0),
            p1: Vec3::new(1.0, 0.0, 1.0),
            p2: Vec3::new(0.0, 1.0, 1.0),
        };
        let (t, _) = tri
            .intersect(&Ray::new(Vec3::new(0.2, 0.2, 0.0), Vec3::Z))
            .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(tri
            .intersect(&Ray::new(Vec3::new(0.8, 0.8, 0.0), Vec3::Z))
            .is_none());
    }

    #[test]
    fn area_samples_lie_on_shape() {
        let shapes = [
            Shape::Sphere {
                center: Vec3::new(1.0, 2.0, 3.0),
                radius: 0.5,
            },
            Shape::Quad {
                corner: Vec3::ZERO,
                edge_u: Vec3::X,
                edge_v: Vec3::Y * 2.0,
            },
        ];
        for s in shapes {
            for i in 0..16 {
                let u = ((i as f64 + 0.5) / 16.0, ((i * 7 % 16) as f64 + 0.5) / 16.0);
                let p = s.sample_area(u);
                assert!((p.pdf_area * s.area() - 1.0).abs() < 1e-12);
                let b = s.bounds();
                assert!(p.position.x >= b.min.x - 1e-9 && p.position.x <= b.max.x + 1e-9);
            }
        }
    }
}
