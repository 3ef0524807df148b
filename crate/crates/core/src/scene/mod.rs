//! Scene representation, parsing and ray queries.

mod bvh;
mod document;
mod geometry;
mod material;

pub use bvh::{intersect_linear, Bvh};
pub use document::{CameraDesc, MaterialDesc, PointLightDesc, SceneDocument, ShapeDesc};
pub use geometry::{Aabb, AreaSample, Hit, Primitive, Ray, Shape};
pub use material::{
    cosine_hemisphere, refract, schlick, BsdfSample, Material, MaterialKind, SpecularBounce,
};

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

#[derive(Debug, Clone)]
pub struct Camera {
    pub position: Vec3,
    pub width: u32,
    pub height: u32,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    tan_half_fov: f64,
}

impl Camera {
    fn new(desc: &CameraDesc) -> Camera {
        let forward = (desc.look_at - desc.position).normalized();
        let right = forward.cross(desc.up).normalized();
        let up = right.cross(forward);
        Camera {
            position: desc.position,
            width: desc.resolution[0],
            height: desc.resolution[1],
            forward,
            right,
            up,
            tan_half_fov: (desc.fov.to_radians() * 0.5).tan(),
        }
    }

    /// Primary ray through image position `(px + jx, py + jy)`, where
    /// `(0, 0)` is the top-left corner of the image.
    pub fn generate_ray(&self, px: f64, py: f64) -> Ray {
        let aspect = self.width as f64 / self.height as f64;
        let x = (2.0 * px / self.width as f64 - 1.0) * aspect * self.tan_half_fov;
        let y = (1.0 - 2.0 * py / self.height as f64) * self.tan_half_fov;
        let dir = (self.forward + self.right * x + self.up * y).normalized();
        Ray::new(self.position, dir)
    }

    pub fn resolution(&self) -> [u32; 2] {
        [self.width, self.height]
    }

    /// Ray through the center of pixel `(x, y)`.
    pub fn pixel_center_ray(&self, x: u32, y: u32) -> Ray {
        self.generate_ray(x as f64 + 0.5, y as f64 + 0.5)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Light {
    Point { position: Vec3, intensity: Rgb },
    /// Emissive primitive, by index.
    Area { primitive: usize },
}

/// Immutable, validated scene ready for rendering.
#[derive(Debug, Clone)]
pub struct Scene {
    document: SceneDocument,
    pub camera: Camera,
    pub materials: Vec<Material>,
    pub primitives: Vec<Primitive>,
    pub lights: Vec<Light>,
    /// Light index of each primitive, if emissive.
    primitive_light: Vec<Option<usize>>,
    pub global_up: Vec3,
    pub background: Rgb,
    bvh: Bvh,
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let doc: SceneDocument = serde_json::from_str(text).map_err(|e| Error::SceneSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Scene::from_document(doc)
}

/// Reads and parses a scene file.
pub fn load_scene(path: impl AsRef<std::path::Path>) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?)
}

fn check_finite(what: &str, v: Vec3) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::SceneSemantic(format!("{what} has non-finite components")))
    }
}

fn build_material(desc: &MaterialDesc) -> Result<Material> {
    let name = &desc.name;
    check_finite(&format!("material `{name}` albedo"), desc.albedo)?;
    let emission = desc.emission.unwrap_or(Rgb::ZERO);
    check_finite(&format!("material `{name}` emission"), emission)?;
    if desc.albedo.min_component() < 0.0 || emission.min_component() < 0.0 {
        return Err(Error::SceneSemantic(format!(
            "material `{name}` has negative albedo or emission"
        )));
    }
    if emission.is_black() && desc.albedo.max_component() >= 1.0 {
        return Err(Error::SceneSemantic(format!(
            "material `{name}`: albedo must be below 1 for non-emitters"
        )));
    }
    if desc.albedo.max_component() > 1.0 {
        return Err(Error::SceneSemantic(format!(
            "material `{name}`: albedo exceeds 1"
        )));
    }
    let roughness = match (desc.kind, desc.roughness) {
        (MaterialKind::Glossy, Some(r)) if r > 0.0 && r <= 1.0 => r,
        (MaterialKind::Glossy, Some(r)) => {
            return Err(Error::SceneSemantic(format!(
                "material `{name}`: roughness {r} outside (0, 1]"
            )))
        }
        (MaterialKind::Glossy, None) => {
            return Err(Error::SceneSemantic(format!(
                "glossy material `{name}` needs a roughness"
            )))
        }
        (_, r) => r.unwrap_or(1.0),
    };
    let ior = match (desc.kind, desc.ior) {
        (_, Some(i)) if !(i > 0.0 && i.is_finite()) => {
            return Err(Error::SceneSemantic(format!(
                "material `{name}`: ior must be positive"
            )))
        }
        (_, Some(i)) => i,
        (MaterialKind::Transmission, None) => {
            return Err(Error::SceneSemantic(format!(
                "transmission material `{name}` needs an ior"
            )))
        }
        (_, None) => 1.5,
    };
    Ok(Material {
        name: name.clone(),
        kind: desc.kind,
        albedo: desc.albedo,
        roughness,
        ior,
        emission,
    })
}

fn box_quads(min: Vec3, max: Vec3) -> [Shape; 6] {
    let d = max - min;
    let (dx, dy, dz) = (
        Vec3::new(d.x, 0.0, 0.0),
        Vec3::new(0.0, d.y, 0.0),
        Vec3::new(0.0, 0.0, d.z),
    );
    let q = |corner, edge_u, edge_v| Shape::Quad {
        corner,
        edge_u,
        edge_v,
    };
    [
        q(min, dz, dy),                     // -x
        q(min + dx, dy, dz),                // +x
        q(min, dx, dz),                     // -y
        q(min + dy, dz, dx),                // +y
        q(min, dy, dx),                     // -z
        q(min + dz, dx, dy),                // +z
    ]
}

impl Scene {
    pub fn from_document(doc: SceneDocument) -> Result<Scene> {
        let cam = &doc.camera;
        if !(cam.fov > 0.0 && cam.fov < 180.0) {
            return Err(Error::SceneSemantic(format!(
                "camera fov {} outside (0, 180)",
                cam.fov
            )));
        }
        if cam.resolution[0] == 0 || cam.resolution[1] == 0 {
            return Err(Error::SceneSemantic("camera resolution must be nonzero".into()));
        }
        for (what, v) in [
            ("camera position", cam.position),
            ("camera look_at", cam.look_at),
            ("camera up", cam.up),
        ] {
            check_finite(what, v)?;
        }
        let forward = cam.look_at - cam.position;
        if forward.length() == 0.0 || forward.cross(cam.up).length() < 1e-12 {
            return Err(Error::SceneSemantic(
                "camera look direction is degenerate or parallel to up".into(),
            ));
        }
        check_finite("global_up", doc.global_up)?;
        if doc.global_up.length() < 1e-12 {
            return Err(Error::SceneSemantic("global_up must be nonzero".into()));
        }

        let mut materials = Vec::with_capacity(doc.materials.len());
        for m in &doc.materials {
            if materials.iter().any(|x: &Material| x.name == m.name) {
                return Err(Error::SceneSemantic(format!(
                    "duplicate material `{}`",
                    m.name
                )));
            }
            materials.push(build_material(m)?);
        }

        let mut primitives = Vec::new();
        for shape in &doc.shapes {
            let name = shape.material();
            let material_id = materials
                .iter()
                .position(|m| m.name == name)
                .ok_or_else(|| {
                    Error::SceneSemantic(format!("shape references undeclared material `{name}`"))
                })?;
            let mut push = |s: Shape| primitives.push(Primitive { shape: s, material_id });
            match shape {
                ShapeDesc::Sphere { center, radius, .. } => {
                    check_finite("sphere center", *center)?;
                    if !(*radius > 0.0 && radius.is_finite()) {
                        return Err(Error::SceneSemantic("sphere radius must be positive".into()));
                    }
                    push(Shape::Sphere {
                        center: *center,
                        radius: *radius,
                    });
                }
                ShapeDesc::Quad {
                    corner,
                    edge_u,
                    edge_v,
                    ..
                } => {
                    if edge_u.cross(*edge_v).length() <= 0.0 {
                        return Err(Error::SceneSemantic("quad edges are degenerate".into()));
                    }
                    push(Shape::Quad {
                        corner: *corner,
                        edge_u: *edge_u,
                        edge_v: *edge_v,
                    });
                }
                ShapeDesc::Box { min, max, .. } => {
                    let d = *max - *min;
                    if d.min_component() <= 0.0 {
                        return Err(Error::SceneSemantic("box max must exceed min".into()));
                    }
                    for q in box_quads(*min, *max) {
                        push(q);
                    }
                }
                ShapeDesc::Mesh {
                    vertices,
                    triangles,
                    ..
                } => {
                    for tri in triangles {
                        let get = |i: u32| {
                            vertices.get(i as usize).copied().ok_or_else(|| {
                                Error::SceneSemantic(format!("mesh index {i} out of range"))
                            })
                        };
                        let (p0, p1, p2) = (get(tri[0])?, get(tri[1])?, get(tri[2])?);
                        if (p1 - p0).cross(p2 - p0).length() > 0.0 {
                            push(Shape::Triangle { p0, p1, p2 });
                        }
                    }
                }
            }
        }

        let mut lights = Vec::new();
        for pl in &doc.point_lights {
            check_finite("point light", pl.position)?;
            if pl.intensity.min_component() < 0.0 || !pl.intensity.is_finite() {
                return Err(Error::SceneSemantic(
                    "point light intensity must be nonnegative".into(),
                ));
            }
            lights.push(Light::Point {
                position: pl.position,
                intensity: pl.intensity,
            });
        }
        let mut primitive_light = vec![None; primitives.len()];
        for (i, p) in primitives.iter().enumerate() {
            if materials[p.material_id].is_emitter() {
                primitive_light[i] = Some(lights.len());
                lights.push(Light::Area { primitive: i });
            }
        }

        let background = doc.background.unwrap_or(Rgb::ZERO);
        check_finite("background", background)?;
        if background.min_component() < 0.0 {
            return Err(Error::SceneSemantic("background must be nonnegative".into()));
        }

        let bvh = Bvh::build(&primitives);
        Ok(Scene {
            camera: Camera::new(&doc.camera),
            global_up: doc.global_up.normalized(),
            materials,
            primitives,
            lights,
            primitive_light,
            background,
            bvh,
            document: doc,
        })
    }

    pub fn document(&self) -> &SceneDocument {
        &self.document
    }

    /// Serializes the scene back to its document form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("scene document serializes")
    }

    /// Nearest hit within `(t_min, t_max]`.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.bvh
            .intersect(&self.primitives, ray)
            .map(|(pi, t, n)| self.make_hit(ray, pi, t, n))
    }

    /// Exhaustive-scan variant of [`Scene::intersect`].
    pub fn intersect_linear(&self, ray: &Ray) -> Option<Hit> {
        intersect_linear(&self.primitives, ray).map(|(pi, t, n)| self.make_hit(ray, pi, t, n))
    }

    /// True when nothing blocks the open segment `(t_min, t_max)`.
    pub fn unoccluded(&self, ray: &Ray) -> bool {
        self.bvh.intersect(&self.primitives, ray).is_none()
    }

    fn make_hit(&self, ray: &Ray, pi: usize, t: f64, n: Vec3) -> Hit {
        let material_id = self.primitives[pi].material_id;
        let emitted = self.materials[material_id].emission;
        Hit {
            position: ray.at(t),
            normal: n,
            distance: t,
            material_id,
            primitive: pi,
            is_emitter: !emitted.is_black(),
            emitted,
        }
    }

    pub fn material(&self, id: usize) -> &Material {
        &self.materials[id]
    }

    pub fn light_of_primitive(&self, pi: usize) -> Option<usize> {
        self.primitive_light[pi]
    }

    pub fn emitter_count(&self) -> usize {
        self.lights
            .iter()
            .filter(|l| matches!(l, Light::Area { .. }))
            .count()
    }

    /// Solid-angle density of sampling `to_light` toward an area light
    /// point at `distance` with surface normal `light_normal`, given uniform
    /// light selection and uniform-by-area point sampling.
    pub fn area_light_pdf(&self, pi: usize, to_light: Vec3, distance: f64, light_normal: Vec3) -> f64 {
        let cos_l = light_normal.dot(to_light).abs();
        if cos_l <= 0.0 {
            return 0.0;
        }
        let area = self.primitives[pi].shape.area();
        distance * distance / (cos_l * area * self.lights.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "camera": {"position": [0, 0, -5], "look_at": [0, 0, 0], "up": [0, 1, 0],
                   "fov": 45, "resolution": [64, 64]},
        "materials": [{"name": "white", "kind": "diffuse", "albedo": [0.5, 0.5, 0.5]}],
        "shapes": [{"type": "sphere", "center": [0, 0, 0], "radius": 1, "material": "white"}],
        "point_lights": [{"position": [0, 5, 0], "intensity": [10, 10, 10]}],
        "global_up": [0, 1, 0]
    }"#;

    #[test]
    fn minimal_document() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.document().shapes.len(), 1);
        assert_eq!(s.lights.len(), 1);
        assert_eq!((s.camera.width, s.camera.height), (64, 64));
    }

    #[test]
    fn undeclared_material_is_named() {
        let text = MINIMAL.replace(r#""material": "white""#, r#""material": "red""#);
        match parse_scene(&text) {
            Err(Error::SceneSemantic(msg)) => assert!(msg.contains("red"), "{msg}"),
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn bad_fov_rejected() {
        let text = MINIMAL.replace(r#""fov": 45"#, r#""fov": 180"#);
        assert!(matches!(parse_scene(&text), Err(Error::SceneSemantic(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace(r#""global_up""#, r#""sky": 1, "global_up""#);
        assert!(matches!(parse_scene(&text), Err(Error::SceneSyntax { .. })));
        let text = MINIMAL.replace(r#""radius": 1,"#, r#""radius": 1, "segments": 8,"#);
        assert!(matches!(parse_scene(&text), Err(Error::SceneSyntax { .. })));
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = "{\n  \"camera\": {\n    \"fov\" 45\n}";
        match parse_scene(text) {
            Err(Error::SceneSyntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn albedo_of_one_rejected_for_non_emitter() {
        let text = MINIMAL.replace("[0.5, 0.5, 0.5]", "[1.0, 0.5, 0.5]");
        assert!(matches!(parse_scene(&text), Err(Error::SceneSemantic(_))));
    }

    #[test]
    fn box_expands_to_outward_quads() {
        let text = MINIMAL.replace(
            r#"{"type": "sphere", "center": [0, 0, 0], "radius": 1, "material": "white"}"#,
            r#"{"type": "box", "min": [-1, -1, -1], "max": [1, 1, 1], "material": "white"}"#,
        );
        let s = parse_scene(&text).unwrap();
        assert_eq!(s.primitives.len(), 6);
        for p in &s.primitives {
            let b = p.shape.bounds();
            let c = b.centroid();
            if let Shape::Quad { edge_u, edge_v, .. } = p.shape {
                // outward: normal points away from the box center
                assert!(edge_u.cross(edge_v).dot(c) > 0.0);
            }
        }
        let hit = s
            .intersect(&Ray::new(Vec3::new(0.0, 0.0, -5.0), Vec3::Z))
            .unwrap();
        assert!((hit.distance - 4.0).abs() < 1e-12);
        assert!(hit.front_face(Vec3::Z));
    }

    #[test]
    fn emissive_primitives_become_lights() {
        let text = MINIMAL.replace(
            r#""albedo": [0.5, 0.5, 0.5]}"#,
            r#""albedo": [0.5, 0.5, 0.5], "emission": [2, 2, 2]}"#,
        );
        let s = parse_scene(&text).unwrap();
        assert_eq!(s.lights.len(), 2);
        assert_eq!(s.light_of_primitive(0), Some(1));
        assert_eq!(s.emitter_count(), 1);
    }
}
