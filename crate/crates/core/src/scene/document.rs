//! Scene document: a JSON object with `camera`, `materials`, `shapes`,
//! `point_lights`, `global_up` and an optional constant `background`.
//!
//! ```json
//! {
//!   "camera": { "position": [0, 1, 4], "look_at": [0, 1, 0], "up": [0, 1, 0],
//!               "fov": 40, "resolution": [64, 64] },
//!   "materials": [ { "name": "white", "kind": "diffuse", "albedo": [0.7, 0.7, 0.7] } ],
//!   "shapes": [ { "type": "sphere", "center": [0, 1, 0], "radius": 1, "material": "white" } ],
//!   "point_lights": [ { "position": [0, 3, 0], "intensity": [5, 5, 5] } ],
//!   "global_up": [0, 1, 0]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::scene::material::MaterialKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub camera: CameraDesc,
    pub materials: Vec<MaterialDesc>,
    pub shapes: Vec<ShapeDesc>,
    #[serde(default)]
    pub point_lights: Vec<PointLightDesc>,
    pub global_up: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov: f64,
    /// `[width, height]` in pixels.
    pub resolution: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDesc {
    pub name: String,
    pub kind: MaterialKind,
    pub albedo: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ior: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDesc {
    Sphere {
        center: Vec3,
        radius: f64,
        material: String,
    },
    Quad {
        corner: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        material: String,
    },
    /// Axis-aligned box expanded into six outward-facing quads.
    Box {
        min: Vec3,
        max: Vec3,
        material: String,
    },
    Mesh {
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        material: String,
    },
}

impl ShapeDesc {
    pub fn material(&self) -> &str {
        match self {
            ShapeDesc::Sphere { material, .. }
            | ShapeDesc::Quad { material, .. }
            | ShapeDesc::Box { material, .. }
            | ShapeDesc::Mesh { material, .. } => material,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLightDesc {
    pub position: Vec3,
    /// Radiant intensity, W/sr per channel.
    pub intensity: Vec3,
}
