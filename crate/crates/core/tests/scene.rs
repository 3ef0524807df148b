use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use drc_core::math::{Frame, Rgb, Vec3};
use drc_core::scene::{load_scene, parse_scene, Material, MaterialKind, Ray};
use drc_core::Error;

const SCENES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenes");

fn unit(rng: &mut Pcg64) -> Vec3 {
    let z = rng.random::<f64>() * 2.0 - 1.0;
    let phi = rng.random::<f64>() * 2.0 * PI;
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

#[test]
fn frames_are_orthonormal() {
    let mut rng = Pcg64::seed_from_u64(1);
    let mut normals: Vec<Vec3> = (0..1000).map(|_| unit(&mut rng)).collect();
    normals.extend([Vec3::Y, -Vec3::Y, Vec3::new(1e-9, 1.0, 0.0).normalized()]);
    for n in normals {
        for f in [Frame::from_normal_and_up(n, Vec3::Y), Frame::from_z(n)] {
            let local = f.to_local(n);
            assert!((local.z - 1.0).abs() < 1e-12);
            for (a, b) in [(Vec3::X, Vec3::Y), (Vec3::Y, Vec3::Z), (Vec3::X, Vec3::Z)] {
                let (wa, wb) = (f.to_world(a), f.to_world(b));
                assert!(wa.dot(wb).abs() < 1e-12);
                assert!((wa.length() - 1.0).abs() < 1e-12);
            }
            let cross = f.to_world(Vec3::X).cross(f.to_world(Vec3::Y));
            assert!((cross - n).length() < 1e-12);
        }
    }
}

#[test]
fn diffuse_sampling_is_cosine_distributed() {
    let m = Material::diffuse("d", Rgb::splat(0.5));
    let frame = Frame::IDENTITY;
    let mut rng = Pcg64::seed_from_u64(2);
    let bins = 10;
    let mut counts = vec![0u32; bins * bins];
    let n = 200_000;
    for _ in 0..n {
        let s = m.sample(&frame, Vec3::Z, (rng.random(), rng.random()), true);
        // Under a cosine density, cos²θ and φ are independent and uniform.
        let a = s.wi.z * s.wi.z;
        let phi = s.wi.y.atan2(s.wi.x).rem_euclid(2.0 * PI) / (2.0 * PI);
        let i = ((a * bins as f64) as usize).min(bins - 1);
        let j = ((phi * bins as f64) as usize).min(bins - 1);
        counts[i * bins + j] += 1;
        assert!((s.pdf - s.wi.z / PI).abs() < 1e-9);
    }
    let expected = n as f64 / (bins * bins) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins * bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} vs {critical}");
}

#[test]
fn glossy_albedo_does_not_exceed_reflectance() {
    let rho = 0.8;
    let mut rng = Pcg64::seed_from_u64(3);
    for roughness in [0.05, 0.25, 0.6, 1.0] {
        let doc = format!(
            r#"{{ "camera": {{ "position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0], "fov": 40, "resolution": [4,4] }},
                 "materials": [ {{ "name": "g", "kind": "glossy", "albedo": [{rho},{rho},{rho}], "roughness": {roughness} }} ],
                 "shapes": [ {{ "type": "sphere", "center": [0,0,0], "radius": 1, "material": "g" }} ],
                 "global_up": [0,1,0] }}"#
        );
        let scene = parse_scene(&doc).unwrap();
        let m = &scene.materials[0];
        assert_eq!(m.kind, MaterialKind::Glossy);
        for cos_o in [1.0, 0.7, 0.3, 0.05] {
            let wo = Vec3::new((1.0f64 - cos_o * cos_o).sqrt(), 0.0, cos_o);
            let n = 100_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let s = m.sample(&Frame::IDENTITY, wo, (rng.random(), rng.random()), true);
                sum += s.weight(Vec3::Z).x;
            }
            let albedo = sum / n as f64;
            assert!(albedo <= rho + 0.01, "roughness {roughness} cos {cos_o}: albedo {albedo}");
        }
    }
}

#[test]
fn diffuse_eval_matches_pdf_and_reflectance() {
    let m = Material::diffuse("d", Rgb::splat(0.3));
    let wi = Vec3::new(0.6, 0.0, 0.8);
    let f = m.eval(&Frame::IDENTITY, Vec3::Z, wi).unwrap();
    assert!((f.x - 0.3 / PI).abs() < 1e-12);
    assert!((m.pdf(&Frame::IDENTITY, Vec3::Z, wi) - 0.8 / PI).abs() < 1e-12);
    assert!(m.eval(&Frame::IDENTITY, Vec3::Z, -wi).unwrap().is_black());
}

#[test]
fn bundled_scenes_load() {
    for (name, res) in [("cornell", 64), ("glossy_box", 64), ("interior", 128)] {
        let scene = load_scene(format!("{SCENES}/{name}.scn")).unwrap();
        assert_eq!(scene.camera.resolution(), [res, res]);
        assert!(!scene.lights.is_empty());
    }
}

#[test]
fn semantic_errors_are_reported() {
    let base = |materials: &str, shapes: &str| {
        format!(
            r#"{{ "camera": {{ "position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0], "fov": 40, "resolution": [4,4] }},
                 "materials": [{materials}], "shapes": [{shapes}], "global_up": [0,1,0] }}"#
        )
    };
    let ok_mat = r#"{ "name": "m", "kind": "diffuse", "albedo": [0.5,0.5,0.5] }"#;
    let sphere = r#"{ "type": "sphere", "center": [0,0,0], "radius": 1, "material": "m" }"#;
    assert!(parse_scene(&base(ok_mat, sphere)).is_ok());
    let cases = [
        base(r#"{ "name": "m", "kind": "diffuse", "albedo": [1.2,0.5,0.5] }"#, sphere),
        base(ok_mat, r#"{ "type": "sphere", "center": [0,0,0], "radius": -1, "material": "m" }"#),
        base(ok_mat, r#"{ "type": "sphere", "center": [0,0,0], "radius": 1, "material": "nope" }"#),
        base(r#"{ "name": "m", "kind": "glossy", "albedo": [0.5,0.5,0.5] }"#, sphere),
        base(&format!("{ok_mat}, {ok_mat}"), sphere),
    ];
    for text in cases {
        assert!(matches!(parse_scene(&text), Err(Error::SceneSemantic(_))), "{text}");
    }
    assert!(matches!(parse_scene("{ \"camera\": 3 }"), Err(Error::SceneSyntax { .. })));
}

#[test]
fn scene_document_round_trips() {
    let scene = load_scene(format!("{SCENES}/cornell.scn")).unwrap();
    let again = parse_scene(&scene.to_json()).unwrap();
    assert_eq!(scene.document(), again.document());
}

proptest! {
    #[test]
    fn bvh_agrees_with_linear_scan(
        centers in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, -4.0f64..4.0, 0.05f64..0.8), 1..40),
        origin in (-6.0f64..6.0, -6.0f64..6.0, -6.0f64..6.0),
        dir in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
    ) {
        let d = Vec3::new(dir.0, dir.1, dir.2);
        prop_assume!(d.length() > 1e-3);
        let shapes: Vec<String> = centers
            .iter()
            .enumerate()
            .map(|(i, &(x, y, z, r))| {
                if i % 2 == 0 {
                    format!(r#"{{ "type": "sphere", "center": [{x},{y},{z}], "radius": {r}, "material": "m" }}"#)
                } else {
                    format!(r#"{{ "type": "box", "min": [{x},{y},{z}], "max": [{},{},{}], "material": "m" }}"#, x + r, y + r, z + r)
                }
            })
            .collect();
        let doc = format!(
            r#"{{ "camera": {{ "position": [0,0,9], "look_at": [0,0,0], "up": [0,1,0], "fov": 40, "resolution": [4,4] }},
                 "materials": [ {{ "name": "m", "kind": "diffuse", "albedo": [0.5,0.5,0.5] }} ],
                 "shapes": [{}], "global_up": [0,1,0] }}"#,
            shapes.join(",")
        );
        let scene = parse_scene(&doc).unwrap();
        let ray = Ray::new(Vec3::new(origin.0, origin.1, origin.2), d.normalized());
        let a = scene.intersect(&ray).map(|h| (h.primitive, h.distance));
        let b = scene.intersect_linear(&ray).map(|h| (h.primitive, h.distance));
        prop_assert_eq!(a, b);
    }
}
