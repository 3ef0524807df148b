use drc_core::dataset::{
    generate_examples, grid_pixel, parse_dataset, read_dataset, write_dataset, DatasetConfig, TrainingExample,
    INPUT_LEN, TARGET_LEN,
};
use drc_core::integrator::PathSettings;
use drc_core::scene::{load_scene, parse_scene};
use drc_core::Error;

const SCENES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenes");

fn example(id: &str, seed: usize) -> TrainingExample {
    TrainingExample {
        scene_id: id.into(),
        pixel: (seed as u32, 2 * seed as u32),
        s_r: 0.5 + seed as f32,
        s_d: 3.0,
        input: (0..INPUT_LEN).map(|i| ((i * 31 + seed) % 97) as f32 / 97.0).collect(),
        target: (0..TARGET_LEN).map(|i| ((i * 17 + seed) % 89) as f32 / 89.0).collect(),
    }
}

#[test]
fn dataset_round_trip() {
    let examples = vec![example("a", 1), example("bathroom-ü", 2)];
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &examples).unwrap();
    assert_eq!(&bytes[..4], b"DRCD");
    assert_eq!(u16::from_le_bytes([bytes[12], bytes[13]]), 32);
    assert_eq!(read_dataset(bytes.as_slice()).unwrap(), examples);
}

#[test]
fn corrupt_count_is_a_framing_error() {
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &[example("a", 1)]).unwrap();
    bytes[8] = 2;
    match parse_dataset(&bytes) {
        Err(Error::Framing { format, offset, .. }) => {
            assert_eq!(format, "DRCD");
            assert_eq!(offset, bytes.len());
        }
        other => panic!("expected framing error, got {other:?}"),
    }
    bytes[8] = 0;
    assert!(matches!(parse_dataset(&bytes), Err(Error::Framing { .. })));
    assert!(matches!(parse_dataset(&bytes[..10]), Err(Error::Framing { .. })));
}

#[test]
fn generated_examples_have_consistent_scales() {
    let scene = load_scene(format!("{SCENES}/cornell.scn")).unwrap();
    let config = DatasetConfig {
        grid: (2, 2),
        ref_spp: 256,
        seed: 4,
        path: PathSettings::default(),
    };
    let examples = generate_examples(&scene, "cornell", &config).unwrap();
    assert_eq!(examples.len(), 4);
    for (k, ex) in examples.iter().enumerate() {
        let (i, j) = (k as u32 % 2, k as u32 / 2);
        assert_eq!(ex.pixel, grid_pixel(i, j, (2, 2), [64, 64]));
        assert_eq!(ex.input.len(), INPUT_LEN);
        assert_eq!(ex.target.len(), TARGET_LEN);
        // The normalized input radiance has mean luminance s_r / (s_r + eps) < 1.
        let lum: f64 = (0..1024)
            .map(|t| {
                0.2126 * ex.input[t] as f64 + 0.7152 * ex.input[1024 + t] as f64 + 0.0722 * ex.input[2048 + t] as f64
            })
            .sum::<f64>()
            / 1024.0;
        assert!(lum > 0.5 && lum <= 1.0, "mean normalized luminance {lum}");
        let max_d = ex.input[6 * 1024..].iter().cloned().fold(0.0f32, f32::max);
        assert!((max_d - 1.0).abs() < 1e-6);
        assert!(ex.target.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    let again = generate_examples(&scene, "cornell", &config).unwrap();
    assert_eq!(examples, again);
}

#[test]
fn unlit_scene_gives_zero_maps() {
    let scene = parse_scene(
        r#"{ "camera": { "position": [0,0,3], "look_at": [0,0,0], "up": [0,1,0], "fov": 40, "resolution": [8,8] },
             "materials": [ { "name": "m", "kind": "diffuse", "albedo": [0.5,0.5,0.5] } ],
             "shapes": [ { "type": "quad", "corner": [-5,-5,0], "edge_u": [10,0,0], "edge_v": [0,10,0], "material": "m" },
                         { "type": "sphere", "center": [0,0,0.5], "radius": 0.4, "material": "m" } ],
             "global_up": [0,1,0] }"#,
    )
    .unwrap();
    let config = DatasetConfig {
        grid: (2, 2),
        ref_spp: 256,
        ..DatasetConfig::default()
    };
    let examples = generate_examples(&scene, "dark", &config).unwrap();
    assert!(!examples.is_empty());
    for ex in examples {
        assert!(ex.input[..3 * 1024].iter().all(|&v| v == 0.0));
        assert!(ex.target.iter().all(|&v| v == 0.0));
        assert!((ex.s_r - 1e-3).abs() < 1e-9);
    }
}

#[test]
fn bad_configs_are_rejected() {
    let scene = load_scene(format!("{SCENES}/cornell.scn")).unwrap();
    for (grid, ref_spp) in [((0, 2), 256), ((65, 2), 256), ((2, 2), 255)] {
        let config = DatasetConfig {
            grid,
            ref_spp,
            ..DatasetConfig::default()
        };
        assert!(matches!(generate_examples(&scene, "c", &config), Err(Error::Config(_))));
    }
}
