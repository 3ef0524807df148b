use drc_core::cnn::{
    blur_weights, gaussian_blur, ops, parse_drcw, random_weights, tensor_table, write_drcw, zero_weights, NamedTensor,
    Network, Tensor, WeightFile,
};
use drc_core::dataset::parse_dataset;
use drc_core::hemimap::HemiMap;
use drc_core::math::Frame;
use drc_core::Error;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{FIXTURES}/{name}")).unwrap()
}

fn golden_outputs() -> Vec<Vec<f32>> {
    fixture("golden_outputs.f32")
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>()
        .chunks(3 * 1024)
        .map(|c| c.to_vec())
        .collect()
}

#[test]
fn matches_torch_reference() {
    let net = Network::from_bytes(&fixture("golden_k8.drcw")).unwrap();
    assert_eq!(net.base_width(), 8);
    let examples = parse_dataset(&fixture("golden_inputs.drcd")).unwrap();
    let golden = golden_outputs();
    assert_eq!(examples.len(), golden.len());
    for (ex, want) in examples.iter().zip(&golden) {
        let out = net.forward(&ex.input_tensor()).unwrap();
        assert_eq!(out.shape(), (3, 32, 32));
        let err = out
            .data()
            .iter()
            .zip(want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err <= 1e-6, "max abs error {err}");
    }
}

#[test]
fn zero_network_outputs_zero() {
    let net = Network::from_weights(zero_weights(8).unwrap()).unwrap();
    let mut input = Tensor::zeros(7, 32, 32);
    for (i, v) in input.data_mut().iter_mut().enumerate() {
        *v = ((i * 37) % 101) as f32 / 50.0 - 1.0;
    }
    let out = net.forward(&input).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv_of_ones_counts_taps() {
    let input = Tensor::from_vec(1, 3, 3, vec![1.0; 9]).unwrap();
    let out = ops::conv2d(&input, &[1.0 / 9.0; 9], &[0.0], 1, 3).unwrap();
    assert!((out.at(0, 1, 1) - 1.0).abs() < 1e-7);
    assert!((out.at(0, 0, 1) - 6.0 / 9.0).abs() < 1e-7);
    assert!((out.at(0, 0, 0) - 4.0 / 9.0).abs() < 1e-7);
}

#[test]
fn deconv_with_centre_tap_is_identity() {
    let input = Tensor::from_vec(2, 2, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
    let mut w = vec![0.0; 2 * 2 * 9];
    w[4] = 1.0;
    w[(2 + 1) * 9 + 4] = 1.0;
    let out = ops::deconv2d(&input, &w, &[0.5, -0.5], 2, 3).unwrap();
    let want = [1.5, 2.5, 3.5, 4.5, 4.5, 5.5, 6.5, 7.5];
    assert_eq!(out.data(), &want);
}

#[test]
fn upsample_interpolates_half_pixel_centres() {
    let input = Tensor::from_vec(1, 1, 2, vec![0.0, 1.0]).unwrap();
    let out = ops::upsample_bilinear2x2(&input);
    assert_eq!(out.shape(), (1, 2, 4));
    assert_eq!(&out.data()[..4], &[0.0, 0.25, 0.75, 1.0]);
    assert_eq!(&out.data()[4..], &[0.0, 0.25, 0.75, 1.0]);
}

#[test]
fn batchnorm_follows_formula() {
    let x = Tensor::from_vec(1, 1, 2, vec![3.0, -1.0]).unwrap();
    let out = ops::batchnorm_infer(&x, &[2.0], &[0.5], &[1.0], &[4.0], 1e-5).unwrap();
    let s = 2.0 / (4.0f64 + 1e-5).sqrt();
    assert!((out.data()[0] as f64 - (2.0 * s + 0.5)).abs() < 1e-6);
    assert!((out.data()[1] as f64 - (-2.0 * s + 0.5)).abs() < 1e-6);
}

#[test]
fn maxpool_takes_block_maxima() {
    let x = Tensor::from_vec(1, 2, 4, vec![1.0, 5.0, -2.0, -3.0, 4.0, 2.0, -1.0, -4.0]).unwrap();
    assert_eq!(ops::maxpool2x2(&x).unwrap().data(), &[5.0, -1.0]);
    assert!(ops::maxpool2x2(&Tensor::zeros(1, 3, 4)).is_err());
}

#[test]
fn leaky_relu_scales_negatives() {
    let x = Tensor::from_vec(1, 1, 3, vec![-2.0, 0.0, 3.0]).unwrap();
    assert_eq!(ops::leaky_relu(&x, 0.01).data(), &[-0.02, 0.0, 3.0]);
}

fn reshaped(file: &mut WeightFile, name: &str, dims: Vec<usize>) {
    let t = file.tensors.iter_mut().find(|t| t.name == name).unwrap();
    let n = dims.iter().product();
    *t = NamedTensor::new(name, dims, vec![0.0; n]);
}

#[test]
fn rejects_kernel_of_wrong_size() {
    let mut file = zero_weights(8).unwrap();
    reshaped(&mut file, "enc2.conv1.weight", vec![16, 8, 5, 5]);
    match Network::from_weights(file) {
        Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "enc2.conv1.weight"),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn rejects_first_kernel_of_wrong_size() {
    let mut file = zero_weights(8).unwrap();
    reshaped(&mut file, "enc1.conv1.weight", vec![8, 7, 5, 5]);
    match Network::from_weights(file) {
        Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "enc1.conv1.weight"),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn rejects_missing_and_extra_tensors() {
    let mut file = zero_weights(8).unwrap();
    file.tensors.retain(|t| t.name != "dec2.bn1.running_mean");
    match Network::from_weights(file) {
        Err(Error::MissingTensor(name)) => assert_eq!(name, "dec2.bn1.running_mean"),
        other => panic!("expected missing tensor, got {other:?}"),
    }
    let mut file = zero_weights(8).unwrap();
    file.tensors.push(NamedTensor::filled("dec0.conv9.weight", vec![1], 0.0));
    match Network::from_weights(file) {
        Err(Error::UnexpectedTensor(name)) => assert_eq!(name, "dec0.conv9.weight"),
        other => panic!("expected unexpected tensor, got {other:?}"),
    }
}

#[test]
fn rejects_negative_variance() {
    let mut file = zero_weights(8).unwrap();
    let t = file.tensors.iter_mut().find(|t| t.name == "enc3.bn2.running_var").unwrap();
    t.data[3] = -1.0;
    assert!(Network::from_weights(file).is_err());
}

#[test]
fn weights_survive_serialization() {
    let file = random_weights(8, 3).unwrap();
    let mut bytes = Vec::new();
    write_drcw(&mut bytes, &file).unwrap();
    assert_eq!(parse_drcw(&bytes).unwrap(), file);
    let a = Network::from_weights(file).unwrap();
    let b = Network::from_bytes(&bytes).unwrap();
    let input = Tensor::from_vec(7, 32, 32, (0..7 * 1024).map(|i| (i % 13) as f32 / 13.0).collect()).unwrap();
    assert_eq!(a.forward(&input).unwrap(), b.forward(&input).unwrap());
}

#[test]
fn canonical_width_has_expected_parameter_count() {
    let n: usize = tensor_table(64).unwrap().iter().map(|(_, d)| d.iter().product::<usize>()).sum();
    // Independent count: 3x3 kernels plus biases, then four BN vectors per layer.
    let convs = [
        (7, 64),
        (64, 64),
        (64, 128),
        (128, 128),
        (128, 256),
        (256, 256),
        (256, 512),
        (512, 512),
        (768, 256),
        (256, 256),
        (384, 128),
        (128, 128),
        (192, 64),
        (64, 64),
        (64, 32),
        (32, 16),
    ];
    let want: usize = convs.iter().map(|&(i, o)| i * o * 9 + o + 4 * o).sum::<usize>() + 16 * 3 + 3;
    assert_eq!(n, want);
}

#[test]
fn blur_network_matches_binomial_filter() {
    let net = Network::from_weights(blur_weights(12).unwrap()).unwrap();
    let mut input = Tensor::zeros(7, 32, 32);
    input.set(1, 10, 20, 16.0);
    let out = net.forward(&input).unwrap();
    let taps = [1.0f32, 4.0, 6.0, 4.0, 1.0];
    for dy in 0..5 {
        for dx in 0..5 {
            let want = 16.0 * taps[dy] * taps[dx] / 256.0;
            assert!((out.at(1, 8 + dy, 18 + dx) - want).abs() < 1e-5);
        }
    }
    assert_eq!(out.at(0, 10, 20), 0.0);
    assert!(out.data().iter().sum::<f32>() - 16.0 < 1e-4);
}

#[test]
fn gaussian_blur_wraps_in_azimuth() {
    let mut map = HemiMap::zeros(3, Frame::IDENTITY);
    map.set(0, 0, 16, 1.0);
    let blurred = gaussian_blur(&map, 1.0).unwrap();
    let g: Vec<f64> = (-3..=3).map(|i: i32| (-(i * i) as f64 / 2.0).exp()).collect();
    let norm: f64 = g.iter().sum();
    let want = g[3] * g[2] / (norm * norm);
    assert!((blurred.get(0, 31, 16) as f64 - want).abs() < 1e-6);
    assert!((blurred.get(0, 31, 16) - blurred.get(0, 1, 16)).abs() < 1e-7);
    let total: f32 = blurred.channel(0).iter().sum();
    assert!((total - 1.0).abs() < 1e-5);
    assert!(gaussian_blur(&map, 0.0).is_err());
}
