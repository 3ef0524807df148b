//! Image and map quality statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::hemimap::{HemiMap, MAP_RES};
use crate::image::{Image, Rgb8Image};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    Ok(())
}

/// Mean absolute difference over all components.
pub fn l1_diff(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(sum / a.data.len().max(1) as f64)
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity of two images with values in `[0, 1]`
/// (dynamic range 1), using an 11×11 Gaussian window with σ = 1.5 over the
/// positions where the window fits. Channels are averaged.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h, ch) = (a.width, a.height, a.channels);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Contract(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let k = ssim_window();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = (0..w * h).map(|i| a.data[i * ch + c] as f64).collect();
        let pb: Vec<f64> = (0..w * h).map(|i| b.data[i * ch + c] as f64).collect();
        let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
        let mu_a = filter_valid(&pa, w, h, &k);
        let mu_b = filter_valid(&pb, w, h, &k);
        let aa = filter_valid(&prod(&pa, &pa), w, h, &k);
        let bb = filter_valid(&prod(&pb, &pb), w, h, &k);
        let ab = filter_valid(&prod(&pa, &pb), w, h, &k);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / ch as f64)
}

/// SSIM of two 8-bit images, compared as values in `[0, 1]`.
pub fn ssim_rgb8(a: &Rgb8Image, b: &Rgb8Image) -> Result<f64> {
    ssim(&a.to_unit(), &b.to_unit())
}

/// Radiance map as a `32 × 32` RGB image tonemapped by `t / (1 + t)` with
/// `t = radiance / scale`, so that maps of any brightness compare on `[0, 1)`.
pub fn map_to_image(map: &HemiMap, scale: f64) -> Image {
    let mut img = Image::new(MAP_RES, MAP_RES, 3);
    for v in 0..MAP_RES {
        for u in 0..MAP_RES {
            let c = map.texel(u, v) / scale;
            let i = (v * MAP_RES + u) * 3;
            for (j, x) in [c.x, c.y, c.z].into_iter().enumerate() {
                let x = x.max(0.0);
                img.data[i + j] = (x / (1.0 + x)) as f32;
            }
        }
    }
    img
}

/// SSIM between two radiance maps after tonemapping both with `scale`.
pub fn map_ssim(a: &HemiMap, b: &HemiMap, scale: f64) -> f64 {
    ssim(&map_to_image(a, scale), &map_to_image(b, scale)).expect("maps are 32x32")
}

/// Size of the PNG encoding (adaptive row filters, deflate level 6); a
/// proxy for the amount of noise in an image.
pub fn png_size_proxy(image: &Rgb8Image) -> Result<usize> {
    Ok(image.encode_png()?.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
}

/// Kruskal–Wallis H test with tie correction; `p` is the chi-square upper
/// tail with `groups − 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    if groups.len() < 2 {
        return Err(Error::Config("Kruskal-Wallis needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Config("Kruskal-Wallis groups must be nonempty".into()));
    }
    let mut all: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| g.iter().map(move |&v| (v, gi)))
        .collect();
    let n = all.len();
    if n < 3 {
        return Err(Error::Config("Kruskal-Wallis needs at least three values".into()));
    }
    if all.iter().any(|(v, _)| v.is_nan()) {
        return Err(Error::Config("Kruskal-Wallis values must not be NaN".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        let rank = (i + j + 1) as f64 / 2.0;
        for item in &all[i..j] {
            rank_sums[item.1] += rank;
        }
        tie_term += t * t * t - t;
        i = j;
    }
    let nf = n as f64;
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p: 1.0 });
    }
    let s: f64 = rank_sums
        .iter()
        .zip(groups)
        .map(|(r, g)| r * r / g.len() as f64)
        .sum();
    let h = ((12.0 / (nf * (nf + 1.0)) * s - 3.0 * (nf + 1.0)) / correction).max(0.0);
    let dist = ChiSquared::new((groups.len() - 1) as f64).expect("positive degrees of freedom");
    let p = if h == 0.0 { 1.0 } else { dist.sf(h) };
    Ok(KruskalWallis { h, p })
}
