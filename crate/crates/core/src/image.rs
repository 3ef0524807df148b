//! HDR image buffers, PFM and PNG I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Floating point image with interleaved channels, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

/// 8-bit RGB image, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Image {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Image> {
        if data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "{} values do not fill a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_rgb(width: usize, height: usize, pixels: &[Rgb]) -> Image {
        assert_eq!(pixels.len(), width * height);
        let data = pixels
            .iter()
            .flat_map(|p| [p.x as f32, p.y as f32, p.z as f32])
            .collect();
        Image {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn rgb(&self, x: usize, y: usize) -> Rgb {
        let p = self.pixel(x, y);
        match self.channels {
            1 => Rgb::splat(p[0] as f64),
            _ => Rgb::new(p[0] as f64, p[1] as f64, p[2] as f64),
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        (self.width, self.height, self.channels) == (other.width, other.height, other.channels)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }

    /// Display encoding: `clamp(v · 2^exposure)^(1/2.2)` quantized to 8 bits.
    pub fn to_rgb8(&self, exposure: f64) -> Rgb8Image {
        let gain = 2f64.powf(exposure);
        let mut data = Vec::with_capacity(self.width * self.height * 3);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.rgb(x, y);
                for v in [c.x, c.y, c.z] {
                    data.push(encode_display(v * gain));
                }
            }
        }
        Rgb8Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn write_pfm<W: Write>(&self, mut w: W) -> Result<()> {
        let tag = match self.channels {
            1 => "Pf",
            3 => "PF",
            c => return Err(Error::Image(format!("PFM cannot hold {c} channels"))),
        };
        let mut buf = format!("{tag}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        buf.reserve(self.data.len() * 4);
        let row = self.width * self.channels;
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_pfm(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn parse_pfm(bytes: &[u8]) -> Result<Image> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Image("truncated PFM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // Exactly one whitespace byte separates the header from the data.
        pos += 1;
        let channels = match fields[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            t => return Err(Error::Image(format!("unknown PFM tag `{t}`"))),
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad PFM dimension `{s}`")));
        let width = parse(&fields[1])?;
        let height = parse(&fields[2])?;
        let scale: f32 = fields[3]
            .parse()
            .map_err(|_| Error::Image(format!("bad PFM scale `{}`", fields[3])))?;
        let little = scale < 0.0;
        let n = width * height * channels;
        let body = bytes.get(pos..pos + n * 4).ok_or_else(|| Error::Image("truncated PFM data".into()))?;
        let mut data = vec![0.0f32; n];
        let row = width * channels;
        for (i, chunk) in body.chunks_exact(4).enumerate() {
            let b: [u8; 4] = chunk.try_into().unwrap();
            let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            let (file_row, col) = (i / row, i % row);
            data[(height - 1 - file_row) * row + col] = v;
        }
        Image::from_data(width, height, channels, data)
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Image> {
        Image::parse_pfm(&std::fs::read(path)?)
    }
}

#[inline]
pub fn encode_display(v: f64) -> u8 {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    (v.powf(1.0 / 2.2) * 255.0 + 0.5).floor().min(255.0) as u8
}

impl Rgb8Image {
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_deflate_compression(png::DeflateCompression::Level(6));
            enc.set_filter(png::Filter::Adaptive);
            let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
            writer
                .write_image_data(&self.data)
                .map_err(|e| Error::Image(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    /// Values scaled to `[0, 1]`, interleaved.
    pub fn to_unit(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }
}
