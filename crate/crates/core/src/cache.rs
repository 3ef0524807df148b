//! Progressive radiance cache over the image plane.
//!
//! Each pass samples a jittered grid of pixels, predicts an indirect
//! radiance map at each pixel's primary hit, shades it into outgoing
//! indirect radiance, and then re-interpolates the whole indirect layer from
//! every entry gathered so far.

use std::io::Write;

use rayon::prelude::*;

use crate::cnn::{predict_radiance, Cursor, MapPredictor};
use crate::error::{Error, Result};
use crate::hemimap::render_input_stack;
use crate::integrator::{find_primary_intersection, hash2, shade_indirect, PathSettings, PrimaryHit, Sampler};
use crate::math::{Rgb, Vec3};
use crate::scene::Scene;

pub const WEIGHT_EPSILON: f64 = 1e-4;
pub const TILE_SIZE: u32 = 64;
pub const DEFAULT_R0: u32 = 16;

const ENTRY_STREAM: u64 = 0xe47e_0000_0000_0000;
const FALLBACK_STREAM: u64 = 0xfa11_0000_0000_0000;
const SHADE_STREAM: u64 = 0x5ade;
const JITTER_STREAM: u64 = 0x7177_e700;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheEntry {
    pub pixel: (u32, u32),
    pub pass: u32,
    pub position: Vec3,
    pub normal: Vec3,
    /// Outgoing indirect radiance at the primary hit, toward the camera
    /// chain, before the chain's throughput is applied.
    pub indirect_radiance: Rgb,
    pub specular_throughput: Rgb,
}

/// Rectangle `[x0, x1) × [y0, y1)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> u64 {
        (self.x1 - self.x0) as u64 * (self.y1 - self.y0) as u64
    }
}

/// One unit of indirect work: the tile's own pixels plus a margin of
/// neighbouring pixels it may read entries from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub core: Rect,
    pub margin: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassPlan {
    pub pass_index: u32,
    pub spacing: u32,
    pub offset: (u32, u32),
    pub jitter_seed: u64,
    pub width: u32,
    pub height: u32,
    pub tiles: Vec<Tile>,
}

/// Grid spacing of pass `k`: `⌈r0 / 2^k⌉`, never below `min_spacing` (or 1).
pub fn pass_spacing(r0: u32, pass_index: u32, min_spacing: u32) -> u32 {
    let div = 1u64 << pass_index.min(40);
    let r = (r0 as u64).div_ceil(div) as u32;
    r.max(min_spacing).max(1)
}

pub fn validate_r0(r0: u32) -> Result<()> {
    if r0 < 2 || !r0.is_power_of_two() {
        return Err(Error::Config(format!("r0 must be a power of two >= 2, got {r0}")));
    }
    Ok(())
}

/// Plans pass `pass_index` over a `width × height` image with the default
/// tile size.
pub fn plan_pass(width: u32, height: u32, pass_index: u32, r0: u32, min_spacing: u32, seed: u64) -> PassPlan {
    plan_pass_tiled(width, height, pass_index, r0, min_spacing, seed, TILE_SIZE)
}

pub fn plan_pass_tiled(
    width: u32,
    height: u32,
    pass_index: u32,
    r0: u32,
    min_spacing: u32,
    seed: u64,
    tile_size: u32,
) -> PassPlan {
    let tile_size = tile_size.max(1);
    let spacing = pass_spacing(r0, pass_index, min_spacing);
    let jitter_seed = hash2(seed ^ JITTER_STREAM, pass_index as u64);
    let offset = if spacing > 1 {
        (
            (jitter_seed % spacing as u64) as u32,
            ((jitter_seed >> 32) % spacing as u64) as u32,
        )
    } else {
        (0, 0)
    };
    let mut tiles = Vec::new();
    for y0 in (0..height).step_by(tile_size as usize) {
        for x0 in (0..width).step_by(tile_size as usize) {
            let core = Rect {
                x0,
                y0,
                x1: (x0 + tile_size).min(width),
                y1: (y0 + tile_size).min(height),
            };
            let margin = Rect {
                x0: core.x0.saturating_sub(spacing),
                y0: core.y0.saturating_sub(spacing),
                x1: (core.x1 + spacing).min(width),
                y1: (core.y1 + spacing).min(height),
            };
            tiles.push(Tile { core, margin });
        }
    }
    PassPlan {
        pass_index,
        spacing,
        offset,
        jitter_seed,
        width,
        height,
        tiles,
    }
}

impl PassPlan {
    /// Grid points inside `rect`, row-major.
    pub fn points_in(&self, rect: &Rect) -> Vec<(u32, u32)> {
        let r = self.spacing;
        let first = |lo: u32, off: u32| if lo <= off { off } else { off + (lo - off).div_ceil(r) * r };
        let mut pts = Vec::new();
        let mut y = first(rect.y0, self.offset.1);
        while y < rect.y1 {
            let mut x = first(rect.x0, self.offset.0);
            while x < rect.x1 {
                pts.push((x, y));
                x += r;
            }
            y += r;
        }
        pts
    }

    /// Every grid point of the pass, row-major.
    pub fn grid_points(&self) -> Vec<(u32, u32)> {
        self.points_in(&Rect {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        })
    }
}

/// Interpolation weight of `entry` at `pixel`:
/// `w_p · w_n + w_p + ε` with `w_p = max(0, 1 − d / r)` for the image-plane
/// distance `d` in pixels and `w_n = max(0, n_i · n)`.
pub fn entry_weight(entry: &CacheEntry, pixel: (f64, f64), pixel_normal: Vec3, r: f64) -> f64 {
    let dx = entry.pixel.0 as f64 - pixel.0;
    let dy = entry.pixel.1 as f64 - pixel.1;
    let d = (dx * dx + dy * dy).sqrt();
    let wp = (1.0 - d / r).max(0.0);
    let wn = entry.normal.dot(pixel_normal).max(0.0);
    wp * wn + wp + WEIGHT_EPSILON
}

/// Normalized weighted average of the entries' indirect radiance, or `None`
/// when there are no entries.
pub fn interpolate_indirect<'a>(
    entries: impl IntoIterator<Item = &'a CacheEntry>,
    pixel: (f64, f64),
    pixel_normal: Vec3,
    r: f64,
) -> Option<Rgb> {
    let mut sum = Rgb::ZERO;
    let mut wsum = 0.0;
    let mut only = None;
    let mut count = 0usize;
    for e in entries {
        let w = entry_weight(e, pixel, pixel_normal, r);
        sum += e.indirect_radiance * w;
        wsum += w;
        only = Some(e.indirect_radiance);
        count += 1;
    }
    match count {
        0 => None,
        1 => only,
        _ => Some((sum / wsum).max(Rgb::ZERO)),
    }
}

/// Uniform bucket grid over entry pixels for gather queries.
struct EntryIndex {
    cell: u32,
    cols: u32,
    rows: u32,
    buckets: Vec<Vec<u32>>,
}

impl EntryIndex {
    fn build(entries: &[CacheEntry], width: u32, height: u32, cell: u32) -> EntryIndex {
        let cell = cell.max(1);
        let cols = width.div_ceil(cell).max(1);
        let rows = height.div_ceil(cell).max(1);
        let mut buckets = vec![Vec::new(); (cols * rows) as usize];
        for (i, e) in entries.iter().enumerate() {
            let cx = (e.pixel.0 / cell).min(cols - 1);
            let cy = (e.pixel.1 / cell).min(rows - 1);
            buckets[(cy * cols + cx) as usize].push(i as u32);
        }
        EntryIndex {
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// Entries within `radius` pixels of `(x, y)`, in index order.
    fn gather<'a>(&self, entries: &'a [CacheEntry], x: u32, y: u32, radius: f64) -> Vec<&'a CacheEntry> {
        let reach = (radius / self.cell as f64).ceil() as i64;
        let (cx, cy) = ((x / self.cell) as i64, (y / self.cell) as i64);
        let mut ids = Vec::new();
        for by in (cy - reach).max(0)..=(cy + reach).min(self.rows as i64 - 1) {
            for bx in (cx - reach).max(0)..=(cx + reach).min(self.cols as i64 - 1) {
                for &i in &self.buckets[(by * self.cols as i64 + bx) as usize] {
                    let e = &entries[i as usize];
                    let dx = e.pixel.0 as f64 - x as f64;
                    let dy = e.pixel.1 as f64 - y as f64;
                    if dx * dx + dy * dy <= radius * radius {
                        ids.push(i);
                    }
                }
            }
        }
        ids.sort_unstable();
        ids.into_iter().map(|i| &entries[i as usize]).collect()
    }
}

/// Settings for the indirect passes.
#[derive(Debug, Clone, Copy)]
pub struct CacheSettings {
    pub r0: u32,
    pub min_spacing: u32,
    pub mis_samples: u32,
    pub path: PathSettings,
}

impl Default for CacheSettings {
    fn default() -> Self {
        CacheSettings {
            r0: DEFAULT_R0,
            min_spacing: 1,
            mis_samples: 16,
            path: PathSettings::default(),
        }
    }
}

/// Predicts and shades the indirect radiance at one primary hit.
pub fn compute_entry(
    scene: &Scene,
    predictor: &dyn MapPredictor,
    primary: &PrimaryHit,
    pixel: (u32, u32),
    pass: u32,
    sampler: &Sampler,
    settings: &CacheSettings,
) -> Result<CacheEntry> {
    let stack = render_input_stack(scene, primary, sampler, &settings.path);
    let map = predict_radiance(predictor, &stack)?;
    let mut s = sampler.fork(SHADE_STREAM);
    s.start_sample(0, 1);
    let material = scene.material(primary.hit.material_id);
    let radiance = shade_indirect(material, primary.normal, primary.wo, &map, &mut s, settings.mis_samples)?;
    Ok(CacheEntry {
        pixel,
        pass,
        position: primary.hit.position,
        normal: primary.normal,
        indirect_radiance: radiance,
        specular_throughput: primary.throughput,
    })
}

/// Summary of one indirect pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassStats {
    pub pass_index: u32,
    pub spacing: u32,
    pub grid_entries: usize,
    pub fallback_entries: usize,
    pub total_entries: usize,
}

/// Entry pool and indirect layer carried across passes.
pub struct IndirectState {
    width: u32,
    height: u32,
    primaries: Vec<Option<PrimaryHit>>,
    entries: Vec<CacheEntry>,
    layer: Vec<Rgb>,
    passes: u32,
}

impl IndirectState {
    /// Traces the pixel-center primary hit of every pixel.
    pub fn new(scene: &Scene) -> IndirectState {
        let [w, h] = scene.camera.resolution();
        let primaries = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).map(move |x| find_primary_intersection(scene, &scene.camera.pixel_center_ray(x, y)))
            })
            .collect();
        IndirectState {
            width: w,
            height: h,
            primaries,
            entries: Vec::new(),
            layer: vec![Rgb::ZERO; (w * h) as usize],
            passes: 0,
        }
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    /// Indirect radiance per pixel, row-major, chain throughput applied.
    pub fn layer(&self) -> &[Rgb] {
        &self.layer
    }

    pub fn passes(&self) -> u32 {
        self.passes
    }

    pub fn primary(&self, x: u32, y: u32) -> Option<&PrimaryHit> {
        self.primaries[(y * self.width + x) as usize].as_ref()
    }

    /// Runs the next pass of `plan` order: new grid entries, fallback
    /// entries for pixels left without support, then re-interpolation of
    /// the whole layer.
    pub fn run_pass(
        &mut self,
        scene: &Scene,
        predictor: &dyn MapPredictor,
        plan: &PassPlan,
        sampler: &Sampler,
        settings: &CacheSettings,
    ) -> Result<PassStats> {
        let pass = plan.pass_index;
        let w = self.width;

        let per_tile: Vec<Vec<CacheEntry>> = plan
            .tiles
            .par_iter()
            .map(|tile| -> Result<Vec<CacheEntry>> {
                let mut out = Vec::new();
                for (x, y) in plan.points_in(&tile.core) {
                    let idx = (y * w + x) as u64;
                    if let Some(p) = &self.primaries[idx as usize] {
                        let s = sampler.fork(hash2(ENTRY_STREAM ^ pass as u64, idx));
                        out.push(compute_entry(scene, predictor, p, (x, y), pass, &s, settings)?);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut fresh: Vec<CacheEntry> = per_tile.into_iter().flatten().collect();
        fresh.sort_by_key(|e| (e.pixel.1, e.pixel.0));
        let grid_entries = fresh.len();
        self.entries.extend(fresh);

        let r = plan.spacing as f64;
        let radius = 2.0 * r;
        let index = EntryIndex::build(&self.entries, self.width, self.height, (2 * plan.spacing).max(1));
        let orphans: Vec<u32> = (0..self.width * self.height)
            .into_par_iter()
            .filter(|&i| {
                self.primaries[i as usize].is_some()
                    && index.gather(&self.entries, i % w, i / w, radius).is_empty()
            })
            .collect();
        let fallback: Vec<CacheEntry> = orphans
            .par_iter()
            .map(|&i| {
                let p = self.primaries[i as usize].as_ref().unwrap();
                let s = sampler.fork(hash2(FALLBACK_STREAM ^ pass as u64, i as u64));
                compute_entry(scene, predictor, p, (i % w, i / w), pass, &s, settings)
            })
            .collect::<Result<_>>()?;
        let fallback_entries = fallback.len();
        let index = if fallback.is_empty() {
            index
        } else {
            self.entries.extend(fallback);
            EntryIndex::build(&self.entries, self.width, self.height, (2 * plan.spacing).max(1))
        };

        let entries = &self.entries;
        let primaries = &self.primaries;
        self.layer = plan
            .tiles
            .par_iter()
            .map(|tile| {
                let core = tile.core;
                let mut out = Vec::with_capacity(core.area() as usize);
                for y in core.y0..core.y1 {
                    for x in core.x0..core.x1 {
                        let v = match &primaries[(y * w + x) as usize] {
                            Some(p) => {
                                let near = index.gather(entries, x, y, radius);
                                let l = interpolate_indirect(near, (x as f64, y as f64), p.normal, r)
                                    .unwrap_or(Rgb::ZERO);
                                p.throughput * l
                            }
                            None => Rgb::ZERO,
                        };
                        out.push(((x, y), v));
                    }
                }
                out
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .fold(vec![Rgb::ZERO; (self.width * self.height) as usize], |mut layer, ((x, y), v)| {
                layer[(y * w + x) as usize] = v;
                layer
            });
        self.passes += 1;
        Ok(PassStats {
            pass_index: pass,
            spacing: plan.spacing,
            grid_entries,
            fallback_entries,
            total_entries: self.entries.len(),
        })
    }
}

pub const CACHE_MAGIC: &[u8; 4] = b"DRCC";
pub const CACHE_VERSION: u32 = 1;

/// Diagnostic dump of cache entries (little-endian):
///
/// ```text
/// "DRCC" | u32 version | u32 count
/// per entry: u32 x | u32 y | u32 pass | f32 position[3] | f32 normal[3]
///            | f32 radiance[3] | f32 throughput[3]
/// ```
pub fn write_cache<W: Write>(mut w: W, entries: &[CacheEntry]) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + entries.len() * 60);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        for v in [e.pixel.0, e.pixel.1, e.pass] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [e.position, e.normal, e.indirect_radiance, e.specular_throughput] {
            for c in v.to_array() {
                buf.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn parse_cache(bytes: &[u8]) -> Result<Vec<CacheEntry>> {
    let mut c = Cursor::new("cache", bytes);
    if c.take(4, "magic")? != CACHE_MAGIC {
        return Err(Error::framing("cache", 0, "bad magic"));
    }
    let version = c.u32("version")?;
    if version != CACHE_VERSION {
        return Err(Error::framing("cache", 4, format!("unsupported version {version}")));
    }
    let count = c.u32("count")? as usize;
    if c.remaining() != count * 60 {
        return Err(Error::framing(
            "cache",
            8,
            format!("count {count} does not match {} payload bytes", c.remaining()),
        ));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = c.u32("pixel")?;
        let y = c.u32("pixel")?;
        let pass = c.u32("pass")?;
        let mut vec3 = || -> Result<Vec3> {
            let v = c.f32s(3, "vector")?;
            Ok(Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        };
        out.push(CacheEntry {
            pixel: (x, y),
            pass,
            position: vec3()?,
            normal: vec3()?,
            indirect_radiance: vec3()?,
            specular_throughput: vec3()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(x: u32, y: u32, n: Vec3, l: Rgb) -> CacheEntry {
        CacheEntry {
            pixel: (x, y),
            pass: 0,
            position: Vec3::ZERO,
            normal: n,
            indirect_radiance: l,
            specular_throughput: Rgb::ONE,
        }
    }

    #[test]
    fn spacing_halves_and_clamps() {
        let s: Vec<u32> = (0..7).map(|k| pass_spacing(16, k, 1)).collect();
        assert_eq!(s, [16, 8, 4, 2, 1, 1, 1]);
        assert_eq!(pass_spacing(16, 5, 4), 4);
    }

    #[test]
    fn r0_must_be_power_of_two() {
        assert!(validate_r0(16).is_ok());
        assert!(validate_r0(12).is_err());
        assert!(validate_r0(1).is_err());
    }

    #[test]
    fn tiles_partition_image() {
        let plan = plan_pass(150, 70, 1, 16, 1, 3);
        let mut count = vec![0u8; 150 * 70];
        for t in &plan.tiles {
            assert!(t.margin.x0 + plan.spacing >= t.core.x0 || t.margin.x0 == 0);
            for y in t.core.y0..t.core.y1 {
                for x in t.core.x0..t.core.x1 {
                    count[(y * 150 + x) as usize] += 1;
                }
            }
        }
        assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn tile_points_match_global_grid() {
        let plan = plan_pass(130, 97, 0, 16, 1, 11);
        let mut from_tiles: Vec<_> = plan.tiles.iter().flat_map(|t| plan.points_in(&t.core)).collect();
        from_tiles.sort_by_key(|p| (p.1, p.0));
        assert_eq!(from_tiles, plan.grid_points());
    }

    #[test]
    fn cache_dump_round_trip() {
        let entries = vec![
            entry(3, 4, Vec3::Z, Rgb::new(0.5, 0.25, 1.0)),
            entry(9, 1, Vec3::X, Rgb::new(2.0, 0.0, 0.125)),
        ];
        let mut buf = Vec::new();
        write_cache(&mut buf, &entries).unwrap();
        assert_eq!(parse_cache(&buf).unwrap(), entries);
        assert!(parse_cache(&buf[..buf.len() - 1]).is_err());
    }
}
