//! Whole-image rendering in the three modes: path traced, direct only, and
//! direct plus cached network-predicted indirect lighting.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{plan_pass, validate_r0, CacheEntry, CacheSettings, IndirectState, DEFAULT_R0};
use crate::cnn::MapPredictor;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::integrator::{direct_at, li_direct, li_path, PathSettings, Sampler, SamplerKind};
use crate::math::Rgb;
use crate::scene::Scene;

const DIRECT_STREAM: u64 = 0xd1_0000_0000;
const CACHE_STREAM: u64 = 0xcac4e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pt,
    Direct,
    Drc,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "pt" => Ok(Mode::Pt),
            "direct" => Ok(Mode::Direct),
            "drc" => Ok(Mode::Drc),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected pt, direct or drc)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderConfig {
    pub mode: Mode,
    /// Samples per pixel in `pt` mode.
    pub spp: u32,
    /// Samples per pixel of the direct layer in `direct` and `drc` modes.
    pub direct_spp: u32,
    /// Progressive indirect passes in `drc` mode.
    pub indirect_tasks: u32,
    /// Stop after this many passes (all passes when unset).
    pub passes: Option<u32>,
    /// Samples per pixel added by each `pt`/`direct` pass; by default the
    /// samples are split over at most 16 passes.
    pub pass_spp: Option<u32>,
    pub max_depth: u32,
    pub rr_start_depth: u32,
    pub mis_samples: u32,
    pub r0: u32,
    pub min_spacing: u32,
    pub seed: u64,
    pub sampler: SamplerKind,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            mode: Mode::Pt,
            spp: 16,
            direct_spp: 16,
            indirect_tasks: 4,
            passes: None,
            pass_spp: None,
            max_depth: 8,
            rr_start_depth: 5,
            mis_samples: 16,
            r0: DEFAULT_R0,
            min_spacing: 1,
            seed: 0,
            sampler: SamplerKind::Stratified,
        }
    }
}

impl RenderConfig {
    pub fn path_settings(&self) -> PathSettings {
        PathSettings {
            max_depth: self.max_depth,
            rr_start_depth: self.rr_start_depth,
        }
    }

    pub fn cache_settings(&self) -> CacheSettings {
        CacheSettings {
            r0: self.r0,
            min_spacing: self.min_spacing,
            mis_samples: self.mis_samples,
            path: self.path_settings(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: u32, name: &str| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        match self.mode {
            Mode::Pt => positive(self.spp, "spp")?,
            Mode::Direct => positive(self.direct_spp, "direct-spp")?,
            Mode::Drc => {
                positive(self.direct_spp, "direct-spp")?;
                positive(self.indirect_tasks, "indirect-tasks")?;
                validate_r0(self.r0)?;
                if self.mis_samples < 2 {
                    return Err(Error::Config("mis-samples must be at least 2".into()));
                }
            }
        }
        if let Some(p) = self.passes {
            positive(p, "passes")?;
        }
        if let Some(p) = self.pass_spp {
            positive(p, "pass-spp")?;
        }
        Ok(())
    }

    fn sample_budget(&self) -> u32 {
        match self.mode {
            Mode::Pt => self.spp,
            _ => self.direct_spp,
        }
    }

    fn pass_size(&self) -> u32 {
        let total = self.sample_budget();
        self.pass_spp.unwrap_or(total.div_ceil(16)).clamp(1, total)
    }

    /// Passes a full run performs before any `passes` limit.
    pub fn planned_passes(&self) -> u32 {
        match self.mode {
            Mode::Drc => self.indirect_tasks,
            _ => self.sample_budget().div_ceil(self.pass_size()),
        }
    }
}

/// Per-pass progress record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassTelemetry {
    pub pass: u32,
    pub total_passes: u32,
    /// Samples per pixel accumulated so far (`pt`/`direct`) or of the direct
    /// layer (`drc`).
    pub spp: u32,
    /// Grid spacing in pixels (`drc` only).
    pub spacing: Option<u32>,
    pub new_entries: usize,
    pub total_entries: usize,
    pub seconds: f64,
}

/// Progressive renderer; each [`Renderer::step`] runs one pass.
pub struct Renderer<'a> {
    scene: &'a Scene,
    config: RenderConfig,
    predictor: Option<&'a dyn MapPredictor>,
    root: Sampler,
    sum: Vec<Rgb>,
    samples: u32,
    indirect: Option<IndirectState>,
    pass: u32,
    total: u32,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a Scene, config: RenderConfig, predictor: Option<&'a dyn MapPredictor>) -> Result<Self> {
        config.validate()?;
        if config.mode == Mode::Drc && predictor.is_none() {
            return Err(Error::Config("drc mode needs a radiance map predictor".into()));
        }
        let [w, h] = scene.camera.resolution();
        let total = config
            .passes
            .map_or(config.planned_passes(), |p| p.min(config.planned_passes()));
        Ok(Renderer {
            scene,
            root: Sampler::new(config.sampler, config.seed),
            config,
            predictor,
            sum: vec![Rgb::ZERO; (w * h) as usize],
            samples: 0,
            indirect: None,
            pass: 0,
            total,
        })
    }

    pub fn passes_done(&self) -> u32 {
        self.pass
    }

    pub fn total_passes(&self) -> u32 {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.pass >= self.total
    }

    /// Adds `count` samples per pixel starting at sample `first`.
    fn accumulate(&mut self, first: u32, count: u32) {
        let scene = self.scene;
        let mode = self.config.mode;
        let budget = self.config.sample_budget();
        let settings = self.config.path_settings();
        let [w, _] = scene.camera.resolution();
        let root = match mode {
            Mode::Pt => self.root.clone(),
            _ => self.root.fork(DIRECT_STREAM),
        };
        let indirect = self.indirect.as_ref();
        self.sum.par_iter_mut().enumerate().for_each(|(i, acc)| {
            let (x, y) = (i as u32 % w, i as u32 / w);
            let base = root.fork(i as u64);
            for s in first..first + count {
                let mut sampler = base.clone();
                sampler.start_sample(s, budget);
                let (jx, jy) = sampler.next_2d();
                let ray = scene.camera.generate_ray(x as f64 + jx, y as f64 + jy);
                *acc += match (mode, indirect) {
                    (Mode::Pt, _) => li_path(scene, &ray, &mut sampler, &settings, false),
                    (Mode::Drc, Some(state)) => match state.primary(x, y) {
                        Some(p) => p.throughput * direct_at(scene, p, &mut sampler),
                        None => li_direct(scene, &scene.camera.pixel_center_ray(x, y), &mut sampler),
                    },
                    _ => li_direct(scene, &ray, &mut sampler),
                };
            }
        });
        self.samples += count;
    }

    /// Runs the next pass; returns `None` once every pass is done.
    pub fn step(&mut self) -> Result<Option<PassTelemetry>> {
        if self.is_done() {
            return Ok(None);
        }
        let start = Instant::now();
        let mut telemetry = PassTelemetry {
            pass: self.pass,
            total_passes: self.total,
            spp: 0,
            spacing: None,
            new_entries: 0,
            total_entries: 0,
            seconds: 0.0,
        };
        match self.config.mode {
            Mode::Pt | Mode::Direct => {
                let first = self.samples;
                let count = self.config.pass_size().min(self.config.sample_budget() - first);
                self.accumulate(first, count);
            }
            Mode::Drc => {
                if self.indirect.is_none() {
                    self.indirect = Some(IndirectState::new(self.scene));
                    self.accumulate(0, self.config.direct_spp);
                }
                let [w, h] = self.scene.camera.resolution();
                let settings = self.config.cache_settings();
                let plan = plan_pass(w, h, self.pass, settings.r0, settings.min_spacing, self.config.seed);
                let sampler = self.root.fork(CACHE_STREAM);
                let predictor = self.predictor.expect("checked in new");
                let state = self.indirect.as_mut().unwrap();
                let stats = state.run_pass(self.scene, predictor, &plan, &sampler, &settings)?;
                telemetry.spacing = Some(stats.spacing);
                telemetry.new_entries = stats.grid_entries + stats.fallback_entries;
                telemetry.total_entries = stats.total_entries;
            }
        }
        self.pass += 1;
        telemetry.spp = self.samples;
        telemetry.seconds = start.elapsed().as_secs_f64();
        Ok(Some(telemetry))
    }

    fn layer_image(&self, f: impl Fn(usize) -> Rgb + Sync + Send) -> Image {
        let [w, h] = self.scene.camera.resolution();
        let px: Vec<Rgb> = (0..(w * h) as usize).into_par_iter().map(f).collect();
        Image::from_rgb(w as usize, h as usize, &px)
    }

    fn direct_value(&self, i: usize) -> Rgb {
        if self.samples == 0 {
            Rgb::ZERO
        } else {
            self.sum[i] / self.samples as f64
        }
    }

    /// Current estimate of the full image.
    pub fn image(&self) -> Image {
        self.layer_image(|i| {
            let indirect = self.indirect.as_ref().map_or(Rgb::ZERO, |s| s.layer()[i]);
            self.direct_value(i) + indirect
        })
    }

    /// The direct layer (`direct`/`drc`) or the path-traced estimate (`pt`).
    pub fn direct_layer(&self) -> Image {
        self.layer_image(|i| self.direct_value(i))
    }

    pub fn indirect_layer(&self) -> Option<Image> {
        let state = self.indirect.as_ref()?;
        Some(self.layer_image(|i| state.layer()[i]))
    }

    pub fn entries(&self) -> &[CacheEntry] {
        self.indirect.as_ref().map_or(&[], |s| s.entries())
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    pub direct: Image,
    pub indirect: Option<Image>,
    pub entries: Vec<CacheEntry>,
    pub telemetry: Vec<PassTelemetry>,
    pub passes_completed: u32,
    pub cancelled: bool,
}

/// Renders to completion, or until `cancel` is raised; the pass running when
/// it is raised is finished first.
pub fn render(
    scene: &Scene,
    config: &RenderConfig,
    predictor: Option<&dyn MapPredictor>,
    cancel: Option<&AtomicBool>,
    mut progress: impl FnMut(&PassTelemetry),
) -> Result<RenderOutput> {
    let mut r = Renderer::new(scene, config.clone(), predictor)?;
    let mut telemetry = Vec::new();
    let mut cancelled = false;
    while let Some(t) = r.step()? {
        progress(&t);
        telemetry.push(t);
        if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) && !r.is_done() {
            cancelled = true;
            break;
        }
    }
    Ok(RenderOutput {
        image: r.image(),
        direct: r.direct_layer(),
        indirect: r.indirect_layer(),
        entries: r.entries().to_vec(),
        passes_completed: r.passes_done(),
        telemetry,
        cancelled,
    })
}
