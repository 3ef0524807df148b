//! Python bindings: scene loading, rendering, network inference, metrics and
//! dataset I/O.

use std::fs::File;
use std::io::BufWriter;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use drc_core::cnn::{self, GaussianBlur, MapPredictor, Tensor};
use drc_core::dataset::{self, DatasetConfig, TrainingExample};
use drc_core::render::{render as render_scene, Mode, RenderConfig};
use drc_core::{image, metrics, scene};

fn py_err(e: drc_core::Error) -> PyErr {
    match e {
        drc_core::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for drc_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(frozen, module = "drc")]
struct Scene {
    inner: scene::Scene,
}

#[pymethods]
impl Scene {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Scene> {
        Ok(Scene { inner: scene::load_scene(path).py()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Scene> {
        Ok(Scene { inner: scene::parse_scene(text).py()? })
    }

    #[getter]
    fn resolution(&self) -> (u32, u32) {
        let [w, h] = self.inner.camera.resolution();
        (w, h)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

/// Float image with interleaved channels, top row first.
#[pyclass(module = "drc")]
#[derive(Clone)]
struct Image {
    inner: image::Image,
}

#[pymethods]
impl Image {
    #[new]
    fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> PyResult<Image> {
        Ok(Image { inner: image::Image::from_data(width, height, channels, data).py()? })
    }

    #[staticmethod]
    fn load_pfm(path: &str) -> PyResult<Image> {
        Ok(Image { inner: image::Image::load_pfm(path).py()? })
    }

    fn save_pfm(&self, path: &str) -> PyResult<()> {
        self.inner.save_pfm(path).py()
    }

    #[pyo3(signature = (path, exposure=0.0))]
    fn save_png(&self, path: &str, exposure: f64) -> PyResult<()> {
        self.inner.to_rgb8(exposure).save_png(path).py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels
    }

    #[getter]
    fn data(&self) -> Vec<f32> {
        self.inner.data.clone()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<Vec<f32>> {
        if x >= self.inner.width || y >= self.inner.height {
            return Err(PyValueError::new_err("pixel out of range"));
        }
        Ok(self.inner.pixel(x, y).to_vec())
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{}x{})", self.inner.width, self.inner.height, self.inner.channels)
    }
}

/// Radiance map network loaded from a DRCW file.
#[pyclass(frozen, module = "drc")]
struct Network {
    inner: cnn::Network,
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Network> {
        Ok(Network { inner: cnn::Network::load(path).py()? })
    }

    #[staticmethod]
    fn from_bytes(bytes: &[u8]) -> PyResult<Network> {
        Ok(Network { inner: cnn::Network::from_bytes(bytes).py()? })
    }

    /// Builds a network of the given kind: `zero`, `random` or `blur`.
    #[staticmethod]
    #[pyo3(signature = (kind, k=cnn::DEFAULT_K, seed=0))]
    fn make(kind: &str, k: usize, seed: u64) -> PyResult<Network> {
        let file = match kind {
            "zero" => cnn::zero_weights(k),
            "random" => cnn::random_weights(k, seed),
            "blur" => cnn::blur_weights(k),
            _ => return Err(PyValueError::new_err(format!("unknown weight kind `{kind}`"))),
        }
        .py()?;
        Ok(Network { inner: cnn::Network::from_weights(file).py()? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyOSError::new_err(e.to_string()))?;
        cnn::write_drcw(BufWriter::new(f), self.inner.weights()).py()
    }

    #[getter]
    fn base_width(&self) -> usize {
        self.inner.base_width()
    }

    /// Maps a flat `(7, 32, 32)` input stack to a flat `(3, 32, 32)` prediction.
    fn forward(&self, py: Python<'_>, input: Vec<f32>) -> PyResult<Vec<f32>> {
        let t = Tensor::from_vec(cnn::INPUT_CHANNELS, 32, 32, input).py()?;
        let out = py.detach(|| self.inner.forward(&t)).py()?;
        Ok(out.into_vec())
    }
}

#[pyclass(frozen, get_all, module = "drc")]
#[derive(Clone)]
struct Example {
    scene_id: String,
    pixel: (u32, u32),
    s_r: f32,
    s_d: f32,
    input: Vec<f32>,
    target: Vec<f32>,
}

#[pymethods]
impl Example {
    #[new]
    fn new(scene_id: String, pixel: (u32, u32), s_r: f32, s_d: f32, input: Vec<f32>, target: Vec<f32>) -> Example {
        Example { scene_id, pixel, s_r, s_d, input, target }
    }
}

impl From<TrainingExample> for Example {
    fn from(e: TrainingExample) -> Example {
        Example {
            scene_id: e.scene_id,
            pixel: e.pixel,
            s_r: e.s_r,
            s_d: e.s_d,
            input: e.input,
            target: e.target,
        }
    }
}

impl From<&Example> for TrainingExample {
    fn from(e: &Example) -> TrainingExample {
        TrainingExample {
            scene_id: e.scene_id.clone(),
            pixel: e.pixel,
            s_r: e.s_r,
            s_d: e.s_d,
            input: e.input.clone(),
            target: e.target.clone(),
        }
    }
}

fn run_with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> PyResult<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Renders `scene` and returns `(image, direct, indirect)`; `indirect` is
/// `None` outside `drc` mode. `drc` mode needs a `network`, or
/// `blur_sigma` for a Gaussian blur predictor.
#[pyfunction]
#[pyo3(signature = (
    scene, mode="pt", spp=16, direct_spp=16, indirect_tasks=4, passes=None, seed=0,
    network=None, blur_sigma=None, mis_samples=16, r0=None, min_spacing=1, max_depth=8, threads=None,
))]
#[allow(clippy::too_many_arguments)]
fn render(
    py: Python<'_>,
    scene: &Scene,
    mode: &str,
    spp: u32,
    direct_spp: u32,
    indirect_tasks: u32,
    passes: Option<u32>,
    seed: u64,
    network: Option<&Network>,
    blur_sigma: Option<f64>,
    mis_samples: u32,
    r0: Option<u32>,
    min_spacing: u32,
    max_depth: u32,
    threads: Option<usize>,
) -> PyResult<(Image, Image, Option<Image>)> {
    let defaults = RenderConfig::default();
    let config = RenderConfig {
        mode: mode.parse::<Mode>().py()?,
        spp,
        direct_spp,
        indirect_tasks,
        passes,
        seed,
        mis_samples,
        r0: r0.unwrap_or(defaults.r0),
        min_spacing,
        max_depth,
        ..defaults
    };
    let blur = blur_sigma.map(|sigma| GaussianBlur { sigma });
    let predictor: Option<&dyn MapPredictor> = match (network, &blur) {
        (Some(n), _) => Some(&n.inner),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    };
    let out = py
        .detach(|| run_with_threads(threads, || render_scene(&scene.inner, &config, predictor, None, |_| {})))?
        .py()?;
    Ok((
        Image { inner: out.image },
        Image { inner: out.direct },
        out.indirect.map(|inner| Image { inner }),
    ))
}

#[pyfunction]
fn ssim(a: &Image, b: &Image) -> PyResult<f64> {
    metrics::ssim(&a.inner, &b.inner).py()
}

#[pyfunction]
fn l1(a: &Image, b: &Image) -> PyResult<f64> {
    metrics::l1_diff(&a.inner, &b.inner).py()
}

/// Size in bytes of the PNG encoding of the tone-mapped image.
#[pyfunction]
#[pyo3(signature = (image, exposure=0.0))]
fn png_size(image: &Image, exposure: f64) -> PyResult<usize> {
    metrics::png_size_proxy(&image.inner.to_rgb8(exposure)).py()
}

/// Returns `(h, p)`.
#[pyfunction]
fn kruskal_wallis(groups: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
    let kw = metrics::kruskal_wallis(&groups).py()?;
    Ok((kw.h, kw.p))
}

#[pyfunction]
fn read_dataset(path: &str) -> PyResult<Vec<Example>> {
    let f = File::open(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
    Ok(dataset::read_dataset(std::io::BufReader::new(f)).py()?.into_iter().map(Example::from).collect())
}

#[pyfunction]
fn write_dataset(path: &str, examples: Vec<PyRef<'_, Example>>) -> PyResult<()> {
    let examples: Vec<TrainingExample> = examples.iter().map(|e| TrainingExample::from(&**e)).collect();
    let f = File::create(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
    dataset::write_dataset(BufWriter::new(f), &examples).py()
}

#[pyfunction]
#[pyo3(signature = (scene, scene_id, grid=(8, 8), ref_spp=1024, seed=0, threads=None))]
fn generate_dataset(
    py: Python<'_>,
    scene: &Scene,
    scene_id: &str,
    grid: (u32, u32),
    ref_spp: u32,
    seed: u64,
    threads: Option<usize>,
) -> PyResult<Vec<Example>> {
    let config = DatasetConfig {
        grid,
        ref_spp,
        seed,
        ..DatasetConfig::default()
    };
    let examples = py
        .detach(|| run_with_threads(threads, || dataset::generate_examples(&scene.inner, scene_id, &config)))?
        .py()?;
    Ok(examples.into_iter().map(Example::from).collect())
}

#[pymodule]
fn drc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scene>()?;
    m.add_class::<Image>()?;
    m.add_class::<Network>()?;
    m.add_class::<Example>()?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(l1, m)?)?;
    m.add_function(wrap_pyfunction!(png_size, m)?)?;
    m.add_function(wrap_pyfunction!(kruskal_wallis, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    Ok(())
}
