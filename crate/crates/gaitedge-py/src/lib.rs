//! Python bindings for the silhouette operators.
//!
//! The surface mirrors the Rust API with list-of-float interop: grids come
//! in and out as row-major `list[float]`, gradients as plain lists. Stateful
//! backward passes (synthesis, alignment) hang off the object returned by
//! the forward call, so Python never juggles saved tensors by hand.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gaitedge::align;
use gaitedge::datagen::{generate_sequence, render_frame, WalkerParams};
use gaitedge::eval::{distance as embed_distance, gei_embed, Embedding};
use gaitedge::grid::{Condition, GaitSequence, GradGrid, Grid, GridKind, StructuringElement, TargetSize};
use gaitedge::morphology;
use gaitedge::synthesis::{self, LossWeights};

fn err(e: gaitedge::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A dense 2D array, either strictly {0,1} or finite floats.
#[pyclass(name = "Grid", module = "gaitedge_py", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    /// Build a binary grid; every value must be exactly 0.0 or 1.0.
    #[staticmethod]
    fn binary(height: usize, width: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyGrid {
            inner: Grid::binary(height, width, values).map_err(err)?,
        })
    }

    /// Build a float grid; every value must be finite.
    #[staticmethod]
    #[pyo3(name = "float")]
    fn float_(height: usize, width: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyGrid {
            inner: Grid::float(height, width, values).map_err(err)?,
        })
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            GridKind::Binary => "binary",
            GridKind::Float => "float",
        }
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Row-major nested lists, convenient for `numpy.array(g.rows)`.
    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .values()
            .chunks(self.inner.width())
            .map(|row| row.to_vec())
            .collect()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!(
                "pixel ({row}, {col}) outside {}x{}",
                self.inner.height(),
                self.inner.width()
            )));
        }
        Ok(self.inner.get(row, col))
    }

    /// Threshold at 0.5 into a binary grid.
    fn binarized(&self) -> Self {
        PyGrid {
            inner: self.inner.binarized(),
        }
    }

    fn count_foreground(&self) -> usize {
        self.inner.count_foreground()
    }

    /// Shift by (dx, dy) pixels with zero fill outside the frame.
    fn translated(&self, dx: isize, dy: isize) -> Self {
        PyGrid {
            inner: self.inner.translated(dx, dy),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({}x{}, {}, fg={})",
            self.inner.height(),
            self.inner.width(),
            self.kind(),
            self.inner.count_foreground()
        )
    }

    fn __eq__(&self, other: &PyGrid) -> bool {
        self.inner == other.inner
    }
}

/// Forward synthesis output; keeps the edge band for the backward pass.
#[pyclass(name = "Synthesis", module = "gaitedge_py")]
struct PySynthesis {
    inner: synthesis::SynthesisResult,
}

#[pymethods]
impl PySynthesis {
    #[getter]
    fn composite(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.composite.clone(),
        }
    }

    /// Gradient of a scalar loss w.r.t. the probability map, given the
    /// upstream gradient w.r.t. the composite (row-major, same shape).
    fn backward(&self, grad_composite: Vec<f64>) -> PyResult<Vec<f64>> {
        let up = GradGrid::new(
            self.inner.composite.height(),
            self.inner.composite.width(),
            grad_composite,
        )
        .map_err(err)?;
        Ok(synthesis::synthesize_backward(&self.inner, &up)
            .map_err(err)?
            .values()
            .to_vec())
    }
}

/// Saved geometry from a forward alignment; replays it in reverse.
#[pyclass(name = "AlignContext", module = "gaitedge_py")]
struct PyAlignContext {
    inner: align::AlignContext,
}

#[pymethods]
impl PyAlignContext {
    #[getter]
    fn crop_box(&self) -> (f64, f64, f64, f64) {
        let b = &self.inner.box_;
        (b.top, b.left, b.bottom, b.right)
    }

    /// Gradient w.r.t. the unpadded input silhouette, given the upstream
    /// gradient w.r.t. the aligned output (row-major, target shape).
    fn backward(&self, grad_out: Vec<f64>) -> PyResult<Vec<f64>> {
        let up = GradGrid::new(
            self.inner.target.height,
            self.inner.target.width,
            grad_out,
        )
        .map_err(err)?;
        Ok(align::gait_align_backward(&self.inner, &up)
            .map_err(err)?
            .values()
            .to_vec())
    }
}

/// Split a binary mask into its edge band and interior core.
#[pyfunction]
#[pyo3(signature = (mask, se_size = 3))]
fn preprocess(mask: &PyGrid, se_size: usize) -> PyResult<(PyGrid, PyGrid)> {
    let se = StructuringElement::new(se_size).map_err(err)?;
    let pair = morphology::preprocess(&mask.inner, se).map_err(err)?;
    Ok((PyGrid { inner: pair.edge }, PyGrid { inner: pair.interior }))
}

#[pyfunction]
#[pyo3(signature = (mask, se_size = 3))]
fn erode(mask: &PyGrid, se_size: usize) -> PyResult<PyGrid> {
    let se = StructuringElement::new(se_size).map_err(err)?;
    Ok(PyGrid {
        inner: morphology::erode(&mask.inner, se).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (mask, se_size = 3))]
fn dilate(mask: &PyGrid, se_size: usize) -> PyResult<PyGrid> {
    let se = StructuringElement::new(se_size).map_err(err)?;
    Ok(PyGrid {
        inner: morphology::dilate(&mask.inner, se).map_err(err)?,
    })
}

/// Recombine: predicted probabilities on the edge band, trusted interior
/// elsewhere. Returns a Synthesis whose `.backward` differentiates w.r.t.
/// the probability map.
#[pyfunction]
fn synthesize(edge: &PyGrid, interior: &PyGrid, prob: &PyGrid) -> PyResult<PySynthesis> {
    Ok(PySynthesis {
        inner: synthesis::synthesize(&edge.inner, &interior.inner, &prob.inner).map_err(err)?,
    })
}

/// Mean binary cross-entropy and its gradient w.r.t. the probabilities.
#[pyfunction]
fn bce_loss(prob: &PyGrid, target: &PyGrid) -> PyResult<(f64, Vec<f64>)> {
    let (loss, grad) = synthesis::bce_loss(&prob.inner, &target.inner).map_err(err)?;
    Ok((loss, grad.values().to_vec()))
}

#[pyfunction]
#[pyo3(signature = (seg, rec, lambda_seg = 10.0))]
fn joint_loss(seg: f64, rec: f64, lambda_seg: f64) -> PyResult<f64> {
    synthesis::joint_loss(seg, rec, &LossWeights { lambda_seg }).map_err(err)
}

/// Crop the body box and resample it into a (height, width) frame. Returns
/// the aligned grid and the context for the backward pass. `ratio` pins the
/// body aspect ratio; None measures it from this silhouette.
#[pyfunction]
#[pyo3(signature = (sil, ratio = None, height = 64, width = 44))]
fn gait_align(
    sil: &PyGrid,
    ratio: Option<f64>,
    height: usize,
    width: usize,
) -> PyResult<(PyGrid, PyAlignContext)> {
    let size = TargetSize::new(height, width).map_err(err)?;
    let (out, ctx) = align::gait_align(&sil.inner, ratio, size).map_err(err)?;
    Ok((PyGrid { inner: out }, PyAlignContext { inner: ctx }))
}

/// Plain whole-frame resize to (height, width), no cropping.
#[pyfunction]
#[pyo3(signature = (sil, height = 64, width = 44))]
fn size_normalize(sil: &PyGrid, height: usize, width: usize) -> PyResult<PyGrid> {
    let size = TargetSize::new(height, width).map_err(err)?;
    Ok(PyGrid {
        inner: align::size_normalize(&sil.inner, size).map_err(err)?,
    })
}

/// Deterministic random translation of up to max_offset pixels per axis.
#[pyfunction]
fn disturb(sil: &PyGrid, seed: u64, max_offset: usize) -> PyGrid {
    PyGrid {
        inner: align::disturb(&sil.inner, seed, max_offset),
    }
}

/// One synthetic walker silhouette at the given gait phase (radians).
#[pyfunction]
#[pyo3(signature = (phase, subject = "s001"))]
fn walker_frame(phase: f64, subject: &str) -> PyResult<PyGrid> {
    let p = WalkerParams::baseline(subject);
    Ok(PyGrid {
        inner: render_frame(&p, phase).map_err(err)?,
    })
}

/// A full gait cycle sampled at `frames` evenly spaced phases.
#[pyfunction]
#[pyo3(signature = (frames, subject = "s001"))]
fn walker_sequence(frames: usize, subject: &str) -> PyResult<Vec<PyGrid>> {
    let p = WalkerParams::baseline(subject);
    Ok(generate_sequence(&p, frames)
        .map_err(err)?
        .into_iter()
        .map(|inner| PyGrid { inner })
        .collect())
}

fn as_embedding(frames: &[PyGrid], tag: &str) -> PyResult<Embedding> {
    let grids: Vec<Grid> = frames.iter().map(|g| g.inner.clone()).collect();
    let seq = GaitSequence::new(grids, tag, Condition::new("NM#01"), "000").map_err(err)?;
    let size = TargetSize::new(seq.frame_height(), seq.frame_width()).map_err(err)?;
    gei_embed(&seq, size).map_err(err)
}

/// Gait energy image: temporal mean of same-sized frames.
#[pyfunction]
fn gei(frames: Vec<PyGrid>) -> PyResult<PyGrid> {
    let emb = as_embedding(&frames, "gei")?;
    let (h, w) = (frames[0].inner.height(), frames[0].inner.width());
    Ok(PyGrid {
        inner: Grid::float(h, w, emb.vector).map_err(err)?,
    })
}

/// Euclidean distance between two equally sized grids.
#[pyfunction]
fn distance(a: &PyGrid, b: &PyGrid) -> PyResult<f64> {
    if !a.inner.same_dims(&b.inner) {
        return Err(PyValueError::new_err(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.inner.height(),
            a.inner.width(),
            b.inner.height(),
            b.inner.width()
        )));
    }
    let ea = as_embedding(std::slice::from_ref(a), "a")?;
    let eb = as_embedding(std::slice::from_ref(b), "b")?;
    embed_distance(&ea, &eb).map_err(err)
}

#[pymodule]
fn gaitedge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PySynthesis>()?;
    m.add_class::<PyAlignContext>()?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(erode, m)?)?;
    m.add_function(wrap_pyfunction!(dilate, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(bce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(joint_loss, m)?)?;
    m.add_function(wrap_pyfunction!(gait_align, m)?)?;
    m.add_function(wrap_pyfunction!(size_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(disturb, m)?)?;
    m.add_function(wrap_pyfunction!(walker_frame, m)?)?;
    m.add_function(wrap_pyfunction!(walker_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(gei, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    Ok(())
}
