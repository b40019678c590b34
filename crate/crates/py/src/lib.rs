//! Python bindings for `gpfusion`.
//!
//! Frames are exposed as the `Frame` class. Reports come back as plain
//! dictionaries with the same field names as the JSON produced by the CLI.

use gpfusion::constructions::{
    direct_sum, image_projections, measure_perturbation_radius, perturbation_condition_holds,
    predicted_perturbed_bounds, simple_perturbation_bounds, tensor_converse_extract, tensor_product,
    transform_by_invertible, PerturbationParams,
};
use gpfusion::error::FrameError;
use gpfusion::frameio::{self, GenClass, GenRequest, SpecError};
use gpfusion::gframe::{self, FrameOptions, GPFusionFrame, WeightedTriple};
use gpfusion::linop::{LinOp, SubspaceProjection};
use gpfusion::pnorm::{self, PNormSpace};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::{json, Value};

const DEFAULT_RESTARTS: usize = 24;

/// `(basis of V_i, Λ_i rows, v_i)` as passed from Python.
type TripleArgs = (Vec<Vec<f64>>, Vec<Vec<f64>>, f64);

fn frame_err(e: FrameError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn spec_err(e: SpecError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(&value).map_err(json_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn options(restarts: usize, seed: u64, p2_exact: bool) -> FrameOptions {
    let mut opts = FrameOptions::new(restarts, seed);
    opts.p2_exact = p2_exact;
    opts
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<LinOp> {
    LinOp::from_rows(&rows).map_err(frame_err)
}

fn parse_class(name: &str) -> PyResult<GenClass> {
    match name {
        "any" => Ok(GenClass::Any),
        "frame" => Ok(GenClass::Frame),
        "tight" => Ok(GenClass::Tight),
        "parseval" => Ok(GenClass::Parseval),
        other => Err(PyValueError::new_err(format!(
            "unknown class {other:?}, expected one of any, frame, tight, parseval"
        ))),
    }
}

/// A finite family of weighted triples `(V_i, Λ_i, v_i)` on `(R^n, ||.||_p)`.
#[pyclass(name = "Frame", module = "pygpfusion", frozen)]
struct PyFrame {
    inner: GPFusionFrame,
}

impl PyFrame {
    fn wrap(inner: GPFusionFrame) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyFrame {
    /// Build a family from `(basis, lambda, weight)` tuples. Each basis is a
    /// list of spanning vectors for `V_i`; each lambda is a row-major matrix.
    #[new]
    fn new(dim: usize, p: f64, triples: Vec<TripleArgs>) -> PyResult<Self> {
        let space = PNormSpace::new(dim, p).map_err(frame_err)?;
        let triples = triples
            .into_iter()
            .map(|(basis, lambda, weight)| {
                let projection = SubspaceProjection::from_basis(basis).map_err(frame_err)?;
                WeightedTriple::new(projection, matrix(lambda)?, weight).map_err(frame_err)
            })
            .collect::<PyResult<Vec<_>>>()?;
        GPFusionFrame::new(space, triples).map(Self::wrap).map_err(frame_err)
    }

    /// The family `{(R^n, I, 1)}`.
    #[staticmethod]
    fn identity(n: usize, p: f64) -> PyResult<Self> {
        GPFusionFrame::identity(n, p).map(Self::wrap).map_err(frame_err)
    }

    /// Parse a frame specification document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        frameio::parse_frame_spec(text).map(Self::wrap).map_err(spec_err)
    }

    /// Generate a seeded random family.
    #[staticmethod]
    #[pyo3(signature = (dim, block_dims, p=2.0, seed=0, class_="frame"))]
    fn generate(dim: usize, block_dims: Vec<usize>, p: f64, seed: u64, class_: &str) -> PyResult<Self> {
        let req = GenRequest {
            dim,
            block_dims,
            p,
            seed,
            class: parse_class(class_)?,
        };
        frameio::generate(&req).map(Self::wrap).map_err(frame_err)
    }

    fn to_json(&self) -> String {
        frameio::serialize_frame(&self.inner, None)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn block_dims(&self) -> Vec<usize> {
        self.inner.block_dims()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.triples().iter().map(WeightedTriple::weight).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Frame(dim={}, p={}, block_dims={:?})",
            self.inner.dim(),
            self.inner.p(),
            self.inner.block_dims()
        )
    }

    /// Same space and entrywise-equal weights, projections and local operators
    /// up to `tol`.
    #[pyo3(signature = (other, tol=1e-12))]
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        frameio::frames_equal(&self.inner, &other.inner, tol)
    }

    /// Stacked analysis matrix `[v_i Λ_i P_{V_i}]`.
    fn analysis_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.analysis_matrix().to_rows()
    }

    fn synthesis_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.synthesis_matrix().to_rows()
    }

    /// `U f` as a list of blocks.
    fn analysis(&self, f: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .analysis_apply(&f)
            .map(|s| s.into_blocks())
            .map_err(frame_err)
    }

    /// `T g` for a list of blocks `g`.
    fn synthesis(&self, g: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let g = pnorm::DualMixedSeq::new(g, self.inner.q()).map_err(frame_err)?;
        self.inner.synthesis_apply(&g).map_err(frame_err)
    }

    fn with_scaled_weights(&self, c: f64) -> PyResult<Self> {
        self.inner.with_scaled_weights(c).map(Self::wrap).map_err(frame_err)
    }

    fn subfamily(&self, indices: Vec<usize>) -> PyResult<Self> {
        self.inner.subfamily(&indices).map(Self::wrap).map_err(frame_err)
    }

    #[pyo3(signature = (restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn bounds(&self, py: Python<'_>, restarts: usize, seed: u64, p2_exact: bool) -> PyResult<Py<PyAny>> {
        let b = gframe::estimate_bounds(&self.inner, &options(restarts, seed, p2_exact)).map_err(frame_err)?;
        let (lower, upper) = b.values();
        to_py(py, json!({ "lower": lower, "upper": upper, "detail": b }))
    }

    #[pyo3(signature = (restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn classify(&self, py: Python<'_>, restarts: usize, seed: u64, p2_exact: bool) -> PyResult<Py<PyAny>> {
        let c = gframe::classify(&self.inner, &options(restarts, seed, p2_exact)).map_err(frame_err)?;
        to_py(py, serde_json::to_value(c).map_err(json_err)?)
    }

    #[pyo3(signature = (restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn riesz(&self, py: Python<'_>, restarts: usize, seed: u64, p2_exact: bool) -> PyResult<Py<PyAny>> {
        let r = gframe::check_riesz(&self.inner, &options(restarts, seed, p2_exact)).map_err(frame_err)?;
        to_py(py, serde_json::to_value(r).map_err(json_err)?)
    }

    #[pyo3(signature = (samples=100, seed=0))]
    fn duality(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let r = gframe::verify_duality(&self.inner, samples, seed).map_err(frame_err)?;
        to_py(py, serde_json::to_value(r).map_err(json_err)?)
    }

    fn is_gf_complete(&self) -> bool {
        gframe::is_gf_complete(&self.inner)
    }

    #[pyo3(signature = (restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn rescale_to_parseval(&self, restarts: usize, seed: u64, p2_exact: bool) -> PyResult<Self> {
        gframe::rescale_to_parseval(&self.inner, &options(restarts, seed, p2_exact))
            .map(Self::wrap)
            .map_err(frame_err)
    }

    /// Transport by an invertible `u`. Returns `(frame, report)`.
    #[pyo3(signature = (u, restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn transform(
        &self,
        py: Python<'_>,
        u: Vec<Vec<f64>>,
        restarts: usize,
        seed: u64,
        p2_exact: bool,
    ) -> PyResult<(Self, Py<PyAny>)> {
        let u = matrix(u)?;
        let projections = image_projections(&self.inner, &u).map_err(frame_err)?;
        let t = transform_by_invertible(&self.inner, &u, &projections, &options(restarts, seed, p2_exact))
            .map_err(frame_err)?;
        let report = json!({
            "predicted": t.predicted,
            "hypothesis_ok": t.hypothesis_ok,
            "hypothesis_residual": t.hypothesis_residual,
        });
        Ok((Self::wrap(t.frame), to_py(py, report)?))
    }

    /// Direct sum with `other`. Returns `(frame, predicted)`.
    #[pyo3(signature = (other, restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn direct_sum(
        &self,
        py: Python<'_>,
        other: &Self,
        restarts: usize,
        seed: u64,
        p2_exact: bool,
    ) -> PyResult<(Self, Py<PyAny>)> {
        let c = direct_sum(&self.inner, &other.inner, &options(restarts, seed, p2_exact)).map_err(frame_err)?;
        let predicted = serde_json::to_value(&c.predicted).map_err(json_err)?;
        Ok((Self::wrap(c.frame), to_py(py, predicted)?))
    }

    /// Tensor product with `other`. Returns `(frame, report)` where the report
    /// holds the predicted bounds and the factor envelopes recovered from the
    /// product.
    #[pyo3(signature = (other, restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn tensor(
        &self,
        py: Python<'_>,
        other: &Self,
        restarts: usize,
        seed: u64,
        p2_exact: bool,
    ) -> PyResult<(Self, Py<PyAny>)> {
        let opts = options(restarts, seed, p2_exact);
        let tp = tensor_product(&self.inner, &other.inner, &opts).map_err(frame_err)?;
        let converse = tensor_converse_extract(&tp, &opts).map_err(frame_err)?;
        let report = json!({ "predicted": tp.predicted, "converse": converse });
        Ok((Self::wrap(tp.frame), to_py(py, report)?))
    }

    /// Compare against a perturbed family `gamma`.
    ///
    /// Without `params` the radius `R = sup ||U_Λ f - U_Γ f|| / ||f||` is
    /// measured and `(A - R, B + R)` predicted. With `params = (λ₁, λ₂, μ)` the
    /// general inequality is checked and the matching bounds predicted.
    #[pyo3(signature = (gamma, params=None, restarts=DEFAULT_RESTARTS, seed=0, p2_exact=true))]
    fn perturb(
        &self,
        py: Python<'_>,
        gamma: &Self,
        params: Option<(f64, f64, f64)>,
        restarts: usize,
        seed: u64,
        p2_exact: bool,
    ) -> PyResult<Py<PyAny>> {
        let opts = options(restarts, seed, p2_exact);
        let (a, b) = gframe::estimate_bounds(&self.inner, &opts).map_err(frame_err)?.values();
        let (c, d) = gframe::estimate_bounds(&gamma.inner, &opts)
            .map_err(frame_err)?
            .values();
        let report = match params {
            None => {
                let r = measure_perturbation_radius(&self.inner, &gamma.inner, &opts).map_err(frame_err)?;
                let predicted = simple_perturbation_bounds(a, b, r.value).map_err(frame_err)?;
                json!({ "radius": r, "predicted": predicted, "measured": [c, d] })
            }
            Some((l1, l2, mu)) => {
                let params = PerturbationParams::new(l1, l2, mu).map_err(frame_err)?;
                let check =
                    perturbation_condition_holds(&self.inner, &gamma.inner, &params, &opts).map_err(frame_err)?;
                let predicted = predicted_perturbed_bounds(a, b, &params).map_err(frame_err)?;
                json!({ "condition": check, "predicted": predicted, "measured": [c, d] })
            }
        };
        to_py(py, report)
    }
}

/// `||v||_p`.
#[pyfunction]
fn p_norm(v: Vec<f64>, p: f64) -> PyResult<f64> {
    pnorm::p_norm(&v, p).map_err(frame_err)
}

/// `q = p / (p - 1)`.
#[pyfunction]
fn dual_exponent(p: f64) -> PyResult<f64> {
    pnorm::dual_exponent(p).map_err(frame_err)
}

#[pymodule]
fn pygpfusion(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(p_norm, m)?)?;
    m.add_function(wrap_pyfunction!(dual_exponent, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
