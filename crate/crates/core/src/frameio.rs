//! JSON frame specification files and the seeded random-instance generator.
//!
//! A specification file looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "space": { "dim": 2, "p": 2.0 },
//!   "triples": [
//!     { "projection": { "basis": [[1.0, 0.0], [0.0, 1.0]] },
//!       "lambda_matrix": [[1.0, 0.0], [0.0, 1.0]],
//!       "weight": 1.0 }
//!   ],
//!   "metadata": { "note": "optional, free-form" }
//! }
//! ```
//!
//! A projection is given either by a basis of its range (`{"basis": vectors}`,
//! giving the orthogonal projection) or by its matrix (`{"matrix": rows}`,
//! which may be oblique but must be idempotent).

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::FrameError;
use crate::gframe::{GPFusionFrame, WeightedTriple};
use crate::linop::{LinOp, SubspaceProjection};
use crate::norm_est::{stream_rng, RNG_ALGORITHM};
use crate::pnorm::PNormSpace;

/// Current schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionSpec {
    Basis(Vec<Vec<f64>>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub projection: ProjectionSpec,
    pub lambda_matrix: Vec<Vec<f64>>,
    pub weight: f64,
}

/// On-disk form of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpecFile {
    pub version: u32,
    pub space: SpaceSpec,
    pub triples: Vec<TripleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// Why a specification file was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    /// Malformed JSON or a value of the wrong type.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed JSON describing an invalid family.
    Validation {
        triple: Option<usize>,
        field: String,
        message: String,
    },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            SpecError::Validation {
                triple: Some(i),
                field,
                message,
            } => write!(f, "validation error in triples[{i}].{field}: {message}"),
            SpecError::Validation {
                triple: None,
                field,
                message,
            } => write!(f, "validation error in {field}: {message}"),
        }
    }
}

impl std::error::Error for SpecError {}

fn invalid(triple: Option<usize>, field: &str, message: impl fmt::Display) -> SpecError {
    SpecError::Validation {
        triple,
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Parse text into the raw file structure without building the family.
pub fn parse_spec_file(text: &str) -> Result<FrameSpecFile, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parse and validate a specification file.
pub fn parse_frame_spec(text: &str) -> Result<GPFusionFrame, SpecError> {
    spec_to_frame(&parse_spec_file(text)?)
}

/// Build the family described by a parsed file, enforcing every invariant.
pub fn spec_to_frame(spec: &FrameSpecFile) -> Result<GPFusionFrame, SpecError> {
    if spec.version != SCHEMA_VERSION {
        return Err(invalid(
            None,
            "version",
            format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                spec.version
            ),
        ));
    }
    let SpaceSpec { dim, p } = spec.space;
    if dim == 0 {
        return Err(invalid(None, "space.dim", "dimension must be >= 1"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(None, "space.p", format!("p must lie in (1, inf), got {p}")));
    }
    let space = PNormSpace::new(dim, p).map_err(|e| invalid(None, "space", e))?;
    if spec.triples.is_empty() {
        return Err(invalid(None, "triples", "at least one triple is required"));
    }
    let mut triples = Vec::with_capacity(spec.triples.len());
    for (i, t) in spec.triples.iter().enumerate() {
        let at = Some(i);
        if !(t.weight > 0.0 && t.weight.is_finite()) {
            return Err(invalid(at, "weight", format!("weight must be > 0, got {}", t.weight)));
        }
        let projection = match &t.projection {
            ProjectionSpec::Basis(basis) => {
                if let Some((k, b)) = basis.iter().enumerate().find(|(_, b)| b.len() != dim) {
                    return Err(invalid(
                        at,
                        "projection.basis",
                        format!("vector {k} has length {}, expected {dim}", b.len()),
                    ));
                }
                SubspaceProjection::from_basis(basis.clone()).map_err(|e| invalid(at, "projection.basis", e))?
            }
            ProjectionSpec::Matrix(rows) => {
                let m = LinOp::from_rows(rows).map_err(|e| invalid(at, "projection.matrix", e))?;
                if m.rows() != dim || m.cols() != dim {
                    return Err(invalid(
                        at,
                        "projection.matrix",
                        format!("expected {dim}x{dim}, got {}x{}", m.rows(), m.cols()),
                    ));
                }
                SubspaceProjection::from_idempotent(m).map_err(|e| invalid(at, "projection.matrix", e))?
            }
        };
        let lambda = LinOp::from_rows(&t.lambda_matrix).map_err(|e| invalid(at, "lambda_matrix", e))?;
        if lambda.cols() != dim {
            return Err(invalid(
                at,
                "lambda_matrix",
                format!("expected {dim} columns, got {}", lambda.cols()),
            ));
        }
        triples.push(WeightedTriple::new(projection, lambda, t.weight).map_err(|e| invalid(at, "triple", e))?);
    }
    GPFusionFrame::new(space, triples).map_err(|e| invalid(None, "triples", e))
}

/// File form of a family; projections are written as matrices.
pub fn frame_to_spec(frame: &GPFusionFrame, metadata: Option<serde_json::Value>) -> FrameSpecFile {
    FrameSpecFile {
        version: SCHEMA_VERSION,
        space: SpaceSpec {
            dim: frame.dim(),
            p: frame.p(),
        },
        triples: frame
            .triples()
            .iter()
            .map(|t| TripleSpec {
                projection: ProjectionSpec::Matrix(t.projection().matrix().to_rows()),
                lambda_matrix: t.local_op().to_rows(),
                weight: t.weight(),
            })
            .collect(),
        metadata,
    }
}

/// Pretty JSON text with a trailing newline.
pub fn spec_to_string(spec: &FrameSpecFile) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("spec files contain only finite numbers");
    s.push('\n');
    s
}

pub fn serialize_frame(frame: &GPFusionFrame, metadata: Option<serde_json::Value>) -> String {
    spec_to_string(&frame_to_spec(frame, metadata))
}

fn max_entry_diff(a: &LinOp, b: &LinOp) -> Option<f64> {
    (a.rows() == b.rows() && a.cols() == b.cols()).then(|| {
        a.to_rows()
            .iter()
            .flatten()
            .zip(b.to_rows().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    })
}

/// Same space, weights, projection matrices and local operators up to `tol`
/// entrywise.
pub fn frames_equal(a: &GPFusionFrame, b: &GPFusionFrame, tol: f64) -> bool {
    a.dim() == b.dim()
        && a.p() == b.p()
        && a.len() == b.len()
        && a.triples().iter().zip(b.triples()).all(|(s, t)| {
            (s.weight() - t.weight()).abs() <= tol
                && max_entry_diff(s.projection().matrix(), t.projection().matrix()).is_some_and(|d| d <= tol)
                && max_entry_diff(s.local_op(), t.local_op()).is_some_and(|d| d <= tol)
        })
}

/// Target of the random generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GenClass {
    /// No structural guarantee.
    Any,
    /// Full-rank analysis map; requires the block dimensions to add up to at least `dim`.
    Frame,
    /// `A = B`; at `p = 2` from a scaled orthonormal stacking, otherwise from
    /// copies of a scaled signed permutation.
    Tight,
    /// `A = B = 1` from an orthonormal stacking; requires `p = 2`.
    Parseval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenRequest {
    pub dim: usize,
    pub block_dims: Vec<usize>,
    pub p: f64,
    pub seed: u64,
    pub class: GenClass,
}

const GEN_ATTEMPTS: u64 = 200;
/// Conditioning demanded of generated frames (`sigma_min / sigma_max`).
const GEN_MIN_CONDITION: f64 = 1e-3;

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn op(m: DMatrix<f64>) -> LinOp {
    LinOp::from_matrix(m).expect("generated entries are finite")
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Orthogonal projection onto a random subspace of dimension `k` containing `forced`.
fn random_projection(rng: &mut ChaCha8Rng, n: usize, k: usize, forced: &[Vec<f64>]) -> Option<SubspaceProjection> {
    if k >= n {
        return Some(SubspaceProjection::identity(n));
    }
    let mut basis = forced.to_vec();
    while basis.len() < k {
        basis.push((0..n).map(|_| rng.sample(StandardNormal)).collect());
    }
    SubspaceProjection::from_basis(basis).ok()
}

fn attempt(req: &GenRequest, rng: &mut ChaCha8Rng) -> Result<Option<GPFusionFrame>, FrameError> {
    let n = req.dim;
    let total: usize = req.block_dims.iter().sum();
    let space = PNormSpace::new(n, req.p)?;
    let mut triples = Vec::with_capacity(req.block_dims.len());
    match req.class {
        GenClass::Any | GenClass::Frame => {
            for &d in &req.block_dims {
                let lo = d.min(n).max(1);
                let k = rng.random_range(lo..=n);
                let Some(proj) = random_projection(rng, n, k, &[]) else {
                    return Ok(None);
                };
                let lambda = op(gaussian_matrix(rng, d, n));
                let w = rng.random_range(0.5..2.0);
                triples.push(WeightedTriple::new(proj, lambda, w)?);
            }
        }
        GenClass::Parseval | GenClass::Tight if req.p == 2.0 => {
            let q = gaussian_matrix(rng, total, n).qr().q();
            let c = if req.class == GenClass::Tight {
                rng.random_range(0.5..3.0)
            } else {
                1.0
            };
            let mut row = 0;
            for &d in &req.block_dims {
                let block = q.rows(row, d).into_owned();
                row += d;
                let forced = rows_of(&block);
                let extra = usize::from(rng.random::<bool>());
                let Some(proj) = random_projection(rng, n, (d + extra).min(n), &forced) else {
                    return Ok(None);
                };
                let w = rng.random_range(0.5..2.0);
                triples.push(WeightedTriple::new(proj, op(block * (c / w)), w)?);
            }
        }
        GenClass::Tight => {
            let copies = total / n;
            let c = rng.random_range(0.5..3.0);
            let mut functionals: Vec<Vec<f64>> = Vec::with_capacity(total);
            for _ in 0..copies {
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                for &j in &perm {
                    let mut r = vec![0.0; n];
                    r[j] = if rng.random::<bool>() { c } else { -c };
                    functionals.push(r);
                }
            }
            for i in (1..total).rev() {
                functionals.swap(i, rng.random_range(0..=i));
            }
            let mut at = 0;
            for &d in &req.block_dims {
                let block = functionals[at..at + d].to_vec();
                at += d;
                let lambda = LinOp::from_rows(&block)?;
                triples.push(WeightedTriple::new(SubspaceProjection::identity(n), lambda, 1.0)?);
            }
        }
        GenClass::Parseval => unreachable!("rejected before sampling"),
    }
    let frame = GPFusionFrame::new(space, triples)?;
    if req.class != GenClass::Any {
        let m = frame.analysis_matrix();
        let sv = m.singular_values();
        let ratio = sv.last().copied().unwrap_or(0.0) / sv[0];
        if m.rank() < n || ratio < GEN_MIN_CONDITION {
            return Ok(None);
        }
    }
    Ok(Some(frame))
}

/// Deterministic random family for the given shape and class.
pub fn generate(req: &GenRequest) -> Result<GPFusionFrame, FrameError> {
    let n = req.dim;
    let total: usize = req.block_dims.iter().sum();
    if n == 0 || req.block_dims.is_empty() || req.block_dims.contains(&0) {
        return Err(FrameError::Domain(
            "dimensions and block dimensions must be >= 1".into(),
        ));
    }
    if !(req.p > 1.0 && req.p.is_finite()) {
        return Err(FrameError::Domain(format!("p must lie in (1, inf), got {}", req.p)));
    }
    if req.class != GenClass::Any && total < n {
        return Err(FrameError::Contract(format!(
            "rank deficit: block dimensions sum to {total} < dim {n}, no frame is possible"
        )));
    }
    if req.class == GenClass::Parseval && req.p != 2.0 {
        return Err(FrameError::Unsupported("--class parseval requires p = 2".into()));
    }
    if req.class == GenClass::Tight && req.p != 2.0 && !total.is_multiple_of(n) {
        return Err(FrameError::Unsupported(format!(
            "--class tight with p != 2 needs block dimensions summing to a multiple of dim {n}, got {total}"
        )));
    }
    for k in 0..GEN_ATTEMPTS {
        let mut rng = stream_rng(req.seed, k);
        if let Some(frame) = attempt(req, &mut rng)? {
            return Ok(frame);
        }
    }
    Err(FrameError::Contract(format!(
        "no acceptable instance after {GEN_ATTEMPTS} attempts"
    )))
}

/// Generated family as specification text, with the request in `metadata`.
pub fn generate_spec(req: &GenRequest) -> Result<String, FrameError> {
    let frame = generate(req)?;
    let metadata = serde_json::json!({
        "generator": {
            "class": req.class,
            "seed": req.seed,
            "block_dims": req.block_dims,
            "rng": RNG_ALGORITHM,
        }
    });
    Ok(serialize_frame(&frame, Some(metadata)))
}
