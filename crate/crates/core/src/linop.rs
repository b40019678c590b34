//! Dense matrix operators between coordinate spaces.
//!
//! Functionals on `(R^n, ||.||_p)` are represented by coefficient vectors under
//! the dot product, so the adjoint of an operator is its transpose acting on
//! coefficient vectors, measured in the conjugate exponent.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FrameError, Result};
use crate::norm_est::{self, BoundEstimate, EstimatorConfig};

/// Relative singular-value tolerance used for rank and invertibility tests.
pub const RANK_TOL: f64 = 1e-10;

/// Tolerance for projection idempotence and range checks.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Singular values in descending order together with the matching right
/// singular vectors. For wide matrices the matrix is padded with zero rows so
/// that there are always `cols` singular values and a full right basis.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    pub values: Vec<f64>,
    pub right_vectors: Vec<Vec<f64>>,
}

impl SingularSystem {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.max();
        if top == 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// A real `rows x cols` matrix.
pub struct LinOp {
    m: DMatrix<f64>,
    svd: OnceLock<SingularSystem>,
}

impl Clone for LinOp {
    fn clone(&self) -> Self {
        Self {
            m: self.m.clone(),
            svd: self.svd.clone(),
        }
    }
}

impl PartialEq for LinOp {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl fmt::Debug for LinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinOp")
            .field("rows", &self.rows())
            .field("cols", &self.cols())
            .field("entries", &self.to_rows())
            .finish()
    }
}

impl LinOp {
    fn wrap(m: DMatrix<f64>) -> Self {
        Self {
            m,
            svd: OnceLock::new(),
        }
    }

    /// Build from a nalgebra matrix, rejecting empty shapes and non-finite entries.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(FrameError::Domain("operator must have positive shape".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(FrameError::Domain("operator has non-finite entries".into()));
        }
        Ok(Self::wrap(m))
    }

    /// Build from rows; all rows must have the same positive length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(FrameError::Domain("operator must have at least one row".into()));
        }
        let ncols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(FrameError::dim(format!("row {i} length"), ncols, r.len()));
            }
        }
        Self::from_matrix(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FrameError::dim("row-major data length", rows * cols, data.len()));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::zeros(rows, cols))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::wrap(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn cols(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    /// Matrix-vector product.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.cols() {
            return Err(FrameError::dim("operand length", self.cols(), f.len()));
        }
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (j, &x) in f.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let col = self.m.column(j);
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * x;
            }
        }
        out
    }

    /// The coordinate adjoint (transpose).
    pub fn adjoint(&self) -> LinOp {
        Self::wrap(self.m.transpose())
    }

    /// `self * other`.
    pub fn compose(&self, other: &LinOp) -> Result<LinOp> {
        if self.cols() != other.rows() {
            return Err(FrameError::dim(
                "composition inner dimension",
                self.cols(),
                other.rows(),
            ));
        }
        Ok(Self::wrap(&self.m * &other.m))
    }

    pub fn scale(&self, c: f64) -> LinOp {
        Self::wrap(&self.m * c)
    }

    pub fn add(&self, other: &LinOp) -> Result<LinOp> {
        self.same_shape(other)?;
        Ok(Self::wrap(&self.m + &other.m))
    }

    pub fn sub(&self, other: &LinOp) -> Result<LinOp> {
        self.same_shape(other)?;
        Ok(Self::wrap(&self.m - &other.m))
    }

    fn same_shape(&self, other: &LinOp) -> Result<()> {
        if self.rows() != other.rows() {
            return Err(FrameError::dim("row count", self.rows(), other.rows()));
        }
        if self.cols() != other.cols() {
            return Err(FrameError::dim("column count", self.cols(), other.cols()));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Kronecker product with row-major vectorisation:
    /// `(A ⊗ B)(f ⊗ g) = Af ⊗ Bg` where `(f ⊗ g)[i*m + j] = f[i] g[j]`.
    pub fn kron(&self, other: &LinOp) -> LinOp {
        Self::wrap(self.m.kronecker(&other.m))
    }

    /// Block-diagonal `self ⊕ other`.
    pub fn direct_sum(&self, other: &LinOp) -> LinOp {
        let (r1, c1) = self.m.shape();
        let (r2, c2) = other.m.shape();
        let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
        m.view_mut((0, 0), (r1, c1)).copy_from(&self.m);
        m.view_mut((r1, c1), (r2, c2)).copy_from(&other.m);
        Self::wrap(m)
    }

    /// Vertical stacking; all operators must share a column count.
    pub fn vstack(ops: &[LinOp]) -> Result<LinOp> {
        let first = ops
            .first()
            .ok_or_else(|| FrameError::Domain("cannot stack an empty list".into()))?;
        let cols = first.cols();
        let mut rows = 0;
        for (i, op) in ops.iter().enumerate() {
            if op.cols() != cols {
                return Err(FrameError::dim(format!("operator {i} column count"), cols, op.cols()));
            }
            rows += op.rows();
        }
        let mut m = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for op in ops {
            m.view_mut((at, 0), (op.rows(), cols)).copy_from(&op.m);
            at += op.rows();
        }
        Ok(Self::wrap(m))
    }

    /// Singular values (descending) and right singular vectors, cached.
    pub fn singular_system(&self) -> &SingularSystem {
        self.svd.get_or_init(|| singular_system(&self.m))
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_system().values
    }

    /// Numerical rank with the relative tolerance [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        self.singular_system().rank(RANK_TOL)
    }

    /// Inverse of a square invertible operator.
    pub fn inverse(&self) -> Result<LinOp> {
        let report = is_invertible(self)?;
        if !report.invertible {
            return Err(FrameError::Contract(format!(
                "operator is singular (sigma ratio {:.3e})",
                report.sigma_ratio
            )));
        }
        self.m
            .clone()
            .try_inverse()
            .map(Self::wrap)
            .ok_or_else(|| FrameError::Contract("operator is singular".into()))
    }
}

fn singular_system(m: &DMatrix<f64>) -> SingularSystem {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut pairs: Vec<(f64, Vec<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, v_t.row(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (values, right_vectors) = pairs.into_iter().unzip();
    SingularSystem { values, right_vectors }
}

impl Serialize for LinOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinOp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        LinOp::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A linear idempotent `P` on `R^n` together with a basis of its range.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjection {
    matrix: LinOp,
    basis: Vec<Vec<f64>>,
}

fn check_basis(basis: &[Vec<f64>]) -> Result<(usize, LinOp)> {
    let first = basis
        .first()
        .ok_or_else(|| FrameError::Rank("empty basis: projections must be non-trivial".into()))?;
    let n = first.len();
    if n == 0 {
        return Err(FrameError::Rank("basis vectors must be non-empty".into()));
    }
    if basis.len() > n {
        return Err(FrameError::Rank(format!(
            "{} vectors in R^{n} cannot be independent",
            basis.len()
        )));
    }
    for (i, b) in basis.iter().enumerate() {
        if b.len() != n {
            return Err(FrameError::dim(format!("basis vector {i}"), n, b.len()));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(FrameError::Domain(format!("basis vector {i} has non-finite entries")));
        }
    }
    let b = LinOp::from_matrix(DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]))?;
    let sv = b.singular_system();
    if sv.max() == 0.0 || sv.rank(RANK_TOL) < basis.len() {
        return Err(FrameError::Rank("basis vectors are linearly dependent".into()));
    }
    Ok((n, b))
}

impl SubspaceProjection {
    /// Least-squares projection `B (B^T B)^{-1} B^T` onto the span of `basis`.
    pub fn from_basis(basis: Vec<Vec<f64>>) -> Result<Self> {
        let (_, b) = check_basis(&basis)?;
        // B (B^T B)^{-1} B^T == U U^T with U an orthonormal basis of range(B).
        let svd = b.matrix().clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let matrix = LinOp::wrap(&u * u.transpose());
        Ok(Self { matrix, basis })
    }

    /// Identity projection on `R^n`.
    pub fn identity(n: usize) -> Self {
        let basis = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Self {
            matrix: LinOp::identity(n),
            basis,
        }
    }

    /// Validate an arbitrary (possibly oblique) idempotent; the range basis is
    /// taken from its left singular vectors.
    pub fn from_idempotent(matrix: LinOp) -> Result<Self> {
        check_idempotent(&matrix)?;
        let svd = matrix.matrix().clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.max();
        let mut basis = Vec::new();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if top > 0.0 && s > RANK_TOL * top {
                basis.push(u.column(k).iter().copied().collect());
            }
        }
        if basis.is_empty() {
            return Err(FrameError::invalid("projection", "zero projection is trivial"));
        }
        let out = Self { matrix, basis };
        out.check_range()?;
        Ok(out)
    }

    /// Validate an idempotent against an explicit basis of its range.
    pub fn with_basis(matrix: LinOp, basis: Vec<Vec<f64>>) -> Result<Self> {
        let (n, _) = check_basis(&basis)?;
        if matrix.rows() != n {
            return Err(FrameError::dim("projection size", n, matrix.rows()));
        }
        check_idempotent(&matrix)?;
        if matrix.rank() != basis.len() {
            return Err(FrameError::invalid(
                "projection",
                format!("rank {} differs from basis size {}", matrix.rank(), basis.len()),
            ));
        }
        let out = Self { matrix, basis };
        out.check_range()?;
        Ok(out)
    }

    fn check_range(&self) -> Result<()> {
        for (k, b) in self.basis.iter().enumerate() {
            let pb = self.matrix.apply_unchecked(b);
            let err: f64 = pb.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if err > PROJECTION_TOL * (1.0 + scale) {
                return Err(FrameError::invalid(
                    "projection",
                    format!("P b != b for range basis vector {k} (residual {err:.3e})"),
                ));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> &LinOp {
        &self.matrix
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.len()
    }

    /// `||P^2 - P||_F`.
    pub fn idempotence_residual(&self) -> f64 {
        idempotence_residual(&self.matrix)
    }

    /// `P_V ⊕ P_W` on `R^{n+m}`.
    pub fn direct_sum(&self, other: &SubspaceProjection) -> SubspaceProjection {
        let n = self.ambient_dim();
        let m = other.ambient_dim();
        let mut basis = Vec::with_capacity(self.basis.len() + other.basis.len());
        for b in &self.basis {
            let mut v = b.clone();
            v.extend(std::iter::repeat_n(0.0, m));
            basis.push(v);
        }
        for b in &other.basis {
            let mut v = vec![0.0; n];
            v.extend_from_slice(b);
            basis.push(v);
        }
        SubspaceProjection {
            matrix: self.matrix.direct_sum(&other.matrix),
            basis,
        }
    }

    /// `P_V ⊗ P_W` on `R^{nm}` with range basis `{b ⊗ c}`.
    pub fn kron(&self, other: &SubspaceProjection) -> SubspaceProjection {
        let mut basis = Vec::with_capacity(self.basis.len() * other.basis.len());
        for b in &self.basis {
            for c in &other.basis {
                basis.push(kron_vec(b, c));
            }
        }
        SubspaceProjection {
            matrix: self.matrix.kron(&other.matrix),
            basis,
        }
    }
}

/// `(f ⊗ g)[i*m + j] = f[i] g[j]`.
pub fn kron_vec(f: &[f64], g: &[f64]) -> Vec<f64> {
    f.iter().flat_map(|&a| g.iter().map(move |&b| a * b)).collect()
}

fn idempotence_residual(p: &LinOp) -> f64 {
    (p.matrix() * p.matrix() - p.matrix()).norm()
}

fn check_idempotent(p: &LinOp) -> Result<()> {
    if p.rows() != p.cols() {
        return Err(FrameError::NotSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let residual = idempotence_residual(p);
    if residual > PROJECTION_TOL * (1.0 + p.frobenius_norm()) {
        return Err(FrameError::invalid(
            "projection",
            format!("matrix is not idempotent (||P^2 - P||_F = {residual:.3e})"),
        ));
    }
    Ok(())
}

/// Outcome of an invertibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvertibilityReport {
    pub invertible: bool,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_min / sigma_max` (zero for the zero matrix).
    pub sigma_ratio: f64,
    /// `||M||_2`.
    pub norm: f64,
    /// `||M^{-1}||_2`, infinite when singular.
    pub inverse_norm: f64,
    /// The ratio is within a factor of ten of the tolerance.
    pub borderline: bool,
}

/// Square `M` is invertible iff `sigma_min > 1e-10 * sigma_max`.
pub fn is_invertible(m: &LinOp) -> Result<InvertibilityReport> {
    if m.rows() != m.cols() {
        return Err(FrameError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let sv = m.singular_system();
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    Ok(InvertibilityReport {
        invertible: smax > 0.0 && ratio > RANK_TOL,
        sigma_max: smax,
        sigma_min: smin,
        sigma_ratio: ratio,
        norm: smax,
        inverse_norm: if smin > 0.0 { 1.0 / smin } else { f64::INFINITY },
        borderline: ratio > RANK_TOL / 10.0 && ratio < RANK_TOL * 10.0,
    })
}

/// `inf_{||f||_p = 1} ||Mf||_p`, exact for `p = 2`.
pub fn lower_bound_constant(m: &LinOp, p: f64) -> Result<BoundEstimate> {
    lower_bound_constant_with(m, p, &EstimatorConfig::default())
}

pub fn lower_bound_constant_with(m: &LinOp, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    if p == 2.0 {
        return Ok(norm_est::p2_exact_bounds(m).0);
    }
    norm_est::inf_ratio_matrix(m, p, cfg)
}

/// `||M||_{p -> p}`, exact for `p = 2`.
pub fn operator_norm(m: &LinOp, p: f64) -> Result<BoundEstimate> {
    operator_norm_with(m, p, &EstimatorConfig::default())
}

pub fn operator_norm_with(m: &LinOp, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    if p == 2.0 {
        return Ok(norm_est::p2_exact_bounds(m).1);
    }
    norm_est::sup_ratio_matrix(m, p, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinOp {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        LinOp::from_row_major(rows, cols, &data).unwrap()
    }

    #[test]
    fn apply_examples() {
        assert_eq!(LinOp::identity(2).apply(&[5.0, 7.0]).unwrap(), vec![5.0, 7.0]);
        assert_eq!(LinOp::diagonal(&[2.0, 3.0]).apply(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        let row = LinOp::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(row.apply(&[2.0, 3.0]).unwrap(), vec![5.0]);
        assert!(matches!(row.apply(&[1.0]), Err(FrameError::Dimension { .. })));
    }

    #[test]
    fn construction_errors() {
        assert!(LinOp::from_rows(&[]).is_err());
        assert!(LinOp::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(LinOp::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(LinOp::from_row_major(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(LinOp::identity(3).adjoint(), LinOp::identity(3));
        let m = LinOp::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.adjoint().to_rows(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_op(&mut rng, 3, 5);
        assert_eq!(r.adjoint().adjoint(), r);
        assert_eq!(r.adjoint().rows(), 5);
    }

    #[test]
    fn adjoint_pairing_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let rows = rng.random_range(1..7);
            let cols = rng.random_range(1..7);
            let m = random_op(&mut rng, rows, cols);
            let f: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs: f64 = m.apply(&f).unwrap().iter().zip(&g).map(|(a, b)| a * b).sum();
            let rhs: f64 = f.iter().zip(m.adjoint().apply(&g).unwrap()).map(|(a, b)| a * b).sum();
            let nf = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            let ng = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + m.frobenius_norm() * nf * ng));
        }
    }

    #[test]
    fn projection_examples() {
        let p = SubspaceProjection::from_basis(vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.matrix().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);

        let p = SubspaceProjection::from_basis(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for (i, row) in p.matrix().to_rows().iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_relative_eq!(x, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }

        let p = SubspaceProjection::from_basis(vec![vec![1.0, 1.0]]).unwrap();
        for row in p.matrix().to_rows() {
            for x in row {
                assert_relative_eq!(x, 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn projection_errors() {
        assert!(matches!(
            SubspaceProjection::from_basis(vec![]),
            Err(FrameError::Rank(_))
        ));
        assert!(matches!(
            SubspaceProjection::from_basis(vec![vec![1.0, 2.0], vec![2.0, 4.0]]),
            Err(FrameError::Rank(_))
        ));
        let not_idem = LinOp::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            SubspaceProjection::from_idempotent(not_idem),
            Err(FrameError::Invalid { .. })
        ));
        assert!(SubspaceProjection::from_idempotent(LinOp::zeros(2, 2)).is_err());
        // Oblique idempotent with the wrong claimed range.
        let oblique = LinOp::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(SubspaceProjection::with_basis(oblique.clone(), vec![vec![0.0, 1.0]]).is_err());
        let ok = SubspaceProjection::with_basis(oblique, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(ok.subspace_dim(), 1);
    }

    #[test]
    fn oblique_projection_accepted() {
        // Projects onto span(e1) along span([1,-1]).
        let oblique = LinOp::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = SubspaceProjection::from_idempotent(oblique).unwrap();
        assert_eq!(p.subspace_dim(), 1);
        assert!(p.idempotence_residual() < 1e-15);
    }

    #[test]
    fn invertibility_examples() {
        assert!(is_invertible(&LinOp::identity(3)).unwrap().invertible);
        let z = is_invertible(&LinOp::zeros(2, 2)).unwrap();
        assert!(!z.invertible);
        assert!(z.inverse_norm.is_infinite());
        assert!(!is_invertible(&LinOp::diagonal(&[1.0, 1e-14])).unwrap().invertible);
        assert!(matches!(
            is_invertible(&LinOp::zeros(2, 3)),
            Err(FrameError::NotSquare { .. })
        ));
        let r = is_invertible(&LinOp::diagonal(&[1.0, 1e-10])).unwrap();
        assert!(r.borderline);
    }

    #[test]
    fn lower_bound_examples() {
        assert_relative_eq!(
            lower_bound_constant(&LinOp::identity(2), 2.0).unwrap().value,
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            lower_bound_constant(&LinOp::diagonal(&[3.0, 1.0]), 2.0).unwrap().value,
            1.0,
            epsilon = 1e-14
        );
        let rank1 = LinOp::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(lower_bound_constant(&rank1, 2.0).unwrap().value < 1e-15);
    }

    #[test]
    fn kron_matches_elementary_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_op(&mut rng, 2, 3);
        let b = random_op(&mut rng, 3, 2);
        let f = [0.3, -1.0, 2.0];
        let g = [1.5, 0.25];
        let lhs = a.kron(&b).apply(&kron_vec(&f, &g)).unwrap();
        let rhs = kron_vec(&a.apply(&f).unwrap(), &b.apply(&g).unwrap());
        for (x, y) in lhs.iter().zip(&rhs) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_system_of_wide_matrix_has_kernel() {
        let m = LinOp::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let sv = m.singular_system();
        assert_eq!(sv.values.len(), 3);
        assert!(sv.min() < 1e-15);
        assert_eq!(m.rank(), 1);
        let kernel = m.apply(&sv.right_vectors[2]).unwrap();
        assert!(kernel[0].abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn projections_are_idempotent_with_correct_range(
            seed in 0u64..10_000,
            n in 1usize..6,
            k_frac in 0.0f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let basis: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let p = SubspaceProjection::from_basis(basis.clone()).unwrap();
            prop_assert!(p.idempotence_residual() <= 1e-10 * (1.0 + p.matrix().frobenius_norm()));
            for b in &basis {
                let pb = p.matrix().apply(b).unwrap();
                for (x, y) in pb.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn invertible_implies_positive_lower_bound(seed in 0u64..10_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_op(&mut rng, n, n);
            if is_invertible(&m).unwrap().invertible {
                prop_assert!(lower_bound_constant(&m, 2.0).unwrap().value > 0.0);
            }
        }
    }
}
