//! Constructions that produce new families from old ones, each paired with
//! the bounds predicted for the result: transformation by an operator,
//! perturbation, direct sums and tensor products.

use serde::Serialize;

use crate::error::{FrameError, Result};
use crate::gframe::{estimate_bounds, ratio_bounds, FrameOptions, GPFusionFrame, WeightedTriple};
use crate::linop::{is_invertible, LinOp, SubspaceProjection, RANK_TOL};
use crate::norm_est::{
    optimize_combination, random_unit_vector, stream_rng, BoundEstimate, BoundKind, NormCombination,
};
use crate::pnorm::{p_norm_raw, PNormSpace};

/// Residual allowed in `P_V U P_{UV} = P_V U` (Frobenius norm).
pub const HYPOTHESIS_TOL: f64 = 1e-9;
/// Largest violation accepted by [`perturbation_condition_holds`].
pub const VIOLATION_TOL: f64 = 1e-9;
/// Slack used when comparing estimated constants against each other.
pub const COMPARISON_TOL: f64 = 1e-6;

/// Which construction a set of predicted bounds comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    TransformInvertible,
    BoundedBelow,
    #[serde(rename = "perturbation-1")]
    Perturbation1,
    #[serde(rename = "perturbation-2")]
    Perturbation2,
    DirectSum,
    TensorProduct,
    TensorConverse,
}

impl TheoremTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TheoremTag::TransformInvertible => "transform-invertible",
            TheoremTag::BoundedBelow => "bounded-below",
            TheoremTag::Perturbation1 => "perturbation-1",
            TheoremTag::Perturbation2 => "perturbation-2",
            TheoremTag::DirectSum => "direct-sum",
            TheoremTag::TensorProduct => "tensor-product",
            TheoremTag::TensorConverse => "tensor-converse",
        }
    }
}

/// Frame bounds derived from the constants of the input families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedBounds {
    pub lower: f64,
    pub upper: f64,
    pub provenance: TheoremTag,
    /// Extra statement of the same bounds in another form, if any.
    pub note: Option<String>,
}

impl PredictedBounds {
    pub fn new(lower: f64, upper: f64, provenance: TheoremTag) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && 0.0 <= lower && lower <= upper) {
            return Err(FrameError::Contract(format!(
                "{}: predicted bounds must satisfy 0 <= lower <= upper, got ({lower}, {upper})",
                provenance.as_str()
            )));
        }
        Ok(Self {
            lower,
            upper,
            provenance,
            note: None,
        })
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }

    /// Whether `(a, b)` lies in `[lower - tol, upper + tol]`.
    pub fn contains(&self, a: f64, b: f64, tol: f64) -> bool {
        a >= self.lower - tol && b <= self.upper + tol
    }
}

/// Orthogonal projection onto `U V`, where `V` is the range of `proj`.
pub fn image_projection(u: &LinOp, proj: &SubspaceProjection) -> Result<SubspaceProjection> {
    let basis = proj.basis().iter().map(|b| u.apply(b)).collect::<Result<Vec<_>>>()?;
    SubspaceProjection::from_basis(basis)
}

/// Projections onto `U V_i` for every triple.
pub fn image_projections(frame: &GPFusionFrame, u: &LinOp) -> Result<Vec<SubspaceProjection>> {
    frame
        .triples()
        .iter()
        .map(|t| image_projection(u, t.projection()))
        .collect()
}

/// Result of [`transform_by_invertible`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub frame: GPFusionFrame,
    pub predicted: PredictedBounds,
    pub hypothesis_ok: bool,
    /// Largest `||P_{V_i} U P_{UV_i} - P_{V_i} U||_F` over the triples.
    pub hypothesis_residual: f64,
}

fn transformed_family(
    frame: &GPFusionFrame,
    u: &LinOp,
    projections_on_uv: &[SubspaceProjection],
) -> Result<(GPFusionFrame, f64)> {
    let n = frame.dim();
    if u.rows() != n || u.cols() != n {
        return Err(FrameError::dim(
            "transform operator size",
            n,
            if u.rows() != n { u.rows() } else { u.cols() },
        ));
    }
    if projections_on_uv.len() != frame.len() {
        return Err(FrameError::dim(
            "projections onto U V_i",
            frame.len(),
            projections_on_uv.len(),
        ));
    }
    let mut residual: f64 = 0.0;
    let mut triples = Vec::with_capacity(frame.len());
    for (i, (t, q)) in frame.triples().iter().zip(projections_on_uv).enumerate() {
        if q.ambient_dim() != n {
            return Err(FrameError::dim(format!("projection onto U V_{i}"), n, q.ambient_dim()));
        }
        let pu = t.projection().matrix().compose(u)?;
        let pupq = pu.compose(q.matrix())?;
        residual = residual.max(pupq.sub(&pu)?.frobenius_norm());
        let local = t.local_op().compose(&pu)?;
        triples.push(WeightedTriple::new(q.clone(), local, t.weight())?);
    }
    Ok((GPFusionFrame::new(*frame.space(), triples)?, residual))
}

/// `Γ = {(U V_i, Λ_i P_{V_i} U, v_i)}` with the envelope `[A / ||U^{-1}||, B ||U||]`.
pub fn transform_by_invertible(
    frame: &GPFusionFrame,
    u: &LinOp,
    projections_on_uv: &[SubspaceProjection],
    opts: &FrameOptions,
) -> Result<Transformed> {
    let report = is_invertible(u)?;
    if !report.invertible {
        return Err(FrameError::Contract(format!(
            "transform operator is singular (sigma_min/sigma_max = {:.3e})",
            report.sigma_ratio
        )));
    }
    let (gamma, residual) = transformed_family(frame, u, projections_on_uv)?;
    let (a, b) = estimate_bounds(frame, opts)?.values();
    let p = frame.p();
    let u_norm = ratio_bounds(u, p, opts)?.upper().value;
    let inv_norm = ratio_bounds(&u.inverse()?, p, opts)?.upper().value;
    let predicted = PredictedBounds::new(a / inv_norm, b * u_norm, TheoremTag::TransformInvertible)?;
    Ok(Transformed {
        frame: gamma,
        predicted,
        hypothesis_ok: residual <= HYPOTHESIS_TOL,
        hypothesis_residual: residual,
    })
}

/// Both directions of "Γ is a frame iff U is bounded below".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedBelowReport {
    /// False when `P_V U P_{UV} = P_V U` fails; the directions are then not evaluated.
    pub applicable: bool,
    pub hypothesis_residual: f64,
    /// Bounds `(A, B)` of the original family.
    pub frame_bounds: (f64, f64),
    /// Bounds `(C, D)` of the transformed family.
    pub transformed_bounds: (f64, f64),
    pub transformed_is_frame: bool,
    /// `M = inf ||U f|| / ||f||`.
    pub u_lower_bound: f64,
    pub u_bounded_below: bool,
    /// Γ frame ⇒ `M >= C / B`; `None` when Γ is not a frame.
    pub frame_implies_bounded_below: Option<bool>,
    /// `M > 0` ⇒ `C >= A M`; `None` when U is not bounded below.
    pub bounded_below_implies_frame: Option<bool>,
}

impl BoundedBelowReport {
    pub fn holds(&self) -> bool {
        self.applicable
            && self.frame_implies_bounded_below != Some(false)
            && self.bounded_below_implies_frame != Some(false)
            && self.transformed_is_frame == self.u_bounded_below
    }
}

/// Check the bounded-below characterisation for an arbitrary square `U`.
pub fn bounded_below_iff_frame(
    frame: &GPFusionFrame,
    u: &LinOp,
    projections_on_uv: &[SubspaceProjection],
    opts: &FrameOptions,
) -> Result<BoundedBelowReport> {
    let (gamma, residual) = transformed_family(frame, u, projections_on_uv)?;
    let applicable = residual <= HYPOTHESIS_TOL;
    let fb = estimate_bounds(frame, opts)?;
    let gb = estimate_bounds(&gamma, opts)?;
    let (a, b) = fb.values();
    let (c, d) = gb.values();
    let ub = ratio_bounds(u, frame.p(), opts)?;
    let m = ub.lower().value;
    let u_scale = ub.upper().value;
    let u_bounded_below = u.rank() == frame.dim() && m > RANK_TOL * u_scale;
    let transformed_is_frame = gamma.analysis_matrix().rank() == frame.dim() && c > RANK_TOL * d;
    let tol = COMPARISON_TOL * (1.0 + u_scale + d);
    let (forward, backward) = if applicable {
        (
            transformed_is_frame.then(|| m >= c / b - tol),
            u_bounded_below.then_some(c >= a * m - tol),
        )
    } else {
        (None, None)
    };
    Ok(BoundedBelowReport {
        applicable,
        hypothesis_residual: residual,
        frame_bounds: (a, b),
        transformed_bounds: (c, d),
        transformed_is_frame,
        u_lower_bound: m,
        u_bounded_below,
        frame_implies_bounded_below: forward,
        bounded_below_implies_frame: backward,
    })
}

/// `(λ₁, λ₂, μ)` of the general perturbation condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
}

impl PerturbationParams {
    pub fn new(lambda1: f64, lambda2: f64, mu: f64) -> Result<Self> {
        for (name, l) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(l > -1.0 && l < 1.0) {
                return Err(FrameError::Contract(format!("{name} must lie in (-1, 1), got {l}")));
            }
        }
        if !mu.is_finite() {
            return Err(FrameError::Contract(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { lambda1, lambda2, mu })
    }

    /// `-(1 + λ₁) B <= μ <= (1 - λ₁) A`.
    pub fn check_against(&self, a: f64, b: f64) -> Result<()> {
        let lo = -(1.0 + self.lambda1) * b;
        let hi = (1.0 - self.lambda1) * a;
        if self.mu < lo || self.mu > hi {
            return Err(FrameError::Contract(format!(
                "mu = {} must lie in [-(1 + lambda1) B, (1 - lambda1) A] = [{lo}, {hi}]",
                self.mu
            )));
        }
        Ok(())
    }
}

fn difference_matrix(lambda: &GPFusionFrame, gamma: &GPFusionFrame) -> Result<LinOp> {
    if lambda.dim() != gamma.dim() {
        return Err(FrameError::dim("perturbed family dimension", lambda.dim(), gamma.dim()));
    }
    if lambda.p() != gamma.p() {
        return Err(FrameError::Contract(format!(
            "families use different exponents ({} vs {})",
            lambda.p(),
            gamma.p()
        )));
    }
    if lambda.block_dims() != gamma.block_dims() {
        return Err(FrameError::Contract(format!(
            "block dimensions differ: {:?} vs {:?}",
            lambda.block_dims(),
            gamma.block_dims()
        )));
    }
    lambda.analysis_matrix().sub(&gamma.analysis_matrix())
}

/// Outcome of [`perturbation_condition_holds`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationCheck {
    pub holds: bool,
    /// Estimated `sup_f (LHS(f) - RHS(f)) / ||f||` with its witness.
    pub max_violation: BoundEstimate,
    pub tolerance: f64,
}

/// Estimate the worst violation of
/// `||U_Λ f - U_Γ f|| <= λ₁ ||U_Λ f|| + λ₂ ||U_Γ f|| + μ ||f||`.
pub fn perturbation_condition_holds(
    lambda: &GPFusionFrame,
    gamma: &GPFusionFrame,
    params: &PerturbationParams,
    opts: &FrameOptions,
) -> Result<PerturbationCheck> {
    let diff = difference_matrix(lambda, gamma)?;
    let (a, b) = estimate_bounds(lambda, opts)?.values();
    params.check_against(a, b)?;
    let objective = NormCombination::new(
        vec![
            (1.0, diff),
            (-params.lambda1, lambda.analysis_matrix()),
            (-params.lambda2, gamma.analysis_matrix()),
        ],
        -params.mu,
        lambda.p(),
    )?;
    let max_violation = optimize_combination(&objective, BoundKind::Sup, &opts.estimator)?;
    Ok(PerturbationCheck {
        holds: max_violation.value <= VIOLATION_TOL,
        max_violation,
        tolerance: VIOLATION_TOL,
    })
}

/// `([A(1 - λ₁) - μ] / (1 + λ₂), [B(1 + λ₁) + μ] / (1 - λ₂))`.
pub fn predicted_perturbed_bounds(a: f64, b: f64, params: &PerturbationParams) -> Result<PredictedBounds> {
    if a > b {
        return Err(FrameError::Contract(format!("expected A <= B, got A = {a}, B = {b}")));
    }
    params.check_against(a, b)?;
    let lower = (a * (1.0 - params.lambda1) - params.mu) / (1.0 + params.lambda2);
    let upper = (b * (1.0 + params.lambda1) + params.mu) / (1.0 - params.lambda2);
    PredictedBounds::new(lower, upper, TheoremTag::Perturbation1)
}

/// `(A - R, B + R)` for a perturbation radius `0 <= R < A`.
pub fn simple_perturbation_bounds(a: f64, b: f64, r: f64) -> Result<PredictedBounds> {
    if !(r >= 0.0 && r < a) {
        return Err(FrameError::Contract(format!(
            "perturbation radius must satisfy 0 <= R < A, got R = {r}, A = {a}"
        )));
    }
    PredictedBounds::new(a - r, b + r, TheoremTag::Perturbation2)
}

/// Smallest `R` with `||U_Λ f - U_Γ f|| <= R ||f||`.
pub fn measure_perturbation_radius(
    lambda: &GPFusionFrame,
    gamma: &GPFusionFrame,
    opts: &FrameOptions,
) -> Result<BoundEstimate> {
    let diff = difference_matrix(lambda, gamma)?;
    Ok(ratio_bounds(&diff, lambda.p(), opts)?.upper().clone())
}

/// A combined family together with its predicted bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub frame: GPFusionFrame,
    pub predicted: PredictedBounds,
}

fn same_exponent(x: &GPFusionFrame, y: &GPFusionFrame) -> Result<()> {
    if x.p() != y.p() {
        return Err(FrameError::Contract(format!(
            "families use different exponents ({} vs {})",
            x.p(),
            y.p()
        )));
    }
    Ok(())
}

/// `Λ ⊕ Γ = {(V_i ⊕ W_i, Λ_i ⊕ Γ_i, v_i)}` on `R^{n+m}`.
pub fn direct_sum(x: &GPFusionFrame, y: &GPFusionFrame, opts: &FrameOptions) -> Result<Combined> {
    same_exponent(x, y)?;
    if x.len() != y.len() {
        return Err(FrameError::Contract(format!(
            "direct sum pairs triples by index: {} vs {} triples",
            x.len(),
            y.len()
        )));
    }
    let mut triples = Vec::with_capacity(x.len());
    for (i, (s, t)) in x.triples().iter().zip(y.triples()).enumerate() {
        let (v, w) = (s.weight(), t.weight());
        if (v - w).abs() > 1e-12 * v.max(w) {
            return Err(FrameError::Contract(format!(
                "direct sum requires equal weights per index: triple {i} has {v} and {w}"
            )));
        }
        triples.push(WeightedTriple::new(
            s.projection().direct_sum(t.projection()),
            s.local_op().direct_sum(t.local_op()),
            v,
        )?);
    }
    let frame = GPFusionFrame::new(PNormSpace::new(x.dim() + y.dim(), x.p())?, triples)?;
    let (a, b) = estimate_bounds(x, opts)?.values();
    let (c, d) = estimate_bounds(y, opts)?.values();
    let p = x.p();
    let predicted = PredictedBounds::new(a.min(c), b.max(d), TheoremTag::DirectSum)?.with_note(format!(
        "powered form: min(A^p, C^p) = {}, max(B^p, D^p) = {}",
        a.powf(p).min(c.powf(p)),
        b.powf(p).max(d.powf(p))
    ));
    Ok(Combined { frame, predicted })
}

/// A tensor-product family that remembers its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorProduct {
    pub frame: GPFusionFrame,
    pub predicted: PredictedBounds,
    pub left: GPFusionFrame,
    pub right: GPFusionFrame,
}

/// `Λ ⊗ Γ = {(V_i ⊗ W_j, Λ_i ⊗ Γ_j, v_i w_j)}` on `R^{nm}`, pairs ordered with
/// `i` outer.
pub fn tensor_product(x: &GPFusionFrame, y: &GPFusionFrame, opts: &FrameOptions) -> Result<TensorProduct> {
    same_exponent(x, y)?;
    let mut triples = Vec::with_capacity(x.len() * y.len());
    for s in x.triples() {
        for t in y.triples() {
            triples.push(WeightedTriple::new(
                s.projection().kron(t.projection()),
                s.local_op().kron(t.local_op()),
                s.weight() * t.weight(),
            )?);
        }
    }
    let frame = GPFusionFrame::new(PNormSpace::new(x.dim() * y.dim(), x.p())?, triples)?;
    let (a, b) = estimate_bounds(x, opts)?.values();
    let (c, d) = estimate_bounds(y, opts)?.values();
    let predicted = PredictedBounds::new(a * c, b * d, TheoremTag::TensorProduct)?;
    Ok(TensorProduct {
        frame,
        predicted,
        left: x.clone(),
        right: y.clone(),
    })
}

/// Factor bounds recovered from a product family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorConverse {
    /// Bounds of the left factor read off elementary tensors `f ⊗ g₀`.
    pub left: PredictedBounds,
    /// Bounds of the right factor read off elementary tensors `f₀ ⊗ g`.
    pub right: PredictedBounds,
    /// `(A⊗ / D, B⊗ / C)`: valid bounds for the left factor from product constants.
    pub left_envelope: PredictedBounds,
    /// `(A⊗ / B, B⊗ / A)`: the same for the right factor.
    pub right_envelope: PredictedBounds,
    pub left_is_frame: bool,
    pub right_is_frame: bool,
    /// Number of fixed vectors tried for each factor.
    pub samples: usize,
}

/// Column `v` as an `len × 1` operator.
fn column(v: &[f64]) -> LinOp {
    LinOp::from_row_major(v.len(), 1, v).expect("non-empty column")
}

/// Fixed vectors for the restriction: the sup witness followed by random unit vectors.
fn anchor_vectors(witness: &[f64], dim: usize, p: f64, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, stream);
    let mut out = vec![witness.to_vec()];
    out.extend((0..3).map(|_| random_unit_vector(&mut rng, dim, p)));
    out
}

fn restricted_extremes(
    product: &LinOp,
    embeddings: &[(LinOp, f64)],
    p: f64,
    opts: &FrameOptions,
) -> Result<Option<(f64, f64)>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (embed, scale) in embeddings {
        let b = ratio_bounds(&product.compose(embed)?, p, opts)?;
        lo = lo.min(b.lower().value / scale);
        hi = hi.max(b.upper().value / scale);
    }
    Ok((!embeddings.is_empty()).then_some((lo, hi)))
}

/// Recover the factor bounds of a product family from its elementary tensors.
pub fn tensor_converse_extract(tp: &TensorProduct, opts: &FrameOptions) -> Result<TensorConverse> {
    let (n, m, p) = (tp.left.dim(), tp.right.dim(), tp.frame.p());
    if tp.frame.dim() != n * m {
        return Err(FrameError::Contract("product family does not match its factors".into()));
    }
    let product = tp.frame.analysis_matrix();
    let left_m = tp.left.analysis_matrix();
    let right_m = tp.right.analysis_matrix();
    let left_bounds = estimate_bounds(&tp.left, opts)?;
    let right_bounds = estimate_bounds(&tp.right, opts)?;
    let seed = opts.estimator.seed;

    // Along f ⊗ g₀ the product ratio is ||U_Λ f|| ||U_Γ g₀|| / ||f||.
    let left_embeds: Vec<(LinOp, f64)> = anchor_vectors(&right_bounds.upper().witness, m, p, seed, 0x7e1)
        .into_iter()
        .filter_map(|g0| {
            let scale = p_norm_raw(&right_m.apply_unchecked(&g0), p) / p_norm_raw(&g0, p);
            (scale > RANK_TOL).then(|| (LinOp::identity(n).kron(&column(&g0)), scale))
        })
        .collect();
    let right_embeds: Vec<(LinOp, f64)> = anchor_vectors(&left_bounds.upper().witness, n, p, seed, 0x7e2)
        .into_iter()
        .filter_map(|f0| {
            let scale = p_norm_raw(&left_m.apply_unchecked(&f0), p) / p_norm_raw(&f0, p);
            (scale > RANK_TOL).then(|| (column(&f0).kron(&LinOp::identity(m)), scale))
        })
        .collect();
    let samples = left_embeds.len().min(right_embeds.len());
    let (Some((a1, b1)), Some((c1, d1))) = (
        restricted_extremes(&product, &left_embeds, p, opts)?,
        restricted_extremes(&product, &right_embeds, p, opts)?,
    ) else {
        return Err(FrameError::Contract(
            "a factor annihilates every anchor vector; the product is not a frame".into(),
        ));
    };

    let (ap, bp) = estimate_bounds(&tp.frame, opts)?.values();
    let (a, b) = left_bounds.values();
    let (c, d) = right_bounds.values();
    let tag = TheoremTag::TensorConverse;
    let frame_like = |lo: f64, hi: f64| lo > opts.bessel_only_tol * hi;
    Ok(TensorConverse {
        left: PredictedBounds::new(a1.max(0.0), b1, tag)?,
        right: PredictedBounds::new(c1.max(0.0), d1, tag)?,
        left_envelope: PredictedBounds::new(ap / d, bp / c.max(f64::MIN_POSITIVE), tag)?,
        right_envelope: PredictedBounds::new(ap / b, bp / a.max(f64::MIN_POSITIVE), tag)?,
        left_is_frame: frame_like(a1, b1),
        right_is_frame: frame_like(c1, d1),
        samples,
    })
}
