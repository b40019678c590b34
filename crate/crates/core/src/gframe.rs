//! Generalized p-fusion frames: weighted families `{(V_i, Λ_i, v_i)}` on
//! `(R^n, ||.||_p)`, their analysis and synthesis operators, bound estimation,
//! classification and the Riesz-basis checker.
//!
//! The analysis operator is `U f = {v_i Λ_i P_i f}`; the synthesis operator
//! acts on coefficient vectors of functionals as
//! `T {g_i} = Σ v_i P_i^T Λ_i^T g_i`, which makes `T` the coordinate adjoint
//! of `U`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{FrameError, Result};
use crate::linop::{LinOp, SubspaceProjection, RANK_TOL};
use crate::norm_est::{self, p2_exact_bounds, stream_rng, BoundEstimate, EstimatorConfig};
use crate::pnorm::{dual_pairing, p_norm_raw, DualMixedSeq, MixedSeq, PNormSpace};

/// One member `(V_i, Λ_i, v_i)` of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTriple {
    projection: SubspaceProjection,
    local_op: LinOp,
    weight: f64,
}

impl WeightedTriple {
    pub fn new(projection: SubspaceProjection, local_op: LinOp, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(FrameError::invalid(
                "weight",
                format!("weight must be > 0, got {weight}"),
            ));
        }
        if local_op.cols() != projection.ambient_dim() {
            return Err(FrameError::dim(
                "local operator columns",
                projection.ambient_dim(),
                local_op.cols(),
            ));
        }
        Ok(Self {
            projection,
            local_op,
            weight,
        })
    }

    pub fn projection(&self) -> &SubspaceProjection {
        &self.projection
    }

    pub fn local_op(&self) -> &LinOp {
        &self.local_op
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn block_dim(&self) -> usize {
        self.local_op.rows()
    }

    /// `Λ_i P_i` (unweighted).
    pub fn composite(&self) -> LinOp {
        self.local_op
            .compose(self.projection.matrix())
            .expect("shapes validated at construction")
    }

    /// `v_i Λ_i P_i`.
    pub fn weighted_composite(&self) -> LinOp {
        self.composite().scale(self.weight)
    }
}

/// A finite family of weighted triples on a common p-normed space.
#[derive(Debug, Clone, PartialEq)]
pub struct GPFusionFrame {
    space: PNormSpace,
    triples: Vec<WeightedTriple>,
}

impl GPFusionFrame {
    pub fn new(space: PNormSpace, triples: Vec<WeightedTriple>) -> Result<Self> {
        if triples.is_empty() {
            return Err(FrameError::invalid("frame", "family must contain at least one triple"));
        }
        for (i, t) in triples.iter().enumerate() {
            if t.projection.ambient_dim() != space.dim() {
                return Err(FrameError::dim(
                    format!("triple {i} ambient dimension"),
                    space.dim(),
                    t.projection.ambient_dim(),
                ));
            }
        }
        Ok(Self { space, triples })
    }

    /// The single-triple family `{(X, I, 1)}`.
    pub fn identity(n: usize, p: f64) -> Result<Self> {
        let space = PNormSpace::new(n, p)?;
        let t = WeightedTriple::new(SubspaceProjection::identity(n), LinOp::identity(n), 1.0)?;
        Self::new(space, vec![t])
    }

    pub fn space(&self) -> &PNormSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn p(&self) -> f64 {
        self.space.p()
    }

    pub fn q(&self) -> f64 {
        self.space.q()
    }

    pub fn triples(&self) -> &[WeightedTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.triples.iter().map(WeightedTriple::block_dim).collect()
    }

    pub fn total_block_dim(&self) -> usize {
        self.block_dims().iter().sum()
    }

    /// Stacked `[v_1 Λ_1 P_1; ...; v_m Λ_m P_m]`, the matrix of `U`.
    pub fn analysis_matrix(&self) -> LinOp {
        let blocks: Vec<LinOp> = self.triples.iter().map(WeightedTriple::weighted_composite).collect();
        LinOp::vstack(&blocks).expect("triples share the ambient dimension")
    }

    /// The matrix of `T`, equal to the transpose of the analysis matrix.
    pub fn synthesis_matrix(&self) -> LinOp {
        self.analysis_matrix().adjoint()
    }

    /// `U f = {v_i Λ_i P_i f}`.
    pub fn analysis_apply(&self, f: &[f64]) -> Result<MixedSeq> {
        if f.len() != self.dim() {
            return Err(FrameError::dim("analysis input length", self.dim(), f.len()));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(FrameError::Domain("non-finite input".into()));
        }
        let blocks = self
            .triples
            .iter()
            .map(|t| {
                let pf = t.projection.matrix().apply_unchecked(f);
                t.local_op
                    .apply_unchecked(&pf)
                    .into_iter()
                    .map(|x| t.weight * x)
                    .collect()
            })
            .collect();
        Ok(MixedSeq::from_blocks_unchecked(blocks, self.p()))
    }

    /// `T {g_i} = Σ v_i P_i^T Λ_i^T g_i`, a coefficient vector in `X*`.
    pub fn synthesis_apply(&self, g: &DualMixedSeq) -> Result<Vec<f64>> {
        let order: Vec<usize> = (0..self.len()).collect();
        self.synthesis_in_order(g, &order)
    }

    fn synthesis_in_order(&self, g: &DualMixedSeq, order: &[usize]) -> Result<Vec<f64>> {
        if g.blocks().len() != self.len() {
            return Err(FrameError::dim("synthesis block count", self.len(), g.blocks().len()));
        }
        for (i, (t, b)) in self.triples.iter().zip(g.blocks()).enumerate() {
            if b.len() != t.block_dim() {
                return Err(FrameError::dim(format!("synthesis block {i}"), t.block_dim(), b.len()));
            }
        }
        let mut out = vec![0.0; self.dim()];
        for &i in order {
            let t = &self.triples[i];
            let lg = t.local_op.adjoint_apply(&g.blocks()[i]);
            let plg = t.projection.matrix().adjoint_apply(&lg);
            for (o, x) in out.iter_mut().zip(&plg) {
                *o += t.weight * x;
            }
        }
        Ok(out)
    }

    /// Same family with every weight multiplied by `c > 0`.
    pub fn with_scaled_weights(&self, c: f64) -> Result<Self> {
        let triples = self
            .triples
            .iter()
            .map(|t| WeightedTriple::new(t.projection.clone(), t.local_op.clone(), t.weight * c))
            .collect::<Result<_>>()?;
        Self::new(self.space, triples)
    }

    /// Same family with every local operator multiplied by `c`.
    pub fn with_scaled_operators(&self, c: f64) -> Result<Self> {
        let triples = self
            .triples
            .iter()
            .map(|t| WeightedTriple::new(t.projection.clone(), t.local_op.scale(c), t.weight))
            .collect::<Result<_>>()?;
        Self::new(self.space, triples)
    }

    /// Family restricted to the given triple indices (in that order).
    pub fn subfamily(&self, indices: &[usize]) -> Result<Self> {
        let triples = indices
            .iter()
            .map(|&i| {
                self.triples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| FrameError::Domain(format!("triple index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Self::new(self.space, triples)
    }
}

/// Settings shared by every frame-level computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOptions {
    pub estimator: EstimatorConfig,
    /// Use singular values when `p = 2`.
    pub p2_exact: bool,
    /// Relative gap `|A - B| <= tight_tol * B` for tightness (and `|A - 1|` for Parseval).
    pub tight_tol: f64,
    /// `A <= bessel_only_tol * B` on an injective family is reported as Bessel-only.
    pub bessel_only_tol: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            p2_exact: true,
            tight_tol: 1e-6,
            bessel_only_tol: 1e-8,
        }
    }
}

impl FrameOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            estimator: EstimatorConfig::new(restarts, seed),
            ..Self::default()
        }
    }
}

/// Estimated frame bounds; `exact` is filled for `p = 2` when enabled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameBounds {
    pub estimated_lower: BoundEstimate,
    pub estimated_upper: BoundEstimate,
    pub exact: Option<(BoundEstimate, BoundEstimate)>,
}

impl FrameBounds {
    /// Certified value when available, otherwise the gradient estimate.
    pub fn lower(&self) -> &BoundEstimate {
        self.exact.as_ref().map_or(&self.estimated_lower, |(a, _)| a)
    }

    pub fn upper(&self) -> &BoundEstimate {
        self.exact.as_ref().map_or(&self.estimated_upper, |(_, b)| b)
    }

    pub fn values(&self) -> (f64, f64) {
        (self.lower().value, self.upper().value)
    }
}

/// Extremes of `||M x||_r / ||x||_r`, exact at `r = 2` when allowed.
pub(crate) fn ratio_bounds(m: &LinOp, r: f64, opts: &FrameOptions) -> Result<FrameBounds> {
    let estimated_lower = norm_est::inf_ratio_matrix(m, r, &opts.estimator)?;
    let estimated_upper = norm_est::sup_ratio_matrix(m, r, &opts.estimator)?;
    let exact = (opts.p2_exact && r == 2.0).then(|| p2_exact_bounds(m));
    Ok(FrameBounds {
        estimated_lower,
        estimated_upper,
        exact,
    })
}

/// Lower and upper frame bounds of `f -> U f`.
pub fn estimate_bounds(frame: &GPFusionFrame, opts: &FrameOptions) -> Result<FrameBounds> {
    ratio_bounds(&frame.analysis_matrix(), frame.p(), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrameClass {
    NotFrame,
    BesselOnly,
    Frame,
    Tight,
    Parseval,
}

impl FrameClass {
    /// Frame, Tight or Parseval.
    pub fn is_frame(self) -> bool {
        matches!(self, FrameClass::Frame | FrameClass::Tight | FrameClass::Parseval)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameClassification {
    pub bessel_bound: Option<BoundEstimate>,
    pub lower_bound: Option<BoundEstimate>,
    pub class: FrameClass,
    /// Dimension of the common kernel of the composites.
    pub kernel_dim: usize,
    pub tight_tol: f64,
}

/// Classify a family by a rank test and its estimated bounds.
pub fn classify(frame: &GPFusionFrame, opts: &FrameOptions) -> Result<FrameClassification> {
    let bounds = estimate_bounds(frame, opts)?;
    Ok(classify_with_bounds(frame, &bounds, opts))
}

pub fn classify_with_bounds(frame: &GPFusionFrame, bounds: &FrameBounds, opts: &FrameOptions) -> FrameClassification {
    let rank = frame.analysis_matrix().rank();
    let kernel_dim = frame.dim() - rank;
    let (a, b) = bounds.values();
    let class = if kernel_dim > 0 {
        FrameClass::NotFrame
    } else if a <= opts.bessel_only_tol * b {
        FrameClass::BesselOnly
    } else if (a - b).abs() <= opts.tight_tol * b {
        if (a - 1.0).abs() <= opts.tight_tol && (b - 1.0).abs() <= opts.tight_tol {
            FrameClass::Parseval
        } else {
            FrameClass::Tight
        }
    } else {
        FrameClass::Frame
    };
    FrameClassification {
        bessel_bound: Some(bounds.upper().clone()),
        lower_bound: (kernel_dim == 0).then(|| bounds.lower().clone()),
        class,
        kernel_dim,
        tight_tol: opts.tight_tol,
    }
}

/// Replace each `Λ_i` by `A^{-1} Λ_i` for a tight family with bound `A`.
pub fn rescale_to_parseval(frame: &GPFusionFrame, opts: &FrameOptions) -> Result<GPFusionFrame> {
    let c = classify(frame, opts)?;
    match c.class {
        FrameClass::Tight | FrameClass::Parseval => {
            let a = c.lower_bound.expect("frames carry a lower bound").value;
            frame.with_scaled_operators(1.0 / a)
        }
        other => Err(FrameError::Contract(format!(
            "rescaling to Parseval requires a tight frame, family is {other:?}"
        ))),
    }
}

/// Only `f = 0` is annihilated by every `Λ_i P_i`.
pub fn is_gf_complete(frame: &GPFusionFrame) -> bool {
    frame.analysis_matrix().rank() == frame.dim()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubsetCheck {
    Exhaustive,
    Sampled,
}

/// Largest family for which every subset is checked.
pub const EXHAUSTIVE_SUBSET_LIMIT: usize = 8;
/// Number of random subsets drawn beyond that limit.
pub const SAMPLED_SUBSETS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszReport {
    pub gf_complete: bool,
    /// `inf ||T g||_q / ||g||_q` over all checked subfamilies.
    pub lower_sandwich: BoundEstimate,
    /// `sup ||T g||_q / ||g||_q` over all checked subfamilies.
    pub upper_sandwich: BoundEstimate,
    pub is_riesz: bool,
    pub subset_check: SubsetCheck,
    pub subsets_checked: usize,
    pub worst_lower_subset: Vec<usize>,
    pub worst_upper_subset: Vec<usize>,
}

fn synthesis_restricted(frame: &GPFusionFrame, subset: &[usize]) -> LinOp {
    let blocks: Vec<LinOp> = subset.iter().map(|&i| frame.triples[i].weighted_composite()).collect();
    LinOp::vstack(&blocks).expect("same ambient dimension").adjoint()
}

fn embed_witness(frame: &GPFusionFrame, subset: &[usize], w: &[f64]) -> Vec<f64> {
    let dims = frame.block_dims();
    let mut offsets = vec![0; dims.len()];
    for i in 1..dims.len() {
        offsets[i] = offsets[i - 1] + dims[i - 1];
    }
    let mut out = vec![0.0; frame.total_block_dim()];
    let mut at = 0;
    for &i in subset {
        out[offsets[i]..offsets[i] + dims[i]].copy_from_slice(&w[at..at + dims[i]]);
        at += dims[i];
    }
    out
}

fn riesz_subsets(m: usize, seed: u64) -> (Vec<Vec<usize>>, SubsetCheck) {
    if m <= EXHAUSTIVE_SUBSET_LIMIT {
        let subsets = (1u32..(1 << m))
            .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        return (subsets, SubsetCheck::Exhaustive);
    }
    let mut rng = stream_rng(seed ^ 0x72_6965_737a, 0);
    let mut subsets = vec![(0..m).collect::<Vec<_>>()];
    while subsets.len() < SAMPLED_SUBSETS + 1 {
        let s: Vec<usize> = (0..m).filter(|_| rng.random::<bool>()).collect();
        if !s.is_empty() {
            subsets.push(s);
        }
    }
    (subsets, SubsetCheck::Sampled)
}

/// Estimate the synthesis sandwich constants on every subfamily.
pub fn check_riesz(frame: &GPFusionFrame, opts: &FrameOptions) -> Result<RieszReport> {
    let q = frame.q();
    let gf_complete = is_gf_complete(frame);
    let (subsets, subset_check) = riesz_subsets(frame.len(), opts.estimator.seed);

    let mut lower: Option<(BoundEstimate, Vec<usize>)> = None;
    let mut upper: Option<(BoundEstimate, Vec<usize>)> = None;
    for subset in &subsets {
        let t = synthesis_restricted(frame, subset);
        let b = ratio_bounds(&t, q, opts)?;
        let mut lo = b.lower().clone();
        let mut hi = b.upper().clone();
        lo.witness = embed_witness(frame, subset, &lo.witness);
        hi.witness = embed_witness(frame, subset, &hi.witness);
        if lower.as_ref().is_none_or(|(best, _)| lo.value < best.value) {
            lower = Some((lo, subset.clone()));
        }
        if upper.as_ref().is_none_or(|(best, _)| hi.value > best.value) {
            upper = Some((hi, subset.clone()));
        }
    }
    let (lower_sandwich, worst_lower_subset) = lower.expect("at least one subset");
    let (upper_sandwich, worst_upper_subset) = upper.expect("at least one subset");
    let is_riesz = gf_complete && upper_sandwich.value > 0.0 && lower_sandwich.value > RANK_TOL * upper_sandwich.value;
    Ok(RieszReport {
        gf_complete,
        lower_sandwich,
        upper_sandwich,
        is_riesz,
        subset_check,
        subsets_checked: subsets.len(),
        worst_lower_subset,
        worst_upper_subset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub samples: usize,
    /// `max |<U f, g> - <f, T g>| / (1 + ||U||_F ||f||_2 ||g||_2)`.
    pub max_residual: f64,
    /// Largest normalised change of `T g` under reordering of the sum.
    pub permutation_residual: f64,
    pub passed: bool,
}

/// Tolerance for the `U* = T` pairing identity.
pub const DUALITY_TOL: f64 = 1e-10;

/// Check `<U f, g> = <f, T g>` on seeded random pairs.
pub fn verify_duality(frame: &GPFusionFrame, samples: usize, seed: u64) -> Result<DualityReport> {
    let mut rng = stream_rng(seed, 0xd0a1);
    let dims = frame.block_dims();
    let scale = frame.analysis_matrix().frobenius_norm();
    let order: Vec<usize> = (0..frame.len()).collect();
    let mut max_residual: f64 = 0.0;
    let mut permutation_residual: f64 = 0.0;
    for k in 0..samples {
        let f: Vec<f64> = (0..frame.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g_blocks: Vec<Vec<f64>> = dims
            .iter()
            .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = DualMixedSeq::from_blocks_unchecked(g_blocks, frame.q());
        let lhs = dual_pairing(&frame.analysis_apply(&f)?, &g)?;
        let tg = frame.synthesis_apply(&g)?;
        let rhs: f64 = f.iter().zip(&tg).map(|(a, b)| a * b).sum();
        let nf = p_norm_raw(&f, 2.0);
        let ng = p_norm_raw(&g.flatten(), 2.0);
        max_residual = max_residual.max((lhs - rhs).abs() / (1.0 + scale * nf * ng));

        // Finite shadow of unconditional convergence: the sum is order-free.
        if k < 10 {
            let mut perm = order.clone();
            perm.shuffle(&mut rng);
            let permuted = frame.synthesis_in_order(&g, &perm)?;
            let diff = tg.iter().zip(&permuted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            permutation_residual = permutation_residual.max(diff / (1.0 + scale * ng));
        }
    }
    Ok(DualityReport {
        samples,
        max_residual,
        permutation_residual,
        passed: max_residual <= DUALITY_TOL && permutation_residual <= DUALITY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurjectivityReport {
    pub class: FrameClass,
    pub is_frame: bool,
    pub synthesis_rank: usize,
    /// `rank T = n`.
    pub synthesis_surjective: bool,
    /// `is_frame ⇔ synthesis_surjective`.
    pub equivalence_holds: bool,
    /// `rank T = Σ d_i`.
    pub synthesis_injective: bool,
    /// `R(U)` is the whole block space.
    pub analysis_surjective: bool,
    /// gf-complete and `T` injective.
    pub riesz_by_rank: bool,
    /// For frames: Riesz ⇔ T injective ⇔ R(U) full. `None` when not a frame.
    pub riesz_equivalence_holds: Option<bool>,
}

/// Rank-based check that a family is a frame iff `T` is onto, and that for
/// frames the Riesz property coincides with `T` injective and `U` onto.
pub fn verify_surjectivity_characterization(frame: &GPFusionFrame, opts: &FrameOptions) -> Result<SurjectivityReport> {
    let class = classify(frame, opts)?.class;
    let t = frame.synthesis_matrix();
    let u = frame.analysis_matrix();
    let total = frame.total_block_dim();
    let synthesis_rank = t.rank();
    let synthesis_surjective = synthesis_rank == frame.dim();
    let synthesis_injective = synthesis_rank == total;
    let analysis_surjective = u.rank() == total;
    let is_frame = class.is_frame();
    let riesz_by_rank = is_gf_complete(frame) && synthesis_injective;
    let riesz_equivalence_holds =
        is_frame.then_some(riesz_by_rank == synthesis_injective && riesz_by_rank == analysis_surjective);
    Ok(SurjectivityReport {
        class,
        is_frame,
        synthesis_rank,
        synthesis_surjective,
        equivalence_holds: is_frame == synthesis_surjective,
        synthesis_injective,
        analysis_surjective,
        riesz_by_rank,
        riesz_equivalence_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesselSynthesisReport {
    pub bessel_bound: f64,
    /// `||T||` as an operator from the dual block space to `X*`.
    pub synthesis_norm: f64,
    /// `||T|| <= B` up to tolerance.
    pub synthesis_bounded_by_bessel: bool,
    /// `max (||U f|| - ||T|| ||f||)` over seeded samples; non-positive when the
    /// converse direction holds.
    pub converse_max_excess: f64,
}

/// Bessel bound versus synthesis norm, in both directions.
pub fn verify_bessel_synthesis(
    frame: &GPFusionFrame,
    opts: &FrameOptions,
    samples: usize,
) -> Result<BesselSynthesisReport> {
    let b = estimate_bounds(frame, opts)?.upper().value;
    let t_norm = ratio_bounds(&frame.synthesis_matrix(), frame.q(), opts)?.upper().value;
    let mut rng = stream_rng(opts.estimator.seed, 0xbe55);
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let f = norm_est::random_unit_vector(&mut rng, frame.dim(), frame.p());
        let uf = frame.analysis_apply(&f)?.mixed_norm();
        excess = excess.max(uf - t_norm);
    }
    Ok(BesselSynthesisReport {
        bessel_bound: b,
        synthesis_norm: t_norm,
        synthesis_bounded_by_bessel: t_norm <= b + 1e-6 * (1.0 + b),
        converse_max_excess: excess,
    })
}
