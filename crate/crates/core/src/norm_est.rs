//! Estimation of the extremes of `||Φ(f)|| / ||f||_p` over `f != 0`.
//!
//! Every frame bound, operator norm and Riesz constant in this crate is the
//! supremum or infimum of such a ratio for some linear `Φ`. Three estimators
//! are provided:
//!
//! * [`p2_exact_bounds`]: singular values of the materialised matrix (exact, p = 2).
//! * [`sup_ratio`] / [`inf_ratio`]: projected gradient ascent/descent on the
//!   unit p-sphere with Armijo backtracking and seeded restarts.
//! * [`grid_oracle`]: exhaustive angular sweep for `dim <= 3`.
//!
//! A gradient estimate is always attained at its witness, so a `Sup` value is a
//! lower bound of the true supremum and an `Inf` value an upper bound of the
//! true infimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FrameError, Result};
use crate::linop::{LinOp, RANK_TOL};
use crate::pnorm::{duality_direction, p_norm_raw, MixedSeq};

/// Identifier of the random stream used for restarts and sampling.
pub const RNG_ALGORITHM: &str = "chacha8(seed_from_u64, stream=index)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimatorMethod {
    /// Singular values of the stacked matrix.
    ExactP2,
    /// Multi-restart projected gradient on the unit p-sphere.
    GradientRestarts,
    /// Exhaustive angular sweep.
    GridOracle,
    /// Rank test found a kernel; the infimum is zero.
    KernelRank,
}

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMeta {
    pub restarts: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Restarts that hit the iteration cap before the stall criterion.
    pub unconverged_restarts: usize,
    /// Certified distance to the true extremum (grid oracle only).
    pub slack: Option<f64>,
}

impl EstimateMeta {
    fn exact() -> Self {
        Self {
            restarts: 0,
            seed: 0,
            iterations: 0,
            unconverged_restarts: 0,
            slack: Some(0.0),
        }
    }
}

/// An estimated extremum of a norm ratio together with the vector attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub value: f64,
    /// Unit vector (in the domain norm) attaining `value`.
    pub witness: Vec<f64>,
    pub kind: BoundKind,
    pub method: EstimatorMethod,
    pub certified: bool,
    pub meta: EstimateMeta,
}

impl BoundEstimate {
    pub fn converged(&self) -> bool {
        self.meta.unconverged_restarts == 0
    }

    /// Multiply the value by `c > 0`; the witness is unchanged.
    pub fn scaled(mut self, c: f64) -> Self {
        self.value *= c;
        self
    }
}

/// Gradient estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    /// Stop once the objective improves by less than `stall_tol` (relative)
    /// over `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            restarts: 24,
            seed: 0,
            max_iter: 10_000,
            armijo: 1e-4,
            stall_window: 5,
            stall_tol: 1e-12,
        }
    }
}

impl EstimatorConfig {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(FrameError::Contract("at least one restart is required".into()));
        }
        Ok(())
    }
}

/// Per-restart random stream.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw from the cone measure of the unit p-sphere: coordinates with density
/// proportional to `exp(-|x|^p)`, then p-normalised.
pub(crate) fn random_unit_vector(rng: &mut impl Rng, dim: usize, p: f64) -> Vec<f64> {
    let gamma = Gamma::new(1.0 / p, 1.0).expect("valid gamma parameters");
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let magnitude = gamma.sample(rng).powf(1.0 / p);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let n = p_norm_raw(&v, p);
        if n > 0.0 && n.is_finite() {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalize(v: &[f64], p: f64) -> Option<Vec<f64>> {
    let n = p_norm_raw(v, p);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// `N(f) = sum_k c_k ||M_k f||_p`, optimised as the degree-0 homogeneous
/// function `N(f) / ||f||_p + offset`.
#[derive(Debug, Clone)]
pub struct NormCombination {
    terms: Vec<(f64, LinOp)>,
    offset: f64,
    p: f64,
    dim: usize,
}

impl NormCombination {
    pub fn new(terms: Vec<(f64, LinOp)>, offset: f64, p: f64) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, m)| m.cols())
            .ok_or_else(|| FrameError::Domain("objective needs at least one term".into()))?;
        for (i, (_, m)) in terms.iter().enumerate() {
            if m.cols() != dim {
                return Err(FrameError::dim(format!("objective term {i} columns"), dim, m.cols()));
            }
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(FrameError::Domain(format!("estimator requires 1 < p < inf, got {p}")));
        }
        Ok(Self { terms, offset, p, dim })
    }

    pub fn ratio(m: &LinOp, p: f64) -> Result<Self> {
        Self::new(vec![(1.0, m.clone())], 0.0, p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, f: &[f64]) -> f64 {
        let nf = p_norm_raw(f, self.p);
        let n: f64 = self
            .terms
            .iter()
            .map(|(c, m)| c * p_norm_raw(&m.apply_unchecked(f), self.p))
            .sum();
        n / nf + self.offset
    }

    fn value_and_gradient(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let nf = p_norm_raw(f, p);
        let mut total = 0.0;
        let mut grad = vec![0.0; self.dim];
        for (c, m) in &self.terms {
            let y = m.apply_unchecked(f);
            let ny = p_norm_raw(&y, p);
            total += c * ny;
            if ny > 0.0 {
                let unit: Vec<f64> = y.iter().map(|v| v / ny).collect();
                let dual = duality_direction(&unit, p);
                // grad ||M f|| = M^T J(Mf / ||Mf||)
                let back = m.adjoint_apply(&dual);
                for (g, b) in grad.iter_mut().zip(&back) {
                    *g += c * b;
                }
            }
        }
        let phi = total / nf;
        let unit_f: Vec<f64> = f.iter().map(|v| v / nf).collect();
        let jf = duality_direction(&unit_f, p);
        for (g, j) in grad.iter_mut().zip(&jf) {
            *g = (*g - phi * j) / nf;
        }
        (phi + self.offset, grad)
    }
}

impl LinOp {
    pub(crate) fn adjoint_apply(&self, g: &[f64]) -> Vec<f64> {
        let m = self.matrix();
        (0..m.ncols())
            .map(|j| m.column(j).iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }
}

struct RestartResult {
    value: f64,
    witness: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn ascend(obj: &NormCombination, sign: f64, start: Vec<f64>, cfg: &EstimatorConfig) -> RestartResult {
    let p = obj.p;
    let eval = |f: &[f64]| {
        let (v, g) = obj.value_and_gradient(f);
        (sign * v, g.into_iter().map(|x| sign * x).collect::<Vec<f64>>())
    };
    let mut f = start;
    let (mut h, mut g) = eval(&f);
    let mut history = vec![h];
    let mut step = 0.5_f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            converged = true;
            break;
        }
        let dir: Vec<f64> = g.iter().map(|x| x / gnorm).collect();
        let mut accepted = None;
        while step > 1e-18 {
            let trial: Vec<f64> = f.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if let Some(trial) = normalize(&trial, p) {
                let (ht, gt) = eval(&trial);
                if ht >= h + cfg.armijo * step * gnorm {
                    accepted = Some((trial, ht, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((nf, nh, ng)) = accepted else {
            // No ascent step of any size: stationary to working precision.
            converged = true;
            break;
        };
        f = nf;
        h = nh;
        g = ng;
        step = (step * 2.0).min(2.0);
        history.push(h);
        let w = cfg.stall_window;
        if history.len() > w {
            let before = history[history.len() - 1 - w];
            if h - before <= cfg.stall_tol * h.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    RestartResult {
        value: sign * h,
        witness: f,
        iterations,
        converged,
    }
}

fn optimize(obj: &NormCombination, kind: BoundKind, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    cfg.validate()?;
    let sign = match kind {
        BoundKind::Sup => 1.0,
        BoundKind::Inf => -1.0,
    };
    let results: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, k as u64);
            let start = random_unit_vector(&mut rng, obj.dim, obj.p);
            ascend(obj, sign, start, cfg)
        })
        .collect();

    // Merge in restart order; the first restart wins ties.
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if sign * r.value > sign * results[best].value {
            best = k;
        }
    }
    let iterations = results.iter().map(|r| r.iterations).sum();
    let unconverged = results.iter().filter(|r| !r.converged).count();
    let winner = &results[best];
    Ok(BoundEstimate {
        value: obj.value(&winner.witness),
        witness: winner.witness.clone(),
        kind,
        method: EstimatorMethod::GradientRestarts,
        certified: false,
        meta: EstimateMeta {
            restarts: cfg.restarts,
            seed: cfg.seed,
            iterations,
            unconverged_restarts: unconverged,
            slack: None,
        },
    })
}

/// Maximise (or minimise) an arbitrary norm combination over the unit sphere.
pub fn optimize_combination(obj: &NormCombination, kind: BoundKind, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    optimize(obj, kind, cfg)
}

/// `||Mf||_p / ||f||_p`.
pub fn ratio_at(m: &LinOp, f: &[f64], p: f64) -> f64 {
    p_norm_raw(&m.apply_unchecked(f), p) / p_norm_raw(f, p)
}

/// Gradient estimate of `sup ||Mf||_p / ||f||_p`.
pub fn sup_ratio_matrix(m: &LinOp, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    optimize(&NormCombination::ratio(m, p)?, BoundKind::Sup, cfg)
}

/// Gradient estimate of `inf ||Mf||_p / ||f||_p`, short-circuited by a rank
/// test when `M` has a kernel.
pub fn inf_ratio_matrix(m: &LinOp, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate> {
    cfg.validate()?;
    let objective = NormCombination::ratio(m, p)?;
    if let Some(kernel) = kernel_estimate(m, p) {
        return Ok(kernel);
    }
    optimize(&objective, BoundKind::Inf, cfg)
}

fn kernel_estimate(m: &LinOp, p: f64) -> Option<BoundEstimate> {
    let sv = m.singular_system();
    if sv.rank(RANK_TOL) == m.cols() {
        return None;
    }
    let witness = normalize(sv.right_vectors.last()?, p)?;
    Some(BoundEstimate {
        value: ratio_at(m, &witness, p),
        witness,
        kind: BoundKind::Inf,
        method: EstimatorMethod::KernelRank,
        certified: true,
        meta: EstimateMeta::exact(),
    })
}

/// Evaluate a callback on the standard basis, after spot-checking linearity,
/// and return the stacked matrix and block dimensions.
pub fn materialize<F>(map: F, dim: usize, seed: u64) -> Result<(LinOp, Vec<usize>)>
where
    F: Fn(&[f64]) -> MixedSeq,
{
    if dim == 0 {
        return Err(FrameError::Domain("domain dimension must be >= 1".into()));
    }
    let columns: Vec<MixedSeq> = (0..dim)
        .map(|k| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            map(&e)
        })
        .collect();
    let block_dims = columns[0].block_dims();
    for c in &columns {
        if c.block_dims() != block_dims {
            return Err(FrameError::Contract("map changes its block shape with input".into()));
        }
    }
    let flat: Vec<Vec<f64>> = columns.iter().map(MixedSeq::flatten).collect();
    let rows: usize = block_dims.iter().sum();
    if rows == 0 {
        return Err(FrameError::Domain("map has an empty codomain".into()));
    }
    let data: Vec<f64> = (0..rows).flat_map(|i| flat.iter().map(move |col| col[i])).collect();
    let m = LinOp::from_row_major(rows, dim, &data)?;

    let mut rng = stream_rng(seed ^ 0x6c69_6e65_6172, 0);
    for _ in 0..3 {
        let f: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: f64 = rng.random_range(-2.0..2.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let mf = map(&f).flatten();
        let mg = map(&g).flatten();
        let mc = map(&combo).flatten();
        if mf.len() != rows || mg.len() != rows || mc.len() != rows {
            return Err(FrameError::Contract("map changes its block shape with input".into()));
        }
        let expected: Vec<f64> = mf.iter().zip(&mg).map(|(x, y)| a * x + b * y).collect();
        let residual = mc.iter().zip(&expected).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let via_matrix = m.apply_unchecked(&combo);
        let residual2 = mc
            .iter()
            .zip(&via_matrix)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = 1.0
            + a.abs() * mf.iter().fold(0.0_f64, |s, x| s.max(x.abs()))
            + b.abs() * mg.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
        if residual.max(residual2) > 1e-9 * scale {
            return Err(FrameError::Contract(format!(
                "map is not linear (residual {:.3e})",
                residual.max(residual2)
            )));
        }
    }
    Ok((m, block_dims))
}

/// Estimate `sup ||map(f)|| / ||f||_p` for a linear callback.
pub fn sup_ratio<F>(map: F, dim: usize, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate>
where
    F: Fn(&[f64]) -> MixedSeq,
{
    let (m, _) = materialize(map, dim, cfg.seed)?;
    sup_ratio_matrix(&m, p, cfg)
}

/// Estimate `inf ||map(f)|| / ||f||_p` for a linear callback.
pub fn inf_ratio<F>(map: F, dim: usize, p: f64, cfg: &EstimatorConfig) -> Result<BoundEstimate>
where
    F: Fn(&[f64]) -> MixedSeq,
{
    let (m, _) = materialize(map, dim, cfg.seed)?;
    inf_ratio_matrix(&m, p, cfg)
}

/// `(sigma_min, sigma_max)` of the stacked matrix with right singular vectors
/// as witnesses.
pub fn p2_exact_bounds(stacked: &LinOp) -> (BoundEstimate, BoundEstimate) {
    let sv = stacked.singular_system();
    let make = |value: f64, witness: &Vec<f64>, kind| BoundEstimate {
        value,
        witness: witness.clone(),
        kind,
        method: EstimatorMethod::ExactP2,
        certified: true,
        meta: EstimateMeta::exact(),
    };
    let lower = make(sv.min(), sv.right_vectors.last().expect("non-empty"), BoundKind::Inf);
    let upper = make(sv.max(), &sv.right_vectors[0], BoundKind::Sup);
    (lower, upper)
}

/// Result of the exhaustive angular sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridBounds {
    pub lower: BoundEstimate,
    pub upper: BoundEstimate,
    /// The true infimum lies in `[lower - slack, lower]`, the supremum in
    /// `[upper, upper + slack]`.
    pub slack: f64,
    pub resolution: f64,
    pub certified: bool,
}

/// Maximum angular step for which grid results are marked certified.
pub const GRID_CERTIFY_RESOLUTION: f64 = 0.01;

/// Brute-force sweep of the unit p-sphere in dimension 1, 2 or 3.
pub fn grid_oracle<F>(map: F, dim: usize, p: f64, resolution: f64) -> Result<GridBounds>
where
    F: Fn(&[f64]) -> MixedSeq,
{
    if !(1..=3).contains(&dim) {
        return Err(FrameError::Unsupported(format!(
            "grid oracle supports dimensions 1..=3, got {dim}"
        )));
    }
    let (m, _) = materialize(map, dim, 0)?;
    grid_oracle_matrix(&m, p, resolution)
}

pub fn grid_oracle_matrix(m: &LinOp, p: f64, resolution: f64) -> Result<GridBounds> {
    let dim = m.cols();
    if !(1..=3).contains(&dim) {
        return Err(FrameError::Unsupported(format!(
            "grid oracle supports dimensions 1..=3, got {dim}"
        )));
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(FrameError::Domain(format!(
            "resolution must lie in (0, 1), got {resolution}"
        )));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(FrameError::Domain(format!("grid oracle requires 1 < p < inf, got {p}")));
    }

    // Antipodal symmetry: half of the sphere suffices.
    let steps = (std::f64::consts::PI / resolution).ceil() as usize;
    let h = std::f64::consts::PI / steps as f64;
    let directions: Box<dyn Iterator<Item = Vec<f64>> + Send> = match dim {
        1 => Box::new(std::iter::once(vec![1.0])),
        2 => Box::new((0..steps).map(move |k| {
            let t = k as f64 * h;
            vec![t.cos(), t.sin()]
        })),
        _ => Box::new((0..=steps).flat_map(move |a| {
            let theta = a as f64 * h;
            let count = if a == 0 || a == steps { 1 } else { steps };
            (0..count).map(move |b| {
                let phi = b as f64 * h;
                vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
            })
        })),
    };

    let mut lo = (f64::INFINITY, vec![]);
    let mut hi = (f64::NEG_INFINITY, vec![]);
    for d in directions {
        let r = ratio_at(m, &d, p);
        if r < lo.0 {
            lo = (r, d.clone());
        }
        if r > hi.0 {
            hi = (r, d);
        }
    }

    let slack = grid_slack(m, p, h);
    let certified = resolution <= GRID_CERTIFY_RESOLUTION;
    let make = |(value, dir): (f64, Vec<f64>), kind| BoundEstimate {
        value,
        witness: normalize(&dir, p).expect("unit direction"),
        kind,
        method: EstimatorMethod::GridOracle,
        certified,
        meta: EstimateMeta {
            restarts: 0,
            seed: 0,
            iterations: 0,
            unconverged_restarts: 0,
            slack: Some(slack),
        },
    };
    Ok(GridBounds {
        lower: make(lo, BoundKind::Inf),
        upper: make(hi, BoundKind::Sup),
        slack,
        resolution: h,
        certified,
    })
}

/// Lipschitz bound for `u -> ||Mu||_p / ||u||_p` on the Euclidean sphere,
/// times the worst distance to the nearest grid direction.
fn grid_slack(m: &LinOp, p: f64, h: f64) -> f64 {
    let n = m.cols() as f64;
    // ||Mx||_p <= ||Mx||_1 <= (sum |m_ij|) ||x||_2
    let s: f64 = m.matrix().iter().map(|x| x.abs()).sum();
    let e = 1.0 / p - 0.5;
    // min of ||u||_p and max of ||u - v||_p / ||u - v||_2 on the Euclidean sphere.
    let min_unit = n.powf(e.min(0.0));
    let stretch = n.powf(e.max(0.0));
    let lipschitz = s * (1.0 / min_unit + stretch / (min_unit * min_unit));
    let reach = h * (n - 1.0).max(0.0).sqrt() / 2.0;
    lipschitz * reach
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_block(m: LinOp, p: f64) -> impl Fn(&[f64]) -> MixedSeq {
        move |f: &[f64]| MixedSeq::from_blocks_unchecked(vec![m.apply_unchecked(f)], p)
    }

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::new(12, 7)
    }

    #[test]
    fn sup_examples() {
        let id = single_block(LinOp::identity(2), 2.0);
        assert_relative_eq!(sup_ratio(id, 2, 2.0, &cfg()).unwrap().value, 1.0, epsilon = 1e-9);

        let d = single_block(LinOp::diagonal(&[3.0, 1.0]), 2.0);
        assert_relative_eq!(sup_ratio(d, 2, 2.0, &cfg()).unwrap().value, 3.0, epsilon = 1e-8);

        let twice = |f: &[f64]| MixedSeq::from_blocks_unchecked(vec![f.to_vec(), f.to_vec()], 2.0);
        assert_relative_eq!(
            sup_ratio(twice, 2, 2.0, &cfg()).unwrap().value,
            2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn inf_examples() {
        let id = single_block(LinOp::identity(3), 2.0);
        assert_relative_eq!(inf_ratio(id, 3, 2.0, &cfg()).unwrap().value, 1.0, epsilon = 1e-9);

        let d = single_block(LinOp::diagonal(&[3.0, 1.0]), 2.0);
        assert_relative_eq!(inf_ratio(d, 2, 2.0, &cfg()).unwrap().value, 1.0, epsilon = 1e-8);

        let rank_deficient = single_block(LinOp::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(), 2.0);
        let est = inf_ratio(rank_deficient, 2, 2.0, &cfg()).unwrap();
        assert!(est.value < 1e-15);
        assert_eq!(est.method, EstimatorMethod::KernelRank);
        assert!(est.witness[0].abs() < 1e-15);
    }

    #[test]
    fn nonlinear_map_is_rejected() {
        let squares = |f: &[f64]| MixedSeq::from_blocks_unchecked(vec![f.iter().map(|x| x * x).collect()], 2.0);
        assert!(matches!(
            sup_ratio(squares, 2, 2.0, &cfg()),
            Err(FrameError::Contract(_))
        ));
        let affine = |f: &[f64]| MixedSeq::from_blocks_unchecked(vec![vec![f[0] + 1.0]], 2.0);
        assert!(matches!(
            inf_ratio(affine, 1, 2.0, &cfg()),
            Err(FrameError::Contract(_))
        ));
    }

    #[test]
    fn zero_restarts_rejected() {
        let id = single_block(LinOp::identity(2), 2.0);
        assert!(sup_ratio(id, 2, 2.0, &EstimatorConfig::new(0, 1)).is_err());
    }

    #[test]
    fn p2_exact_examples() {
        let (a, b) = p2_exact_bounds(&LinOp::identity(3));
        assert_relative_eq!(a.value, 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.value, 1.0, epsilon = 1e-15);

        let stacked = LinOp::vstack(&[LinOp::diagonal(&[1.0, 0.0]), LinOp::diagonal(&[0.0, 1.0])]).unwrap();
        let (a, b) = p2_exact_bounds(&stacked);
        assert_relative_eq!(a.value, 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.value, 1.0, epsilon = 1e-15);

        let (a, b) = p2_exact_bounds(&LinOp::identity(2).scale(2.0));
        assert_relative_eq!(a.value, 2.0, epsilon = 1e-15);
        assert_relative_eq!(b.value, 2.0, epsilon = 1e-15);
        assert!(a.certified && b.certified);
    }

    #[test]
    fn grid_examples() {
        let id = single_block(LinOp::identity(2), 3.0);
        let g = grid_oracle(id, 2, 3.0, 1e-3).unwrap();
        assert_relative_eq!(g.lower.value, 1.0, epsilon = 1e-6);
        assert_relative_eq!(g.upper.value, 1.0, epsilon = 1e-6);
        assert!(g.certified);

        let d = single_block(LinOp::diagonal(&[2.0, 1.0]), 2.0);
        let g = grid_oracle(d, 2, 2.0, 1e-3).unwrap();
        assert!((g.lower.value - 1.0).abs() <= 1e-3);
        assert!((g.upper.value - 2.0).abs() <= 1e-3);
    }

    #[test]
    fn grid_finds_symmetric_maximiser_for_sum_functional() {
        // f -> f1 + f2 at p = 1.5: Hölder equality at f1 = f2, value 2^(1/q).
        let sum = single_block(LinOp::from_rows(&[vec![1.0, 1.0]]).unwrap(), 1.5);
        let g = grid_oracle(sum, 2, 1.5, 1e-3).unwrap();
        let w = &g.upper.witness;
        assert!((w[0].abs() - w[1].abs()).abs() < 5e-3);
        assert!(w[0] * w[1] > 0.0);
        let q = 3.0;
        assert!((g.upper.value - 2f64.powf(1.0 / q)).abs() < 1e-5);
    }

    #[test]
    fn grid_slack_brackets_truth() {
        let m = LinOp::diagonal(&[2.0, 1.0]);
        let g = grid_oracle_matrix(&m, 2.0, 0.005).unwrap();
        assert!(g.upper.value <= 2.0 + 1e-15 && 2.0 <= g.upper.value + g.slack);
        assert!(g.lower.value >= 1.0 - 1e-15 && g.lower.value - g.slack <= 1.0);
    }

    #[test]
    fn grid_dimension_limits() {
        assert!(matches!(
            grid_oracle_matrix(&LinOp::identity(4), 2.0, 0.01),
            Err(FrameError::Unsupported(_))
        ));
        let g = grid_oracle_matrix(&LinOp::diagonal(&[1.0, 2.0, 3.0]), 2.0, 0.01).unwrap();
        assert!((g.upper.value - 3.0).abs() < 1e-3);
        assert!((g.lower.value - 1.0).abs() < 1e-3);
        let g = grid_oracle_matrix(&LinOp::diagonal(&[4.0]), 3.0, 0.01).unwrap();
        assert_relative_eq!(g.upper.value, 4.0);
    }

    #[test]
    fn witness_reproduces_value() {
        let m = LinOp::from_rows(&[vec![1.0, 2.0, 0.5], vec![-1.0, 0.3, 2.0]]).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let est = sup_ratio_matrix(&m, p, &cfg()).unwrap();
            assert!((p_norm_raw(&est.witness, p) - 1.0).abs() < 1e-9);
            assert_relative_eq!(ratio_at(&m, &est.witness, p), est.value, max_relative = 1e-9);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = LinOp::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.3], vec![0.2, 0.2]]).unwrap();
        let a = sup_ratio_matrix(&m, 3.0, &cfg()).unwrap();
        let b = sup_ratio_matrix(&m, 3.0, &cfg()).unwrap();
        assert_eq!(a, b);
        let a = inf_ratio_matrix(&m, 1.5, &cfg()).unwrap();
        let b = inf_ratio_matrix(&m, 1.5, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_unit_vectors_are_normalised() {
        let mut rng = stream_rng(1, 2);
        for p in [1.2, 2.0, 5.0] {
            for _ in 0..100 {
                let v = random_unit_vector(&mut rng, 4, p);
                assert!((p_norm_raw(&v, p) - 1.0).abs() < 1e-12);
            }
        }
    }
}
