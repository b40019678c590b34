//! Finite-dimensional p-normed coordinate spaces, mixed block sequences and
//! their dual pairing.
//!
//! A space `X = (R^n, ||.||_p)` has dual `(R^n, ||.||_q)` under the ordinary
//! dot product, with `1/p + 1/q = 1`. Block sequences `{f_i}` with `f_i` in
//! `R^{d_i}` carry the mixed norm `(sum_i ||f_i||_p^p)^(1/p)`; their duals carry
//! the same construction with exponent `q`.

use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};

/// `(sum |v_k|^p)^(1/p)` for `p >= 1`.
///
/// Entries are rescaled by `max |v_k|` before powering so that large or tiny
/// vectors neither overflow nor underflow.
pub fn p_norm(v: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(FrameError::Domain(format!(
            "p-norm exponent must lie in [1, inf), got {p}"
        )));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(FrameError::Domain(format!("non-finite entry {bad}")));
    }
    Ok(p_norm_raw(v, p))
}

/// Unchecked variant used on hot paths where inputs are already validated.
pub(crate) fn p_norm_raw(v: &[f64], p: f64) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
        return scale * s.sqrt();
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// The conjugate exponent `q = p / (p - 1)`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(FrameError::Domain(format!(
            "dual exponent requires 1 < p < inf, got {p}"
        )));
    }
    Ok(p / (p - 1.0))
}

/// Coordinatewise `sign(v_k) |v_k|^(p-1)`, the unnormalised duality map.
pub(crate) fn duality_direction(v: &[f64], p: f64) -> Vec<f64> {
    if p == 2.0 {
        return v.to_vec();
    }
    v.iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else {
                x.signum() * x.abs().powf(p - 1.0)
            }
        })
        .collect()
}

/// `(R^dim, ||.||_p)` with `1 < p < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PNormSpace {
    dim: usize,
    p: f64,
}

impl PNormSpace {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(FrameError::Domain("space dimension must be >= 1".into()));
        }
        dual_exponent(p)?;
        Ok(Self { dim, p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Norm of a vector of this space.
    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.dim {
            return Err(FrameError::dim("vector length", self.dim, f.len()));
        }
        p_norm(f, self.p)
    }

    /// Norm of a functional given by its coefficient vector (the q-norm).
    pub fn dual_norm(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.dim {
            return Err(FrameError::dim("functional length", self.dim, g.len()));
        }
        p_norm(g, self.q())
    }
}

/// An element `{f_i}` of the mixed sequence space over blocks `R^{d_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSeq {
    blocks: Vec<Vec<f64>>,
    p: f64,
}

impl MixedSeq {
    pub fn new(blocks: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(FrameError::Domain(format!("invalid exponent {p}")));
        }
        if blocks.iter().flatten().any(|x| !x.is_finite()) {
            return Err(FrameError::Domain("non-finite block entry".into()));
        }
        Ok(Self { blocks, p })
    }

    /// All-zero sequence with the given block lengths.
    pub fn zeros(block_dims: &[usize], p: f64) -> Self {
        Self {
            blocks: block_dims.iter().map(|&d| vec![0.0; d]).collect(),
            p,
        }
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<Vec<f64>>, p: f64) -> Self {
        Self { blocks, p }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        self.blocks
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Concatenation of all blocks.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// `(sum_i ||f_i||_p^p)^(1/p)`; zero for the empty family.
    pub fn mixed_norm(&self) -> f64 {
        let block_norms: Vec<f64> = self.blocks.iter().map(|b| p_norm_raw(b, self.p)).collect();
        p_norm_raw(&block_norms, self.p)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().flatten().all(|&x| x == 0.0)
    }

    /// The norming functional: a dual sequence `g` with dual norm 1 and
    /// `<self, g> = ||self||`. Returns `None` for the zero sequence.
    pub fn norming_functional(&self) -> Option<DualMixedSeq> {
        let norm = self.mixed_norm();
        if norm == 0.0 {
            return None;
        }
        let q = self.p / (self.p - 1.0);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                // Normalise before powering to avoid overflow.
                let scaled: Vec<f64> = b.iter().map(|x| x / norm).collect();
                duality_direction(&scaled, self.p)
            })
            .collect();
        Some(DualMixedSeq { blocks, q })
    }
}

/// An element `{g_i}` of the dual mixed space, measured with exponent `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMixedSeq {
    blocks: Vec<Vec<f64>>,
    q: f64,
}

impl DualMixedSeq {
    pub fn new(blocks: Vec<Vec<f64>>, q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(FrameError::Domain(format!("invalid dual exponent {q}")));
        }
        if blocks.iter().flatten().any(|x| !x.is_finite()) {
            return Err(FrameError::Domain("non-finite block entry".into()));
        }
        Ok(Self { blocks, q })
    }

    pub fn zeros(block_dims: &[usize], q: f64) -> Self {
        Self {
            blocks: block_dims.iter().map(|&d| vec![0.0; d]).collect(),
            q,
        }
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<Vec<f64>>, q: f64) -> Self {
        Self { blocks, q }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// `(sum_i ||g_i||_q^q)^(1/q)`.
    pub fn dual_norm(&self) -> f64 {
        let block_norms: Vec<f64> = self.blocks.iter().map(|b| p_norm_raw(b, self.q)).collect();
        p_norm_raw(&block_norms, self.q)
    }
}

/// `sum_i <f_i, g_i>` with blockwise dot products.
pub fn dual_pairing(s: &MixedSeq, g: &DualMixedSeq) -> Result<f64> {
    if s.blocks.len() != g.blocks.len() {
        return Err(FrameError::dim("number of blocks", s.blocks.len(), g.blocks.len()));
    }
    let exponent_gap = (1.0 / s.p + 1.0 / g.q - 1.0).abs();
    if exponent_gap > 1e-12 {
        return Err(FrameError::Domain(format!(
            "exponents {} and {} are not conjugate",
            s.p, g.q
        )));
    }
    let mut total = 0.0;
    for (i, (a, b)) in s.blocks.iter().zip(&g.blocks).enumerate() {
        if a.len() != b.len() {
            return Err(FrameError::dim(format!("block {i}"), a.len(), b.len()));
        }
        total += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn p_norm_examples() {
        assert_relative_eq!(p_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0, epsilon = 1e-15);
        assert_eq!(p_norm(&[0.0, 0.0, 0.0], 3.0).unwrap(), 0.0);
        // (1 + 1)^(1/1.5)
        assert_relative_eq!(p_norm(&[1.0, 1.0], 1.5).unwrap(), 1.5874010519681994, epsilon = 1e-14);
        assert_relative_eq!(p_norm(&[-1.0, 2.0], 1.0).unwrap(), 3.0);
    }

    #[test]
    fn p_norm_rejects_bad_input() {
        assert!(matches!(p_norm(&[f64::NAN], 2.0), Err(FrameError::Domain(_))));
        assert!(matches!(p_norm(&[f64::INFINITY], 2.0), Err(FrameError::Domain(_))));
        assert!(p_norm(&[1.0], 0.5).is_err());
        assert!(p_norm(&[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn p_norm_survives_extreme_magnitudes() {
        let big = p_norm(&[1e300, 1e300], 3.0).unwrap();
        assert_relative_eq!(big, 1e300 * 2f64.powf(1.0 / 3.0), max_relative = 1e-14);
        let tiny = p_norm(&[1e-300, 1e-300], 3.0).unwrap();
        assert_relative_eq!(tiny, 1e-300 * 2f64.powf(1.0 / 3.0), max_relative = 1e-14);
    }

    #[test]
    fn dual_exponent_examples() {
        assert_eq!(dual_exponent(2.0).unwrap(), 2.0);
        assert_relative_eq!(dual_exponent(3.0).unwrap(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(dual_exponent(1.25).unwrap(), 5.0, epsilon = 1e-12);
        assert!(dual_exponent(1.0).is_err());
        assert!(dual_exponent(0.5).is_err());
        assert!(dual_exponent(f64::INFINITY).is_err());
    }

    #[test]
    fn space_validation() {
        assert!(PNormSpace::new(0, 2.0).is_err());
        assert!(PNormSpace::new(2, 1.0).is_err());
        let s = PNormSpace::new(3, 4.0).unwrap();
        assert!((1.0 / s.p() + 1.0 / s.q() - 1.0).abs() < 1e-12);
        assert!(s.norm(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn mixed_norm_examples() {
        let s = MixedSeq::new(vec![vec![3.0, 4.0], vec![0.0]], 2.0).unwrap();
        assert_relative_eq!(s.mixed_norm(), 5.0, epsilon = 1e-15);
        let s = MixedSeq::new(vec![vec![1.0], vec![1.0]], 2.0).unwrap();
        assert_relative_eq!(s.mixed_norm(), 2f64.sqrt(), epsilon = 1e-15);
        let empty = MixedSeq::new(vec![], 3.0).unwrap();
        assert_eq!(empty.mixed_norm(), 0.0);
        assert!(empty.is_zero());
        assert!(MixedSeq::new(vec![vec![f64::NAN]], 2.0).is_err());
    }

    #[test]
    fn pairing_examples() {
        let s = MixedSeq::new(vec![vec![1.0, 0.0]], 2.0).unwrap();
        let g = DualMixedSeq::new(vec![vec![0.0, 1.0]], 2.0).unwrap();
        assert_eq!(dual_pairing(&s, &g).unwrap(), 0.0);

        let s = MixedSeq::new(vec![vec![1.0, 2.0]], 2.0).unwrap();
        let g = DualMixedSeq::new(vec![vec![3.0, 4.0]], 2.0).unwrap();
        assert_eq!(dual_pairing(&s, &g).unwrap(), 11.0);

        let s = MixedSeq::new(vec![vec![2.0], vec![3.0]], 2.0).unwrap();
        let g = DualMixedSeq::new(vec![vec![1.0], vec![1.0]], 2.0).unwrap();
        assert_eq!(dual_pairing(&s, &g).unwrap(), 5.0);
    }

    #[test]
    fn pairing_shape_and_exponent_errors() {
        let s = MixedSeq::new(vec![vec![1.0, 2.0]], 2.0).unwrap();
        let g = DualMixedSeq::new(vec![vec![3.0]], 2.0).unwrap();
        assert!(matches!(dual_pairing(&s, &g), Err(FrameError::Dimension { .. })));
        let g = DualMixedSeq::new(vec![vec![3.0, 4.0], vec![1.0]], 2.0).unwrap();
        assert!(matches!(dual_pairing(&s, &g), Err(FrameError::Dimension { .. })));
        let g = DualMixedSeq::new(vec![vec![3.0, 4.0]], 3.0).unwrap();
        assert!(matches!(dual_pairing(&s, &g), Err(FrameError::Domain(_))));
    }

    fn seq_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
        (1usize..4, 1.1f64..6.0).prop_flat_map(|(nblocks, p)| {
            let dims = proptest::collection::vec(1usize..4, nblocks);
            (dims, Just(p)).prop_flat_map(|(dims, p)| {
                let f = dims
                    .iter()
                    .map(|&d| proptest::collection::vec(-10.0f64..10.0, d))
                    .collect::<Vec<_>>();
                let g = dims
                    .iter()
                    .map(|&d| proptest::collection::vec(-10.0f64..10.0, d))
                    .collect::<Vec<_>>();
                (f, g, Just(p))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn holder_inequality((f, g, p) in seq_strategy()) {
            let q = dual_exponent(p).unwrap();
            let s = MixedSeq::new(f, p).unwrap();
            let g = DualMixedSeq::new(g, q).unwrap();
            let pairing = dual_pairing(&s, &g).unwrap();
            prop_assert!(pairing.abs() <= s.mixed_norm() * g.dual_norm() * (1.0 + 1e-12) + 1e-300);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn norming_functional_attains_norm((f, _g, p) in seq_strategy()) {
            let s = MixedSeq::new(f, p).unwrap();
            prop_assume!(!s.is_zero());
            let g = s.norming_functional().unwrap();
            prop_assert!((g.dual_norm() - 1.0).abs() <= 1e-9);
            let pairing = dual_pairing(&s, &g).unwrap();
            prop_assert!((pairing - s.mixed_norm()).abs() <= 1e-9 * (1.0 + s.mixed_norm()));
        }

        #[test]
        fn p_norm_decreases_in_p(
            v in proptest::collection::vec(0.1f64..10.0, 2..6),
            p1 in 1.0f64..4.0,
            gap in 0.05f64..3.0,
        ) {
            let a = p_norm(&v, p1).unwrap();
            let b = p_norm(&v, p1 + gap).unwrap();
            prop_assert!(a > b);
        }

        #[test]
        fn p_norm_is_a_norm(
            v in proptest::collection::vec(-10.0f64..10.0, 1..6),
            c in -5.0f64..5.0,
            p in 1.0f64..6.0,
        ) {
            let w: Vec<f64> = v.iter().rev().copied().collect();
            let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let nv = p_norm(&v, p).unwrap();
            prop_assert!((p_norm(&scaled, p).unwrap() - c.abs() * nv).abs() <= 1e-12 * (1.0 + c.abs() * nv));
            prop_assert!(p_norm(&sum, p).unwrap() <= nv + p_norm(&w, p).unwrap() + 1e-12);
        }
    }
}
