//! Entropy scoring, min-max normalization, and score fusion.
//!
//! Each bank sample gets a selection score (strategy-dependent) and an
//! entropy score (confidence of its stored pseudo-label). Both are min-max
//! normalized jointly over the whole candidate list, then combined as
//! `fused = norm_selection - alpha * norm_entropy`.

use crate::error::{DailError, Result};
use crate::types::SampleId;

/// A bank sample scored against one incoming query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub sample_id: SampleId,
    pub raw_selection: f64,
    pub raw_entropy: f64,
    pub norm_selection: f64,
    pub norm_entropy: f64,
    pub fused: f64,
}

impl ScoredCandidate {
    pub fn new(sample_id: SampleId, raw_selection: f64, raw_entropy: f64) -> Self {
        ScoredCandidate {
            sample_id,
            raw_selection,
            raw_entropy,
            norm_selection: 0.0,
            norm_entropy: 0.0,
            fused: 0.0,
        }
    }
}

/// Shannon entropy (natural log) of a label distribution, with 0*ln(0) = 0.
/// The vector must be nonnegative and sum to 1 within 1e-6; it is
/// renormalized before use.
pub fn entropy_score(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(DailError::InvalidProbabilities("empty vector".into()));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(DailError::InvalidProbabilities("non-finite entry".into()));
    }
    if probs.iter().any(|&p| p < 0.0) {
        return Err(DailError::InvalidProbabilities("negative entry".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(DailError::InvalidProbabilities(format!(
            "sum {sum} not within 1e-6 of 1"
        )));
    }
    Ok(probs
        .iter()
        .map(|&p| {
            let p = p / sum;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum())
}

/// Min-max normalize into [0, 1]. A constant list maps to all zeros.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(DailError::InvalidInput("empty value list".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DailError::InvalidInput("non-finite value".into()));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Populate normalized and fused scores across the full candidate list,
/// preserving input order. Normalization is joint over the list for each of
/// the two score kinds.
pub fn fuse_scores(mut candidates: Vec<ScoredCandidate>, alpha: f64) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(DailError::InvalidInput("no candidates to fuse".into()));
    }
    let selection: Vec<f64> = candidates.iter().map(|c| c.raw_selection).collect();
    let entropy: Vec<f64> = candidates.iter().map(|c| c.raw_entropy).collect();
    let norm_selection = minmax_normalize(&selection)?;
    let norm_entropy = minmax_normalize(&entropy)?;
    for (i, c) in candidates.iter_mut().enumerate() {
        c.norm_selection = norm_selection[i];
        c.norm_entropy = norm_entropy[i];
        c.fused = c.norm_selection - alpha * c.norm_entropy;
    }
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(i: usize, sel: f64, ent: f64) -> ScoredCandidate {
        ScoredCandidate::new(SampleId::new(format!("s{i}")), sel, ent)
    }

    #[test]
    fn entropy_one_hot_is_zero() {
        assert_eq!(entropy_score(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_uniform_is_ln_n() {
        let h = entropy_score(&[0.25; 4]).unwrap();
        assert!((h - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_skewed_matches_direct_formula() {
        // -(0.7 ln 0.7 + 3 * 0.1 ln 0.1) = 0.9404479886...
        let h = entropy_score(&[0.7, 0.1, 0.1, 0.1]).unwrap();
        assert!((h - 0.9404479886).abs() < 1e-5, "{h}");
    }

    #[test]
    fn entropy_rejects_bad_vectors() {
        assert!(entropy_score(&[]).is_err());
        assert!(entropy_score(&[f64::NAN]).is_err());
        assert!(entropy_score(&[0.5, -0.5, 1.0]).is_err());
        assert!(entropy_score(&[0.5, 0.4]).is_err()); // sums to 0.9
    }

    #[test]
    fn minmax_basic() {
        assert_eq!(minmax_normalize(&[1.0, 2.0, 3.0]).unwrap(), [0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[-2.0, 0.0, 2.0]).unwrap(), [0.0, 0.5, 1.0]);
    }

    #[test]
    fn minmax_constant_maps_to_zero() {
        assert_eq!(minmax_normalize(&[5.0; 3]).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn minmax_rejects_nonfinite() {
        assert!(minmax_normalize(&[1.0, f64::INFINITY]).is_err());
        assert!(minmax_normalize(&[]).is_err());
    }

    #[test]
    fn fuse_applies_weighted_difference() {
        // Selection raws [0, 0.8, 1] normalize to themselves; entropy raws
        // [0, 0.5, 1] likewise. Middle candidate: 0.8 - 0.1*0.5 = 0.75.
        let fused = fuse_scores(
            vec![cand(0, 0.0, 0.0), cand(1, 0.8, 0.5), cand(2, 1.0, 1.0)],
            0.1,
        )
        .unwrap();
        assert!((fused[1].norm_selection - 0.8).abs() < 1e-12);
        assert!((fused[1].norm_entropy - 0.5).abs() < 1e-12);
        assert!((fused[1].fused - 0.75).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_reduces_to_selection() {
        let fused = fuse_scores(vec![cand(0, 2.0, 9.0), cand(1, 5.0, 1.0)], 0.0).unwrap();
        for c in &fused {
            assert_eq!(c.fused, c.norm_selection);
        }
    }

    #[test]
    fn zero_selection_ranks_by_ascending_entropy() {
        // The random strategy assigns selection 0 everywhere, so with
        // alpha > 0 the fused ranking is exactly ascending entropy.
        let fused = fuse_scores(
            vec![cand(0, 0.0, 1.2), cand(1, 0.0, 0.3), cand(2, 0.0, 0.9)],
            0.1,
        )
        .unwrap();
        let mut by_fused: Vec<usize> = (0..3).collect();
        by_fused.sort_by(|&a, &b| fused[b].fused.partial_cmp(&fused[a].fused).unwrap());
        assert_eq!(by_fused, [1, 2, 0]);
    }

    #[test]
    fn fuse_preserves_input_order() {
        let fused = fuse_scores(vec![cand(3, 1.0, 0.0), cand(1, 0.0, 1.0)], 0.1).unwrap();
        assert_eq!(fused[0].sample_id.as_str(), "s3");
        assert_eq!(fused[1].sample_id.as_str(), "s1");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Entropy is maximized by the uniform distribution.
            #[test]
            fn entropy_bounded_by_ln_n(raw in prop::collection::vec(0.01f64..1.0, 2..8)) {
                let sum: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                let h = entropy_score(&probs).unwrap();
                let n = probs.len() as f64;
                prop_assert!(h <= n.ln() + 1e-12);
            }

            /// Positive affine transforms of the raw selection scores leave
            /// normalized values unchanged up to rounding.
            #[test]
            fn affine_invariance(
                raws in prop::collection::vec(-50.0f64..50.0, 2..20),
                a in 0.1f64..10.0,
                b in -20.0f64..20.0,
            ) {
                let orig = minmax_normalize(&raws).unwrap();
                let mapped: Vec<f64> = raws.iter().map(|v| a * v + b).collect();
                let transformed = minmax_normalize(&mapped).unwrap();
                for (x, y) in orig.iter().zip(transformed.iter()) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
