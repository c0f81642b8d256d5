//! Diversity-aware candidate refinement via greedy MAP inference on a
//! determinantal point process kernel.
//!
//! The kernel combines per-candidate quality (exp of the fused score, so
//! ordering is preserved and values stay positive) with pairwise similarity
//! ((1 + cosine) / 2, mapped into [0, 1]). Greedy MAP adds, at each step, the
//! candidate with the largest marginal gain in log-determinant of the
//! selected principal submatrix.

use crate::embedding::{cosine, Embedding};
use crate::error::{DailError, Result};
use crate::scoring::ScoredCandidate;

/// Ridge added to the kernel diagonal: duplicate candidates make L singular.
const RIDGE: f64 = 1e-9;

/// Relative tolerance when comparing marginal gains; gains this close count
/// as tied and the smaller index wins.
const GAIN_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DppKernel {
    size: usize,
    quality: Vec<f64>,
    similarity: Vec<f64>, // row-major size x size
    l: Vec<f64>,          // row-major size x size
}

impl DppKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn quality(&self, i: usize) -> f64 {
        self.quality[i]
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.size + j]
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.size + j]
    }
}

/// Build the kernel from fused candidate scores and their embeddings.
pub fn build_kernel(candidates: &[ScoredCandidate], embeddings: &[Embedding]) -> Result<DppKernel> {
    if candidates.is_empty() {
        return Err(DailError::InvalidInput("no candidates for kernel".into()));
    }
    if candidates.len() != embeddings.len() {
        return Err(DailError::InvalidInput(format!(
            "{} candidates but {} embeddings",
            candidates.len(),
            embeddings.len()
        )));
    }
    let n = candidates.len();
    let quality: Vec<f64> = candidates.iter().map(|c| c.fused.exp()).collect();
    let mut similarity = vec![0.0; n * n];
    for i in 0..n {
        similarity[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let s = (1.0 + cosine(&embeddings[i], &embeddings[j])?) / 2.0;
            similarity[i * n + j] = s;
            similarity[j * n + i] = s;
        }
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            l[i * n + j] = quality[i] * similarity[i * n + j] * quality[j];
        }
    }
    Ok(DppKernel {
        size: n,
        quality,
        similarity,
        l,
    })
}

/// Greedy MAP selection of up to `k` indices.
///
/// Each step picks the index with the largest marginal gain in log det of
/// the selected principal submatrix of L + ridge*I; ties go to the smaller
/// index. Stops early (returning fewer than `k`) once no remaining candidate
/// has positive gain.
///
/// Uses the incremental Cholesky update: the marginal gain of item `i` given
/// the selected set is ln of its conditional variance d2[i].
pub fn greedy_map_select(kernel: &DppKernel, k: usize) -> Result<Vec<usize>> {
    let n = kernel.size;
    if k == 0 || k > n {
        return Err(DailError::InvalidInput(format!(
            "k = {k} out of range for kernel of size {n}"
        )));
    }

    let mut d2: Vec<f64> = (0..n).map(|i| kernel.l(i, i) + RIDGE).collect();
    let mut coeffs: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut available = vec![true; n];

    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if !available[i] || d2[i] <= 0.0 {
                continue;
            }
            let gain = d2[i].ln();
            match best {
                None => best = Some((i, gain)),
                Some((_, bg)) if gain > bg + GAIN_TIE_EPS * bg.abs().max(1.0) => {
                    best = Some((i, gain));
                }
                Some(_) => {}
            }
        }
        let Some((j, gain)) = best else { break };
        if gain <= 0.0 {
            break; // no candidate with positive marginal gain
        }
        selected.push(j);
        available[j] = false;
        if selected.len() == k {
            break;
        }
        let dj = d2[j].sqrt();
        let cj = coeffs[j].clone();
        for i in 0..n {
            if !available[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(coeffs[i].iter()).map(|(a, b)| a * b).sum();
            let e = (kernel.l(j, i) - dot) / dj;
            coeffs[i].push(e);
            d2[i] -= e * e;
        }
    }
    Ok(selected)
}
