//! Threshold-gated pairwise pseudo-ranks from teacher predictions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::VideoRecord;
use crate::error::{Error, Result};
use crate::qmodel::{Augment, AugmentationSpec, QualityModel};

/// An ordered pair of unlabelled videos with the teacher's rank verdict.
///
/// Invariants: `|teacher_gap|` exceeded the gate threshold when the pair was
/// generated, and `rank == 1` exactly when `teacher_gap >= 0` (the first
/// video scored at least as high as the second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRankPair {
    pub id1: String,
    pub id2: String,
    pub rank: u8,
    pub teacher_gap: f64,
}

impl PseudoRankPair {
    /// The same pair with the video roles swapped: rank flips, gap negates.
    pub fn swapped(&self) -> PseudoRankPair {
        PseudoRankPair {
            id1: self.id2.clone(),
            id2: self.id1.clone(),
            rank: 1 - self.rank,
            teacher_gap: -self.teacher_gap,
        }
    }
}

/// Index-based pair used on the training hot path; same gating semantics as
/// [`PseudoRankPair`] with ids replaced by positions into the unlabelled set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct IndexPair {
    pub a: u32,
    pub b: u32,
    pub rank: u8,
    pub gap: f64,
}

/// Emits every unordered pair whose score gap strictly exceeds `tau`,
/// oriented in enumeration order. This is the single gating implementation
/// behind both the public and the index-based pair generators.
pub(crate) fn gate_pairs(scores: &[f64], tau: f64) -> Vec<IndexPair> {
    let mut pairs = Vec::new();
    for i in 0..scores.len() {
        for j in (i + 1)..scores.len() {
            let gap = scores[i] - scores[j];
            if gap.abs() > tau {
                pairs.push(IndexPair {
                    a: i as u32,
                    b: j as u32,
                    rank: (gap >= 0.0) as u8,
                    gap,
                });
            }
        }
    }
    pairs
}

/// Scores every unlabelled video once with the teacher under the given
/// augmentation (weak, per the training recipe) and emits all qualifying
/// pairs. An empty result is legitimate.
pub fn generate_pseudo_ranks(
    teacher: &QualityModel,
    unlabelled: &[&VideoRecord],
    tau: f64,
    spec: &AugmentationSpec,
    augment: Augment,
) -> Result<Vec<PseudoRankPair>> {
    let scores = unlabelled
        .iter()
        .map(|r| teacher.predict(r, augment, spec))
        .collect::<Result<Vec<f64>>>()?;
    Ok(gate_pairs(&scores, tau)
        .into_iter()
        .map(|p| PseudoRankPair {
            id1: unlabelled[p.a as usize].id.clone(),
            id2: unlabelled[p.b as usize].id.clone(),
            rank: p.rank,
            teacher_gap: p.gap,
        })
        .collect())
}

/// Probability that the first score outranks the second: the logistic of
/// the difference, computed without overflow on either side.
pub fn rank_probability(score1: f64, score2: f64) -> f64 {
    let d = score1 - score2;
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Clamp applied to predictions inside the cross entropy.
pub const CROSS_ENTROPY_EPS: f64 = 1e-7;

/// Binary cross entropy `-p1 ln p2 - (1-p1) ln(1-p2)` with the prediction
/// clamped away from 0 and 1.
pub fn cross_entropy(target: f64, prediction: f64) -> f64 {
    let p = prediction.clamp(CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS);
    -target * p.ln() - (1.0 - target) * (1.0 - p).ln()
}

pub(crate) fn rank_matches_truth(rank: u8, mos1: f64, mos2: f64) -> bool {
    if mos1 == mos2 {
        return true; // ties are correct under either orientation
    }
    (rank == 1) == (mos1 > mos2)
}

/// Fraction of pairs whose rank agrees with the true MOS ordering; `None`
/// for an empty pair set. Every referenced video must carry a diagnostic
/// MOS.
pub fn pseudo_rank_accuracy(
    pairs: &[PseudoRankPair],
    true_mos: &HashMap<String, f64>,
) -> Result<Option<f64>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let mut correct = 0usize;
    for p in pairs {
        let m1 = *true_mos
            .get(&p.id1)
            .ok_or_else(|| Error::Training(format!("no diagnostic mos for `{}`", p.id1)))?;
        let m2 = *true_mos
            .get(&p.id2)
            .ok_or_else(|| Error::Training(format!("no diagnostic mos for `{}`", p.id2)))?;
        if rank_matches_truth(p.rank, m1, m2) {
            correct += 1;
        }
    }
    Ok(Some(correct as f64 / pairs.len() as f64))
}
