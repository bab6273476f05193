//! Batch losses with exact gradients.
//!
//! Both losses are sums over their batch. The supervised loss is the L1
//! distance between labels and predictions on weakly augmented inputs (its
//! subgradient at an exact tie is 0). The unsupervised loss is the binary
//! cross entropy between a pair's pseudo-rank and the logistic of the
//! student's score difference on strongly augmented inputs; gradients flow
//! through both branch evaluations of the shared student parameters.

use super::pseudorank::{cross_entropy, rank_probability, PseudoRankPair, CROSS_ENTROPY_EPS};
use crate::dataset::VideoRecord;
use crate::error::{Error, Result};
use crate::qmodel::{Augment, AugmentationSpec, ModelGrads, QualityModel};

/// Sum of `|label - q(view(video))|` over the batch, with gradients
/// accumulated into `grads`. Also used for pseudo-label targets, which are
/// plain (video, target) pairs under a different view.
pub fn supervised_loss(
    student: &QualityModel,
    batch: &[(&VideoRecord, f64)],
    augment: Augment,
    spec: &AugmentationSpec,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let mut loss = 0.0;
    for (record, label) in batch {
        let (q, trace) = student.predict_traced(record, augment, spec)?;
        let err = label - q;
        loss += err.abs();
        // d|label - q|/dq = -sign(label - q); 0 at a tie.
        let dq = if err > 0.0 {
            -1.0
        } else if err < 0.0 {
            1.0
        } else {
            0.0
        };
        if dq != 0.0 {
            student.backprop(&trace, dq, grads);
        }
    }
    Ok(loss)
}

/// Derivative of `cross_entropy(rank, sigma(d))` with respect to `d`,
/// honoring the clamp (flat once the prediction saturates).
fn rank_loss_ddiff(rank: u8, p: f64) -> f64 {
    if p <= CROSS_ENTROPY_EPS || p >= 1.0 - CROSS_ENTROPY_EPS {
        0.0
    } else {
        p - rank as f64
    }
}

/// Index-form pair batch: positions into an unlabelled slice plus the rank.
pub(crate) fn rank_loss_indexed(
    student: &QualityModel,
    unlabelled: &[&VideoRecord],
    pairs: &[(u32, u32, u8)],
    augment: Augment,
    spec: &AugmentationSpec,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let mut loss = 0.0;
    for &(a, b, rank) in pairs {
        let (q1, trace1) = student.predict_traced(unlabelled[a as usize], augment, spec)?;
        let (q2, trace2) = student.predict_traced(unlabelled[b as usize], augment, spec)?;
        let p = rank_probability(q1, q2);
        loss += cross_entropy(rank as f64, p);
        let dd = rank_loss_ddiff(rank, p);
        if dd != 0.0 {
            student.backprop(&trace1, dd, grads);
            student.backprop(&trace2, -dd, grads);
        }
    }
    Ok(loss)
}

/// Sum over pseudo-rank pairs of the rank cross entropy on the student's
/// strongly augmented predictions. An empty batch contributes zero loss and
/// zero gradients.
pub fn unsupervised_loss(
    student: &QualityModel,
    pairs: &[PseudoRankPair],
    records: &[VideoRecord],
    augment: Augment,
    spec: &AugmentationSpec,
    grads: &mut ModelGrads,
) -> Result<f64> {
    let index: std::collections::HashMap<&str, u32> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i as u32))
        .collect();
    let refs: Vec<&VideoRecord> = records.iter().collect();
    let mut indexed = Vec::with_capacity(pairs.len());
    for p in pairs {
        let a = *index
            .get(p.id1.as_str())
            .ok_or_else(|| Error::Training(format!("pair references unknown id `{}`", p.id1)))?;
        let b = *index
            .get(p.id2.as_str())
            .ok_or_else(|| Error::Training(format!("pair references unknown id `{}`", p.id2)))?;
        indexed.push((a, b, p.rank));
    }
    rank_loss_indexed(student, &refs, &indexed, augment, spec, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Matrix;
    use crate::qmodel::{ModelMode, ModelWidths};
    use crate::rng::{stream_rng, streams};

    fn tiny_model(seed: u64, zeroed: bool) -> QualityModel {
        let mut rng = stream_rng(seed, streams::MODEL_INIT);
        let mut m = QualityModel::new(
            ModelMode::Frame,
            3,
            0,
            ModelWidths {
                f_hidden: [5, 4],
                g_hidden: 3,
            },
            &mut rng,
        )
        .unwrap();
        if zeroed {
            for i in 0..m.param_count() {
                m.set_param(i, 0.0);
            }
        }
        m
    }

    fn record(id: &str, fill: f64) -> VideoRecord {
        VideoRecord::new(id, Matrix::from_vec(4, 3, vec![fill; 12]), None, 4.0, None).unwrap()
    }

    #[test]
    fn supervised_loss_on_zeroed_model() {
        // Zeroed sigmoid model predicts exactly 0.5 everywhere.
        let m = tiny_model(0, true);
        let spec = AugmentationSpec::default();
        let r1 = record("a", 0.1);
        let r2 = record("b", 0.7);

        let mut grads = ModelGrads::zeros_like(&m);
        let exact = supervised_loss(&m, &[(&r1, 0.5)], Augment::Weak, &spec, &mut grads).unwrap();
        assert_eq!(exact, 0.0);
        assert!(grads.iter().all(|g| g == 0.0));

        let mut grads = ModelGrads::zeros_like(&m);
        let single = supervised_loss(&m, &[(&r1, 0.7)], Augment::Weak, &spec, &mut grads).unwrap();
        assert!((single - 0.2).abs() < 1e-12);

        // Errors 0.1 and 0.3 sum to 0.4.
        let mut grads = ModelGrads::zeros_like(&m);
        let batch = supervised_loss(
            &m,
            &[(&r1, 0.6), (&r2, 0.8)],
            Augment::Weak,
            &spec,
            &mut grads,
        )
        .unwrap();
        assert!((batch - 0.4).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_pair_costs_ln_two() {
        let m = tiny_model(1, true);
        let spec = AugmentationSpec::default();
        let r1 = record("a", 0.3);
        let r2 = record("b", -0.2);
        let pairs = vec![PseudoRankPair {
            id1: "a".into(),
            id2: "b".into(),
            rank: 1,
            teacher_gap: 0.2,
        }];
        let records = vec![r1, r2];
        let mut grads = ModelGrads::zeros_like(&m);
        let loss =
            unsupervised_loss(&m, &pairs, &records, Augment::Strong, &spec, &mut grads).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn empty_pair_batch_is_zero() {
        let m = tiny_model(2, false);
        let spec = AugmentationSpec::default();
        let mut grads = ModelGrads::zeros_like(&m);
        let loss = unsupervised_loss(&m, &[], &[], Augment::Strong, &spec, &mut grads).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g == 0.0));
    }

    #[test]
    fn loss_shrinks_as_student_margin_grows_in_rank_direction() {
        // cross_entropy(1, sigma(d)) is decreasing in d.
        let mut prev = f64::INFINITY;
        for d in [-0.5, 0.0, 0.3, 0.8] {
            let l = cross_entropy(1.0, rank_probability(d, 0.0));
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn swapping_pair_orientation_preserves_the_loss() {
        let m = tiny_model(3, false);
        let spec = AugmentationSpec::default();
        let records = vec![record("a", 0.4), record("b", -0.6)];
        let pair = PseudoRankPair {
            id1: "a".into(),
            id2: "b".into(),
            rank: 1,
            teacher_gap: 0.3,
        };
        let mut g1 = ModelGrads::zeros_like(&m);
        let l1 = unsupervised_loss(&m, &[pair.clone()], &records, Augment::Strong, &spec, &mut g1)
            .unwrap();
        let mut g2 = ModelGrads::zeros_like(&m);
        let l2 = unsupervised_loss(&m, &[pair.swapped()], &records, Augment::Strong, &spec, &mut g2)
            .unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = tiny_model(4, false);
        let spec = AugmentationSpec::default();
        let labelled = [(record("a", 0.2), 0.9), (record("b", -0.5), 0.1)];
        let unlabelled = vec![record("u1", 0.7), record("u2", -0.1), record("u3", 0.05)];
        let pairs = vec![
            PseudoRankPair {
                id1: "u1".into(),
                id2: "u2".into(),
                rank: 1,
                teacher_gap: 0.4,
            },
            PseudoRankPair {
                id1: "u3".into(),
                id2: "u1".into(),
                rank: 0,
                teacher_gap: -0.2,
            },
        ];
        let lambda = 0.1;

        let total = |model: &QualityModel| -> f64 {
            let mut sink = ModelGrads::zeros_like(model);
            let batch: Vec<(&VideoRecord, f64)> =
                labelled.iter().map(|(r, y)| (r, *y)).collect();
            let ls = supervised_loss(model, &batch, Augment::Weak, &spec, &mut sink).unwrap();
            let lu =
                unsupervised_loss(model, &pairs, &unlabelled, Augment::Strong, &spec, &mut sink)
                    .unwrap();
            ls + lambda * lu
        };

        let mut grads = ModelGrads::zeros_like(&m);
        let batch: Vec<(&VideoRecord, f64)> = labelled.iter().map(|(r, y)| (r, *y)).collect();
        supervised_loss(&m, &batch, Augment::Weak, &spec, &mut grads).unwrap();
        let mut ugrads = ModelGrads::zeros_like(&m);
        unsupervised_loss(&m, &pairs, &unlabelled, Augment::Strong, &spec, &mut ugrads).unwrap();
        grads.add_scaled(&ugrads, lambda);
        let analytic: Vec<f64> = grads.iter().collect();

        let h = 1e-5;
        for (idx, a) in analytic.iter().enumerate() {
            let orig = m.get_param(idx);
            let mut plus = m.clone();
            plus.set_param(idx, orig + h);
            let mut minus = m.clone();
            minus.set_param(idx, orig - h);
            let n = (total(&plus) - total(&minus)) / (2.0 * h);
            let tol = 1e-7 + 1e-4 * a.abs().max(n.abs());
            assert!((a - n).abs() <= tol, "param {idx}: {a} vs {n}");
        }
    }
}
