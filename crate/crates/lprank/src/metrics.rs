//! Rank and linear correlation, complementarity quadrants, and
//! median-over-splits aggregation.

use serde::{Deserialize, Serialize};

use crate::dataset::VideoRecord;
use crate::error::{Error, Result};
use crate::qmodel::{Augment, AugmentationSpec, QualityModel};

/// Evaluation of one model on one test set. Correlations are `None` when
/// undefined (fewer than two points or a constant argument).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub srocc: Option<f64>,
    pub plcc: Option<f64>,
    pub n: usize,
    /// Per-video (prediction, label) pairs in test-set order.
    pub pairs: Vec<(f64, f64)>,
}

/// Fractional (average-tie) ranks, 1-based.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Tied block spans sorted positions i..=j; all get the mean rank.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank-order correlation: Pearson correlation of fractional
/// average ranks. `None` for undefined inputs (length < 2 or an argument
/// constant after ranking).
pub fn srocc(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Pearson linear correlation; `None` for undefined inputs.
pub fn plcc(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(x, y)
}

/// Error-based complementarity counts between two predictors. With
/// threshold `0.2 * mos_range`, returns how many videos fall in each
/// quadrant: `[both good, A good B bad, A bad B good, both bad]`.
pub fn complementarity_quadrants(err_a: &[f64], err_b: &[f64], mos_range: f64) -> [usize; 4] {
    assert_eq!(err_a.len(), err_b.len(), "error vectors must align");
    assert!(mos_range > 0.0, "mos range must be positive");
    let threshold = 0.2 * mos_range;
    let mut counts = [0usize; 4];
    for (&a, &b) in err_a.iter().zip(err_b) {
        let idx = match (a <= threshold, b <= threshold) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[idx] += 1;
    }
    counts
}

/// Median with the even-count convention of averaging the middle two.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Componentwise medians over per-split results, skipping absent values.
pub fn aggregate_splits(results: &[EvalResult]) -> Result<(Option<f64>, Option<f64>)> {
    if results.is_empty() {
        return Err(Error::Config("no split results to aggregate".into()));
    }
    let sroccs: Vec<f64> = results.iter().filter_map(|r| r.srocc).collect();
    let plccs: Vec<f64> = results.iter().filter_map(|r| r.plcc).collect();
    Ok((median(&sroccs), median(&plccs)))
}

/// Scores every test record (no augmentation) against its label.
pub fn evaluate_model(
    model: &QualityModel,
    test: &[&VideoRecord],
    spec: &AugmentationSpec,
) -> Result<EvalResult> {
    let mut pairs = Vec::with_capacity(test.len());
    for rec in test {
        let label = rec
            .diagnostic_mos()
            .ok_or_else(|| Error::record(&rec.id, "test video lacks a mos label"))?;
        let pred = model.predict(rec, Augment::None, spec)?;
        pairs.push((pred, label));
    }
    let (preds, labels): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(EvalResult {
        srocc: srocc(&preds, &labels),
        plcc: plcc(&preds, &labels),
        n: pairs.len(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::rng::{stream_rng, streams};

    #[test]
    fn srocc_oracles() {
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[10.0, 20.0, 40.0]), Some(1.0));
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[5.0, 4.0, 3.0]), Some(-1.0));
        // 1 - 6*2/(4*15) = 0.8
        let r = srocc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn srocc_handles_ties_with_average_ranks() {
        let ranks = average_ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn plcc_oracles() {
        let x = [0.0, 1.0, 2.0];
        let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((plcc(&x, &affine).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((plcc(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        let r = plcc(&x, &[0.0, 1.0, 3.0]).unwrap();
        assert!((r - 0.981981).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs_are_absent() {
        assert_eq!(srocc(&[1.0], &[1.0]), None);
        assert_eq!(srocc(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(plcc(&[5.0, 5.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn symmetry() {
        let x = [0.3, 0.9, 0.1, 0.5];
        let y = [1.0, 0.2, 0.4, 0.8];
        assert_eq!(srocc(&x, &y), srocc(&y, &x));
        assert_eq!(plcc(&x, &y), plcc(&y, &x));
    }

    #[test]
    fn quadrant_examples() {
        let counts = complementarity_quadrants(&[0.05], &[0.30], 1.0);
        assert_eq!(counts, [0, 1, 0, 0]);

        let zeros = [0.0; 5];
        assert_eq!(complementarity_quadrants(&zeros, &zeros, 1.0), [5, 0, 0, 0]);

        let a = [0.1, 0.5, 0.1, 0.9, 0.15];
        let b = [0.05, 0.1, 0.6, 0.5, 0.19];
        let counts = complementarity_quadrants(&a, &b, 1.0);
        assert_eq!(counts.iter().sum::<usize>(), a.len());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[0.6, 0.7, 0.8]), Some(0.7));
        assert!((median(&[0.8, 0.6]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(median(&[]), None);

        let mut shuffled = vec![0.9, 0.1, 0.5, 0.3, 0.7];
        let direct = median(&shuffled);
        shuffled.shuffle(&mut stream_rng(1, streams::SPLIT));
        assert_eq!(median(&shuffled), direct);
    }

    #[test]
    fn null_distribution_is_centered() {
        // Mean SROCC between a vector and >=1000 random permutations of a
        // second vector stays within 0.05 of zero.
        let mut rng = stream_rng(2, streams::SPLIT);
        let n = 20;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut total = 0.0;
        let trials = 1200;
        for _ in 0..trials {
            y.shuffle(&mut rng);
            total += srocc(&x, &y).unwrap();
        }
        let mean = total / trials as f64;
        assert!(mean.abs() < 0.05, "null mean {mean}");
    }

    #[test]
    fn srocc_invariant_under_increasing_transforms() {
        let mut rng = stream_rng(3, streams::SPLIT);
        for _ in 0..50 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let base = srocc(&x, &y).unwrap();
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let cy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            assert!((srocc(&ex, &y).unwrap() - base).abs() < 1e-10);
            assert!((srocc(&x, &cy).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn plcc_affine_invariance() {
        let mut rng = stream_rng(4, streams::SPLIT);
        for _ in 0..50 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let base = plcc(&x, &y).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v - 0.7).collect();
            assert!((plcc(&scaled, &y).unwrap() - base).abs() < 1e-10);
            let flipped: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
            assert!((plcc(&flipped, &y).unwrap() + base).abs() < 1e-10);
        }
    }
}
