//! Min-max normalization of video-level features and MOS labels.
//!
//! Frame-level features are left untouched; only the whole-video feature
//! vector and the label are rescaled. The spec is fitted on the labelled set
//! (the only data whose labels are legitimately visible at training time)
//! and then applied to every record. Values outside the fitted range clamp
//! to [0,1]; degenerate dimensions (max == min) map to 0.

use serde::{Deserialize, Serialize};

use super::VideoRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub video_min: Vec<f64>,
    pub video_max: Vec<f64>,
    pub mos_min: Option<f64>,
    pub mos_max: Option<f64>,
}

fn rescale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

impl NormalizationSpec {
    /// Fits per-dimension min/max over the given records' video features and
    /// labels. Errors on an empty fitting set.
    pub fn fit(records: &[&VideoRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Normalization("empty fitting set".into()));
        }
        let dv = records
            .iter()
            .find_map(|r| r.video_feat().map(|v| v.len()))
            .unwrap_or(0);
        let mut video_min = vec![f64::INFINITY; dv];
        let mut video_max = vec![f64::NEG_INFINITY; dv];
        let mut mos_min = f64::INFINITY;
        let mut mos_max = f64::NEG_INFINITY;
        let mut saw_mos = false;
        for r in records {
            if let Some(v) = r.video_feat() {
                if v.len() != dv {
                    return Err(Error::Normalization(format!(
                        "video `{}` has feature dimension {} (expected {dv})",
                        r.id,
                        v.len()
                    )));
                }
                for (i, &x) in v.iter().enumerate() {
                    video_min[i] = video_min[i].min(x);
                    video_max[i] = video_max[i].max(x);
                }
            }
            if let Some(m) = r.diagnostic_mos() {
                saw_mos = true;
                mos_min = mos_min.min(m);
                mos_max = mos_max.max(m);
            }
        }
        Ok(NormalizationSpec {
            video_min,
            video_max,
            mos_min: saw_mos.then_some(mos_min),
            mos_max: saw_mos.then_some(mos_max),
        })
    }

    /// Returns a copy of `record` with video features and the label mapped
    /// into [0,1] by the fitted ranges.
    pub fn apply(&self, record: &VideoRecord) -> VideoRecord {
        let video_feat = record.video_feat().map(|v| {
            v.iter()
                .enumerate()
                .map(|(i, &x)| {
                    if i < self.video_min.len() {
                        rescale(x, self.video_min[i], self.video_max[i])
                    } else {
                        x
                    }
                })
                .collect()
        });
        let mos = record.diagnostic_mos().map(|m| match (self.mos_min, self.mos_max) {
            (Some(lo), Some(hi)) => rescale(m, lo, hi),
            _ => m,
        });
        record.with_normalized(video_feat, mos)
    }

    pub fn apply_all(&self, records: &[VideoRecord]) -> Vec<VideoRecord> {
        records.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Matrix;

    fn rec(id: &str, video: Vec<f64>, mos: Option<f64>) -> VideoRecord {
        VideoRecord::new(id, Matrix::from_vec(1, 1, vec![0.0]), Some(video), 30.0, mos).unwrap()
    }

    #[test]
    fn midpoint_maps_to_half() {
        let fit = [rec("a", vec![2.0], Some(0.0)), rec("b", vec![4.0], Some(1.0))];
        let spec = NormalizationSpec::fit(&fit.iter().collect::<Vec<_>>()).unwrap();
        let out = spec.apply(&rec("c", vec![3.0], None));
        assert_eq!(out.video_feat(), Some(&[0.5][..]));
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let fit = [rec("a", vec![5.0], Some(0.2)), rec("b", vec![5.0], Some(0.8))];
        let spec = NormalizationSpec::fit(&fit.iter().collect::<Vec<_>>()).unwrap();
        let out = spec.apply(&rec("c", vec![5.0], None));
        assert_eq!(out.video_feat(), Some(&[0.0][..]));
    }

    #[test]
    fn out_of_range_clamps() {
        let fit = [rec("a", vec![2.0], Some(0.0)), rec("b", vec![4.0], Some(1.0))];
        let spec = NormalizationSpec::fit(&fit.iter().collect::<Vec<_>>()).unwrap();
        let hi = spec.apply(&rec("c", vec![6.0], None));
        assert_eq!(hi.video_feat(), Some(&[1.0][..]));
        let lo = spec.apply(&rec("d", vec![-1.0], None));
        assert_eq!(lo.video_feat(), Some(&[0.0][..]));
    }

    #[test]
    fn mos_rescaled_to_unit_interval() {
        let fit = [rec("a", vec![0.0], Some(1.2)), rec("b", vec![1.0], Some(4.2))];
        let spec = NormalizationSpec::fit(&fit.iter().collect::<Vec<_>>()).unwrap();
        let out = spec.apply(&rec("c", vec![0.5], Some(2.7)));
        assert!((out.diagnostic_mos().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_fitting_set_is_rejected() {
        assert!(NormalizationSpec::fit(&[]).is_err());
    }

    #[test]
    fn applying_twice_with_refit_spec_is_identity() {
        // After one application the fitting set attains 0 and 1 per
        // non-degenerate dimension, so a spec refitted on the output leaves
        // the data unchanged.
        let raw = [
            rec("a", vec![2.0, 7.0], Some(1.0)),
            rec("b", vec![4.0, 7.0], Some(3.0)),
            rec("c", vec![3.0, 7.0], Some(2.0)),
        ];
        let spec = NormalizationSpec::fit(&raw.iter().collect::<Vec<_>>()).unwrap();
        let once: Vec<VideoRecord> = raw.iter().map(|r| spec.apply(r)).collect();
        let respec = NormalizationSpec::fit(&once.iter().collect::<Vec<_>>()).unwrap();
        let twice: Vec<VideoRecord> = once.iter().map(|r| respec.apply(r)).collect();
        assert_eq!(once, twice);
    }
}
