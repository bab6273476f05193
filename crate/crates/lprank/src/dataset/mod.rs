//! Feature-file ingestion, reproducible splits, normalization, and the
//! synthetic generator used for desk-scale experiments.

mod manifest;
mod normalize;
mod split;
mod synthetic;

pub use manifest::{load_manifest, save_dataset};
pub use normalize::NormalizationSpec;
pub use split::{assert_partition, make_split, DatasetSplit, SplitData};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mat::Matrix;

/// One video's precomputed features.
///
/// `frames` holds one feature vector per frame (N x D); `video_feat` is an
/// optional whole-video feature vector. Frame blocks are shared behind an
/// `Arc`, so cloning a record (for example to rewrite its normalized fields)
/// does not copy the frame data.
///
/// The MOS label is deliberately not a public field: training code receives
/// labels only for the labelled split via [`SplitData`], while evaluation
/// and diagnostics read [`VideoRecord::diagnostic_mos`].
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    frames: Arc<Matrix>,
    video_feat: Option<Vec<f64>>,
    fps: f64,
    mos: Option<f64>,
}

impl VideoRecord {
    pub fn new(
        id: impl Into<String>,
        frames: Matrix,
        video_feat: Option<Vec<f64>>,
        fps: f64,
        mos: Option<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::record(&id, "needs at least one frame feature"));
        }
        if !frames.is_finite() {
            return Err(Error::record(&id, "non-finite frame feature value"));
        }
        if let Some(v) = &video_feat {
            if v.is_empty() {
                return Err(Error::record(&id, "empty video feature vector"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::record(&id, "non-finite video feature value"));
            }
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::record(&id, format!("invalid fps {fps}")));
        }
        if let Some(m) = mos {
            if !m.is_finite() {
                return Err(Error::record(&id, "non-finite mos"));
            }
        }
        Ok(VideoRecord {
            id,
            frames: Arc::new(frames),
            video_feat,
            fps,
            mos,
        })
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn frame_dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn video_feat(&self) -> Option<&[f64]> {
        self.video_feat.as_deref()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn is_labelled(&self) -> bool {
        self.mos.is_some()
    }

    /// Ground-truth MOS for evaluation and diagnostics (for example
    /// pseudo-rank accuracy). Trainers must not consult this for videos in
    /// the unlabelled set; they get labelled-set targets from [`SplitData`].
    pub fn diagnostic_mos(&self) -> Option<f64> {
        self.mos
    }

    pub(crate) fn with_normalized(&self, video_feat: Option<Vec<f64>>, mos: Option<f64>) -> Self {
        VideoRecord {
            id: self.id.clone(),
            frames: Arc::clone(&self.frames),
            video_feat,
            fps: self.fps,
            mos,
        }
    }
}

/// Validates that every record shares frame dimension (and video-feature
/// dimension where present), returning `(frame_dim, video_dim)`.
pub fn corpus_dims(records: &[VideoRecord]) -> Result<(usize, Option<usize>)> {
    let first = records
        .first()
        .ok_or_else(|| Error::Config("empty record collection".into()))?;
    let d = first.frame_dim();
    let mut dv = first.video_feat().map(|v| v.len());
    for r in records {
        if r.frame_dim() != d {
            return Err(Error::record(
                &r.id,
                format!("frame dimension {} differs from {}", r.frame_dim(), d),
            ));
        }
        match (r.video_feat().map(|v| v.len()), dv) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::record(
                    &r.id,
                    format!("video feature dimension {a} differs from {b}"),
                ));
            }
            (Some(a), None) => dv = Some(a),
            _ => {}
        }
    }
    Ok((d, dv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_validation() {
        let frames = Matrix::from_vec(2, 3, vec![0.0; 6]);
        assert!(VideoRecord::new("a", frames.clone(), None, 30.0, Some(0.5)).is_ok());
        assert!(VideoRecord::new("a", frames.clone(), None, 0.0, None).is_err());
        assert!(VideoRecord::new("a", frames.clone(), Some(vec![f64::NAN]), 30.0, None).is_err());
        let bad = Matrix::from_vec(1, 2, vec![1.0, f64::INFINITY]);
        assert!(VideoRecord::new("a", bad, None, 30.0, None).is_err());
    }

    #[test]
    fn corpus_dims_flags_offender() {
        let a = VideoRecord::new("a", Matrix::zeros(1, 4), None, 30.0, None).unwrap();
        let b = VideoRecord::new("b", Matrix::zeros(2, 3), None, 30.0, None).unwrap();
        let err = corpus_dims(&[a, b]).unwrap_err();
        assert!(err.to_string().contains('b'));
    }
}
