//! Quality-invariant temporal subsampling.
//!
//! Strong augmentation keeps frames at a low target rate (1 fps by default);
//! weak augmentation keeps every `weak_divisor`-th frame (half the native
//! rate by default). Both operate on stored frame features by index
//! selection and always keep at least the first frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    /// Target frame rate of the strong augmentation, frames per second.
    pub strong_fps: f64,
    /// Keep every n-th frame under the weak augmentation.
    pub weak_divisor: usize,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            strong_fps: 1.0,
            weak_divisor: 2,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strong_fps.is_finite() && self.strong_fps > 0.0) {
            return Err(Error::Config("strong_fps must be positive".into()));
        }
        if self.weak_divisor == 0 {
            return Err(Error::Config("weak_divisor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which temporal view of a video to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augment {
    None,
    Strong,
    Weak,
}

/// Indices kept by the strong augmentation: `0, s, 2s, ...` with stride
/// `s = round(fps / strong_fps)`, clamped to at least 1. Half-way strides
/// round away from zero.
pub fn strong_indices(n_frames: usize, fps: f64, strong_fps: f64) -> Vec<usize> {
    let stride = ((fps / strong_fps).round() as usize).max(1);
    (0..n_frames).step_by(stride).collect()
}

/// Indices kept by the weak augmentation: every `divisor`-th frame.
pub fn weak_indices(n_frames: usize, divisor: usize) -> Vec<usize> {
    (0..n_frames).step_by(divisor.max(1)).collect()
}

pub fn select_frames(frames: &Matrix, fps: f64, augment: Augment, spec: &AugmentationSpec) -> Matrix {
    match augment {
        Augment::None => frames.clone(),
        Augment::Strong => frames.select_rows(&strong_indices(frames.rows(), fps, spec.strong_fps)),
        Augment::Weak => frames.select_rows(&weak_indices(frames.rows(), spec.weak_divisor)),
    }
}

/// Arithmetic mean over a nonempty sequence of equally-sized vectors.
pub fn temporal_average(frames: &Matrix) -> Result<Vec<f64>> {
    if frames.rows() == 0 {
        return Err(Error::Config("temporal average of an empty sequence".into()));
    }
    let mut mean = vec![0.0; frames.cols()];
    for row in frames.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / frames.rows() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}
