//! Synthetic desk-scale datasets with known latent quality.
//!
//! Each video carries a latent quality `q ~ U[0,1]`. Frame features are a
//! fixed seeded random linear embedding of `(q, per-frame nuisance)` plus
//! zero-mean noise; the video-level feature vector is a second embedding of
//! `q` plus noise. The stored MOS is `q` itself, so evaluation and
//! diagnostics have exact ground truth.
//!
//! The noise at scale `noise_scale` has a per-video component and a smaller
//! per-frame component. The per-video part survives temporal averaging and
//! is what makes label-efficient regression genuinely hard; purely per-frame
//! noise would wash out over a few hundred frames.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::VideoRecord;
use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_videos: usize,
    /// Frame feature dimension D.
    pub frame_dim: usize,
    /// Video feature dimension Dv (0 omits video-level features).
    pub video_dim: usize,
    pub fps: f64,
    /// Clip duration in seconds; frame count is `round(fps * duration)`.
    pub duration: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_videos: 1200,
            frame_dim: 32,
            video_dim: 8,
            fps: 30.0,
            duration: 8.0,
            noise_scale: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_videos == 0 || self.frame_dim == 0 {
            return Err(Error::Config("synthetic: counts must be positive".into()));
        }
        if !(self.fps > 0.0 && self.duration > 0.0) {
            return Err(Error::Config("synthetic: fps and duration must be positive".into()));
        }
        if self.noise_scale < 0.0 {
            return Err(Error::Config("synthetic: noise_scale must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn frames_per_video(&self) -> usize {
        (self.fps * self.duration).round().max(1.0) as usize
    }
}

/// Relative weights of the per-video noise, per-frame noise, and the
/// quality-scaled per-frame nuisance.
fn noise_weights() -> (f64, f64, f64) {
    // Temporary calibration hook; remove once frozen.
    if let Ok(s) = std::env::var("LPRANK_CAL") {
        let parts: Vec<f64> = s.split(',').filter_map(|p| p.parse().ok()).collect();
        if parts.len() == 3 {
            return (parts[0], parts[1], parts[2]);
        }
    }
    (1.0, 0.5, 2.0)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<VideoRecord>> {
    spec.validate()?;
    let d = spec.frame_dim;
    let dv = spec.video_dim;
    let n_frames = spec.frames_per_video();

    let mut embed_rng = stream_rng(spec.seed, streams::SYNTH_EMBED);
    let normal_vec = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    };
    let quality_dir = normal_vec(&mut embed_rng, d);
    let nuisance_dir = normal_vec(&mut embed_rng, d);
    let video_dir = normal_vec(&mut embed_rng, dv);

    let (video_w, frame_w, nuisance_w) = noise_weights();
    let mut rng = stream_rng(spec.seed, streams::SYNTH_VIDEO);
    let mut records = Vec::with_capacity(spec.n_videos);
    for v in 0..spec.n_videos {
        let q: f64 = rng.random_range(0.0..1.0);
        let video_noise = normal_vec(&mut rng, d);

        let mut frames = Matrix::zeros(n_frames, d);
        for n in 0..n_frames {
            // The nuisance spread scales with the latent quality, so frame
            // variability carries quality information beyond the frame mean.
            let nuisance: f64 = rng.sample::<f64, _>(StandardNormal) * nuisance_w * q;
            let row = frames.row_mut(n);
            for i in 0..d {
                let frame_noise: f64 = rng.sample(StandardNormal);
                row[i] = quality_dir[i] * q
                    + nuisance_dir[i] * nuisance
                    + spec.noise_scale * (video_w * video_noise[i] + frame_w * frame_noise);
            }
        }

        let video_feat = if dv > 0 {
            let mut t = vec![0.0; dv];
            for (j, tj) in t.iter_mut().enumerate() {
                let noise: f64 = rng.sample(StandardNormal);
                *tj = video_dir[j] * q + spec.noise_scale * noise;
            }
            Some(t)
        } else {
            None
        };

        records.push(VideoRecord::new(
            format!("synth-{v:05}"),
            frames,
            video_feat,
            spec.fps,
            Some(q),
        )?);
    }
    Ok(records)
}
