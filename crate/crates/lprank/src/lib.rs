//! Semi-supervised learning of video-quality regressors from precomputed
//! per-frame and per-video feature files.
//!
//! The centerpiece is LPR (learning with pseudo-ranks): a student/teacher
//! pair under quality-invariant temporal-subsampling augmentations, where
//! the EMA teacher's weak-view score gaps above a threshold become pairwise
//! rank targets for the student's strong view. The crate also ships the
//! supervised baseline and the standard SSL baselines (pseudo-label, mean
//! teacher, noisy student, FixMatch-style with temporal augmentations), a
//! synthetic dataset generator with known latent quality, SROCC/PLCC
//! evaluation, and an experiment harness with reproducible seeding.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! - **`generate_dataset`** - write a synthetic dataset to feature files and
//!   load it back
//! - **`train_supervised`** - the label-only baseline
//! - **`train_lpr`** - full LPR training with loss and pair-count logs
//! - **`compare_methods`** - all six methods on one synthetic dataset
//! - **`sweep_threshold`** - median SROCC across gate thresholds
//! - **`sweep_frame_rate`** - median SROCC across strong-augmentation rates
//! - **`ablation_grid`** - the five-variant component ablation
//! - **`rank_accuracy_trace`** - pseudo-rank accuracy across refreshes
//! - **`gradient_check`** - analytic gradients vs central differences
//! - **`correlation_metrics`** - SROCC/PLCC and complementarity quadrants
//!
//! ```bash
//! cargo run --release --example train_lpr
//! cargo run --release --example compare_methods
//! ```
//!
//! The `lprank` binary wraps the harness for batch use:
//!
//! ```bash
//! lprank synth-gen --videos 300 --out data/
//! lprank run --manifest data/manifest.csv --methods supervised,lpr --labels 30 --out out/
//! ```
//!
//! ## Quick start
//!
//! ```
//! use lprank::dataset::{generate_synthetic, make_split, SyntheticSpec};
//! use lprank::ssl::{train, Method, TrainConfig};
//!
//! let records = generate_synthetic(&SyntheticSpec {
//!     n_videos: 40,
//!     frame_dim: 4,
//!     video_dim: 2,
//!     fps: 6.0,
//!     duration: 1.0,
//!     noise_scale: 0.2,
//!     seed: 7,
//! })
//! .unwrap();
//! let split = make_split(&records, 8, 0).unwrap();
//! let cfg = TrainConfig {
//!     method: Method::Lpr,
//!     warmup_iters: 20,
//!     ssl_iters: 20,
//!     refresh_every: 10,
//!     batch_size: Some(4),
//!     widths: lprank::qmodel::ModelWidths { f_hidden: [6, 4], g_hidden: 4 },
//!     ..TrainConfig::default()
//! };
//! let report = train(&records, &split, &cfg).unwrap();
//! assert_eq!(report.losses.len(), 40);
//! ```

pub mod dataset;
mod error;
pub mod harness;
pub mod mat;
pub mod metrics;
pub mod nnet;
pub mod qmodel;
pub mod rng;
pub mod ssl;

pub use error::{Error, Result};
