//! Semi-supervised training: pseudo-rank generation, losses, the LPR loop,
//! and the baseline trainers.

mod loss;
mod pseudorank;
mod trainer;

pub use loss::{supervised_loss, unsupervised_loss};
pub use pseudorank::{
    cross_entropy, generate_pseudo_ranks, pseudo_rank_accuracy, rank_probability, PseudoRankPair,
    CROSS_ENTROPY_EPS,
};
pub use trainer::train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmodel::{ModelMode, ModelWidths, QualityModel};

/// Training method. `Lpr` is the pseudo-rank pipeline; the rest are the
/// supervised baseline and the standard SSL baselines adapted to regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Supervised,
    Lpr,
    Pl,
    Mt,
    Ns,
    FmStar,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Supervised,
        Method::Lpr,
        Method::Pl,
        Method::Mt,
        Method::Ns,
        Method::FmStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Supervised => "supervised",
            Method::Lpr => "lpr",
            Method::Pl => "pl",
            Method::Mt => "mt",
            Method::Ns => "ns",
            Method::FmStar => "fmstar",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "supervised" => Ok(Method::Supervised),
            "lpr" => Ok(Method::Lpr),
            "pl" => Ok(Method::Pl),
            "mt" => Ok(Method::Mt),
            "ns" => Ok(Method::Ns),
            "fmstar" | "fm*" => Ok(Method::FmStar),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

fn default_lambda() -> f64 {
    0.1
}
fn default_tau() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    0.5
}
fn default_refresh() -> usize {
    50
}
fn default_iters() -> usize {
    1000
}
fn default_lr0() -> f64 {
    0.1
}
fn default_lr_decay() -> f64 {
    0.01
}
fn default_momentum() -> f64 {
    0.9
}
fn default_strong_fps() -> f64 {
    1.0
}
fn default_weak_divisor() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_ns_rounds() -> usize {
    2
}
fn default_mode() -> ModelMode {
    ModelMode::Frame
}
fn default_widths() -> ModelWidths {
    ModelWidths::default()
}
fn default_method() -> Method {
    Method::Lpr
}

/// Every hyperparameter of a training run.
///
/// Defaults: relative weight `lambda = 0.1`, gate threshold `tau = 0.1`,
/// EMA smoothing `alpha = 0.5`, pseudo-rank refresh every 50 iterations,
/// 1000 warm-up plus 1000 fine-tuning iterations, SGD with initial rate 0.1,
/// inverse-time decay 0.01, momentum 0.9, strong augmentation at 1 fps and
/// weak at half the native rate. The batch size, when left unset, is 16 for
/// labelled sets of at most 30 videos and 32 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    pub seed: u64,
    pub lambda: f64,
    pub tau: f64,
    pub alpha: f64,
    /// Pseudo-rank (or pseudo-label) refresh period K.
    pub refresh_every: usize,
    pub warmup_iters: usize,
    pub ssl_iters: usize,
    pub batch_size: Option<usize>,
    pub lr0: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub strong_fps: f64,
    pub weak_divisor: usize,
    pub mode: ModelMode,
    pub widths: ModelWidths,
    /// Ablation switches; all on for the full pipeline.
    pub use_augmentation: bool,
    pub use_rank: bool,
    pub use_threshold: bool,
    pub use_ema: bool,
    /// Rescale the unsupervised weight each iteration so both loss terms
    /// have a similar magnitude, instead of the fixed `lambda`.
    pub auto_balance_lambda: bool,
    /// Teacher/student retraining rounds for the noisy-student baseline.
    pub ns_rounds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: default_method(),
            seed: 0,
            lambda: default_lambda(),
            tau: default_tau(),
            alpha: default_alpha(),
            refresh_every: default_refresh(),
            warmup_iters: default_iters(),
            ssl_iters: default_iters(),
            batch_size: None,
            lr0: default_lr0(),
            lr_decay: default_lr_decay(),
            momentum: default_momentum(),
            strong_fps: default_strong_fps(),
            weak_divisor: default_weak_divisor(),
            mode: default_mode(),
            widths: default_widths(),
            use_augmentation: default_true(),
            use_rank: default_true(),
            use_threshold: default_true(),
            use_ema: default_true(),
            auto_balance_lambda: false,
            ns_rounds: default_ns_rounds(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 0.0 {
            return Err(Error::Config("tau must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must be in [0,1]".into()));
        }
        if self.refresh_every == 0 {
            return Err(Error::Config("refresh_every must be at least 1".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::Config("lr0 must be positive".into()));
        }
        if self.lr_decay < 0.0 {
            return Err(Error::Config("lr_decay must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0,1)".into()));
        }
        if !(self.strong_fps > 0.0) {
            return Err(Error::Config("strong_fps must be positive".into()));
        }
        if self.weak_divisor == 0 {
            return Err(Error::Config("weak_divisor must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.widths.f_hidden.contains(&0) || self.widths.g_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.method == Method::Ns && self.ns_rounds == 0 {
            return Err(Error::Config("ns_rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// Batch size rule: 16 when at most 30 videos are labelled, 32 otherwise,
    /// unless overridden.
    pub fn effective_batch(&self, labelled_count: usize) -> usize {
        self.batch_size
            .unwrap_or(if labelled_count <= 30 { 16 } else { 32 })
    }
}

/// Losses logged at one iteration; `total = supervised + lambda * unsupervised`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterLoss {
    pub supervised: f64,
    pub unsupervised: f64,
    pub total: f64,
}

/// One pseudo-rank (or pseudo-label) refresh event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshLog {
    /// Fine-tuning iteration at which the refresh happened.
    pub iteration: usize,
    /// Number of qualifying pairs (or pseudo-labelled videos).
    pub pair_count: usize,
    /// Fraction of pairs ranked consistently with the true MOS, when
    /// diagnostics labels exist for the whole unlabelled set.
    pub rank_accuracy: Option<f64>,
}

/// Everything a training run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub seed: u64,
    pub losses: Vec<IterLoss>,
    pub refreshes: Vec<RefreshLog>,
    /// Student parameters at the end of the warm-up phase.
    pub warmup_student: QualityModel,
    pub student: QualityModel,
    pub teacher: Option<QualityModel>,
    pub wall_ms: u64,
    pub config: TrainConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!("LPR".parse::<Method>().unwrap(), Method::Lpr);
        assert_eq!("fm*".parse::<Method>().unwrap(), Method::FmStar);
        let err = "magic".parse::<Method>().unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn batch_size_rule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.effective_batch(30), 16);
        assert_eq!(cfg.effective_batch(60), 32);
        assert_eq!(cfg.effective_batch(120), 32);
        let forced = TrainConfig {
            batch_size: Some(8),
            ..TrainConfig::default()
        };
        assert_eq!(forced.effective_batch(120), 8);
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let bad_tau = TrainConfig {
            tau: -0.1,
            ..TrainConfig::default()
        };
        assert!(bad_tau.validate().is_err());
        let bad_alpha = TrainConfig {
            alpha: 1.5,
            ..TrainConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
        let bad_k = TrainConfig {
            refresh_every: 0,
            ..TrainConfig::default()
        };
        assert!(bad_k.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn config_json_roundtrip_with_defaults() {
        let cfg = TrainConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);

        // Sparse override relies on serde defaults.
        let sparse: TrainConfig = serde_json::from_str(r#"{"lambda":0.2}"#).unwrap();
        assert_eq!(sparse.lambda, 0.2);
        assert_eq!(sparse.tau, 0.1);
    }
}
