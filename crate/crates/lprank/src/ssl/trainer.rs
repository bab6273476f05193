//! The LPR training loop and the baseline trainers.
//!
//! Every method shares the same warm-up: `warmup_iters` SGD steps on the
//! supervised loss over weakly augmented labelled videos. The methods differ
//! only in what happens during the fine-tuning phase:
//!
//! - `supervised` stops after warm-up.
//! - `lpr` keeps an EMA teacher, regenerates threshold-gated pseudo-rank
//!   pairs from teacher scores every `refresh_every` iterations, and steps
//!   the student on `L_s + lambda * L_u` with the pairwise rank loss.
//! - `pl` refreshes per-video pseudo-labels from the student's own weak-view
//!   predictions and trains the strong view against them with L1.
//! - `mt` recomputes teacher weak-view labels for each sampled batch.
//! - `fmstar` fixes teacher weak-view labels at each refresh.
//! - `ns` retrains a freshly initialized student per round on the union of
//!   labelled videos and teacher-pseudo-labelled unlabelled videos, with the
//!   strong view as its noise; the student then becomes the teacher.
//!
//! RNG stream discipline: labelled-batch draws and pair/unlabelled-batch
//! draws come from separate seeded streams, so disabling the unsupervised
//! branch (`lambda = 0`, empty unlabelled set) leaves the supervised
//! trajectory bitwise unchanged.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use super::loss::{rank_loss_indexed, supervised_loss};
use super::pseudorank::{gate_pairs, rank_matches_truth, IndexPair};
use super::{IterLoss, Method, RefreshLog, TrainConfig, TrainReport};
use crate::dataset::{corpus_dims, DatasetSplit, SplitData, VideoRecord};
use crate::error::{Error, Result};
use crate::qmodel::{
    model_ema, Augment, AugmentationSpec, ModelGrads, ModelOptimizer, QualityModel,
};
use crate::rng::{stream_rng, streams};

/// Where fine-tuning pseudo-labels come from.
#[derive(Clone, Copy, PartialEq)]
enum LabelSource {
    /// The student's own weak-view predictions, fixed at each refresh.
    SelfEachRefresh,
    /// The EMA teacher's weak-view predictions, recomputed per batch.
    TeacherEachIter,
    /// The EMA teacher's weak-view predictions, fixed at each refresh.
    TeacherEachRefresh,
}

struct Ctx<'a> {
    labelled: Vec<(&'a VideoRecord, f64)>,
    unlabelled: Vec<&'a VideoRecord>,
    cfg: &'a TrainConfig,
    aspec: AugmentationSpec,
    weak_view: Augment,
    strong_view: Augment,
    batch: usize,
    rng_lab: ChaCha8Rng,
    rng_unlab: ChaCha8Rng,
    losses: Vec<IterLoss>,
    refreshes: Vec<RefreshLog>,
    /// True MOS per unlabelled index when available for all of them.
    diag_mos: Option<Vec<f64>>,
}

impl<'a> Ctx<'a> {
    fn sample_labelled(&mut self) -> Vec<(&'a VideoRecord, f64)> {
        sample_from(&self.labelled, self.batch, &mut self.rng_lab)
    }

    fn lambda_for(&self, ls: f64, lu: f64) -> f64 {
        if self.cfg.auto_balance_lambda && lu > 0.0 {
            ls / lu
        } else {
            self.cfg.lambda
        }
    }

    fn log(&mut self, ls: f64, lu: f64, lambda: f64) {
        self.losses.push(IterLoss {
            supervised: ls,
            unsupervised: lu,
            total: ls + lambda * lu,
        });
    }
}

fn sample_from<T: Copy>(items: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if items.len() <= k {
        return items.to_vec();
    }
    rand::seq::index::sample(rng, items.len(), k)
        .into_iter()
        .map(|i| items[i])
        .collect()
}

fn supervised_step(
    student: &mut QualityModel,
    opt: &mut ModelOptimizer,
    ctx: &mut Ctx,
) -> Result<f64> {
    let batch = ctx.sample_labelled();
    let mut grads = ModelGrads::zeros_like(student);
    let ls = supervised_loss(student, &batch, ctx.weak_view, &ctx.aspec, &mut grads)?;
    opt.step(student, &grads)?;
    Ok(ls)
}

fn teacher_update(
    teacher: &mut QualityModel,
    student: &QualityModel,
    cfg: &TrainConfig,
) -> Result<()> {
    if cfg.use_ema {
        model_ema(teacher, student, cfg.alpha)
    } else {
        *teacher = student.clone();
        Ok(())
    }
}

fn lpr_phase(
    student: &mut QualityModel,
    teacher: &mut QualityModel,
    opt: &mut ModelOptimizer,
    ctx: &mut Ctx,
) -> Result<()> {
    let tau = if ctx.cfg.use_threshold { ctx.cfg.tau } else { 0.0 };
    let mut pairs: Vec<IndexPair> = Vec::new();
    for it in 0..ctx.cfg.ssl_iters {
        if it % ctx.cfg.refresh_every == 0 {
            let scores = ctx
                .unlabelled
                .iter()
                .map(|r| teacher.predict(r, ctx.weak_view, &ctx.aspec))
                .collect::<Result<Vec<f64>>>()?;
            pairs = gate_pairs(&scores, tau);
            let rank_accuracy = ctx.diag_mos.as_ref().and_then(|mos| {
                if pairs.is_empty() {
                    return None;
                }
                let correct = pairs
                    .iter()
                    .filter(|p| rank_matches_truth(p.rank, mos[p.a as usize], mos[p.b as usize]))
                    .count();
                Some(correct as f64 / pairs.len() as f64)
            });
            ctx.refreshes.push(RefreshLog {
                iteration: it,
                pair_count: pairs.len(),
                rank_accuracy,
            });
        }

        let batch = ctx.sample_labelled();
        let mut grads = ModelGrads::zeros_like(student);
        let ls = supervised_loss(student, &batch, ctx.weak_view, &ctx.aspec, &mut grads)?;

        let mut lu = 0.0;
        let mut lambda = ctx.cfg.lambda;
        if ctx.cfg.lambda > 0.0 && !pairs.is_empty() {
            let pair_batch: Vec<(u32, u32, u8)> =
                sample_from(&pairs, ctx.batch, &mut ctx.rng_unlab)
                    .into_iter()
                    .map(|p| (p.a, p.b, p.rank))
                    .collect();
            let mut ugrads = ModelGrads::zeros_like(student);
            lu = rank_loss_indexed(
                student,
                &ctx.unlabelled,
                &pair_batch,
                ctx.strong_view,
                &ctx.aspec,
                &mut ugrads,
            )?;
            lambda = ctx.lambda_for(ls, lu);
            grads.add_scaled(&ugrads, lambda);
        }

        opt.step(student, &grads)?;
        teacher_update(teacher, student, ctx.cfg)?;
        ctx.log(ls, lu, lambda);
    }
    Ok(())
}

fn pseudo_label_phase(
    student: &mut QualityModel,
    mut teacher: Option<&mut QualityModel>,
    source: LabelSource,
    opt: &mut ModelOptimizer,
    ctx: &mut Ctx,
) -> Result<()> {
    let mut labels: Vec<f64> = Vec::new();
    for it in 0..ctx.cfg.ssl_iters {
        if it % ctx.cfg.refresh_every == 0 {
            match source {
                LabelSource::SelfEachRefresh => {
                    labels = ctx
                        .unlabelled
                        .iter()
                        .map(|r| student.predict(r, ctx.weak_view, &ctx.aspec))
                        .collect::<Result<_>>()?;
                }
                LabelSource::TeacherEachRefresh => {
                    let t = teacher.as_deref().expect("teacher-driven source");
                    labels = ctx
                        .unlabelled
                        .iter()
                        .map(|r| t.predict(r, ctx.weak_view, &ctx.aspec))
                        .collect::<Result<_>>()?;
                }
                LabelSource::TeacherEachIter => {}
            }
            ctx.refreshes.push(RefreshLog {
                iteration: it,
                pair_count: ctx.unlabelled.len(),
                rank_accuracy: None,
            });
        }

        let batch = ctx.sample_labelled();
        let mut grads = ModelGrads::zeros_like(student);
        let ls = supervised_loss(student, &batch, ctx.weak_view, &ctx.aspec, &mut grads)?;

        let mut lu = 0.0;
        let mut lambda = ctx.cfg.lambda;
        if ctx.cfg.lambda > 0.0 && !ctx.unlabelled.is_empty() {
            let idx = sample_from(
                &(0..ctx.unlabelled.len()).collect::<Vec<usize>>(),
                ctx.batch,
                &mut ctx.rng_unlab,
            );
            let mut targets = Vec::with_capacity(idx.len());
            for &i in &idx {
                let target = match source {
                    LabelSource::TeacherEachIter => {
                        let t = teacher.as_deref().expect("teacher-driven source");
                        t.predict(ctx.unlabelled[i], ctx.weak_view, &ctx.aspec)?
                    }
                    _ => labels[i],
                };
                targets.push((ctx.unlabelled[i], target));
            }
            let mut ugrads = ModelGrads::zeros_like(student);
            lu = supervised_loss(student, &targets, ctx.strong_view, &ctx.aspec, &mut ugrads)?;
            lambda = ctx.lambda_for(ls, lu);
            grads.add_scaled(&ugrads, lambda);
        }

        opt.step(student, &grads)?;
        if let Some(t) = teacher.as_deref_mut() {
            teacher_update(t, student, ctx.cfg)?;
        }
        ctx.log(ls, lu, lambda);
    }
    Ok(())
}

/// Noisy student: per round, pseudo-label the unlabelled set with the
/// current teacher on unaugmented inputs, then train a freshly initialized
/// student on the labelled/pseudo-labelled union (labelled videos keep the
/// weak view; pseudo-labelled ones get the strong view as noise, at weight 1).
fn noisy_student_rounds(
    warm_student: &QualityModel,
    ctx: &mut Ctx,
    frame_dim: usize,
    video_dim: usize,
) -> Result<QualityModel> {
    let cfg = ctx.cfg;
    let mut teacher = warm_student.clone();
    let round_iters = cfg.warmup_iters + cfg.ssl_iters;

    for round in 0..cfg.ns_rounds {
        let pseudo: Vec<f64> = ctx
            .unlabelled
            .iter()
            .map(|r| teacher.predict(r, Augment::None, &ctx.aspec))
            .collect::<Result<_>>()?;
        ctx.refreshes.push(RefreshLog {
            iteration: round * round_iters,
            pair_count: pseudo.len(),
            rank_accuracy: None,
        });

        // (record, target, view, is_pseudo)
        let union: Vec<(&VideoRecord, f64, Augment, bool)> = ctx
            .labelled
            .iter()
            .map(|&(r, y)| (r, y, ctx.weak_view, false))
            .chain(
                ctx.unlabelled
                    .iter()
                    .zip(&pseudo)
                    .map(|(&r, &y)| (r, y, ctx.strong_view, true)),
            )
            .collect();

        let mut rng = stream_rng(cfg.seed, streams::NS_REINIT + round as u64);
        let mut student =
            QualityModel::new(cfg.mode, frame_dim, video_dim, cfg.widths, &mut rng)?;
        let mut opt = ModelOptimizer::new(&student, cfg.lr0, cfg.lr_decay, cfg.momentum);

        for _ in 0..round_iters {
            let batch = sample_from(&union, ctx.batch, &mut ctx.rng_lab);
            let mut grads = ModelGrads::zeros_like(&student);
            let mut ls = 0.0;
            let mut lu = 0.0;
            for (rec, target, view, is_pseudo) in batch {
                let term =
                    supervised_loss(&student, &[(rec, target)], view, &ctx.aspec, &mut grads)?;
                if is_pseudo {
                    lu += term;
                } else {
                    ls += term;
                }
            }
            opt.step(&mut student, &grads)?;
            // Pseudo-labelled members train at weight 1 here, so the logged
            // total is ls + lu rather than ls + lambda*lu.
            ctx.losses.push(IterLoss {
                supervised: ls,
                unsupervised: lu,
                total: ls + lu,
            });
        }
        teacher = student;
    }
    Ok(teacher)
}

/// Trains per `cfg.method` on the given split and returns the full report.
pub fn train(records: &[VideoRecord], split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = SplitData::resolve(records, split)?;
    if data.labelled.is_empty() {
        return Err(Error::Training("labelled set is empty".into()));
    }
    let batch = cfg.effective_batch(data.labelled.len());
    if batch == 0 {
        return Err(Error::Training("batch size is zero".into()));
    }
    let (frame_dim, video_dim) = corpus_dims(records)?;
    let video_dim = video_dim.unwrap_or(0);

    let aspec = AugmentationSpec {
        strong_fps: cfg.strong_fps,
        weak_divisor: cfg.weak_divisor,
    };
    aspec.validate()?;
    let (weak_view, strong_view) = if cfg.use_augmentation {
        (Augment::Weak, Augment::Strong)
    } else {
        (Augment::None, Augment::None)
    };

    let diag_mos = {
        let all: Option<Vec<f64>> = data
            .unlabelled
            .iter()
            .map(|r| r.diagnostic_mos())
            .collect();
        all
    };

    let mut ctx = Ctx {
        labelled: data.labelled,
        unlabelled: data.unlabelled,
        cfg,
        aspec,
        weak_view,
        strong_view,
        batch,
        rng_lab: stream_rng(cfg.seed, streams::LABELLED),
        rng_unlab: stream_rng(cfg.seed, streams::UNLABELLED),
        losses: Vec::with_capacity(cfg.warmup_iters + cfg.ssl_iters),
        refreshes: Vec::new(),
        diag_mos,
    };

    let mut init_rng = stream_rng(cfg.seed, streams::MODEL_INIT);
    let mut student = QualityModel::new(cfg.mode, frame_dim, video_dim, cfg.widths, &mut init_rng)?;
    let mut opt = ModelOptimizer::new(&student, cfg.lr0, cfg.lr_decay, cfg.momentum);

    for _ in 0..cfg.warmup_iters {
        let ls = supervised_step(&mut student, &mut opt, &mut ctx)?;
        ctx.log(ls, 0.0, cfg.lambda);
    }
    let warmup_student = student.clone();

    let mut teacher_out = None;
    match cfg.method {
        Method::Supervised => {}
        Method::Lpr => {
            let mut teacher = student.clone();
            if cfg.use_rank {
                lpr_phase(&mut student, &mut teacher, &mut opt, &mut ctx)?;
            } else {
                pseudo_label_phase(
                    &mut student,
                    Some(&mut teacher),
                    LabelSource::TeacherEachRefresh,
                    &mut opt,
                    &mut ctx,
                )?;
            }
            teacher_out = Some(teacher);
        }
        Method::Pl => {
            pseudo_label_phase(
                &mut student,
                None,
                LabelSource::SelfEachRefresh,
                &mut opt,
                &mut ctx,
            )?;
        }
        Method::Mt => {
            let mut teacher = student.clone();
            pseudo_label_phase(
                &mut student,
                Some(&mut teacher),
                LabelSource::TeacherEachIter,
                &mut opt,
                &mut ctx,
            )?;
            teacher_out = Some(teacher);
        }
        Method::FmStar => {
            let mut teacher = student.clone();
            pseudo_label_phase(
                &mut student,
                Some(&mut teacher),
                LabelSource::TeacherEachRefresh,
                &mut opt,
                &mut ctx,
            )?;
            teacher_out = Some(teacher);
        }
        Method::Ns => {
            student = noisy_student_rounds(&student, &mut ctx, frame_dim, video_dim)?;
        }
    }

    Ok(TrainReport {
        method: cfg.method,
        seed: cfg.seed,
        losses: ctx.losses,
        refreshes: ctx.refreshes,
        warmup_student,
        student,
        teacher: teacher_out,
        wall_ms: start.elapsed().as_millis() as u64,
        config: cfg.clone(),
    })
}
