//! Quality predictors composed from a frame mapper `f` and a regressor `g`.
//!
//! Three variants share one type: a frame-level model (average the mapped
//! frame features, regress), a video-level model (regress the whole-video
//! feature directly), and a hybrid that concatenates both. The regressor
//! ends in a sigmoid, so predictions live strictly in (0,1).

mod augment;

pub use augment::{
    select_frames, strong_indices, temporal_average, weak_indices, Augment, AugmentationSpec,
};

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::VideoRecord;
use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::nnet::{
    checkpoint, ema_update, sgd_step, Activation, DenseNet, ForwardCache, NetGrads, OptimizerState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Frame,
    Video,
    Hybrid,
}

impl ModelMode {
    pub fn name(self) -> &'static str {
        match self {
            ModelMode::Frame => "frame",
            ModelMode::Video => "video",
            ModelMode::Hybrid => "hybrid",
        }
    }
}

/// Layer widths for the two networks. `f` is `D -> f_hidden.0 (relu) ->
/// f_hidden.1 (sigmoid)`; `g` is `in -> g_hidden (relu) -> 1 (sigmoid)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelWidths {
    pub f_hidden: [usize; 2],
    pub g_hidden: usize,
}

impl Default for ModelWidths {
    fn default() -> Self {
        ModelWidths {
            f_hidden: [128, 128],
            g_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub mode: ModelMode,
    /// Frame mapper; absent in video mode.
    pub f: Option<DenseNet>,
    /// Regressor onto the quality score.
    pub g: DenseNet,
    frame_dim: usize,
    video_dim: usize,
}

impl QualityModel {
    /// Builds a model for the given feature dimensions. `f` draws its
    /// parameters first, then `g`, from the supplied RNG.
    pub fn new(
        mode: ModelMode,
        frame_dim: usize,
        video_dim: usize,
        widths: ModelWidths,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let f = match mode {
            ModelMode::Video => None,
            ModelMode::Frame | ModelMode::Hybrid => {
                if frame_dim == 0 {
                    return Err(Error::Config("frame mode needs frame_dim > 0".into()));
                }
                Some(DenseNet::new(
                    &[frame_dim, widths.f_hidden[0], widths.f_hidden[1]],
                    &[Activation::Relu, Activation::Sigmoid],
                    rng,
                ))
            }
        };
        let g_in = match mode {
            ModelMode::Frame => widths.f_hidden[1],
            ModelMode::Video => video_dim,
            ModelMode::Hybrid => widths.f_hidden[1] + video_dim,
        };
        if g_in == 0 {
            return Err(Error::Config("regressor input dimension is zero".into()));
        }
        let g = DenseNet::new(
            &[g_in, widths.g_hidden, 1],
            &[Activation::Relu, Activation::Sigmoid],
            rng,
        );
        Ok(QualityModel {
            mode,
            f,
            g,
            frame_dim,
            video_dim,
        })
    }

    pub fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    pub fn video_dim(&self) -> usize {
        self.video_dim
    }

    fn regressor_input(&self, record: &VideoRecord, z: Option<Vec<f64>>) -> Result<Vec<f64>> {
        match self.mode {
            ModelMode::Frame => Ok(z.expect("frame mode computed z")),
            ModelMode::Video => {
                let t = record
                    .video_feat()
                    .ok_or_else(|| Error::record(&record.id, "video-level features required"))?;
                Ok(t.to_vec())
            }
            ModelMode::Hybrid => {
                let t = record
                    .video_feat()
                    .ok_or_else(|| Error::record(&record.id, "video-level features required"))?;
                let mut u = z.expect("hybrid mode computed z");
                u.extend_from_slice(t);
                Ok(u)
            }
        }
    }

    /// Scores one record under the given temporal view. In video mode the
    /// augmentation is a no-op by construction.
    pub fn predict(
        &self,
        record: &VideoRecord,
        augment: Augment,
        spec: &AugmentationSpec,
    ) -> Result<f64> {
        let z = match &self.f {
            None => None,
            Some(f) => {
                let selected = select_frames(record.frames(), record.fps(), augment, spec);
                let mapped = f.infer(&selected)?;
                Some(temporal_average(&mapped)?)
            }
        };
        let u = self.regressor_input(record, z)?;
        let out = self.g.infer(&Matrix::from_row(&u))?;
        Ok(out.row(0)[0])
    }

    /// Like [`QualityModel::predict`] but keeps the activations needed to
    /// backpropagate through the prediction.
    pub fn predict_traced(
        &self,
        record: &VideoRecord,
        augment: Augment,
        spec: &AugmentationSpec,
    ) -> Result<(f64, Trace)> {
        let (f_cache, z) = match &self.f {
            None => (None, None),
            Some(f) => {
                let selected = select_frames(record.frames(), record.fps(), augment, spec);
                let cache = f.forward(selected)?;
                let z = temporal_average(cache.output())?;
                (Some(cache), Some(z))
            }
        };
        let u = self.regressor_input(record, z)?;
        let g_cache = self.g.forward(Matrix::from_row(&u))?;
        let q = g_cache.output().row(0)[0];
        Ok((q, Trace { f: f_cache, g: g_cache }))
    }

    /// Accumulates `d(loss)/d(params)` into `grads` given `dq = d(loss)/dq`.
    pub fn backprop(&self, trace: &Trace, dq: f64, grads: &mut ModelGrads) {
        let g_out_grad = Matrix::from_vec(1, 1, vec![dq]);
        let du = self.g.backward(&trace.g, &g_out_grad, &mut grads.g);
        if let (Some(f), Some(f_cache), Some(f_grads)) = (&self.f, &trace.f, grads.f.as_mut()) {
            let n = f_cache.output().rows();
            let h = f.output_dim();
            // The regressor input starts with z = mean of mapped frames, so
            // each frame receives du[0..h] / n.
            let mut frame_grad = Matrix::zeros(n, h);
            let inv = 1.0 / n as f64;
            for r in 0..n {
                let row = frame_grad.row_mut(r);
                for j in 0..h {
                    row[j] = du.row(0)[j] * inv;
                }
            }
            f.backward(f_cache, &frame_grad, f_grads);
        }
    }

    /// Flat parameter count across `f` and `g`.
    pub fn param_count(&self) -> usize {
        self.f.as_ref().map_or(0, |f| f.param_count()) + self.g.param_count()
    }

    pub fn iter_params(&self) -> impl Iterator<Item = f64> + '_ {
        self.f
            .iter()
            .flat_map(|f| f.iter_params())
            .chain(self.g.iter_params())
    }

    pub fn get_param(&self, idx: usize) -> f64 {
        self.iter_params().nth(idx).expect("parameter index in range")
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let nf = self.f.as_ref().map_or(0, |f| f.param_count());
        if idx < nf {
            self.f.as_mut().unwrap().set_param(idx, value);
        } else {
            self.g.set_param(idx - nf, value);
        }
    }

    pub fn params_equal(&self, other: &QualityModel) -> bool {
        self.param_count() == other.param_count()
            && self.iter_params().zip(other.iter_params()).all(|(a, b)| a == b)
    }

    /// Writes the model checkpoint: a mode/dimension header followed by the
    /// `f` (if present) and `g` networks in the nnet text format.
    pub fn save<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "qmodel {} {} {} {}",
            self.mode.name(),
            self.frame_dim,
            self.video_dim,
            self.f.is_some() as u8
        )?;
        if let Some(f) = &self.f {
            checkpoint::write_net(f, out)?;
        }
        checkpoint::write_net(&self.g, out)
    }

    pub fn load<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut header = String::new();
        input
            .read_line(&mut header)
            .map_err(|e| Error::Checkpoint(format!("read failure: {e}")))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "qmodel" {
            return Err(Error::Checkpoint(format!("bad model header `{}`", header.trim())));
        }
        let mode = match parts[1] {
            "frame" => ModelMode::Frame,
            "video" => ModelMode::Video,
            "hybrid" => ModelMode::Hybrid,
            other => return Err(Error::Checkpoint(format!("unknown mode `{other}`"))),
        };
        let frame_dim: usize = parts[2]
            .parse()
            .map_err(|_| Error::Checkpoint("bad frame dim".into()))?;
        let video_dim: usize = parts[3]
            .parse()
            .map_err(|_| Error::Checkpoint("bad video dim".into()))?;
        let has_f = parts[4] == "1";
        let f = if has_f {
            Some(checkpoint::read_net(input)?)
        } else {
            None
        };
        let g = checkpoint::read_net(input)?;
        Ok(QualityModel {
            mode,
            f,
            g,
            frame_dim,
            video_dim,
        })
    }
}

/// Activations retained by [`QualityModel::predict_traced`].
#[derive(Debug)]
pub struct Trace {
    f: Option<ForwardCache>,
    g: ForwardCache,
}

/// Gradient buffers shaped like a [`QualityModel`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub f: Option<NetGrads>,
    pub g: NetGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &QualityModel) -> Self {
        ModelGrads {
            f: model.f.as_ref().map(NetGrads::zeros_like),
            g: NetGrads::zeros_like(&model.g),
        }
    }

    pub fn add_scaled(&mut self, other: &ModelGrads, scale: f64) {
        if let (Some(a), Some(b)) = (self.f.as_mut(), other.f.as_ref()) {
            a.add_scaled(b, scale);
        }
        self.g.add_scaled(&other.g, scale);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.f
            .iter()
            .flat_map(|f| f.iter())
            .chain(self.g.iter())
    }
}

/// Paired optimizer states for `f` and `g`, stepped together so both share
/// the learning-rate schedule.
#[derive(Debug, Clone)]
pub struct ModelOptimizer {
    pub f: Option<OptimizerState>,
    pub g: OptimizerState,
}

impl ModelOptimizer {
    pub fn new(model: &QualityModel, lr0: f64, decay: f64, momentum: f64) -> Self {
        ModelOptimizer {
            f: model
                .f
                .as_ref()
                .map(|_| OptimizerState::new(lr0, decay, momentum)),
            g: OptimizerState::new(lr0, decay, momentum),
        }
    }

    pub fn step(&mut self, model: &mut QualityModel, grads: &ModelGrads) -> Result<()> {
        if let (Some(f), Some(fg), Some(fs)) = (model.f.as_mut(), grads.f.as_ref(), self.f.as_mut())
        {
            sgd_step(f, fg, fs)?;
        }
        sgd_step(&mut model.g, &grads.g, &mut self.g)
    }

    pub fn iteration(&self) -> u64 {
        self.g.iteration
    }
}

/// EMA update of every teacher parameter toward the student.
pub fn model_ema(teacher: &mut QualityModel, student: &QualityModel, alpha: f64) -> Result<()> {
    match (&mut teacher.f, &student.f) {
        (Some(tf), Some(sf)) => ema_update(tf, sf, alpha)?,
        (None, None) => {}
        _ => {
            return Err(Error::Training(
                "teacher/student mode mismatch in EMA update".into(),
            ))
        }
    }
    ema_update(&mut teacher.g, &student.g, alpha)
}
