//! CNN-rec and NN-rec.
//!
//! Both embed the user and each of the last `j` songs, build a hidden-layer
//! input, then run `affine → ReLU → dropout → affine → softmax` over the
//! catalog. CNN-rec stacks the song embeddings into a `j × d` matrix and
//! passes it through a width-`w` convolution with ReLU, flattening the
//! `p × m` result position-major before appending the user embedding.
//! NN-rec appends the raw song embeddings instead.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::data::TrainingExample;
use crate::error::{Error, Result};
use crate::models::hyper::{Architecture, Hyperparams};
use crate::nn::adagrad::{AdagradConfig, AdagradState};
use crate::nn::init::glorot_init;
use crate::nn::matrix::Matrix;
use crate::nn::ops::{
    affine, affine_backward, conv1d, conv1d_backward, dropout, embed_lookup, relu, relu_backward,
    softmax, softmax_xent, softmax_xent_backward, ConvFilters, Mode, SparseRows,
};
use crate::recommender::Recommender;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralParams {
    /// `N × d`, shared by every context position.
    pub song_emb: Matrix,
    /// `U × d`.
    pub user_emb: Matrix,
    /// `m` filters of `w × d`; CNN-rec only.
    pub conv: Option<ConvFilters>,
    /// `h × hidden_input_len`.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `N × h`.
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl NeuralParams {
    fn zeros_like(&self) -> NeuralGrads {
        NeuralGrads {
            song_emb: SparseRows::new(self.song_emb.cols()),
            user_emb: SparseRows::new(self.user_emb.cols()),
            conv: self.conv.as_ref().map(|c| {
                ConvFilters::zeros(c.n_filters(), c.width, c.depth(), c.stride)
            }),
            w1: Matrix::zeros(self.w1.rows(), self.w1.cols()),
            b1: vec![0.0; self.b1.len()],
            w2: Matrix::zeros(self.w2.rows(), self.w2.cols()),
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// Named tensors in a fixed order: name, rows, cols, values.
    pub fn tensors(&self) -> Vec<(&'static str, usize, usize, &[f64])> {
        let mut out = vec![
            ("song_emb", self.song_emb.rows(), self.song_emb.cols(), self.song_emb.as_slice()),
            ("user_emb", self.user_emb.rows(), self.user_emb.cols(), self.user_emb.as_slice()),
        ];
        if let Some(c) = &self.conv {
            out.push(("conv_w", c.weights.rows(), c.weights.cols(), c.weights.as_slice()));
            out.push(("conv_b", 1, c.bias.len(), &c.bias));
        }
        out.push(("w1", self.w1.rows(), self.w1.cols(), self.w1.as_slice()));
        out.push(("b1", 1, self.b1.len(), &self.b1));
        out.push(("w2", self.w2.rows(), self.w2.cols(), self.w2.as_slice()));
        out.push(("b2", 1, self.b2.len(), &self.b2));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.song_emb.as_mut_slice(), self.user_emb.as_mut_slice()];
        if let Some(c) = &mut self.conv {
            out.push(c.weights.as_mut_slice());
            out.push(&mut c.bias);
        }
        out.push(self.w1.as_mut_slice());
        out.push(&mut self.b1);
        out.push(self.w2.as_mut_slice());
        out.push(&mut self.b2);
        out
    }

    /// All parameters flattened in [`tensors`](Self::tensors) order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, _, _, v)| v.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.3.len()).sum();
        if flat.len() != total {
            return Err(Error::Shape(format!("{} values for {total} parameters", flat.len())));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|v| v.is_finite()))
    }
}

/// Gradient of the loss with respect to [`NeuralParams`]; embeddings are
/// row-sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralGrads {
    pub song_emb: SparseRows,
    pub user_emb: SparseRows,
    pub conv: Option<ConvFilters>,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl NeuralGrads {
    fn scale(&mut self, s: f64) {
        self.song_emb.scale(s);
        self.user_emb.scale(s);
        if let Some(c) = &mut self.conv {
            c.weights.scale(s);
            c.bias.iter_mut().for_each(|v| *v *= s);
        }
        self.w1.scale(s);
        self.b1.iter_mut().for_each(|v| *v *= s);
        self.w2.scale(s);
        self.b2.iter_mut().for_each(|v| *v *= s);
    }

    /// Dense flattening matching [`NeuralParams::to_flat`].
    pub fn to_flat(&self, n_songs: usize, n_users: usize) -> Vec<f64> {
        let mut out = self.song_emb.to_dense(n_songs).into_vec();
        out.extend(self.user_emb.to_dense(n_users).into_vec());
        if let Some(c) = &self.conv {
            out.extend_from_slice(c.weights.as_slice());
            out.extend_from_slice(&c.bias);
        }
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(&self.b2);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralOptim {
    pub song_emb: AdagradState,
    pub user_emb: AdagradState,
    pub conv_w: Option<AdagradState>,
    pub conv_b: Option<AdagradState>,
    pub w1: AdagradState,
    pub b1: AdagradState,
    pub w2: AdagradState,
    pub b2: AdagradState,
}

impl NeuralOptim {
    fn new(p: &NeuralParams, cfg: AdagradConfig) -> Self {
        let st = |n: usize| AdagradState::new(n, cfg);
        Self {
            song_emb: st(p.song_emb.as_slice().len()),
            user_emb: st(p.user_emb.as_slice().len()),
            conv_w: p.conv.as_ref().map(|c| st(c.weights.as_slice().len())),
            conv_b: p.conv.as_ref().map(|c| st(c.bias.len())),
            w1: st(p.w1.as_slice().len()),
            b1: st(p.b1.len()),
            w2: st(p.w2.as_slice().len()),
            b2: st(p.b2.len()),
        }
    }

    /// Accumulators in the same order as [`NeuralParams::tensors`].
    pub fn accumulators(&self) -> Vec<&[f64]> {
        let mut out = vec![self.song_emb.accum.as_slice(), self.user_emb.accum.as_slice()];
        if let (Some(w), Some(b)) = (&self.conv_w, &self.conv_b) {
            out.push(&w.accum);
            out.push(&b.accum);
        }
        out.extend([
            self.w1.accum.as_slice(),
            self.b1.accum.as_slice(),
            self.w2.accum.as_slice(),
            self.b2.accum.as_slice(),
        ]);
        out
    }

    pub(crate) fn accumulators_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.song_emb.accum, &mut self.user_emb.accum];
        if let (Some(w), Some(b)) = (&mut self.conv_w, &mut self.conv_b) {
            out.push(&mut w.accum);
            out.push(&mut b.accum);
        }
        out.extend([
            &mut self.w1.accum,
            &mut self.b1.accum,
            &mut self.w2.accum,
            &mut self.b2.accum,
        ]);
        out
    }
}

/// Intermediate values of one forward pass, kept for backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub stacked: Matrix,
    pub conv_out: Option<Matrix>,
    pub hidden_in: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub dropout_mask: Vec<f64>,
    pub hidden_out: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralRecommender {
    pub arch: Architecture,
    pub hyper: Hyperparams,
    pub n_songs: usize,
    pub n_users: usize,
    pub params: NeuralParams,
    pub optim: NeuralOptim,
}

impl NeuralRecommender {
    /// Glorot-initialized weights, zero biases, zero Adagrad accumulators.
    pub fn new(
        arch: Architecture,
        hyper: Hyperparams,
        n_songs: usize,
        n_users: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        hyper.validate(arch)?;
        if n_songs == 0 || n_users == 0 {
            return Err(Error::InvalidArgument("catalog and user base must be non-empty".into()));
        }
        let d = hyper.d;
        let song_emb = glorot_init(d, n_songs, rng)?;
        let user_emb = glorot_init(d, n_users, rng)?;
        let conv = match arch {
            Architecture::Cnnrec => {
                let mut c = ConvFilters::zeros(hyper.m, hyper.w, d, hyper.stride);
                c.weights = glorot_init(hyper.w * d, hyper.m, rng)?;
                Some(c)
            }
            Architecture::Nnrec => None,
        };
        let hin = hyper.hidden_input_len(arch)?;
        let w1 = glorot_init(hin, hyper.h, rng)?;
        let w2 = glorot_init(hyper.h, n_songs, rng)?;
        let params = NeuralParams {
            song_emb,
            user_emb,
            conv,
            w1,
            b1: vec![0.0; hyper.h],
            w2,
            b2: vec![0.0; n_songs],
        };
        let optim = NeuralOptim::new(&params, AdagradConfig { lr: hyper.lr, eps: hyper.adagrad_eps });
        Ok(Self {
            arch,
            hyper,
            n_songs,
            n_users,
            params,
            optim,
        })
    }

    /// Rebuilds a model around existing parameters after checking every
    /// shape against `hyper`.
    pub fn from_parts(
        arch: Architecture,
        hyper: Hyperparams,
        params: NeuralParams,
        optim: Option<NeuralOptim>,
    ) -> Result<Self> {
        hyper.validate(arch)?;
        let (n_songs, d) = params.song_emb.shape();
        let n_users = params.user_emb.rows();
        let hin = hyper.hidden_input_len(arch)?;
        let mut problems = Vec::new();
        if d != hyper.d {
            problems.push(format!("song_emb width {d} != d {}", hyper.d));
        }
        if params.user_emb.cols() != hyper.d {
            problems.push("user_emb width != d".to_string());
        }
        match (&params.conv, arch) {
            (Some(c), Architecture::Cnnrec) => {
                if c.weights.shape() != (hyper.m, hyper.w * hyper.d) || c.bias.len() != hyper.m {
                    problems.push("conv filters do not match (m, w, d)".into());
                }
            }
            (None, Architecture::Nnrec) => {}
            _ => problems.push("conv layer presence does not match architecture".into()),
        }
        if params.w1.shape() != (hyper.h, hin) || params.b1.len() != hyper.h {
            problems.push(format!("w1 {:?} != ({}, {hin})", params.w1.shape(), hyper.h));
        }
        if params.w2.shape() != (n_songs, hyper.h) || params.b2.len() != n_songs {
            problems.push(format!("w2 {:?} != ({n_songs}, {})", params.w2.shape(), hyper.h));
        }
        if !problems.is_empty() {
            return Err(Error::Shape(problems.join("; ")));
        }
        let cfg = AdagradConfig { lr: hyper.lr, eps: hyper.adagrad_eps };
        let fresh = NeuralOptim::new(&params, cfg);
        let optim = match optim {
            Some(o) => {
                let ok = o.accumulators().len() == fresh.accumulators().len()
                    && o.accumulators().iter().zip(fresh.accumulators()).all(|(a, b)| a.len() == b.len());
                if !ok {
                    return Err(Error::Shape("optimizer state does not match parameters".into()));
                }
                o
            }
            None => fresh,
        };
        Ok(Self {
            arch,
            hyper,
            n_songs,
            n_users,
            params,
            optim,
        })
    }

    pub fn hidden_input_len(&self) -> usize {
        self.params.w1.cols()
    }

    fn check_query(&self, user: usize, context: &[usize]) -> Result<()> {
        if context.len() != self.hyper.j {
            return Err(Error::InvalidArgument(format!(
                "context of {} songs, model order is {}",
                context.len(),
                self.hyper.j
            )));
        }
        if user >= self.n_users {
            return Err(Error::OutOfRange { what: "users", index: user, size: self.n_users });
        }
        if let Some(&s) = context.iter().find(|&&s| s >= self.n_songs) {
            return Err(Error::OutOfRange { what: "songs", index: s, size: self.n_songs });
        }
        Ok(())
    }

    /// Runs the network. `rng` is only consulted in [`Mode::Train`].
    pub fn forward(
        &self,
        user: usize,
        context: &[usize],
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<ForwardCache> {
        self.check_query(user, context)?;
        let p = &self.params;
        let d = self.hyper.d;
        let mut stacked = Matrix::zeros(context.len(), d);
        for (row, &song) in context.iter().enumerate() {
            stacked.row_mut(row).copy_from_slice(&embed_lookup(&p.song_emb, song)?);
        }
        let user_vec = embed_lookup(&p.user_emb, user)?;

        let (conv_out, mut hidden_in) = match &p.conv {
            Some(filters) => {
                let out = conv1d(&stacked, filters)?;
                let flat = out.as_slice().to_vec();
                (Some(out), flat)
            }
            None => (None, stacked.as_slice().to_vec()),
        };
        hidden_in.extend_from_slice(&user_vec);

        let hidden_pre = affine(&p.w1, &p.b1, &hidden_in)?;
        let hidden_act = relu(&hidden_pre);
        let (hidden_out, dropout_mask) =
            dropout(&hidden_act, self.hyper.drop_probability(), rng, mode)?;
        let logits = affine(&p.w2, &p.b2, &hidden_out)?;
        Ok(ForwardCache {
            stacked,
            conv_out,
            hidden_in,
            hidden_pre,
            dropout_mask,
            hidden_out,
            logits,
        })
    }

    pub fn logits(&self, user: usize, context: &[usize]) -> Result<Vec<f64>> {
        // Eval mode never draws from the generator.
        let mut unused = SeededRng::new(0);
        Ok(self.forward(user, context, Mode::Eval, &mut unused)?.logits)
    }

    /// Next-song distribution with dropout off.
    pub fn predict_proba(&self, user: usize, context: &[usize]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(user, context)?))
    }

    /// The `k` most probable next songs, ties by ascending index.
    pub fn predict_topk(&self, user: usize, context: &[usize], k: usize) -> Result<Vec<usize>> {
        self.recommend(user, context, k)
    }

    /// Cross-entropy of one example; accumulates its gradient into `grads`.
    pub fn accumulate_gradient(
        &self,
        example: &TrainingExample,
        mode: Mode,
        rng: &mut SeededRng,
        grads: &mut NeuralGrads,
    ) -> Result<f64> {
        if example.target >= self.n_songs {
            return Err(Error::OutOfRange { what: "songs", index: example.target, size: self.n_songs });
        }
        let cache = self.forward(example.user, &example.context, mode, rng)?;
        let p = &self.params;
        let (probs, loss) = softmax_xent(&cache.logits, example.target)?;
        let g_logits = softmax_xent_backward(&probs, example.target);

        let g_hidden_out = affine_backward(&p.w2, &cache.hidden_out, &g_logits, &mut grads.w2, &mut grads.b2)?;
        let g_hidden_act: Vec<f64> = g_hidden_out
            .iter()
            .zip(&cache.dropout_mask)
            .map(|(g, m)| g * m)
            .collect();
        let g_hidden_pre = relu_backward(&cache.hidden_pre, &g_hidden_act);
        let g_hidden_in = affine_backward(&p.w1, &cache.hidden_in, &g_hidden_pre, &mut grads.w1, &mut grads.b1)?;

        let d = self.hyper.d;
        let split = g_hidden_in.len() - d;
        grads.user_emb.add(example.user, &g_hidden_in[split..]);
        let g_stacked = match (&p.conv, &cache.conv_out, &mut grads.conv) {
            (Some(filters), Some(out), Some(g_filters)) => {
                let g_out = Matrix::from_vec(out.rows(), out.cols(), g_hidden_in[..split].to_vec())?;
                conv1d_backward(&cache.stacked, filters, out, &g_out, g_filters)?
            }
            _ => Matrix::from_vec(example.context.len(), d, g_hidden_in[..split].to_vec())?,
        };
        for (row, &song) in example.context.iter().enumerate() {
            grads.song_emb.add(song, g_stacked.row(row));
        }
        Ok(loss)
    }

    /// Mean loss and mean gradient over `batch`.
    pub fn batch_gradient(
        &self,
        batch: &[TrainingExample],
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(f64, NeuralGrads)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let mut grads = self.params.zeros_like();
        let mut total = 0.0;
        for ex in batch {
            total += self.accumulate_gradient(ex, mode, rng, &mut grads)?;
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        Ok((total * scale, grads))
    }

    pub fn apply_gradient(&mut self, grads: &NeuralGrads) -> Result<()> {
        let p = &mut self.params;
        let o = &mut self.optim;
        o.song_emb.step_rows(&mut p.song_emb, &grads.song_emb)?;
        o.user_emb.step_rows(&mut p.user_emb, &grads.user_emb)?;
        if let (Some(c), Some(g), Some(sw), Some(sb)) = (&mut p.conv, &grads.conv, &mut o.conv_w, &mut o.conv_b) {
            sw.step(c.weights.as_mut_slice(), g.weights.as_slice())?;
            if self.hyper.bias {
                sb.step(&mut c.bias, &g.bias)?;
            }
        }
        o.w1.step(p.w1.as_mut_slice(), grads.w1.as_slice())?;
        o.w2.step(p.w2.as_mut_slice(), grads.w2.as_slice())?;
        if self.hyper.bias {
            o.b1.step(&mut p.b1, &grads.b1)?;
            o.b2.step(&mut p.b2, &grads.b2)?;
        }
        Ok(())
    }

    /// One Adagrad update on the batch-mean cross-entropy. Returns the
    /// pre-update mean loss.
    pub fn train_step(&mut self, batch: &[TrainingExample], rng: &mut SeededRng) -> Result<f64> {
        let (loss, grads) = self.batch_gradient(batch, Mode::Train, rng)?;
        self.apply_gradient(&grads)?;
        Ok(loss)
    }

    /// `hyper.epochs` passes over `examples`, reshuffled every epoch.
    /// `on_epoch(epoch, mean_loss, model)` runs after each epoch.
    pub fn train<F>(
        &mut self,
        examples: &[TrainingExample],
        rng: &mut SeededRng,
        mut on_epoch: F,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(usize, f64, &Self) -> Result<()>,
    {
        if examples.is_empty() {
            return Err(Error::Empty("training examples"));
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut history = Vec::with_capacity(self.hyper.epochs);
        let mut batch = Vec::with_capacity(self.hyper.batch);
        for epoch in 0..self.hyper.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(self.hyper.batch) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| examples[i].clone()));
                total += self.train_step(&batch, rng)? * chunk.len() as f64;
            }
            let mean = total / examples.len() as f64;
            if !mean.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss in epoch {epoch}")));
            }
            history.push(mean);
            on_epoch(epoch, mean, self)?;
        }
        Ok(history)
    }

    /// Mean eval-mode cross-entropy.
    pub fn mean_loss(&self, examples: &[TrainingExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("examples"));
        }
        let mut total = 0.0;
        for ex in examples {
            total += softmax_xent(&self.logits(ex.user, &ex.context)?, ex.target)?.1;
        }
        Ok(total / examples.len() as f64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuralConfig {
    arch: Architecture,
    hyper: Hyperparams,
}

fn tensor_dims(rows: usize, cols: usize, name: &str) -> Vec<usize> {
    if name.starts_with('b') || name == "conv_b" {
        vec![cols]
    } else {
        vec![rows, cols]
    }
}

impl NeuralRecommender {
    /// Parameters plus Adagrad accumulators (`adagrad.<tensor>`), so that
    /// training can resume exactly.
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let config = serde_json::to_value(NeuralConfig { arch: self.arch, hyper: self.hyper.clone() })?;
        let mut ck = Checkpoint::new(self.arch.tag(), config);
        let tensors = self.params.tensors();
        for &(name, rows, cols, values) in &tensors {
            ck.push(Tensor::new(name, tensor_dims(rows, cols, name), values.to_vec())?);
        }
        for (&(name, rows, cols, _), acc) in tensors.iter().zip(self.optim.accumulators()) {
            ck.push(Tensor::new(format!("adagrad.{name}"), tensor_dims(rows, cols, name), acc.to_vec())?);
        }
        Ok(ck)
    }

    /// Inverse of [`to_checkpoint`](Self::to_checkpoint); every tensor is
    /// checked against the shapes implied by the stored hyperparameters.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_model_type(&["cnnrec", "nnrec"])?;
        let cfg: NeuralConfig = serde_json::from_value(ck.config.clone())?;
        if cfg.arch.tag() != ck.model_type {
            return Err(Error::Checkpoint(format!(
                "model type {:?} disagrees with config architecture {:?}",
                ck.model_type,
                cfg.arch.tag()
            )));
        }
        let n_songs = ck.tensor("song_emb")?.dims.first().copied().unwrap_or(0);
        let n_users = ck.tensor("user_emb")?.dims.first().copied().unwrap_or(0);
        if n_songs == 0 || n_users == 0 {
            return Err(Error::Checkpoint("empty embedding table".into()));
        }
        // A zero-initialized model of the right shape, filled tensor by tensor.
        let mut shell = NeuralRecommender::zeros(cfg.arch, cfg.hyper, n_songs, n_users)?;
        let shapes: Vec<(&'static str, Vec<usize>)> = shell
            .params
            .tensors()
            .into_iter()
            .map(|(name, rows, cols, _)| (name, tensor_dims(rows, cols, name)))
            .collect();
        let mut flat = Vec::new();
        for (name, dims) in &shapes {
            flat.extend_from_slice(ck.expect(name, dims)?);
        }
        shell.params.set_flat(&flat)?;
        let has_optim = ck.tensors.iter().any(|t| t.name.starts_with("adagrad."));
        if has_optim {
            for ((name, dims), acc) in shapes.iter().zip(shell.optim.accumulators_mut()) {
                acc.copy_from_slice(ck.expect(&format!("adagrad.{name}"), dims)?);
            }
        }
        let expected = shapes.len() * if has_optim { 2 } else { 1 };
        if ck.tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{} tensors in checkpoint, expected {expected}",
                ck.tensors.len()
            )));
        }
        Self::from_parts(shell.arch, shell.hyper, shell.params, Some(shell.optim))
    }

    fn zeros(arch: Architecture, hyper: Hyperparams, n_songs: usize, n_users: usize) -> Result<Self> {
        hyper.validate(arch)?;
        let hin = hyper.hidden_input_len(arch)?;
        let params = NeuralParams {
            song_emb: Matrix::zeros(n_songs, hyper.d),
            user_emb: Matrix::zeros(n_users, hyper.d),
            conv: match arch {
                Architecture::Cnnrec => Some(ConvFilters::zeros(hyper.m, hyper.w, hyper.d, hyper.stride)),
                Architecture::Nnrec => None,
            },
            w1: Matrix::zeros(hyper.h, hin),
            b1: vec![0.0; hyper.h],
            w2: Matrix::zeros(n_songs, hyper.h),
            b2: vec![0.0; n_songs],
        };
        let optim = NeuralOptim::new(&params, AdagradConfig { lr: hyper.lr, eps: hyper.adagrad_eps });
        Ok(Self { arch, hyper, n_songs, n_users, params, optim })
    }
}

impl Recommender for NeuralRecommender {
    fn name(&self) -> &str {
        self.arch.tag()
    }

    fn n_items(&self) -> usize {
        self.n_songs
    }

    fn context_len(&self) -> usize {
        self.hyper.j
    }

    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        // Softmax is monotone, so logits rank exactly like probabilities
        // without underflow ties.
        out.copy_from_slice(&self.logits(user, context)?);
        Ok(())
    }
}
