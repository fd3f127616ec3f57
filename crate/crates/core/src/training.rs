//! Value dataset construction and value-head training.
//!
//! Each training tuple `(q, S, y)` contributes one squared-error term per
//! step prefix `S^(1:t)`, `t = 1..T`. The answer token is part of the last
//! prefix; no separate term is added for it.
//!
//! The UVM objective averages the squared error over the `2m` signed one-hot
//! indices. Because `±e_i` cancel in the cross term it decomposes as
//!
//! ```text
//! (x·b − y)² + (1/m)·Σ_i (x·M·e_i)²,   M = u·W + p0·W0
//! ```
//!
//! which is what [`uvm_loss_gradient`] differentiates. Only `b` and `W`
//! receive gradients: `W0` is frozen and the encoder is not trainable here,
//! so the stop-gradient toward the backbone holds trivially. An encoder with
//! learnable parameters would have to block the uncertainty-branch gradient
//! explicitly.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{AnswerChecker, Generator, PartialPath, PrefixEncoder, QuestionId, ValueModel};
use crate::rng::{self, Stream};
use crate::uvm_head::{IndexDistribution, Representation, UvmHead, ValuePosterior};

/// One `(q, S, y)` tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueExample {
    pub question_id: QuestionId,
    pub path: PartialPath,
    pub label: u8,
    /// The generator hit the step cap without producing an answer (label is 0).
    #[serde(default)]
    pub incomplete: bool,
}

/// Line-delimited dataset record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub question_id: QuestionId,
    pub steps: Vec<String>,
    pub answer: Option<u32>,
    pub label: u8,
}

impl From<&ValueExample> for DatasetRecord {
    fn from(e: &ValueExample) -> Self {
        DatasetRecord {
            question_id: e.question_id,
            steps: e.path.steps.iter().map(ToString::to_string).collect(),
            answer: e.path.answer.map(|a| a.0),
            label: e.label,
        }
    }
}

impl TryFrom<DatasetRecord> for ValueExample {
    type Error = Error;

    fn try_from(r: DatasetRecord) -> Result<Self> {
        if r.label > 1 {
            return Err(Error::InvalidArgument(format!("label must be 0 or 1, got {}", r.label)));
        }
        let steps = r.steps.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
        let path = PartialPath {
            question_id: r.question_id,
            steps,
            answer: r.answer.map(crate::path::Answer),
            stalled: false,
        };
        Ok(ValueExample {
            question_id: r.question_id,
            incomplete: !path.is_complete(),
            path,
            label: r.label,
        })
    }
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[ValueExample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in examples {
        serde_json::to_writer(&mut w, &DatasetRecord::from(e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<ValueExample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    std::io::BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|line| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<DatasetRecord>(&line)?.try_into()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    /// Adam with decoupled weight decay.
    AdamW {
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl Optimizer {
    pub fn adamw() -> Self {
        Optimizer::AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub paths_per_question: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Step cap used while sampling dataset paths.
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            paths_per_question: 50,
            epochs: 1,
            batch_size: 32,
            learning_rate: 1e-2,
            optimizer: Optimizer::adamw(),
            max_steps: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths_per_question == 0 || self.batch_size == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "paths_per_question, batch_size and max_steps must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Samples `n` rollouts per question and labels each by its final answer.
///
/// Rollouts that hit `max_steps` without an answer are kept with label 0 and
/// flagged `incomplete`. Each question draws from its own derived stream, so
/// the result does not depend on thread count.
pub fn build_value_dataset<G, C>(
    generator: &G,
    checker: &C,
    questions: &[QuestionId],
    n: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<ValueExample>>
where
    G: Generator + ?Sized,
    C: AnswerChecker + ?Sized,
{
    if n == 0 || max_steps == 0 {
        return Err(Error::InvalidArgument("n and max_steps must be positive".into()));
    }
    let per_question: Vec<Vec<ValueExample>> = questions
        .par_iter()
        .map(|&q| {
            let mut rng = rng::derive_stream(seed, &[q.0]);
            (0..n)
                .map(|_| {
                    let path = rollout(generator, q, max_steps, &mut rng)?;
                    let complete = path.is_complete();
                    let label = if complete { checker.check(&path)? } else { 0 };
                    Ok(ValueExample {
                        question_id: q,
                        path,
                        label,
                        incomplete: !complete,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_question.into_iter().flatten().collect())
}

fn rollout<G: Generator + ?Sized>(
    generator: &G,
    q: QuestionId,
    max_steps: usize,
    rng: &mut Stream,
) -> Result<PartialPath> {
    let mut path = PartialPath::root(q);
    while !path.is_finished() && path.len() < max_steps {
        path = match generator.step(&path, rng) {
            Ok(p) => p,
            Err(_) => path.into_stalled(),
        };
    }
    Ok(path)
}

/// Prefix representations `x_1..x_T` of an example, plus its label.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub prefixes: Vec<Representation>,
    pub label: f64,
}

pub fn encode_example<E: PrefixEncoder + ?Sized>(example: &ValueExample, encoder: &E) -> Result<EncodedExample> {
    let prefixes = (1..=example.path.len())
        .map(|t| encoder.encode(&example.path.prefix(t)))
        .collect::<Result<_>>()?;
    Ok(EncodedExample {
        prefixes,
        label: example.label as f64,
    })
}

pub fn encode_dataset<E: PrefixEncoder + ?Sized>(dataset: &[ValueExample], encoder: &E) -> Result<Vec<EncodedExample>> {
    dataset.par_iter().map(|e| encode_example(e, encoder)).collect()
}

/// `Σ_t (mean(x_t) − y)²`.
pub fn ovm_loss_encoded(head: &UvmHead, example: &EncodedExample) -> Result<f64> {
    example.prefixes.iter().try_fold(0.0, |acc, x| {
        let r = head.mean_value(x)? - example.label;
        Ok(acc + r * r)
    })
}

/// `Σ_t (1/2m)·Σ_{i=1..2m} (v(x_t, e_i) − y)²`, enumerating every signed one-hot.
pub fn uvm_loss_encoded(head: &UvmHead, example: &EncodedExample) -> Result<f64> {
    let support = IndexDistribution::coordinate_support(head.m());
    let scale = 1.0 / support.len() as f64;
    example.prefixes.iter().try_fold(0.0, |acc, x| {
        let inner = support.iter().try_fold(0.0, |s, e| {
            let r = head.posterior_value(x, e)? - example.label;
            Ok::<_, Error>(s + r * r)
        })?;
        Ok(acc + scale * inner)
    })
}

pub fn ovm_loss<E: PrefixEncoder + ?Sized>(head: &UvmHead, example: &ValueExample, encoder: &E) -> Result<f64> {
    ovm_loss_encoded(head, &encode_example(example, encoder)?)
}

pub fn uvm_loss<E: PrefixEncoder + ?Sized>(head: &UvmHead, example: &ValueExample, encoder: &E) -> Result<f64> {
    uvm_loss_encoded(head, &encode_example(example, encoder)?)
}

/// Gradient over the trainable parameters only. There is deliberately no
/// field for the prior matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGradient {
    pub mean_weights: Vec<f64>,
    /// Row-major `d × m`.
    pub posterior_matrix: Vec<f64>,
}

impl HeadGradient {
    fn zeros(d: usize, m: usize) -> Self {
        HeadGradient {
            mean_weights: vec![0.0; d],
            posterior_matrix: vec![0.0; d * m],
        }
    }
}

/// Gradient of the mean UVM loss over `batch`, plus that mean loss.
pub fn uvm_loss_gradient_encoded(head: &UvmHead, batch: &[EncodedExample]) -> Result<(HeadGradient, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient of an empty batch".into()));
    }
    let (d, m) = (head.d(), head.m());
    let u = head.config().u;
    let mut grad = HeadGradient::zeros(d, m);
    let mut loss = 0.0;
    for ex in batch {
        for x in &ex.prefixes {
            let post = head.project(x)?;
            let resid = post.mean - ex.label;
            let spread: f64 = post.loading.iter().map(|l| l * l).sum();
            loss += resid * resid + spread / m as f64;
            let xs = x.as_slice();
            for (g, xk) in grad.mean_weights.iter_mut().zip(xs) {
                *g += 2.0 * resid * xk;
            }
            // d/dW_kj of (1/m)·Σ_j (x·M)_j² = (2u/m)·x_k·(x·M)_j
            let c = 2.0 * u / m as f64;
            for (row, xk) in grad.posterior_matrix.chunks_exact_mut(m).zip(xs) {
                for (g, l) in row.iter_mut().zip(&post.loading) {
                    *g += c * xk * l;
                }
            }
        }
    }
    let n = batch.len() as f64;
    grad.mean_weights.iter_mut().for_each(|g| *g /= n);
    grad.posterior_matrix.iter_mut().for_each(|g| *g /= n);
    Ok((grad, loss / n))
}

pub fn uvm_loss_gradient<E: PrefixEncoder + ?Sized>(
    head: &UvmHead,
    batch: &[ValueExample],
    encoder: &E,
) -> Result<HeadGradient> {
    let encoded = batch
        .iter()
        .map(|e| encode_example(e, encoder))
        .collect::<Result<Vec<_>>>()?;
    Ok(uvm_loss_gradient_encoded(head, &encoded)?.0)
}

/// One loss-trace row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub head: UvmHead,
    pub loss_trace: Vec<LossRecord>,
}

impl TrainOutcome {
    /// Mean batch loss per epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        let epochs = self.loss_trace.iter().map(|r| r.epoch + 1).max().unwrap_or(0);
        (0..epochs)
            .map(|e| {
                let v: Vec<f64> = self.loss_trace.iter().filter(|r| r.epoch == e).map(|r| r.loss).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect()
    }

    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.loss_trace {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn apply_update(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    opt: Optimizer,
) {
    match opt {
        Optimizer::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
        Optimizer::AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
        } => {
            let bc1 = 1.0 - beta1.powi(state.t);
            let bc2 = 1.0 - beta2.powi(state.t);
            for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * weight_decay * *p;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
    }
}

/// Trains on pre-encoded examples. Deterministic in `cfg.seed`.
pub fn train_uvm_encoded(head: &UvmHead, data: &[EncodedExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut head = head.clone();
    let (d, m) = (head.d(), head.m());
    let mut rng = rng::stream(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::new();
    let mut state_b = AdamState { m: vec![0.0; d], v: vec![0.0; d], t: 0 };
    let mut state_w = AdamState { m: vec![0.0; d * m], v: vec![0.0; d * m], t: 0 };
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (grad, loss) = uvm_loss_gradient_encoded(&head, &batch)?;
            if !loss.is_finite() || grad.mean_weights.iter().chain(&grad.posterior_matrix).any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, batch: bi, loss });
            }
            trace.push(LossRecord { epoch, batch: bi, loss });
            state_b.t += 1;
            state_w.t += 1;
            let (b, w) = head.params_mut();
            apply_update(b, &grad.mean_weights, &mut state_b, cfg.learning_rate, cfg.optimizer);
            apply_update(w, &grad.posterior_matrix, &mut state_w, cfg.learning_rate, cfg.optimizer);
            if b.iter().chain(w.iter()).any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, batch: bi, loss: f64::NAN });
            }
        }
    }
    Ok(TrainOutcome { head, loss_trace: trace })
}

/// Encodes `dataset` once and trains the head on it.
pub fn train_uvm<E: PrefixEncoder + ?Sized>(
    head: &UvmHead,
    dataset: &[ValueExample],
    encoder: &E,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    train_uvm_encoded(head, &encode_dataset(dataset, encoder)?, cfg)
}

/// The outcome value model obtained from a trained head by fixing the zero
/// index. Its posterior is a point mass at the mean.
#[derive(Clone, Copy)]
pub struct OvmScorer<'a, E: ?Sized> {
    head: &'a UvmHead,
    encoder: &'a E,
}

pub fn derive_ovm<'a, E: PrefixEncoder + ?Sized>(head: &'a UvmHead, encoder: &'a E) -> OvmScorer<'a, E> {
    OvmScorer { head, encoder }
}

impl<E: PrefixEncoder + ?Sized> OvmScorer<'_, E> {
    pub fn score(&self, x: &Representation) -> Result<f64> {
        self.head.mean_value(x)
    }
}

impl<E: PrefixEncoder + ?Sized> ValueModel for OvmScorer<'_, E> {
    fn posterior(&self, path: &PartialPath) -> Result<ValuePosterior> {
        Ok(ValuePosterior::point(self.score(&self.encoder.encode(path)?)?))
    }
}
