//! Synthetic reasoning world.
//!
//! Each problem is a complete `branching`-ary tree of depth `depth`. A path
//! from the root to a leaf is a solution; the leaf determines the answer.
//! Every edge carries a latent quality increment. A leaf is correct when its
//! accumulated latent quality is among the top `correct_fraction` of all
//! leaves, so correct leaves cluster in subtrees.
//!
//! A step is a branch choice plus a token sampled when the step is generated,
//! so the same branch can be phrased differently. In-distribution tokens
//! reveal the sign of the edge's increment (noisily); RTN problems draw tokens
//! uniformly from the whole vocabulary instead.
//!
//! The [`Featurizer`] is the frozen encoder: a random projection of the path's
//! token histogram and depth, plus a small hash perturbation. OOD problems are
//! featurized through a fixed rotation and offset of that projection.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Answer, AnswerChecker, Generator, PartialPath, PrefixEncoder, QuestionId, Step, ValueModel};
use crate::rng::{self, derive_seed, Stream};
use crate::uvm_head::{Representation, ValuePosterior};

/// Tokens used by ordinary problems. The lower half signals a good step.
pub const REASONING_TOKENS: u16 = 16;
/// Full vocabulary, including filler tokens only RTN problems emit.
pub const VOCAB_SIZE: u16 = 32;
pub const MAX_DEPTH: usize = 8;
pub const MAX_BRANCHING: usize = 8;
pub const MAX_LEAVES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftTag {
    /// In-distribution.
    Id,
    /// Featurized through the fixed affine shift.
    Ood,
    /// Randomized tokens drawn from the full vocabulary.
    Rtn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub branching: usize,
    pub depth: usize,
    /// Fraction of leaves planted as correct (difficulty knob).
    pub correct_fraction: f64,
    /// Generator preference for children whose subtree holds a correct leaf.
    pub bias: f64,
    /// Std of the noise between an edge's latent increment and its token class.
    pub token_noise: f64,
    /// Number of distinct wrong answers incorrect leaves are spread over.
    pub wrong_answers: u32,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            branching: 4,
            depth: 6,
            correct_fraction: 0.01,
            bias: 1.0,
            token_noise: 0.5,
            wrong_answers: 4,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(2..=MAX_BRANCHING).contains(&self.branching) {
            return bad(format!("branching must be in 2..={MAX_BRANCHING}, got {}", self.branching));
        }
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return bad(format!("depth must be in 1..={MAX_DEPTH}, got {}", self.depth));
        }
        if self.leaves() > MAX_LEAVES {
            return bad(format!("{} leaves exceeds the limit of {MAX_LEAVES}", self.leaves()));
        }
        if !(self.correct_fraction > 0.0 && self.correct_fraction < 1.0) {
            return bad(format!(
                "correct_fraction must be strictly between 0 and 1, got {}",
                self.correct_fraction
            ));
        }
        if self.bias.is_nan() || !(self.token_noise >= 0.0 && self.token_noise.is_finite()) {
            return bad("bias must not be NaN and token_noise must be finite and >= 0".into());
        }
        if self.wrong_answers == 0 {
            return bad("wrong_answers must be at least 1".into());
        }
        Ok(())
    }

    pub fn leaves(&self) -> usize {
        self.branching.saturating_pow(self.depth as u32)
    }
}

/// One tree-structured problem with a planted set of correct leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProblem {
    pub question_id: QuestionId,
    pub branching: usize,
    pub depth: usize,
    pub bias: f64,
    pub shift_tag: ShiftTag,
    pub ground_truth: Answer,
    pub token_noise: f64,
    /// Latent quality increment of the edge into each node, by global node id.
    latent: Vec<f64>,
    /// Correct-leaf count of each node's subtree.
    correct_below: Vec<u32>,
    leaf_correct: Vec<bool>,
    leaf_answer: Vec<Answer>,
}

/// Offset of the first node at `depth` in breadth-first numbering.
fn level_offset(branching: usize, depth: usize) -> usize {
    (0..depth).map(|t| branching.pow(t as u32)).sum()
}

/// Samples a problem from `config`. Identical `(config, question_id, shift_tag, rng state)` give identical problems.
pub fn make_problem(
    config: &ProblemConfig,
    question_id: QuestionId,
    shift_tag: ShiftTag,
    rng: &mut Stream,
) -> Result<SyntheticProblem> {
    config.validate()?;
    let (b, depth) = (config.branching, config.depth);
    let n_nodes = level_offset(b, depth + 1);
    let leaf0 = level_offset(b, depth);
    let n_leaves = n_nodes - leaf0;

    let latent: Vec<f64> = (0..n_nodes)
        .map(|i| if i == 0 { 0.0 } else { rng.sample(StandardNormal) })
        .collect();

    // accumulated quality along each root-to-node path
    let mut score = latent.clone();
    for i in 1..n_nodes {
        score[i] += score[(i - 1) / b];
    }

    let n_correct = ((config.correct_fraction * n_leaves as f64).round() as usize).clamp(1, n_leaves - 1);
    let mut order: Vec<usize> = (0..n_leaves).collect();
    order.sort_by(|&x, &y| score[leaf0 + y].total_cmp(&score[leaf0 + x]).then(x.cmp(&y)));
    let mut leaf_correct = vec![false; n_leaves];
    for &l in &order[..n_correct] {
        leaf_correct[l] = true;
    }

    let ground_truth = Answer(rng.random_range(0..1000));
    let wrong: Vec<Answer> = (1..=config.wrong_answers)
        .map(|k| Answer(ground_truth.0 + k))
        .collect();
    let leaf_answer = leaf_correct
        .iter()
        .map(|&c| if c { ground_truth } else { wrong[rng.random_range(0..wrong.len())] })
        .collect();

    let mut correct_below = vec![0u32; n_nodes];
    for (l, &c) in leaf_correct.iter().enumerate() {
        correct_below[leaf0 + l] = c as u32;
    }
    for i in (1..n_nodes).rev() {
        let parent = (i - 1) / b;
        correct_below[parent] += correct_below[i];
    }

    Ok(SyntheticProblem {
        question_id,
        branching: b,
        depth,
        bias: config.bias,
        shift_tag,
        ground_truth,
        token_noise: config.token_noise,
        latent,
        correct_below,
        leaf_correct,
        leaf_answer,
    })
}

impl SyntheticProblem {
    pub fn leaf_count(&self) -> usize {
        self.leaf_correct.len()
    }

    pub fn correct_leaf_count(&self) -> usize {
        self.leaf_correct.iter().filter(|&&c| c).count()
    }

    /// Leaf indices (left to right) in the correct set.
    pub fn correct_leaf_set(&self) -> Vec<usize> {
        self.leaf_correct
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    pub fn is_leaf_correct(&self, leaf: usize) -> bool {
        self.leaf_correct[leaf]
    }

    /// Same tree, featurized under a different shift tag.
    pub fn with_shift_tag(&self, tag: ShiftTag) -> SyntheticProblem {
        SyntheticProblem {
            shift_tag: tag,
            ..self.clone()
        }
    }

    fn leaf0(&self) -> usize {
        level_offset(self.branching, self.depth)
    }

    fn child(&self, node: usize, c: usize) -> usize {
        node * self.branching + 1 + c
    }

    /// Global node id reached by `steps`, verifying every step against the tree.
    fn locate(&self, path: &PartialPath) -> Result<usize> {
        if path.question_id != self.question_id {
            return Err(Error::OffTree(format!(
                "path belongs to {} but the problem is {}",
                path.question_id, self.question_id
            )));
        }
        if path.len() > self.depth {
            return Err(Error::OffTree(format!(
                "{} steps exceeds depth {}",
                path.len(),
                self.depth
            )));
        }
        let mut node = 0;
        for (t, s) in path.steps.iter().enumerate() {
            if s.child as usize >= self.branching {
                return Err(Error::OffTree(format!("step {t}: child {} out of range", s.child)));
            }
            node = self.child(node, s.child as usize);
            if s.token >= self.token_space() {
                return Err(Error::OffTree(format!(
                    "step {t}: token {} outside the problem's alphabet",
                    s.token
                )));
            }
        }
        if let Some(a) = path.answer {
            if path.len() != self.depth || self.leaf_answer[node - self.leaf0()] != a {
                return Err(Error::OffTree(format!("answer {} is not this leaf's answer", a.0)));
            }
        }
        Ok(node)
    }

    /// Size of the step-token alphabet.
    pub fn token_space(&self) -> u16 {
        match self.shift_tag {
            ShiftTag::Rtn => VOCAB_SIZE,
            ShiftTag::Id | ShiftTag::Ood => REASONING_TOKENS,
        }
    }

    /// Phrasing of a step into `node`.
    fn sample_token(&self, node: usize, rng: &mut Stream) -> u16 {
        let half = REASONING_TOKENS / 2;
        match self.shift_tag {
            ShiftTag::Rtn => rng.random_range(0..VOCAB_SIZE),
            ShiftTag::Id | ShiftTag::Ood => {
                let noisy = self.latent[node] + self.token_noise * rng.sample::<f64, _>(StandardNormal);
                let class = if noisy > 0.0 { 0 } else { half };
                class + rng.random_range(0..half)
            }
        }
    }

    /// Noise-free phrasing of a step into `node`.
    fn canonical_token(&self, node: usize) -> u16 {
        match self.shift_tag {
            ShiftTag::Rtn => 0,
            ShiftTag::Id | ShiftTag::Ood => {
                if self.latent[node] > 0.0 {
                    0
                } else {
                    REASONING_TOKENS / 2
                }
            }
        }
    }

    /// Child choice probabilities at `node`: softmax of `bias · 1[subtree holds a correct leaf]`.
    fn policy(&self, node: usize, bias: f64) -> Vec<f64> {
        let good: Vec<bool> = (0..self.branching)
            .map(|c| self.correct_below[self.child(node, c)] > 0)
            .collect();
        let n_good = good.iter().filter(|&&g| g).count();
        if bias.is_infinite() && n_good > 0 && n_good < self.branching {
            let favoured = bias > 0.0;
            let n = if favoured { n_good } else { self.branching - n_good };
            return good
                .iter()
                .map(|&g| if g == favoured { 1.0 / n as f64 } else { 0.0 })
                .collect();
        }
        let logits: Vec<f64> = good
            .iter()
            .map(|&g| if g && bias.is_finite() { bias } else { 0.0 })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Child-choice probabilities the generator uses after `prefix`.
    pub fn step_distribution(&self, prefix: &PartialPath) -> Result<Vec<f64>> {
        let node = self.locate(prefix)?;
        if prefix.len() >= self.depth {
            return Err(Error::InvalidArgument("prefix is already at full depth".into()));
        }
        Ok(self.policy(node, self.bias))
    }

    /// Appends one sampled step; emits the answer at full depth.
    pub fn gen_step(&self, prefix: &PartialPath, rng: &mut Stream) -> Result<PartialPath> {
        if prefix.is_finished() {
            return Err(Error::InvalidArgument("cannot extend a finished path".into()));
        }
        let probs = self.step_distribution(prefix)?;
        let node = self.locate(prefix)?;
        let mut r: f64 = rng.random();
        let mut c = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if r < *p {
                c = i;
                break;
            }
            r -= p;
        }
        let next = self.child(node, c);
        let mut out = prefix.clone();
        out.steps.push(Step {
            child: c as u8,
            token: self.sample_token(next, rng),
        });
        if out.len() == self.depth {
            out.answer = Some(self.leaf_answer[next - self.leaf0()]);
        }
        Ok(out)
    }

    /// `1` iff the complete path ends on a correct leaf.
    pub fn check_answer(&self, path: &PartialPath) -> Result<u8> {
        if !path.is_complete() {
            return Err(Error::InvalidArgument("cannot check an incomplete path".into()));
        }
        let node = self.locate(path)?;
        let correct = self.leaf_correct[node - self.leaf0()];
        debug_assert_eq!(correct, path.answer == Some(self.ground_truth));
        Ok(correct as u8)
    }

    /// Exact probability that a rollout under the generator policy with
    /// `bias` ends on a correct leaf, by backward induction over the subtree.
    pub fn true_prefix_value(&self, prefix: &PartialPath, bias: f64) -> Result<f64> {
        let node = self.locate(prefix)?;
        Ok(self.node_value(node, prefix.len(), bias))
    }

    fn node_value(&self, node: usize, depth: usize, bias: f64) -> f64 {
        if depth == self.depth {
            return self.leaf_correct[node - self.leaf0()] as u8 as f64;
        }
        self.policy(node, bias)
            .iter()
            .enumerate()
            .map(|(c, p)| if *p == 0.0 { 0.0 } else { p * self.node_value(self.child(node, c), depth + 1, bias) })
            .sum()
    }

    /// All complete paths, left to right, with canonical tokens.
    pub fn enumerate_leaves(&self) -> Vec<PartialPath> {
        let leaf0 = self.leaf0();
        (0..self.leaf_count())
            .map(|l| {
                let mut digits = Vec::with_capacity(self.depth);
                let mut rest = l;
                for _ in 0..self.depth {
                    digits.push(rest % self.branching);
                    rest /= self.branching;
                }
                digits.reverse();
                let mut node = 0;
                let steps = digits
                    .into_iter()
                    .map(|c| {
                        node = self.child(node, c);
                        Step {
                            child: c as u8,
                            token: self.canonical_token(node),
                        }
                    })
                    .collect();
                debug_assert_eq!(node, leaf0 + l);
                PartialPath {
                    question_id: self.question_id,
                    steps,
                    answer: Some(self.leaf_answer[l]),
                    stalled: false,
                }
            })
            .collect()
    }

    /// Leaf index of a complete path.
    pub fn leaf_of(&self, path: &PartialPath) -> Result<usize> {
        if path.len() != self.depth {
            return Err(Error::InvalidArgument("path does not reach a leaf".into()));
        }
        Ok(self.locate(path)? - self.leaf0())
    }

    /// Checks that `path` is consistent with the tree (replay check).
    pub fn validate_path(&self, path: &PartialPath) -> Result<()> {
        self.locate(path).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub d: usize,
    /// Scale of the per-path hash perturbation.
    pub noise_scale: f64,
    /// Interpolates between no shift (0) and the full rotation plus offset (1).
    pub shift_strength: f64,
    /// Norm of the OOD offset vector.
    pub shift_offset: f64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            d: 48,
            noise_scale: 0.05,
            shift_strength: 1.0,
            shift_offset: 2.0,
        }
    }
}

const RAW_DIM: usize = VOCAB_SIZE as usize + MAX_DEPTH + 1 + 2;

/// Frozen encoder standing in for a learned backbone.
///
/// `x = P·r + noise_scale·h(q, S)` where `r` stacks the token histogram
/// (counts divided by problem depth), a one-hot depth code, an answered flag
/// and a constant. OOD problems map `x ↦ x + λ((R − I)·x + s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Featurizer {
    config: FeaturizerConfig,
    seed: u64,
    /// `d × RAW_DIM`, row-major.
    projection: Vec<f64>,
    /// `d × d` orthogonal, row-major.
    rotation: Vec<f64>,
    offset: Vec<f64>,
}

impl Featurizer {
    pub fn new(config: FeaturizerConfig, seed: u64) -> Result<Self> {
        if config.d < 2 {
            return Err(Error::InvalidConfig("featurizer dimension must be at least 2".into()));
        }
        for (name, v) in [
            ("noise_scale", config.noise_scale),
            ("shift_strength", config.shift_strength),
            ("shift_offset", config.shift_offset),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        let d = config.d;
        let mut rng = rng::stream(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let projection = (0..d * RAW_DIM)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let rotation = random_orthogonal(d, &mut rng);
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let offset = dir.iter().map(|v| config.shift_offset * v / norm).collect();
        Ok(Featurizer {
            config,
            seed,
            projection,
            rotation,
            offset,
        })
    }

    pub fn config(&self) -> &FeaturizerConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    fn raw(problem: &SyntheticProblem, prefix: &PartialPath) -> [f64; RAW_DIM] {
        let mut r = [0.0; RAW_DIM];
        let w = 1.0 / problem.depth as f64;
        for s in &prefix.steps {
            r[s.token as usize] += w;
        }
        r[VOCAB_SIZE as usize + prefix.len()] = 1.0;
        r[RAW_DIM - 2] = prefix.is_complete() as u8 as f64;
        r[RAW_DIM - 1] = 1.0;
        r
    }

    fn perturbation_seed(&self, prefix: &PartialPath) -> u64 {
        let mut tags = Vec::with_capacity(prefix.len() + 2);
        tags.push(prefix.question_id.0);
        tags.extend(prefix.steps.iter().map(|s| ((s.child as u64) << 16) | s.token as u64));
        tags.push(prefix.answer.map_or(u64::MAX, |a| a.0 as u64));
        derive_seed(self.seed, &tags)
    }

    /// Deterministic representation of `prefix` within `problem`.
    pub fn featurize(&self, problem: &SyntheticProblem, prefix: &PartialPath) -> Result<Representation> {
        problem.validate_path(prefix)?;
        let d = self.config.d;
        let raw = Self::raw(problem, prefix);
        let mut noise = rng::stream(self.perturbation_seed(prefix));
        let mut x: Vec<f64> = self
            .projection
            .chunks_exact(RAW_DIM)
            .map(|row| {
                let base: f64 = row.iter().zip(&raw).map(|(p, r)| p * r).sum();
                base + self.config.noise_scale * noise.sample::<f64, _>(StandardNormal)
            })
            .collect();
        if problem.shift_tag == ShiftTag::Ood && self.config.shift_strength > 0.0 {
            let lambda = self.config.shift_strength;
            let rotated: Vec<f64> = self
                .rotation
                .chunks_exact(d)
                .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            for ((xi, ri), si) in x.iter_mut().zip(&rotated).zip(&self.offset) {
                *xi += lambda * (ri - *xi + si);
            }
        }
        Representation::new(x)
    }
}

/// Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal(d: usize, rng: &mut Stream) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for q in &rows {
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= dot * qi);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    rows.concat()
}

/// Everything needed to regenerate a problem set bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub problem: ProblemConfig,
    pub featurizer: FeaturizerConfig,
    /// `id`: train and test in-distribution. `ood`: test problems shifted.
    /// `rtn`: training problems use randomized tokens, test problems are normal.
    pub shift_tag: ShiftTag,
    pub train_problems: usize,
    pub test_problems: usize,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            problem: ProblemConfig::default(),
            featurizer: FeaturizerConfig::default(),
            shift_tag: ShiftTag::Id,
            train_problems: 200,
            test_problems: 200,
            seed: 0,
        }
    }
}

impl WorldSpec {
    pub fn from_toml(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn train_tag(&self) -> ShiftTag {
        match self.shift_tag {
            ShiftTag::Rtn => ShiftTag::Rtn,
            _ => ShiftTag::Id,
        }
    }

    pub fn test_tag(&self) -> ShiftTag {
        match self.shift_tag {
            ShiftTag::Ood => ShiftTag::Ood,
            _ => ShiftTag::Id,
        }
    }
}

const TRAIN_TAG: u64 = 0;
const TEST_TAG: u64 = 1;
const FEATURIZER_TAG: u64 = 2;

/// A generated problem set plus its frozen featurizer.
///
/// Question ids `0..train_problems` are training problems; the test problems follow.
#[derive(Clone, Debug)]
pub struct World {
    spec: WorldSpec,
    featurizer: Featurizer,
    problems: Vec<SyntheticProblem>,
}

impl World {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        spec.problem.validate()?;
        if spec.test_problems == 0 {
            return Err(Error::InvalidConfig("test_problems must be positive".into()));
        }
        let featurizer = Featurizer::new(spec.featurizer.clone(), derive_seed(spec.seed, &[FEATURIZER_TAG]))?;
        let mut problems = Vec::with_capacity(spec.train_problems + spec.test_problems);
        for (split, count, tag) in [
            (TRAIN_TAG, spec.train_problems, spec.train_tag()),
            (TEST_TAG, spec.test_problems, spec.test_tag()),
        ] {
            for i in 0..count {
                let qid = QuestionId(problems.len() as u64);
                let mut rng = rng::derive_stream(spec.seed, &[split, i as u64]);
                problems.push(make_problem(&spec.problem, qid, tag, &mut rng)?);
            }
        }
        Ok(World {
            spec,
            featurizer,
            problems,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn problems(&self) -> &[SyntheticProblem] {
        &self.problems
    }

    pub fn train_problems(&self) -> &[SyntheticProblem] {
        &self.problems[..self.spec.train_problems]
    }

    pub fn test_problems(&self) -> &[SyntheticProblem] {
        &self.problems[self.spec.train_problems..]
    }

    pub fn train_ids(&self) -> Vec<QuestionId> {
        self.train_problems().iter().map(|p| p.question_id).collect()
    }

    pub fn test_ids(&self) -> Vec<QuestionId> {
        self.test_problems().iter().map(|p| p.question_id).collect()
    }

    pub fn problem(&self, q: QuestionId) -> Result<&SyntheticProblem> {
        self.problems.get(q.0 as usize).ok_or(Error::UnknownQuestion(q.0))
    }
}

impl Generator for World {
    fn step(&self, prefix: &PartialPath, rng: &mut Stream) -> Result<PartialPath> {
        self.problem(prefix.question_id)?.gen_step(prefix, rng)
    }
}

impl AnswerChecker for World {
    fn check(&self, path: &PartialPath) -> Result<u8> {
        self.problem(path.question_id)?.check_answer(path)
    }

    fn ground_truth(&self, question: QuestionId) -> Result<Answer> {
        Ok(self.problem(question)?.ground_truth)
    }
}

impl PrefixEncoder for World {
    fn dim(&self) -> usize {
        self.featurizer.d()
    }

    fn encode(&self, prefix: &PartialPath) -> Result<Representation> {
        self.featurizer.featurize(self.problem(prefix.question_id)?, prefix)
    }
}

/// Zero-variance value model returning the exact prefix value. Test oracle.
pub struct TrueValueModel<'a> {
    pub world: &'a World,
}

impl ValueModel for TrueValueModel<'_> {
    fn posterior(&self, path: &PartialPath) -> Result<ValuePosterior> {
        let p = self.world.problem(path.question_id)?;
        Ok(ValuePosterior::point(p.true_prefix_value(path, p.bias)?))
    }
}
