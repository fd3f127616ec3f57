//! Candidate selection from value posteriors.
//!
//! Selectors work on [`ValuePosterior`]s: each candidate is encoded once and
//! every posterior sample is then a cheap `mean + loading·zeta` map. All
//! selectors break exact ties toward the lowest index.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{PartialPath, QuestionId};
use crate::uvm_head::{Representation, UvmHead, ValuePosterior};

/// Consecutive duplicate draws allowed per slot before the uniform fallback.
pub const DEFAULT_MAX_TRIES: usize = 20;
/// Posterior samples used by the naive top-1 ranking baseline.
pub const TOP1_RANK_SAMPLES: usize = 100_000;
pub const DEFAULT_UCB_SAMPLES: usize = 1_000;

/// `K` candidates for one question, each with its representation.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub question_id: QuestionId,
    pub candidates: Vec<PartialPath>,
    pub representations: Vec<Representation>,
}

impl CandidateSet {
    pub fn new(question_id: QuestionId, candidates: Vec<PartialPath>, representations: Vec<Representation>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        if candidates.len() != representations.len() {
            return Err(Error::DimensionMismatch {
                what: "candidate representations",
                expected: candidates.len(),
                actual: representations.len(),
            });
        }
        let d = representations[0].dim();
        if let Some(r) = representations.iter().find(|r| r.dim() != d) {
            return Err(Error::DimensionMismatch {
                what: "candidate representation",
                expected: d,
                actual: r.dim(),
            });
        }
        Ok(CandidateSet {
            question_id,
            candidates,
            representations,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn posteriors(&self, head: &UvmHead) -> Result<Vec<ValuePosterior>> {
        self.representations.iter().map(|x| head.project(x)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Distinct candidate indices in selection order.
    pub indices: Vec<usize>,
    /// Slots filled by the uniform fallback.
    pub fallback_count: usize,
    /// `b − K` when more slots were requested than candidates exist.
    pub shortfall: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// One index per round shared by all candidates.
    #[default]
    Shared,
    /// Fresh index per candidate per round.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorSpec {
    /// Group Thompson Sampling.
    Gts { max_tries: usize },
    /// Mean plus sampled standard deviation.
    Ucb { n_samples: usize },
    /// Top-b by Monte-Carlo top-1 probability.
    Top1Rank { n_samples: usize },
    /// Top-b by mean (the OVM baseline).
    Greedy,
}

impl SelectorSpec {
    pub fn gts() -> Self {
        SelectorSpec::Gts { max_tries: DEFAULT_MAX_TRIES }
    }

    pub fn ucb() -> Self {
        SelectorSpec::Ucb { n_samples: DEFAULT_UCB_SAMPLES }
    }

    pub fn top1_rank() -> Self {
        SelectorSpec::Top1Rank { n_samples: TOP1_RANK_SAMPLES }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectorSpec::Gts { .. } => "gts",
            SelectorSpec::Ucb { .. } => "ucb",
            SelectorSpec::Top1Rank { .. } => "top1_rank",
            SelectorSpec::Greedy => "greedy",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SelectorSpec::Gts { max_tries } => max_tries >= 1,
            SelectorSpec::Ucb { n_samples } => n_samples >= 2,
            SelectorSpec::Top1Rank { n_samples } => n_samples >= 1,
            SelectorSpec::Greedy => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid selector parameters: {self:?}")))
        }
    }

    /// Selects `b` candidates.
    pub fn select<R: Rng + ?Sized>(&self, posts: &[ValuePosterior], b: usize, rng: &mut R) -> Result<SelectionResult> {
        self.validate()?;
        if posts.is_empty() {
            return Err(Error::InvalidArgument("no candidates to select from".into()));
        }
        if b == 0 {
            return Err(Error::InvalidArgument("beam width must be at least 1".into()));
        }
        Ok(match *self {
            SelectorSpec::Gts { max_tries } => group_thompson_select(posts, b, max_tries, rng),
            SelectorSpec::Ucb { n_samples } => ucb_select(posts, b, n_samples, rng),
            SelectorSpec::Top1Rank { n_samples } => top1_rank_select(posts, b, n_samples, rng),
            SelectorSpec::Greedy => greedy_select(posts, b),
        })
    }
}

impl std::str::FromStr for SelectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gts" => Ok(SelectorSpec::gts()),
            "ucb" => Ok(SelectorSpec::ucb()),
            "top1_rank" | "top1" => Ok(SelectorSpec::top1_rank()),
            "greedy" | "ovm" => Ok(SelectorSpec::Greedy),
            other => Err(Error::InvalidArgument(format!(
                "unknown selector `{other}` (expected gts, ucb, top1_rank or greedy)"
            ))),
        }
    }
}

fn index_dim(posts: &[ValuePosterior]) -> usize {
    posts.iter().map(ValuePosterior::index_dim).max().unwrap_or(0)
}

fn fill_gaussian<R: Rng + ?Sized>(zeta: &mut [f64], rng: &mut R) {
    zeta.iter_mut().for_each(|z| *z = rng.sample(StandardNormal));
}

/// First index of the maximum; `NaN` never wins.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Indices sorted by descending score, ties to the lowest index.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn top_b(scores: &[f64], b: usize) -> SelectionResult {
    let mut indices = rank_desc(scores);
    let shortfall = b.saturating_sub(indices.len());
    indices.truncate(b);
    SelectionResult {
        indices,
        fallback_count: 0,
        shortfall,
    }
}

/// One Thompson draw: a single shared Gaussian index, then the argmax.
pub fn thompson_select_one<R: Rng + ?Sized>(posts: &[ValuePosterior], rng: &mut R) -> usize {
    let mut zeta = vec![0.0; index_dim(posts)];
    fill_gaussian(&mut zeta, rng);
    argmax(posts.iter().map(|p| p.value_at(&zeta)))
}

/// Group Thompson Sampling.
///
/// Repeats Thompson draws, discarding indices already chosen. After
/// `max_tries` consecutive duplicates for the current slot, the slot is
/// filled uniformly from the unchosen indices and the counter resets.
/// With `b ≥ K` every candidate is returned.
pub fn group_thompson_select<R: Rng + ?Sized>(
    posts: &[ValuePosterior],
    b: usize,
    max_tries: usize,
    rng: &mut R,
) -> SelectionResult {
    let k = posts.len();
    let target = b.min(k);
    let mut chosen = vec![false; k];
    let mut indices = Vec::with_capacity(target);
    let mut fallback_count = 0;
    let mut zeta = vec![0.0; index_dim(posts)];
    let mut values = vec![0.0; k];
    while indices.len() < target {
        let mut picked = None;
        for _ in 0..max_tries.max(1) {
            fill_gaussian(&mut zeta, rng);
            for (v, p) in values.iter_mut().zip(posts) {
                *v = p.value_at(&zeta);
            }
            let i = argmax(values.iter().copied());
            if !chosen[i] {
                picked = Some(i);
                break;
            }
        }
        let i = picked.unwrap_or_else(|| {
            fallback_count += 1;
            let r = rng.random_range(0..k - indices.len());
            (0..k).filter(|&j| !chosen[j]).nth(r).expect("an unchosen index remains")
        });
        chosen[i] = true;
        indices.push(i);
    }
    SelectionResult {
        indices,
        fallback_count,
        shortfall: b.saturating_sub(k),
    }
}

/// Monte-Carlo estimate of each candidate's probability of holding the largest posterior value.
pub fn top1_probability_mc<R: Rng + ?Sized>(
    posts: &[ValuePosterior],
    n_samples: usize,
    rng: &mut R,
    coupling: Coupling,
) -> Vec<f64> {
    let k = posts.len();
    let mut wins = vec![0u64; k];
    if k == 0 || n_samples == 0 {
        return vec![0.0; k];
    }
    let m = index_dim(posts);
    let mut zeta = vec![0.0; m];
    let mut values = vec![0.0; k];
    for _ in 0..n_samples {
        match coupling {
            Coupling::Shared => {
                fill_gaussian(&mut zeta, rng);
                for (v, p) in values.iter_mut().zip(posts) {
                    *v = p.value_at(&zeta);
                }
            }
            Coupling::Independent => {
                for (v, p) in values.iter_mut().zip(posts) {
                    fill_gaussian(&mut zeta[..p.index_dim()], rng);
                    *v = p.value_at(&zeta);
                }
            }
        }
        wins[argmax(values.iter().copied())] += 1;
    }
    let n = n_samples as f64;
    wins.iter().map(|&w| w as f64 / n).collect()
}

/// Top-b by estimated top-1 probability (shared coupling).
pub fn top1_rank_select<R: Rng + ?Sized>(posts: &[ValuePosterior], b: usize, n_samples: usize, rng: &mut R) -> SelectionResult {
    top_b(&top1_probability_mc(posts, n_samples, rng, Coupling::Shared), b)
}

/// Top-b by `mean + std`, with `std` the sample deviation of `n_samples` draws per candidate.
pub fn ucb_select<R: Rng + ?Sized>(posts: &[ValuePosterior], b: usize, n_samples: usize, rng: &mut R) -> SelectionResult {
    top_b(&ucb_scores(posts, n_samples, rng), b)
}

pub fn ucb_scores<R: Rng + ?Sized>(posts: &[ValuePosterior], n_samples: usize, rng: &mut R) -> Vec<f64> {
    let mut zeta = vec![0.0; index_dim(posts)];
    let mut samples = vec![0.0; n_samples];
    posts
        .iter()
        .map(|p| {
            for s in samples.iter_mut() {
                fill_gaussian(&mut zeta[..p.index_dim()], rng);
                *s = p.value_at(&zeta);
            }
            p.mean + crate::uvm_head::sample_std(&samples)
        })
        .collect()
}

/// Top-b by mean.
pub fn greedy_select(posts: &[ValuePosterior], b: usize) -> SelectionResult {
    let means: Vec<f64> = posts.iter().map(|p| p.mean).collect();
    top_b(&means, b)
}
