//! Step-level beam search.
//!
//! The first round samples `K` first steps from the root and keeps `b`.
//! Each later round expands the unfinished beams to `K` new candidates in
//! total, evaluates them together with the frozen finished beams, and keeps
//! `b` again, until every beam is finished or `max_steps` is reached.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Generator, PartialPath, QuestionId, ValueModel};
use crate::rng::{self, Stream};
use crate::selection::{SelectionResult, SelectorSpec};
use crate::uvm_head::ValuePosterior;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub candidate_size: usize,
    pub max_steps: usize,
    pub selector: SelectorSpec,
    pub seed: u64,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.candidate_size == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "beam width, candidate size and max steps must be positive".into(),
            ));
        }
        if self.candidate_size % self.beam_width != 0 {
            return Err(Error::InvalidConfig(format!(
                "candidate size {} is not a multiple of beam width {}",
                self.candidate_size, self.beam_width
            )));
        }
        self.selector.validate()
    }

    pub fn per_beam(&self) -> usize {
        self.candidate_size / self.beam_width
    }
}

/// Splits `budget` over the unfinished beams; the remainder goes to the earliest ones.
pub fn expansion_allocation(beams: &[PartialPath], budget: usize) -> Vec<usize> {
    let open = beams.iter().filter(|b| !b.is_finished()).count();
    let mut alloc = vec![0; beams.len()];
    if open == 0 {
        return alloc;
    }
    let (base, mut extra) = (budget / open, budget % open);
    for (a, beam) in alloc.iter_mut().zip(beams) {
        if !beam.is_finished() {
            *a = base + usize::from(extra > 0);
            extra = extra.saturating_sub(1);
        }
    }
    alloc
}

/// One expansion round.
///
/// Finished beams come first, unchanged. Then each unfinished beam
/// contributes its share of the `beams.len() · per_beam` budget. A beam whose
/// generator call fails is returned once, marked stalled. Each beam draws
/// from its own stream derived from one draw of `rng`.
pub fn expand_beam<G: Generator + ?Sized>(
    generator: &G,
    beams: &[PartialPath],
    per_beam: usize,
    rng: &mut Stream,
) -> Vec<PartialPath> {
    let alloc = expansion_allocation(beams, beams.len() * per_beam);
    let round_seed: u64 = rng.random();
    let mut pool: Vec<PartialPath> = beams.iter().filter(|b| b.is_finished()).cloned().collect();
    for (i, (beam, &n)) in beams.iter().zip(&alloc).enumerate() {
        if n == 0 {
            continue;
        }
        let mut beam_rng = rng::derive_stream(round_seed, &[i as u64]);
        let mut children = Vec::with_capacity(n);
        for _ in 0..n {
            match generator.step(beam, &mut beam_rng) {
                Ok(c) => children.push(c),
                Err(_) => {
                    children.clear();
                    children.push(beam.clone().into_stalled());
                    break;
                }
            }
        }
        pool.extend(children);
    }
    pool
}

/// Per-round trace record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub candidate_means: Vec<f64>,
    /// One posterior sample per candidate under a shared Gaussian index.
    pub candidate_samples: Vec<f64>,
    pub selected: Vec<usize>,
    pub fallback_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub paths: Vec<PartialPath>,
    pub trace: Vec<StepTrace>,
}

fn select_round<V: ValueModel + ?Sized>(
    model: &V,
    pool: &[PartialPath],
    cfg: &SearchConfig,
    step: usize,
    rng: &mut Stream,
    trace_rng: &mut Stream,
    trace: &mut Vec<StepTrace>,
) -> Result<Vec<PartialPath>> {
    let posts = pool.iter().map(|p| model.posterior(p)).collect::<Result<Vec<ValuePosterior>>>()?;
    let SelectionResult {
        indices,
        fallback_count,
        ..
    } = cfg.selector.select(&posts, cfg.beam_width, rng)?;
    let m = posts.iter().map(ValuePosterior::index_dim).max().unwrap_or(0);
    let zeta = crate::uvm_head::gaussian_index(m, trace_rng);
    trace.push(StepTrace {
        step,
        candidate_means: posts.iter().map(|p| p.mean).collect(),
        candidate_samples: posts.iter().map(|p| p.value_at(&zeta)).collect(),
        selected: indices.clone(),
        fallback_count,
    });
    Ok(indices.into_iter().map(|i| pool[i].clone()).collect())
}

/// Runs the search for `question` and returns `b` paths (some may be
/// unfinished if `max_steps` was reached).
pub fn step_beam_search<G, V>(
    generator: &G,
    model: &V,
    question: QuestionId,
    cfg: &SearchConfig,
) -> Result<SearchOutcome>
where
    G: Generator + ?Sized,
    V: ValueModel + ?Sized,
{
    cfg.validate()?;
    let mut rng = rng::derive_stream(cfg.seed, &[question.0, 0]);
    let mut trace_rng = rng::derive_stream(cfg.seed, &[question.0, 1]);
    let mut trace = Vec::new();

    let root = vec![PartialPath::root(question)];
    let first = expand_beam(generator, &root, cfg.candidate_size, &mut rng);
    let mut beams = select_round(model, &first, cfg, 1, &mut rng, &mut trace_rng, &mut trace)?;
    let mut t = 1;
    while beams.iter().any(|b| !b.is_finished()) && t < cfg.max_steps {
        let pool = expand_beam(generator, &beams, cfg.per_beam(), &mut rng);
        t += 1;
        beams = select_round(model, &pool, cfg, t, &mut rng, &mut trace_rng, &mut trace)?;
    }
    Ok(SearchOutcome { paths: beams, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{Answer, Step};

    /// Always takes child 0; answers after `depth` steps.
    struct Chain {
        depth: usize,
    }

    impl Generator for Chain {
        fn step(&self, prefix: &PartialPath, _rng: &mut Stream) -> Result<PartialPath> {
            let mut p = prefix.clone();
            p.steps.push(Step { child: 0, token: 0 });
            if p.len() == self.depth {
                p.answer = Some(Answer(1));
            }
            Ok(p)
        }
    }

    struct Flat;

    impl ValueModel for Flat {
        fn posterior(&self, _path: &PartialPath) -> Result<ValuePosterior> {
            Ok(ValuePosterior::point(0.0))
        }
    }

    struct Failing;

    impl Generator for Failing {
        fn step(&self, _prefix: &PartialPath, _rng: &mut Stream) -> Result<PartialPath> {
            Err(Error::InvalidArgument("no".into()))
        }
    }

    fn cfg(b: usize, k: usize, max_steps: usize) -> SearchConfig {
        SearchConfig {
            beam_width: b,
            candidate_size: k,
            max_steps,
            selector: SelectorSpec::Greedy,
            seed: 0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(3, 8, 4).validate().is_err());
        assert!(cfg(0, 8, 4).validate().is_err());
        assert!(cfg(4, 8, 0).validate().is_err());
        assert_eq!(cfg(32, 256, 4).per_beam(), 8);
    }

    #[test]
    fn allocation_skips_finished_beams() {
        let open = PartialPath::root(QuestionId(0));
        let mut done = open.clone();
        done.answer = Some(Answer(0));
        let beams = [open.clone(), done, open.clone(), open];
        assert_eq!(expansion_allocation(&beams, 8), vec![3, 0, 3, 2]);
    }

    #[test]
    fn expansion_cardinality() {
        let beams = vec![PartialPath::root(QuestionId(0)); 4];
        let pool = expand_beam(&Chain { depth: 5 }, &beams, 8, &mut rng::stream(0));
        assert_eq!(pool.len(), 32);
        assert!(pool.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn failed_generation_stalls_the_beam() {
        let beams = vec![PartialPath::root(QuestionId(0)); 2];
        let pool = expand_beam(&Failing, &beams, 4, &mut rng::stream(0));
        assert_eq!(pool.len(), 2);
        assert!(pool.iter().all(|p| p.stalled && !p.is_complete()));
        let out = step_beam_search(&Failing, &Flat, QuestionId(0), &cfg(2, 4, 5)).unwrap();
        assert_eq!(out.paths.len(), 1);
    }

    #[test]
    fn single_beam_chain_is_the_greedy_rollout() {
        let out = step_beam_search(&Chain { depth: 3 }, &Flat, QuestionId(0), &cfg(1, 1, 10)).unwrap();
        assert_eq!(out.paths.len(), 1);
        assert_eq!(out.paths[0].len(), 3);
        assert!(out.paths[0].is_complete());
        assert_eq!(out.trace.len(), 3);
    }

    #[test]
    fn step_cap_returns_unfinished_paths() {
        let out = step_beam_search(&Chain { depth: 10 }, &Flat, QuestionId(0), &cfg(2, 4, 3)).unwrap();
        assert_eq!(out.paths.len(), 2);
        assert!(out.paths.iter().all(|p| p.len() == 3 && !p.is_complete()));
    }
}
