//! Experiment runner: world → dataset → trained head → searches → metrics.
//!
//! One head is trained per repetition. The OVM rows use its zero-index mean
//! with greedy top-b selection; every other selector uses the full posterior
//! of the same head.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::path::{AnswerChecker, EncodedHead, PartialPath, QuestionId, ValueModel};
use crate::rng::derive_seed;
use crate::search::{step_beam_search, SearchConfig, StepTrace};
use crate::selection::SelectorSpec;
use crate::simworld::{ShiftTag, World, WorldSpec};
use crate::training::{build_value_dataset, derive_ovm, train_uvm, LossRecord, TrainConfig};
use crate::uvm_head::{HeadConfig, UvmHead, DEFAULT_INDEX_DIM};

/// Fraction of problems with at least one correct complete path.
pub fn coverage<C: AnswerChecker + ?Sized>(path_sets: &[Vec<PartialPath>], checker: &C) -> Result<f64> {
    if path_sets.is_empty() {
        return Err(Error::InvalidArgument("no problems to score".into()));
    }
    let mut hits = 0usize;
    for set in path_sets {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty path set".into()));
        }
        let mut any = false;
        for p in set.iter().filter(|p| p.is_complete()) {
            if checker.check(p)? == 1 {
                any = true;
                break;
            }
        }
        hits += any as usize;
    }
    Ok(hits as f64 / path_sets.len() as f64)
}

/// Fraction of problems whose unique modal answer (complete paths only) is correct.
/// Ties for the mode count as incorrect, as does a problem with no complete path.
pub fn precision_majority_vote<C: AnswerChecker + ?Sized>(path_sets: &[Vec<PartialPath>], checker: &C) -> Result<f64> {
    if path_sets.is_empty() {
        return Err(Error::InvalidArgument("no problems to score".into()));
    }
    let mut hits = 0usize;
    for set in path_sets {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty path set".into()));
        }
        let mut votes = BTreeMap::new();
        for a in set.iter().filter_map(|p| p.answer) {
            *votes.entry(a).or_insert(0usize) += 1;
        }
        let Some(&top) = votes.values().max() else { continue };
        let modal: Vec<_> = votes.iter().filter(|(_, &c)| c == top).map(|(a, _)| *a).collect();
        if modal.len() == 1 && modal[0] == checker.ground_truth(set[0].question_id)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / path_sets.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamSetting {
    pub b: usize,
    pub k: usize,
}

/// Value-head hyperparameters. `d` comes from the world's featurizer.
///
/// The default prior scale is smaller than the head's own default so the
/// untrained posterior spread is on the scale of the 0/1 labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadSettings {
    pub m: usize,
    pub u: f64,
    pub p0: f64,
}

impl Default for HeadSettings {
    fn default() -> Self {
        HeadSettings {
            m: DEFAULT_INDEX_DIM,
            u: 1.0,
            p0: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub train: TrainConfig,
    pub head: HeadSettings,
    pub beams: Vec<BeamSetting>,
    pub selectors: Vec<SelectorSpec>,
    pub repetitions: usize,
    /// Search step cap; defaults to the world depth.
    pub max_steps: Option<usize>,
    /// Problems per cell whose full search trace is written.
    pub trace_problems: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldSpec::default(),
            train: TrainConfig::default(),
            head: HeadSettings::default(),
            beams: [1, 2, 16, 32].iter().map(|&b| BeamSetting { b, k: 8 * b }).collect(),
            selectors: vec![SelectorSpec::gts(), SelectorSpec::Greedy],
            repetitions: 3,
            max_steps: None,
            trace_problems: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if self.beams.is_empty() || self.selectors.is_empty() {
            return Err(Error::InvalidConfig("need at least one beam setting and one selector".into()));
        }
        for s in &self.beams {
            if s.b == 0 || s.k % s.b != 0 || s.k == 0 {
                return Err(Error::InvalidConfig(format!(
                    "beam setting b = {}, K = {}: K must be a positive multiple of b",
                    s.b, s.k
                )));
            }
        }
        for s in &self.selectors {
            s.validate()?;
        }
        self.world.problem.validate()?;
        self.train.validate()
    }

    fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(self.world.problem.depth)
    }
}

/// One `(seed, selector, b, K)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub world: String,
    pub repetition: usize,
    pub seed: u64,
    pub selector: String,
    pub b: usize,
    pub k: usize,
    pub problems: usize,
    pub coverage: f64,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub world: String,
    pub selector: String,
    pub b: usize,
    pub k: usize,
    pub seeds: usize,
    pub coverage_mean: f64,
    pub coverage_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
}

/// Per-cell trace lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub question_id: QuestionId,
    #[serde(flatten)]
    pub step: StepTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionArtifacts {
    pub repetition: usize,
    pub seed: u64,
    pub head: UvmHead,
    pub loss_trace: Vec<LossRecord>,
    /// `(selector, b, records)` per cell.
    pub traces: Vec<(String, usize, Vec<TraceRecord>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub raw: Vec<RawRow>,
    pub summary: Vec<SummaryRow>,
    pub artifacts: Vec<RepetitionArtifacts>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Mean ± sample std over repetitions, one row per `(selector, b, K)` in first-seen order.
pub fn summarize(raw: &[RawRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, usize, usize)> = Vec::new();
    for r in raw {
        let key = (r.world.clone(), r.selector.clone(), r.b, r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(world, selector, b, k)| {
            let cell: Vec<&RawRow> = raw
                .iter()
                .filter(|r| r.world == world && r.selector == selector && r.b == b && r.k == k)
                .collect();
            let cov: Vec<f64> = cell.iter().map(|r| r.coverage).collect();
            let prec: Vec<f64> = cell.iter().map(|r| r.precision).collect();
            let (coverage_mean, coverage_std) = mean_std(&cov);
            let (precision_mean, precision_std) = mean_std(&prec);
            SummaryRow {
                world,
                selector,
                b,
                k,
                seeds: cell.len(),
                coverage_mean,
                coverage_std,
                precision_mean,
                precision_std,
            }
        })
        .collect()
}

fn world_name(tag: ShiftTag) -> String {
    match tag {
        ShiftTag::Id => "id",
        ShiftTag::Ood => "ood",
        ShiftTag::Rtn => "rtn",
    }
    .to_string()
}

const WORLD_TAG: u64 = 10;
const DATA_TAG: u64 = 11;
const TRAIN_TAG: u64 = 12;
const PRIOR_TAG: u64 = 13;
const SEARCH_TAG: u64 = 14;

/// Seed used by repetition `rep` of a run rooted at `root_seed`.
pub fn repetition_seed(root_seed: u64, rep: usize) -> u64 {
    derive_seed(root_seed, &[rep as u64])
}

/// Trains the head used by repetition seed `seed`. Exposed for tools that
/// need the same checkpoint without running searches.
pub fn train_for_seed(cfg: &ExperimentConfig, world: &World, seed: u64) -> Result<(UvmHead, Vec<LossRecord>)> {
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, &[TRAIN_TAG]),
        ..cfg.train.clone()
    };
    let dataset = build_value_dataset(
        world,
        world,
        &world.train_ids(),
        train_cfg.paths_per_question,
        train_cfg.max_steps,
        derive_seed(seed, &[DATA_TAG]),
    )
    .stage("build-dataset")?;
    let head = UvmHead::new(HeadConfig {
        d: world.featurizer().d(),
        m: cfg.head.m,
        u: cfg.head.u,
        p0: cfg.head.p0,
        prior_seed: derive_seed(seed, &[PRIOR_TAG]),
    })
    .stage("train")?;
    let out = train_uvm(&head, &dataset, world, &train_cfg).stage("train")?;
    Ok((out.head, out.loss_trace))
}

/// Builds the world for repetition seed `seed`.
pub fn world_for_seed(cfg: &ExperimentConfig, seed: u64) -> Result<World> {
    World::new(WorldSpec {
        seed: derive_seed(seed, &[WORLD_TAG]),
        ..cfg.world.clone()
    })
    .stage("gen-world")
}

/// Searches every test problem with `spec` and returns the per-problem paths and traces.
pub fn search_test_set(
    world: &World,
    head: &UvmHead,
    spec: SelectorSpec,
    setting: BeamSetting,
    max_steps: usize,
    seed: u64,
    trace_problems: usize,
) -> Result<(Vec<Vec<PartialPath>>, Vec<TraceRecord>)> {
    let search_cfg = SearchConfig {
        beam_width: setting.b,
        candidate_size: setting.k,
        max_steps,
        selector: spec,
        seed: derive_seed(seed, &[SEARCH_TAG]),
    };
    let uvm = EncodedHead::new(head, world);
    let ovm = derive_ovm(head, world);
    let model: &dyn ValueModel = match spec {
        SelectorSpec::Greedy => &ovm,
        _ => &uvm,
    };
    let outcomes = world
        .test_ids()
        .par_iter()
        .map(|&q| step_beam_search(world, model, q, &search_cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut traces = Vec::new();
    for out in outcomes.iter().take(trace_problems) {
        let q = out.paths.first().map(|p| p.question_id).unwrap_or(QuestionId(0));
        traces.extend(out.trace.iter().cloned().map(|step| TraceRecord { question_id: q, step }));
    }
    Ok((outcomes.into_iter().map(|o| o.paths).collect(), traces))
}

/// Runs the full protocol. Fully determined by `(cfg, root_seed)`.
pub fn run_experiment(cfg: &ExperimentConfig, root_seed: u64) -> Result<RunReport> {
    cfg.validate().stage("config")?;
    let world_label = world_name(cfg.world.shift_tag);
    let mut raw = Vec::new();
    let mut artifacts = Vec::new();
    for rep in 0..cfg.repetitions {
        let seed = repetition_seed(root_seed, rep);
        let world = world_for_seed(cfg, seed)?;
        let (head, loss_trace) = train_for_seed(cfg, &world, seed)?;
        let mut traces = Vec::new();
        for &setting in &cfg.beams {
            for &spec in &cfg.selectors {
                let (paths, trace) =
                    search_test_set(&world, &head, spec, setting, cfg.max_steps(), seed, cfg.trace_problems)
                        .stage("search")?;
                raw.push(RawRow {
                    world: world_label.clone(),
                    repetition: rep,
                    seed,
                    selector: spec.name().to_string(),
                    b: setting.b,
                    k: setting.k,
                    problems: paths.len(),
                    coverage: coverage(&paths, &world).stage("eval")?,
                    precision: precision_majority_vote(&paths, &world).stage("eval")?,
                });
                traces.push((spec.name().to_string(), setting.b, trace));
            }
        }
        artifacts.push(RepetitionArtifacts {
            repetition: rep,
            seed,
            head,
            loss_trace,
            traces,
        });
    }
    let summary = summarize(&raw);
    Ok(RunReport { raw, summary, artifacts })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn read_raw_csv(path: impl AsRef<Path>) -> Result<Vec<RawRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

impl RunReport {
    /// Writes `raw.csv`, `summary.csv`, `trace/`, and per-repetition
    /// checkpoints and loss traces under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let trace_dir = dir.join("trace");
        let ckpt_dir = dir.join("checkpoints");
        for d in [dir, &trace_dir, &ckpt_dir] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        write_atomic(&dir.join("raw.csv"), &csv_bytes(&self.raw)?)?;
        write_atomic(&dir.join("summary.csv"), &csv_bytes(&self.summary)?)?;
        for a in &self.artifacts {
            write_atomic(
                &ckpt_dir.join(format!("head_rep{}.json", a.repetition)),
                a.head.to_json()?.as_bytes(),
            )?;
            write_atomic(
                &ckpt_dir.join(format!("loss_rep{}.csv", a.repetition)),
                &csv_bytes(&a.loss_trace)?,
            )?;
            for (selector, b, records) in &a.traces {
                let mut buf = Vec::new();
                for r in records {
                    serde_json::to_writer(&mut buf, r)?;
                    buf.write_all(b"\n").map_err(|e| Error::io("<trace buffer>", e))?;
                }
                let name: PathBuf = trace_dir.join(format!("rep{}_{}_b{}.jsonl", a.repetition, selector, b));
                write_atomic(&name, &buf)?;
            }
        }
        Ok(())
    }

    /// Human-readable table: selector × (b, K), coverage and precision as mean ± std in percent.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:<10} {:>4} {:>5}  {:>16}  {:>16}\n",
            "world", "selector", "b", "K", "coverage %", "precision %"
        );
        for s in &self.summary {
            out += &format!(
                "{:<6} {:<10} {:>4} {:>5}  {:>7.2} ± {:<6.2}  {:>7.2} ± {:<6.2}\n",
                s.world,
                s.selector,
                s.b,
                s.k,
                100.0 * s.coverage_mean,
                100.0 * s.coverage_std,
                100.0 * s.precision_mean,
                100.0 * s.precision_std
            );
        }
        out
    }
}
