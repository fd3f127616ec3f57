//! `uvm`: run the value-guided search pipeline stage by stage, or end to end with `compare`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use uvm_core::harness::{self, BeamSetting, ExperimentConfig};
use uvm_core::training::{build_value_dataset, read_dataset, train_uvm, write_dataset, TrainConfig};
use uvm_core::{HeadConfig, PartialPath, QuestionId, SelectorSpec, UvmHead, World, WorldSpec};

#[derive(Parser)]
#[command(name = "uvm", version, about = "Uncertainty-aware value-guided step-level search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write the world spec (problems regenerate deterministically from it).
    GenWorld {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample labelled rollouts on the training problems.
    BuildDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a value head and write its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-batch loss trace (CSV).
        #[arg(long)]
        loss: Option<PathBuf>,
    },
    /// Beam-search every test problem with one selector.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        head: PathBuf,
        /// gts, ucb, top1_rank or greedy.
        #[arg(long, default_value = "gts")]
        selector: SelectorSpec,
        #[arg(long, default_value_t = 16)]
        b: usize,
        /// Candidates per step; defaults to 8·b.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-step trace of the first problems (JSONL).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Coverage and majority-vote precision of searched paths.
    Eval {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        paths: PathBuf,
    },
    /// Full protocol: every selector at every beam setting, over all repetitions.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::GenWorld { .. } => "gen-world",
            Command::BuildDataset { .. } => "build-dataset",
            Command::Train { .. } => "train",
            Command::Search { .. } => "search",
            Command::Eval { .. } => "eval",
            Command::Compare { .. } => "compare",
        }
    }
}

/// Searched paths of one problem, one JSON object per line.
#[derive(Serialize, Deserialize)]
struct ProblemPaths {
    question_id: QuestionId,
    paths: Vec<PartialPath>,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_world(path: &Path) -> Result<World> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(World::new(WorldSpec::from_toml(&text)?)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn max_steps(cfg: &ExperimentConfig, world: &World) -> usize {
    cfg.max_steps.unwrap_or(world.spec().problem.depth)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenWorld { common, out } => {
            let cfg = load_config(common.config.as_deref())?;
            let spec = WorldSpec {
                seed: common.seed,
                ..cfg.world
            };
            let world = World::new(spec.clone())?;
            std::fs::write(&out, spec.to_toml()?).with_context(|| format!("writing {}", out.display()))?;
            let correct: usize = world.problems().iter().map(|p| p.correct_leaf_count()).sum();
            println!(
                "{} train + {} test problems, {} leaves each, {:.1} correct leaves on average",
                spec.train_problems,
                spec.test_problems,
                spec.problem.leaves(),
                correct as f64 / world.problems().len().max(1) as f64
            );
        }
        Command::BuildDataset { common, world, out } => {
            let cfg = load_config(common.config.as_deref())?;
            let world = load_world(&world)?;
            let data = build_value_dataset(
                &world,
                &world,
                &world.train_ids(),
                cfg.train.paths_per_question,
                max_steps(&cfg, &world),
                common.seed,
            )?;
            write_dataset(&out, &data)?;
            let positives = data.iter().filter(|e| e.label == 1).count();
            println!("{} examples, {positives} labelled correct", data.len());
        }
        Command::Train {
            common,
            world,
            dataset,
            out,
            loss,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let world = load_world(&world)?;
            let data = read_dataset(&dataset)?;
            let head = UvmHead::new(HeadConfig {
                d: world.featurizer().d(),
                m: cfg.head.m,
                u: cfg.head.u,
                p0: cfg.head.p0,
                prior_seed: common.seed,
            })?;
            let train_cfg = TrainConfig {
                seed: common.seed,
                ..cfg.train
            };
            let outcome = train_uvm(&head, &data, &world, &train_cfg)?;
            outcome.head.save(&out)?;
            if let Some(path) = loss {
                outcome.write_loss_csv(path)?;
            }
            let epochs = outcome.epoch_means();
            println!(
                "trained on {} examples; mean loss per epoch: {}",
                data.len(),
                epochs.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(", ")
            );
        }
        Command::Search {
            common,
            world,
            head,
            selector,
            b,
            k,
            out,
            trace,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let world = load_world(&world)?;
            let head = UvmHead::load(&head)?;
            let setting = BeamSetting { b, k: k.unwrap_or(8 * b) };
            let trace_problems = if trace.is_some() { cfg.trace_problems } else { 0 };
            let (paths, records) = harness::search_test_set(
                &world,
                &head,
                selector,
                setting,
                max_steps(&cfg, &world),
                common.seed,
                trace_problems,
            )?;
            let mut w = create(&out)?;
            for (q, p) in world.test_ids().into_iter().zip(paths) {
                serde_json::to_writer(&mut w, &ProblemPaths { question_id: q, paths: p })?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            if let Some(path) = trace {
                let mut w = create(&path)?;
                for r in &records {
                    serde_json::to_writer(&mut w, r)?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
            println!("searched {} problems with {} (b = {}, K = {})", world.test_ids().len(), selector.name(), setting.b, setting.k);
        }
        Command::Eval { world, paths } => {
            let world = load_world(&world)?;
            let file = File::open(&paths).with_context(|| format!("opening {}", paths.display()))?;
            let mut sets = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: ProblemPaths = serde_json::from_str(&line)?;
                sets.push(record.paths);
            }
            let coverage = uvm_core::coverage(&sets, &world)?;
            let precision = uvm_core::precision_majority_vote(&sets, &world)?;
            println!(
                "{}",
                serde_json::json!({ "problems": sets.len(), "coverage": coverage, "precision": precision })
            );
        }
        Command::Compare { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let report = harness::run_experiment(&cfg, seed)?;
            report.write(&out)?;
            print!("{}", report.render_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_stage = cli.command.stage();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // core errors raised inside a pipeline stage already name it
            match err.downcast_ref::<uvm_core::Error>().and_then(uvm_core::Error::stage) {
                Some(_) => eprintln!("uvm: {err:#}"),
                None => eprintln!("uvm: stage `{command_stage}` failed: {err:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
