use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use metric_distill::fixture::{self, FixtureConfig};
use metric_distill::pipeline::{write_fixture, PipelineConfig, Stage, Workspace};

#[derive(Parser)]
#[command(name = "metric-distill", version, about = "Metric-distilled retrieve-then-rank pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse hard-negative pools.
    Pools(Common),
    /// Warm up Retriever0.
    Warmup(Common),
    /// Index the corpus with Retriever0 and retrieve P0.
    Retrieve(Common),
    /// Train Ranker0 on P0.
    TrainRanker(Common),
    /// Rerank P0 with Ranker0.
    Rerank(Common),
    /// Distill Ranker0 into Retriever1.
    Distill(Common),
    /// Index with Retriever1 and retrieve P1.
    RetrieveDistilled(Common),
    /// Rerank P1 and write generator files.
    Export(Common),
    /// Evaluate every pool artifact.
    Eval(Common),
    /// Compare tfidf and concept-match hard negatives.
    AblateNegatives(Common),
    /// Run the configured stages in order.
    RunAll {
        #[command(flatten)]
        common: Common,
        /// Restrict to these stages (repeatable).
        #[arg(long = "stage")]
        stages: Vec<String>,
    },
    /// Write the synthetic fixture and a matching config into a directory.
    GenFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FixtureConfig::default().seed)]
        fixture_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(common: &Common) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.training.seed = seed;
    }
    Ok(cfg)
}

fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> anyhow::Result<()> {
    let ws = Workspace::open(cfg)?;
    eprintln!("config {}", ws.config_hash());
    let mut stages = stages.to_vec();
    stages.sort();
    stages.dedup();
    for stage in stages {
        for path in ws.run(stage)? {
            eprintln!("{stage}: wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let single = |common: &Common, stage: Stage| run_stages(&load(common)?, &[stage]);
    match cli.command {
        Command::Pools(c) => single(&c, Stage::Pools),
        Command::Warmup(c) => single(&c, Stage::Warmup),
        Command::Retrieve(c) => single(&c, Stage::Retrieve),
        Command::TrainRanker(c) => single(&c, Stage::TrainRanker),
        Command::Rerank(c) => single(&c, Stage::Rerank),
        Command::Distill(c) => single(&c, Stage::Distill),
        Command::RetrieveDistilled(c) => single(&c, Stage::RetrieveDistilled),
        Command::Export(c) => single(&c, Stage::Export),
        Command::Eval(c) => single(&c, Stage::Eval),
        Command::AblateNegatives(c) => {
            let ws = Workspace::open(&load(&c)?)?;
            let (rows, path) = ws.ablate_negatives()?;
            for row in rows {
                let r = &row.report;
                println!(
                    "{:<13} {} top1 {:.4} top{} {:.4} tau {:.4} r@1 {:.4}",
                    row.source.name(),
                    r.metric,
                    r.mean_top1,
                    r.k,
                    r.mean_topk,
                    r.mean_tau,
                    r.recall_at_1
                );
            }
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::RunAll { common, stages } => {
            let mut cfg = load(&common)?;
            if !stages.is_empty() {
                cfg.stages = stages.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            run_stages(&cfg, &cfg.stages)
        }
        Command::GenFixture { out, fixture_seed, seed } => {
            let fx = FixtureConfig {
                seed: fixture_seed,
                ..Default::default()
            };
            write_fixture(&out, &fx, fixture::TRAIN_SETS, fixture::DEV_SETS, fixture::training_config(seed))?;
            eprintln!("wrote {}", out.join("pipeline.toml").display());
            Ok(())
        }
    }
}
