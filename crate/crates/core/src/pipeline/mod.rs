//! End-to-end orchestration, evaluation and export.

mod artifact;
mod config;
mod evaluate;
mod export;
mod retrieve;
mod run;

use std::fs;
use std::path::Path;

pub use artifact::{read_lines, read_records, write_records, ArtifactHeader};
pub use config::{PipelineConfig, Stage};
pub use evaluate::{evaluate_pools, EvalReport};
pub use export::{export_generator_file, generator_records, parse_generator_file, GeneratorRecord};
pub use retrieve::{build_index, hard_negative_pools, rerank_pools, retrieve_pools, retrieve_with_index};
pub use run::{
    ablation_hard_negatives, run_pipeline, AblationRow, EvalRow, SplitName, Workspace, ABLATION_FILE, REPORT_FILE,
};

use crate::corpus::write_dataset;
use crate::error::{Error, Result};
use crate::fixture::{generate, FixtureConfig};
use crate::training::TrainingConfig;

/// Generate the synthetic fixture into `dir` (corpus, three dataset splits
/// and a `pipeline.toml` writing to `dir/out`) and return the loaded config.
pub fn write_fixture(
    dir: impl AsRef<Path>,
    fixture: &FixtureConfig,
    train: usize,
    dev: usize,
    training: TrainingConfig,
) -> Result<PipelineConfig> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fx = generate(fixture)?;
    let (tr, dv, te) = fx.split(train, dev);
    let mut corpus = fx.corpus.join("\n");
    corpus.push('\n');
    let corpus_path = dir.join("corpus.txt");
    fs::write(&corpus_path, corpus).map_err(|e| Error::io(&corpus_path, e))?;
    write_dataset(dir.join("train.jsonl"), &tr)?;
    write_dataset(dir.join("dev.jsonl"), &dv)?;
    write_dataset(dir.join("test.jsonl"), &te)?;
    let mut cfg = PipelineConfig::new("corpus.txt", "train.jsonl", "out");
    cfg.dev = Some("dev.jsonl".into());
    cfg.test = Some("test.jsonl".into());
    cfg.training = training;
    let path = dir.join("pipeline.toml");
    fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
    PipelineConfig::load(&path)
}
