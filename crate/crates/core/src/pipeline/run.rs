//! Stage runner. Every stage reads its inputs from `out_dir`, so any stage
//! can be rerun on its own once its upstream artifacts exist.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::artifact::{read_lines, read_records, write_records, ArtifactHeader};
use super::config::{PipelineConfig, Stage};
use super::evaluate::{evaluate_pools, EvalReport};
use super::export::export_generator_file;
use super::retrieve::{build_index, hard_negative_pools, rerank_pools, retrieve_pools, retrieve_with_index};
use crate::corpus::{load_dataset, Corpus, DatasetExample, ExclusionSet};
use crate::dense::{CrossEncoder, DualEncoder, Vocab};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::pool::CandidatePool;
use crate::sparse::HardNegativeSource;
use crate::training::{distill_retriever, train_ranker, warmup_retriever, Checkpoint, ModelKind, RankerObjective, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

/// Pool artifacts, keyed by the stage that writes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PoolKind {
    HardNegatives,
    P0,
    P0Reranked,
    P1,
    P1Reranked,
}

impl PoolKind {
    fn stem(self) -> &'static str {
        match self {
            PoolKind::HardNegatives => "hard_negatives",
            PoolKind::P0 => "p0",
            PoolKind::P0Reranked => "p0_reranked",
            PoolKind::P1 => "p1",
            PoolKind::P1Reranked => "p1_reranked",
        }
    }

    fn producer(self) -> Stage {
        match self {
            PoolKind::HardNegatives => Stage::Pools,
            PoolKind::P0 => Stage::Retrieve,
            PoolKind::P0Reranked => Stage::Rerank,
            PoolKind::P1 => Stage::RetrieveDistilled,
            PoolKind::P1Reranked => Stage::Export,
        }
    }
}

const RETRIEVER0: (&str, Stage) = ("retriever0.ckpt.jsonl", Stage::Warmup);
const RANKER0: (&str, Stage) = ("ranker0.ckpt.jsonl", Stage::TrainRanker);
const RETRIEVER1: (&str, Stage) = ("retriever1.ckpt.jsonl", Stage::Distill);
pub const REPORT_FILE: &str = "report.jsonl";
pub const ABLATION_FILE: &str = "ablation.hard_negatives.jsonl";

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub pools: String,
    pub split: String,
    pub report: EvalReport,
}

/// One row of the hard-negative ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub source: HardNegativeSource,
    pub report: EvalReport,
}

/// Loaded inputs shared by all stages of one run.
pub struct Workspace {
    config: PipelineConfig,
    hash: String,
    corpus: Corpus,
    splits: Vec<(SplitName, Vec<DatasetExample>)>,
    vocab: Vocab,
}

impl Workspace {
    pub fn open(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let mut splits = vec![(SplitName::Train, load_dataset(&config.train)?)];
        if let Some(p) = &config.dev {
            splits.push((SplitName::Dev, load_dataset(p)?));
        }
        if let Some(p) = &config.test {
            splits.push((SplitName::Test, load_dataset(p)?));
        }
        if splits[0].1.is_empty() {
            return Err(Error::invalid("training split is empty"));
        }
        let exclusion = ExclusionSet::from_examples(splits.iter().flat_map(|(_, e)| e));
        let corpus = Corpus::from_file(&config.corpus, &exclusion)?;
        if corpus.is_empty() {
            return Err(Error::invalid("corpus is empty after filtering"));
        }
        let vocab = Vocab::build(&corpus, &splits[0].1);
        fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
        Ok(Self {
            hash: config.config_hash()?,
            config: config.clone(),
            corpus,
            splits,
            vocab,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn examples(&self, split: SplitName) -> Option<&[DatasetExample]> {
        self.splits.iter().find(|(s, _)| *s == split).map(|(_, e)| e.as_slice())
    }

    /// The split reports are computed on: test, else dev, else train.
    pub fn eval_split(&self) -> SplitName {
        [SplitName::Test, SplitName::Dev]
            .into_iter()
            .find(|s| self.examples(*s).is_some())
            .unwrap_or(SplitName::Train)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn header(&self, stage: Stage) -> ArtifactHeader {
        ArtifactHeader {
            config_hash: self.hash.clone(),
            seed: self.config.training.seed,
            stage: stage.name().to_string(),
        }
    }

    /// Fails with a stage error if the artifact is missing or stale.
    fn upstream(&self, stage: Stage, name: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.path(name);
        if !path.is_file() {
            return Err(Error::stage(
                stage.name(),
                format!("missing artifact {name}; run stage `{producer}` first"),
            ));
        }
        let (header, _) = read_lines(&path)?;
        if header.config_hash != self.hash {
            return Err(Error::stage(
                stage.name(),
                format!(
                    "artifact {name} was written under config {}, current config is {}; rerun stage `{producer}`",
                    header.config_hash, self.hash
                ),
            ));
        }
        Ok(path)
    }

    fn pool_name(kind: PoolKind, split: SplitName) -> String {
        format!("{}.{}.jsonl", kind.stem(), split.name())
    }

    fn write_pools(&self, stage: Stage, kind: PoolKind, split: SplitName, pools: &[CandidatePool]) -> Result<PathBuf> {
        let path = self.path(&Self::pool_name(kind, split));
        write_records(&path, &self.header(stage), pools)?;
        Ok(path)
    }

    fn read_pools(&self, stage: Stage, kind: PoolKind, split: SplitName) -> Result<Vec<CandidatePool>> {
        let path = self.upstream(stage, &Self::pool_name(kind, split), kind.producer())?;
        let (_, pools): (_, Vec<CandidatePool>) = read_records(&path)?;
        let n = self.examples(split).map_or(0, <[_]>::len);
        if pools.len() != n {
            return Err(Error::stage(
                stage.name(),
                format!("{} holds {} pools for {n} examples", path.display(), pools.len()),
            ));
        }
        for p in &pools {
            p.validate()?;
        }
        Ok(pools)
    }

    fn write_model<M: ModelKind>(&self, stage: Stage, name: &str, model: M) -> Result<PathBuf> {
        let path = self.path(name);
        let ckpt = Checkpoint::new(&self.config.training, model);
        write_records(&path, &self.header(stage), std::slice::from_ref(&ckpt))?;
        Ok(path)
    }

    fn read_model<M: ModelKind>(&self, stage: Stage, (name, producer): (&str, Stage)) -> Result<M> {
        let path = self.upstream(stage, name, producer)?;
        let (_, lines) = read_lines(&path)?;
        match lines.as_slice() {
            [line] => Ok(Checkpoint::<M>::from_json(line)?.model),
            _ => Err(Error::stage(stage.name(), format!("{name} must hold exactly one checkpoint"))),
        }
    }

    /// Train and dev splits for training; dev may be empty.
    fn train_dev_pools(&self, stage: Stage, kind: PoolKind) -> Result<(Vec<CandidatePool>, Vec<CandidatePool>)> {
        let train = self.read_pools(stage, kind, SplitName::Train)?;
        let dev = match self.examples(SplitName::Dev) {
            Some(_) => self.read_pools(stage, kind, SplitName::Dev)?,
            None => Vec::new(),
        };
        Ok((train, dev))
    }

    fn splits(&self) -> impl Iterator<Item = (SplitName, &[DatasetExample])> {
        self.splits.iter().map(|(s, e)| (*s, e.as_slice()))
    }

    fn split_pair<'a>(&'a self, train: &'a [CandidatePool], dev: &'a [CandidatePool]) -> Result<(Split<'a>, Split<'a>)> {
        let tr = Split::new(self.examples(SplitName::Train).unwrap_or(&[]), train)?;
        let dv = Split::new(self.examples(SplitName::Dev).unwrap_or(&[]), dev)?;
        Ok((tr, dv))
    }

    /// Run one stage; returns the files it wrote.
    pub fn run(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        let cfg = &self.config.training;
        let wrap = |e: Error| match e {
            Error::Stage { .. } => e,
            other => Error::stage(stage.name(), other.to_string()),
        };
        let mut written = Vec::new();
        let mut run = || -> Result<()> {
            match stage {
                Stage::Pools => {
                    for (split, ex) in self.splits() {
                        let pools = hard_negative_pools(self.config.hard_negative_source, &self.corpus, ex, cfg.k)?;
                        written.push(self.write_pools(stage, PoolKind::HardNegatives, split, &pools)?);
                    }
                }
                Stage::Warmup => {
                    let (train, dev) = self.train_dev_pools(stage, PoolKind::HardNegatives)?;
                    let (tr, dv) = self.split_pair(&train, &dev)?;
                    let report = warmup_retriever(tr, dv, &self.corpus, &self.vocab, cfg)?;
                    written.push(self.write_model(stage, RETRIEVER0.0, report.model)?);
                }
                Stage::Retrieve | Stage::RetrieveDistilled => {
                    let (model, kind, prefix) = if stage == Stage::Retrieve {
                        (RETRIEVER0, PoolKind::P0, "index0")
                    } else {
                        (RETRIEVER1, PoolKind::P1, "index1")
                    };
                    let retriever: DualEncoder = self.read_model(stage, model)?;
                    let index = build_index(&retriever, &self.corpus)?;
                    let (bin, ids) = (self.path(&format!("{prefix}.bin")), self.path(&format!("{prefix}.ids.jsonl")));
                    index.save(&bin, &ids)?;
                    written.extend([bin, ids]);
                    for (split, ex) in self.splits() {
                        let pools = retrieve_with_index(&retriever, &index, ex, cfg.k)?;
                        written.push(self.write_pools(stage, kind, split, &pools)?);
                    }
                }
                Stage::TrainRanker => {
                    let (train, dev) = self.train_dev_pools(stage, PoolKind::P0)?;
                    let (tr, dv) = self.split_pair(&train, &dev)?;
                    let report = train_ranker(
                        tr,
                        dv,
                        &self.corpus,
                        &self.vocab,
                        cfg.distill_metric,
                        RankerObjective::ListMle,
                        cfg,
                    )?;
                    written.push(self.write_model(stage, RANKER0.0, report.model)?);
                }
                Stage::Rerank | Stage::Export => {
                    let ranker: CrossEncoder = self.read_model(stage, RANKER0)?;
                    let (from, to) = if stage == Stage::Rerank {
                        (PoolKind::P0, PoolKind::P0Reranked)
                    } else {
                        (PoolKind::P1, PoolKind::P1Reranked)
                    };
                    for (split, ex) in self.splits() {
                        let pools = rerank_pools(&ranker, ex, &self.read_pools(stage, from, split)?, &self.corpus)?;
                        written.push(self.write_pools(stage, to, split, &pools)?);
                        if stage == Stage::Export {
                            let path = self.path(&format!("generator.{}.tsv", split.name()));
                            export_generator_file(&path, &pools, ex, &self.corpus, cfg.top_k_export)?;
                            written.push(path);
                        }
                    }
                }
                Stage::Distill => {
                    let warm: DualEncoder = self.read_model(stage, RETRIEVER0)?;
                    let ranker: CrossEncoder = self.read_model(stage, RANKER0)?;
                    let (train, dev) = self.train_dev_pools(stage, PoolKind::P0)?;
                    let (tr, dv) = self.split_pair(&train, &dev)?;
                    let report = distill_retriever(&warm, &ranker, tr, dv, &self.corpus, cfg)?;
                    written.push(self.write_model(stage, RETRIEVER1.0, report.model)?);
                }
                Stage::Eval => {
                    let split = self.eval_split();
                    let ex = self.examples(split).unwrap_or(&[]);
                    let mut rows = Vec::new();
                    for kind in [PoolKind::P0, PoolKind::P0Reranked, PoolKind::P1, PoolKind::P1Reranked] {
                        let pools = self.read_pools(stage, kind, split)?;
                        for metric in Metric::ALL {
                            rows.push(EvalRow {
                                pools: kind.stem().to_string(),
                                split: split.name().to_string(),
                                report: evaluate_pools(&pools, ex, &self.corpus, metric, cfg.top_k_export)?,
                            });
                        }
                    }
                    let path = self.path(REPORT_FILE);
                    write_records(&path, &self.header(stage), &rows)?;
                    written.push(path);
                }
            }
            Ok(())
        };
        run().map_err(wrap)?;
        Ok(written)
    }

    /// Warm up one retriever per hard-negative source and evaluate each on
    /// the report split under the distillation metric.
    pub fn ablate_negatives(&self) -> Result<(Vec<AblationRow>, PathBuf)> {
        let cfg = &self.config.training;
        let split = self.eval_split();
        let eval_ex = self.examples(split).unwrap_or(&[]);
        let mut rows = Vec::new();
        for source in [HardNegativeSource::Tfidf, HardNegativeSource::ConceptMatch] {
            let pools = |s: SplitName| -> Result<Vec<CandidatePool>> {
                match self.examples(s) {
                    Some(ex) => hard_negative_pools(source, &self.corpus, ex, cfg.k),
                    None => Ok(Vec::new()),
                }
            };
            let (train, dev) = (pools(SplitName::Train)?, pools(SplitName::Dev)?);
            let (tr, dv) = self.split_pair(&train, &dev)?;
            let retriever = warmup_retriever(tr, dv, &self.corpus, &self.vocab, cfg)?.model;
            let retrieved = retrieve_pools(&retriever, &self.corpus, eval_ex, cfg.k)?;
            rows.push(AblationRow {
                source,
                report: evaluate_pools(&retrieved, eval_ex, &self.corpus, cfg.distill_metric, cfg.top_k_export)?,
            });
        }
        let path = self.path(ABLATION_FILE);
        write_records(&path, &self.header(Stage::Warmup), &rows)?;
        Ok((rows, path))
    }
}

/// Run the configured stages in pipeline order.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let ws = Workspace::open(config)?;
    let mut stages = config.stages.clone();
    stages.sort();
    stages.dedup();
    let mut written = Vec::new();
    for stage in stages {
        written.extend(ws.run(stage)?);
    }
    Ok(written)
}

/// Hard-negative ablation (tfidf vs. concept match) for a config. Also
/// writes the rows to `out_dir`.
pub fn ablation_hard_negatives(config: &PipelineConfig) -> Result<Vec<AblationRow>> {
    Ok(Workspace::open(config)?.ablate_negatives()?.0)
}
