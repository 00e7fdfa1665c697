//! Seeded synthetic task: a small corpus over a closed vocabulary and concept
//! sets whose references have noisy near-copies in the corpus.
//!
//! Every concept has a few collocate tokens. A concept set's template
//! sentence interleaves its concepts, one collocate each and filler words;
//! references are light paraphrases of the template. The corpus holds graded
//! corruptions of each template (so metric quality varies smoothly within a
//! candidate pool) plus distractors that mention concepts with random
//! context.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::DatasetExample;
use crate::error::Result;
use crate::training::TrainingConfig;

/// Train and dev sizes for the default fixture; the remaining 40 sets are test.
pub const TRAIN_SETS: usize = 120;
pub const DEV_SETS: usize = 40;

/// Training settings the fixture is calibrated for. Early stopping on a
/// 40-example dev split is noisy, so patience is longer than the default.
pub fn training_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        seed,
        epochs: 40,
        patience: 10,
        learning_rate: 1e-2,
        ..TrainingConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub seed: u64,
    pub vocab_size: usize,
    pub num_concepts: usize,
    pub num_function_words: usize,
    pub collocates_per_concept: usize,
    pub concepts_per_set: usize,
    pub num_sets: usize,
    pub references_per_set: usize,
    pub variants_per_set: usize,
    pub corpus_size: usize,
    /// Function words only references use (their register differs from the
    /// corpus, as crowd-written references do).
    pub reference_register_words: usize,
    /// Fillers each reference rewrites.
    pub reference_swaps: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 2023,
            vocab_size: 500,
            num_concepts: 30,
            num_function_words: 16,
            collocates_per_concept: 3,
            concepts_per_set: 3,
            num_sets: 200,
            references_per_set: 2,
            variants_per_set: 8,
            corpus_size: 2000,
            reference_register_words: 4,
            reference_swaps: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Vec<String>,
    pub examples: Vec<DatasetExample>,
}

impl Fixture {
    /// First `train` examples, the next `dev`, and the rest, in order.
    pub fn split(&self, train: usize, dev: usize) -> (Vec<DatasetExample>, Vec<DatasetExample>, Vec<DatasetExample>) {
        let ex = &self.examples;
        let a = train.min(ex.len());
        let b = (train + dev).min(ex.len());
        (ex[..a].to_vec(), ex[a..b].to_vec(), ex[b..].to_vec())
    }
}

fn word(i: usize) -> String {
    format!("w{i:03}")
}

pub fn generate(cfg: &FixtureConfig) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let concepts: Vec<usize> = (0..cfg.num_concepts).collect();
    let content_start = cfg.num_concepts;
    let content_end = cfg.vocab_size - cfg.num_function_words;
    let content: Vec<usize> = (content_start..content_end).collect();
    let register_start = cfg.vocab_size - cfg.reference_register_words;
    let function: Vec<usize> = (content_end..register_start).collect();
    let register: Vec<usize> = (register_start..cfg.vocab_size).collect();

    let collocates: Vec<Vec<usize>> = concepts
        .iter()
        .map(|_| {
            content
                .choose_multiple(&mut rng, cfg.collocates_per_concept)
                .copied()
                .collect()
        })
        .collect();

    // distinct concept sets
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(cfg.num_sets);
    while sets.len() < cfg.num_sets {
        let mut s: Vec<usize> = concepts
            .choose_multiple(&mut rng, cfg.concepts_per_set)
            .copied()
            .collect();
        s.sort_unstable();
        if !sets.contains(&s) {
            sets.push(s);
        }
    }

    let mut examples = Vec::with_capacity(cfg.num_sets);
    let mut corpus: Vec<Vec<usize>> = Vec::with_capacity(cfg.corpus_size);
    for set in &sets {
        let mut order = set.clone();
        order.shuffle(&mut rng);
        let mut template = Vec::new();
        for &c in &order {
            template.push(*function.choose(&mut rng).unwrap());
            template.push(c);
            template.push(*collocates[c].choose(&mut rng).unwrap());
        }
        template.push(*function.choose(&mut rng).unwrap());

        let mut refs: Vec<Vec<usize>> = Vec::new();
        while refs.len() < cfg.references_per_set {
            let mut r = template.clone();
            // paraphrase: swap fillers, preferring the reference register
            let fillers: Vec<usize> = (0..r.len()).filter(|&p| function.contains(&r[p])).collect();
            let pick = if register.is_empty() { &function } else { &register };
            for &p in fillers.choose_multiple(&mut rng, cfg.reference_swaps) {
                r[p] = *pick.choose(&mut rng).unwrap();
            }
            if rng.gen_bool(0.5) {
                r.push(*function.choose(&mut rng).unwrap());
            }
            if !refs.contains(&r) {
                refs.push(r);
            }
        }

        for v in 0..cfg.variants_per_set {
            let level = (v as f64 + 1.0) / (cfg.variants_per_set as f64 + 1.0);
            let mut s = template.clone();
            for tok in s.iter_mut() {
                let is_concept = *tok < cfg.num_concepts;
                let p = if is_concept { level * 0.5 } else { level };
                if rng.gen_bool(p) {
                    *tok = if is_concept {
                        *concepts.choose(&mut rng).unwrap()
                    } else if rng.gen_bool(0.5) {
                        *content.choose(&mut rng).unwrap()
                    } else {
                        *function.choose(&mut rng).unwrap()
                    };
                }
            }
            for _ in 0..((level * 3.0) as usize) {
                let i = rng.gen_range(0..s.len() - 1);
                s.swap(i, i + 1);
            }
            if rng.gen_bool(0.5) {
                s.push(*function.choose(&mut rng).unwrap());
            }
            corpus.push(s);
        }
        examples.push((set.clone(), refs));
    }

    while corpus.len() < cfg.corpus_size {
        let len = rng.gen_range(8..=14);
        let mut s: Vec<usize> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    *content.choose(&mut rng).unwrap()
                } else {
                    *function.choose(&mut rng).unwrap()
                }
            })
            .collect();
        let k = rng.gen_range(1..=cfg.concepts_per_set);
        for &c in concepts.choose_multiple(&mut rng, k) {
            let p = rng.gen_range(0..s.len());
            s[p] = c;
        }
        corpus.push(s);
    }
    corpus.truncate(cfg.corpus_size);
    corpus.shuffle(&mut rng);
    examples.shuffle(&mut rng);

    let render = |s: &[usize]| s.iter().map(|&t| word(t)).collect::<Vec<_>>().join(" ");
    let examples = examples
        .into_iter()
        .map(|(set, refs)| {
            DatasetExample::new(
                set.iter().map(|&c| word(c)),
                refs.iter().map(|r| render(r)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fixture {
        corpus: corpus.iter().map(|s| render(s)).collect(),
        examples,
    })
}
