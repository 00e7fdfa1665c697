mod common;

use common::graded_toy;
use metric_distill::corpus::{filter_corpus, DatasetExample, ExclusionSet};
use metric_distill::dense::{ParamSet, Vocab};
use metric_distill::metrics::Metric;
use metric_distill::pool::CandidatePool;
use metric_distill::training::{
    distill_retriever, distill_retriever_direct, initial_ranker, initial_retriever, train_ranker, warmup_retriever,
    Adam, RankerObjective, Split, TrainingConfig,
};

fn toy_config() -> TrainingConfig {
    TrainingConfig {
        batch_size: 10,
        pool_size: 5,
        k: 4,
        seed: 3,
        ..TrainingConfig::default()
    }
}

#[test]
fn zero_epochs_return_the_starting_model() {
    let toy = graded_toy(4);
    let vocab = Vocab::build(&toy.corpus, &toy.examples);
    let cfg = TrainingConfig {
        epochs: 0,
        ..toy_config()
    };
    let split = Split::new(&toy.examples, &toy.pools).unwrap();

    let warm = warmup_retriever(split, split, &toy.corpus, &vocab, &cfg).unwrap();
    assert_eq!(warm.model, initial_retriever(&vocab, &cfg));
    assert_eq!(warm.best_epoch, 0);
    assert!(warm.history.is_empty());

    let ranker = train_ranker(split, split, &toy.corpus, &vocab, Metric::Bleu4, RankerObjective::ListMle, &cfg).unwrap();
    assert_eq!(ranker.model, initial_ranker(&vocab, &cfg));

    let mut rng_cfg = cfg.clone();
    rng_cfg.seed = 99;
    let start = initial_retriever(&vocab, &rng_cfg);
    let distilled = distill_retriever(&start, &ranker.model, split, split, &toy.corpus, &cfg).unwrap();
    assert_eq!(distilled.model, start);
    let direct = distill_retriever_direct(&start, Metric::Bleu4, split, split, &toy.corpus, &cfg).unwrap();
    assert_eq!(direct.model, start);
}

#[test]
fn training_is_deterministic_per_seed() {
    let toy = graded_toy(6);
    let vocab = Vocab::build(&toy.corpus, &toy.examples);
    let cfg = TrainingConfig {
        epochs: 5,
        ..toy_config()
    };
    let split = Split::new(&toy.examples, &toy.pools).unwrap();
    let run = |cfg: &TrainingConfig| {
        train_ranker(split, split, &toy.corpus, &vocab, Metric::RougeL, RankerObjective::ListMle, cfg)
            .unwrap()
            .model
    };
    assert_eq!(run(&cfg), run(&cfg));
    let other = TrainingConfig { seed: 4, ..cfg.clone() };
    assert_ne!(run(&cfg), run(&other));

    let warm = |cfg: &TrainingConfig| warmup_retriever(split, split, &toy.corpus, &vocab, cfg).unwrap().model;
    assert_eq!(warm(&cfg), warm(&cfg));
}

/// Each concept set shares vocabulary only with its own reference, so the
/// warm-up retriever ranks every positive first in its validation list.
#[test]
fn warmup_separates_a_separable_toy() {
    let n = 50;
    let examples: Vec<DatasetExample> = (0..n)
        .map(|i| {
            DatasetExample::new([format!("q{i}a"), format!("q{i}b")], [format!("q{i}a q{i}b r{i}c r{i}d")]).unwrap()
        })
        .collect();
    let raw: Vec<String> = (0..60).map(|j| format!("n{j}a n{j}b n{j}c n{j}d")).collect();
    let corpus = filter_corpus(&raw, &ExclusionSet::from_examples(&examples));
    let pools: Vec<CandidatePool> = (0..n)
        .map(|i| CandidatePool::new(i, (0..10).map(|j| (i + j) % corpus.len()).collect()))
        .collect();
    let vocab = Vocab::build(&corpus, &examples);
    let cfg = TrainingConfig {
        epochs: 60,
        patience: 60,
        seed: 1,
        ..TrainingConfig::default()
    };
    let split = Split::new(&examples, &pools).unwrap();
    let report = warmup_retriever(split, split, &corpus, &vocab, &cfg).unwrap();
    assert_eq!(report.best_score, 1.0, "history {:?}", report.history);

    // recheck by brute force against each example's own pool
    let model = &report.model;
    for (i, ex) in examples.iter().enumerate() {
        let pos = model.similarity(&ex.concept_set, &ex.references[0].tokens).unwrap();
        for &id in &pools[i].ids {
            let rec = corpus.get(id).unwrap();
            assert!(model.similarity(&ex.concept_set, &rec.tokens).unwrap() < pos, "example {i} vs {:?}", rec.raw);
        }
    }
}

/// With a fixed teacher, distillation never moves a student's ordering of a
/// training list further from the teacher's.
#[test]
fn distillation_moves_student_towards_teacher() {
    let toy = graded_toy(10);
    let vocab = Vocab::build(&toy.corpus, &toy.examples);
    let cfg = TrainingConfig {
        epochs: 300,
        patience: 300,
        ..toy_config()
    };
    let split = Split::new(&toy.examples, &toy.pools).unwrap();
    let teacher = train_ranker(split, Split::empty(), &toy.corpus, &vocab, Metric::Bleu4, RankerObjective::ListMle, &cfg)
        .unwrap()
        .model;
    let student = initial_retriever(&vocab, &cfg);
    let distilled = distill_retriever(&student, &teacher, split, Split::empty(), &toy.corpus, &cfg)
        .unwrap()
        .model;
    for e in 0..toy.examples.len() {
        let cs = &toy.examples[e].concept_set;
        let t = |s: &[String]| teacher.score(cs, s).unwrap();
        let before = toy.tau_between(e, t, |s| student.similarity(cs, s).unwrap());
        let after = toy.tau_between(e, t, |s| distilled.similarity(cs, s).unwrap());
        assert!(after >= before, "example {e}: tau {before} -> {after}");
        assert_eq!(after, 1.0, "example {e}");
    }
}

#[test]
fn singleton_lists_leave_direct_distillation_unchanged() {
    let toy = graded_toy(4);
    let vocab = Vocab::build(&toy.corpus, &toy.examples);
    let cfg = TrainingConfig {
        epochs: 5,
        pool_size: 1,
        ..toy_config()
    };
    let split = Split::new(&toy.examples, &toy.pools).unwrap();
    let start = initial_retriever(&vocab, &cfg);
    let report = distill_retriever_direct(&start, Metric::Bleu4, split, Split::empty(), &toy.corpus, &cfg).unwrap();
    assert!(report.history.iter().all(|h| h.train_loss == 0.0));
    assert_eq!(report.model, start);
}

#[test]
fn adam_ignores_zero_gradients() {
    let toy = graded_toy(2);
    let vocab = Vocab::build(&toy.corpus, &toy.examples);
    let mut model = initial_ranker(&vocab, &toy_config());
    let before = model.clone();
    let zeros = model.zeros_like();
    let mut adam = Adam::new(0.1);
    for _ in 0..3 {
        adam.step(&mut model, &zeros);
    }
    assert_eq!(adam.steps(), 3);
    assert_eq!(model.flatten(), before.flatten());
}
