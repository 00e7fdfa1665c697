//! Sentence-level generation metrics and the quality orderings they induce.
//!
//! Only the ordering a metric induces over a candidate list is used as a
//! training signal, so the metrics favour determinism and well-defined edge
//! cases over matching any particular toolkit's corpus-level numbers.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A metric value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityScore(f64);

impl QualityScore {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("quality score {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Metric used to rank candidate sentences against references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "bleu3")]
    Bleu3,
    #[default]
    #[serde(rename = "bleu4")]
    Bleu4,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bleu3, Metric::Bleu4, Metric::Rouge2, Metric::RougeL];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu3 => "bleu3",
            Metric::Bleu4 => "bleu4",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
        }
    }

    pub fn score<S: AsRef<str>, R: AsRef<[S]>>(
        self,
        candidate: &[S],
        references: &[R],
    ) -> Result<QualityScore> {
        match self {
            Metric::Bleu3 => bleu_sentence(candidate, references, 3),
            Metric::Bleu4 => bleu_sentence(candidate, references, 4),
            Metric::Rouge2 => rouge2(candidate, references),
            Metric::RougeL => rouge_l(candidate, references),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

fn check_inputs<S: AsRef<str>, R: AsRef<[S]>>(candidate: &[S], references: &[R]) -> Result<()> {
    if candidate.is_empty() {
        return Err(Error::invalid("empty candidate"));
    }
    if references.is_empty() {
        return Err(Error::invalid("empty reference list"));
    }
    if references.iter().any(|r| r.as_ref().is_empty()) {
        return Err(Error::invalid("empty reference"));
    }
    Ok(())
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap<K: Eq + Hash>(cand: &HashMap<K, usize>, reference: &HashMap<K, usize>) -> usize {
    cand.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Smoothed sentence BLEU with uniform weights over orders `1..=max_n`.
///
/// Clipping uses the maximum count of each n-gram over all references. Orders
/// for which the candidate has no n-grams at all (candidate shorter than `n`)
/// are left out of the geometric mean; a zero precision at order `n >= 2` is
/// floored to `1 / (2c)`; a zero unigram precision gives 0.
pub fn bleu_sentence<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
    max_n: usize,
) -> Result<QualityScore> {
    check_inputs(candidate, references)?;
    if max_n == 0 {
        return Err(Error::invalid("max_n must be at least 1"));
    }
    let c = candidate.len();
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n.min(c) {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (g, cnt) in ngram_counts(r.as_ref(), n) {
                let slot = max_ref.entry(g).or_insert(0);
                *slot = (*slot).max(cnt);
            }
        }
        let matched = clipped_overlap(&cand, &max_ref);
        let total = c + 1 - n;
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return QualityScore::new(0.0);
        } else {
            1.0 / (2.0 * c as f64)
        };
        log_sum += p.ln();
        orders += 1;
    }

    // Closest reference length, ties to the shorter one.
    let r = references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(c);
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let score = bp * (log_sum / orders as f64).exp();
    QualityScore::new(score.clamp(0.0, 1.0))
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Bigram-overlap F1, maximised over references. Candidates shorter than two
/// tokens score 0.
pub fn rouge2<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
) -> Result<QualityScore> {
    check_inputs(candidate, references)?;
    if candidate.len() < 2 {
        return QualityScore::new(0.0);
    }
    let cand = ngram_counts(candidate, 2);
    let cand_total = (candidate.len() - 1) as f64;
    let best = references
        .iter()
        .map(|r| {
            let r = r.as_ref();
            if r.len() < 2 {
                return 0.0;
            }
            let overlap = clipped_overlap(&cand, &ngram_counts(r, 2)) as f64;
            f1(overlap / cand_total, overlap / (r.len() - 1) as f64)
        })
        .fold(0.0, f64::max);
    QualityScore::new(best.clamp(0.0, 1.0))
}

fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1, maximised over references.
pub fn rouge_l<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
) -> Result<QualityScore> {
    check_inputs(candidate, references)?;
    let best = references
        .iter()
        .map(|r| {
            let r = r.as_ref();
            let l = lcs_len(candidate, r) as f64;
            f1(l / candidate.len() as f64, l / r.len() as f64)
        })
        .fold(0.0, f64::max);
    QualityScore::new(best.clamp(0.0, 1.0))
}

/// Candidate indices sorted by descending metric score, ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityOrdering {
    order: Vec<usize>,
    scores: Vec<f64>,
}

impl QualityOrdering {
    /// Build the ordering from precomputed scores.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let order = descending_order(&scores);
        Self { order, scores }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Index of the best candidate.
    pub fn best(&self) -> Option<usize> {
        self.order.first().copied()
    }
}

/// Indices sorted by descending value; equal values keep ascending index.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

pub fn quality_order<S: AsRef<str>, C: AsRef<[S]>, R: AsRef<[S]>>(
    candidates: &[C],
    references: &[R],
    metric: Metric,
) -> Result<QualityOrdering> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to order"));
    }
    let scores = candidates
        .iter()
        .map(|c| metric.score(c.as_ref(), references).map(QualityScore::value))
        .collect::<Result<Vec<_>>>()?;
    Ok(QualityOrdering::from_scores(scores))
}

/// Kendall rank correlation between two rankings of the items `0..N`, each
/// given as a list of items from best to worst.
pub fn kendall_tau(order_a: &[usize], order_b: &[usize]) -> Result<f64> {
    if order_a.len() != order_b.len() {
        return Err(Error::LengthMismatch {
            left: order_a.len(),
            right: order_b.len(),
        });
    }
    let n = order_a.len();
    if n < 2 {
        return Err(Error::invalid("kendall tau needs at least two items"));
    }
    let pos_a = positions(order_a)?;
    let pos_b = positions(order_b)?;
    let mut score: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = pos_a[i] < pos_a[j];
            let b = pos_b[i] < pos_b[j];
            score += if a == b { 1 } else { -1 };
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(score as f64 / pairs)
}

fn positions(order: &[usize]) -> Result<Vec<usize>> {
    let mut pos = vec![usize::MAX; order.len()];
    for (rank, &item) in order.iter().enumerate() {
        if item >= order.len() || pos[item] != usize::MAX {
            return Err(Error::invalid("ordering is not a permutation"));
        }
        pos[item] = rank;
    }
    Ok(pos)
}
