use crate::error::{Error, Result};

/// A query with candidates and the index of the one that should win.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingExample<Q, C> {
    pub query: Q,
    pub candidates: Vec<C>,
    pub correct: usize,
}

/// Index of the maximum, first index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Fraction of examples whose highest-scoring candidate is the correct one.
pub fn recall_at_1<Q, C, F>(examples: &[RankingExample<Q, C>], mut score: F) -> Result<f64>
where
    F: FnMut(&Q, &C) -> Result<f64>,
{
    if examples.is_empty() {
        return Err(Error::invalid("no evaluation examples"));
    }
    let mut hits = 0usize;
    for ex in examples {
        if ex.candidates.is_empty() {
            return Err(Error::invalid("evaluation example without candidates"));
        }
        let scores = ex
            .candidates
            .iter()
            .map(|c| score(&ex.query, c))
            .collect::<Result<Vec<_>>>()?;
        if argmax(&scores) == Some(ex.correct) {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}
