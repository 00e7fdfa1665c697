//! Exact inner-product index over `f32` rows.
//!
//! On-disk layout: `n: u64`, `d: u64`, then `n·d` little-endian `f32` values
//! row by row; ids live next to it in a JSONL file of `{"row": i, "id": id}`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::DualEncoder;
use crate::corpus::{Corpus, SentenceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIpIndex {
    dim: usize,
    rows: Vec<f32>,
    ids: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct IdMapLine {
    row: usize,
    id: usize,
}

impl FlatIpIndex {
    pub fn build<V: AsRef<[f32]>>(vectors: &[V], ids: &[usize]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("cannot build an index from no vectors"));
        }
        if vectors.len() != ids.len() {
            return Err(Error::LengthMismatch {
                left: vectors.len(),
                right: ids.len(),
            });
        }
        let dim = vectors[0].as_ref().len();
        if dim == 0 {
            return Err(Error::invalid("zero-dimensional vectors"));
        }
        let mut rows = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            rows.extend_from_slice(v);
        }
        Ok(Self {
            dim,
            rows,
            ids: ids.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Inner products of `query` with every row, accumulated in `f64`.
    pub fn scores(&self, query: &[f32]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(self
            .rows
            .chunks_exact(self.dim)
            .map(|row| {
                row.iter()
                    .zip(query)
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum()
            })
            .collect())
    }

    /// Top `min(k, n)` `(id, score)` pairs by descending inner product, ties by
    /// ascending id.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let scores = self.scores(query)?;
        let mut hits: Vec<(usize, f64)> = self.ids.iter().copied().zip(scores).collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, cmp);
            hits.truncate(k);
        }
        hits.sort_unstable_by(cmp);
        Ok(hits)
    }

    pub fn save(&self, bin_path: impl AsRef<Path>, ids_path: impl AsRef<Path>) -> Result<()> {
        let bin_path = bin_path.as_ref();
        let mut buf = Vec::with_capacity(16 + 4 * self.rows.len());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in &self.rows {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(bin_path, buf).map_err(|e| Error::io(bin_path, e))?;

        let ids_path = ids_path.as_ref();
        let mut out = String::new();
        for (row, &id) in self.ids.iter().enumerate() {
            out.push_str(&serde_json::to_string(&IdMapLine { row, id })?);
            out.push('\n');
        }
        fs::write(ids_path, out).map_err(|e| Error::io(ids_path, e))
    }

    pub fn load(bin_path: impl AsRef<Path>, ids_path: impl AsRef<Path>) -> Result<Self> {
        let bin_path = bin_path.as_ref();
        let bytes = fs::read(bin_path).map_err(|e| Error::io(bin_path, e))?;
        let bad = |msg: &str| Error::Parse {
            path: bin_path.to_path_buf(),
            line: 0,
            message: msg.to_string(),
        };
        if bytes.len() < 16 {
            return Err(bad("truncated header"));
        }
        let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() != n * dim * 4 {
            return Err(bad("body length does not match n × d"));
        }
        let rows: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let ids_path = ids_path.as_ref();
        let file = fs::File::open(ids_path).map_err(|e| Error::io(ids_path, e))?;
        let mut ids = vec![usize::MAX; n];
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(ids_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: IdMapLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: ids_path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if parsed.row >= n {
                return Err(Error::Parse {
                    path: ids_path.to_path_buf(),
                    line: i + 1,
                    message: format!("row {} out of range", parsed.row),
                });
            }
            ids[parsed.row] = parsed.id;
        }
        if ids.contains(&usize::MAX) {
            return Err(Error::Parse {
                path: ids_path.to_path_buf(),
                line: 0,
                message: "id map does not cover every row".into(),
            });
        }
        Ok(Self { dim, rows, ids })
    }
}

/// Anything that can embed corpus sentences for indexing.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;
    fn encode_record(&self, record: &SentenceRecord) -> Result<Vec<f32>>;
}

impl SentenceEncoder for DualEncoder {
    fn dim(&self) -> usize {
        DualEncoder::dim(self)
    }

    fn encode_record(&self, record: &SentenceRecord) -> Result<Vec<f32>> {
        Ok(self
            .encode_sentence(&record.tokens)?
            .into_iter()
            .map(|v| v as f32)
            .collect())
    }
}

/// Sentence vectors produced outside this crate, keyed by corpus id.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    vectors: std::collections::HashMap<usize, Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: usize,
    vec: Vec<f32>,
}

impl PrecomputedEmbeddings {
    /// Parse a JSONL file of `{"id": int, "vec": [float, ...]}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let parsed: EmbeddingLine =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            out.insert(parsed.id, parsed.vec).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, id: usize, vec: Vec<f32>) -> Result<()> {
        if vec.is_empty() || vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("embedding {id} is empty or non-finite")));
        }
        if self.vectors.is_empty() {
            self.dim = vec.len();
        } else if vec.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vec.len(),
            });
        }
        self.vectors.insert(id, vec);
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut ids: Vec<&usize> = self.vectors.keys().collect();
        ids.sort_unstable();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for id in ids {
            let line = serde_json::to_string(&EmbeddingLine {
                id: *id,
                vec: self.vectors[id].clone(),
            })?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl SentenceEncoder for PrecomputedEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_record(&self, record: &SentenceRecord) -> Result<Vec<f32>> {
        self.vectors
            .get(&record.id)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no embedding for sentence {}", record.id)))
    }
}

/// Embed every corpus sentence and index it under its corpus id.
pub fn index_corpus<E: SentenceEncoder + ?Sized>(encoder: &E, corpus: &Corpus) -> Result<FlatIpIndex> {
    let vectors = corpus
        .records()
        .iter()
        .map(|r| encoder.encode_record(r))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<usize> = corpus.records().iter().map(|r| r.id).collect();
    FlatIpIndex::build(&vectors, &ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, ExclusionSet};

    #[test]
    fn worked_example() {
        let idx = FlatIpIndex::build(&[vec![1.0f32, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[0, 1, 2]).unwrap();
        let hits = idx.search(&[1.0, 0.1], 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.0).collect::<Vec<_>>(), vec![2, 0]);
        assert!((hits[0].1 - 1.1).abs() < 1e-6);
        assert!((hits[1].1 - 1.0).abs() < 1e-12);

        let all = idx.search(&[1.0, 0.1], 10).unwrap();
        assert_eq!(all.len(), 3);
        let zero = idx.search(&[0.0, 0.0], 3).unwrap();
        assert_eq!(zero.iter().map(|h| h.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(zero.iter().all(|h| h.1 == 0.0));
    }

    #[test]
    fn stored_vector_is_top1() {
        let vecs: Vec<Vec<f32>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let ids = [10, 20, 30, 40];
        let idx = FlatIpIndex::build(&vecs, &ids).unwrap();
        assert_eq!(idx.len(), 4);
        for (v, id) in vecs.iter().zip(ids) {
            assert_eq!(idx.search(v, 1).unwrap()[0].0, id);
        }
        let again = FlatIpIndex::build(&vecs, &ids).unwrap();
        assert_eq!(again.search(&[0.3, 0.2, 0.1, 0.0], 4).unwrap(), idx.search(&[0.3, 0.2, 0.1, 0.0], 4).unwrap());
    }

    #[test]
    fn build_errors() {
        let empty: Vec<Vec<f32>> = vec![];
        assert!(FlatIpIndex::build(&empty, &[]).is_err());
        assert!(FlatIpIndex::build(&[vec![1.0f32]], &[0, 1]).is_err());
        assert!(FlatIpIndex::build(&[vec![1.0f32], vec![1.0, 2.0]], &[0, 1]).is_err());
        let idx = FlatIpIndex::build(&[vec![1.0f32]], &[0]).unwrap();
        assert!(idx.search(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn persistence_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let idx = FlatIpIndex::build(&[vec![0.25f32, -1.5, 3.0], vec![1e-7, 2.0, -0.0]], &[7, 3]).unwrap();
        let (bin, ids) = (dir.path().join("i.bin"), dir.path().join("i.jsonl"));
        idx.save(&bin, &ids).unwrap();
        let bytes = fs::read(&bin).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * 3 * 4);
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &3u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &0.25f32.to_le_bytes());
        assert_eq!(FlatIpIndex::load(&bin, &ids).unwrap(), idx);
        assert_eq!(fs::read_to_string(&ids).unwrap(), "{\"row\":0,\"id\":7}\n{\"row\":1,\"id\":3}\n");
    }

    #[test]
    fn precomputed_embeddings_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        fs::write(&path, "{\"id\":0,\"vec\":[1.0,0.0]}\n{\"id\":1,\"vec\":[0.0,1.0]}\n").unwrap();
        let emb = PrecomputedEmbeddings::load(&path).unwrap();
        let corpus = filter_corpus(["a b c d", "e f g h"], &ExclusionSet::default());
        let idx = index_corpus(&emb, &corpus).unwrap();
        assert_eq!(idx.search(&[0.0, 2.0], 1).unwrap()[0], (1, 2.0));

        fs::write(&path, "{\"id\":0,\"vec\":[1.0]}\n{\"id\":1,\"vec\":[0.0,1.0]}\n").unwrap();
        match PrecomputedEmbeddings::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let out = dir.path().join("out.jsonl");
        emb.save(&out).unwrap();
        assert_eq!(PrecomputedEmbeddings::load(&out).unwrap().len(), 2);
    }
}
