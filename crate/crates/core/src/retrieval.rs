//! Exact cosine top-k search over chunk embeddings.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_entities, Chunk};
use crate::providers::{EmbeddingVector, ModelProvider, ProviderError};

/// Retrieval depth used for answer grounding.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("duplicate chunk id `{0}`")]
    DuplicateChunkId(String),
    #[error("entry vector for `{0}` is not normalized")]
    NotNormalized(String),
    #[error("entry `{0}` does not match its chunk")]
    ChunkMismatch(String),
    #[error("index file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("chunk `{0}` listed in the index is missing from the corpus")]
    MissingChunk(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cosine similarity. For two normalized vectors this is their dot product.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dims != b.dims || a.values.len() != b.values.len() {
        return Err(RetrievalError::DimensionMismatch(a.dims, b.dims));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    if a.normalized && b.normalized {
        return Ok(dot);
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk_id: String,
    pub vector: EmbeddingVector,
    pub doc_id: String,
    pub seq: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub score: f64,
    pub chunk: Chunk,
}

/// On-disk line shape of a persisted index.
#[derive(Serialize, Deserialize)]
struct IndexLine {
    chunk_id: String,
    dims: usize,
    values: Vec<f64>,
    doc_id: String,
    seq: usize,
}

#[derive(Debug, Default, Clone)]
pub struct VectorIndex {
    entries: Vec<IndexEntry>,
    chunks: Vec<Chunk>,
    positions: HashMap<String, usize>,
}

/// Heap element ordered so that the *worst* candidate sits at the top.
struct Candidate<'a> {
    score: f64,
    chunk_id: &'a str,
    pos: usize,
}

impl Candidate<'_> {
    /// Ranking order: higher score first, then smaller chunk id.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.chunk_id.cmp(other.chunk_id))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.positions.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn add(&mut self, entry: IndexEntry, chunk: Chunk) -> Result<(), RetrievalError> {
        if self.positions.contains_key(&entry.chunk_id) {
            return Err(RetrievalError::DuplicateChunkId(entry.chunk_id));
        }
        if !entry.vector.normalized {
            return Err(RetrievalError::NotNormalized(entry.chunk_id));
        }
        if entry.chunk_id != chunk.chunk_id || entry.doc_id != chunk.doc_id || entry.seq != chunk.seq {
            return Err(RetrievalError::ChunkMismatch(entry.chunk_id));
        }
        if let Some(first) = self.entries.first() {
            if first.vector.dims != entry.vector.dims {
                return Err(RetrievalError::DimensionMismatch(first.vector.dims, entry.vector.dims));
            }
        }
        self.positions.insert(entry.chunk_id.clone(), self.entries.len());
        self.entries.push(entry);
        self.chunks.push(chunk);
        Ok(())
    }

    /// Embeds a chunk's `index_text` and adds it.
    pub fn add_chunk(&mut self, chunk: Chunk, provider: &dyn ModelProvider) -> Result<(), RetrievalError> {
        let vector = provider.embed_text(&chunk.index_text)?;
        let entry = IndexEntry {
            chunk_id: chunk.chunk_id.clone(),
            vector,
            doc_id: chunk.doc_id.clone(),
            seq: chunk.seq,
        };
        self.add(entry, chunk)
    }

    pub fn build(chunks: impl IntoIterator<Item = Chunk>, provider: &dyn ModelProvider) -> Result<Self, RetrievalError> {
        let mut index = Self::new();
        for chunk in chunks {
            index.add_chunk(chunk, provider)?;
        }
        Ok(index)
    }

    /// Scores every entry against an already-embedded query.
    pub fn search_vector(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredChunk>, RetrievalError> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k + 1);
        for (pos, entry) in self.entries.iter().enumerate() {
            let score = cosine_similarity(query, &entry.vector)?;
            heap.push(Candidate { score, chunk_id: &entry.chunk_id, pos });
            if heap.len() > k {
                heap.pop();
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| ScoredChunk {
                chunk_id: c.chunk_id.to_string(),
                score: c.score,
                chunk: self.chunks[c.pos].clone(),
            })
            .collect())
    }

    /// Embeds the normalized query and returns the `min(k, len)` best chunks,
    /// ordered by score descending with ties broken by ascending chunk id.
    pub fn search_top_k(
        &self,
        query_text: &str,
        k: usize,
        provider: &dyn ModelProvider,
    ) -> Result<Vec<ScoredChunk>, RetrievalError> {
        let query = provider.embed_text(&normalize_entities(query_text))?;
        if self.is_empty() {
            return Ok(Vec::new());
        }
        self.search_vector(&query, k)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<(), RetrievalError> {
        for entry in &self.entries {
            let line = IndexLine {
                chunk_id: entry.chunk_id.clone(),
                dims: entry.vector.dims,
                values: entry.vector.values.clone(),
                doc_id: entry.doc_id.clone(),
                seq: entry.seq,
            };
            serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Loads a persisted index and reattaches chunk text from `chunks`.
    pub fn load(path: &Path, chunks: &[Chunk]) -> Result<Self, RetrievalError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), chunks)
    }

    pub fn read_from(reader: impl BufRead, chunks: &[Chunk]) -> Result<Self, RetrievalError> {
        let by_id: HashMap<&str, &Chunk> = chunks.iter().map(|c| (c.chunk_id.as_str(), c)).collect();
        let mut index = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: IndexLine = serde_json::from_str(&line)
                .map_err(|e| RetrievalError::Parse { line: i + 1, message: e.to_string() })?;
            if parsed.values.len() != parsed.dims {
                return Err(RetrievalError::Parse {
                    line: i + 1,
                    message: format!("dims {} but {} values", parsed.dims, parsed.values.len()),
                });
            }
            let chunk = by_id
                .get(parsed.chunk_id.as_str())
                .copied()
                .cloned()
                .ok_or_else(|| RetrievalError::MissingChunk(parsed.chunk_id.clone()))?;
            let vector = EmbeddingVector { dims: parsed.dims, values: parsed.values, normalized: true };
            if (vector.norm() - 1.0).abs() > 1e-6 {
                return Err(RetrievalError::NotNormalized(parsed.chunk_id));
            }
            let entry = IndexEntry { chunk_id: parsed.chunk_id, vector, doc_id: parsed.doc_id, seq: parsed.seq };
            index.add(entry, chunk)?;
        }
        Ok(index)
    }
}
