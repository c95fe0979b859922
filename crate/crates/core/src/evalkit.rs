//! Benchmark evaluation and expert score aggregation.
//!
//! The six metrics are computed from stub-compatible embeddings so that a
//! full report is reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_entities, split_sentences};
use crate::providers::{EmbeddingVector, ModelProvider, ProviderError};
use crate::retrieval::ScoredChunk;

/// Default similarity threshold for the thresholded metrics.
pub const DEFAULT_TAU: f64 = 0.5;

pub const EXPERT_CSV_HEADER: &str = "question_id,model_id,relevance,accuracy,specification,citation_authority,overall";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("item `{item_id}`: {message}")]
    Schema { item_id: String, message: String },
    #[error("duplicate item_id `{0}`")]
    DuplicateId(String),
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error("models `{model_a}` and `{model_b}` share no scored questions")]
    MismatchedQuestionSets { model_a: String, model_b: String },
    #[error("expert scores line {line}: {message}")]
    ScoreFormat { line: u64, message: String },
    #[error("pipeline failed on `{item_id}`: {message}")]
    Pipeline { item_id: String, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ConceptsDefinitions,
    EmissionStandards,
    MeasurementTechniques,
    InventoriesDataAnalysis,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::ConceptsDefinitions,
        Category::EmissionStandards,
        Category::MeasurementTechniques,
        Category::InventoriesDataAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ConceptsDefinitions => "concepts_definitions",
            Category::EmissionStandards => "emission_standards",
            Category::MeasurementTechniques => "measurement_techniques",
            Category::InventoriesDataAnalysis => "inventories_data_analysis",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub question: String,
    pub reference_answer: String,
    #[serde(default)]
    pub gold_contexts: Vec<String>,
    pub category: Category,
    pub difficulty: u8,
    /// Marks an item that legitimately has no gold contexts.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub context_free: bool,
}

impl EvalItem {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |message: &str| EvalError::Schema { item_id: self.item_id.clone(), message: message.into() };
        if self.item_id.trim().is_empty() {
            return Err(fail("item_id is empty"));
        }
        if self.question.trim().is_empty() {
            return Err(fail("question is empty"));
        }
        if self.reference_answer.trim().is_empty() {
            return Err(fail("reference_answer is empty"));
        }
        if !(1..=3).contains(&self.difficulty) {
            return Err(fail("difficulty must be 1, 2 or 3"));
        }
        if self.gold_contexts.is_empty() && !self.context_free {
            return Err(fail("gold_contexts is empty and the item is not marked context_free"));
        }
        if self.gold_contexts.iter().any(|c| c.trim().is_empty()) {
            return Err(fail("blank gold context id"));
        }
        Ok(())
    }
}

pub fn load_benchmark(path: &Path) -> Result<Vec<EvalItem>, EvalError> {
    let file = std::fs::File::open(path)?;
    read_benchmark(std::io::BufReader::new(file))
}

/// Parses JSON Lines items. Fails on the first bad item, naming it.
pub fn read_benchmark(reader: impl BufRead) -> Result<Vec<EvalItem>, EvalError> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fallback_id = format!("line {}", i + 1);
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| EvalError::Schema { item_id: fallback_id.clone(), message: e.to_string() })?;
        let item_id = value.get("item_id").and_then(|v| v.as_str()).map(String::from).unwrap_or(fallback_id);
        let item: EvalItem = serde_json::from_value(value)
            .map_err(|e| EvalError::Schema { item_id: item_id.clone(), message: e.to_string() })?;
        item.validate()?;
        if !seen.insert(item.item_id.clone()) {
            return Err(EvalError::DuplicateId(item.item_id));
        }
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub faithfulness: f64,
    pub answer_relevancy: f64,
    pub semantic_similarity: f64,
    pub context_relevance: f64,
    pub context_precision: f64,
    pub context_recall: f64,
}

impl MetricScores {
    pub const NAMES: [&'static str; 6] = [
        "faithfulness",
        "answer_relevancy",
        "semantic_similarity",
        "context_relevance",
        "context_precision",
        "context_recall",
    ];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.faithfulness,
            self.answer_relevancy,
            self.semantic_similarity,
            self.context_relevance,
            self.context_precision,
            self.context_recall,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            faithfulness: v[0],
            answer_relevancy: v[1],
            semantic_similarity: v[2],
            context_relevance: v[3],
            context_precision: v[4],
            context_recall: v[5],
        }
    }
}

fn embed(provider: &dyn ModelProvider, text: &str) -> Result<Option<EmbeddingVector>, ProviderError> {
    if text.trim().is_empty() {
        return Ok(None);
    }
    provider.embed_text(&normalize_entities(text)).map(Some)
}

/// Cosine clipped to [0, 1]; zero when either side is missing or zero.
fn similarity(a: Option<&EmbeddingVector>, b: Option<&EmbeddingVector>) -> f64 {
    let (Some(a), Some(b)) = (a, b) else { return 0.0 };
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || a.values.len() != b.values.len() {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Fraction of retrieved entries that are gold, and of gold ids retrieved.
pub fn precision_recall(retrieved: &[&str], gold: &[String]) -> (f64, f64) {
    let gold: BTreeSet<&str> = gold.iter().map(String::as_str).collect();
    let precision = if retrieved.is_empty() {
        0.0
    } else {
        retrieved.iter().filter(|id| gold.contains(*id)).count() as f64 / retrieved.len() as f64
    };
    let recall = if gold.is_empty() {
        1.0
    } else {
        let hit: BTreeSet<&str> = retrieved.iter().copied().filter(|id| gold.contains(id)).collect();
        hit.len() as f64 / gold.len() as f64
    };
    (precision, recall)
}

pub fn score_item(
    item: &EvalItem,
    retrieved: &[ScoredChunk],
    answer: &str,
    provider: &dyn ModelProvider,
    tau: f64,
) -> Result<MetricScores, EvalError> {
    let ids: Vec<&str> = retrieved.iter().map(|c| c.chunk_id.as_str()).collect();
    let (context_precision, context_recall) = precision_recall(&ids, &item.gold_contexts);

    let question = embed(provider, &item.question)?;
    let answer_vec = embed(provider, answer)?;
    let reference = embed(provider, &item.reference_answer)?;
    let chunks = retrieved
        .iter()
        .map(|c| embed(provider, &c.chunk.index_text))
        .collect::<Result<Vec<_>, _>>()?;

    let semantic_similarity = similarity(answer_vec.as_ref(), reference.as_ref());
    let answer_relevancy = similarity(question.as_ref(), answer_vec.as_ref());

    let context_relevance = if chunks.is_empty() {
        0.0
    } else {
        let relevant = chunks.iter().filter(|c| similarity(question.as_ref(), c.as_ref()) >= tau).count();
        relevant as f64 / chunks.len() as f64
    };

    let sentences = split_sentences(answer);
    let faithfulness = if sentences.is_empty() {
        1.0
    } else {
        let mut supported = 0usize;
        for sentence in &sentences {
            let s = embed(provider, sentence)?;
            let best = chunks.iter().map(|c| similarity(s.as_ref(), c.as_ref())).fold(0.0, f64::max);
            if !chunks.is_empty() && best >= tau {
                supported += 1;
            }
        }
        supported as f64 / sentences.len() as f64
    };

    Ok(MetricScores {
        faithfulness,
        answer_relevancy,
        semantic_similarity,
        context_relevance,
        context_precision,
        context_recall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: String,
    pub count: usize,
    pub faithfulness: Stats,
    pub answer_relevancy: Stats,
    pub semantic_similarity: Stats,
    pub context_relevance: Stats,
    pub context_precision: Stats,
    pub context_recall: Stats,
}

impl Stratum {
    fn from_scores(label: String, scores: &[MetricScores]) -> Self {
        let stats = |i: usize| {
            let values: Vec<f64> = scores.iter().map(|s| s.as_array()[i]).collect();
            Stats {
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        };
        Self {
            label,
            count: scores.len(),
            faithfulness: stats(0),
            answer_relevancy: stats(1),
            semantic_similarity: stats(2),
            context_relevance: stats(3),
            context_precision: stats(4),
            context_recall: stats(5),
        }
    }

    pub fn stats(&self, metric: &str) -> Option<Stats> {
        Some(match metric {
            "faithfulness" => self.faithfulness,
            "answer_relevancy" => self.answer_relevancy,
            "semantic_similarity" => self.semantic_similarity,
            "context_relevance" => self.context_relevance,
            "context_precision" => self.context_precision,
            "context_recall" => self.context_recall,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item_id: String,
    pub category: Category,
    pub difficulty: u8,
    pub scores: MetricScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Stratum,
    pub by_category: Vec<Stratum>,
    pub by_difficulty: Vec<Stratum>,
    pub items: Vec<ItemResult>,
}

fn cmp_runs(a: &(EvalItem, MetricScores), b: &(EvalItem, MetricScores)) -> Ordering {
    a.0.item_id.cmp(&b.0.item_id).then_with(|| {
        a.1.as_array()
            .iter()
            .zip(b.1.as_array().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Mean, min and max of every metric overall, per category (enum order) and
/// per difficulty (ascending). Strata without items are omitted.
pub fn aggregate_scores(runs: &[(EvalItem, MetricScores)]) -> Result<EvalReport, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::EmptyRuns);
    }
    let mut sorted: Vec<&(EvalItem, MetricScores)> = runs.iter().collect();
    sorted.sort_by(|a, b| cmp_runs(a, b));

    let all: Vec<MetricScores> = sorted.iter().map(|(_, s)| *s).collect();
    let mut by_category: BTreeMap<Category, Vec<MetricScores>> = BTreeMap::new();
    let mut by_difficulty: BTreeMap<u8, Vec<MetricScores>> = BTreeMap::new();
    for (item, scores) in &sorted {
        by_category.entry(item.category).or_default().push(*scores);
        by_difficulty.entry(item.difficulty).or_default().push(*scores);
    }

    Ok(EvalReport {
        overall: Stratum::from_scores("overall".into(), &all),
        by_category: by_category.into_iter().map(|(c, s)| Stratum::from_scores(c.to_string(), &s)).collect(),
        by_difficulty: by_difficulty
            .into_iter()
            .map(|(d, s)| Stratum::from_scores(format!("difficulty_{d}"), &s))
            .collect(),
        items: sorted
            .iter()
            .map(|(item, scores)| ItemResult {
                item_id: item.item_id.clone(),
                category: item.category,
                difficulty: item.difficulty,
                scores: *scores,
            })
            .collect(),
    })
}

/// Retrieved chunks and generated answer for one benchmark item.
pub type PipelineOutput = (Vec<ScoredChunk>, String);

/// Runs `pipeline` on every item, scores the outputs and aggregates them.
pub fn run_benchmark<F>(
    items: &[EvalItem],
    provider: &dyn ModelProvider,
    tau: f64,
    mut pipeline: F,
) -> Result<EvalReport, EvalError>
where
    F: FnMut(&EvalItem) -> Result<PipelineOutput, EvalError>,
{
    let mut runs = Vec::with_capacity(items.len());
    for item in items {
        let (retrieved, answer) = pipeline(item)?;
        let scores = score_item(item, &retrieved, &answer, provider, tau)?;
        runs.push((item.clone(), scores));
    }
    aggregate_scores(&runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Relevance,
    Accuracy,
    Specification,
    CitationAuthority,
    Overall,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Relevance,
        Dimension::Accuracy,
        Dimension::Specification,
        Dimension::CitationAuthority,
        Dimension::Overall,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertScore {
    pub question_id: String,
    pub model_id: String,
    pub relevance: u8,
    pub accuracy: u8,
    pub specification: u8,
    pub citation_authority: u8,
    pub overall: u8,
}

impl ExpertScore {
    pub fn get(&self, dim: Dimension) -> u8 {
        match dim {
            Dimension::Relevance => self.relevance,
            Dimension::Accuracy => self.accuracy,
            Dimension::Specification => self.specification,
            Dimension::CitationAuthority => self.citation_authority,
            Dimension::Overall => self.overall,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.question_id.trim().is_empty() || self.model_id.trim().is_empty() {
            return Err("question_id and model_id must be non-empty".into());
        }
        for dim in Dimension::ALL {
            if self.get(dim) > 5 {
                return Err(format!("{dim:?} score {} is outside 0-5", self.get(dim)));
            }
        }
        Ok(())
    }
}

pub fn load_expert_scores(path: &Path) -> Result<Vec<ExpertScore>, EvalError> {
    read_expert_scores(std::fs::File::open(path)?)
}

pub fn read_expert_scores(reader: impl Read) -> Result<Vec<ExpertScore>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EvalError::ScoreFormat { line: 1, message: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != EXPERT_CSV_HEADER {
        return Err(EvalError::ScoreFormat { line: 1, message: format!("expected header `{EXPERT_CSV_HEADER}`") });
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<ExpertScore>() {
        let score = row.map_err(|e| EvalError::ScoreFormat {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        score.validate().map_err(|message| EvalError::ScoreFormat { line: 0, message })?;
        out.push(score);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionComparison {
    pub dimension: Dimension,
    pub wins_a: usize,
    pub ties: usize,
    pub wins_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub model_a: String,
    pub model_b: String,
    pub common_questions: usize,
    pub dimensions: Vec<DimensionComparison>,
}

/// Per-question score sums and row counts for one model.
type Tally = BTreeMap<String, ([u32; 5], u32)>;

fn tally(scores: &[ExpertScore], model: &str) -> Tally {
    let mut out = Tally::new();
    for s in scores.iter().filter(|s| s.model_id == model) {
        let entry = out.entry(s.question_id.clone()).or_insert(([0; 5], 0));
        for (i, dim) in Dimension::ALL.iter().enumerate() {
            entry.0[i] += u32::from(s.get(*dim));
        }
        entry.1 += 1;
    }
    out
}

/// Win/tie/loss counts per dimension over the questions both models were
/// scored on. Several rows for one (question, model) are averaged.
pub fn pairwise_win_rates(scores: &[ExpertScore], model_a: &str, model_b: &str) -> Result<PairwiseReport, EvalError> {
    let a = tally(scores, model_a);
    let b = tally(scores, model_b);
    let common: Vec<&String> = a.keys().filter(|q| b.contains_key(*q)).collect();
    if common.is_empty() {
        return Err(EvalError::MismatchedQuestionSets { model_a: model_a.into(), model_b: model_b.into() });
    }
    let dimensions = Dimension::ALL
        .iter()
        .enumerate()
        .map(|(i, dim)| {
            let (mut wins_a, mut ties, mut wins_b) = (0, 0, 0);
            let (mut sum_a, mut sum_b) = (0.0, 0.0);
            for q in &common {
                let (sa, na) = a[*q];
                let (sb, nb) = b[*q];
                // Compare the averages sa/na and sb/nb without division.
                match (u64::from(sa[i]) * u64::from(nb)).cmp(&(u64::from(sb[i]) * u64::from(na))) {
                    Ordering::Greater => wins_a += 1,
                    Ordering::Equal => ties += 1,
                    Ordering::Less => wins_b += 1,
                }
                sum_a += f64::from(sa[i]) / f64::from(na);
                sum_b += f64::from(sb[i]) / f64::from(nb);
            }
            let n = common.len() as f64;
            DimensionComparison { dimension: *dim, wins_a, ties, wins_b, mean_a: sum_a / n, mean_b: sum_b / n }
        })
        .collect();
    Ok(PairwiseReport {
        model_a: model_a.into(),
        model_b: model_b.into(),
        common_questions: common.len(),
        dimensions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::providers::StubProvider;

    fn item(id: &str, category: Category, difficulty: u8, gold: &[&str]) -> EvalItem {
        EvalItem {
            item_id: id.into(),
            question: "What is PM2.5?".into(),
            reference_answer: "Fine particulate matter.".into(),
            gold_contexts: gold.iter().map(|s| s.to_string()).collect(),
            category,
            difficulty,
            context_free: false,
        }
    }

    fn chunk(id: &str, text: &str) -> ScoredChunk {
        ScoredChunk {
            chunk_id: id.into(),
            score: 1.0,
            chunk: Chunk {
                chunk_id: id.into(),
                doc_id: "d".into(),
                seq: 0,
                display_text: text.into(),
                index_text: text.into(),
                token_count: 1,
            },
        }
    }

    fn scores(p: f64) -> MetricScores {
        MetricScores::from_array([0.5, 0.5, 0.5, 0.5, p, 0.5])
    }

    #[test]
    fn precision_recall_cases() {
        let gold = vec!["a".to_string(), "b".to_string()];
        assert_eq!(precision_recall(&["b", "a"], &gold), (1.0, 1.0));
        assert_eq!(precision_recall(&["a", "x", "b", "y"], &gold), (0.5, 1.0));
        assert_eq!(precision_recall(&[], &gold), (0.0, 0.0));
        assert_eq!(precision_recall(&["x"], &[]), (0.0, 1.0));
    }

    #[test]
    fn verbatim_answer_is_fully_similar() {
        let stub = StubProvider::default();
        let it = item("q1", Category::ConceptsDefinitions, 1, &["c1"]);
        let s = score_item(&it, &[chunk("c1", "Fine particulate matter.")], "Fine particulate matter.", &stub, 0.5).unwrap();
        assert!((s.semantic_similarity - 1.0).abs() < 1e-12);
        assert_eq!(s.context_precision, 1.0);
        assert_eq!(s.faithfulness, 1.0);
    }

    #[test]
    fn empty_retrieval_scores() {
        let stub = StubProvider::default();
        let it = item("q1", Category::ConceptsDefinitions, 1, &["c1"]);
        let s = score_item(&it, &[], "An unsupported claim.", &stub, 0.5).unwrap();
        assert_eq!(s.context_relevance, 0.0);
        assert_eq!(s.context_precision, 0.0);
        assert_eq!(s.context_recall, 0.0);
        assert_eq!(s.faithfulness, 0.0);
        let blank = score_item(&it, &[], "", &stub, 0.5).unwrap();
        assert_eq!(blank.faithfulness, 1.0);
        assert_eq!(blank.semantic_similarity, 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let a = item("a", Category::EmissionStandards, 2, &["x"]);
        let b = item("b", Category::EmissionStandards, 2, &["x"]);
        let report = aggregate_scores(&[(a.clone(), scores(0.2)), (b, scores(1.0))]).unwrap();
        let p = report.by_category[0].context_precision;
        assert!((p.mean - 0.6).abs() < 1e-12);
        assert_eq!((p.min, p.max), (0.2, 1.0));
        assert_eq!(report.by_difficulty[0].label, "difficulty_2");

        let single = aggregate_scores(&[(a, scores(0.3))]).unwrap();
        assert_eq!(single.overall.context_precision.mean, 0.3);
        assert!(matches!(aggregate_scores(&[]), Err(EvalError::EmptyRuns)));
    }

    #[test]
    fn strata_follow_enum_and_difficulty_order() {
        let runs = vec![
            (item("c", Category::InventoriesDataAnalysis, 3, &["x"]), scores(0.1)),
            (item("a", Category::ConceptsDefinitions, 1, &["x"]), scores(0.2)),
            (item("b", Category::EmissionStandards, 2, &["x"]), scores(0.3)),
        ];
        let report = aggregate_scores(&runs).unwrap();
        let labels: Vec<_> = report.by_category.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["concepts_definitions", "emission_standards", "inventories_data_analysis"]);
        let ids: Vec<_> = report.items.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn benchmark_parsing() {
        let good = r#"{"item_id":"q1","question":"q","reference_answer":"r","gold_contexts":["d#0"],"category":"emission_standards","difficulty":1}"#;
        assert_eq!(read_benchmark(good.as_bytes()).unwrap().len(), 1);

        let bad = good.replace("\"difficulty\":1", "\"difficulty\":4");
        assert!(matches!(read_benchmark(bad.as_bytes()), Err(EvalError::Schema { item_id, .. }) if item_id == "q1"));

        let dup = format!("{good}\n{good}\n");
        assert!(matches!(read_benchmark(dup.as_bytes()), Err(EvalError::DuplicateId(id)) if id == "q1"));

        let cat = good.replace("emission_standards", "astrology");
        assert!(matches!(read_benchmark(cat.as_bytes()), Err(EvalError::Schema { .. })));

        let no_gold = good.replace("[\"d#0\"]", "[]");
        assert!(read_benchmark(no_gold.as_bytes()).is_err());
        let context_free = no_gold.replace("\"difficulty\":1", "\"difficulty\":1,\"context_free\":true");
        assert!(read_benchmark(context_free.as_bytes()).is_ok());
    }

    fn expert(q: &str, m: &str, v: u8) -> ExpertScore {
        ExpertScore {
            question_id: q.into(),
            model_id: m.into(),
            relevance: v,
            accuracy: v,
            specification: v,
            citation_authority: v,
            overall: v,
        }
    }

    #[test]
    fn pairwise_examples() {
        let scores = vec![expert("q1", "A", 5), expert("q2", "A", 4), expert("q1", "B", 3), expert("q2", "B", 4)];
        let r = pairwise_win_rates(&scores, "A", "B").unwrap();
        let d = &r.dimensions[0];
        assert_eq!((d.wins_a, d.ties, d.wins_b), (1, 1, 0));
        assert_eq!((d.mean_a, d.mean_b), (4.5, 3.5));

        let same = pairwise_win_rates(&scores, "A", "A").unwrap();
        assert!(same.dimensions.iter().all(|d| d.ties == 2));

        let disjoint = vec![expert("q1", "A", 5), expert("q2", "B", 4)];
        assert!(matches!(pairwise_win_rates(&disjoint, "A", "B"), Err(EvalError::MismatchedQuestionSets { .. })));
    }

    #[test]
    fn repeated_rows_are_averaged() {
        let scores = vec![expert("q1", "A", 5), expert("q1", "A", 2), expert("q1", "B", 3), expert("q1", "B", 4)];
        let r = pairwise_win_rates(&scores, "A", "B").unwrap();
        assert_eq!(r.dimensions[0].ties, 1);
    }

    #[test]
    fn expert_csv() {
        let csv = format!("{EXPERT_CSV_HEADER}\nq1,A,5,4,3,2,1\nq1,B,0,0,0,0,0\n");
        assert_eq!(read_expert_scores(csv.as_bytes()).unwrap().len(), 2);
        let bad = format!("{EXPERT_CSV_HEADER}\nq1,A,6,4,3,2,1\n");
        assert!(read_expert_scores(bad.as_bytes()).is_err());
        assert!(read_expert_scores("a,b\n".as_bytes()).is_err());
    }
}
