//! Document ingestion, entity normalization and token-bounded chunking.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default chunk size in tokens.
pub const DEFAULT_MAX_TOKENS: usize = 256;

/// How far back from a full window the chunker looks for a sentence end.
pub const SENTENCE_LOOKBACK: usize = 50;

const MIN_MAX_TOKENS: usize = 16;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid chunking parameters: {0}")]
    InvalidParams(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pollutant species recognised by the normalizer, in canonical casing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "CO2")]
    Co2,
    #[serde(rename = "CH4")]
    Ch4,
    #[serde(rename = "SO2")]
    So2,
    #[serde(rename = "NOx")]
    Nox,
    #[serde(rename = "N2O")]
    N2o,
    #[serde(rename = "NH3")]
    Nh3,
    #[serde(rename = "PM2.5")]
    Pm25,
    #[serde(rename = "PM10")]
    Pm10,
    #[serde(rename = "CO")]
    Co,
    #[serde(rename = "VOC")]
    Voc,
    #[serde(rename = "O3")]
    O3,
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "OC")]
    Oc,
}

impl Species {
    pub const ALL: [Species; 13] = [
        Species::Co2,
        Species::Ch4,
        Species::So2,
        Species::Nox,
        Species::N2o,
        Species::Nh3,
        Species::Pm25,
        Species::Pm10,
        Species::Co,
        Species::Voc,
        Species::O3,
        Species::Bc,
        Species::Oc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Species::Co2 => "CO2",
            Species::Ch4 => "CH4",
            Species::So2 => "SO2",
            Species::Nox => "NOx",
            Species::N2o => "N2O",
            Species::Nh3 => "NH3",
            Species::Pm25 => "PM2.5",
            Species::Pm10 => "PM10",
            Species::Co => "CO",
            Species::Voc => "VOC",
            Species::O3 => "O3",
            Species::Bc => "BC",
            Species::Oc => "OC",
        }
    }

    /// Case-insensitive lookup after subscript folding.
    pub fn parse(s: &str) -> Option<Species> {
        let folded = fold_subscripts(s.trim());
        Species::ALL.into_iter().find(|sp| sp.as_str().eq_ignore_ascii_case(&folded))
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Species {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Species::parse(s).ok_or_else(|| format!("unknown species `{s}`"))
    }
}

/// A token and its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits text into tokens: maximal runs of letters/digits, or single other
/// non-whitespace characters.
pub fn tokenize(text: &str) -> Vec<&str> {
    token_spans(text).into_iter().map(|t| t.text).collect()
}

pub fn token_spans(text: &str) -> Vec<TokenSpan<'_>> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = word_start.take() {
            spans.push(TokenSpan { text: &text[start..i], start, end: i });
        }
        if !c.is_whitespace() {
            let end = i + c.len_utf8();
            spans.push(TokenSpan { text: &text[i..end], start: i, end });
        }
    }
    if let Some(start) = word_start {
        spans.push(TokenSpan { text: &text[start..], start, end: text.len() });
    }
    spans
}

fn fold_subscript(c: char) -> char {
    match c {
        '₀'..='₉' => char::from(b'0' + (c as u32 - '₀' as u32) as u8),
        other => other,
    }
}

fn fold_subscripts(s: &str) -> String {
    s.chars().map(fold_subscript).collect()
}

/// Folds subscript digits to ASCII and rewrites registered species to their
/// canonical casing. Species only match at word boundaries.
pub fn normalize_entities(text: &str) -> String {
    let folded = fold_subscripts(text);
    // Longest first so that CO2 wins over CO.
    let mut species: Vec<&'static str> = Species::ALL.iter().map(|s| s.as_str()).collect();
    species.sort_by_key(|s| std::cmp::Reverse(s.len()));

    let bytes = folded.as_bytes();
    let mut out = String::with_capacity(folded.len());
    let mut i = 0;
    let mut prev: Option<char> = None;
    while i < folded.len() {
        let at_boundary = prev.is_none_or(|c| !is_word_char(c));
        if at_boundary {
            let hit = species.iter().find(|sp| {
                let end = i + sp.len();
                end <= bytes.len()
                    && bytes[i..end].eq_ignore_ascii_case(sp.as_bytes())
                    && folded[end..].chars().next().is_none_or(|c| !is_word_char(c))
            });
            if let Some(sp) = hit {
                out.push_str(sp);
                i += sp.len();
                prev = sp.chars().last();
                continue;
            }
        }
        let c = folded[i..].chars().next().expect("char boundary");
        out.push(c);
        i += c.len_utf8();
        prev = Some(c);
    }
    out
}

fn is_ascii_terminator(token: &str) -> bool {
    matches!(token, "." | "!" | "?")
}

fn is_cjk_terminator(token: &str) -> bool {
    matches!(token, "。" | "！" | "？")
}

/// Whether the token at `idx` closes a sentence. ASCII terminators only count
/// when followed by whitespace or end of text, so `PM2.5` is not split.
fn ends_sentence(spans: &[TokenSpan<'_>], idx: usize) -> bool {
    let token = spans[idx].text;
    if is_cjk_terminator(token) {
        return true;
    }
    is_ascii_terminator(token) && followed_by_gap(spans, idx)
}

fn followed_by_gap(spans: &[TokenSpan<'_>], idx: usize) -> bool {
    match spans.get(idx + 1) {
        None => true,
        Some(next) => next.start > spans[idx].end,
    }
}

/// Splits text into sentences on the chunker's terminator set.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let spans = token_spans(text);
    let mut sentences = Vec::new();
    let mut start: Option<usize> = None;
    for idx in 0..spans.len() {
        let s = *start.get_or_insert(spans[idx].start);
        if ends_sentence(&spans, idx) {
            sentences.push(&text[s..spans[idx].end]);
            start = None;
        }
    }
    if let Some(s) = start {
        sentences.push(text[s..].trim_end());
    }
    sentences
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    JournalArticle,
    Report,
    Book,
    Standard,
    Guideline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Zh,
    En,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct DocumentRecord {
    pub doc_id: String,
    pub doc_type: DocType,
    pub title: String,
    pub year: Option<i32>,
    pub region: Option<String>,
    pub institution: Option<String>,
    pub language: Language,
    pub body: String,
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    doc_type: DocType,
    title: String,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    region: Option<String>,
    #[serde(default)]
    institution: Option<String>,
    language: Language,
    body: String,
}

impl TryFrom<RawDocument> for DocumentRecord {
    type Error = CorpusError;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        let mut doc = DocumentRecord::new(raw.doc_id, raw.doc_type, raw.title, raw.language, raw.body)?;
        doc.year = raw.year;
        doc.region = raw.region;
        doc.institution = raw.institution;
        Ok(doc)
    }
}

impl DocumentRecord {
    pub fn new(
        doc_id: impl Into<String>,
        doc_type: DocType,
        title: impl Into<String>,
        language: Language,
        body: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let doc_id = doc_id.into();
        let body = body.into();
        if doc_id.trim().is_empty() {
            return Err(CorpusError::InvalidDocument("doc_id is empty".into()));
        }
        if body.trim().is_empty() {
            return Err(CorpusError::InvalidDocument(format!("document `{doc_id}` has an empty body")));
        }
        Ok(Self {
            doc_id,
            doc_type,
            title: title.into(),
            year: None,
            region: None,
            institution: None,
            language,
            body,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub seq: usize,
    pub display_text: String,
    pub index_text: String,
    pub token_count: usize,
}

impl Chunk {
    pub fn make_id(doc_id: &str, seq: usize) -> String {
        format!("{doc_id}#{seq}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkParams {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { max_tokens: DEFAULT_MAX_TOKENS, overlap: 0 }
    }
}

impl ChunkParams {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_tokens < MIN_MAX_TOKENS {
            return Err(CorpusError::InvalidParams(format!(
                "max_tokens must be at least {MIN_MAX_TOKENS}, got {}",
                self.max_tokens
            )));
        }
        if self.overlap >= self.max_tokens {
            return Err(CorpusError::InvalidParams(format!(
                "overlap {} must be below max_tokens {}",
                self.overlap, self.max_tokens
            )));
        }
        Ok(())
    }
}

/// Splits a document into chunks of at most `params.max_tokens` tokens.
///
/// Windows are filled greedily. When a full window ends mid-sentence, the cut
/// moves back to the last sentence end within the trailing
/// [`SENTENCE_LOOKBACK`] tokens; failing that, to the last whitespace gap so
/// that no word is split across chunks.
pub fn chunk_document(doc: &DocumentRecord, params: ChunkParams) -> Result<Vec<Chunk>, CorpusError> {
    params.validate()?;
    let body = doc.body.as_str();
    let spans = token_spans(body);
    let n = spans.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let hard_end = (start + params.max_tokens).min(n);
        let end = if hard_end == n || ends_sentence(&spans, hard_end - 1) {
            hard_end
        } else {
            let floor = hard_end.saturating_sub(SENTENCE_LOOKBACK).max(start);
            (floor..hard_end)
                .rev()
                .find(|&j| ends_sentence(&spans, j))
                .or_else(|| (start..hard_end).rev().find(|&j| followed_by_gap(&spans, j)))
                .map_or(hard_end, |j| j + 1)
        };

        let display_text = body[spans[start].start..spans[end - 1].end].to_string();
        let index_text = normalize_entities(&display_text);
        let token_count = tokenize(&index_text).len();
        let seq = chunks.len();
        chunks.push(Chunk {
            chunk_id: Chunk::make_id(&doc.doc_id, seq),
            doc_id: doc.doc_id.clone(),
            seq,
            display_text,
            index_text,
            token_count,
        });

        if end == n {
            break;
        }
        start = end.saturating_sub(params.overlap).max(start + 1);
    }
    Ok(chunks)
}

/// Reads a JSON Lines corpus, one document per line. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<DocumentRecord>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<DocumentRecord>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: DocumentRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Chunks every document in order.
pub fn chunk_corpus(docs: &[DocumentRecord], params: ChunkParams) -> Result<Vec<Chunk>, CorpusError> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(chunk_document(doc, params)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> DocumentRecord {
        DocumentRecord::new("d1", DocType::Report, "t", Language::En, body).unwrap()
    }

    #[test]
    fn tokenizer_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("NOx emissions, 2020"), ["NOx", "emissions", ",", "2020"]);
        assert_eq!(tokenize("PM2.5"), ["PM2", ".", "5"]);
        assert_eq!(tokenize("CO₂排放"), ["CO₂排放"]);
        assert_eq!(tokenize("a  -- b"), ["a", "-", "-", "b"]);
    }

    #[test]
    fn normalizer_examples() {
        assert_eq!(normalize_entities("CO₂ and CH₄"), "CO2 and CH4");
        assert_eq!(normalize_entities("nox limits"), "NOx limits");
        assert_eq!(normalize_entities("hello world"), "hello world");
        assert_eq!(normalize_entities("pm2.5 and Pm10 (so2)"), "PM2.5 and PM10 (SO2)");
        // No rewriting inside words.
        assert_eq!(normalize_entities("control cocoa"), "control cocoa");
        assert_eq!(normalize_entities("co2e"), "co2e");
    }

    #[test]
    fn species_parse() {
        assert_eq!(Species::parse("nox"), Some(Species::Nox));
        assert_eq!(Species::parse("CO₂"), Some(Species::Co2));
        assert_eq!(Species::parse("XYZ"), None);
        assert_eq!(serde_json::to_string(&Species::Pm25).unwrap(), "\"PM2.5\"");
    }

    #[test]
    fn short_document_is_one_chunk() {
        let chunks = chunk_document(&doc("one two three four five six seven eight nine ten"), ChunkParams::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].seq, 0);
        assert_eq!(chunks[0].chunk_id, "d1#0");
        assert_eq!(chunks[0].token_count, 10);
    }

    #[test]
    fn six_hundred_tokens_split_256_256_88() {
        let body: Vec<String> = (0..600).map(|i| format!("w{i}")).collect();
        let chunks = chunk_document(&doc(&body.join(" ")), ChunkParams::default()).unwrap();
        let counts: Vec<usize> = chunks.iter().map(|c| c.token_count).collect();
        assert_eq!(counts, [256, 256, 88]);
    }

    #[test]
    fn cuts_at_sentence_end_inside_lookback() {
        // 230 words, a sentence end, then 100 more words.
        let mut words: Vec<String> = (0..230).map(|i| format!("w{i}")).collect();
        words.push("end.".into());
        words.extend((0..100).map(|i| format!("x{i}")));
        let chunks = chunk_document(&doc(&words.join(" ")), ChunkParams::default()).unwrap();
        assert!(chunks[0].display_text.ends_with("end."));
        assert_eq!(chunks[0].token_count, 232);
        assert!(chunks[1].display_text.starts_with("x0"));
    }

    #[test]
    fn decimal_point_is_not_a_sentence_end() {
        let mut words: Vec<String> = (0..240).map(|i| format!("w{i}")).collect();
        words.push("PM2.5".into());
        words.extend((0..40).map(|i| format!("x{i}")));
        let chunks = chunk_document(&doc(&words.join(" ")), ChunkParams::default()).unwrap();
        assert!(chunks.iter().any(|c| c.display_text.contains("PM2.5")));
    }

    #[test]
    fn overlap_repeats_tail_tokens() {
        let body: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let chunks = chunk_document(&doc(&body.join(" ")), ChunkParams { max_tokens: 16, overlap: 4 }).unwrap();
        assert!(chunks[1].display_text.starts_with("w12"));
        assert!(chunks.iter().all(|c| c.token_count <= 16));
        assert!(chunks.last().unwrap().display_text.ends_with("w39"));
    }

    #[test]
    fn invalid_params() {
        let d = doc("text");
        assert!(matches!(
            chunk_document(&d, ChunkParams { max_tokens: 8, overlap: 0 }),
            Err(CorpusError::InvalidParams(_))
        ));
        assert!(matches!(
            chunk_document(&d, ChunkParams { max_tokens: 32, overlap: 32 }),
            Err(CorpusError::InvalidParams(_))
        ));
    }

    #[test]
    fn empty_body_rejected_at_construction() {
        assert!(DocumentRecord::new("d", DocType::Book, "t", Language::Zh, "  ").is_err());
        let line = r#"{"doc_id":"d","doc_type":"book","title":"t","language":"zh","body":""}"#;
        assert!(read_corpus(line.as_bytes()).is_err());
    }

    #[test]
    fn jsonl_roundtrip_and_duplicates() {
        let line = r#"{"doc_id":"d","doc_type":"journal_article","title":"t","year":2021,"region":"Guangdong","institution":null,"language":"en","body":"NOx."}"#;
        let docs = read_corpus(line.as_bytes()).unwrap();
        assert_eq!(docs[0].year, Some(2021));
        let twice = format!("{line}\n{line}\n");
        assert!(matches!(read_corpus(twice.as_bytes()), Err(CorpusError::DuplicateDocId(_))));
    }

    #[test]
    fn sentence_split() {
        assert_eq!(
            split_sentences("NOx is regulated. PM2.5 too! 排放因子。第二句"),
            ["NOx is regulated.", "PM2.5 too!", "排放因子。", "第二句"]
        );
        assert!(split_sentences("   ").is_empty());
    }
}
