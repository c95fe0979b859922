//! Emission-factor recommendation.
//!
//! Recommendations come in two tiers. Guideline entries that match the
//! query's source attributes are listed first, ungraded. Literature entries
//! are retrieved semantically, graded A–D on four quality dimensions, scored
//! as a weighted sum of the numeric grades and the best five are kept.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_entities;
use crate::providers::{EmbeddingVector, ModelProvider, ProviderError};

/// Number of literature factors returned.
pub const LITERATURE_TOP_N: usize = 5;

/// Candidates pulled from the literature store before grading.
pub const DEFAULT_LITERATURE_K: usize = 20;

#[derive(Debug, Error)]
pub enum EfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("duplicate ef_id `{0}`")]
    DuplicateId(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid region hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    VehicleType,
    FuelType,
    EmissionStandard,
    Region,
}

impl Attribute {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::VehicleType => "vehicle_type",
            Attribute::FuelType => "fuel_type",
            Attribute::EmissionStandard => "emission_standard",
            Attribute::Region => "region",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A possibly partial description of the emission source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfQuery {
    #[serde(default)]
    pub vehicle_type: Option<String>,
    #[serde(default)]
    pub fuel_type: Option<String>,
    #[serde(default)]
    pub emission_standard: Option<String>,
    #[serde(default)]
    pub region: Option<String>,
}

/// A query with all four attributes present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompleteQuery {
    pub vehicle_type: String,
    pub fuel_type: String,
    pub emission_standard: String,
    pub region: String,
}

impl CompleteQuery {
    /// Text embedded for semantic literature search.
    pub fn canonical_text(&self) -> String {
        canonical_text(&self.vehicle_type, &self.fuel_type, &self.emission_standard, &self.region)
    }
}

fn canonical_text(vehicle: &str, fuel: &str, standard: &str, region: &str) -> String {
    normalize_entities(&format!("{vehicle} {fuel} {standard} {region}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Complete(CompleteQuery),
    Missing(Vec<Attribute>),
}

/// Lists every absent attribute in fixed order, or returns the complete query.
/// Blank strings count as absent.
pub fn complete_query(partial: &EfQuery) -> Completion {
    let present = |v: &Option<String>| v.as_deref().map(str::trim).filter(|s| !s.is_empty()).map(String::from);
    let fields = [
        (Attribute::VehicleType, present(&partial.vehicle_type)),
        (Attribute::FuelType, present(&partial.fuel_type)),
        (Attribute::EmissionStandard, present(&partial.emission_standard)),
        (Attribute::Region, present(&partial.region)),
    ];
    let missing: Vec<Attribute> = fields.iter().filter(|(_, v)| v.is_none()).map(|(a, _)| *a).collect();
    if !missing.is_empty() {
        return Completion::Missing(missing);
    }
    let [v, f, s, r] = fields.map(|(_, v)| v.expect("checked present"));
    Completion::Complete(CompleteQuery { vehicle_type: v, fuel_type: f, emission_standard: s, region: r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionScale {
    City,
    Province,
    Country,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionNode {
    pub scale: RegionScale,
    #[serde(default)]
    pub parent: Option<String>,
}

/// Containment tree of named regions (city ⊂ province ⊂ country ⊂ global).
/// Names compare case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct RegionHierarchy {
    nodes: HashMap<String, (String, RegionNode)>,
}

fn region_key(name: &str) -> String {
    name.trim().to_lowercase()
}

impl RegionHierarchy {
    pub fn from_nodes(nodes: BTreeMap<String, RegionNode>) -> Result<Self, EfError> {
        let mut map = HashMap::new();
        for (name, node) in nodes {
            if map.insert(region_key(&name), (name.clone(), node)).is_some() {
                return Err(EfError::InvalidHierarchy(format!("`{name}` listed twice")));
            }
        }
        let hierarchy = Self { nodes: map };
        for (name, node) in hierarchy.nodes.values() {
            if let Some(parent) = &node.parent {
                let Some((_, p)) = hierarchy.nodes.get(&region_key(parent)) else {
                    return Err(EfError::InvalidHierarchy(format!("`{name}` has unknown parent `{parent}`")));
                };
                if p.scale <= node.scale {
                    return Err(EfError::InvalidHierarchy(format!("`{parent}` must be coarser than `{name}`")));
                }
            }
        }
        Ok(hierarchy)
    }

    /// JSON object of `name → {scale, parent}`.
    pub fn load(path: &Path) -> Result<Self, EfError> {
        let text = std::fs::read_to_string(path)?;
        let nodes: BTreeMap<String, RegionNode> =
            serde_json::from_str(&text).map_err(|e| EfError::InvalidHierarchy(e.to_string()))?;
        Self::from_nodes(nodes)
    }

    /// A small built-in gazetteer centred on China and Guangdong.
    pub fn builtin() -> Self {
        let mut nodes = BTreeMap::new();
        let mut add = |name: &str, scale, parent: Option<&str>| {
            nodes.insert(name.to_string(), RegionNode { scale, parent: parent.map(String::from) });
        };
        add("Global", RegionScale::Global, None);
        for country in ["China", "United States", "European Union", "Japan", "India"] {
            add(country, RegionScale::Country, Some("Global"));
        }
        for province in [
            "Guangdong", "Beijing", "Shanghai", "Tianjin", "Chongqing", "Jiangsu", "Zhejiang", "Shandong", "Hebei",
            "Henan", "Sichuan", "Hubei", "Hunan", "Fujian",
        ] {
            add(province, RegionScale::Province, Some("China"));
        }
        for city in ["Guangzhou", "Shenzhen", "Foshan", "Dongguan", "Zhuhai", "Huizhou", "Jiangmen", "Zhongshan"] {
            add(city, RegionScale::City, Some("Guangdong"));
        }
        for city in ["Nanjing", "Suzhou"] {
            add(city, RegionScale::City, Some("Jiangsu"));
        }
        for city in ["Hangzhou", "Ningbo"] {
            add(city, RegionScale::City, Some("Zhejiang"));
        }
        Self::from_nodes(nodes).expect("built-in hierarchy is consistent")
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains_key(&region_key(name))
    }

    pub fn scale(&self, name: &str) -> Option<RegionScale> {
        self.nodes.get(&region_key(name)).map(|(_, n)| n.scale)
    }

    /// Ancestors nearest first, excluding `name` itself.
    pub fn ancestors(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = region_key(name);
        while let Some((_, node)) = self.nodes.get(&current) {
            let Some(parent) = &node.parent else { break };
            current = region_key(parent);
            if out.contains(&current) {
                break;
            }
            out.push(current.clone());
        }
        out
    }

    /// Hierarchy levels between two regions when one contains the other.
    pub fn distance(&self, a: &str, b: &str) -> Option<usize> {
        let (ka, kb) = (region_key(a), region_key(b));
        if ka == kb {
            return Some(0);
        }
        if let Some(i) = self.ancestors(a).iter().position(|x| *x == kb) {
            return Some(i + 1);
        }
        self.ancestors(b).iter().position(|x| *x == ka).map(|i| i + 1)
    }

    /// Levels from `query_region` up to `record_region`, if the record's
    /// region is the query region or one of its ancestors.
    pub fn ancestor_distance(&self, query_region: &str, record_region: &str) -> Option<usize> {
        let (kq, kr) = (region_key(query_region), region_key(record_region));
        if kq == kr {
            return Some(0);
        }
        self.ancestors(query_region).iter().position(|x| *x == kr).map(|i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceAttrs {
    pub vehicle_type: String,
    pub fuel_type: String,
    pub emission_standard: String,
    pub region: String,
    pub region_scale: RegionScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollutantValue {
    pub value: f64,
    pub units: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodClass {
    StandardizedValidated,
    ReliableUnstandardized,
    Unvalidated,
    Undocumented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    PeerReviewedJournal,
    OfficialStandardOrGuideline,
    ThesisOrConference,
    TechnicalReport,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct EmissionFactorRecord {
    pub ef_id: String,
    pub source_attrs: SourceAttrs,
    pub pollutant_values: BTreeMap<String, PollutantValue>,
    pub method_class: MethodClass,
    pub sample_size: Option<u32>,
    pub source_class: SourceClass,
    pub publication_year: Option<i32>,
    pub citation: String,
    pub authoritative: bool,
    /// Manual grades; when present they replace automatic grading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grades: Option<QualityGrades>,
}

#[derive(Deserialize)]
struct RawRecord {
    ef_id: String,
    source_attrs: SourceAttrs,
    pollutant_values: BTreeMap<String, PollutantValue>,
    method_class: MethodClass,
    #[serde(default)]
    sample_size: Option<u32>,
    source_class: SourceClass,
    #[serde(default)]
    publication_year: Option<i32>,
    citation: String,
    #[serde(default)]
    authoritative: bool,
    #[serde(default)]
    grades: Option<QualityGrades>,
}

impl TryFrom<RawRecord> for EmissionFactorRecord {
    type Error = EfError;

    fn try_from(raw: RawRecord) -> Result<Self, Self::Error> {
        let record = EmissionFactorRecord {
            ef_id: raw.ef_id,
            source_attrs: raw.source_attrs,
            pollutant_values: raw.pollutant_values,
            method_class: raw.method_class,
            sample_size: raw.sample_size,
            source_class: raw.source_class,
            publication_year: raw.publication_year,
            citation: raw.citation,
            authoritative: raw.authoritative,
            grades: raw.grades,
        };
        record.validate()?;
        Ok(record)
    }
}

impl EmissionFactorRecord {
    pub fn validate(&self) -> Result<(), EfError> {
        let invalid = |message: String| EfError::InvalidRecord { id: self.ef_id.clone(), message };
        if self.ef_id.trim().is_empty() {
            return Err(invalid("ef_id is empty".into()));
        }
        if self.authoritative && self.source_class != SourceClass::OfficialStandardOrGuideline {
            return Err(invalid("authoritative entries must come from an official standard or guideline".into()));
        }
        if self.sample_size == Some(0) {
            return Err(invalid("sample_size must be positive".into()));
        }
        for (species, v) in &self.pollutant_values {
            if !v.value.is_finite() || v.value < 0.0 {
                return Err(invalid(format!("{species} value {} is negative", v.value)));
            }
            if v.units.trim().is_empty() {
                return Err(invalid(format!("{species} has no units")));
            }
        }
        Ok(())
    }

    pub fn canonical_text(&self) -> String {
        let a = &self.source_attrs;
        canonical_text(&a.vehicle_type, &a.fuel_type, &a.emission_standard, &a.region)
    }
}

/// Reads a JSON Lines emission-factor database.
pub fn load_ef_db(path: &Path) -> Result<Vec<EmissionFactorRecord>, EfError> {
    let file = std::fs::File::open(path)?;
    read_ef_db(std::io::BufReader::new(file))
}

pub fn read_ef_db(reader: impl BufRead) -> Result<Vec<EmissionFactorRecord>, EfError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmissionFactorRecord =
            serde_json::from_str(&line).map_err(|e| EfError::Parse { line: i + 1, message: e.to_string() })?;
        if !seen.insert(record.ef_id.clone()) {
            return Err(EfError::DuplicateId(record.ef_id));
        }
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade {
    A,
    B,
    C,
    D,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::A, Grade::B, Grade::C, Grade::D];

    /// The lower-quality of two grades.
    pub fn worse(self, other: Grade) -> Grade {
        self.max(other)
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A=4, B=3, C=2, D=1.
pub fn grade_to_score(grade: Grade) -> u8 {
    match grade {
        Grade::A => 4,
        Grade::B => 3,
        Grade::C => 2,
        Grade::D => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityGrades {
    pub data_representativeness: Grade,
    pub methodological_reliability: Grade,
    pub sample_representativeness: Grade,
    pub data_authority: Grade,
}

impl QualityGrades {
    pub fn new(data: Grade, method: Grade, sample: Grade, authority: Grade) -> Self {
        Self {
            data_representativeness: data,
            methodological_reliability: method,
            sample_representativeness: sample,
            data_authority: authority,
        }
    }
}

impl fmt::Display for QualityGrades {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}{}",
            self.data_representativeness,
            self.methodological_reliability,
            self.sample_representativeness,
            self.data_authority
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeWeights {
    pub data: f64,
    pub method: f64,
    pub sample: f64,
    pub authority: f64,
}

impl Default for GradeWeights {
    fn default() -> Self {
        Self { data: 0.35, method: 0.35, sample: 0.20, authority: 0.10 }
    }
}

impl GradeWeights {
    /// Weights must be positive and sum to one (to within 1e-9).
    pub fn new(data: f64, method: f64, sample: f64, authority: f64) -> Result<Self, EfError> {
        let w = Self { data, method, sample, authority };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), EfError> {
        let all = [self.data, self.method, self.sample, self.authority];
        if all.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(EfError::InvalidWeights("weights must be positive".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EfError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Weighted sum of numeric grades; lies in [1, 4] for weights summing to one.
pub fn composite_score(grades: &QualityGrades, weights: &GradeWeights) -> f64 {
    let s = |g: Grade| f64::from(grade_to_score(g));
    weights.data * s(grades.data_representativeness)
        + weights.method * s(grades.methodological_reliability)
        + weights.sample * s(grades.sample_representativeness)
        + weights.authority * s(grades.data_authority)
}

/// Cut-offs for automatic grading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingRules {
    /// Maximum age in years for grades A, B and C respectively.
    pub recency_years: [i32; 3],
    /// Minimum sample size for grades A and B; any positive size earns C.
    pub sample_sizes: [u32; 2],
}

impl Default for GradingRules {
    fn default() -> Self {
        Self { recency_years: [5, 10, 15], sample_sizes: [30, 10] }
    }
}

impl GradingRules {
    fn recency_grade(&self, publication_year: Option<i32>, now_year: i32) -> Grade {
        let Some(year) = publication_year else { return Grade::D };
        let age = (now_year - year).max(0);
        let [a, b, c] = self.recency_years;
        if age <= a {
            Grade::A
        } else if age <= b {
            Grade::B
        } else if age <= c {
            Grade::C
        } else {
            Grade::D
        }
    }

    fn sample_grade(&self, sample_size: Option<u32>) -> Grade {
        let [a, b] = self.sample_sizes;
        match sample_size {
            Some(n) if n >= a => Grade::A,
            Some(n) if n >= b => Grade::B,
            Some(n) if n >= 1 => Grade::C,
            _ => Grade::D,
        }
    }
}

fn region_grade(levels: Option<usize>) -> Grade {
    match levels {
        Some(0) => Grade::A,
        Some(1) => Grade::B,
        Some(2) => Grade::C,
        _ => Grade::D,
    }
}

fn method_grade(method: MethodClass) -> Grade {
    match method {
        MethodClass::StandardizedValidated => Grade::A,
        MethodClass::ReliableUnstandardized => Grade::B,
        MethodClass::Unvalidated => Grade::C,
        MethodClass::Undocumented => Grade::D,
    }
}

fn authority_grade(source: SourceClass) -> Grade {
    match source {
        SourceClass::PeerReviewedJournal | SourceClass::OfficialStandardOrGuideline => Grade::A,
        SourceClass::ThesisOrConference => Grade::B,
        SourceClass::TechnicalReport => Grade::C,
        SourceClass::Unverifiable => Grade::D,
    }
}

/// Grades a record from its metadata. Data representativeness is the worse
/// of the region-distance grade and the recency grade.
pub fn auto_grade(
    record: &EmissionFactorRecord,
    query: &CompleteQuery,
    regions: &RegionHierarchy,
    rules: &GradingRules,
    now_year: i32,
) -> QualityGrades {
    let region = region_grade(regions.distance(&query.region, &record.source_attrs.region));
    let recency = rules.recency_grade(record.publication_year, now_year);
    QualityGrades {
        data_representativeness: region.worse(recency),
        methodological_reliability: method_grade(record.method_class),
        sample_representativeness: rules.sample_grade(record.sample_size),
        data_authority: authority_grade(record.source_class),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Guideline,
    Literature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub record: EmissionFactorRecord,
    pub grades: Option<QualityGrades>,
    pub composite_score: Option<f64>,
    pub rank: usize,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecommendOutcome {
    Missing(Vec<Attribute>),
    Recommendations(Vec<Recommendation>),
}

fn same_attr(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Guideline entries whose vehicle, fuel and standard equal the query's and
/// whose region is the query region or one of its ancestors. Closest region
/// first, then by id.
pub fn match_guidelines(
    query: &CompleteQuery,
    guidelines: &[EmissionFactorRecord],
    regions: &RegionHierarchy,
) -> Vec<Recommendation> {
    let mut matches: Vec<(usize, &EmissionFactorRecord)> = guidelines
        .iter()
        .filter(|r| {
            let a = &r.source_attrs;
            same_attr(&a.vehicle_type, &query.vehicle_type)
                && same_attr(&a.fuel_type, &query.fuel_type)
                && same_attr(&a.emission_standard, &query.emission_standard)
        })
        .filter_map(|r| regions.ancestor_distance(&query.region, &r.source_attrs.region).map(|d| (d, r)))
        .collect();
    matches.sort_by(|(da, a), (db, b)| da.cmp(db).then_with(|| a.ef_id.cmp(&b.ef_id)));
    matches
        .into_iter()
        .enumerate()
        .map(|(i, (_, record))| Recommendation {
            record: record.clone(),
            grades: None,
            composite_score: None,
            rank: i + 1,
            tier: Tier::Guideline,
        })
        .collect()
}

/// Top-`k` literature records by cosine between the canonical query text and
/// each record's canonical text; ties by id.
pub fn search_literature<'r>(
    query: &CompleteQuery,
    literature: &'r [EmissionFactorRecord],
    provider: &dyn ModelProvider,
    k: usize,
) -> Result<Vec<&'r EmissionFactorRecord>, EfError> {
    if literature.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    let q = provider.embed_text(&query.canonical_text())?;
    let mut scored: Vec<(f64, &EmissionFactorRecord)> = Vec::with_capacity(literature.len());
    for record in literature {
        let v = provider.embed_text(&record.canonical_text())?;
        scored.push((dot(&q, &v), record));
    }
    scored.sort_by(|(sa, a), (sb, b)| sb.total_cmp(sa).then_with(|| a.ef_id.cmp(&b.ef_id)));
    Ok(scored.into_iter().take(k).map(|(_, r)| r).collect())
}

fn dot(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum()
}

/// Orders graded literature candidates: score descending, then more recent
/// publication, then id.
pub fn rank_literature(mut candidates: Vec<(EmissionFactorRecord, QualityGrades, f64)>) -> Vec<Recommendation> {
    candidates.sort_by(|(ra, _, sa), (rb, _, sb)| {
        sb.total_cmp(sa)
            .then_with(|| rb.publication_year.cmp(&ra.publication_year))
            .then_with(|| ra.ef_id.cmp(&rb.ef_id))
    });
    candidates
        .into_iter()
        .take(LITERATURE_TOP_N)
        .enumerate()
        .map(|(i, (record, grades, score))| Recommendation {
            record,
            grades: Some(grades),
            composite_score: Some(score),
            rank: i + 1,
            tier: Tier::Literature,
        })
        .collect()
}

/// Databases and settings for recommendation requests.
#[derive(Debug, Clone)]
pub struct EfRecommender {
    pub guidelines: Vec<EmissionFactorRecord>,
    pub literature: Vec<EmissionFactorRecord>,
    pub regions: RegionHierarchy,
    pub weights: GradeWeights,
    pub rules: GradingRules,
    pub literature_k: usize,
    pub now_year: i32,
}

impl EfRecommender {
    pub fn new(guidelines: Vec<EmissionFactorRecord>, literature: Vec<EmissionFactorRecord>, now_year: i32) -> Self {
        Self {
            guidelines,
            literature,
            regions: RegionHierarchy::builtin(),
            weights: GradeWeights::default(),
            rules: GradingRules::default(),
            literature_k: DEFAULT_LITERATURE_K,
            now_year,
        }
    }

    pub fn current_year() -> i32 {
        use chrono::Datelike;
        chrono::Utc::now().year()
    }

    pub fn grade(&self, record: &EmissionFactorRecord, query: &CompleteQuery) -> QualityGrades {
        record
            .grades
            .unwrap_or_else(|| auto_grade(record, query, &self.regions, &self.rules, self.now_year))
    }

    /// Guideline matches followed by the best graded literature factors.
    /// Incomplete queries return the missing attributes instead.
    pub fn recommend(&self, query: &EfQuery, provider: &dyn ModelProvider) -> Result<RecommendOutcome, EfError> {
        let query = match complete_query(query) {
            Completion::Missing(missing) => return Ok(RecommendOutcome::Missing(missing)),
            Completion::Complete(q) => q,
        };
        let mut out = match_guidelines(&query, &self.guidelines, &self.regions);
        let candidates = search_literature(&query, &self.literature, provider, self.literature_k)?
            .into_iter()
            .map(|record| {
                let grades = self.grade(record, &query);
                let score = composite_score(&grades, &self.weights);
                (record.clone(), grades, score)
            })
            .collect();
        out.extend(rank_literature(candidates));
        Ok(RecommendOutcome::Recommendations(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::StubProvider;

    fn q(v: &str, f: &str, s: &str, r: &str) -> CompleteQuery {
        CompleteQuery { vehicle_type: v.into(), fuel_type: f.into(), emission_standard: s.into(), region: r.into() }
    }

    fn record(id: &str, fuel: &str, region: &str, scale: RegionScale) -> EmissionFactorRecord {
        EmissionFactorRecord {
            ef_id: id.into(),
            source_attrs: SourceAttrs {
                vehicle_type: "light-duty".into(),
                fuel_type: fuel.into(),
                emission_standard: "China III".into(),
                region: region.into(),
                region_scale: scale,
            },
            pollutant_values: [("NOx".to_string(), PollutantValue { value: 0.2, units: "g/km".into() })].into(),
            method_class: MethodClass::StandardizedValidated,
            sample_size: Some(40),
            source_class: SourceClass::PeerReviewedJournal,
            publication_year: Some(2022),
            citation: "cite".into(),
            authoritative: false,
            grades: None,
        }
    }

    #[test]
    fn completion_lists_missing_in_order() {
        let partial = EfQuery {
            vehicle_type: Some("light-duty".into()),
            fuel_type: Some("gasoline".into()),
            emission_standard: Some("China III".into()),
            region: None,
        };
        assert_eq!(complete_query(&partial), Completion::Missing(vec![Attribute::Region]));
        assert_eq!(
            complete_query(&EfQuery::default()),
            Completion::Missing(vec![Attribute::VehicleType, Attribute::FuelType, Attribute::EmissionStandard, Attribute::Region])
        );
        let full = EfQuery { region: Some("Guangdong".into()), ..partial };
        assert!(matches!(complete_query(&full), Completion::Complete(_)));
        let blank = EfQuery { region: Some("  ".into()), ..full };
        assert_eq!(complete_query(&blank), Completion::Missing(vec![Attribute::Region]));
    }

    #[test]
    fn grade_scores() {
        assert_eq!(grade_to_score(Grade::A), 4);
        assert_eq!(grade_to_score(Grade::B), 3);
        assert_eq!(grade_to_score(Grade::C), 2);
        assert_eq!(grade_to_score(Grade::D), 1);
    }

    #[test]
    fn composite_examples() {
        let w = GradeWeights::default();
        assert!((composite_score(&QualityGrades::new(Grade::A, Grade::A, Grade::A, Grade::A), &w) - 4.0).abs() < 1e-9);
        assert!((composite_score(&QualityGrades::new(Grade::D, Grade::D, Grade::D, Grade::D), &w) - 1.0).abs() < 1e-9);
        assert!((composite_score(&QualityGrades::new(Grade::A, Grade::A, Grade::B, Grade::C), &w) - 3.6).abs() < 1e-9);
    }

    #[test]
    fn weight_validation() {
        assert!(GradeWeights::default().validate().is_ok());
        assert!(GradeWeights::new(0.5, 0.5, 0.1, 0.1).is_err());
        assert!(GradeWeights::new(0.5, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn hierarchy_distances() {
        let h = RegionHierarchy::builtin();
        assert_eq!(h.distance("Guangdong", "guangdong"), Some(0));
        assert_eq!(h.distance("Guangdong", "China"), Some(1));
        assert_eq!(h.distance("China", "Guangzhou"), Some(2));
        assert_eq!(h.distance("Guangzhou", "Global"), Some(3));
        assert_eq!(h.distance("Guangdong", "Jiangsu"), None);
        assert_eq!(h.distance("Atlantis", "China"), None);
        assert_eq!(h.ancestor_distance("Guangdong", "China"), Some(1));
        assert_eq!(h.ancestor_distance("China", "Guangdong"), None);
    }

    #[test]
    fn hierarchy_rejects_bad_parents() {
        let nodes = [
            ("A".to_string(), RegionNode { scale: RegionScale::Country, parent: Some("B".into()) }),
            ("B".to_string(), RegionNode { scale: RegionScale::City, parent: None }),
        ]
        .into();
        assert!(RegionHierarchy::from_nodes(nodes).is_err());
    }

    #[test]
    fn auto_grade_examples() {
        let h = RegionHierarchy::builtin();
        let rules = GradingRules::default();
        let query = q("light-duty", "gasoline", "China III", "Guangdong");
        let mut r = record("r", "gasoline", "Guangdong", RegionScale::Province);
        r.publication_year = Some(2021);
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024), QualityGrades::new(Grade::A, Grade::A, Grade::A, Grade::A));

        r.publication_year = None;
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024).data_representativeness, Grade::D);

        r.publication_year = Some(2021);
        r.sample_size = Some(10);
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024).sample_representativeness, Grade::B);
        r.sample_size = Some(9);
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024).sample_representativeness, Grade::C);
        r.sample_size = None;
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024).sample_representativeness, Grade::D);
    }

    #[test]
    fn data_representativeness_takes_worse_aspect() {
        let h = RegionHierarchy::builtin();
        let rules = GradingRules::default();
        let query = q("light-duty", "gasoline", "China III", "Guangzhou");
        let mut r = record("r", "gasoline", "China", RegionScale::Country);
        r.publication_year = Some(2023);
        // Two levels apart (C), recent (A) → C.
        assert_eq!(auto_grade(&r, &query, &h, &rules, 2024).data_representativeness, Grade::C);
        // Same region (A), 12 years old (C) → C.
        let mut same = record("s", "gasoline", "Guangzhou", RegionScale::City);
        same.publication_year = Some(2012);
        assert_eq!(auto_grade(&same, &query, &h, &rules, 2024).data_representativeness, Grade::C);
        // Recency boundaries: exactly 5 → A, 10 → B, 15 → C, 16 → D.
        for (age, grade) in [(5, Grade::A), (6, Grade::B), (10, Grade::B), (15, Grade::C), (16, Grade::D)] {
            same.publication_year = Some(2024 - age);
            assert_eq!(auto_grade(&same, &query, &h, &rules, 2024).data_representativeness, grade, "age {age}");
        }
    }

    #[test]
    fn authority_and_method_maps() {
        assert_eq!(authority_grade(SourceClass::OfficialStandardOrGuideline), Grade::A);
        assert_eq!(authority_grade(SourceClass::ThesisOrConference), Grade::B);
        assert_eq!(authority_grade(SourceClass::TechnicalReport), Grade::C);
        assert_eq!(authority_grade(SourceClass::Unverifiable), Grade::D);
        assert_eq!(method_grade(MethodClass::ReliableUnstandardized), Grade::B);
        assert_eq!(method_grade(MethodClass::Undocumented), Grade::D);
    }

    #[test]
    fn guideline_matching() {
        let h = RegionHierarchy::builtin();
        let query = q("light-duty", "gasoline", "China III", "Guangdong");
        let mut exact = record("g1", "gasoline", "Guangdong", RegionScale::Province);
        exact.source_class = SourceClass::OfficialStandardOrGuideline;
        let national = record("g0", "gasoline", "China", RegionScale::Country);
        let diesel = record("g2", "diesel", "Guangdong", RegionScale::Province);
        let other_province = record("g3", "gasoline", "Jiangsu", RegionScale::Province);
        let out = match_guidelines(&query, &[national, exact, diesel, other_province], &h);
        let ids: Vec<_> = out.iter().map(|r| r.record.ef_id.as_str()).collect();
        assert_eq!(ids, ["g1", "g0"]);
        assert!(out.iter().all(|r| r.tier == Tier::Guideline && r.composite_score.is_none() && r.grades.is_none()));
        assert_eq!(out.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn literature_search_prefers_matching_record() {
        let stub = StubProvider::default();
        let query = q("light-duty", "gasoline", "China III", "Guangdong");
        let mut a = record("a", "diesel", "Jiangsu", RegionScale::Province);
        a.source_attrs.vehicle_type = "heavy-duty".into();
        a.source_attrs.emission_standard = "China V".into();
        let b = record("b", "gasoline", "Guangdong", RegionScale::Province);
        let mut c = record("c", "natural gas", "Beijing", RegionScale::Province);
        c.source_attrs.vehicle_type = "bus".into();
        let db = vec![a, b, c];
        let hits = search_literature(&query, &db, &stub, 20).unwrap();
        assert_eq!(hits[0].ef_id, "b");
        assert_eq!(hits.len(), 3);
        assert!(search_literature(&query, &[], &stub, 20).unwrap().is_empty());
    }

    #[test]
    fn record_validation() {
        let mut r = record("x", "gasoline", "China", RegionScale::Country);
        r.authoritative = true;
        assert!(r.validate().is_err());
        let mut r = record("x", "gasoline", "China", RegionScale::Country);
        r.pollutant_values.insert("CO".into(), PollutantValue { value: -1.0, units: "g/km".into() });
        assert!(r.validate().is_err());
        let mut r = record("x", "gasoline", "China", RegionScale::Country);
        r.pollutant_values.insert("CO".into(), PollutantValue { value: 1.0, units: " ".into() });
        assert!(r.validate().is_err());
    }

    #[test]
    fn recommend_gate_and_tiers() {
        let stub = StubProvider::default();
        let mut guideline = record("g", "gasoline", "China", RegionScale::Country);
        guideline.source_class = SourceClass::OfficialStandardOrGuideline;
        guideline.authoritative = true;
        let lit = vec![
            record("l1", "gasoline", "Guangdong", RegionScale::Province),
            record("l2", "gasoline", "China", RegionScale::Country),
        ];
        let rec = EfRecommender::new(vec![guideline], lit, 2024);
        let partial = EfQuery {
            vehicle_type: Some("light-duty".into()),
            fuel_type: Some("gasoline".into()),
            emission_standard: Some("China III".into()),
            region: None,
        };
        assert_eq!(rec.recommend(&partial, &stub).unwrap(), RecommendOutcome::Missing(vec![Attribute::Region]));

        let full = EfQuery { region: Some("Guangdong".into()), ..partial };
        let RecommendOutcome::Recommendations(out) = rec.recommend(&full, &stub).unwrap() else { panic!() };
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].tier, Tier::Guideline);
        assert_eq!(out[1].record.ef_id, "l1");
        assert!((out[1].composite_score.unwrap() - 4.0).abs() < 1e-12);
        // l2 is one level coarser: data representativeness B → 0.35*3 + 0.65*4.
        assert!((out[2].composite_score.unwrap() - 3.65).abs() < 1e-12);
    }

    #[test]
    fn manual_grades_override() {
        let stub = StubProvider::default();
        let mut r = record("m", "gasoline", "Guangdong", RegionScale::Province);
        r.grades = Some(QualityGrades::new(Grade::D, Grade::D, Grade::D, Grade::D));
        let rec = EfRecommender::new(vec![], vec![r], 2024);
        let full = EfQuery {
            vehicle_type: Some("light-duty".into()),
            fuel_type: Some("gasoline".into()),
            emission_standard: Some("China III".into()),
            region: Some("Guangdong".into()),
        };
        let RecommendOutcome::Recommendations(out) = rec.recommend(&full, &stub).unwrap() else { panic!() };
        assert!((out[0].composite_score.unwrap() - 1.0).abs() < 1e-12);
    }
}
