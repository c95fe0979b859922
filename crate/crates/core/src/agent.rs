//! Query routing and the two answer paths: grounded knowledge answers over the
//! vector index, and function-calling analysis over the inventory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{make_chart, ChartData, ChartKind, ChartSource, InventoryStore};
use crate::providers::{ChatMessage, ModelProvider, ProviderError, ProviderMode};
use crate::retrieval::{ScoredChunk, VectorIndex, DEFAULT_TOP_K};
use crate::toolchain::{FunctionCall, FunctionRegistry, FunctionResult, Violation};

/// Returned verbatim whenever retrieval produces no context.
pub const FALLBACK_NOTICE: &str = "No sufficient domain context was found to answer this question.";

/// Number of previous turns carried into a prompt.
pub const HISTORY_WINDOW: usize = 3;

pub const DEFAULT_MAX_RETRIES: usize = 2;

const ANALYSIS_KEYWORDS: &[&str] = &[
    "plot",
    "chart",
    "trend",
    "contribution",
    "inventory",
    "aggregate",
    "emissions of",
    "by sector",
    "by year",
    "annual",
    "emissions from",
    "breakdown",
    "by subsector",
    "by pollutant",
    "subcategor",
    "绘制",
    "图表",
    "趋势",
    "贡献",
    "清单",
    "汇总",
    "排放量",
    "按行业",
    "按部门",
    "按年份",
    "年度",
];

/// Openers that mark a conceptual question even when it mentions inventories.
const CONCEPT_OPENERS: &[&str] = &["what is", "what are", "how is", "how are", "how do", "how does", "why", "explain", "define", "什么是", "为什么", "如何"];

/// Keywords that force analysis routing regardless of phrasing.
const EXPLICIT_ANALYSIS: &[&str] = &["plot", "chart", "breakdown", "by sector", "by year", "by subsector", "by pollutant", "绘制", "图表"];

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("query is empty")]
    EmptyText,
    #[error("answer unavailable: {0}")]
    AnswerUnavailable(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("analysis failed after {} attempts: {last_error}", trace.len())]
    AnalysisFailed { last_error: String, trace: Vec<TraceEntry> },
    #[error("no analysis functions are registered")]
    NoTools,
    #[error("turn index {got} out of order, expected {expected}")]
    TurnOrder { expected: usize, got: usize },
    #[error("prompt pack: {0}")]
    Prompt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryCategory {
    KnowledgeQa,
    DataAnalysis,
}

/// Named prompt templates with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPack {
    pub classification: String,
    pub grounding: String,
    pub function_calling: String,
    pub fallback: String,
}

impl Default for PromptPack {
    fn default() -> Self {
        Self {
            classification: include_str!("../prompts/classification.txt").into(),
            grounding: include_str!("../prompts/grounding.txt").into(),
            function_calling: include_str!("../prompts/function_calling.txt").into(),
            fallback: include_str!("../prompts/fallback.txt").into(),
        }
    }
}

impl PromptPack {
    pub const FILES: [&'static str; 4] = ["classification.txt", "grounding.txt", "function_calling.txt", "fallback.txt"];

    /// Loads all four templates from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|e| AgentError::Prompt(format!("{}: {e}", dir.join(name).display())))
        };
        Ok(Self {
            classification: read(Self::FILES[0])?,
            grounding: read(Self::FILES[1])?,
            function_calling: read(Self::FILES[2])?,
            fallback: read(Self::FILES[3])?,
        })
    }
}

/// Substitutes `{{name}}` placeholders. Unknown placeholders are left as is.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter()
        .fold(template.to_string(), |acc, (name, value)| acc.replace(&format!("{{{{{name}}}}}"), value))
}

/// Keyword routing used in stub mode and whenever the model's label is unusable.
pub fn heuristic_category(query: &str) -> QueryCategory {
    let lower = query.trim_start().to_lowercase();
    let conceptual = CONCEPT_OPENERS.iter().any(|k| lower.starts_with(k));
    if EXPLICIT_ANALYSIS.iter().any(|k| lower.contains(k))
        || (!conceptual && ANALYSIS_KEYWORDS.iter().any(|k| lower.contains(k)))
    {
        QueryCategory::DataAnalysis
    } else {
        QueryCategory::KnowledgeQa
    }
}

fn parse_category_label(reply: &str) -> Option<QueryCategory> {
    let label = reply.trim().trim_matches(|c: char| !c.is_alphanumeric());
    match label {
        "I" | "Ⅰ" => Some(QueryCategory::KnowledgeQa),
        "II" | "Ⅱ" => Some(QueryCategory::DataAnalysis),
        _ => None,
    }
}

/// Outcome of one function-calling attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CallOutcome {
    Success { summary: String },
    Rejected { violations: Vec<Violation> },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub attempt: usize,
    pub raw: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call: Option<FunctionCall>,
    pub outcome: CallOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversationTurn {
    pub turn_index: usize,
    pub user_text: String,
    pub category: QueryCategory,
    pub answer_text: String,
    pub citations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartData>,
    pub function_trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub answer_text: String,
    pub citations: Vec<String>,
    pub grounded: bool,
}

impl GroundedAnswer {
    pub fn fallback() -> Self {
        Self { answer_text: FALLBACK_NOTICE.into(), citations: Vec::new(), grounded: false }
    }
}

/// Ordered turns of one conversation.
#[derive(Debug, Clone, Default)]
pub struct Session {
    turns: Vec<ConversationTurn>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn turns(&self) -> &[ConversationTurn] {
        &self.turns
    }

    pub fn next_index(&self) -> usize {
        self.turns.len()
    }

    pub fn push(&mut self, turn: ConversationTurn) -> Result<&ConversationTurn, AgentError> {
        if turn.turn_index != self.next_index() {
            return Err(AgentError::TurnOrder { expected: self.next_index(), got: turn.turn_index });
        }
        self.turns.push(turn);
        Ok(self.turns.last().expect("just pushed"))
    }
}

fn history_window(history: &[ConversationTurn]) -> &[ConversationTurn] {
    &history[history.len().saturating_sub(HISTORY_WINDOW)..]
}

fn push_history(messages: &mut Vec<ChatMessage>, history: &[ConversationTurn]) {
    for turn in history_window(history) {
        messages.push(ChatMessage::user(turn.user_text.clone()));
        messages.push(ChatMessage::assistant(turn.answer_text.clone()));
    }
}

/// Builds the grounded-answer conversation: instructions and delimited context
/// blocks, the last few turns, then the query.
pub fn build_grounded_prompt(
    query: &str,
    contexts: &[ScoredChunk],
    history: &[ConversationTurn],
    prompts: &PromptPack,
) -> Vec<ChatMessage> {
    let system = if contexts.is_empty() {
        render_template(&prompts.fallback, &[("fallback_notice", FALLBACK_NOTICE)])
    } else {
        let blocks = contexts
            .iter()
            .map(|c| format!("[CONTEXT {}]\n{}\n[/CONTEXT]", c.chunk_id, c.chunk.display_text))
            .collect::<Vec<_>>()
            .join("\n\n");
        render_template(&prompts.grounding, &[("fallback_notice", FALLBACK_NOTICE), ("contexts", &blocks)])
    };
    let mut messages = vec![ChatMessage::system(system)];
    push_history(&mut messages, history);
    messages.push(ChatMessage::user(query));
    messages
}

/// Text fed back to the model after a rejected or failed call.
pub fn retry_feedback(outcome: &CallOutcome) -> String {
    match outcome {
        CallOutcome::Rejected { violations } => {
            let lines: Vec<String> = violations.iter().map(|v| format!("- {v}")).collect();
            format!(
                "The function call was rejected:\n{}\nReply with a corrected JSON function call.",
                lines.join("\n")
            )
        }
        CallOutcome::Failed { error } => {
            format!("The function call failed: {error}\nReply with a corrected JSON function call.")
        }
        CallOutcome::Success { .. } => String::new(),
    }
}

fn summarize(result: &FunctionResult) -> (String, Option<ChartData>) {
    match result {
        FunctionResult::Table { title, units, table } => {
            let parts: Vec<String> = table
                .rows
                .iter()
                .map(|r| format!("{} {:.2} ({:.1}%)", r.key, r.total, r.share * 100.0))
                .collect();
            let chart = make_chart(ChartSource::Table(table), ChartKind::Pie, title, units).ok();
            (format!("{title} [{units}]: {}", parts.join(", ")), chart)
        }
        FunctionResult::Chart { chart } => {
            let series: Vec<&str> = chart.series.iter().map(|s| s.name.as_str()).collect();
            let text = format!(
                "{} [{}]: {} series ({}) over {} categories ({}).",
                chart.title,
                chart.units,
                series.len(),
                series.join(", "),
                chart.categories.len(),
                chart.categories.join(", ")
            );
            (text, Some(chart.clone()))
        }
        FunctionResult::Summary { text } => (text.clone(), None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub top_k: usize,
    pub max_retries: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { top_k: DEFAULT_TOP_K, max_retries: DEFAULT_MAX_RETRIES }
    }
}

/// The routed agent. Borrowed dependencies; cheap to build per request.
#[derive(Clone, Copy)]
pub struct Agent<'a> {
    pub provider: &'a dyn ModelProvider,
    pub index: &'a VectorIndex,
    pub registry: &'a FunctionRegistry<InventoryStore>,
    pub inventory: &'a InventoryStore,
    pub prompts: &'a PromptPack,
    pub config: AgentConfig,
}

impl<'a> Agent<'a> {
    pub fn classify_query(&self, query: &str) -> Result<QueryCategory, AgentError> {
        if query.trim().is_empty() {
            return Err(AgentError::EmptyText);
        }
        if self.provider.mode() == ProviderMode::Stub {
            return Ok(heuristic_category(query));
        }
        let prompt = render_template(&self.prompts.classification, &[("query", query)]);
        match self.provider.chat_complete(&[ChatMessage::user(prompt)]) {
            Ok(reply) => Ok(parse_category_label(&reply).unwrap_or_else(|| heuristic_category(query))),
            Err(e) => {
                tracing::warn!(error = %e, "classification call failed, using keyword routing");
                Ok(heuristic_category(query))
            }
        }
    }

    pub fn answer_knowledge_query(&self, query: &str, history: &[ConversationTurn]) -> Result<GroundedAnswer, AgentError> {
        self.answer_with_contexts(query, history).map(|(answer, _)| answer)
    }

    /// Like `answer_knowledge_query`, also returning the retrieved chunks.
    pub fn answer_with_contexts(
        &self,
        query: &str,
        history: &[ConversationTurn],
    ) -> Result<(GroundedAnswer, Vec<ScoredChunk>), AgentError> {
        if query.trim().is_empty() {
            return Err(AgentError::EmptyText);
        }
        let contexts = self
            .index
            .search_top_k(query, self.config.top_k, self.provider)
            .map_err(|e| AgentError::AnswerUnavailable(e.to_string()))?;
        if contexts.is_empty() {
            return Ok((GroundedAnswer::fallback(), contexts));
        }
        let messages = build_grounded_prompt(query, &contexts, history, self.prompts);
        let answer_text = self
            .provider
            .chat_complete(&messages)
            .map_err(|e| AgentError::AnswerUnavailable(e.to_string()))?;
        let answer = GroundedAnswer {
            answer_text,
            citations: contexts.iter().map(|c| c.chunk_id.clone()).collect(),
            grounded: true,
        };
        Ok((answer, contexts))
    }

    /// Asks the model for a function call, validates and executes it, feeding
    /// errors back for at most `max_retries` further attempts.
    pub fn run_analysis_query(&self, query: &str, session: &Session) -> Result<ConversationTurn, AgentError> {
        if query.trim().is_empty() {
            return Err(AgentError::EmptyText);
        }
        if self.registry.is_empty() {
            return Err(AgentError::NoTools);
        }
        let functions = serde_json::to_string_pretty(&self.registry.schema_json()).expect("schema serializes");
        let system = render_template(&self.prompts.function_calling, &[("functions", &functions)]);
        let mut messages = vec![ChatMessage::system(system)];
        push_history(&mut messages, session.turns());
        messages.push(ChatMessage::user(query));

        let mut trace = Vec::new();
        for attempt in 0..=self.config.max_retries {
            let raw = self
                .provider
                .chat_complete(&messages)
                .map_err(|e: ProviderError| AgentError::ProviderUnavailable(e.to_string()))?;
            let (call, outcome, produced) = match self.registry.parse_function_call(&raw) {
                Err(violations) => (None, CallOutcome::Rejected { violations }, None),
                Ok(call) => match self.registry.execute_call(&call, self.inventory) {
                    Ok(result) => {
                        let (summary, chart) = summarize(&result);
                        (Some(call), CallOutcome::Success { summary: summary.clone() }, Some((summary, chart)))
                    }
                    Err(e) => (Some(call), CallOutcome::Failed { error: e.message }, None),
                },
            };
            let feedback = retry_feedback(&outcome);
            trace.push(TraceEntry { attempt, raw: raw.clone(), call, outcome });
            if let Some((answer_text, chart)) = produced {
                return Ok(ConversationTurn {
                    turn_index: session.next_index(),
                    user_text: query.to_string(),
                    category: QueryCategory::DataAnalysis,
                    answer_text,
                    citations: Vec::new(),
                    chart,
                    function_trace: trace,
                });
            }
            messages.push(ChatMessage::assistant(raw));
            messages.push(ChatMessage::tool(feedback));
        }
        let last_error = trace
            .last()
            .map(|t| match &t.outcome {
                CallOutcome::Rejected { violations } => {
                    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                }
                CallOutcome::Failed { error } => error.clone(),
                CallOutcome::Success { .. } => unreachable!("successful attempts return early"),
            })
            .unwrap_or_default();
        Err(AgentError::AnalysisFailed { last_error, trace })
    }

    /// Classifies, routes and records one turn.
    pub fn handle<'s>(&self, session: &'s mut Session, query: &str) -> Result<&'s ConversationTurn, AgentError> {
        let turn = match self.classify_query(query)? {
            QueryCategory::KnowledgeQa => {
                let answer = self.answer_knowledge_query(query, session.turns())?;
                ConversationTurn {
                    turn_index: session.next_index(),
                    user_text: query.to_string(),
                    category: QueryCategory::KnowledgeQa,
                    answer_text: answer.answer_text,
                    citations: answer.citations,
                    chart: None,
                    function_trace: Vec::new(),
                }
            }
            QueryCategory::DataAnalysis => self.run_analysis_query(query, session)?,
        };
        session.push(turn)
    }
}
