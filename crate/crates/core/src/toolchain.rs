//! Function registry, call parsing and schema validation.
//!
//! A model reply is turned into a [`FunctionCall`] only by
//! [`FunctionRegistry::parse_function_call`], which validates the arguments
//! against the registered [`FunctionSpec`] and reports every violation it
//! finds. Handlers are only ever invoked with calls that passed validation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::inventory::{AggregateTable, ChartData};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("function `{0}` is already registered")]
    DuplicateFunction(String),
    #[error("function `{0}` is not registered")]
    UnknownFunction(String),
    #[error("invalid function spec: {0}")]
    InvalidSpec(String),
}

/// Backend failure, phrased so it can be fed back to the model.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{message}")]
pub struct ExecutionError {
    pub message: String,
}

impl ExecutionError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Enum { values: Vec<String> },
    Array { items: Box<ParamType> },
}

impl ParamType {
    pub fn enumeration<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Self {
        ParamType::Enum { values: values.into_iter().map(Into::into).collect() }
    }

    pub fn array_of(items: ParamType) -> Self {
        ParamType::Array { items: Box::new(items) }
    }

    fn label(&self) -> String {
        match self {
            ParamType::String => "string".into(),
            ParamType::Integer => "integer".into(),
            ParamType::Number => "number".into(),
            ParamType::Boolean => "boolean".into(),
            ParamType::Enum { values } => format!("one of [{}]", values.join(", ")),
            ParamType::Array { items } => format!("array of {}", items.label()),
        }
    }

    fn json_schema(&self) -> Value {
        match self {
            ParamType::String => json!({"type": "string"}),
            ParamType::Integer => json!({"type": "integer"}),
            ParamType::Number => json!({"type": "number"}),
            ParamType::Boolean => json!({"type": "boolean"}),
            ParamType::Enum { values } => json!({"type": "string", "enum": values}),
            ParamType::Array { items } => json!({"type": "array", "items": items.json_schema()}),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ParamSpec {
    pub fn required(name: &str, ty: ParamType, description: &str) -> Self {
        Self { name: name.into(), ty, required: true, description: Some(description.into()) }
    }

    pub fn optional(name: &str, ty: ParamType, description: &str) -> Self {
        Self { name: name.into(), ty, required: false, description: Some(description.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl FunctionSpec {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let valid_name = !self.name.is_empty()
            && self.name.starts_with(|c: char| c.is_ascii_lowercase())
            && self.name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !valid_name {
            return Err(RegistryError::InvalidSpec(format!("`{}` is not a snake_case name", self.name)));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(RegistryError::InvalidSpec(format!("parameter `{}` declared twice", p.name)));
            }
            let element = match &p.ty {
                ParamType::Array { items } => {
                    if matches!(**items, ParamType::Array { .. }) {
                        return Err(RegistryError::InvalidSpec(format!("`{}` nests arrays", p.name)));
                    }
                    items.as_ref()
                }
                other => other,
            };
            if let ParamType::Enum { values } = element {
                if values.is_empty() {
                    return Err(RegistryError::InvalidSpec(format!("enum `{}` has no values", p.name)));
                }
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// The OpenAI-style tool description used in function-calling prompts.
    pub fn to_json_schema(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.parameters {
            let mut schema = p.ty.json_schema();
            if let (Some(desc), Value::Object(obj)) = (&p.description, &mut schema) {
                obj.insert("description".into(), Value::String(desc.clone()));
            }
            properties.insert(p.name.clone(), schema);
        }
        let required: Vec<&str> = self.parameters.iter().filter(|p| p.required).map(|p| p.name.as_str()).collect();
        json!({
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": required,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownFunction,
    MissingRequired,
    UnknownParam,
    TypeMismatch,
    EnumMismatch,
    MalformedJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    kind: ViolationKind,
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { kind, path: path.into(), message: message.into() }
    }

    pub fn kind(&self) -> ViolationKind {
        self.kind
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        if self.path.is_empty() {
            write!(f, "{kind}: {}", self.message)
        } else {
            write!(f, "{kind}@{}: {}", self.path, self.message)
        }
    }
}

/// A function invocation whose arguments satisfied the named spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionCall {
    name: String,
    arguments: Map<String, Value>,
}

impl FunctionCall {
    #[cfg(test)]
    pub(crate) fn new_unchecked(name: impl Into<String>, arguments: Map<String, Value>) -> Self {
        Self { name: name.into(), arguments }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arguments(&self) -> &Map<String, Value> {
        &self.arguments
    }

    pub fn arg(&self, name: &str) -> Option<&Value> {
        self.arguments.get(name)
    }

    pub fn str_arg(&self, name: &str) -> Option<&str> {
        self.arg(name).and_then(Value::as_str)
    }

    pub fn int_arg(&self, name: &str) -> Option<i64> {
        self.arg(name).and_then(Value::as_i64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function call serializes")
    }
}

/// Result payloads a backend handler may return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionResult {
    Table { title: String, units: String, table: AggregateTable },
    Chart { chart: ChartData },
    Summary { text: String },
}

pub type Handler<B> = Arc<dyn Fn(&B, &FunctionCall) -> Result<FunctionResult, ExecutionError> + Send + Sync>;

/// Registered function specs plus the handlers bound to them. `B` is the
/// backend handlers execute against.
pub struct FunctionRegistry<B> {
    specs: BTreeMap<String, FunctionSpec>,
    handlers: BTreeMap<String, Handler<B>>,
}

impl<B> Default for FunctionRegistry<B> {
    fn default() -> Self {
        Self { specs: BTreeMap::new(), handlers: BTreeMap::new() }
    }
}

impl<B> Clone for FunctionRegistry<B> {
    fn clone(&self) -> Self {
        Self { specs: self.specs.clone(), handlers: self.handlers.clone() }
    }
}

impl<B> fmt::Debug for FunctionRegistry<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionRegistry")
            .field("functions", &self.specs.keys().collect::<Vec<_>>())
            .field("bound", &self.handlers.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<B> FunctionRegistry<B> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn register_function(&mut self, spec: FunctionSpec) -> Result<(), RegistryError> {
        spec.validate()?;
        if self.specs.contains_key(&spec.name) {
            return Err(RegistryError::DuplicateFunction(spec.name));
        }
        self.specs.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn bind(
        &mut self,
        name: &str,
        handler: impl Fn(&B, &FunctionCall) -> Result<FunctionResult, ExecutionError> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        if !self.specs.contains_key(name) {
            return Err(RegistryError::UnknownFunction(name.to_string()));
        }
        self.handlers.insert(name.to_string(), Arc::new(handler));
        Ok(())
    }

    /// Registers a spec and binds its handler in one step.
    pub fn register_bound(
        &mut self,
        spec: FunctionSpec,
        handler: impl Fn(&B, &FunctionCall) -> Result<FunctionResult, ExecutionError> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        let name = spec.name.clone();
        self.register_function(spec)?;
        self.bind(&name, handler)
    }

    pub fn spec(&self, name: &str) -> Option<&FunctionSpec> {
        self.specs.get(name)
    }

    /// Specs sorted by name.
    pub fn describe_registry(&self) -> Vec<&FunctionSpec> {
        self.specs.values().collect()
    }

    /// JSON array of tool schemas, as embedded in prompts and `tools list --json`.
    pub fn schema_json(&self) -> Value {
        Value::Array(self.specs.values().map(FunctionSpec::to_json_schema).collect())
    }

    /// Extracts, resolves and validates a model-emitted call.
    pub fn parse_function_call(&self, raw: &str) -> Result<FunctionCall, Vec<Violation>> {
        let object = extract_json_object(raw).ok_or_else(|| {
            vec![Violation::new(ViolationKind::MalformedJson, "", "no JSON object found in the reply")]
        })?;
        let name = match object.get("name") {
            Some(Value::String(s)) => s.clone(),
            _ => {
                return Err(vec![Violation::new(
                    ViolationKind::MalformedJson,
                    "name",
                    "top-level \"name\" must be a string",
                )])
            }
        };
        let arguments = match object.get("arguments") {
            Some(Value::Object(map)) => map.clone(),
            // Some models double-encode arguments as a JSON string.
            Some(Value::String(s)) => match serde_json::from_str::<Value>(s) {
                Ok(Value::Object(map)) => map,
                _ => {
                    return Err(vec![Violation::new(
                        ViolationKind::MalformedJson,
                        "arguments",
                        "\"arguments\" must be a JSON object",
                    )])
                }
            },
            _ => {
                return Err(vec![Violation::new(
                    ViolationKind::MalformedJson,
                    "arguments",
                    "top-level \"arguments\" must be an object",
                )])
            }
        };
        let Some(spec) = self.specs.get(&name) else {
            return Err(vec![Violation::new(
                ViolationKind::UnknownFunction,
                "name",
                format!("no function named `{name}`; available: {}", self.specs.keys().cloned().collect::<Vec<_>>().join(", ")),
            )]);
        };
        let violations = validate_arguments(&arguments, spec);
        if violations.is_empty() {
            Ok(FunctionCall { name, arguments })
        } else {
            Err(violations)
        }
    }

    /// Dispatches a validated call to its handler.
    pub fn execute_call(&self, call: &FunctionCall, backend: &B) -> Result<FunctionResult, ExecutionError> {
        let spec = self
            .specs
            .get(&call.name)
            .ok_or_else(|| ExecutionError::new(format!("unknown function `{}`", call.name)))?;
        debug_assert!(validate_call(call, spec).is_empty(), "executing an unvalidated call");
        let handler = self.handlers.get(&call.name).ok_or_else(|| ExecutionError::new("unbound function"))?;
        handler(backend, call)
    }
}

/// Checks a call against its spec and returns every violation.
pub fn validate_call(call: &FunctionCall, spec: &FunctionSpec) -> Vec<Violation> {
    if call.name != spec.name {
        return vec![Violation::new(
            ViolationKind::UnknownFunction,
            "name",
            format!("call targets `{}` but was checked against `{}`", call.name, spec.name),
        )];
    }
    validate_arguments(&call.arguments, spec)
}

/// Validates an argument object against a spec.
pub fn validate_arguments(arguments: &Map<String, Value>, spec: &FunctionSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    for param in &spec.parameters {
        match arguments.get(&param.name) {
            None if param.required => violations.push(Violation::new(
                ViolationKind::MissingRequired,
                &param.name,
                format!("required parameter `{}` ({}) is missing", param.name, param.ty.label()),
            )),
            None => {}
            Some(value) => check_value(value, &param.ty, &param.name, &mut violations),
        }
    }
    for key in arguments.keys() {
        if spec.param(key).is_none() {
            violations.push(Violation::new(
                ViolationKind::UnknownParam,
                key,
                format!("`{}` does not accept parameter `{key}`", spec.name),
            ));
        }
    }
    violations
}

fn check_value(value: &Value, ty: &ParamType, path: &str, out: &mut Vec<Violation>) {
    let mismatch = |out: &mut Vec<Violation>| {
        out.push(Violation::new(
            ViolationKind::TypeMismatch,
            path,
            format!("expected {}, got {}", ty.label(), json_type_name(value)),
        ))
    };
    match ty {
        ParamType::String if !value.is_string() => mismatch(out),
        ParamType::Integer if !(value.is_i64() || value.is_u64()) => mismatch(out),
        ParamType::Number if !value.is_number() => mismatch(out),
        ParamType::Boolean if !value.is_boolean() => mismatch(out),
        ParamType::Enum { values } => match value.as_str() {
            None => mismatch(out),
            Some(s) if !values.iter().any(|v| v == s) => out.push(Violation::new(
                ViolationKind::EnumMismatch,
                path,
                format!("`{s}` is not one of [{}]", values.join(", ")),
            )),
            Some(_) => {}
        },
        ParamType::Array { items } => match value.as_array() {
            None => mismatch(out),
            Some(elements) => {
                for (i, element) in elements.iter().enumerate() {
                    check_value(element, items, &format!("{path}[{i}]"), out);
                }
            }
        },
        _ => {}
    }
}

fn json_type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_f64() => "number",
        Value::Number(_) => "integer",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Finds the first JSON object in free text, preferring a fenced code block.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    if let Some(fenced) = fenced_block(raw) {
        if let Some(obj) = first_object(fenced) {
            return Some(obj);
        }
    }
    first_object(raw)
}

fn fenced_block(raw: &str) -> Option<&str> {
    let open = raw.find("```")?;
    let after = &raw[open + 3..];
    let body_start = after.find('\n').map_or(0, |i| i + 1);
    let body = &after[body_start..];
    let close = body.find("```")?;
    Some(&body[..close])
}

fn first_object(text: &str) -> Option<Map<String, Value>> {
    text.match_indices('{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}
