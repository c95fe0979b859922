//! The data-analysis tool set exposed to the function-calling model.
//!
//! Four tools mirror the showcase analyses: sector contribution pies,
//! multi-year subsector trends, cross-pollutant contributions and sub-source
//! breakdowns. All of them run against an [`InventoryStore`].

use serde_json::{Map, Value};

use crate::corpus::Species;
use crate::inventory::{
    make_chart, ChartKind, ChartSource, CrossTab, FilterSpec, GroupKey, InventoryError, InventoryQuery,
    InventoryStore, AMOUNT_UNITS,
};
use crate::toolchain::{
    validate_arguments, ExecutionError, FunctionCall, FunctionRegistry, FunctionResult, FunctionSpec, ParamSpec,
    ParamType, Violation, ViolationKind,
};

pub const AGGREGATE_EMISSIONS: &str = "aggregate_emissions";
pub const EMISSION_TREND: &str = "emission_trend";
pub const CROSS_POLLUTANT_CONTRIBUTION: &str = "cross_pollutant_contribution";
pub const SUB_SOURCE_BREAKDOWN: &str = "sub_source_breakdown";

fn species_enum() -> ParamType {
    ParamType::enumeration(Species::ALL.iter().map(|s| s.as_str()))
}

fn group_enum(keys: &[GroupKey]) -> ParamType {
    ParamType::enumeration(keys.iter().map(|k| k.as_str()))
}

pub fn aggregate_emissions_spec() -> FunctionSpec {
    FunctionSpec {
        name: AGGREGATE_EMISSIONS.into(),
        description: "Total emissions of one pollutant in one year, grouped by a key, with each group's share of the total. Use for contribution-by-sector questions.".into(),
        parameters: vec![
            ParamSpec::required("pollutant", species_enum(), "Pollutant species"),
            ParamSpec::required("year", ParamType::Integer, "Inventory year"),
            ParamSpec::required("group_by", group_enum(&[GroupKey::Sector, GroupKey::Subsector]), "Grouping key"),
            ParamSpec::optional("region", ParamType::String, "Restrict to one region"),
            ParamSpec::optional("sector", ParamType::String, "Restrict to one sector"),
        ],
    }
}

pub fn emission_trend_spec() -> FunctionSpec {
    FunctionSpec {
        name: EMISSION_TREND.into(),
        description: "Annual emissions of one pollutant from one sector over a year range, one series per subcategory.".into(),
        parameters: vec![
            ParamSpec::required("pollutant", species_enum(), "Pollutant species"),
            ParamSpec::required("sector", ParamType::String, "Source sector, e.g. mobile"),
            ParamSpec::required("from_year", ParamType::Integer, "First year, inclusive"),
            ParamSpec::required("to_year", ParamType::Integer, "Last year, inclusive"),
            ParamSpec::optional("group_by", group_enum(&[GroupKey::Subsector, GroupKey::Sector]), "Series key (default subsector)"),
            ParamSpec::optional("chart", ParamType::enumeration(["stacked_bar", "line"]), "Chart kind (default stacked_bar)"),
            ParamSpec::optional("region", ParamType::String, "Restrict to one region"),
        ],
    }
}

pub fn cross_pollutant_contribution_spec() -> FunctionSpec {
    FunctionSpec {
        name: CROSS_POLLUTANT_CONTRIBUTION.into(),
        description: "Percentage contribution of each source category to several pollutants in one year.".into(),
        parameters: vec![
            ParamSpec::required("pollutants", ParamType::array_of(species_enum()), "Pollutants to compare"),
            ParamSpec::required("year", ParamType::Integer, "Inventory year"),
            ParamSpec::optional("group_by", group_enum(&[GroupKey::Sector, GroupKey::Subsector]), "Source key (default sector)"),
            ParamSpec::optional("region", ParamType::String, "Restrict to one region"),
        ],
    }
}

pub fn sub_source_breakdown_spec() -> FunctionSpec {
    FunctionSpec {
        name: SUB_SOURCE_BREAKDOWN.into(),
        description: "Percentage contribution of each sub-source within one sector, per pollutant, in one year.".into(),
        parameters: vec![
            ParamSpec::required("sector", ParamType::String, "Source sector, e.g. mobile"),
            ParamSpec::required("year", ParamType::Integer, "Inventory year"),
            ParamSpec::optional("group_by", group_enum(&[GroupKey::Subsector]), "Sub-source key (default subsector)"),
            ParamSpec::optional("per", group_enum(&[GroupKey::Pollutant]), "Category axis (default pollutant)"),
            ParamSpec::optional("region", ParamType::String, "Restrict to one region"),
        ],
    }
}

/// Schema of the direct inventory query body.
pub fn inventory_query_spec() -> FunctionSpec {
    FunctionSpec {
        name: "inventory_query".into(),
        description: "Filter, group and aggregate inventory rows.".into(),
        parameters: vec![
            ParamSpec::optional("region", ParamType::String, "Region equality filter"),
            ParamSpec::optional("year", ParamType::Integer, "Year equality filter"),
            ParamSpec::optional("sector", ParamType::String, "Sector equality filter"),
            ParamSpec::optional("subsector", ParamType::String, "Subsector equality filter"),
            ParamSpec::optional("pollutant", species_enum(), "Pollutant equality filter"),
            ParamSpec::optional("year_range", ParamType::array_of(ParamType::Integer), "Inclusive [from, to]"),
            ParamSpec::required("group_key", group_enum(&GroupKey::ALL), "Grouping key"),
            ParamSpec::optional("chart", ParamType::enumeration(["pie", "stacked_bar", "line"]), "Chart to render"),
        ],
    }
}

/// Why an inventory query body was rejected.
#[derive(Debug)]
pub enum QueryRejection {
    Violations(Vec<Violation>),
    Inventory(InventoryError),
}

/// Validates a raw JSON body against [`inventory_query_spec`] and decodes it.
pub fn parse_inventory_query(body: &Value) -> Result<InventoryQuery, QueryRejection> {
    let Some(args) = body.as_object() else {
        return Err(QueryRejection::Violations(vec![Violation::new(
            ViolationKind::MalformedJson,
            "",
            "body must be a JSON object",
        )]));
    };
    let violations = validate_arguments(args, &inventory_query_spec());
    if !violations.is_empty() {
        return Err(QueryRejection::Violations(violations));
    }
    if let Some(range) = args.get("year_range").and_then(Value::as_array) {
        if range.len() != 2 {
            return Err(QueryRejection::Violations(vec![Violation::new(
                ViolationKind::TypeMismatch,
                "year_range",
                format!("expected [from, to], got {} values", range.len()),
            )]));
        }
    }
    let query: InventoryQuery = serde_json::from_value(body.clone()).map_err(|e| {
        QueryRejection::Violations(vec![Violation::new(ViolationKind::TypeMismatch, "", e.to_string())])
    })?;
    query.filters.validate().map_err(QueryRejection::Inventory)?;
    Ok(query)
}

fn exec_err(e: InventoryError) -> ExecutionError {
    ExecutionError::new(e.to_string())
}

fn required_str<'a>(call: &'a FunctionCall, name: &str) -> &'a str {
    call.str_arg(name).expect("validated required string")
}

fn required_year(call: &FunctionCall, name: &str) -> Result<i32, ExecutionError> {
    let raw = call.int_arg(name).expect("validated required integer");
    i32::try_from(raw).map_err(|_| ExecutionError::new(format!("`{name}` out of range: {raw}")))
}

fn species_arg(value: &str) -> Species {
    Species::parse(value).expect("validated species enum")
}

fn group_arg(call: &FunctionCall, name: &str, default: GroupKey) -> GroupKey {
    call.str_arg(name).map_or(default, |s| s.parse().expect("validated group enum"))
}

fn region_filter(call: &FunctionCall) -> Option<String> {
    call.str_arg("region").map(str::to_string)
}

fn non_empty_tab(tab: CrossTab) -> Result<CrossTab, ExecutionError> {
    if tab.is_empty() {
        Err(ExecutionError::new("empty result: no inventory rows match the requested filters"))
    } else {
        Ok(tab)
    }
}

fn run_aggregate(store: &InventoryStore, call: &FunctionCall) -> Result<FunctionResult, ExecutionError> {
    let pollutant = species_arg(required_str(call, "pollutant"));
    let year = required_year(call, "year")?;
    let group_by = group_arg(call, "group_by", GroupKey::Sector);
    let filters = FilterSpec {
        pollutant: Some(pollutant),
        year: Some(year),
        region: region_filter(call),
        sector: call.str_arg("sector").map(str::to_string),
        ..Default::default()
    };
    let table = store.aggregate(&filters, group_by).map_err(exec_err)?;
    if table.rows.is_empty() {
        return Err(ExecutionError::new("empty result: no inventory rows match the requested filters"));
    }
    Ok(FunctionResult::Table {
        title: format!("{pollutant} emission contribution by {group_by} in {year}"),
        units: AMOUNT_UNITS.into(),
        table,
    })
}

fn run_trend(store: &InventoryStore, call: &FunctionCall) -> Result<FunctionResult, ExecutionError> {
    let pollutant = species_arg(required_str(call, "pollutant"));
    let sector = required_str(call, "sector").to_string();
    let from = required_year(call, "from_year")?;
    let to = required_year(call, "to_year")?;
    let series = group_arg(call, "group_by", GroupKey::Subsector);
    let kind = match call.str_arg("chart") {
        Some("line") => ChartKind::Line,
        _ => ChartKind::StackedBar,
    };
    let filters = FilterSpec {
        pollutant: Some(pollutant),
        sector: Some(sector.clone()),
        region: region_filter(call),
        ..Default::default()
    };
    let tab = non_empty_tab(store.trend(&filters, from, to, series).map_err(exec_err)?)?;
    let title = format!("Annual {pollutant} emissions from {sector} {series}s, {from}-{to}");
    let chart = make_chart(ChartSource::CrossTab(&tab), kind, &title, AMOUNT_UNITS).map_err(exec_err)?;
    Ok(FunctionResult::Chart { chart })
}

fn run_cross_pollutant(store: &InventoryStore, call: &FunctionCall) -> Result<FunctionResult, ExecutionError> {
    let mut pollutants: Vec<Species> = Vec::new();
    for value in call.arg("pollutants").and_then(Value::as_array).expect("validated array") {
        let species = species_arg(value.as_str().expect("validated species"));
        if !pollutants.contains(&species) {
            pollutants.push(species);
        }
    }
    if pollutants.is_empty() {
        return Err(ExecutionError::new("`pollutants` must name at least one species"));
    }
    let year = required_year(call, "year")?;
    let group_by = group_arg(call, "group_by", GroupKey::Sector);
    let filters = FilterSpec { year: Some(year), region: region_filter(call), ..Default::default() };
    let categories = pollutants.iter().map(|p| p.as_str().to_string()).collect();
    let mut tab = store
        .crosstab(&filters, GroupKey::Pollutant, group_by, Some(categories))
        .map_err(exec_err)?;
    // Drop series that only carry pollutants outside the requested set.
    tab.cells.retain(|_, row| row.keys().any(|c| tab.categories.contains(c)));
    let tab = non_empty_tab(tab)?.to_percent_shares();
    let title = format!("Cross-pollutant emission contributions by {group_by}, {year}");
    let chart = make_chart(ChartSource::CrossTab(&tab), ChartKind::StackedBar, &title, "%").map_err(exec_err)?;
    Ok(FunctionResult::Chart { chart })
}

fn run_sub_source(store: &InventoryStore, call: &FunctionCall) -> Result<FunctionResult, ExecutionError> {
    let sector = required_str(call, "sector").to_string();
    let year = required_year(call, "year")?;
    let group_by = group_arg(call, "group_by", GroupKey::Subsector);
    let per = group_arg(call, "per", GroupKey::Pollutant);
    let filters = FilterSpec {
        sector: Some(sector.clone()),
        year: Some(year),
        region: region_filter(call),
        ..Default::default()
    };
    let tab = non_empty_tab(store.crosstab(&filters, per, group_by, None).map_err(exec_err)?)?.to_percent_shares();
    let title = format!("{sector} sub-source contributions by {per}, {year}");
    let chart = make_chart(ChartSource::CrossTab(&tab), ChartKind::StackedBar, &title, "%").map_err(exec_err)?;
    Ok(FunctionResult::Chart { chart })
}

/// Registry holding the four analysis tools, bound to inventory handlers.
pub fn analysis_registry() -> FunctionRegistry<InventoryStore> {
    let mut registry = FunctionRegistry::new();
    registry.register_bound(aggregate_emissions_spec(), run_aggregate).expect("static spec");
    registry.register_bound(emission_trend_spec(), run_trend).expect("static spec");
    registry
        .register_bound(cross_pollutant_contribution_spec(), run_cross_pollutant)
        .expect("static spec");
    registry.register_bound(sub_source_breakdown_spec(), run_sub_source).expect("static spec");
    registry
}

/// Builds a raw call string, as a model would emit it.
pub fn call_json(name: &str, arguments: Map<String, Value>) -> String {
    serde_json::json!({ "name": name, "arguments": arguments }).to_string()
}
