//! Emission-inventory store with constrained filter/group/aggregate queries
//! and renderer-agnostic chart payloads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Species;

/// Exact CSV header expected by [`load_inventory`].
pub const CSV_HEADER: [&str; 6] = ["region", "year", "sector", "subsector", "pollutant", "amount_tonnes"];

pub const AMOUNT_UNITS: &str = "t/yr";

const MIN_YEAR: i32 = 1900;
const MAX_YEAR: i32 = 2100;

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("`year` and `year_range` cannot be combined")]
    ConflictingFilters,
    #[error("invalid year range {0}..={1}")]
    InvalidRange(i32, i32),
    #[error("{0}")]
    KindMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryRecord {
    pub region: String,
    pub year: i32,
    pub sector: String,
    pub subsector: String,
    pub pollutant: Species,
    pub amount: f64,
}

impl InventoryRecord {
    pub fn new(
        region: impl Into<String>,
        year: i32,
        sector: impl Into<String>,
        subsector: impl Into<String>,
        pollutant: Species,
        amount: f64,
    ) -> Result<Self, String> {
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(format!("year {year} outside {MIN_YEAR}..={MAX_YEAR}"));
        }
        if !amount.is_finite() || amount < 0.0 {
            return Err(format!("amount {amount} must be a non-negative number"));
        }
        Ok(Self { region: region.into(), year, sector: sector.into(), subsector: subsector.into(), pollutant, amount })
    }

    fn key(&self, group: GroupKey) -> String {
        match group {
            GroupKey::Sector => self.sector.clone(),
            GroupKey::Subsector => self.subsector.clone(),
            GroupKey::Pollutant => self.pollutant.as_str().to_string(),
            GroupKey::Year => self.year.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Sector,
    Subsector,
    Pollutant,
    Year,
}

impl GroupKey {
    pub const ALL: [GroupKey; 4] = [GroupKey::Sector, GroupKey::Subsector, GroupKey::Pollutant, GroupKey::Year];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Sector => "sector",
            GroupKey::Subsector => "subsector",
            GroupKey::Pollutant => "pollutant",
            GroupKey::Year => "year",
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown group key `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pollutant: Option<Species>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year_range: Option<(i32, i32)>,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), InventoryError> {
        if self.year.is_some() && self.year_range.is_some() {
            return Err(InventoryError::ConflictingFilters);
        }
        if let Some((from, to)) = self.year_range {
            if from > to {
                return Err(InventoryError::InvalidRange(from, to));
            }
        }
        Ok(())
    }

    pub fn matches(&self, r: &InventoryRecord) -> bool {
        self.region.as_ref().is_none_or(|v| *v == r.region)
            && self.year.is_none_or(|y| y == r.year)
            && self.sector.as_ref().is_none_or(|v| *v == r.sector)
            && self.subsector.as_ref().is_none_or(|v| *v == r.subsector)
            && self.pollutant.is_none_or(|p| p == r.pollutant)
            && self.year_range.is_none_or(|(from, to)| (from..=to).contains(&r.year))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: String,
    pub total: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub group_key: GroupKey,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn grand_total(&self) -> f64 {
        self.rows.iter().map(|r| r.total).sum()
    }
}

/// Amounts broken down along two keys: `categories` (e.g. years) and series
/// (e.g. subsectors). Missing cells read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub category_key: GroupKey,
    pub series_key: GroupKey,
    pub categories: Vec<String>,
    pub cells: BTreeMap<String, BTreeMap<String, f64>>,
}

impl CrossTab {
    pub fn value(&self, series: &str, category: &str) -> f64 {
        self.cells.get(series).and_then(|row| row.get(category)).copied().unwrap_or(0.0)
    }

    pub fn series_names(&self) -> impl Iterator<Item = &String> {
        self.cells.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Rescales each category column to percentages of its column total.
    pub fn to_percent_shares(&self) -> CrossTab {
        let mut out = self.clone();
        for category in &self.categories {
            let total: f64 = self.cells.values().map(|row| row.get(category).copied().unwrap_or(0.0)).sum();
            for row in out.cells.values_mut() {
                if let Some(v) = row.get_mut(category) {
                    *v = if total > 0.0 { *v / total * 100.0 } else { 0.0 };
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Pie,
    StackedBar,
    Line,
}

impl std::str::FromStr for ChartKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pie" => Ok(ChartKind::Pie),
            "stacked_bar" => Ok(ChartKind::StackedBar),
            "line" => Ok(ChartKind::Line),
            other => Err(format!("unknown chart kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub kind: ChartKind,
    pub title: String,
    pub categories: Vec<String>,
    pub series: Vec<ChartSeries>,
    pub units: String,
}

impl ChartData {
    pub fn check_invariants(&self) -> Result<(), String> {
        for s in &self.series {
            if s.values.len() != self.categories.len() {
                return Err(format!(
                    "series `{}` has {} values for {} categories",
                    s.name,
                    s.values.len(),
                    self.categories.len()
                ));
            }
        }
        if self.kind == ChartKind::Pie {
            if self.series.len() != 1 {
                return Err(format!("pie chart needs exactly one series, got {}", self.series.len()));
            }
            if self.series[0].values.iter().any(|v| *v < 0.0) {
                return Err("pie chart values must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Input accepted by [`make_chart`].
#[derive(Debug, Clone, Copy)]
pub enum ChartSource<'a> {
    Table(&'a AggregateTable),
    CrossTab(&'a CrossTab),
}

/// Builds a chart: pies from aggregate tables, stacked bars and lines from
/// cross tabulations. Lines additionally need years on the category axis.
pub fn make_chart(source: ChartSource<'_>, kind: ChartKind, title: &str, units: &str) -> Result<ChartData, InventoryError> {
    let chart = match (source, kind) {
        (ChartSource::Table(table), ChartKind::Pie) => ChartData {
            kind,
            title: title.into(),
            categories: table.rows.iter().map(|r| r.key.clone()).collect(),
            series: vec![ChartSeries { name: title.into(), values: table.rows.iter().map(|r| r.total).collect() }],
            units: units.into(),
        },
        (ChartSource::CrossTab(tab), ChartKind::StackedBar | ChartKind::Line) => {
            if kind == ChartKind::Line && tab.category_key != GroupKey::Year {
                return Err(InventoryError::KindMismatch("line charts need a year axis".into()));
            }
            ChartData {
                kind,
                title: title.into(),
                categories: tab.categories.clone(),
                series: tab
                    .series_names()
                    .map(|name| ChartSeries {
                        name: name.clone(),
                        values: tab.categories.iter().map(|c| tab.value(name, c)).collect(),
                    })
                    .collect(),
                units: units.into(),
            }
        }
        (ChartSource::Table(_), _) => {
            return Err(InventoryError::KindMismatch(format!("{kind:?} charts need a cross tabulation, not a table")))
        }
        (ChartSource::CrossTab(_), _) => {
            return Err(InventoryError::KindMismatch("pie charts need an aggregate table".into()))
        }
    };
    debug_assert!(chart.check_invariants().is_ok());
    Ok(chart)
}

/// In-memory, immutable inventory.
#[derive(Debug, Clone, Default)]
pub struct InventoryStore {
    records: Vec<InventoryRecord>,
}

impl InventoryStore {
    pub fn new(records: Vec<InventoryRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[InventoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows matching every present filter, in load order.
    pub fn query_records(&self, filters: &FilterSpec) -> Result<Vec<&InventoryRecord>, InventoryError> {
        filters.validate()?;
        Ok(self.records.iter().filter(|r| filters.matches(r)).collect())
    }

    /// Totals per group over the filtered rows, sorted by total descending
    /// then key ascending.
    pub fn aggregate(&self, filters: &FilterSpec, group_key: GroupKey) -> Result<AggregateTable, InventoryError> {
        let mut totals: BTreeMap<String, f64> = BTreeMap::new();
        for r in self.query_records(filters)? {
            *totals.entry(r.key(group_key)).or_insert(0.0) += r.amount;
        }
        let grand: f64 = totals.values().sum();
        let mut rows: Vec<AggregateRow> = totals
            .into_iter()
            .map(|(key, total)| AggregateRow { share: if grand > 0.0 { total / grand } else { 0.0 }, key, total })
            .collect();
        rows.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.key.cmp(&b.key)));
        Ok(AggregateTable { group_key, rows })
    }

    /// Cross-tabulates the filtered rows. When `categories` is `None` the
    /// observed category values are used, sorted ascending.
    pub fn crosstab(
        &self,
        filters: &FilterSpec,
        category_key: GroupKey,
        series_key: GroupKey,
        categories: Option<Vec<String>>,
    ) -> Result<CrossTab, InventoryError> {
        let rows = self.query_records(filters)?;
        let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut observed = BTreeSet::new();
        for r in rows {
            let category = r.key(category_key);
            observed.insert(category.clone());
            *cells.entry(r.key(series_key)).or_default().entry(category).or_insert(0.0) += r.amount;
        }
        let categories = categories.unwrap_or_else(|| observed.into_iter().collect());
        Ok(CrossTab { category_key, series_key, categories, cells })
    }

    /// Year-indexed cross tab over `from..=to`, one series per `series_key` value.
    pub fn trend(&self, filters: &FilterSpec, from: i32, to: i32, series_key: GroupKey) -> Result<CrossTab, InventoryError> {
        if from > to {
            return Err(InventoryError::InvalidRange(from, to));
        }
        if filters.year.is_some() {
            return Err(InventoryError::ConflictingFilters);
        }
        let filters = FilterSpec { year_range: Some((from, to)), ..filters.clone() };
        let years = (from..=to).map(|y| y.to_string()).collect();
        self.crosstab(&filters, GroupKey::Year, series_key, Some(years))
    }
}

/// Loads a CSV inventory. Fails on the first bad row, reporting its line.
pub fn load_inventory(path: &Path) -> Result<InventoryStore, InventoryError> {
    let file = std::fs::File::open(path)?;
    read_inventory(file)
}

pub fn read_inventory(reader: impl Read) -> Result<InventoryStore, InventoryError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| InventoryError::Schema { line: 1, message: e.to_string() })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(InventoryError::Schema {
            line: 1,
            message: format!("header must be `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| InventoryError::Schema {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| InventoryError::Schema { line, message };
        let year: i32 = row[1].parse().map_err(|_| bad(format!("bad year `{}`", &row[1])))?;
        let pollutant = Species::parse(&row[4]).ok_or_else(|| bad(format!("unknown pollutant `{}`", &row[4])))?;
        let amount: f64 = row[5].parse().map_err(|_| bad(format!("bad amount `{}`", &row[5])))?;
        records.push(InventoryRecord::new(&row[0], year, &row[2], &row[3], pollutant, amount).map_err(bad)?);
    }
    Ok(InventoryStore::new(records))
}

/// Body of a direct inventory query: filters, a grouping key and an optional chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryQuery {
    #[serde(flatten)]
    pub filters: FilterSpec,
    pub group_key: GroupKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryOutput {
    Table(AggregateTable),
    Chart(ChartData),
}

impl InventoryQuery {
    pub fn title(&self) -> String {
        let mut parts = Vec::new();
        if let Some(p) = self.filters.pollutant {
            parts.push(format!("{p} emissions"));
        } else {
            parts.push("Emissions".into());
        }
        parts.push(format!("by {}", self.group_key));
        if let Some(sector) = &self.filters.sector {
            parts.push(format!("in {sector}"));
        }
        if let Some(region) = &self.filters.region {
            parts.push(format!("({region})"));
        }
        if let Some(y) = self.filters.year {
            parts.push(y.to_string());
        } else if let Some((a, b)) = self.filters.year_range {
            parts.push(format!("{a}-{b}"));
        }
        parts.join(" ")
    }

    /// Runs the query: a table when no chart is requested, a pie over the
    /// table, or a per-year cross tab for stacked bars and lines.
    pub fn run(&self, store: &InventoryStore) -> Result<QueryOutput, InventoryError> {
        match self.chart {
            None => Ok(QueryOutput::Table(store.aggregate(&self.filters, self.group_key)?)),
            Some(ChartKind::Pie) => {
                let table = store.aggregate(&self.filters, self.group_key)?;
                Ok(QueryOutput::Chart(make_chart(ChartSource::Table(&table), ChartKind::Pie, &self.title(), AMOUNT_UNITS)?))
            }
            Some(kind) => {
                self.filters.validate()?;
                let tab = store.crosstab(&self.filters, GroupKey::Year, self.group_key, None)?;
                Ok(QueryOutput::Chart(make_chart(ChartSource::CrossTab(&tab), kind, &self.title(), AMOUNT_UNITS)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sector: &str, sub: &str, p: Species, year: i32, amount: f64) -> InventoryRecord {
        InventoryRecord::new("GD", year, sector, sub, p, amount).unwrap()
    }

    fn two_row_store() -> InventoryStore {
        InventoryStore::new(vec![
            rec("mobile", "road", Species::Nox, 2020, 100.0),
            rec("industry", "steel", Species::Nox, 2020, 50.0),
        ])
    }

    #[test]
    fn load_valid_fixture() {
        let csv = "region,year,sector,subsector,pollutant,amount_tonnes\n\
                   GD,2020,mobile,road_light_duty,NOx,100\n\
                   GD,2020,mobile,road_heavy_duty,NOx,250.5\n\
                   GD,2020,industry,steel,SO2,80\n\
                   GD,2019,industry,cement,PM2.5,12\n\
                   GD,2020,residential,biomass,CO,300\n\
                   GD,2020,agriculture,livestock,NH3,45\n";
        let store = read_inventory(csv.as_bytes()).unwrap();
        assert_eq!(store.len(), 6);
        assert_eq!(store.records()[3].pollutant, Species::Pm25);
    }

    #[test]
    fn bad_rows_report_line() {
        let negative = "region,year,sector,subsector,pollutant,amount_tonnes\nGD,2020,a,b,NOx,1\nGD,2020,a,b,NOx,-5\n";
        assert!(matches!(read_inventory(negative.as_bytes()), Err(InventoryError::Schema { line: 3, .. })));
        let species = "region,year,sector,subsector,pollutant,amount_tonnes\nGD,2020,a,b,XYZ,1\n";
        assert!(matches!(read_inventory(species.as_bytes()), Err(InventoryError::Schema { line: 2, .. })));
        let header = "region,year,sector,subsector,pollutant,amount\nGD,2020,a,b,NOx,1\n";
        assert!(matches!(read_inventory(header.as_bytes()), Err(InventoryError::Schema { line: 1, .. })));
        let year = "region,year,sector,subsector,pollutant,amount_tonnes\nGD,1800,a,b,NOx,1\n";
        assert!(matches!(read_inventory(year.as_bytes()), Err(InventoryError::Schema { line: 2, .. })));
    }

    #[test]
    fn query_filters() {
        let store = InventoryStore::new(vec![
            rec("mobile", "road", Species::Nox, 2020, 1.0),
            rec("mobile", "road", Species::Co, 2020, 2.0),
            rec("industry", "steel", Species::Nox, 2019, 3.0),
            rec("industry", "steel", Species::So2, 2020, 4.0),
            rec("power", "coal", Species::Nox, 2018, 5.0),
        ]);
        assert_eq!(store.query_records(&FilterSpec::default()).unwrap().len(), 5);
        let nox = store.query_records(&FilterSpec { pollutant: Some(Species::Nox), ..Default::default() }).unwrap();
        assert_eq!(nox.iter().map(|r| r.amount).collect::<Vec<_>>(), [1.0, 3.0, 5.0]);
        let conflict = FilterSpec { year: Some(2020), year_range: Some((2018, 2020)), ..Default::default() };
        assert!(matches!(store.query_records(&conflict), Err(InventoryError::ConflictingFilters)));
    }

    #[test]
    fn aggregate_by_sector() {
        let filters = FilterSpec { pollutant: Some(Species::Nox), year: Some(2020), ..Default::default() };
        let table = two_row_store().aggregate(&filters, GroupKey::Sector).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!((table.rows[0].key.as_str(), table.rows[0].total), ("mobile", 100.0));
        assert!((table.rows[0].share - 100.0 / 150.0).abs() < 1e-12);
        assert_eq!((table.rows[1].key.as_str(), table.rows[1].total), ("industry", 50.0));
        assert!((table.rows[1].share - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_single_and_empty() {
        let store = InventoryStore::new(vec![rec("mobile", "road", Species::Co, 2020, 7.0)]);
        let t = store.aggregate(&FilterSpec::default(), GroupKey::Pollutant).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].share, 1.0);
        let none = store.aggregate(&FilterSpec { year: Some(1999), ..Default::default() }, GroupKey::Sector).unwrap();
        assert!(none.rows.is_empty());
        assert_eq!(none.grand_total(), 0.0);
    }

    #[test]
    fn zero_amount_groups_have_zero_share() {
        let store = InventoryStore::new(vec![rec("a", "x", Species::Co, 2020, 0.0)]);
        let t = store.aggregate(&FilterSpec::default(), GroupKey::Sector).unwrap();
        assert_eq!(t.rows[0].share, 0.0);
    }

    #[test]
    fn pie_from_table() {
        let table = two_row_store().aggregate(&FilterSpec::default(), GroupKey::Sector).unwrap();
        let chart = make_chart(ChartSource::Table(&table), ChartKind::Pie, "NOx", "t/yr").unwrap();
        assert_eq!(chart.categories, ["mobile", "industry"]);
        assert_eq!(chart.series[0].values, [100.0, 50.0]);
        assert!(matches!(
            make_chart(ChartSource::Table(&table), ChartKind::Line, "x", "t"),
            Err(InventoryError::KindMismatch(_))
        ));
    }

    #[test]
    fn trend_fills_missing_cells_with_zero() {
        let store = InventoryStore::new(vec![
            rec("mobile", "light_duty", Species::Nox, 2018, 10.0),
            rec("mobile", "light_duty", Species::Nox, 2019, 11.0),
            rec("mobile", "light_duty", Species::Nox, 2020, 12.0),
            rec("mobile", "heavy_duty", Species::Nox, 2018, 20.0),
            rec("mobile", "heavy_duty", Species::Nox, 2020, 22.0),
        ]);
        let tab = store.trend(&FilterSpec::default(), 2018, 2020, GroupKey::Subsector).unwrap();
        let chart = make_chart(ChartSource::CrossTab(&tab), ChartKind::StackedBar, "NOx", "t/yr").unwrap();
        assert_eq!(chart.categories, ["2018", "2019", "2020"]);
        assert_eq!(chart.series[0].name, "heavy_duty");
        assert_eq!(chart.series[0].values, [20.0, 0.0, 22.0]);
        assert_eq!(chart.series[1].values, [10.0, 11.0, 12.0]);
        assert!(matches!(
            make_chart(ChartSource::CrossTab(&tab), ChartKind::Pie, "x", "t"),
            Err(InventoryError::KindMismatch(_))
        ));
    }

    #[test]
    fn percent_shares() {
        let store = InventoryStore::new(vec![
            rec("mobile", "a", Species::Nox, 2020, 30.0),
            rec("industry", "b", Species::Nox, 2020, 10.0),
            rec("industry", "b", Species::Co, 2020, 5.0),
        ]);
        let tab = store
            .crosstab(&FilterSpec::default(), GroupKey::Pollutant, GroupKey::Sector, None)
            .unwrap()
            .to_percent_shares();
        assert_eq!(tab.value("mobile", "NOx"), 75.0);
        assert_eq!(tab.value("industry", "CO"), 100.0);
        assert_eq!(tab.value("mobile", "CO"), 0.0);
    }

    #[test]
    fn query_body_runs_like_library() {
        let body: InventoryQuery = serde_json::from_str(r#"{"pollutant":"NOx","year":2020,"group_key":"sector"}"#).unwrap();
        let out = body.run(&two_row_store()).unwrap();
        let direct = two_row_store()
            .aggregate(&FilterSpec { pollutant: Some(Species::Nox), year: Some(2020), ..Default::default() }, GroupKey::Sector)
            .unwrap();
        assert_eq!(out, QueryOutput::Table(direct));
    }
}
