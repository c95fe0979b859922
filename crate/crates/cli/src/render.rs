//! Plain-text and CSV rendering of command results.

use std::io::Write;

use anyhow::Result;

use emagent_core::efrec::{Attribute, Recommendation};
use emagent_core::evalkit::{EvalReport, MetricScores, PairwiseReport, Stratum};
use emagent_core::inventory::{AggregateTable, ChartData, QueryOutput};
use emagent_core::toolchain::FunctionSpec;

pub fn attribute_flag(a: Attribute) -> &'static str {
    match a {
        Attribute::VehicleType => "vehicle",
        Attribute::FuelType => "fuel",
        Attribute::EmissionStandard => "standard",
        Attribute::Region => "region",
    }
}

/// Left-aligned text table with two spaces between columns.
fn table(header: &[String], rows: &[Vec<String>], out: &mut impl Write) -> Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(header))?;
    writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "))?;
    for row in rows {
        writeln!(out, "{}", line(row))?;
    }
    Ok(())
}

fn strings<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn tools(specs: &[&FunctionSpec], out: &mut impl Write) -> Result<()> {
    for spec in specs {
        writeln!(out, "{}\n    {}", spec.name, spec.description)?;
        for p in &spec.parameters {
            let req = if p.required { "required" } else { "optional" };
            writeln!(out, "    {} ({req}): {}", p.name, p.description.as_deref().unwrap_or(""))?;
        }
    }
    Ok(())
}

fn aggregate_text(t: &AggregateTable, out: &mut impl Write) -> Result<()> {
    let header = vec![t.group_key.to_string(), "tonnes".into(), "share".into()];
    let mut rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| vec![r.key.clone(), format!("{:.2}", r.total), format!("{:.1}%", r.share * 100.0)])
        .collect();
    rows.push(vec!["total".into(), format!("{:.2}", t.grand_total()), String::new()]);
    table(&header, &rows, out)
}

pub fn chart(c: &ChartData, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{} [{}]", c.title, c.units)?;
    let mut header = vec![String::new()];
    header.extend(c.categories.iter().cloned());
    let rows: Vec<Vec<String>> = c
        .series
        .iter()
        .map(|s| std::iter::once(s.name.clone()).chain(s.values.iter().map(|v| format!("{v:.2}"))).collect())
        .collect();
    table(&header, &rows, out)
}

pub fn output_text(o: &QueryOutput, out: &mut impl Write) -> Result<()> {
    match o {
        QueryOutput::Table(t) => aggregate_text(t, out),
        QueryOutput::Chart(c) => chart(c, out),
    }
}

pub fn output_csv(o: &QueryOutput, out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match o {
        QueryOutput::Table(t) => {
            w.write_record([t.group_key.to_string().as_str(), "amount_tonnes", "share"])?;
            for r in &t.rows {
                w.write_record([r.key.clone(), r.total.to_string(), r.share.to_string()])?;
            }
        }
        QueryOutput::Chart(c) => {
            w.write_record(std::iter::once("series").chain(c.categories.iter().map(String::as_str)))?;
            for s in &c.series {
                w.write_record(std::iter::once(s.name.clone()).chain(s.values.iter().map(f64::to_string)))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn recommendations(recs: &[Recommendation], out: &mut impl Write) -> Result<()> {
    let header = strings(["rank", "tier", "ef_id", "values", "score", "grades", "citation"]);
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            let values: Vec<String> = r
                .record
                .pollutant_values
                .iter()
                .map(|(p, v)| format!("{p}={} {}", v.value, v.units))
                .collect();
            vec![
                r.rank.to_string(),
                serde_json::to_value(r.tier).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                r.record.ef_id.clone(),
                values.join("; "),
                r.composite_score.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into()),
                r.grades.map(|g| g.to_string()).unwrap_or_else(|| "-".into()),
                r.record.citation.clone(),
            ]
        })
        .collect();
    table(&header, &rows, out)
}

fn stratum_row(s: &Stratum) -> Vec<String> {
    let mut row = vec![s.label.clone(), s.count.to_string()];
    row.extend(MetricScores::NAMES.iter().map(|name| s.stats(name).map(|st| format!("{:.3}", st.mean)).unwrap_or_default()));
    row
}

pub fn eval_report(r: &EvalReport, out: &mut impl Write) -> Result<()> {
    let mut header = strings(["stratum", "n"]);
    header.extend(MetricScores::NAMES.iter().map(|n| n.to_string()));
    let rows: Vec<Vec<String>> = std::iter::once(&r.overall)
        .chain(&r.by_category)
        .chain(&r.by_difficulty)
        .map(stratum_row)
        .collect();
    table(&header, &rows, out)
}

pub fn pairwise(r: &PairwiseReport, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{} vs {} over {} common questions", r.model_a, r.model_b, r.common_questions)?;
    let n = r.common_questions.max(1) as f64;
    let header = vec![
        "dimension".to_string(),
        format!("{} wins", r.model_a),
        "ties".into(),
        format!("{} wins", r.model_b),
        format!("mean {}", r.model_a),
        format!("mean {}", r.model_b),
    ];
    let rows: Vec<Vec<String>> = r
        .dimensions
        .iter()
        .map(|d| {
            let pct = |k: usize| format!("{k} ({:.0}%)", k as f64 / n * 100.0);
            vec![
                serde_json::to_value(d.dimension).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                pct(d.wins_a),
                pct(d.ties),
                pct(d.wins_b),
                format!("{:.2}", d.mean_a),
                format!("{:.2}", d.mean_b),
            ]
        })
        .collect();
    table(&header, &rows, out)
}
