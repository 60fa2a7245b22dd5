use std::collections::BTreeMap;
use std::str::FromStr;

use super::experiment::EvalReport;
use super::method::Method;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown table format {other:?}"
            ))),
        }
    }
}

/// A rendered grid of text cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn parse(text: &str, format: TableFormat) -> Result<Table> {
        match format {
            TableFormat::Csv => Table::parse_csv(text),
            TableFormat::Markdown => Table::parse_markdown(text),
        }
    }

    fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    fn parse_csv(text: &str) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = rdr.records();
        let header: Vec<String> = match records.next() {
            Some(r) => r
                .map_err(|e| Error::MalformedTable(e.to_string()))?
                .iter()
                .map(String::from)
                .collect(),
            None => return Err(Error::MalformedTable("missing header".into())),
        };
        let mut rows = Vec::new();
        for r in records {
            let r = r.map_err(|e| Error::MalformedTable(e.to_string()))?;
            rows.push(r.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    fn to_markdown(&self) -> String {
        let line = |cells: &[String]| {
            let escaped: Vec<String> = cells
                .iter()
                .map(|c| c.replace('\\', "\\\\").replace('|', "\\|"))
                .collect();
            format!("| {} |\n", escaped.join(" | "))
        };
        let mut out = line(&self.header);
        out.push('|');
        for _ in &self.header {
            out.push_str(" --- |");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    fn parse_markdown(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = match lines.next() {
            Some(l) => split_markdown_row(l)?,
            None => return Err(Error::MalformedTable("missing header".into())),
        };
        let sep = lines
            .next()
            .ok_or_else(|| Error::MalformedTable("missing separator row".into()))?;
        let sep_cells = split_markdown_row(sep)?;
        if sep_cells.len() != header.len()
            || !sep_cells
                .iter()
                .all(|c| !c.is_empty() && c.chars().all(|ch| ch == '-' || ch == ':'))
        {
            return Err(Error::MalformedTable("bad separator row".into()));
        }
        let mut rows = Vec::new();
        for l in lines {
            let cells = split_markdown_row(l)?;
            if cells.len() != header.len() {
                return Err(Error::MalformedTable(format!(
                    "row has {} cells, header has {}",
                    cells.len(),
                    header.len()
                )));
            }
            rows.push(cells);
        }
        Ok(Table { header, rows })
    }
}

fn split_markdown_row(line: &str) -> Result<Vec<String>> {
    let l = line.trim();
    let inner = l
        .strip_prefix('|')
        .and_then(|s| s.strip_suffix('|'))
        .ok_or_else(|| Error::MalformedTable(format!("row not delimited by '|': {l:?}")))?;
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(n @ ('|' | '\\')) => cur.push(n),
                Some(n) => {
                    cur.push('\\');
                    cur.push(n);
                }
                None => return Err(Error::MalformedTable("dangling escape".into())),
            },
            '|' => cells.push(std::mem::take(&mut cur)),
            other => cur.push(other),
        }
    }
    cells.push(cur);
    Ok(cells.into_iter().map(|c| c.trim().to_string()).collect())
}

/// Two-decimal rendering with negative zero folded to zero.
fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn ordered_stations<'a>(
    ids: impl Iterator<Item = &'a str>,
    order: Option<&[String]>,
) -> Vec<String> {
    let mut all: Vec<String> = ids.map(String::from).collect();
    all.sort();
    all.dedup();
    match order {
        Some(order) => {
            let mut out: Vec<String> = order.iter().filter(|s| all.contains(s)).cloned().collect();
            out.extend(all.into_iter().filter(|s| !order.contains(s)));
            out
        }
        None => all,
    }
}

/// One method's reports as the four-row RMSE table with one column per station.
pub fn render_reports(reports: &[EvalReport], order: Option<&[String]>) -> Table {
    let stations = ordered_stations(reports.iter().map(|r| r.station_id.as_str()), order);
    let by_station: BTreeMap<&str, &EvalReport> =
        reports.iter().map(|r| (r.station_id.as_str(), r)).collect();
    let mut header = vec!["Stations".to_string()];
    header.extend(stations.iter().cloned());
    let metric_row = |label: &str, f: fn(&EvalReport) -> f64| {
        let mut row = vec![label.to_string()];
        row.extend(stations.iter().map(|s| fmt2(f(by_station[s.as_str()]))));
        row
    };
    Table {
        header,
        rows: vec![
            metric_row("Avg. Train RMSE", |r| r.avg_train_rmse),
            metric_row("Best Train RMSE", |r| r.best_train_rmse),
            metric_row("Avg. Test RMSE", |r| r.avg_test_rmse),
            metric_row("Best Test RMSE", |r| r.best_test_rmse),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub station_id: String,
    pub empirical_rmse: f64,
    /// `(method, empirical_rmse - method avg test RMSE)`; positive means the method wins.
    pub diffs: Vec<(Method, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub methods: Vec<Method>,
    pub rows: Vec<ComparisonRow>,
}

/// Differences of average test RMSE against the empirical baseline for one station.
pub fn compare_methods(empirical: &EvalReport, others: &[EvalReport]) -> Result<ComparisonTable> {
    let mut diffs = Vec::with_capacity(others.len());
    for r in others {
        if r.station_id != empirical.station_id {
            return Err(Error::StationMismatch {
                expected: empirical.station_id.clone(),
                found: r.station_id.clone(),
            });
        }
        diffs.push((r.method, empirical.avg_test_rmse - r.avg_test_rmse));
    }
    Ok(ComparisonTable {
        methods: others.iter().map(|r| r.method).collect(),
        rows: vec![ComparisonRow {
            station_id: empirical.station_id.clone(),
            empirical_rmse: empirical.avg_test_rmse,
            diffs,
        }],
    })
}

impl ComparisonTable {
    /// Multi-station comparison: one row per empirical report, method columns in
    /// first-seen order. Every method must have a report for every station.
    pub fn from_reports(
        empirical: &[EvalReport],
        others: &[EvalReport],
    ) -> Result<ComparisonTable> {
        let mut methods: Vec<Method> = Vec::new();
        for r in others {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let mut rows = Vec::with_capacity(empirical.len());
        for e in empirical {
            let mut station_reports = Vec::with_capacity(methods.len());
            for &m in &methods {
                let r = others
                    .iter()
                    .find(|r| r.method == m && r.station_id == e.station_id)
                    .ok_or_else(|| Error::StationMismatch {
                        expected: e.station_id.clone(),
                        found: format!("no {m} report"),
                    })?;
                station_reports.push(r.clone());
            }
            rows.extend(compare_methods(e, &station_reports)?.rows);
        }
        for r in others {
            if !empirical.iter().any(|e| e.station_id == r.station_id) {
                return Err(Error::StationMismatch {
                    expected: "an empirical report".into(),
                    found: r.station_id.clone(),
                });
            }
        }
        Ok(ComparisonTable { methods, rows })
    }
}

/// `Station, Empirical, <method>...`; header only when there is nothing to compare.
pub fn render_comparison(table: &ComparisonTable, order: Option<&[String]>) -> Table {
    let mut header = vec!["Station".to_string(), Method::Empirical.label().to_string()];
    header.extend(table.methods.iter().map(|m| m.label().to_string()));
    if table.methods.is_empty() {
        return Table {
            header,
            rows: vec![],
        };
    }
    let stations = ordered_stations(table.rows.iter().map(|r| r.station_id.as_str()), order);
    let rows = stations
        .iter()
        .filter_map(|s| table.rows.iter().find(|r| &r.station_id == s))
        .map(|r| {
            let mut row = vec![r.station_id.clone(), fmt2(r.empirical_rmse)];
            for m in &table.methods {
                let d = r.diffs.iter().find(|(dm, _)| dm == m).map(|(_, d)| *d);
                row.push(d.map(fmt2).unwrap_or_default());
            }
            row
        })
        .collect();
    Table { header, rows }
}
