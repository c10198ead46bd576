//! Tables rendered from a stored [`ExperimentResult`].
//!
//! Rendering reads nothing but the result, so re-rendering a saved result
//! file reproduces the original tables byte for byte.

use std::fmt::Write as _;

use crate::metrics::{format_metric, mean_std, MeanStd, OperationalCounts};

use super::{CellStatus, ExperimentMode, ExperimentResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            "txt" | "text" => Ok(Self::Text),
            other => Err(format!("unknown report format `{other}` (csv, md, txt)")),
        }
    }
}

/// A metric cell: absent metrics print `-`, failed cells `failed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Metric(Option<f64>),
    Failed,
}

impl Value {
    fn render(self) -> String {
        match self {
            Value::Metric(v) => format_metric(v),
            Value::Failed => "failed".to_owned(),
        }
    }
}

/// One sub-column of the grid table: a predictor at one `(k, h)`, averaged
/// over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridColumn {
    pub predictor: String,
    pub k: usize,
    pub h: usize,
    pub min_dyn_ade: Value,
    pub min_dyn_fde: Value,
    pub counts: OperationalCounts,
}

pub fn grid_columns(result: &ExperimentResult) -> Vec<GridColumn> {
    let mut columns: Vec<GridColumn> = Vec::new();
    let mut values: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for cell in &result.cells {
        let (predictor, k, h) = (cell.key.predictor.as_str(), cell.key.k, cell.key.h);
        let i = match columns.iter().position(|c| c.predictor == predictor && c.k == k && c.h == h) {
            Some(i) => i,
            None => {
                columns.push(GridColumn {
                    predictor: predictor.to_owned(),
                    k,
                    h,
                    min_dyn_ade: Value::Metric(None),
                    min_dyn_fde: Value::Metric(None),
                    counts: OperationalCounts::default(),
                });
                values.push((Vec::new(), Vec::new()));
                columns.len() - 1
            }
        };
        let column = &mut columns[i];
        match (&cell.status, &cell.dataset) {
            (CellStatus::Ok, Some(d)) => {
                column.counts.add(&d.counts);
                values[i].0.extend(d.min_dyn_ade);
                values[i].1.extend(d.min_dyn_fde);
            }
            _ => {
                column.min_dyn_ade = Value::Failed;
                column.min_dyn_fde = Value::Failed;
            }
        }
    }
    for (column, (ades, fdes)) in columns.iter_mut().zip(values) {
        if column.min_dyn_ade != Value::Failed {
            column.min_dyn_ade = Value::Metric(mean_std(&ades).map(|m| m.mean));
            column.min_dyn_fde = Value::Metric(mean_std(&fdes).map(|m| m.mean));
        }
    }
    columns
}

/// Mean and spread of one predictor's metrics over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatabilityRow {
    pub predictor: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub min_dyn_ade: Option<MeanStd>,
    pub min_dyn_fde: Option<MeanStd>,
}

pub fn repeatability_rows(result: &ExperimentResult) -> Vec<RepeatabilityRow> {
    let mut order: Vec<&str> = Vec::new();
    for cell in &result.cells {
        if !order.contains(&cell.key.predictor.as_str()) {
            order.push(cell.key.predictor.as_str());
        }
    }
    order
        .into_iter()
        .map(|predictor| {
            let cells: Vec<_> = result
                .cells
                .iter()
                .filter(|c| c.key.predictor.as_str() == predictor)
                .collect();
            let ok: Vec<_> = cells.iter().filter_map(|c| c.dataset.as_ref()).collect();
            let ades: Vec<f64> = ok.iter().filter_map(|d| d.min_dyn_ade).collect();
            let fdes: Vec<f64> = ok.iter().filter_map(|d| d.min_dyn_fde).collect();
            RepeatabilityRow {
                predictor: predictor.to_owned(),
                runs: cells.len(),
                failed_runs: cells.len() - ok.len(),
                min_dyn_ade: mean_std(&ades),
                min_dyn_fde: mean_std(&fdes),
            }
        })
        .collect()
}

pub fn render(result: &ExperimentResult, format: ReportFormat) -> String {
    let table = match result.config.mode {
        ExperimentMode::Repeatability => repeatability_table(result),
        mode => grid_table(result, mode),
    };
    let mut out = match format {
        ReportFormat::Csv => table.csv(),
        ReportFormat::Markdown => table.markdown(),
        ReportFormat::Text => table.text(),
    };
    if format != ReportFormat::Csv {
        for cell in &result.cells {
            if let CellStatus::Failed { message } = &cell.status {
                let _ = writeln!(
                    out,
                    "\nfailed: {} k={} H={} rep={}: {}",
                    cell.key.predictor, cell.key.k, cell.key.h, cell.key.repetition, message
                );
            }
        }
    }
    out
}

struct Table {
    /// Header rows; the first may repeat a group name across columns.
    header: Vec<Vec<String>>,
    body: Vec<Vec<String>>,
    /// Rows after which the text layout draws a rule.
    rule_after: Vec<usize>,
}

fn grid_table(result: &ExperimentResult, mode: ExperimentMode) -> Table {
    let columns = grid_columns(result);
    let multi_h = mode == ExperimentMode::KSweep && result.config.h_values.len() > 1;
    let axis = match (mode, multi_h) {
        (ExperimentMode::HAblation, _) => "H",
        (_, true) => "k/H",
        _ => "k",
    };
    let label = |c: &GridColumn| match (mode, multi_h) {
        (ExperimentMode::HAblation, _) => c.h.to_string(),
        (_, true) => format!("{}/{}", c.k, c.h),
        _ => c.k.to_string(),
    };
    let mut groups = vec!["Model".to_owned()];
    let mut sub = vec![axis.to_owned()];
    for c in &columns {
        groups.push(c.predictor.clone());
        sub.push(label(c));
    }
    let row = |name: &str, f: &dyn Fn(&GridColumn) -> String| {
        std::iter::once(name.to_owned())
            .chain(columns.iter().map(f))
            .collect::<Vec<_>>()
    };
    let count = |f: fn(&OperationalCounts) -> u64| move |c: &GridColumn| f(&c.counts).to_string();
    Table {
        header: vec![groups, sub],
        body: vec![
            row("minDynADE (m)", &|c| c.min_dyn_ade.render()),
            row("minDynFDE (m)", &|c| c.min_dyn_fde.render()),
            row("matured", &count(|c| c.matured)),
            row("timeouts", &count(|c| c.timeouts)),
            row("request failures", &count(|c| c.request_failures)),
            row("expired", &count(|c| c.expired)),
            row("ineligible", &count(|c| c.ineligible)),
            row("shortfall", &count(|c| c.candidate_shortfall)),
        ],
        rule_after: vec![1],
    }
}

fn repeatability_table(result: &ExperimentResult) -> Table {
    let mean = |m: Option<MeanStd>| format_metric(m.map(|m| m.mean));
    let std = |m: Option<MeanStd>| format_metric(m.and_then(|m| m.std));
    let body = repeatability_rows(result)
        .into_iter()
        .map(|r| {
            vec![
                r.predictor,
                mean(r.min_dyn_ade),
                std(r.min_dyn_ade),
                mean(r.min_dyn_fde),
                std(r.min_dyn_fde),
                format!("{}/{}", r.runs - r.failed_runs, r.runs),
            ]
        })
        .collect();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
    Table {
        header: vec![
            s(&["Model", "minDynADE (m)", "minDynADE (m)", "minDynFDE (m)", "minDynFDE (m)", "runs"]),
            s(&["", "Mean", "Std", "Mean", "Std", "ok/total"]),
        ],
        body,
        rule_after: vec![],
    }
}

impl Table {
    fn rows(&self) -> impl Iterator<Item = &Vec<String>> {
        self.header.iter().chain(&self.body)
    }

    fn csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        for row in self.rows() {
            writer.write_record(row).expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 fields")
    }

    fn markdown(&self) -> String {
        let line = |row: &[String]| format!("| {} |\n", row.join(" | "));
        let mut out = String::new();
        let mut rows = self.rows();
        if let Some(first) = rows.next() {
            out.push_str(&line(first));
            let align: Vec<String> = (0..first.len())
                .map(|i| if i == 0 { ":--".into() } else { "--:".into() })
                .collect();
            out.push_str(&line(&align));
        }
        for row in rows {
            out.push_str(&line(row));
        }
        out
    }

    fn text(&self) -> String {
        let ncols = self.rows().map(Vec::len).max().unwrap_or(0);
        let mut widths = vec![0; ncols];
        for row in self.rows() {
            for (w, f) in widths.iter_mut().zip(row) {
                *w = (*w).max(f.chars().count());
            }
        }
        let render = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    if i == 0 {
                        format!("{f:<w$}", w = widths[i])
                    } else {
                        format!("{f:>w$}", w = widths[i])
                    }
                })
                .collect();
            format!("{}\n", cells.join("  ").trim_end())
        };
        let rule = format!("{}\n", "-".repeat(widths.iter().sum::<usize>() + 2 * ncols.saturating_sub(1)));
        let mut out = String::new();
        for row in &self.header {
            out.push_str(&render(row));
        }
        out.push_str(&rule);
        for (i, row) in self.body.iter().enumerate() {
            out.push_str(&render(row));
            if self.rule_after.contains(&i) {
                out.push_str(&rule);
            }
        }
        out
    }
}
