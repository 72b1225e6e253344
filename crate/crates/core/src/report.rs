//! Analysis report and its renderings.
//!
//! Sections are optional; a section that was not computed renders as its
//! header plus a "not run" marker. Rendering is a pure function of the
//! report, so the same report always yields the same bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::heuristics::HeuristicKind;

pub const NOT_RUN: &str = "not run";
const MISSING: &str = "n/a";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Delimited,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Delimited => "tsv",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "delimited" | "tsv" => Ok(Format::Delimited),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metadata {
    pub tool_version: String,
    pub seed: u64,
    /// Serialized run configuration.
    pub config: String,
    pub notes: Vec<String>,
    /// (name, checksum) pairs, e.g. one per partition manifest.
    pub checksums: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub model: String,
    pub dev: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionSection {
    pub model: String,
    pub eval: String,
    pub classes: Vec<Label>,
    /// Rows are gold labels, columns predictions.
    pub matrix: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmiRow {
    pub token: String,
    pub pmi: f64,
    /// Fraction of the class's hypotheses containing the token.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmiSection {
    pub merged: bool,
    pub smoothing: f64,
    pub min_count: u64,
    pub top_k: usize,
    /// One ranked list per class, in [`Label::ALL`] order.
    pub columns: Vec<(Label, Vec<PmiRow>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthRow {
    pub mode: String,
    /// (mean, median) per class in [`Label::ALL`] order.
    pub per_class: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleRef {
    pub id: String,
    pub premise: Option<String>,
    pub hypothesis: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicRow {
    pub kind: HeuristicKind,
    pub satisfying: usize,
    pub per_class: [u64; 3],
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
    pub top_class: Option<Label>,
    pub top_class_share: f64,
    pub examples: Vec<ExampleRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub representation: String,
    pub model: String,
    pub eval: String,
    pub full: Option<f64>,
    pub easy: Option<f64>,
    pub difficult: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestSummary {
    pub representation: String,
    pub easy: usize,
    pub difficult: usize,
    pub iterations: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSection {
    pub manifests: Vec<ManifestSummary>,
    pub rows: Vec<PartitionRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub scores: Option<Vec<ScoreRow>>,
    pub confusion: Option<ConfusionSection>,
    pub pmi: Option<PmiSection>,
    pub lengths: Option<Vec<LengthRow>>,
    pub heuristics: Option<Vec<HeuristicRow>>,
    pub partitions: Option<PartitionSection>,
}

/// A titled grid of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub notes: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Set for sections that were not computed.
    pub not_run: bool,
}

impl Table {
    fn new(title: &str, headers: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            notes: Vec::new(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            not_run: false,
        }
    }

    fn skipped(title: &str) -> Self {
        Self {
            not_run: true,
            ..Self::new(title, &[])
        }
    }
}

pub const TITLE_METADATA: &str = "Run metadata";
pub const TITLE_SCORES: &str = "Baseline micro-F1";
pub const TITLE_CONFUSION: &str = "Confusion matrix";
pub const TITLE_PMI: &str = "Token-class PMI";
pub const TITLE_LENGTHS: &str = "Hypothesis length";
pub const TITLE_HEURISTICS: &str = "Heuristic uniformity tests";
pub const TITLE_PARTITIONS: &str = "Partition evaluation";

pub fn f1(x: f64) -> String {
    format!("{x:.2}")
}

pub fn pmi(x: f64) -> String {
    format!("{x:.3}")
}

pub fn chi2(x: f64) -> String {
    format!("{x:.2}")
}

pub fn p_value(x: f64) -> String {
    format!("{x:.1e}")
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map_or_else(|| MISSING.to_string(), f)
}

fn delta(x: Option<f64>, base: Option<f64>) -> String {
    match (x, base) {
        (Some(x), Some(b)) => format!("{} ({:+.2})", f1(x), x - b),
        (Some(x), None) => f1(x),
        _ => MISSING.to_string(),
    }
}

fn significance(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

impl Report {
    /// The report as tables in fixed section order.
    pub fn tables(&self) -> Vec<Table> {
        vec![
            self.metadata_table(),
            self.scores_table(),
            self.confusion_table(),
            self.pmi_table(),
            self.lengths_table(),
            self.heuristics_table(),
            self.partitions_table(),
        ]
    }

    fn metadata_table(&self) -> Table {
        let m = &self.metadata;
        let mut t = Table::new(TITLE_METADATA, &["key", "value"]);
        t.rows.push(vec!["version".into(), m.tool_version.clone()]);
        t.rows.push(vec!["seed".into(), m.seed.to_string()]);
        for (name, sum) in &m.checksums {
            t.rows.push(vec![format!("checksum {name}"), sum.clone()]);
        }
        t.notes = m.notes.clone();
        if !m.config.is_empty() {
            t.notes.push("config:".into());
            t.notes.extend(m.config.lines().map(|l| format!("  {l}")));
        }
        t
    }

    fn scores_table(&self) -> Table {
        let Some(rows) = &self.scores else {
            return Table::skipped(TITLE_SCORES);
        };
        let mut t = Table::new(TITLE_SCORES, &["model", "dev", "test"]);
        for r in rows {
            t.rows
                .push(vec![r.model.clone(), opt(r.dev, f1), opt(r.test, f1)]);
        }
        t
    }

    fn confusion_table(&self) -> Table {
        let Some(c) = &self.confusion else {
            return Table::skipped(TITLE_CONFUSION);
        };
        let mut headers = vec!["gold \\ predicted".to_string()];
        headers.extend(c.classes.iter().map(|l| l.to_string()));
        headers.push("precision".into());
        headers.push("recall".into());
        let mut t = Table::new(TITLE_CONFUSION, &[]);
        t.headers = headers;
        t.notes.push(format!(
            "{} on {}, micro-F1 {}",
            c.model,
            c.eval,
            f1(c.micro_f1)
        ));
        for (i, label) in c.classes.iter().enumerate() {
            let mut row = vec![label.to_string()];
            row.extend(c.matrix[i].iter().map(usize::to_string));
            row.push(percent(c.precision[i]));
            row.push(percent(c.recall[i]));
            t.rows.push(row);
        }
        t
    }

    fn pmi_table(&self) -> Table {
        let Some(p) = &self.pmi else {
            return Table::skipped(TITLE_PMI);
        };
        let mut t = Table::new(TITLE_PMI, &[]);
        for (label, _) in &p.columns {
            t.headers.push(label.to_string());
            t.headers.push("pmi".into());
            t.headers.push("%".into());
        }
        t.notes.push(format!(
            "top {} per class, add-{} smoothing, min count {}",
            p.top_k, p.smoothing, p.min_count
        ));
        if !p.merged {
            t.notes.push("entity merging disabled: no gazetteer".into());
        }
        let depth = p.columns.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
        for i in 0..depth {
            let mut row = Vec::new();
            for (_, ranked) in &p.columns {
                match ranked.get(i) {
                    Some(r) => row.extend([
                        r.token.clone(),
                        pmi(r.pmi),
                        format!("{:.2}%", 100.0 * r.coverage),
                    ]),
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            t.rows.push(row);
        }
        t
    }

    fn lengths_table(&self) -> Table {
        let Some(rows) = &self.lengths else {
            return Table::skipped(TITLE_LENGTHS);
        };
        let mut t = Table::new(TITLE_LENGTHS, &["entities"]);
        for l in Label::ALL {
            t.headers.push(format!("{l} mean"));
            t.headers.push(format!("{l} median"));
        }
        for r in rows {
            let mut row = vec![r.mode.clone()];
            for c in &r.per_class {
                match c {
                    Some((mean, median)) => {
                        row.extend([format!("{mean:.1}"), format!("{median:.1}")])
                    }
                    None => row.extend([MISSING.to_string(), MISSING.to_string()]),
                }
            }
            t.rows.push(row);
        }
        t
    }

    fn heuristics_table(&self) -> Table {
        let Some(rows) = &self.heuristics else {
            return Table::skipped(TITLE_HEURISTICS);
        };
        let mut t = Table::new(
            TITLE_HEURISTICS,
            &[
                "heuristic",
                "pairs",
                "entailment",
                "neutral",
                "contradiction",
                "chi2",
                "p-value",
                "top class",
            ],
        );
        t.notes.push("*** p<0.001, ** p<0.01, * p<0.05".into());
        for r in rows {
            let mut row = vec![r.kind.to_string(), r.satisfying.to_string()];
            row.extend(r.per_class.iter().map(u64::to_string));
            row.push(opt(r.chi_square, chi2));
            row.push(match r.p_value {
                Some(p) => format!("{}{}", p_value(p), significance(p)),
                None => "inapplicable".into(),
            });
            row.push(match r.top_class {
                Some(c) => format!("{c} ({})", percent(r.top_class_share)),
                None => MISSING.to_string(),
            });
            t.rows.push(row);
            for ex in &r.examples {
                let mut line = format!("{}: {}", r.kind, ex.id);
                if let Some(p) = &ex.premise {
                    let _ = write!(line, " | premise: {p}");
                }
                if let Some(h) = &ex.hypothesis {
                    let _ = write!(line, " | hypothesis: {h}");
                }
                t.notes.push(line);
            }
        }
        t
    }

    fn partitions_table(&self) -> Table {
        let Some(p) = &self.partitions else {
            return Table::skipped(TITLE_PARTITIONS);
        };
        let mut t = Table::new(
            TITLE_PARTITIONS,
            &[
                "representation",
                "model",
                "eval",
                "full",
                "easy",
                "difficult",
            ],
        );
        for m in &p.manifests {
            t.notes.push(format!(
                "{}: {} easy, {} difficult, {} iterations, checksum {}",
                m.representation, m.easy, m.difficult, m.iterations, m.checksum
            ));
        }
        for r in &p.rows {
            t.rows.push(vec![
                r.representation.clone(),
                r.model.clone(),
                r.eval.clone(),
                opt(r.full, f1),
                delta(r.easy, r.full),
                delta(r.difficult, r.full),
            ]);
        }
        t
    }

    pub fn render(&self, format: Format) -> String {
        let tables = self.tables();
        let mut out = String::new();
        for (i, t) in tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match format {
                Format::Text => render_text(t, &mut out),
                Format::Delimited => render_delimited(t, &mut out),
                Format::Markdown => render_markdown(t, &mut out),
            }
        }
        out
    }
}

fn render_text(t: &Table, out: &mut String) {
    let _ = writeln!(out, "== {} ==", t.title);
    if t.not_run {
        let _ = writeln!(out, "{NOT_RUN}");
        return;
    }
    for n in &t.notes {
        let _ = writeln!(out, "{n}");
    }
    let cols = t.headers.len();
    let mut widths: Vec<usize> = t.headers.iter().map(|h| h.chars().count()).collect();
    for row in &t.rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .take(cols)
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(&t.headers));
    for row in &t.rows {
        let _ = writeln!(out, "{}", line(row));
    }
}

fn clean_tsv(cell: &str) -> String {
    cell.replace(['\t', '\n'], " ")
}

fn render_delimited(t: &Table, out: &mut String) {
    let _ = writeln!(out, "# {}", t.title);
    if t.not_run {
        let _ = writeln!(out, "# {NOT_RUN}");
        return;
    }
    for n in &t.notes {
        let _ = writeln!(out, "# {}", clean_tsv(n));
    }
    for row in std::iter::once(&t.headers).chain(&t.rows) {
        let cells: Vec<String> = row.iter().map(|c| clean_tsv(c)).collect();
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
}

fn clean_md(cell: &str) -> String {
    cell.replace('|', "\\|").replace('\n', " ")
}

fn render_markdown(t: &Table, out: &mut String) {
    let _ = writeln!(out, "## {}\n", t.title);
    if t.not_run {
        let _ = writeln!(out, "_{NOT_RUN}_");
        return;
    }
    for n in &t.notes {
        let _ = writeln!(out, "    {n}");
    }
    if !t.notes.is_empty() {
        out.push('\n');
    }
    let row = |cells: &[String]| {
        let cells: Vec<String> = cells.iter().map(|c| clean_md(c)).collect();
        format!("| {} |", cells.join(" | "))
    };
    let _ = writeln!(out, "{}", row(&t.headers));
    let _ = writeln!(out, "|{}", "---|".repeat(t.headers.len()));
    for r in &t.rows {
        let _ = writeln!(out, "{}", row(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            metadata: Metadata {
                tool_version: "0.1.0".into(),
                seed: 3,
                ..Default::default()
            },
            scores: Some(vec![
                ScoreRow {
                    model: "majority".into(),
                    dev: Some(1.0 / 3.0),
                    test: Some(1.0 / 3.0),
                },
                ScoreRow {
                    model: "probe".into(),
                    dev: Some(0.648),
                    test: None,
                },
            ]),
            heuristics: Some(vec![HeuristicRow {
                kind: HeuristicKind::Hypernym,
                satisfying: 10,
                per_class: [8, 1, 1],
                chi_square: Some(59.15),
                p_value: Some((-59.15f64 / 2.0).exp()),
                top_class: Some(Label::Entailment),
                top_class_share: 0.8,
                examples: vec![],
            }]),
            ..Default::default()
        }
    }

    #[test]
    fn precision_rules() {
        assert_eq!(f1(0.6259), "0.63");
        assert_eq!(pmi(1.23456), "1.235");
        assert_eq!(chi2(874.714), "874.71");
        assert_eq!(p_value(1.43e-13), "1.4e-13");
    }

    #[test]
    fn not_run_markers() {
        let text = sample().render(Format::Text);
        assert!(text.contains(&format!("== {TITLE_PMI} ==\n{NOT_RUN}\n")));
        let empty = Report::default();
        for f in [Format::Text, Format::Delimited, Format::Markdown] {
            assert_eq!(empty.render(f).matches(NOT_RUN).count(), 6);
        }
    }

    #[test]
    fn scores_shape() {
        let t = sample().scores_table();
        assert_eq!(t.headers, ["model", "dev", "test"]);
        assert_eq!(t.rows[0], ["majority", "0.33", "0.33"]);
        assert_eq!(t.rows[1], ["probe", "0.65", "n/a"]);
    }

    #[test]
    fn heuristic_cells() {
        let t = sample().heuristics_table();
        assert_eq!(t.rows[0][5], "59.15");
        assert_eq!(t.rows[0][6], "1.4e-13***");
        assert_eq!(t.rows[0][7], "entailment (80.0%)");
    }

    #[test]
    fn deterministic_and_formats_parse() {
        let r = sample();
        for f in ["text", "tsv", "markdown"] {
            let f: Format = f.parse().unwrap();
            assert_eq!(r.render(f), r.render(f));
        }
        assert!("html".parse::<Format>().is_err());
    }

    #[test]
    fn delimited_is_tab_separated() {
        let out = sample().render(Format::Delimited);
        assert!(out.contains("model\tdev\ttest\n"));
        assert!(out.contains("majority\t0.33\t0.33\n"));
    }

    #[test]
    fn partition_deltas() {
        let r = Report {
            partitions: Some(PartitionSection {
                manifests: vec![],
                rows: vec![PartitionRow {
                    representation: "hypothesis only".into(),
                    model: "probe".into(),
                    eval: "test".into(),
                    full: Some(0.63),
                    easy: Some(0.65),
                    difficult: Some(0.40),
                }],
            }),
            ..Default::default()
        };
        let t = r.partitions_table();
        assert_eq!(t.rows[0][3..], ["0.63", "0.65 (+0.02)", "0.40 (-0.23)"]);
    }
}
