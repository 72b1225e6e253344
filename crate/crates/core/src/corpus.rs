//! Labeled sentence-pair records: loading, validation and split combination.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// The three inference classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    /// Canonical class order used for tables and class lists.
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Entailment => 0,
            Label::Neutral => 1,
            Label::Contradiction => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "entailment" => Ok(Label::Entailment),
            "neutral" => Ok(Label::Neutral),
            "contradiction" => Ok(Label::Contradiction),
            other => Err(Error::data(format!("unknown label value {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::data(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub split: Split,
}

/// An ordered collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    examples: Vec<PairExample>,
}

impl Dataset {
    pub fn new(examples: Vec<PairExample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.id.is_empty() {
                return Err(Error::data("example with empty id"));
            }
            if ex.hypothesis.trim().is_empty() {
                return Err(Error::data(format!(
                    "example {} has an empty hypothesis",
                    ex.id
                )));
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::data(format!("duplicate id {}", ex.id)));
            }
        }
        Ok(Self { examples })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[PairExample] {
        &self.examples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PairExample> {
        self.examples.iter()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label_set(&self) -> [Label; 3] {
        Label::ALL
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Examples carrying the given split tag, in order.
    pub fn filter_split(&self, split: Split) -> Dataset {
        self.filter(|e| e.split == split)
    }

    pub fn filter(&self, mut keep: impl FnMut(&PairExample) -> bool) -> Dataset {
        Dataset {
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn into_examples(self) -> Vec<PairExample> {
        self.examples
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a PairExample;
    type IntoIter = std::slice::Iter<'a, PairExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

/// Names of the JSON fields holding each part of a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "pairID".into(),
            premise: "sentence1".into(),
            hypothesis: "sentence2".into(),
            label: "gold_label".into(),
        }
    }
}

pub fn load_records(path: impl AsRef<Path>, split: Split, fields: &FieldMap) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, split, fields)
}

/// Parses line-delimited JSON records. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn parse_records(text: &str, split: Split, fields: &FieldMap) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| Error::format(line_no, format!("malformed record ({e})")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::format(line_no, "record is not an object"))?;

        let field = |name: &str, what: &str| -> Result<String> {
            match obj.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                Some(Value::Null) | None => Err(Error::format(line_no, format!("missing {what}"))),
                Some(_) => Err(Error::format(line_no, format!("{what} is not a string"))),
            }
        };

        let id = field(&fields.id, "id")?;
        let premise = field(&fields.premise, "premise")?;
        let hypothesis = field(&fields.hypothesis, "hypothesis")?;
        let raw_label = field(&fields.label, "label")?;
        if raw_label.trim().is_empty() {
            return Err(Error::format(line_no, "missing label"));
        }
        let label: Label = raw_label.parse().map_err(|_| {
            Error::format(
                line_no,
                format!("unknown label value {:?}", raw_label.trim()),
            )
        })?;
        if id.is_empty() {
            return Err(Error::format(line_no, "empty id"));
        }
        if hypothesis.trim().is_empty() {
            return Err(Error::format(line_no, "empty hypothesis"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::format(line_no, format!("duplicate id {id}")));
        }
        examples.push(PairExample {
            id,
            premise,
            hypothesis,
            label,
            split,
        });
    }
    Ok(Dataset { examples })
}

/// Writes records in the default field layout, one JSON object per line.
pub fn write_records(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for ex in dataset {
        #[derive(Serialize)]
        struct Record<'a> {
            #[serde(rename = "pairID")]
            id: &'a str,
            sentence1: &'a str,
            sentence2: &'a str,
            gold_label: &'a str,
        }
        let rec = Record {
            id: &ex.id,
            sentence1: &ex.premise,
            sentence2: &ex.hypothesis,
            gold_label: ex.label.as_str(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub per_label: BTreeMap<Label, usize>,
    pub per_split: BTreeMap<Split, usize>,
    pub label_shares: BTreeMap<Label, f64>,
    /// True iff every label share lies within 0.01 of 1/3.
    pub balanced: bool,
    pub warnings: Vec<String>,
}

const BALANCE_TOLERANCE: f64 = 0.01;

pub fn validate(dataset: &Dataset) -> Result<ValidationReport> {
    if dataset.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    let total = dataset.len();
    let mut per_label: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    let mut per_split: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
    for ex in dataset {
        *per_label.get_mut(&ex.label).unwrap() += 1;
        *per_split.get_mut(&ex.split).unwrap() += 1;
    }
    let label_shares: BTreeMap<Label, f64> = per_label
        .iter()
        .map(|(&l, &c)| (l, c as f64 / total as f64))
        .collect();
    let balanced = label_shares
        .values()
        .all(|&s| (s - 1.0 / 3.0).abs() <= BALANCE_TOLERANCE);

    let mut warnings = Vec::new();
    for (label, &count) in &per_label {
        if count == 0 {
            warnings.push(format!("no examples labeled {label}"));
        }
    }
    if !balanced {
        warnings.push("label distribution is not balanced".to_string());
    }
    Ok(ValidationReport {
        total,
        per_label,
        per_split,
        label_shares,
        balanced,
        warnings,
    })
}

/// Concatenates train, dev and test; examples keep their split tags.
pub fn combine_splits(train: &Dataset, dev: &Dataset, test: &Dataset) -> Result<Dataset> {
    let mut seen = HashSet::new();
    let mut collisions = Vec::new();
    let mut examples = Vec::with_capacity(train.len() + dev.len() + test.len());
    for ex in train.iter().chain(dev).chain(test) {
        if !seen.insert(ex.id.as_str()) {
            collisions.push(ex.id.clone());
        }
        examples.push(ex.clone());
    }
    if !collisions.is_empty() {
        collisions.sort();
        collisions.dedup();
        return Err(Error::data(format!(
            "id collision across splits: {}",
            collisions.join(", ")
        )));
    }
    Ok(Dataset { examples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, label: &str) -> String {
        format!(
            r#"{{"sentence1": "Patient has fever.", "sentence2": "Patient is sick.", "gold_label": "{label}", "pairID": "{id}"}}"#
        )
    }

    fn example(id: &str, label: Label, split: Split) -> PairExample {
        PairExample {
            id: id.into(),
            premise: "p".into(),
            hypothesis: "h".into(),
            label,
            split,
        }
    }

    fn dataset_with_counts(e: usize, n: usize, c: usize) -> Dataset {
        let mut v = Vec::new();
        for (label, count) in [
            (Label::Entailment, e),
            (Label::Neutral, n),
            (Label::Contradiction, c),
        ] {
            for i in 0..count {
                v.push(example(&format!("{label}-{i}"), label, Split::Train));
            }
        }
        Dataset::new(v).unwrap()
    }

    #[test]
    fn loads_two_lines_in_order() {
        let text = format!("{}\n{}\n", line("a", "entailment"), line("b", " Neutral "));
        let d = parse_records(&text, Split::Dev, &FieldMap::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.examples()[0].id, "a");
        assert_eq!(d.examples()[1].label, Label::Neutral);
        assert_eq!(d.examples()[1].split, Split::Dev);
        assert_eq!(d.examples()[0].premise, "Patient has fever.");
    }

    #[test]
    fn missing_label_cites_line() {
        let text = format!(
            "{}\n{}\n",
            line("a", "entailment"),
            r#"{"sentence1": "x", "sentence2": "y", "pairID": "b"}"#
        );
        let err = parse_records(&text, Split::Train, &FieldMap::default()).unwrap_err();
        assert_eq!(err.to_string(), "missing label at line 2");
    }

    #[test]
    fn unknown_label_is_named() {
        let err = parse_records(&line("a", "-"), Split::Train, &FieldMap::default()).unwrap_err();
        assert!(err.to_string().contains("\"-\""), "{err}");
    }

    #[test]
    fn malformed_and_duplicate_lines_fail() {
        let err = parse_records("{not json", Split::Train, &FieldMap::default()).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        let text = format!("{}\n{}", line("a", "neutral"), line("a", "neutral"));
        let err = parse_records(&text, Split::Train, &FieldMap::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate id a"));
    }

    #[test]
    fn custom_field_names() {
        let fields = FieldMap {
            id: "uid".into(),
            premise: "context".into(),
            hypothesis: "claim".into(),
            label: "label".into(),
        };
        let text = r#"{"uid": 17, "context": "c", "claim": "h", "label": "CONTRADICTION"}"#;
        let d = parse_records(text, Split::Test, &fields).unwrap();
        assert_eq!(d.examples()[0].id, "17");
        assert_eq!(d.examples()[0].label, Label::Contradiction);
    }

    #[test]
    fn validate_balanced_and_unbalanced() {
        let report = validate(&dataset_with_counts(100, 100, 100)).unwrap();
        assert!(report.balanced);
        for share in report.label_shares.values() {
            assert_eq!(*share, 1.0 / 3.0);
        }
        assert_eq!(report.per_label.values().sum::<usize>(), 300);

        let report = validate(&dataset_with_counts(200, 50, 50)).unwrap();
        assert!(!report.balanced);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn validate_rejects_empty() {
        assert_eq!(
            validate(&Dataset::empty()).unwrap_err().to_string(),
            "empty dataset"
        );
    }

    #[test]
    fn combine_preserves_tags_and_sizes() {
        let train = Dataset::new(vec![
            example("t1", Label::Neutral, Split::Train),
            example("t2", Label::Neutral, Split::Train),
        ])
        .unwrap();
        let test = Dataset::new(vec![example("x1", Label::Neutral, Split::Test)]).unwrap();
        let all = combine_splits(&train, &Dataset::empty(), &test).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all.examples()[2].split, Split::Test);
    }

    #[test]
    fn combine_reports_collisions() {
        let train = Dataset::new(vec![example("same", Label::Neutral, Split::Train)]).unwrap();
        let test = Dataset::new(vec![example("same", Label::Neutral, Split::Test)]).unwrap();
        let err = combine_splits(&train, &Dataset::empty(), &test).unwrap_err();
        assert!(err.to_string().contains("same"));
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let d = Dataset::new(vec![
            PairExample {
                id: "q\"1".into(),
                premise: "BP 120/80, \"stable\"".into(),
                hypothesis: "ok".into(),
                label: Label::Contradiction,
                split: Split::Dev,
            },
            example("q2", Label::Entailment, Split::Dev),
        ])
        .unwrap();
        write_records(&d, &path).unwrap();
        let back = load_records(&path, Split::Dev, &FieldMap::default()).unwrap();
        assert_eq!(back, d);
    }
}
