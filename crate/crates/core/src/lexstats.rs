//! Token-class pointwise mutual information and hypothesis-length statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textproc::{merge_entities, tokenize, Gazetteer, TokenSeq};

/// What a single count represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountBasis {
    /// Number of hypotheses containing the token.
    #[default]
    Presence,
    /// Number of token occurrences.
    Occurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmiConfig {
    pub smoothing: f64,
    pub min_count: u64,
    pub merged: bool,
    pub basis: CountBasis,
    /// Restrict to one split; `None` uses every example.
    pub split: Option<Split>,
}

impl Default for PmiConfig {
    fn default() -> Self {
        Self {
            smoothing: 50.0,
            min_count: 5,
            merged: true,
            basis: CountBasis::Presence,
            split: Some(Split::Train),
        }
    }
}

/// Raw token-by-class counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PmiCounts {
    pub classes: Vec<String>,
    /// Documents per class.
    pub class_docs: Vec<u64>,
    /// Counts in the chosen basis, one entry per class.
    pub counts: BTreeMap<String, Vec<u64>>,
    /// Containing-document counts, one entry per class.
    pub doc_counts: BTreeMap<String, Vec<u64>>,
}

impl PmiCounts {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            class_docs: vec![0; k],
            ..Default::default()
        }
    }

    /// Adds one document of class `class`.
    pub fn add_document(&mut self, class: usize, tokens: &[String], basis: CountBasis) {
        let k = self.classes.len();
        self.class_docs[class] += 1;
        let mut seen = HashSet::new();
        for t in tokens {
            let first = seen.insert(t.as_str());
            if first || basis == CountBasis::Occurrence {
                self.counts.entry(t.clone()).or_insert_with(|| vec![0; k])[class] += 1;
            }
            if first {
                self.doc_counts
                    .entry(t.clone())
                    .or_insert_with(|| vec![0; k])[class] += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmiEntry<S: Scalar = f64> {
    pub pmi: S,
    pub raw_count: u64,
    /// Fraction of the class's documents that contain the token.
    pub class_doc_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmiTable<S: Scalar = f64> {
    classes: Vec<String>,
    entries: BTreeMap<String, Vec<PmiEntry<S>>>,
    smoothing: f64,
    min_count: u64,
    merged: bool,
    basis: CountBasis,
}

/// One row of a ranked listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedToken<S: Scalar = f64> {
    pub token: String,
    pub pmi: S,
    pub class_doc_fraction: f64,
}

impl<S: Scalar> PmiTable<S> {
    /// Filters tokens below `min_count`, adds `smoothing` to every remaining
    /// (token, class) cell and computes `log2 p(t,y) / (p(t,·) p(·,y))`.
    pub fn from_counts(counts: &PmiCounts, smoothing: f64, min_count: u64) -> Result<Self> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid("smoothing must be finite and non-negative"));
        }
        let k = counts.classes.len();
        if k == 0 {
            return Err(Error::invalid("no classes"));
        }
        let kept: Vec<(&String, &Vec<u64>)> = counts
            .counts
            .iter()
            .filter(|(_, c)| c.iter().sum::<u64>() >= min_count)
            .collect();

        let s = S::lit(smoothing);
        let mut col = vec![S::zero(); k];
        let mut rows = Vec::with_capacity(kept.len());
        let mut grand = S::zero();
        for (_, c) in &kept {
            let mut row_sum = S::zero();
            for (j, &v) in c.iter().enumerate() {
                let cell = S::lit(v as f64) + s;
                col[j] = col[j] + cell;
                row_sum = row_sum + cell;
            }
            grand = grand + row_sum;
            rows.push(row_sum);
        }

        let mut entries = BTreeMap::new();
        for ((token, c), row_sum) in kept.into_iter().zip(rows) {
            let docs = counts.doc_counts.get(token);
            let p_t = row_sum / grand;
            let cells = c
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let joint = (S::lit(v as f64) + s) / grand;
                    let p_y = col[j] / grand;
                    let class_doc_fraction = match (docs, counts.class_docs[j]) {
                        (Some(d), n) if n > 0 => d[j] as f64 / n as f64,
                        _ => 0.0,
                    };
                    PmiEntry {
                        pmi: (joint / (p_t * p_y)).log2(),
                        raw_count: v,
                        class_doc_fraction,
                    }
                })
                .collect();
            entries.insert(token.clone(), cells);
        }
        Ok(Self {
            classes: counts.classes.clone(),
            entries,
            smoothing,
            min_count,
            merged: false,
            basis: CountBasis::Presence,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Whether entity merging was applied when counting.
    pub fn merged(&self) -> bool {
        self.merged
    }

    pub fn basis(&self) -> CountBasis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, token: &str, class: &str) -> Option<&PmiEntry<S>> {
        let j = self.classes.iter().position(|c| c == class)?;
        self.entries.get(token).map(|row| &row[j])
    }

    /// Highest-PMI tokens for `class`; ties broken by ascending token.
    pub fn top_tokens(&self, class: &str, n: usize) -> Result<Vec<RankedToken<S>>> {
        let j = self
            .classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::invalid(format!("unknown class {class:?}")))?;
        let mut ranked: Vec<RankedToken<S>> = self
            .entries
            .iter()
            .map(|(t, row)| RankedToken {
                token: t.clone(),
                pmi: row[j].pmi,
                class_doc_fraction: row[j].class_doc_fraction,
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.pmi
                .partial_cmp(&a.pmi)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.token.cmp(&b.token))
        });
        ranked.truncate(n);
        Ok(ranked)
    }

    /// Tab-separated export: class, rank, token, pmi, raw count, class %.
    pub fn to_tsv(&self, n: usize) -> String {
        let mut out = String::from("class\trank\ttoken\tpmi\tcount\tclass_pct\n");
        for class in &self.classes {
            for (rank, r) in self.top_tokens(class, n).unwrap().iter().enumerate() {
                let raw = self.get(&r.token, class).map_or(0, |e| e.raw_count);
                writeln!(
                    out,
                    "{class}\t{}\t{}\t{:.3}\t{raw}\t{:.2}",
                    rank + 1,
                    r.token,
                    r.pmi,
                    r.class_doc_fraction * 100.0
                )
                .unwrap();
            }
        }
        out
    }
}

fn hypothesis_tokens(text: &str, gazetteer: Option<&Gazetteer>) -> TokenSeq {
    let seq = tokenize(text);
    match gazetteer {
        Some(g) => merge_entities(&seq, g),
        None => seq,
    }
}

/// Counts hypothesis tokens per class and builds the PMI table. Merging
/// only happens when `config.merged` is set and a gazetteer is supplied.
pub fn compute_pmi<S: Scalar>(
    dataset: &Dataset,
    config: &PmiConfig,
    gazetteer: Option<&Gazetteer>,
) -> Result<PmiTable<S>> {
    if config.smoothing.is_nan() || config.smoothing < 0.0 {
        return Err(Error::invalid("smoothing must be non-negative"));
    }
    let gazetteer = gazetteer.filter(|_| config.merged);
    let classes: Vec<String> = Label::ALL.iter().map(|l| l.to_string()).collect();
    let mut counts = PmiCounts::new(classes);
    let mut used = 0usize;
    for ex in dataset {
        if config.split.is_some_and(|s| s != ex.split) {
            continue;
        }
        used += 1;
        let seq = hypothesis_tokens(&ex.hypothesis, gazetteer);
        counts.add_document(ex.label.index(), seq.tokens(), config.basis);
    }
    if used == 0 {
        return Err(Error::data("empty dataset"));
    }
    let mut table = PmiTable::from_counts(&counts, config.smoothing, config.min_count)?;
    table.merged = gazetteer.is_some();
    table.basis = config.basis;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityMode {
    Merged,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassLength {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthStats {
    pub mode: EntityMode,
    /// Indexed like [`Label::ALL`]; `None` for a class with no examples.
    pub per_class: [Option<ClassLength>; 3],
}

impl LengthStats {
    pub fn get(&self, label: Label) -> Option<&ClassLength> {
        self.per_class[label.index()].as_ref()
    }
}

pub fn median(values: &mut [usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    })
}

/// Mean and median hypothesis token counts per class.
pub fn length_stats(
    dataset: &Dataset,
    merged: bool,
    gazetteer: Option<&Gazetteer>,
) -> Result<LengthStats> {
    if dataset.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    let gazetteer = match (merged, gazetteer) {
        (true, Some(g)) => Some(g),
        (true, None) => return Err(Error::invalid("merged lengths need a gazetteer")),
        (false, _) => None,
    };
    let mut lengths: [Vec<usize>; 3] = Default::default();
    for ex in dataset {
        lengths[ex.label.index()].push(hypothesis_tokens(&ex.hypothesis, gazetteer).len());
    }
    let per_class = lengths.map(|mut v| {
        let count = v.len();
        let mean = v.iter().sum::<usize>() as f64 / count.max(1) as f64;
        median(&mut v).map(|median| ClassLength {
            count,
            mean,
            median,
        })
    });
    Ok(LengthStats {
        mode: if merged {
            EntityMode::Merged
        } else {
            EntityMode::Separate
        },
        per_class,
    })
}
