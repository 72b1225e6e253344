//! MeSH-style concept store with a surface-form index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::tokenize;

/// Checks `letter digits(.digits)*`, e.g. `C19.246`.
pub fn valid_tree_number(code: &str) -> bool {
    let mut chars = code.chars();
    if !chars.next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    let rest = chars.as_str();
    !rest.is_empty()
        && rest
            .split('.')
            .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit()))
}

/// True iff `hypo` is a proper ancestor of `prem` in the tree, i.e. its dot
/// segments are a strict prefix of `prem`'s.
pub fn is_hypernym(hypo: &str, prem: &str) -> Result<bool> {
    for code in [hypo, prem] {
        if !valid_tree_number(code) {
            return Err(Error::invalid(format!("malformed tree number {code:?}")));
        }
    }
    Ok(tree_prefix(hypo, prem))
}

pub(crate) fn tree_prefix(hypo: &str, prem: &str) -> bool {
    prem.len() > hypo.len() && prem.starts_with(hypo) && prem.as_bytes()[hypo.len()] == b'.'
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub tree_numbers: Vec<String>,
    pub definition: Option<String>,
}

impl Concept {
    /// Canonical name first, then aliases in file order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Heuristic cue lists and concept roles, loaded from a TOML file.
///
/// `cause_list` and `patient` entries may be concept ids or surface forms;
/// surface forms resolve to their top-ranked concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KbSettings {
    pub cause_list: Vec<String>,
    pub negation_cues: Vec<String>,
    pub health_cues: Vec<String>,
    pub patient: Option<String>,
}

impl Default for KbSettings {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            cause_list: owned(&[
                "smoking",
                "substance-related disorders",
                "mental disorders",
                "alcoholism",
                "homelessness",
                "obesity",
            ]),
            negation_cues: owned(&["does not have", "no finding", "no", "denies"]),
            health_cues: owned(&["normal", "healthy", "discharged"]),
            patient: Some("patient".into()),
        }
    }
}

impl KbSettings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    concepts: BTreeMap<String, Concept>,
    file_order: Vec<String>,
    surface_index: HashMap<Vec<String>, Vec<String>>,
    max_surface_len: usize,
    cause_list: BTreeSet<String>,
    negation_cues: Vec<Vec<String>>,
    health_cues: Vec<Vec<String>>,
    patient: Option<String>,
    warnings: Vec<String>,
}

impl KnowledgeBase {
    /// Builds and indexes a KB. Concepts are ranked by file order for a shared
    /// surface form, after ranking by position in each concept's name list.
    pub fn new(concepts: Vec<Concept>, settings: &KbSettings) -> Result<Self> {
        let mut kb = KnowledgeBase::default();
        let mut ranked: HashMap<Vec<String>, Vec<(usize, usize, String)>> = HashMap::new();
        for (order, c) in concepts.into_iter().enumerate() {
            if kb.concepts.contains_key(&c.id) {
                return Err(Error::data(format!("duplicate concept id {}", c.id)));
            }
            if c.tree_numbers.is_empty() {
                return Err(Error::data(format!("concept {} has no tree number", c.id)));
            }
            if let Some(bad) = c.tree_numbers.iter().find(|t| !valid_tree_number(t)) {
                return Err(Error::data(format!(
                    "concept {}: malformed tree number {bad:?}",
                    c.id
                )));
            }
            for (pos, name) in c.names().enumerate() {
                let toks = tokenize(name).tokens().to_vec();
                if toks.is_empty() {
                    continue;
                }
                kb.max_surface_len = kb.max_surface_len.max(toks.len());
                let entry = ranked.entry(toks).or_default();
                if !entry.iter().any(|(_, _, id)| id == &c.id) {
                    entry.push((pos, order, c.id.clone()));
                }
            }
            kb.file_order.push(c.id.clone());
            kb.concepts.insert(c.id.clone(), c);
        }
        kb.surface_index = ranked
            .into_iter()
            .map(|(k, mut v)| {
                v.sort();
                (k, v.into_iter().map(|(_, _, id)| id).collect())
            })
            .collect();
        kb.apply_settings(settings);
        Ok(kb)
    }

    fn resolve(&self, key: &str) -> Option<String> {
        if self.concepts.contains_key(key) {
            return Some(key.to_string());
        }
        self.lookup(key).first().map(|c| c.id.clone())
    }

    /// Replaces cue lists and concept roles.
    pub fn apply_settings(&mut self, settings: &KbSettings) {
        self.warnings.clear();
        self.cause_list.clear();
        for entry in &settings.cause_list {
            match self.resolve(entry) {
                Some(id) => {
                    self.cause_list.insert(id);
                }
                None => self
                    .warnings
                    .push(format!("cause entry {entry:?} not in knowledge base")),
            }
        }
        self.patient = settings.patient.as_deref().and_then(|p| {
            let id = self.resolve(p);
            if id.is_none() {
                self.warnings
                    .push(format!("patient entry {p:?} not in knowledge base"));
            }
            id
        });
        let cues = |xs: &[String]| -> Vec<Vec<String>> {
            xs.iter()
                .map(|c| tokenize(c).tokens().to_vec())
                .filter(|t| !t.is_empty())
                .collect()
        };
        self.negation_cues = cues(&settings.negation_cues);
        self.health_cues = cues(&settings.health_cues);
    }

    pub fn load(path: impl AsRef<Path>, settings: &KbSettings) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, settings)
    }

    /// Parses the TSV format: id, canonical name, `|`-separated aliases,
    /// `|`-separated tree numbers, optional definition. Blank and `#` lines
    /// are skipped.
    pub fn parse(text: &str, settings: &KbSettings) -> Result<Self> {
        let mut concepts = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(4..=5).contains(&fields.len()) {
                return Err(Error::format(
                    line_no,
                    format!(
                        "expected 4 or 5 tab-separated fields, found {}",
                        fields.len()
                    ),
                ));
            }
            let split = |f: &str| -> Vec<String> {
                f.split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            };
            let id = fields[0].trim().to_string();
            if id.is_empty() {
                return Err(Error::format(line_no, "empty concept id"));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::format(line_no, format!("duplicate concept id {id}")));
            }
            let tree_numbers = split(fields[3]);
            if tree_numbers.is_empty() {
                return Err(Error::format(line_no, "missing tree number"));
            }
            if let Some(bad) = tree_numbers.iter().find(|t| !valid_tree_number(t)) {
                return Err(Error::format(
                    line_no,
                    format!("malformed tree number {bad:?}"),
                ));
            }
            concepts.push(Concept {
                id,
                canonical_name: fields[1].trim().to_string(),
                aliases: split(fields[2]),
                tree_numbers,
                definition: fields
                    .get(4)
                    .map(|d| d.trim().to_string())
                    .filter(|d| !d.is_empty()),
            });
        }
        Self::new(concepts, settings)
    }

    /// TSV serialization in original order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for c in self.concepts() {
            write!(
                out,
                "{}\t{}\t{}\t{}",
                c.id,
                c.canonical_name,
                c.aliases.join("|"),
                c.tree_numbers.join("|")
            )
            .unwrap();
            if let Some(d) = &c.definition {
                write!(out, "\t{d}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    /// Concepts in the order they were supplied.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.file_order.iter().map(|id| &self.concepts[id])
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Concepts matching a surface form, best-ranked first.
    pub fn lookup(&self, surface: &str) -> Vec<&Concept> {
        let key = tokenize(surface).tokens().to_vec();
        self.lookup_tokens(&key)
    }

    pub(crate) fn lookup_tokens(&self, tokens: &[String]) -> Vec<&Concept> {
        self.surface_index
            .get(tokens)
            .map(|ids| ids.iter().map(|id| &self.concepts[id]).collect())
            .unwrap_or_default()
    }

    pub(crate) fn top_id(&self, tokens: &[String]) -> Option<&str> {
        self.surface_index
            .get(tokens)
            .and_then(|ids| ids.first())
            .map(String::as_str)
    }

    pub fn max_surface_len(&self) -> usize {
        self.max_surface_len
    }

    pub fn cause_list(&self) -> &BTreeSet<String> {
        &self.cause_list
    }

    pub fn patient(&self) -> Option<&str> {
        self.patient.as_deref()
    }

    pub fn negation_cues(&self) -> &[Vec<String>] {
        &self.negation_cues
    }

    pub fn health_cues(&self) -> &[Vec<String>] {
        &self.health_cues
    }

    /// Unresolved settings entries.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}
