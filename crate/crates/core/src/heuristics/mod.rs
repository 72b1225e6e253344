//! Dictionary entity linking against a MeSH-style knowledge base, the three
//! annotator-heuristic detectors and their chi-square uniformity tests.

mod chisq;
mod kb;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chisq::{chi_square_sf, chi_square_uniform, ln_gamma, regularized_gamma_q, ChiSquare};
pub use kb::{is_hypernym, valid_tree_number, Concept, KbSettings, KnowledgeBase};

use crate::corpus::{Dataset, Label, PairExample};
use crate::error::{Error, Result};
use crate::textproc::tokenize;

/// One linked mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkedEntity {
    pub concept_id: String,
    pub tree_numbers: Vec<String>,
    /// Token range `[start, end)` in the tokenized sentence.
    pub span: (usize, usize),
    pub matched: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkedPair {
    pub example_id: String,
    pub premise_entities: Vec<LinkedEntity>,
    pub hypothesis_entities: Vec<LinkedEntity>,
    pub hypothesis_tokens: Vec<String>,
}

fn link_tokens(tokens: &[String], kb: &KnowledgeBase) -> Vec<LinkedEntity> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = kb.max_surface_len().min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|n| kb.top_id(&tokens[i..i + n]).map(|id| (n, id)));
        match hit {
            Some((n, id)) => {
                let concept = kb.concept(id).expect("indexed concept exists");
                out.push(LinkedEntity {
                    concept_id: id.to_string(),
                    tree_numbers: concept.tree_numbers.clone(),
                    span: (i, i + n),
                    matched: tokens[i..i + n].join(" "),
                });
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// Greedy longest-match linking of premise and hypothesis; each span maps to
/// its top-ranked concept.
pub fn link_entities(example: &PairExample, kb: &KnowledgeBase) -> LinkedPair {
    let premise = tokenize(&example.premise);
    let hypothesis = tokenize(&example.hypothesis);
    LinkedPair {
        example_id: example.id.clone(),
        premise_entities: link_tokens(premise.tokens(), kb),
        hypothesis_entities: link_tokens(hypothesis.tokens(), kb),
        hypothesis_tokens: hypothesis.tokens().to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    Hypernym,
    ProbableCause,
    EverythingFine,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 3] = [
        HeuristicKind::Hypernym,
        HeuristicKind::ProbableCause,
        HeuristicKind::EverythingFine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeuristicKind::Hypernym => "hypernym",
            HeuristicKind::ProbableCause => "probable_cause",
            HeuristicKind::EverythingFine => "everything_fine",
        }
    }

    /// The class each heuristic is expected to favor.
    pub fn expected_class(self) -> Label {
        match self {
            HeuristicKind::Hypernym => Label::Entailment,
            HeuristicKind::ProbableCause => Label::Neutral,
            HeuristicKind::EverythingFine => Label::Contradiction,
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().replace(['-', ' '], "_").as_str() {
            "hypernym" => Ok(HeuristicKind::Hypernym),
            "probable_cause" | "probablecause" => Ok(HeuristicKind::ProbableCause),
            "everything_fine" | "everythingfine" => Ok(HeuristicKind::EverythingFine),
            other => Err(Error::invalid(format!("unknown heuristic {other:?}"))),
        }
    }
}

/// Top-level MeSH categories counted as conditions, chemicals, procedures
/// or psychiatric findings.
const CAUSE_CONTEXT_CATEGORIES: [char; 4] = ['C', 'D', 'E', 'F'];

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

pub fn detect(pair: &LinkedPair, kind: HeuristicKind, kb: &KnowledgeBase) -> bool {
    match kind {
        HeuristicKind::Hypernym => pair.premise_entities.iter().any(|p| {
            pair.hypothesis_entities.iter().any(|h| {
                h.tree_numbers
                    .iter()
                    .any(|th| p.tree_numbers.iter().any(|tp| kb::tree_prefix(th, tp)))
            })
        }),
        HeuristicKind::ProbableCause => {
            let premise_condition = pair.premise_entities.iter().any(|e| {
                e.tree_numbers.iter().any(|t| {
                    t.chars()
                        .next()
                        .is_some_and(|c| CAUSE_CONTEXT_CATEGORIES.contains(&c.to_ascii_uppercase()))
                })
            });
            premise_condition
                && pair
                    .hypothesis_entities
                    .iter()
                    .any(|e| kb.cause_list().contains(&e.concept_id))
        }
        HeuristicKind::EverythingFine => {
            let patient = kb.patient();
            let shared = pair.hypothesis_entities.iter().any(|h| {
                Some(h.concept_id.as_str()) != patient
                    && pair
                        .premise_entities
                        .iter()
                        .any(|p| p.concept_id == h.concept_id)
            });
            shared
                && kb
                    .negation_cues()
                    .iter()
                    .chain(kb.health_cues())
                    .any(|cue| contains_phrase(&pair.hypothesis_tokens, cue))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicResult {
    pub kind: HeuristicKind,
    pub satisfying: usize,
    /// Indexed like [`Label::ALL`].
    pub per_class: [u64; 3],
    /// `None` when no pair satisfies the heuristic.
    pub test: Option<ChiSquare<f64>>,
    pub top_class: Option<Label>,
    pub top_class_share: f64,
    pub satisfying_ids: Vec<String>,
}

impl HeuristicResult {
    pub fn inapplicable(&self) -> bool {
        self.test.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicReport {
    pub pairs: usize,
    pub results: Vec<HeuristicResult>,
}

impl HeuristicReport {
    pub fn get(&self, kind: HeuristicKind) -> Option<&HeuristicResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

/// Runs all three detectors over the dataset and tests each satisfying
/// subset for uniformity over the classes.
pub fn heuristic_report(dataset: &Dataset, kb: &KnowledgeBase) -> HeuristicReport {
    let flags: Vec<(Label, &str, [bool; 3])> = dataset
        .examples()
        .par_iter()
        .map(|ex| {
            let pair = link_entities(ex, kb);
            (
                ex.label,
                ex.id.as_str(),
                HeuristicKind::ALL.map(|k| detect(&pair, k, kb)),
            )
        })
        .collect();

    let results = HeuristicKind::ALL
        .iter()
        .enumerate()
        .map(|(h, &kind)| {
            let mut per_class = [0u64; 3];
            let mut satisfying_ids = Vec::new();
            for (label, id, fired) in &flags {
                if fired[h] {
                    per_class[label.index()] += 1;
                    satisfying_ids.push(id.to_string());
                }
            }
            let satisfying = satisfying_ids.len();
            let test = chi_square_uniform::<f64>(&per_class).ok();
            let (top_class, top_class_share) = if satisfying == 0 {
                (None, 0.0)
            } else {
                let best = (0..3).fold(0, |b, i| if per_class[i] > per_class[b] { i } else { b });
                (
                    Some(Label::ALL[best]),
                    per_class[best] as f64 / satisfying as f64,
                )
            };
            HeuristicResult {
                kind,
                satisfying,
                per_class,
                test,
                top_class,
                top_class_share,
                satisfying_ids,
            }
        })
        .collect();
    HeuristicReport {
        pairs: dataset.len(),
        results,
    }
}
