//! Synthetic sentence-pair corpora with planted, class-correlated artifacts.
//!
//! Every lexical plant lands in exactly `round(rate × size_per_class)`
//! examples of its class, and every knowledge-base plant produces a pair
//! that satisfies its heuristic by construction. The bundle carries the
//! matching gazetteer, knowledge base and word vectors so the full pipeline
//! can run on it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_records, Dataset, Label, PairExample, Split};
use crate::embedstore::EmbeddingTable;
use crate::error::{Error, Result};
use crate::heuristics::{Concept, HeuristicKind, KbSettings, KnowledgeBase};
use crate::seeding::rng_for;
use crate::textproc::{tokenize, Gazetteer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantLocation {
    Hypothesis,
    Premise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub class: Label,
    /// A token or a multi-word phrase.
    pub token: String,
    pub rate: f64,
    pub location: PlantLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbPlantSpec {
    pub kind: HeuristicKind,
    pub rate: f64,
    pub target_class: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub size_per_class: usize,
    pub vocab_size: usize,
    /// Inclusive range of background tokens per sentence.
    pub sentence_len: (usize, usize),
    pub plants: Vec<PlantSpec>,
    pub kb_plants: Vec<KbPlantSpec>,
    pub embedding_dim: usize,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size_per_class: 500,
            vocab_size: 400,
            sentence_len: (4, 8),
            plants: Vec::new(),
            kb_plants: Vec::new(),
            embedding_dim: 32,
            dev_fraction: 0.1,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn check(&self) -> Result<()> {
        if self.size_per_class < 1 || self.vocab_size < 1 {
            return Err(Error::invalid(
                "size_per_class and vocab_size must be positive",
            ));
        }
        let (lo, hi) = self.sentence_len;
        if lo < 1 || lo > hi {
            return Err(Error::invalid(
                "sentence_len must be a nonempty range starting at 1 or more",
            ));
        }
        if self.embedding_dim <= Label::ALL.len() {
            return Err(Error::invalid(
                "embedding_dim must exceed the number of classes",
            ));
        }
        let fractions_ok = (0.0..=1.0).contains(&self.dev_fraction)
            && (0.0..=1.0).contains(&self.test_fraction)
            && self.dev_fraction + self.test_fraction <= 1.0;
        if !fractions_ok {
            return Err(Error::invalid(
                "dev/test fractions must lie in [0, 1] and sum to at most 1",
            ));
        }
        let rates = self
            .plants
            .iter()
            .map(|p| p.rate)
            .chain(self.kb_plants.iter().map(|p| p.rate));
        for r in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("plant rate {r} outside [0, 1]")));
            }
        }
        for p in &self.plants {
            if tokenize(&p.token).is_empty() {
                return Err(Error::invalid("plant token is empty"));
            }
        }
        Ok(())
    }

    fn planted_count(&self, rate: f64) -> usize {
        (rate * self.size_per_class as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantRecord {
    pub class: Label,
    pub token: String,
    pub location: PlantLocation,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbPlantRecord {
    pub kind: HeuristicKind,
    pub class: Label,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub plants: Vec<PlantRecord>,
    pub kb_plants: Vec<KbPlantRecord>,
}

impl GroundTruth {
    pub fn planted_ids(&self) -> BTreeSet<&str> {
        self.plants
            .iter()
            .flat_map(|p| &p.ids)
            .chain(self.kb_plants.iter().flat_map(|p| &p.ids))
            .map(String::as_str)
            .collect()
    }

    pub fn kb_planted(&self, kind: HeuristicKind) -> BTreeSet<&str> {
        self.kb_plants
            .iter()
            .filter(|p| p.kind == kind)
            .flat_map(|p| &p.ids)
            .map(String::as_str)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.planted_ids().is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub dataset: Dataset,
    pub gazetteer: Gazetteer,
    pub kb: KnowledgeBase,
    pub kb_settings: KbSettings,
    pub embeddings: EmbeddingTable<f64>,
    pub ground_truth: GroundTruth,
    pub warnings: Vec<String>,
}

/// File names used by [`SynthBundle::write`].
pub mod files {
    pub const TRAIN: &str = "train.jsonl";
    pub const DEV: &str = "dev.jsonl";
    pub const TEST: &str = "test.jsonl";
    pub const GAZETTEER: &str = "gazetteer.txt";
    pub const KB: &str = "kb.tsv";
    pub const KB_SETTINGS: &str = "kb_settings.toml";
    pub const VECTORS: &str = "vectors.txt";
    pub const GROUND_TRUTH: &str = "ground_truth.json";
}

impl SynthBundle {
    /// Writes every artifact in the formats the loaders read.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (split, name) in [
            (Split::Train, files::TRAIN),
            (Split::Dev, files::DEV),
            (Split::Test, files::TEST),
        ] {
            write_records(&self.dataset.filter_split(split), dir.join(name))?;
        }
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(path, e))
        };
        put(files::GAZETTEER, self.gazetteer.to_text())?;
        put(files::KB, self.kb.to_tsv())?;
        put(files::KB_SETTINGS, self.kb_settings.to_toml())?;
        put(files::VECTORS, self.embeddings.to_text())?;
        put(
            files::GROUND_TRUTH,
            serde_json::to_string_pretty(&self.ground_truth)? + "\n",
        )
    }
}

const DISEASE_ROOTS: [&str; 8] = [
    "arvel", "bromic", "cestal", "dorian", "elvic", "fenral", "gostic", "hylar",
];
const DISEASE_KINDS: [&str; 4] = ["syndrome", "fever", "palsy", "sclerosis"];

/// (canonical name, tree number) for the causal concepts.
const CAUSES: [(&str, &str); 6] = [
    ("smoking", "F01.145.805"),
    ("substance-related disorders", "F03.900"),
    ("mental disorders", "F03"),
    ("alcoholism", "F03.900.100.350"),
    ("homelessness", "I01.880.853.150.423"),
    ("obesity", "C23.888.144.699.500"),
];

struct SynthKb {
    kb: KnowledgeBase,
    settings: KbSettings,
    /// (specific name, general name) pairs.
    diseases: Vec<(String, String)>,
    causes: Vec<String>,
}

fn build_kb() -> Result<SynthKb> {
    let mut concepts = vec![Concept {
        id: "S0001".into(),
        canonical_name: "patients".into(),
        aliases: vec!["patient".into()],
        tree_numbers: vec!["M01.643".into()],
        definition: None,
    }];
    let mut diseases = Vec::new();
    for (g, root) in DISEASE_ROOTS.iter().enumerate() {
        let general = format!("{root} disorder");
        let general_tree = format!("C{}", 30 + g);
        concepts.push(Concept {
            id: format!("S1{g:02}0"),
            canonical_name: general.clone(),
            aliases: vec![],
            tree_numbers: vec![general_tree.clone()],
            definition: None,
        });
        for (s, kind) in DISEASE_KINDS.iter().enumerate() {
            let specific = format!("{root} {kind}");
            concepts.push(Concept {
                id: format!("S1{g:02}{}", s + 1),
                canonical_name: specific.clone(),
                aliases: vec![],
                tree_numbers: vec![format!("{general_tree}.{}", 100 + s)],
                definition: None,
            });
            diseases.push((specific, general.clone()));
        }
    }
    let mut causes = Vec::new();
    for (i, (name, tree)) in CAUSES.iter().enumerate() {
        concepts.push(Concept {
            id: format!("S2{i:03}"),
            canonical_name: name.to_string(),
            aliases: vec![],
            tree_numbers: vec![tree.to_string()],
            definition: None,
        });
        causes.push(name.to_string());
    }
    let settings = KbSettings::default();
    let kb = KnowledgeBase::new(concepts, &settings)?;
    Ok(SynthKb {
        kb,
        settings,
        diseases,
        causes,
    })
}

fn background(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Vec<String> {
    let len = rng.gen_range(cfg.sentence_len.0..=cfg.sentence_len.1);
    (0..len)
        .map(|_| vocab_token(rng.gen_range(0..cfg.vocab_size)))
        .collect()
}

fn vocab_token(i: usize) -> String {
    format!("w{i:04}")
}

/// Inserts `phrase` at a random position at or after `floor`.
fn insert_at_random(
    rng: &mut ChaCha8Rng,
    tokens: &mut Vec<String>,
    floor: usize,
    phrase: &[String],
) {
    let at = rng.gen_range(floor..=tokens.len());
    tokens.splice(at..at, phrase.iter().cloned());
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, skip: usize) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; dim];
        for x in &mut v[skip..] {
            *x = rng.gen_range(-1.0..1.0);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

const STREAM_SPLITS: u64 = 1;
const STREAM_PLANTS: u64 = 2;
const STREAM_TEXT: u64 = 3;
const STREAM_VECTORS: u64 = 4;
const STREAM_KB: u64 = 5;

struct Draft {
    premise_prefix: Vec<String>,
    premise: Vec<String>,
    hypothesis_prefix: Vec<String>,
    hypothesis: Vec<String>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthBundle> {
    cfg.check()?;
    let n = cfg.size_per_class;
    let synth_kb = build_kb()?;
    let mut warnings = Vec::new();

    // Split assignment per class.
    let n_test = (cfg.test_fraction * n as f64).round() as usize;
    let n_dev = ((cfg.dev_fraction * n as f64).round() as usize).min(n - n_test);
    let mut split_rng = rng_for(cfg.seed, &[STREAM_SPLITS]);
    let mut splits = vec![[Split::Train; 3]; n];
    #[allow(clippy::needless_range_loop)]
    for c in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut split_rng);
        for (rank, &i) in order.iter().enumerate() {
            splits[i][c] = if rank < n_test {
                Split::Test
            } else if rank < n_test + n_dev {
                Split::Dev
            } else {
                Split::Train
            };
        }
    }

    // Base text.
    let mut text_rng = rng_for(cfg.seed, &[STREAM_TEXT]);
    let mut drafts: Vec<[Draft; 3]> = (0..n)
        .map(|_| {
            [0, 1, 2].map(|_| {
                let (specific, _) =
                    &synth_kb.diseases[text_rng.gen_range(0..synth_kb.diseases.len())];
                let mut premise_prefix = tokenize("patient has").tokens().to_vec();
                premise_prefix.extend(tokenize(specific).tokens().iter().cloned());
                Draft {
                    premise_prefix,
                    premise: background(&mut text_rng, cfg),
                    hypothesis_prefix: Vec::new(),
                    hypothesis: background(&mut text_rng, cfg),
                }
            })
        })
        .collect();

    // Knowledge-base plants: each example takes at most one.
    let mut kb_rng = rng_for(cfg.seed, &[STREAM_KB]);
    let mut kb_taken = [vec![false; n], vec![false; n], vec![false; n]];
    let mut kb_records = Vec::new();
    for spec in &cfg.kb_plants {
        let c = spec.target_class.index();
        let count = cfg.planted_count(spec.rate);
        if spec.rate > 0.0 && count == 0 {
            warnings.push(format!("kb plant {} rounds to zero examples", spec.kind));
        }
        let free: Vec<usize> = (0..n).filter(|&i| !kb_taken[c][i]).collect();
        if count > free.len() {
            return Err(Error::invalid(format!(
                "kb plants for {} need {count} examples, only {} left",
                spec.target_class,
                free.len()
            )));
        }
        let mut chosen: Vec<usize> = sample(&mut kb_rng, free.len(), count)
            .into_iter()
            .map(|k| free[k])
            .collect();
        chosen.sort_unstable();
        for (j, &i) in chosen.iter().enumerate() {
            kb_taken[c][i] = true;
            let draft = &mut drafts[i][c];
            let specific = draft.premise_prefix[2..].join(" ");
            let general = &synth_kb
                .diseases
                .iter()
                .find(|(s, _)| *s == specific)
                .expect("premise disease from the list")
                .1;
            let template = match spec.kind {
                HeuristicKind::Hypernym => format!("patient has {general}"),
                HeuristicKind::ProbableCause => {
                    let cause = &synth_kb.causes[kb_rng.gen_range(0..synth_kb.causes.len())];
                    format!("patient has {cause}")
                }
                HeuristicKind::EverythingFine if j % 2 == 0 => format!("{specific} is normal"),
                HeuristicKind::EverythingFine => format!("no {specific}"),
            };
            draft.hypothesis_prefix = tokenize(&template).tokens().to_vec();
        }
        kb_records.push((spec, c, chosen));
    }

    // Lexical plants.
    let mut plant_rng = rng_for(cfg.seed, &[STREAM_PLANTS]);
    let mut plant_records = Vec::new();
    for spec in &cfg.plants {
        let c = spec.class.index();
        let count = cfg.planted_count(spec.rate);
        if spec.rate > 0.0 && count == 0 {
            warnings.push(format!("plant {:?} rounds to zero examples", spec.token));
        }
        let phrase = tokenize(&spec.token).tokens().to_vec();
        let mut chosen: Vec<usize> = sample(&mut plant_rng, n, count).into_vec();
        chosen.sort_unstable();
        for &i in &chosen {
            let draft = &mut drafts[i][c];
            let target = match spec.location {
                PlantLocation::Hypothesis => &mut draft.hypothesis,
                PlantLocation::Premise => &mut draft.premise,
            };
            insert_at_random(&mut plant_rng, target, 0, &phrase);
        }
        plant_records.push((spec, c, chosen));
    }

    let id_of = |c: usize, i: usize| format!("syn-{}-{i:05}", Label::ALL[c].as_str());
    let mut examples = Vec::with_capacity(3 * n);
    for c in 0..3 {
        for (i, row) in drafts.iter().enumerate() {
            let d = &row[c];
            let premise: Vec<&str> = d
                .premise_prefix
                .iter()
                .chain(&d.premise)
                .map(String::as_str)
                .collect();
            let hypothesis: Vec<&str> = d
                .hypothesis_prefix
                .iter()
                .chain(&d.hypothesis)
                .map(String::as_str)
                .collect();
            examples.push(PairExample {
                id: id_of(c, i),
                premise: premise.join(" "),
                hypothesis: hypothesis.join(" "),
                label: Label::ALL[c],
                split: splits[i][c],
            });
        }
    }
    let dataset = Dataset::new(examples)?;

    let ground_truth = GroundTruth {
        plants: plant_records
            .into_iter()
            .map(|(spec, c, ids)| PlantRecord {
                class: spec.class,
                token: spec.token.clone(),
                location: spec.location,
                ids: ids.into_iter().map(|i| id_of(c, i)).collect(),
            })
            .collect(),
        kb_plants: kb_records
            .into_iter()
            .map(|(spec, c, ids)| KbPlantRecord {
                kind: spec.kind,
                class: spec.target_class,
                ids: ids.into_iter().map(|i| id_of(c, i)).collect(),
            })
            .collect(),
    };

    // Gazetteer: every multi-word KB name and planted phrase.
    let mut gazetteer = Gazetteer::default();
    for concept in synth_kb.kb.concepts() {
        for name in concept.names() {
            gazetteer.insert(name);
        }
    }
    for p in &cfg.plants {
        gazetteer.insert(&p.token);
    }

    let embeddings = build_vectors(cfg, &synth_kb)?;

    Ok(SynthBundle {
        dataset,
        gazetteer,
        kb: synth_kb.kb,
        kb_settings: synth_kb.settings,
        embeddings,
        ground_truth,
        warnings,
    })
}

/// Background and KB tokens get random unit vectors orthogonal to the first
/// three axes; planted tokens get the axis of their class.
fn build_vectors(cfg: &SynthConfig, kb: &SynthKb) -> Result<EmbeddingTable<f64>> {
    let dim = cfg.embedding_dim;
    let mut rng = rng_for(cfg.seed, &[STREAM_VECTORS]);
    let mut table = EmbeddingTable::new(dim)?;

    let planted: BTreeMap<String, usize> = cfg
        .plants
        .iter()
        .map(|p| (tokenize(&p.token).tokens().join("_"), p.class.index()))
        .collect();
    for (token, &c) in &planted {
        let mut v = vec![0.0; dim];
        v[c] = 1.0;
        table.insert(token, &v)?;
    }

    let mut seen: HashSet<String> = planted.keys().cloned().collect();
    let mut words: Vec<String> = (0..cfg.vocab_size).map(vocab_token).collect();
    for concept in kb.kb.concepts() {
        for name in concept.names() {
            words.extend(tokenize(name).tokens().iter().cloned());
            if tokenize(name).len() > 1 {
                words.push(tokenize(name).tokens().join("_"));
            }
        }
    }
    for p in &cfg.plants {
        words.extend(tokenize(&p.token).tokens().iter().cloned());
    }
    words.extend(["has", "is", "normal", "no"].map(String::from));
    for w in words {
        if seen.insert(w.clone()) {
            let v = random_unit(&mut rng, dim, Label::ALL.len());
            table.insert(&w, &v)?;
        }
    }
    Ok(table)
}
