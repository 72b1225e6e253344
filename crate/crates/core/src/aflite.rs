//! Adversarial filtering with ensembles of linear classifiers.
//!
//! Each round trains `n` logistic-regression models on independent random
//! subsets of size `m` of the retained instances and scores every instance
//! by the fraction of held-out evaluations it was classified correctly in.
//! Up to `k` instances scoring at least `τ` move to the easy partition.
//! Filtering stops when fewer than `k` instances are removed or fewer than
//! `m` remain; whatever remains is the difficult partition.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, Label, PairExample, Split};
use crate::embedstore::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linmodels::{train_logreg, LogRegConfig};
use crate::scalar::Scalar;
use crate::seeding::rng_for;
use crate::textproc::{merge_entities, tokenize, Gazetteer, TokenSeq};

pub const MANIFEST_SCHEMA: &str = "artifactprobe.partition-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AfliteParams {
    pub ensemble_size: usize,
    pub train_size: usize,
    pub cutoff: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Require `score > τ` instead of `score ≥ τ`.
    pub strict_threshold: bool,
    pub logreg: LogRegConfig,
}

impl Default for AfliteParams {
    fn default() -> Self {
        Self {
            ensemble_size: 64,
            train_size: 5620,
            cutoff: 500,
            threshold: 0.75,
            seed: 0,
            strict_threshold: false,
            logreg: LogRegConfig {
                max_iters: 200,
                ..LogRegConfig::default()
            },
        }
    }
}

impl AfliteParams {
    pub fn check(&self) -> Result<()> {
        if self.ensemble_size < 1 || self.train_size < 1 || self.cutoff < 1 {
            return Err(Error::invalid(
                "ensemble size, train size and cutoff must be positive",
            ));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    HypothesisOnly,
    PremisePlusHypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub kind: RepresentationKind,
    pub merged_entities: bool,
}

impl Default for Representation {
    fn default() -> Self {
        Self {
            kind: RepresentationKind::HypothesisOnly,
            merged_entities: true,
        }
    }
}

/// One example's averaged embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S: Scalar = f64> {
    pub id: String,
    pub split: Split,
    pub label: Label,
    pub vector: Vec<S>,
}

fn merged(text: &str, gazetteer: Option<&Gazetteer>) -> TokenSeq {
    let seq = tokenize(text);
    match gazetteer {
        Some(g) => merge_entities(&seq, g),
        None => seq,
    }
}

/// Embeds every example. Returns the instances and the mean token coverage.
pub fn build_representation<S: Scalar>(
    dataset: &Dataset,
    table: &EmbeddingTable<S>,
    gazetteer: Option<&Gazetteer>,
    representation: Representation,
) -> (Vec<Instance<S>>, f64) {
    let gazetteer = gazetteer.filter(|_| representation.merged_entities);
    let embed = |ex: &PairExample| {
        let mut seq = TokenSeq::default();
        if representation.kind == RepresentationKind::PremisePlusHypothesis {
            seq.extend(&merged(&ex.premise, gazetteer));
        }
        seq.extend(&merged(&ex.hypothesis, gazetteer));
        table.embed_tokens(&seq)
    };
    let mut coverage = 0.0;
    let instances: Vec<Instance<S>> = dataset
        .iter()
        .map(|ex| {
            let e = embed(ex);
            coverage += e.coverage;
            Instance {
                id: ex.id.clone(),
                split: ex.split,
                label: ex.label,
                vector: e.vector,
            }
        })
        .collect();
    let mean = coverage / instances.len().max(1) as f64;
    (instances, mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceScore {
    pub correct: usize,
    pub appearances: usize,
    pub score: f64,
}

impl InstanceScore {
    fn new(correct: usize, appearances: usize) -> Self {
        let score = if appearances == 0 {
            0.0
        } else {
            correct as f64 / appearances as f64
        };
        Self {
            correct,
            appearances,
            score,
        }
    }
}

/// What one ensemble member saw in evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalRecord<K> {
    pub ids: Vec<K>,
    pub correct: Vec<bool>,
}

/// Aggregates per-model evaluations. Every key in `universe` gets a score;
/// keys never evaluated score 0.
pub fn score_instances<K: Ord + Clone>(
    universe: &[K],
    records: &[EvalRecord<K>],
) -> BTreeMap<K, InstanceScore> {
    let mut tallies: BTreeMap<K, (usize, usize)> =
        universe.iter().map(|k| (k.clone(), (0, 0))).collect();
    for rec in records {
        for (id, &ok) in rec.ids.iter().zip(&rec.correct) {
            let t = tallies.entry(id.clone()).or_insert((0, 0));
            t.1 += 1;
            if ok {
                t.0 += 1;
            }
        }
    }
    tallies
        .into_iter()
        .map(|(k, (c, a))| (k, InstanceScore::new(c, a)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub retained_before: usize,
    pub removed: usize,
}

/// Partition record: ids, split tags and run parameters only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub schema: String,
    pub version: u32,
    pub params: AfliteParams,
    pub representation: Representation,
    pub iterations: Vec<IterationRecord>,
    pub easy: Vec<ManifestEntry>,
    pub difficult: Vec<ManifestEntry>,
    pub checksum: String,
}

impl PartitionManifest {
    pub fn new(
        params: AfliteParams,
        representation: Representation,
        iterations: Vec<IterationRecord>,
        mut easy: Vec<ManifestEntry>,
        mut difficult: Vec<ManifestEntry>,
    ) -> Self {
        easy.sort();
        difficult.sort();
        let mut m = Self {
            schema: MANIFEST_SCHEMA.into(),
            version: MANIFEST_VERSION,
            params,
            representation,
            iterations,
            easy,
            difficult,
            checksum: String::new(),
        };
        m.checksum = manifest_checksum(&m);
        m
    }

    pub fn easy_ids(&self) -> impl Iterator<Item = &str> {
        self.easy.iter().map(|e| e.id.as_str())
    }

    pub fn difficult_ids(&self) -> impl Iterator<Item = &str> {
        self.difficult.iter().map(|e| e.id.as_str())
    }

    pub fn verify(&self) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA || self.version != MANIFEST_VERSION {
            return Err(Error::data(format!(
                "unsupported manifest {} v{}",
                self.schema, self.version
            )));
        }
        let expected = manifest_checksum(self);
        if expected != self.checksum {
            return Err(Error::data(format!(
                "checksum mismatch: manifest says {}, ids hash to {expected}",
                self.checksum
            )));
        }
        let easy: HashSet<&str> = self.easy_ids().collect();
        if let Some(both) = self.difficult_ids().find(|id| easy.contains(id)) {
            return Err(Error::data(format!("id {both} is in both partitions")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Reads and verifies a manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.verify()?;
        Ok(m)
    }
}

/// SHA-256 (lowercase hex) of the sorted easy ids joined by `\n`, then
/// `\n--\n`, then the sorted difficult ids joined by `\n`.
pub fn manifest_checksum(m: &PartitionManifest) -> String {
    let sorted = |it: &mut dyn Iterator<Item = &str>| {
        let mut v: Vec<&str> = it.collect();
        v.sort_unstable();
        v.join("\n")
    };
    let mut hasher = Sha256::new();
    hasher.update(sorted(&mut m.easy_ids()).as_bytes());
    hasher.update(b"\n--\n");
    hasher.update(sorted(&mut m.difficult_ids()).as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub easy: Dataset,
    pub difficult: Dataset,
}

/// Splits a dataset by a verified manifest; examples keep their own split tags.
pub fn apply_partition(dataset: &Dataset, manifest: &PartitionManifest) -> Result<Partition> {
    manifest.verify()?;
    let known: HashSet<&str> = dataset.iter().map(|e| e.id.as_str()).collect();
    let easy: HashSet<&str> = manifest.easy_ids().collect();
    let difficult: HashSet<&str> = manifest.difficult_ids().collect();
    if let Some(id) = easy
        .iter()
        .chain(&difficult)
        .find(|id| !known.contains(**id))
    {
        return Err(Error::data(format!("unknown id {id} in manifest")));
    }
    if let Some(ex) = dataset
        .iter()
        .find(|e| !easy.contains(e.id.as_str()) && !difficult.contains(e.id.as_str()))
    {
        return Err(Error::data(format!(
            "id {} is not covered by the manifest",
            ex.id
        )));
    }
    Ok(Partition {
        easy: dataset.filter(|e| easy.contains(e.id.as_str())),
        difficult: dataset.filter(|e| difficult.contains(e.id.as_str())),
    })
}

/// Stream tag separating ensemble sampling from other consumers of the seed.
const STREAM_ENSEMBLE: u64 = 0xAF;

fn ensemble_member<S: Scalar>(
    instances: &[Instance<S>],
    retained: &[usize],
    params: &AfliteParams,
    round: usize,
    member: usize,
) -> Result<EvalRecord<usize>> {
    let mut rng = rng_for(params.seed, &[STREAM_ENSEMBLE, round as u64, member as u64]);
    let mut in_train = vec![false; retained.len()];
    for pos in sample(&mut rng, retained.len(), params.train_size).into_iter() {
        in_train[pos] = true;
    }
    let mut xs = Vec::with_capacity(params.train_size);
    let mut ys = Vec::with_capacity(params.train_size);
    for (pos, &idx) in retained.iter().enumerate() {
        if in_train[pos] {
            xs.push(instances[idx].vector.clone());
            ys.push(instances[idx].label);
        }
    }
    let model = train_logreg(&xs, &ys, &params.logreg)?;
    let mut rec = EvalRecord::default();
    for (pos, &idx) in retained.iter().enumerate() {
        if !in_train[pos] {
            let inst = &instances[idx];
            rec.ids.push(idx);
            rec.correct.push(model.predict(&inst.vector) == inst.label);
        }
    }
    Ok(rec)
}

/// Runs the filter. Output is independent of input order and of the rayon
/// thread count.
pub fn run_aflite<S: Scalar>(
    instances: &[Instance<S>],
    params: &AfliteParams,
    representation: Representation,
) -> Result<PartitionManifest> {
    params.check()?;
    if instances.is_empty() {
        return Err(Error::data("no instances to filter"));
    }
    let dim = instances[0].vector.len();
    if let Some(bad) = instances.iter().find(|i| i.vector.len() != dim) {
        return Err(Error::invalid(format!(
            "instance {} has dimension {}, expected {dim}",
            bad.id,
            bad.vector.len()
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = instances.iter().find(|i| !seen.insert(i.id.as_str())) {
        return Err(Error::data(format!("duplicate id {}", dup.id)));
    }

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| instances[a].id.cmp(&instances[b].id));
    let sorted: Vec<Instance<S>> = order.iter().map(|&i| instances[i].clone()).collect();

    // Retained positions stay sorted by id, so position order is id order.
    let mut retained: Vec<usize> = (0..sorted.len()).collect();
    let mut easy: Vec<usize> = Vec::new();
    let mut iterations = Vec::new();
    let mut round = 0usize;
    while retained.len() >= params.train_size {
        let records = (0..params.ensemble_size)
            .into_par_iter()
            .map(|member| ensemble_member(&sorted, &retained, params, round, member))
            .collect::<Result<Vec<_>>>()?;
        let scores = score_instances(&retained, &records);

        let passes = |s: f64| {
            if params.strict_threshold {
                s > params.threshold
            } else {
                s >= params.threshold
            }
        };
        let mut candidates: Vec<(usize, f64)> = scores
            .iter()
            .filter(|(_, s)| passes(s.score))
            .map(|(&idx, s)| (idx, s.score))
            .collect();
        // Descending score, then ascending id (index order is id order).
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        candidates.truncate(params.cutoff);

        let removed: HashSet<usize> = candidates.iter().map(|&(i, _)| i).collect();
        iterations.push(IterationRecord {
            retained_before: retained.len(),
            removed: removed.len(),
        });
        easy.extend(removed.iter().copied());
        retained.retain(|i| !removed.contains(i));
        round += 1;
        if removed.len() < params.cutoff {
            break;
        }
    }

    let entry = |&i: &usize| ManifestEntry {
        id: sorted[i].id.clone(),
        split: sorted[i].split,
    };
    let manifest = PartitionManifest::new(
        params.clone(),
        representation,
        iterations,
        easy.iter().map(entry).collect(),
        retained.iter().map(entry).collect(),
    );
    debug_assert_eq!(
        manifest.easy.len() + manifest.difficult.len(),
        instances.len()
    );
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            split: Split::Train,
        }
    }

    fn toy_manifest() -> PartitionManifest {
        PartitionManifest::new(
            AfliteParams::default(),
            Representation::default(),
            vec![],
            vec![entry("e2"), entry("e1")],
            vec![entry("d1")],
        )
    }

    #[test]
    fn golden_checksum() {
        // sha256(b"e1\ne2\n--\nd1"), computed with Python's hashlib.
        assert_eq!(
            toy_manifest().checksum,
            "29188080bb005249cd50fdf7cdf2c2611ed6ef6ce1e6c6056e2d492a397e57f9"
        );
    }

    #[test]
    fn checksum_ignores_stored_order_but_not_membership() {
        let m = toy_manifest();
        let mut shuffled = m.clone();
        shuffled.easy.reverse();
        assert_eq!(manifest_checksum(&shuffled), m.checksum);

        let mut moved = m.clone();
        let e = moved.easy.pop().unwrap();
        moved.difficult.push(e);
        assert_ne!(manifest_checksum(&moved), m.checksum);
    }

    #[test]
    fn scores() {
        let recs = vec![
            EvalRecord {
                ids: vec!["a", "b"],
                correct: vec![true, false],
            },
            EvalRecord {
                ids: vec!["a"],
                correct: vec![true],
            },
            EvalRecord {
                ids: vec!["a"],
                correct: vec![false],
            },
            EvalRecord {
                ids: vec!["a"],
                correct: vec![true],
            },
        ];
        let s = score_instances(&["a", "b", "c"], &recs);
        assert_eq!(s["a"].score, 0.75);
        assert_eq!(s["b"].score, 0.0);
        assert_eq!(s["c"].appearances, 0);
        assert_eq!(s["c"].score, 0.0);

        let all: Vec<EvalRecord<&str>> = (0..64)
            .map(|_| EvalRecord {
                ids: vec!["z"],
                correct: vec![true],
            })
            .collect();
        assert_eq!(score_instances(&["z"], &all)["z"].score, 1.0);
    }

    #[test]
    fn too_few_instances_means_no_iterations() {
        let instances: Vec<Instance<f64>> = (0..100)
            .map(|i| Instance {
                id: format!("i{i:03}"),
                split: Split::Dev,
                label: Label::ALL[i % 3],
                vector: vec![i as f64, 1.0],
            })
            .collect();
        let m = run_aflite(
            &instances,
            &AfliteParams::default(),
            Representation::default(),
        )
        .unwrap();
        assert!(m.iterations.is_empty());
        assert!(m.easy.is_empty());
        assert_eq!(m.difficult.len(), 100);
        assert_eq!(m.difficult[0].split, Split::Dev);
    }

    #[test]
    fn rejects_bad_input() {
        let p = AfliteParams::default();
        assert!(run_aflite::<f64>(&[], &p, Representation::default()).is_err());
        let inst = |id: &str, v: Vec<f64>| Instance {
            id: id.into(),
            split: Split::Train,
            label: Label::Neutral,
            vector: v,
        };
        let ragged = [inst("a", vec![1.0]), inst("b", vec![1.0, 2.0])];
        assert!(run_aflite(&ragged, &p, Representation::default()).is_err());
        let bad = AfliteParams {
            threshold: 0.0,
            ..p
        };
        assert!(run_aflite(&[inst("a", vec![1.0])], &bad, Representation::default()).is_err());
    }

    #[test]
    fn apply_partition_checks() {
        let d = Dataset::new(
            ["e1", "e2", "d1"]
                .iter()
                .map(|id| PairExample {
                    id: id.to_string(),
                    premise: String::new(),
                    hypothesis: "h".into(),
                    label: Label::Neutral,
                    split: if *id == "d1" {
                        Split::Dev
                    } else {
                        Split::Train
                    },
                })
                .collect(),
        )
        .unwrap();
        let m = toy_manifest();
        let p = apply_partition(&d, &m).unwrap();
        assert_eq!(p.easy.len() + p.difficult.len(), d.len());
        assert_eq!(p.difficult.examples()[0].split, Split::Dev);

        let mut tampered = m.clone();
        tampered.checksum = "00".into();
        assert!(apply_partition(&d, &tampered)
            .unwrap_err()
            .to_string()
            .contains("checksum"));

        let extra = PartitionManifest::new(
            AfliteParams::default(),
            Representation::default(),
            vec![],
            vec![entry("e1"), entry("e2"), entry("ghost")],
            vec![entry("d1")],
        );
        assert!(apply_partition(&d, &extra)
            .unwrap_err()
            .to_string()
            .contains("unknown id"));
    }

    #[test]
    fn manifest_file_round_trip_has_no_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = toy_manifest();
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("hypothesis\":"));
        assert_eq!(PartitionManifest::load(&path).unwrap(), m);
    }
}
