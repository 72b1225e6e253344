mod common;

use std::collections::{BTreeMap, BTreeSet};

use artifactprobe::aflite::{
    apply_partition, build_representation, run_aflite, score_instances, AfliteParams, EvalRecord,
    Instance, PartitionManifest, Representation, RepresentationKind,
};
use artifactprobe::synthgen::{generate, SynthConfig};
use artifactprobe::{Label, Split};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::plant;

fn small_corpus() -> (
    artifactprobe::synthgen::SynthBundle,
    Vec<Instance<f64>>,
    Representation,
) {
    let cfg = SynthConfig {
        size_per_class: 200,
        embedding_dim: 8,
        plants: vec![
            plant(Label::Entailment, "possible", 0.5),
            plant(Label::Neutral, "cardiogenic shock", 0.5),
            plant(Label::Contradiction, "no treatment", 0.5),
        ],
        seed: 4,
        ..Default::default()
    };
    let bundle = generate(&cfg).unwrap();
    let repr = Representation {
        kind: RepresentationKind::HypothesisOnly,
        merged_entities: true,
    };
    let (instances, coverage) = build_representation(
        &bundle.dataset,
        &bundle.embeddings,
        Some(&bundle.gazetteer),
        repr,
    );
    assert_eq!(coverage, 1.0);
    (bundle, instances, repr)
}

fn params() -> AfliteParams {
    AfliteParams {
        ensemble_size: 8,
        train_size: 200,
        cutoff: 25,
        seed: 1,
        ..Default::default()
    }
}

#[test]
fn partition_covers_every_instance_once() {
    let (bundle, instances, repr) = small_corpus();
    let m = run_aflite(&instances, &params(), repr).unwrap();
    let easy: BTreeSet<&str> = m.easy_ids().collect();
    let difficult: BTreeSet<&str> = m.difficult_ids().collect();
    assert!(easy.is_disjoint(&difficult));
    let all: BTreeSet<&str> = bundle.dataset.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(&easy | &difficult, all);
    let removed: usize = m.iterations.iter().map(|r| r.removed).sum();
    assert_eq!(removed, easy.len());
    for r in &m.iterations {
        assert!(r.removed <= params().cutoff);
        assert!(r.retained_before >= params().train_size);
    }
    m.verify().unwrap();
    let parts = apply_partition(&bundle.dataset, &m).unwrap();
    assert_eq!(
        parts.easy.len() + parts.difficult.len(),
        bundle.dataset.len()
    );
    // Split tags survive in the manifest.
    for entry in m.easy.iter().chain(&m.difficult) {
        let ex = bundle.dataset.iter().find(|e| e.id == entry.id).unwrap();
        assert_eq!(ex.split, entry.split);
    }
}

#[test]
fn independent_of_threads_and_input_order() {
    let (_, instances, repr) = small_corpus();
    let base = run_aflite(&instances, &params(), repr).unwrap();
    let mut shuffled = instances.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.gen_range(0..=i));
    }
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let other = pool
            .install(|| run_aflite(&shuffled, &params(), repr))
            .unwrap();
        assert_eq!(other, base);
    }
    let reseeded = run_aflite(
        &instances,
        &AfliteParams {
            seed: 2,
            ..params()
        },
        repr,
    )
    .unwrap();
    assert_eq!(reseeded.params.seed, 2);
}

#[test]
fn strict_threshold_never_removes_more() {
    let (_, instances, repr) = small_corpus();
    let loose = run_aflite(
        &instances,
        &AfliteParams {
            threshold: 1.0,
            ..params()
        },
        repr,
    )
    .unwrap();
    let strict = run_aflite(
        &instances,
        &AfliteParams {
            threshold: 1.0,
            strict_threshold: true,
            ..params()
        },
        repr,
    )
    .unwrap();
    // Scores never exceed 1, so "> 1" removes nothing.
    assert!(strict.easy.is_empty());
    assert!(loose.easy.len() >= strict.easy.len());
}

#[test]
fn manifest_file_round_trip_and_tamper_detection() {
    let (bundle, instances, repr) = small_corpus();
    let m = run_aflite(&instances, &params(), repr).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    for ex in bundle.dataset.iter().take(50) {
        assert!(!text.contains(&ex.hypothesis));
    }
    assert_eq!(PartitionManifest::load(&path).unwrap(), m);

    let mut tampered = m.clone();
    if let Some(moved) = tampered.difficult.pop() {
        tampered.easy.push(moved);
    }
    assert!(tampered.verify().is_err());
    assert!(apply_partition(&bundle.dataset, &tampered).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Scores equal hits over appearances, recomputed by brute force.
    #[test]
    fn scores_match_direct_tally(
        records in prop::collection::vec(prop::collection::vec((0u8..20, any::<bool>()), 0..15), 1..8)
    ) {
        let universe: Vec<u8> = (0..20).collect();
        let recs: Vec<EvalRecord<u8>> = records
            .iter()
            .map(|r| EvalRecord {
                ids: r.iter().map(|(i, _)| *i).collect(),
                correct: r.iter().map(|(_, c)| *c).collect(),
            })
            .collect();
        let scores = score_instances(&universe, &recs);
        let mut tally: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
        for r in &records {
            for (id, ok) in r {
                let e = tally.entry(*id).or_default();
                e.0 += *ok as usize;
                e.1 += 1;
            }
        }
        for id in universe {
            let s = &scores[&id];
            let (hits, seen) = tally.get(&id).copied().unwrap_or((0, 0));
            prop_assert_eq!(s.correct, hits);
            prop_assert_eq!(s.appearances, seen);
            let want = if seen == 0 { 0.0 } else { hits as f64 / seen as f64 };
            prop_assert_eq!(s.score, want);
        }
    }
}

#[test]
fn premise_representation_differs() {
    let (bundle, hyp, _) = small_corpus();
    let repr = Representation {
        kind: RepresentationKind::PremisePlusHypothesis,
        merged_entities: true,
    };
    let (both, _) = build_representation(
        &bundle.dataset,
        &bundle.embeddings,
        Some(&bundle.gazetteer),
        repr,
    );
    assert_eq!(both.len(), hyp.len());
    assert!(both.iter().zip(&hyp).any(|(a, b)| a.vector != b.vector));
    assert!(both
        .iter()
        .all(|i| i.split == Split::Train || i.split == Split::Dev || i.split == Split::Test));
}
