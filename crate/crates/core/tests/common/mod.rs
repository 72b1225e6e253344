#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use artifactprobe::heuristics::HeuristicKind;
use artifactprobe::linmodels::{train_text_classifier, TextClassifierConfig};
use artifactprobe::synthgen::{KbPlantSpec, PlantLocation, PlantSpec, SynthConfig};
use artifactprobe::{Dataset, Label, Split};

pub fn plant(class: Label, token: &str, rate: f64) -> PlantSpec {
    PlantSpec {
        class,
        token: token.into(),
        rate,
        location: PlantLocation::Hypothesis,
    }
}

pub fn kb_plant(kind: HeuristicKind, rate: f64) -> KbPlantSpec {
    KbPlantSpec {
        kind,
        rate,
        target_class: kind.expected_class(),
    }
}

/// Five planted tokens per class at rates 0.2 to 0.4, some multi-word.
pub fn recovery_config() -> SynthConfig {
    let tokens = [
        (
            Label::Entailment,
            ["possible", "just", "high risk", "pressors", "responsive"],
        ),
        (
            Label::Neutral,
            [
                "cardiogenic shock",
                "pelvic pain",
                "joint pain",
                "delerium",
                "infection",
            ],
        ),
        (
            Label::Contradiction,
            [
                "no treatment",
                "normal breathing",
                "health",
                "denies pain",
                "stable",
            ],
        ),
    ];
    let rates = [0.2, 0.25, 0.3, 0.35, 0.4];
    let plants = tokens
        .iter()
        .flat_map(|(label, toks)| toks.iter().zip(rates).map(|(t, r)| plant(*label, t, r)))
        .collect();
    SynthConfig {
        size_per_class: 1500,
        plants,
        seed: 2024,
        ..Default::default()
    }
}

/// One planted token per class in half of the class's examples; the rest
/// carry only background tokens.
pub fn plant_vs_noise_config() -> SynthConfig {
    SynthConfig {
        size_per_class: 2000,
        embedding_dim: 16,
        plants: vec![
            plant(Label::Entailment, "possible", 0.5),
            plant(Label::Neutral, "cardiogenic shock", 0.5),
            plant(Label::Contradiction, "no treatment", 0.5),
        ],
        seed: 7,
        ..Default::default()
    }
}

pub fn heuristic_config() -> SynthConfig {
    SynthConfig {
        size_per_class: 1000,
        kb_plants: HeuristicKind::ALL
            .iter()
            .map(|&k| kb_plant(k, 0.1))
            .collect(),
        seed: 99,
        ..Default::default()
    }
}

/// Accuracy computed by direct counting.
pub fn accuracy(pred: &[Label], gold: &[Label]) -> f64 {
    assert_eq!(pred.len(), gold.len());
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    hits as f64 / gold.len() as f64
}

pub fn probe_config() -> TextClassifierConfig {
    TextClassifierConfig {
        seed: 1,
        ..Default::default()
    }
}

/// Trains a hypothesis-only probe on the train split and scores `eval`.
pub fn probe_accuracy(dataset: &Dataset, eval: &Dataset) -> f64 {
    let train = dataset.filter_split(Split::Train);
    let model = train_text_classifier::<f64>(&train, &probe_config()).unwrap();
    accuracy(&model.predict_labels(eval), &eval.labels())
}

pub fn held_out(dataset: &Dataset) -> Dataset {
    dataset.filter(|e| e.split != Split::Train)
}

/// Brute-force smoothed PMI over raw documents (presence counts).
///
/// Builds the dense token-by-class table, drops tokens whose total is below
/// `min_count`, adds `k` to each cell, normalizes to a joint distribution and
/// reads the marginals off that distribution.
pub fn pmi_oracle(
    docs: &[(usize, Vec<String>)],
    num_classes: usize,
    k: f64,
    min_count: u64,
) -> BTreeMap<String, Vec<f64>> {
    let mut table: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for (class, tokens) in docs {
        let unique: BTreeSet<&String> = tokens.iter().collect();
        for t in unique {
            table
                .entry(t.clone())
                .or_insert_with(|| vec![0; num_classes])[*class] += 1;
        }
    }
    table.retain(|_, row| row.iter().sum::<u64>() >= min_count);
    let total: f64 = table.values().flatten().map(|&c| c as f64 + k).sum();
    let joint: BTreeMap<&String, Vec<f64>> = table
        .iter()
        .map(|(t, row)| (t, row.iter().map(|&c| (c as f64 + k) / total).collect()))
        .collect();
    let mut class_marginal = vec![0.0; num_classes];
    for row in joint.values() {
        for (m, p) in class_marginal.iter_mut().zip(row) {
            *m += p;
        }
    }
    joint
        .into_iter()
        .map(|(t, row)| {
            let token_marginal: f64 = row.iter().sum();
            let pmi = row
                .iter()
                .zip(&class_marginal)
                .map(|(p, m)| (p / (token_marginal * m)).log2())
                .collect();
            (t.clone(), pmi)
        })
        .collect()
}
