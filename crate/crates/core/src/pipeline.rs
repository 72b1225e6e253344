//! Builds report sections from module outputs.

use crate::aflite::{
    apply_partition, build_representation, run_aflite, AfliteParams, PartitionManifest,
    Representation, RepresentationKind,
};
use crate::corpus::{Dataset, Label, Split};
use crate::embedstore::EmbeddingTable;
use crate::error::{Error, Result};
use crate::heuristics::{heuristic_report, KnowledgeBase};
use crate::lexstats::{compute_pmi, length_stats, PmiConfig};
use crate::linmodels::{
    evaluate, train_text_classifier, MajorityBaseline, Metrics, TextClassifier,
    TextClassifierConfig,
};
use crate::report::{
    ConfusionSection, ExampleRef, HeuristicRow, LengthRow, ManifestSummary, PartitionRow,
    PartitionSection, PmiRow, PmiSection, ScoreRow,
};
use crate::textproc::Gazetteer;

pub const MAJORITY: &str = "majority";
pub const PROBE_HYPOTHESIS: &str = "probe (hypothesis only)";
pub const PROBE_PREMISE: &str = "probe (premise + hypothesis)";

pub fn representation_name(kind: RepresentationKind) -> &'static str {
    match kind {
        RepresentationKind::HypothesisOnly => "hypothesis only",
        RepresentationKind::PremisePlusHypothesis => "premise + hypothesis",
    }
}

fn metrics_on(predict: impl Fn(&Dataset) -> Vec<Label>, eval: &Dataset) -> Result<Option<Metrics>> {
    if eval.is_empty() {
        return Ok(None);
    }
    evaluate(&predict(eval), &eval.labels(), &Label::ALL).map(Some)
}

fn f1_on(predict: impl Fn(&Dataset) -> Vec<Label>, eval: &Dataset) -> Result<Option<f64>> {
    Ok(metrics_on(predict, eval)?.map(|m| m.micro_f1))
}

fn train_split(dataset: &Dataset) -> Result<Dataset> {
    let train = dataset.filter_split(Split::Train);
    if train.is_empty() {
        return Err(Error::data("no training examples"));
    }
    Ok(train)
}

fn probe(
    train: &Dataset,
    config: &TextClassifierConfig,
    use_premise: bool,
) -> Result<TextClassifier<f64>> {
    let config = TextClassifierConfig {
        use_premise,
        ..config.clone()
    };
    train_text_classifier(train, &config)
}

/// Majority and probe micro-F1 on dev and test, plus the hypothesis-only
/// probe's confusion matrix on test (dev when test is empty).
pub fn baseline_sections(
    dataset: &Dataset,
    config: &TextClassifierConfig,
) -> Result<(Vec<ScoreRow>, Option<ConfusionSection>)> {
    let train = train_split(dataset)?;
    let dev = dataset.filter_split(Split::Dev);
    let test = dataset.filter_split(Split::Test);
    let majority = MajorityBaseline::fit(&train)?;
    let hyp = probe(&train, config, false)?;
    let with_premise = probe(&train, config, true)?;

    let majority_pred = |d: &Dataset| majority.predict_all(d.len());
    let hyp_pred = |d: &Dataset| hyp.predict_labels(d);
    let prem_pred = |d: &Dataset| with_premise.predict_labels(d);
    let rows = vec![
        ScoreRow {
            model: MAJORITY.into(),
            dev: f1_on(majority_pred, &dev)?,
            test: f1_on(majority_pred, &test)?,
        },
        ScoreRow {
            model: PROBE_HYPOTHESIS.into(),
            dev: f1_on(hyp_pred, &dev)?,
            test: f1_on(hyp_pred, &test)?,
        },
        ScoreRow {
            model: PROBE_PREMISE.into(),
            dev: f1_on(prem_pred, &dev)?,
            test: f1_on(prem_pred, &test)?,
        },
    ];
    let (eval_name, eval) = if test.is_empty() {
        ("dev", &dev)
    } else {
        ("test", &test)
    };
    let confusion = metrics_on(hyp_pred, eval)?.map(|m| ConfusionSection {
        model: PROBE_HYPOTHESIS.into(),
        eval: eval_name.into(),
        classes: m.classes,
        matrix: m.confusion,
        precision: m.precision,
        recall: m.recall,
        micro_f1: m.micro_f1,
    });
    Ok((rows, confusion))
}

pub fn pmi_section(
    dataset: &Dataset,
    config: &PmiConfig,
    gazetteer: Option<&Gazetteer>,
    top_k: usize,
) -> Result<PmiSection> {
    let table = compute_pmi::<f64>(dataset, config, gazetteer)?;
    let mut columns = Vec::new();
    for label in Label::ALL {
        let ranked = table.top_tokens(label.as_str(), top_k)?;
        let rows = ranked
            .into_iter()
            .map(|r| PmiRow {
                token: r.token,
                pmi: r.pmi,
                coverage: r.class_doc_fraction,
            })
            .collect();
        columns.push((label, rows));
    }
    Ok(PmiSection {
        merged: table.merged(),
        smoothing: table.smoothing(),
        min_count: table.min_count(),
        top_k,
        columns,
    })
}

/// Separate-token lengths always; merged-entity lengths when a gazetteer is given.
pub fn length_rows(dataset: &Dataset, gazetteer: Option<&Gazetteer>) -> Result<Vec<LengthRow>> {
    let mut modes = vec![("separate", false)];
    if gazetteer.is_some() {
        modes.push(("merged", true));
    }
    modes
        .into_iter()
        .map(|(name, merged)| {
            let stats = length_stats(dataset, merged, gazetteer)?;
            Ok(LengthRow {
                mode: name.into(),
                per_class: stats
                    .per_class
                    .iter()
                    .map(|c| c.map(|c| (c.mean, c.median)))
                    .collect(),
            })
        })
        .collect()
}

/// One row per heuristic. Example text is attached only when `include_text`.
pub fn heuristic_rows(
    dataset: &Dataset,
    kb: &KnowledgeBase,
    include_text: bool,
    examples_per_kind: usize,
) -> Vec<HeuristicRow> {
    let report = heuristic_report(dataset, kb);
    report
        .results
        .into_iter()
        .map(|r| {
            let examples = r
                .satisfying_ids
                .iter()
                .take(examples_per_kind)
                .map(|id| {
                    let ex = dataset.iter().find(|e| &e.id == id);
                    ExampleRef {
                        id: id.clone(),
                        premise: ex.filter(|_| include_text).map(|e| e.premise.clone()),
                        hypothesis: ex.filter(|_| include_text).map(|e| e.hypothesis.clone()),
                    }
                })
                .collect();
            HeuristicRow {
                kind: r.kind,
                satisfying: r.satisfying,
                per_class: r.per_class,
                chi_square: r.test.map(|t| t.stat),
                p_value: r.test.map(|t| t.p_value),
                top_class: r.top_class,
                top_class_share: r.top_class_share,
                examples,
            }
        })
        .collect()
}

/// Embeds every example and runs the filter over the combined splits.
/// Entities are merged whenever a gazetteer is supplied.
pub fn partition(
    dataset: &Dataset,
    table: &EmbeddingTable<f64>,
    gazetteer: Option<&Gazetteer>,
    params: &AfliteParams,
    kind: RepresentationKind,
) -> Result<PartitionManifest> {
    let representation = Representation {
        kind,
        merged_entities: gazetteer.is_some(),
    };
    let (instances, _) = build_representation(dataset, table, gazetteer, representation);
    run_aflite(&instances, params, representation)
}

/// Trains on the original training split and scores full, easy and
/// difficult dev and test subsets for each manifest.
pub fn partition_section(
    dataset: &Dataset,
    manifests: &[PartitionManifest],
    config: &TextClassifierConfig,
) -> Result<PartitionSection> {
    let train = train_split(dataset)?;
    let majority = MajorityBaseline::fit(&train)?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for manifest in manifests {
        let kind = manifest.representation.kind;
        let name = representation_name(kind);
        let parts = apply_partition(dataset, manifest)?;
        summaries.push(ManifestSummary {
            representation: name.into(),
            easy: manifest.easy.len(),
            difficult: manifest.difficult.len(),
            iterations: manifest.iterations.len(),
            checksum: manifest.checksum.clone(),
        });
        let clf = probe(
            &train,
            config,
            kind == RepresentationKind::PremisePlusHypothesis,
        )?;
        let majority_pred = |d: &Dataset| majority.predict_all(d.len());
        let probe_pred = |d: &Dataset| clf.predict_labels(d);
        for (model, predict) in [
            (MAJORITY, &majority_pred as &dyn Fn(&Dataset) -> Vec<Label>),
            ("probe", &probe_pred),
        ] {
            for split in [Split::Dev, Split::Test] {
                rows.push(PartitionRow {
                    representation: name.into(),
                    model: model.into(),
                    eval: split.to_string(),
                    full: f1_on(predict, &dataset.filter_split(split))?,
                    easy: f1_on(predict, &parts.easy.filter_split(split))?,
                    difficult: f1_on(predict, &parts.difficult.filter_split(split))?,
                });
            }
        }
    }
    Ok(PartitionSection {
        manifests: summaries,
        rows,
    })
}
