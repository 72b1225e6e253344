//! Bag-of-n-grams text classifier: hashed feature embeddings averaged into
//! a hidden vector, followed by a full softmax over the classes.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hashing::bucket_of;
use crate::corpus::{Dataset, Label, PairExample};
use crate::error::{Error, Result};
use crate::scalar::{argmax, dot, softmax_into, Scalar};
use crate::seeding::rng_for;
use crate::textproc::{extract_features, tokenize, TokenSeq};

/// Token placed between premise and hypothesis when both are used.
pub const PREMISE_SEPARATOR: &str = "</s>";

const FORMAT_NAME: &str = "artifactprobe.text-classifier";
const FORMAT_VERSION: u32 = 1;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextClassifierConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub max_n: usize,
    pub bucket_count: usize,
    pub seed: u64,
    pub use_premise: bool,
}

impl Default for TextClassifierConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 5,
            learning_rate: 0.1,
            max_n: 2,
            bucket_count: 2_000_000,
            seed: 0,
            use_premise: false,
        }
    }
}

impl TextClassifierConfig {
    fn check(&self) -> Result<()> {
        if self.dim == 0 || self.bucket_count == 0 || self.max_n == 0 {
            return Err(Error::invalid(
                "dim, bucket_count and max_n must be positive",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(
                "learning rate must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Tokens the classifier sees for one example (unmerged, lowercase).
pub fn example_tokens(example: &PairExample, use_premise: bool) -> TokenSeq {
    let hyp = tokenize(&example.hypothesis);
    if !use_premise {
        return hyp;
    }
    let mut seq = tokenize(&example.premise);
    seq.push(PREMISE_SEPARATOR);
    seq.extend(&hyp);
    seq
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<S: Scalar = f64> {
    pub label: Label,
    pub probabilities: Vec<S>,
}

/// Input rows live in a sparse map: only buckets seen in training are
/// stored, and any other bucket is regenerated from the seed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct TextClassifier<S: Scalar = f64> {
    config: TextClassifierConfig,
    classes: Vec<Label>,
    rows: HashMap<usize, Vec<S>>,
    output: Vec<S>,
}

impl<S: Scalar> TextClassifier<S> {
    pub fn new(config: TextClassifierConfig, classes: Vec<Label>) -> Result<Self> {
        config.check()?;
        if classes.is_empty() {
            return Err(Error::invalid("class list is empty"));
        }
        let output = vec![S::zero(); classes.len() * config.dim];
        Ok(Self {
            config,
            classes,
            rows: HashMap::new(),
            output,
        })
    }

    pub fn config(&self) -> &TextClassifierConfig {
        &self.config
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    /// Number of input rows materialized by training.
    pub fn stored_rows(&self) -> usize {
        self.rows.len()
    }

    fn initial_row(&self, bucket: usize) -> Vec<S> {
        let mut rng = rng_for(self.config.seed, &[STREAM_INIT, bucket as u64]);
        let bound = 1.0 / self.config.dim as f64;
        (0..self.config.dim)
            .map(|_| S::lit(rng.gen_range(-bound..bound)))
            .collect()
    }

    fn buckets(&self, example: &PairExample) -> Vec<usize> {
        let seq = example_tokens(example, self.config.use_premise);
        extract_features(&seq, self.config.max_n)
            .expect("max_n validated")
            .iter()
            .map(|f| bucket_of(f, self.config.bucket_count))
            .collect()
    }

    fn hidden(&self, buckets: &[usize]) -> Vec<S> {
        let mut h = vec![S::zero(); self.config.dim];
        if buckets.is_empty() {
            return h;
        }
        for &b in buckets {
            let fresh;
            let row = match self.rows.get(&b) {
                Some(r) => r,
                None => {
                    fresh = self.initial_row(b);
                    &fresh
                }
            };
            for (x, &r) in h.iter_mut().zip(row) {
                *x = *x + r;
            }
        }
        let n = S::from_usize_lossy(buckets.len());
        h.iter_mut().for_each(|x| *x = *x / n);
        h
    }

    fn probabilities(&self, hidden: &[S]) -> Vec<S> {
        let dim = self.config.dim;
        let scores: Vec<S> = self
            .output
            .chunks_exact(dim)
            .map(|w| dot(w, hidden))
            .collect();
        let mut probs = vec![S::zero(); scores.len()];
        softmax_into(&scores, &mut probs);
        probs
    }

    /// Class probabilities and arg-max label (earliest class wins ties).
    pub fn predict(&self, example: &PairExample) -> Prediction<S> {
        let hidden = self.hidden(&self.buckets(example));
        let probabilities = self.probabilities(&hidden);
        let label = self.classes[argmax(&probabilities)];
        Prediction {
            label,
            probabilities,
        }
    }

    pub fn predict_labels(&self, dataset: &Dataset) -> Vec<Label> {
        dataset.iter().map(|e| self.predict(e).label).collect()
    }

    fn sgd_step(&mut self, buckets: &[usize], target: usize, lr: S) {
        let dim = self.config.dim;
        if buckets.is_empty() {
            return;
        }
        for &b in buckets {
            if !self.rows.contains_key(&b) {
                let row = self.initial_row(b);
                self.rows.insert(b, row);
            }
        }
        let hidden = self.hidden(buckets);
        let probs = self.probabilities(&hidden);
        let mut grad = vec![S::zero(); dim];
        for (c, (w, &p)) in self.output.chunks_exact_mut(dim).zip(&probs).enumerate() {
            let truth = if c == target { S::one() } else { S::zero() };
            let alpha = lr * (truth - p);
            for ((g, wi), &h) in grad.iter_mut().zip(w.iter_mut()).zip(&hidden) {
                *g = *g + alpha * *wi;
                *wi = *wi + alpha * h;
            }
        }
        let share = S::one() / S::from_usize_lossy(buckets.len());
        for &b in buckets {
            let row = self.rows.get_mut(&b).expect("row materialized above");
            for (r, &g) in row.iter_mut().zip(&grad) {
                *r = *r + g * share;
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_dump())?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_dump(serde_json::from_str(&text)?)
    }

    fn to_dump(&self) -> ModelDump<S> {
        let mut rows: Vec<(usize, Vec<S>)> =
            self.rows.iter().map(|(&b, r)| (b, r.clone())).collect();
        rows.sort_by_key(|(b, _)| *b);
        ModelDump {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            config: self.config.clone(),
            classes: self.classes.clone(),
            output: self.output.clone(),
            rows,
        }
    }

    fn from_dump(dump: ModelDump<S>) -> Result<Self> {
        if dump.format != FORMAT_NAME || dump.version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format {} v{}",
                dump.format, dump.version
            )));
        }
        let mut model = Self::new(dump.config, dump.classes)?;
        let dim = model.config.dim;
        if dump.output.len() != model.output.len() || dump.rows.iter().any(|(_, r)| r.len() != dim)
        {
            return Err(Error::data("model weights do not match configured shape"));
        }
        model.output = dump.output;
        model.rows = dump.rows.into_iter().collect();
        Ok(model)
    }
}

/// On-disk layout of a trained classifier (JSON).
#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct ModelDump<S: Scalar> {
    format: String,
    version: u32,
    config: TextClassifierConfig,
    classes: Vec<Label>,
    output: Vec<S>,
    rows: Vec<(usize, Vec<S>)>,
}

/// Trains with SGD; the learning rate decays linearly to zero over all
/// updates and examples are reshuffled each epoch by the seeded generator.
pub fn train_text_classifier<S: Scalar>(
    train: &Dataset,
    config: &TextClassifierConfig,
) -> Result<TextClassifier<S>> {
    if train.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    let mut model = TextClassifier::new(config.clone(), Label::ALL.to_vec())?;
    let examples: Vec<(Vec<usize>, usize)> = train
        .iter()
        .map(|e| (model.buckets(e), e.label.index()))
        .collect();
    let total = (config.epochs * examples.len()) as f64;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut rng = rng_for(config.seed, &[STREAM_SHUFFLE, epoch as u64]);
        order.shuffle(&mut rng);
        for &i in &order {
            let progress = step as f64 / total;
            let lr = S::lit(config.learning_rate * (1.0 - progress));
            let (buckets, target) = &examples[i];
            model.sgd_step(buckets, *target, lr);
            step += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn ex(id: usize, premise: &str, hypothesis: &str, label: Label) -> PairExample {
        PairExample {
            id: format!("e{id}"),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
            split: Split::Train,
        }
    }

    fn small_config() -> TextClassifierConfig {
        TextClassifierConfig {
            dim: 10,
            bucket_count: 1000,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn untrained_model_is_uniform() {
        let m = TextClassifier::<f64>::new(small_config(), Label::ALL.to_vec()).unwrap();
        let p = m.predict(&ex(0, "", "anything at all", Label::Neutral));
        assert_eq!(p.label, Label::Entailment);
        for &x in &p.probabilities {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn epochs_zero_still_predicts() {
        let d = Dataset::new(vec![ex(0, "", "yes", Label::Neutral)]).unwrap();
        let cfg = TextClassifierConfig {
            epochs: 0,
            ..small_config()
        };
        let m = train_text_classifier::<f64>(&d, &cfg).unwrap();
        assert_eq!(m.predict(&d.examples()[0]).label, Label::Entailment);
    }

    #[test]
    fn premise_tokens_are_prefixed() {
        let e = ex(0, "Fever.", "No pain", Label::Neutral);
        assert_eq!(example_tokens(&e, false).tokens(), ["no", "pain"]);
        assert_eq!(
            example_tokens(&e, true).tokens(),
            ["fever", ".", PREMISE_SEPARATOR, "no", "pain"]
        );
    }

    #[test]
    fn save_and_load_preserve_predictions() {
        let d = Dataset::new(vec![
            ex(0, "", "yes indeed", Label::Entailment),
            ex(1, "", "no way", Label::Contradiction),
        ])
        .unwrap();
        let m = train_text_classifier::<f64>(&d, &small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = TextClassifier::<f64>::load(&path).unwrap();
        assert_eq!(back, m);
        let probe = ex(9, "", "unseen words here", Label::Neutral);
        assert_eq!(back.predict(&probe), m.predict(&probe));
    }

    #[test]
    fn rejects_bad_config() {
        let d = Dataset::new(vec![ex(0, "", "x", Label::Neutral)]).unwrap();
        let cfg = TextClassifierConfig {
            dim: 0,
            ..small_config()
        };
        assert!(train_text_classifier::<f64>(&d, &cfg).is_err());
        assert!(train_text_classifier::<f64>(&Dataset::empty(), &small_config()).is_err());
    }
}
