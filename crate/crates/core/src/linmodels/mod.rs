//! Linear classifiers, the majority baseline and evaluation metrics.

mod hashing;
mod logreg;
mod majority;
mod metrics;
mod textclf;

pub use hashing::{bucket_of, fnv1a64};
pub use logreg::{logreg_objective, train_logreg, LogRegConfig, LogRegModel};
pub use majority::MajorityBaseline;
pub use metrics::{evaluate, Metrics};
pub use textclf::{
    example_tokens, train_text_classifier, Prediction, TextClassifier, TextClassifierConfig,
    PREMISE_SEPARATOR,
};
