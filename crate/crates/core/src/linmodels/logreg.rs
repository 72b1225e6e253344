//! Multinomial logistic regression with an L2 penalty, fit by full-batch
//! gradient descent.
//!
//! The objective for `N` examples, weights `W` (one row per class, bias in
//! the last column) and penalty strength `λ` is
//!
//! ```text
//! L(W) = (1/N) * [ Σ_i −log softmax(W·[x_i; 1])_{y_i}  +  (λ/2)·‖W without bias‖² ]
//! ```
//!
//! which matches the usual `C = 1/λ` parameterization up to the `1/N` factor.
//! Steps use Armijo backtracking and the step length is doubled after
//! every accepted step.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::scalar::{argmax, softmax_into, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2_strength: f64,
    pub max_iters: usize,
    /// Stop once the largest absolute gradient entry falls below this.
    pub tolerance: f64,
    /// Weights start at zero and the optimizer is deterministic, so the seed
    /// only participates in callers' seed derivation.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iters: 500,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LogRegModel<S: Scalar = f64> {
    classes: Vec<Label>,
    dim: usize,
    /// `classes.len() × (dim + 1)`, row-major, bias last.
    weights: Vec<S>,
    iterations: usize,
}

impl<S: Scalar> LogRegModel<S> {
    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// Gradient-descent iterations actually taken.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn probabilities(&self, x: &[S]) -> Vec<S> {
        let mut scores = vec![S::zero(); self.classes.len()];
        scores_into(&self.weights, self.dim, x, &mut scores);
        let mut probs = vec![S::zero(); scores.len()];
        softmax_into(&scores, &mut probs);
        probs
    }

    pub fn predict(&self, x: &[S]) -> Label {
        self.classes[argmax(&self.probabilities(x))]
    }
}

fn scores_into<S: Scalar>(weights: &[S], dim: usize, x: &[S], out: &mut [S]) {
    for (o, row) in out.iter_mut().zip(weights.chunks_exact(dim + 1)) {
        let mut s = row[dim];
        for (&w, &xi) in row[..dim].iter().zip(x) {
            s = s + w * xi;
        }
        *o = s;
    }
}

/// Loss and gradient of the penalized objective at `weights`.
///
/// `targets` are class indices into `0..num_classes`.
pub fn logreg_objective<S: Scalar>(
    xs: &[Vec<S>],
    targets: &[usize],
    num_classes: usize,
    l2_strength: S,
    weights: &[S],
) -> (S, Vec<S>) {
    let dim = xs.first().map_or(0, Vec::len);
    let stride = dim + 1;
    let n = S::from_usize_lossy(xs.len());
    let mut grad = vec![S::zero(); weights.len()];
    let mut loss = S::zero();
    let mut scores = vec![S::zero(); num_classes];
    let mut probs = vec![S::zero(); num_classes];
    for (x, &y) in xs.iter().zip(targets) {
        scores_into(weights, dim, x, &mut scores);
        softmax_into(&scores, &mut probs);
        loss = loss - probs[y].max(S::min_positive_value()).ln();
        for (c, g) in grad.chunks_exact_mut(stride).enumerate() {
            let residual = probs[c] - if c == y { S::one() } else { S::zero() };
            for (gj, &xj) in g[..dim].iter_mut().zip(x) {
                *gj = *gj + residual * xj;
            }
            g[dim] = g[dim] + residual;
        }
    }
    let half = S::lit(0.5);
    for (w_row, g_row) in weights
        .chunks_exact(stride)
        .zip(grad.chunks_exact_mut(stride))
    {
        for (&w, g) in w_row[..dim].iter().zip(g_row[..dim].iter_mut()) {
            loss = loss + half * l2_strength * w * w;
            *g = *g + l2_strength * w;
        }
    }
    grad.iter_mut().for_each(|g| *g = *g / n);
    (loss / n, grad)
}

const ARMIJO_C: f64 = 0.5;
const MAX_HALVINGS: usize = 60;

/// Fits a model over the labels present in `y` (canonical class order).
pub fn train_logreg<S: Scalar>(
    xs: &[Vec<S>],
    y: &[Label],
    config: &LogRegConfig,
) -> Result<LogRegModel<S>> {
    if xs.is_empty() || xs.len() != y.len() {
        return Err(Error::invalid(format!(
            "need equally many vectors and labels (got {} and {})",
            xs.len(),
            y.len()
        )));
    }
    let dim = xs[0].len();
    if let Some(bad) = xs.iter().position(|x| x.len() != dim) {
        return Err(Error::invalid(format!(
            "vector {bad} has length {}, expected {dim}",
            xs[bad].len()
        )));
    }
    if !(config.l2_strength >= 0.0 && config.l2_strength.is_finite()) {
        return Err(Error::invalid(
            "l2 strength must be finite and non-negative",
        ));
    }

    let classes: Vec<Label> = Label::ALL.into_iter().filter(|l| y.contains(l)).collect();
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let k = classes.len();
    let lambda = S::lit(config.l2_strength);
    let tol = S::lit(config.tolerance);

    let mut weights = vec![S::zero(); k * (dim + 1)];
    let mut iterations = 0;
    if k > 1 {
        let mut step = S::one();
        let (mut loss, mut grad) = logreg_objective(xs, &targets, k, lambda, &weights);
        let mut candidate = weights.clone();
        while iterations < config.max_iters {
            let gmax = grad.iter().fold(S::zero(), |m, g| m.max(g.abs()));
            if gmax < tol {
                break;
            }
            let gnorm2 = grad.iter().fold(S::zero(), |a, &g| a + g * g);
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for ((c, &w), &g) in candidate.iter_mut().zip(&weights).zip(&grad) {
                    *c = w - step * g;
                }
                let (new_loss, new_grad) = logreg_objective(xs, &targets, k, lambda, &candidate);
                if new_loss <= loss - S::lit(ARMIJO_C) * step * gnorm2 {
                    accepted = Some((new_loss, new_grad));
                    break;
                }
                step = step * S::lit(0.5);
            }
            let Some((new_loss, new_grad)) = accepted else {
                break;
            };
            std::mem::swap(&mut weights, &mut candidate);
            loss = new_loss;
            grad = new_grad;
            step = step + step;
            iterations += 1;
        }
    }
    Ok(LogRegModel {
        classes,
        dim,
        weights,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_predicts_it_everywhere() {
        let xs = vec![vec![0.0f64, 1.0], vec![3.0, -2.0]];
        let m = train_logreg(
            &xs,
            &[Label::Neutral, Label::Neutral],
            &LogRegConfig::default(),
        )
        .unwrap();
        assert_eq!(m.predict(&[100.0, 100.0]), Label::Neutral);
        assert_eq!(m.predict(&[-5.0, 0.0]), Label::Neutral);
    }

    #[test]
    fn huge_penalty_gives_uniform_probabilities() {
        let xs: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, -1.0],
            vec![2.0, 0.5],
            vec![0.5, 2.0],
            vec![-2.0, -0.5],
        ];
        let y = [
            Label::Entailment,
            Label::Neutral,
            Label::Contradiction,
            Label::Entailment,
            Label::Neutral,
            Label::Contradiction,
        ];
        let cfg = LogRegConfig {
            l2_strength: 1e6,
            ..Default::default()
        };
        let m = train_logreg(&xs, &y, &cfg).unwrap();
        for x in &xs {
            for p in m.probabilities(x) {
                assert!((p - 1.0 / 3.0).abs() < 0.01, "{p}");
            }
        }
    }

    #[test]
    fn ragged_input_rejected() {
        let xs = vec![vec![0.0f64, 1.0], vec![3.0]];
        let err = train_logreg(
            &xs,
            &[Label::Neutral, Label::Entailment],
            &LogRegConfig::default(),
        );
        assert!(err.is_err());
        assert!(train_logreg::<f64>(&[], &[], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn objective_at_zero_is_log_k() {
        let xs = vec![vec![1.0f64, 2.0], vec![-1.0, 0.5]];
        let (loss, _) = logreg_objective(&xs, &[0, 2], 3, 1.0, &[0.0; 9]);
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn f32_training_works() {
        let xs: Vec<Vec<f32>> = vec![vec![1.0], vec![2.0], vec![-1.0], vec![-2.0]];
        let y = [
            Label::Entailment,
            Label::Entailment,
            Label::Neutral,
            Label::Neutral,
        ];
        let m = train_logreg(
            &xs,
            &y,
            &LogRegConfig {
                l2_strength: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.predict(&[1.5]), Label::Entailment);
        assert_eq!(m.predict(&[-1.5]), Label::Neutral);
    }
}
