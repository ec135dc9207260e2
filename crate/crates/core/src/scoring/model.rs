//! Linear softmax classifier trained on soft labels.

use std::io::{Read, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureConfig, FeatureVector};
use crate::calibration::{log_softmax, softmax};
use crate::corpus::{binarize, Feature, RatingDistribution};
use crate::error::{ArgusError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// L2 penalty on non-bias weights.
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            learning_rate: 0.5,
            epochs: 200,
        }
    }
}

/// `lambda in {1e-4, 1e-3, 1e-2}` x `learning_rate in {0.1, 0.5}`, 200 epochs.
pub fn default_grid() -> Vec<Hyper> {
    let mut grid = Vec::new();
    for lambda in [1e-4, 1e-3, 1e-2] {
        for learning_rate in [0.1, 0.5] {
            grid.push(Hyper {
                lambda,
                learning_rate,
                epochs: 200,
            });
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Targets are annotator rating distributions.
    Soft,
    /// Targets are one-hot majority labels.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: FeatureVector,
    pub target: RatingDistribution,
}

/// Mean cross-entropy plus L2 penalty over a compact parameter layout: one
/// row of `levels` weights for every feature index active in the data.
/// Parameters are stored row-major, `params[row * levels + level]`.
pub struct SoftmaxObjective {
    indices: Vec<u32>,
    rows: Vec<Vec<(usize, f64)>>,
    targets: Vec<Vec<f64>>,
    levels: usize,
    lambda: f64,
    bias_row: Option<usize>,
}

impl SoftmaxObjective {
    pub fn new(examples: &[TrainingExample], lambda: f64, bias_index: u32) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| ArgusError::invalid("empty training set"))?;
        let support = first.target.support().to_vec();
        if examples
            .iter()
            .any(|e| e.target.support() != support.as_slice())
        {
            return Err(ArgusError::invalid(
                "training targets do not share one support",
            ));
        }
        let mut indices: Vec<u32> = examples
            .iter()
            .flat_map(|e| e.features.entries().iter().map(|(i, _)| *i))
            .collect();
        indices.sort_unstable();
        indices.dedup();
        let rows = examples
            .iter()
            .map(|e| {
                e.features
                    .entries()
                    .iter()
                    .map(|(i, v)| (indices.binary_search(i).unwrap(), *v))
                    .collect()
            })
            .collect();
        let bias_row = indices.binary_search(&bias_index).ok();
        Ok(Self {
            indices,
            rows,
            targets: examples.iter().map(|e| e.target.probs().to_vec()).collect(),
            levels: support.len(),
            lambda,
            bias_row,
        })
    }

    pub fn n_params(&self) -> usize {
        self.indices.len() * self.levels
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    fn logits(&self, params: &[f64], row: &[(usize, f64)]) -> Vec<f64> {
        let mut z = vec![0.0; self.levels];
        for &(j, v) in row {
            let w = &params[j * self.levels..(j + 1) * self.levels];
            for k in 0..self.levels {
                z[k] += w[k] * v;
            }
        }
        z
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let mut total = 0.0;
        for (j, w) in params.chunks(self.levels).enumerate() {
            if Some(j) != self.bias_row {
                total += w.iter().map(|x| x * x).sum::<f64>();
            }
        }
        self.lambda * total
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.rows.len() as f64;
        let mut ce = 0.0;
        for (row, t) in self.rows.iter().zip(&self.targets) {
            let lp = log_softmax(&self.logits(params, row));
            ce -= t
                .iter()
                .zip(&lp)
                .filter(|(tk, _)| **tk > 0.0)
                .map(|(tk, l)| tk * l)
                .sum::<f64>();
        }
        ce / n + self.penalty(params)
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut ce = 0.0;
        for (row, t) in self.rows.iter().zip(&self.targets) {
            let lp = log_softmax(&self.logits(params, row));
            ce -= t
                .iter()
                .zip(&lp)
                .filter(|(tk, _)| **tk > 0.0)
                .map(|(tk, l)| tk * l)
                .sum::<f64>();
            let resid: Vec<f64> = lp.iter().zip(t).map(|(l, tk)| (l.exp() - tk) / n).collect();
            for &(j, v) in row {
                let g = &mut grad[j * self.levels..(j + 1) * self.levels];
                for k in 0..self.levels {
                    g[k] += resid[k] * v;
                }
            }
        }
        for (j, (g, w)) in grad
            .chunks_mut(self.levels)
            .zip(params.chunks(self.levels))
            .enumerate()
        {
            if Some(j) != self.bias_row {
                for k in 0..self.levels {
                    g[k] += 2.0 * self.lambda * w[k];
                }
            }
        }
        (ce / n + self.penalty(params), grad)
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.loss_and_gradient(params).1
    }

    /// Zero weights with the bias row at the log of the mean target, so the
    /// starting point already predicts the label prior.
    pub fn prior_init(&self) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params()];
        if let Some(b) = self.bias_row {
            let n = self.targets.len() as f64;
            let eps = 1e-6;
            let logs: Vec<f64> = (0..self.levels)
                .map(|k| (self.targets.iter().map(|t| t[k]).sum::<f64>() / n + eps).ln())
                .collect();
            let center = logs.iter().sum::<f64>() / self.levels as f64;
            for k in 0..self.levels {
                params[b * self.levels + k] = logs[k] - center;
            }
        }
        params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub feature: Feature,
    pub support: Vec<i64>,
    pub hash_bits: u32,
    pub feature_config: FeatureConfig,
    pub label_mode: LabelMode,
    pub hyper: Hyper,
    pub seed: u64,
    pub temperature: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub active_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftClassifier {
    pub header: ModelHeader,
    indices: Vec<u32>,
    weights: Vec<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    header: ModelHeader,
    weights: String,
}

impl SoftClassifier {
    pub fn feature(&self) -> Feature {
        self.header.feature
    }

    pub fn support(&self) -> &[i64] {
        &self.header.support
    }

    pub fn temperature(&self) -> f64 {
        self.header.temperature
    }

    pub fn set_temperature(&mut self, t: f64) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(ArgusError::invalid(format!(
                "temperature must be positive, got {t}"
            )));
        }
        self.header.temperature = t;
        Ok(())
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        featurize(text, &self.header.feature_config)
    }

    /// Uncalibrated logits. Feature indices unseen during training contribute nothing.
    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        let levels = self.header.support.len();
        let mut z = vec![0.0; levels];
        for (i, v) in x.entries() {
            if let Ok(j) = self.indices.binary_search(i) {
                for k in 0..levels {
                    z[k] += self.weights[j * levels + k] * v;
                }
            }
        }
        z
    }

    /// Calibrated distribution, `softmax(logits / T)`.
    pub fn predict_features(&self, x: &FeatureVector) -> RatingDistribution {
        let t = self.header.temperature;
        let z: Vec<f64> = self.logits(x).into_iter().map(|v| v / t).collect();
        RatingDistribution::from_normalized(self.header.support.clone(), softmax(&z))
    }

    pub fn predict_distribution(&self, text: &str) -> RatingDistribution {
        self.predict_features(&self.featurize(text))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let levels = self.header.support.len();
        let mut payload = Vec::with_capacity(self.indices.len() * (4 + 8 * levels));
        for (j, idx) in self.indices.iter().enumerate() {
            payload.extend_from_slice(&idx.to_le_bytes());
            for k in 0..levels {
                payload.extend_from_slice(&self.weights[j * levels + k].to_le_bytes());
            }
        }
        let file = ModelFile {
            header: self.header.clone(),
            weights: BASE64.encode(payload),
        };
        serde_json::to_writer_pretty(w, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.header.format_version != MODEL_FORMAT_VERSION {
            return Err(ArgusError::invalid(format!(
                "unsupported model format version {}",
                file.header.format_version
            )));
        }
        let levels = file.header.support.len();
        let bytes = BASE64
            .decode(file.weights.as_bytes())
            .map_err(|e| ArgusError::invalid(format!("bad weight payload: {e}")))?;
        let stride = 4 + 8 * levels;
        if levels == 0 || bytes.len() % stride != 0 {
            return Err(ArgusError::invalid("weight payload has the wrong length"));
        }
        let mut indices = Vec::with_capacity(bytes.len() / stride);
        let mut weights = Vec::with_capacity(bytes.len() / stride * levels);
        for chunk in bytes.chunks(stride) {
            indices.push(u32::from_le_bytes(chunk[..4].try_into().unwrap()));
            for k in 0..levels {
                let off = 4 + 8 * k;
                let w = f64::from_le_bytes(chunk[off..off + 8].try_into().unwrap());
                if !w.is_finite() {
                    return Err(ArgusError::invalid("non-finite weight in model file"));
                }
                weights.push(w);
            }
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ArgusError::invalid("model feature indices are not sorted"));
        }
        Ok(Self {
            header: file.header,
            indices,
            weights,
            loss_history: Vec::new(),
        })
    }
}

/// Expected rating under a distribution.
pub fn expected_score(dist: &RatingDistribution) -> f64 {
    dist.expected()
}

/// Presence decision from a predicted distribution via its expected score.
pub fn predicted_presence(dist: &RatingDistribution, feature: Feature) -> Result<bool> {
    binarize(dist.expected(), feature)
}

const MAX_HALVINGS: usize = 40;

/// Full-batch gradient descent on mean cross-entropy against soft targets.
/// A step that would raise the loss is retried at half the learning rate, so
/// the recorded loss history is non-increasing.
pub fn train_soft(
    feature: Feature,
    examples: &[TrainingExample],
    config: &FeatureConfig,
    hyper: Hyper,
    seed: u64,
) -> Result<SoftClassifier> {
    train(feature, examples, config, hyper, seed, LabelMode::Soft)
}

/// Same optimizer on one-hot targets built from binary majority labels.
pub fn train_hard(
    feature: Feature,
    examples: &[(FeatureVector, bool)],
    config: &FeatureConfig,
    hyper: Hyper,
    seed: u64,
) -> Result<SoftClassifier> {
    let support = vec![0, 1];
    let soft: Vec<TrainingExample> = examples
        .iter()
        .map(|(x, y)| {
            Ok(TrainingExample {
                features: x.clone(),
                target: RatingDistribution::one_hot(support.clone(), i64::from(*y))?,
            })
        })
        .collect::<Result<_>>()?;
    train(feature, &soft, config, hyper, seed, LabelMode::Hard)
}

fn train(
    feature: Feature,
    examples: &[TrainingExample],
    config: &FeatureConfig,
    hyper: Hyper,
    seed: u64,
    label_mode: LabelMode,
) -> Result<SoftClassifier> {
    if examples.is_empty() {
        return Err(ArgusError::invalid("empty training set"));
    }
    let support = examples[0].target.support().to_vec();
    if label_mode == LabelMode::Soft && support != feature.support() {
        return Err(ArgusError::invalid(format!(
            "target support {support:?} does not match the {feature} support {:?}",
            feature.support()
        )));
    }
    if !(hyper.learning_rate > 0.0) || hyper.lambda < 0.0 {
        return Err(ArgusError::invalid(
            "learning rate must be positive and lambda non-negative",
        ));
    }
    let objective = SoftmaxObjective::new(examples, hyper.lambda, config.bias_index())?;
    let mut params = objective.prior_init();
    let (mut loss, mut grad) = objective.loss_and_gradient(&params);
    if !loss.is_finite() {
        return Err(ArgusError::Divergence {
            learning_rate: hyper.learning_rate,
            message: "initial loss is not finite".into(),
        });
    }
    let mut history = vec![loss];
    let mut lr = hyper.learning_rate;
    for _ in 0..hyper.epochs {
        let mut halvings = 0;
        loop {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
            let (c_loss, c_grad) = objective.loss_and_gradient(&candidate);
            if c_loss.is_finite() && c_loss <= loss {
                params = candidate;
                loss = c_loss;
                grad = c_grad;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                if c_loss.is_finite() {
                    // No descent direction left at machine precision.
                    break;
                }
                return Err(ArgusError::Divergence {
                    learning_rate: hyper.learning_rate,
                    message: format!("loss became non-finite (last step size {lr:e})"),
                });
            }
            lr *= 0.5;
        }
        history.push(loss);
    }
    Ok(SoftClassifier {
        header: ModelHeader {
            format_version: MODEL_FORMAT_VERSION,
            feature,
            support,
            hash_bits: config.hash_bits,
            feature_config: config.clone(),
            label_mode,
            hyper,
            seed,
            temperature: 1.0,
            final_loss: loss,
            epochs_run: hyper.epochs,
            active_features: objective.indices().len(),
        },
        indices: objective.indices().to_vec(),
        weights: params,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example(text: &str, target: RatingDistribution) -> TrainingExample {
        TrainingExample {
            features: featurize(text, &FeatureConfig::default()),
            target,
        }
    }

    #[test]
    fn constant_target_reproduces_prior() {
        let d =
            RatingDistribution::new(vec![1, 2, 3, 4, 5], vec![0.1, 0.2, 0.4, 0.2, 0.1]).unwrap();
        let texts = [
            "my brother went home",
            "policy evidence suggests",
            "then it rained",
            "the data is clear",
        ];
        let ex: Vec<_> = texts.iter().map(|t| example(t, d.clone())).collect();
        let m = train_soft(
            Feature::Curiosity,
            &ex,
            &FeatureConfig::default(),
            Hyper::default(),
            1,
        )
        .unwrap();
        for probe in ["completely unrelated words here", "", "then it rained"] {
            let p = m.predict_distribution(probe);
            for (a, b) in p.probs().iter().zip(d.probs()) {
                assert!((a - b).abs() < 1e-3, "{probe}: {:?}", p.probs());
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let texts = [
            "once upon a time",
            "we argue that taxes",
            "suddenly the door opened",
            "numbers do not lie",
        ];
        let ex: Vec<_> = texts
            .iter()
            .map(|t| {
                let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = w.iter().sum();
                example(
                    t,
                    RatingDistribution::new(vec![1, 2, 3, 4, 5], w.iter().map(|x| x / s).collect())
                        .unwrap(),
                )
            })
            .collect();
        let obj = SoftmaxObjective::new(&ex, 0.01, FeatureConfig::default().bias_index()).unwrap();
        let params: Vec<f64> = (0..obj.n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let grad = obj.gradient(&params);
        let h = 1e-4;
        for _ in 0..10 {
            let k = rng.random_range(0..params.len());
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (obj.loss(&plus) - obj.loss(&minus)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
            assert!(
                rel < 1e-5,
                "param {k}: analytic {} fd {fd} rel {rel}",
                grad[k]
            );
        }
    }

    #[test]
    fn separable_groups_are_ordered() {
        let support: Vec<i64> = (1..=5).collect();
        let low = RatingDistribution::one_hot(support.clone(), 1).unwrap();
        let high = RatingDistribution::one_hot(support, 5).unwrap();
        let low_texts = [
            "statistics show",
            "the evidence shows",
            "data and statistics",
            "evidence is data",
        ];
        let high_texts = [
            "my grandmother told me",
            "when i was a child",
            "my father told me once",
            "as a child i",
        ];
        let mut ex: Vec<_> = low_texts.iter().map(|t| example(t, low.clone())).collect();
        ex.extend(high_texts.iter().map(|t| example(t, high.clone())));
        let m = train_soft(
            Feature::Agency,
            &ex,
            &FeatureConfig::default(),
            Hyper::default(),
            3,
        )
        .unwrap();
        let max_low = low_texts
            .iter()
            .map(|t| m.predict_distribution(t).expected())
            .fold(f64::MIN, f64::max);
        let min_high = high_texts
            .iter()
            .map(|t| m.predict_distribution(t).expected())
            .fold(f64::MAX, f64::min);
        assert!(max_low < min_high, "{max_low} vs {min_high}");
    }

    #[test]
    fn balanced_hard_labels_bias_only() {
        let x = featurize("", &FeatureConfig::default());
        let data = vec![
            (x.clone(), true),
            (x.clone(), false),
            (x.clone(), true),
            (x.clone(), false),
        ];
        let m = train_hard(
            Feature::Story,
            &data,
            &FeatureConfig::default(),
            Hyper::default(),
            0,
        )
        .unwrap();
        let p = m.predict_features(&x);
        assert!((p.probs()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn loss_history_is_monotone() {
        let support = vec![0, 1];
        let ex: Vec<_> = (0..30)
            .map(|i| {
                let text = if i % 2 == 0 {
                    format!("my story number {i}")
                } else {
                    format!("argument {i} holds")
                };
                example(
                    &text,
                    RatingDistribution::one_hot(support.clone(), (i % 2 == 0) as i64).unwrap(),
                )
            })
            .collect();
        let hyper = Hyper {
            lambda: 1e-4,
            learning_rate: 5.0,
            epochs: 100,
        };
        let m = train_soft(Feature::Story, &ex, &FeatureConfig::default(), hyper, 0).unwrap();
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn model_file_round_trip() {
        let d = RatingDistribution::new(vec![0, 1], vec![0.25, 0.75]).unwrap();
        let ex = vec![
            example("a short tale", d.clone()),
            example("another one", d),
        ];
        let mut m = train_soft(
            Feature::Story,
            &ex,
            &FeatureConfig::default(),
            Hyper::default(),
            9,
        )
        .unwrap();
        m.set_temperature(1.7).unwrap();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        let back = SoftClassifier::read_json(buf.as_slice()).unwrap();
        assert_eq!(back.header, m.header);
        assert_eq!(
            back.predict_distribution("a short tale"),
            m.predict_distribution("a short tale")
        );
    }

    #[test]
    fn mismatched_support_rejected() {
        let d = RatingDistribution::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let ex = vec![example("x", d)];
        assert!(train_soft(
            Feature::Agency,
            &ex,
            &FeatureConfig::default(),
            Hyper::default(),
            0
        )
        .is_err());
    }

    #[test]
    fn expected_score_examples() {
        let d =
            RatingDistribution::new(vec![1, 2, 3, 4, 5], vec![0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(expected_score(&d), 3.0);
        let d = RatingDistribution::one_hot(vec![1, 2, 3, 4, 5], 4).unwrap();
        assert_eq!(expected_score(&d), 4.0);
        let s = RatingDistribution::new(vec![0, 1], vec![0.2, 0.8]).unwrap();
        assert!((expected_score(&s) - 0.8).abs() < 1e-15);
        assert!(predicted_presence(&s, Feature::Story).unwrap());
    }
}
