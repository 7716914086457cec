//! Binary logistic regression trained by full-batch gradient descent, plus
//! evaluation metrics and stratified k-fold cross-validation.
//!
//! The objective is the mean log-loss plus `l2_lambda / 2 * ||w||^2` (the
//! bias is not penalized). Each epoch takes one descent step along the
//! negative gradient, scaled per dimension by the inverse of a bound on the
//! loss curvature, `1/4 * mean(x_j^2) + l2_lambda`, so raw octet values (up
//! to 255) and sparse tf-idf weights share one step size. The step starts at
//! `learning_rate` and is halved until the Armijo condition holds, so the
//! loss never increases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExampleKey, Label, Labeled};
use crate::error::{Error, Result};
use crate::features::{project, same_space, FeatureSpace, FeatureVector};
use crate::scalar::{sigmoid, softplus, Scalar};

/// On-disk format version of serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Fraction of the predicted decrease a step must achieve.
const ARMIJO_C: f64 = 1e-4;
/// Lower bound on the per-dimension curvature estimate.
const MIN_CURVATURE: f64 = 1e-6;
/// Give up backtracking below `learning_rate * MIN_STEP_RATIO`.
const MIN_STEP_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Hyperparams<T> {
    pub l2_lambda: T,
    pub learning_rate: T,
    pub max_epochs: usize,
    /// Stop once an epoch improves the loss by less than this.
    pub tolerance: T,
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams {
            l2_lambda: T::of(1e-3),
            learning_rate: T::of(0.1),
            max_epochs: 1000,
            tolerance: T::of(1e-6),
        }
    }
}

impl<T: Scalar> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.l2_lambda >= T::zero()
            && self.l2_lambda.is_finite()
            && self.learning_rate > T::zero()
            && self.learning_rate.is_finite()
            && self.tolerance > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad hyperparameters {self:?}")))
        }
    }
}

/// A vectorized, labeled instance.
#[derive(Debug, Clone)]
pub struct TrainingExample<T> {
    pub key: ExampleKey,
    pub label: Label,
    pub vector: FeatureVector<T>,
}

impl<T> Labeled for TrainingExample<T> {
    fn label(&self) -> Label {
        self.label
    }
}

/// Trained logistic-regression parameters bound to a feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "ModelFile<T>", try_from = "ModelFile<T>")]
#[serde(bound = "T: Scalar")]
pub struct Model<T> {
    space: Arc<FeatureSpace<T>>,
    /// Dense, one weight per dimension of `space`.
    weights: Vec<T>,
    bias: T,
    hyperparams: Hyperparams<T>,
    rng_seed: u64,
    epochs: usize,
}

impl<T: Scalar> Model<T> {
    /// A model with explicit parameters.
    pub fn from_parts(space: Arc<FeatureSpace<T>>, weights: Vec<T>, bias: T) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::FeatureSpace(format!(
                "{} weights for a space of {} dimensions",
                weights.len(),
                space.len()
            )));
        }
        Ok(Model {
            space,
            weights,
            bias,
            hyperparams: Hyperparams::default(),
            rng_seed: 0,
            epochs: 0,
        })
    }

    pub fn space(&self) -> &Arc<FeatureSpace<T>> {
        &self.space
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn hyperparams(&self) -> &Hyperparams<T> {
        &self.hyperparams
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Epochs actually run by the trainer.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn weight_norm(&self) -> T {
        self.weights.iter().map(|&w| w * w).sum::<T>().sqrt()
    }

    /// `w.v + b` after projecting `v` onto the model's space.
    pub fn margin(&self, v: &FeatureVector<T>) -> T {
        if Arc::ptr_eq(v.space(), &self.space) {
            v.dot(&self.weights) + self.bias
        } else {
            project(v, &self.space).dot(&self.weights) + self.bias
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

/// Probability of the positive class.
pub fn predict_proba<T: Scalar>(model: &Model<T>, v: &FeatureVector<T>) -> T {
    sigmoid(model.margin(v))
}

/// Positive iff `predict_proba >= 0.5`.
pub fn predict<T: Scalar>(model: &Model<T>, v: &FeatureVector<T>) -> Label {
    decide(predict_proba(model, v))
}

/// Threshold a positive-class probability at one half, ties positive.
pub fn decide<T: Scalar>(p: T) -> Label {
    Label::from_bool(p >= T::of(0.5))
}

fn target<T: Scalar>(label: Label) -> T {
    if label.is_positive() {
        T::one()
    } else {
        T::zero()
    }
}

/// Regularized mean log-loss at `(weights, bias)`.
pub fn objective<T: Scalar>(weights: &[T], bias: T, data: &[TrainingExample<T>], l2_lambda: T) -> T {
    let n = T::of_usize(data.len());
    let loss: T = data
        .iter()
        .map(|ex| {
            let z = ex.vector.dot(weights) + bias;
            softplus(z) - target::<T>(ex.label) * z
        })
        .sum();
    let penalty: T = weights.iter().map(|&w| w * w).sum();
    loss / n + l2_lambda * penalty / T::of(2.0)
}

/// Analytic gradient of [`objective`]: `(d/dw, d/db)`.
pub fn gradient<T: Scalar>(
    weights: &[T],
    bias: T,
    data: &[TrainingExample<T>],
    l2_lambda: T,
) -> (Vec<T>, T) {
    let n = T::of_usize(data.len());
    let mut gw = vec![T::zero(); weights.len()];
    let mut gb = T::zero();
    for ex in data {
        let z = ex.vector.dot(weights) + bias;
        let r = sigmoid(z) - target::<T>(ex.label);
        for &(i, x) in ex.vector.entries() {
            gw[i] += r * x;
        }
        gb += r;
    }
    for (g, &w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
    }
    (gw, gb / n)
}

fn check_training_set<T: Scalar>(data: &[TrainingExample<T>]) -> Result<Arc<FeatureSpace<T>>> {
    let first = data.first().ok_or(Error::EmptyInput("no training examples"))?;
    if !data.iter().any(|e| e.label.is_positive()) {
        return Err(Error::MissingClass("positive"));
    }
    if data.iter().all(|e| e.label.is_positive()) {
        return Err(Error::MissingClass("negative"));
    }
    let space = Arc::clone(first.vector.space());
    for (index, ex) in data.iter().enumerate() {
        if !same_space(ex.vector.space(), &space) {
            return Err(Error::FeatureSpace(format!(
                "example {index} is over a different feature space"
            )));
        }
        if ex.vector.entries().iter().any(|&(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(space)
}

/// Train a model; see the module docs for the optimizer.
pub fn train<T: Scalar>(
    data: &[TrainingExample<T>],
    hyperparams: &Hyperparams<T>,
    rng_seed: u64,
) -> Result<Model<T>> {
    train_traced(data, hyperparams, rng_seed).map(|(m, _)| m)
}

/// As [`train`], also returning the loss before the first epoch and after
/// every epoch.
pub fn train_traced<T: Scalar>(
    data: &[TrainingExample<T>],
    hp: &Hyperparams<T>,
    rng_seed: u64,
) -> Result<(Model<T>, Vec<T>)> {
    hp.validate()?;
    let space = check_training_set(data)?;
    let dims = space.len();
    let n = T::of_usize(data.len());

    let quarter = T::of(0.25);
    let mut curvature = vec![hp.l2_lambda; dims];
    for ex in data {
        for &(i, x) in ex.vector.entries() {
            curvature[i] += quarter * x * x / n;
        }
    }
    let precond: Vec<T> = curvature
        .iter()
        .map(|&h| T::one() / h.max(T::of(MIN_CURVATURE)))
        .collect();
    let precond_b = T::one() / quarter;
    let labels: Vec<T> = data.iter().map(|e| target(e.label)).collect();

    let mut weights = vec![T::zero(); dims];
    let mut bias = T::zero();
    let mut margins = vec![T::zero(); data.len()];
    let half = T::of(0.5);
    let loss_at = |margins: &[T], weights: &[T]| -> T {
        let data_loss: T = margins
            .iter()
            .zip(&labels)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum();
        data_loss / n + hp.l2_lambda * half * weights.iter().map(|&w| w * w).sum::<T>()
    };

    let mut loss = loss_at(&margins, &weights);
    let mut trace = vec![loss];
    let mut epochs = 0;
    let min_step = hp.learning_rate * T::of(MIN_STEP_RATIO);
    let mut grad_w = vec![T::zero(); dims];
    let mut dir_w = vec![T::zero(); dims];
    let mut dz = vec![T::zero(); data.len()];
    let mut trial_w = vec![T::zero(); dims];
    let mut trial_z = vec![T::zero(); data.len()];

    while epochs < hp.max_epochs {
        grad_w.iter_mut().for_each(|g| *g = T::zero());
        let mut grad_b = T::zero();
        for ((ex, &z), &y) in data.iter().zip(&margins).zip(&labels) {
            let r = sigmoid(z) - y;
            for &(i, x) in ex.vector.entries() {
                grad_w[i] += r * x;
            }
            grad_b += r;
        }
        let mut decrease = T::zero();
        for j in 0..dims {
            let g = grad_w[j] / n + hp.l2_lambda * weights[j];
            dir_w[j] = -precond[j] * g;
            decrease += precond[j] * g * g;
        }
        grad_b /= n;
        let dir_b = -precond_b * grad_b;
        decrease += precond_b * grad_b * grad_b;
        if decrease.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
            break;
        }
        for (d, ex) in dz.iter_mut().zip(data) {
            *d = ex.vector.dot(&dir_w) + dir_b;
        }

        let mut step = hp.learning_rate;
        let accepted = loop {
            for j in 0..dims {
                trial_w[j] = weights[j] + step * dir_w[j];
            }
            for ((t, &z), &d) in trial_z.iter_mut().zip(&margins).zip(&dz) {
                *t = z + step * d;
            }
            let trial = loss_at(&trial_z, &trial_w);
            if trial <= loss - T::of(ARMIJO_C) * step * decrease {
                break Some(trial);
            }
            step *= half;
            if step < min_step {
                break None;
            }
        };
        let Some(new_loss) = accepted else { break };
        epochs += 1;
        std::mem::swap(&mut weights, &mut trial_w);
        std::mem::swap(&mut margins, &mut trial_z);
        bias += step * dir_b;
        let improvement = loss - new_loss;
        loss = new_loss;
        trace.push(loss);
        if improvement < hp.tolerance {
            break;
        }
    }

    let model = Model {
        space,
        weights,
        bias,
        hyperparams: *hp,
        rng_seed,
        epochs,
    };
    Ok((model, trace))
}

/// Counts of thresholded predictions against true labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Negative, Label::Positive) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl FromIterator<(Label, Label)> for Confusion {
    fn from_iter<I: IntoIterator<Item = (Label, Label)>>(iter: I) -> Self {
        let mut c = Confusion::default();
        for (p, a) in iter {
            c.add(p, a);
        }
        c
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl From<Confusion> for Metrics {
    fn from(c: Confusion) -> Self {
        Metrics {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            accuracy: ratio(c.tp + c.tn, c.total()),
            confusion: c,
        }
    }
}

/// Score `model` on a labeled test set.
pub fn evaluate<T: Scalar>(model: &Model<T>, test: &[TrainingExample<T>]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptyInput("empty test set"));
    }
    Ok(test
        .iter()
        .map(|ex| (predict(model, &ex.vector), ex.label))
        .collect::<Confusion>()
        .into())
}

/// Fold-averaged precision, recall and accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl MeanMetrics {
    pub fn of(metrics: &[Metrics]) -> Self {
        let k = metrics.len().max(1) as f64;
        MeanMetrics {
            precision: metrics.iter().map(|m| m.precision).sum::<f64>() / k,
            recall: metrics.iter().map(|m| m.recall).sum::<f64>() / k,
            accuracy: metrics.iter().map(|m| m.accuracy).sum::<f64>() / k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: MeanMetrics,
}

/// Seeded stratified split into `k` test folds. Each class is shuffled and
/// dealt round-robin, so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, rng_seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig("k-fold needs k >= 2".into()));
    }
    if labels.len() < k {
        return Err(Error::InvalidConfig(format!(
            "{} examples cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| labels[i].is_positive());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, i) in pos.into_iter().chain(neg).enumerate() {
        folds[slot % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation.
pub fn kfold_cv<T: Scalar>(
    examples: &[TrainingExample<T>],
    k: usize,
    hyperparams: &Hyperparams<T>,
    rng_seed: u64,
) -> Result<CvReport> {
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let folds = stratified_folds(&labels, k, rng_seed)?;
    let mut in_test = vec![usize::MAX; examples.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_test[i] = f;
        }
    }
    let mut metrics = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_set: Vec<TrainingExample<T>> = (0..examples.len())
            .filter(|&i| in_test[i] != f)
            .map(|i| examples[i].clone())
            .collect();
        let has = |l: Label| train_set.iter().any(|e| e.label == l);
        if !has(Label::Positive) || !has(Label::Negative) {
            return Err(Error::InvalidConfig(format!(
                "too few examples: training split of fold {f} lacks a class"
            )));
        }
        let test_set: Vec<TrainingExample<T>> =
            test_idx.iter().map(|&i| examples[i].clone()).collect();
        let model = train(&train_set, hyperparams, rng_seed)?;
        metrics.push(evaluate(&model, &test_set)?);
    }
    Ok(CvReport {
        mean: MeanMetrics::of(&metrics),
        folds: metrics,
    })
}

/// Write `fold,precision,recall,accuracy` rows, then a `mean` row.
pub fn write_cv_csv<W: Write>(report: &CvReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fold", "precision", "recall", "accuracy"])?;
    for (i, m) in report.folds.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.accuracy.to_string(),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        report.mean.precision.to_string(),
        report.mean.recall.to_string(),
        report.mean.accuracy.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io("<cv>", e))
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    format_version: u32,
    space: FeatureSpace<T>,
    /// Non-zero weights by dimension name.
    weights: Vec<(String, T)>,
    bias: T,
    hyperparams: Hyperparams<T>,
    rng_seed: u64,
    epochs: usize,
}

impl<T: Scalar> From<Model<T>> for ModelFile<T> {
    fn from(m: Model<T>) -> Self {
        let weights = m
            .space
            .dimensions()
            .iter()
            .zip(&m.weights)
            .filter(|(_, &w)| w != T::zero())
            .map(|(d, &w)| (d.to_string(), w))
            .collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            space: (*m.space).clone(),
            weights,
            bias: m.bias,
            hyperparams: m.hyperparams,
            rng_seed: m.rng_seed,
            epochs: m.epochs,
        }
    }
}

impl<T: Scalar> TryFrom<ModelFile<T>> for Model<T> {
    type Error = Error;

    fn try_from(f: ModelFile<T>) -> Result<Self> {
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: f.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut weights = vec![T::zero(); f.space.len()];
        for (name, w) in f.weights {
            let dim = name.parse()?;
            let i = f
                .space
                .index_of(&dim)
                .ok_or_else(|| Error::FeatureSpace(format!("weight for unknown dimension `{name}`")))?;
            weights[i] = w;
        }
        Ok(Model {
            space: Arc::new(f.space),
            weights,
            bias: f.bias,
            hyperparams: f.hyperparams,
            rng_seed: f.rng_seed,
            epochs: f.epochs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_space, SpaceOptions};

    /// One word dimension "x" with idf 1, values set directly.
    fn line_space() -> Arc<FeatureSpace<f64>> {
        // two documents, df(x) = 1 => idf = ln(2/2) + 1 = 1
        Arc::new(build_space(&[vec!["x"], vec![]], SpaceOptions::default()).unwrap())
    }

    fn ex(space: &Arc<FeatureSpace<f64>>, x: f64, positive: bool, i: usize) -> TrainingExample<f64> {
        let entries = if x == 0.0 { vec![] } else { vec![(0, x)] };
        TrainingExample {
            key: ExampleKey::Span {
                post_id: format!("p{i}"),
                start: 0,
                end: 0,
            },
            label: Label::from_bool(positive),
            vector: FeatureVector::from_entries(Arc::clone(space), entries).unwrap(),
        }
    }

    #[test]
    fn separable_line_orders_probabilities() {
        let s = line_space();
        let data = vec![ex(&s, 0.0, false, 0), ex(&s, 10.0, true, 1)];
        let m = train(&data, &Hyperparams::default(), 0).unwrap();
        let p0 = predict_proba(&m, &data[0].vector);
        let p10 = predict_proba(&m, &data[1].vector);
        assert!(p10 > 0.5 && 0.5 > p0, "p0={p0} p10={p10}");
        assert!(m.weights()[0] > 0.0);
    }

    #[test]
    fn symmetric_zero_data_stays_at_half() {
        let s = line_space();
        let data: Vec<_> = (0..6).map(|i| ex(&s, 0.0, i % 2 == 0, i)).collect();
        let m = train(&data, &Hyperparams::default(), 0).unwrap();
        assert_eq!(m.weights(), [0.0]);
        assert!(m.bias().abs() < 1e-12);
        assert_eq!(predict_proba(&m, &data[0].vector), 0.5);
    }

    #[test]
    fn loss_strictly_decreases() {
        let s = line_space();
        let data: Vec<_> = (0..20)
            .map(|i| ex(&s, (i % 7) as f64 - 2.0, i % 3 != 0, i))
            .collect();
        let (_, trace) = train_traced(&data, &Hyperparams::default(), 0).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
        }
    }

    #[test]
    fn single_class_and_non_finite_rejected() {
        let s = line_space();
        let one: Vec<_> = (0..3).map(|i| ex(&s, 1.0, true, i)).collect();
        assert!(matches!(
            train(&one, &Hyperparams::default(), 0),
            Err(Error::MissingClass(_))
        ));
        let bad = vec![ex(&s, f64::NAN, true, 0), ex(&s, 1.0, false, 1)];
        assert!(matches!(
            train(&bad, &Hyperparams::default(), 0),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn zero_model_and_tie_rule() {
        let s = line_space();
        let m = Model::from_parts(Arc::clone(&s), vec![0.0], 0.0).unwrap();
        let v = ex(&s, 3.0, true, 0).vector;
        assert_eq!(predict_proba(&m, &v), 0.5);
        assert_eq!(predict(&m, &v), Label::Positive);
        assert_eq!(decide(0.9), Label::Positive);
        assert_eq!(decide(0.1), Label::Negative);

        let m = Model::from_parts(Arc::clone(&s), vec![0.7], -0.2).unwrap();
        let lo = predict_proba(&m, &ex(&s, 1.0, true, 0).vector);
        let hi = predict_proba(&m, &ex(&s, 2.0, true, 0).vector);
        assert!(hi > lo);
        assert!((lo + (1.0 - lo) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metrics_by_formula() {
        let mut c = Confusion::default();
        for _ in 0..3 {
            c.add(Label::Positive, Label::Positive);
        }
        c.add(Label::Positive, Label::Negative);
        for _ in 0..2 {
            c.add(Label::Negative, Label::Positive);
        }
        for _ in 0..4 {
            c.add(Label::Negative, Label::Negative);
        }
        let m = Metrics::from(c);
        assert_eq!((m.precision, m.recall, m.accuracy), (0.75, 0.6, 0.7));
        let none = Metrics::from(Confusion {
            tn: 3,
            ..Confusion::default()
        });
        assert_eq!((none.precision, none.recall, none.accuracy), (0.0, 0.0, 1.0));
    }

    #[test]
    fn evaluate_perfect_and_empty() {
        let s = line_space();
        let m = Model::from_parts(Arc::clone(&s), vec![1.0], -0.5).unwrap();
        let data = vec![ex(&s, 0.0, false, 0), ex(&s, 1.0, true, 1)];
        let r = evaluate(&m, &data).unwrap();
        assert_eq!((r.precision, r.recall, r.accuracy), (1.0, 1.0, 1.0));
        assert!(evaluate(&m, &[]).is_err());
    }

    #[test]
    fn folds_partition() {
        let labels: Vec<Label> = (0..23).map(|i| Label::from_bool(i % 3 == 0)).collect();
        let folds = stratified_folds(&labels, 5, 9).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(folds, stratified_folds(&labels, 5, 9).unwrap());
        assert!(stratified_folds(&labels, 1, 0).is_err());
        assert!(stratified_folds(&labels[..3], 4, 0).is_err());
    }

    #[test]
    fn leave_one_out() {
        let s = line_space();
        let data: Vec<_> = (0..6).map(|i| ex(&s, i as f64, i >= 3, i)).collect();
        let r = kfold_cv(&data, data.len(), &Hyperparams::default(), 1).unwrap();
        assert_eq!(r.folds.len(), 6);
        assert!(r.folds.iter().all(|m| m.confusion.total() == 1));
        let mut out = Vec::new();
        write_cv_csv(&r, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("fold,precision,recall,accuracy\n1,"));
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn model_file_round_trip() {
        let s = line_space();
        let data = vec![ex(&s, 0.0, false, 0), ex(&s, 10.0, true, 1)];
        let m = train(&data, &Hyperparams::default(), 42).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: Model<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.weights(), m.weights());
        assert_eq!(back.bias(), m.bias());
        assert_eq!(back.rng_seed(), 42);
        assert_eq!(**back.space(), **m.space());
        let v = &data[1].vector;
        assert_eq!(predict_proba(&back, v), predict_proba(&m, v));
    }
}
