//! Cross-forum transfer.
//!
//! Cross-porting scores a target forum directly with a source classifier.
//! Cross-seeding goes further:
//!
//! 1. union the source and target feature spaces;
//! 2. score the target with a classifier trained on the source data;
//! 3. keep the target instances scored with high confidence as a seed,
//!    pseudo-labeled with the source classifier's decision;
//! 4. train a fresh classifier on the seed and apply it to the target.
//!
//! Confidence is `max(p, 1 - p)`, so both classes can seed. If a class has
//! fewer than `min_seed_per_class` instances the threshold is lowered in
//! steps of 0.05 down to 0.5. The seed is then balanced by keeping the most
//! confident instances of each class.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{decide, predict_proba, train, Hyperparams, Model, TrainingExample};
use crate::corpus::{ExampleKey, Label};
use crate::error::{Error, Result};
use crate::features::{project, same_space, union_spaces, FeatureSpace, FeatureVector};
use crate::scalar::Scalar;

/// Threshold decrement applied when a seed class is under-populated.
pub const RELAX_STEP: f64 = 0.05;
/// Lowest threshold the relaxation ladder reaches.
pub const THRESHOLD_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransferConfig<T> {
    /// Seed confidence threshold, strictly between 0.5 and 1.
    pub threshold: T,
    pub min_seed_per_class: usize,
    /// Optional upper bound on seed instances per class.
    pub per_class_cap: Option<usize>,
    pub hyperparams: Hyperparams<T>,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for TransferConfig<T> {
    fn default() -> Self {
        TransferConfig {
            threshold: T::of(0.85),
            min_seed_per_class: 10,
            per_class_cap: None,
            hyperparams: Hyperparams::default(),
            rng_seed: 0,
        }
    }
}

impl<T: Scalar> TransferConfig<T> {
    pub fn with_threshold(threshold: T) -> Result<Self> {
        let c = TransferConfig {
            threshold,
            ..TransferConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.threshold.as_f64();
        if !(t > THRESHOLD_FLOOR && t < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "seed threshold must lie strictly between 0.5 and 1, got {t}"
            )));
        }
        self.hyperparams.validate()
    }
}

/// An unlabeled target-forum instance.
#[derive(Debug, Clone)]
pub struct TargetInstance<T> {
    pub key: ExampleKey,
    pub vector: FeatureVector<T>,
}

/// A model's verdict on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T> {
    pub key: ExampleKey,
    /// Probability of the positive class.
    pub p: T,
    pub label: Label,
}

impl<T: Scalar> Prediction<T> {
    pub fn confidence(&self) -> T {
        self.p.max(T::one() - self.p)
    }
}

/// Apply `model` to target instances, projecting them onto its space.
pub fn cross_port<T: Scalar>(model: &Model<T>, targets: &[TargetInstance<T>]) -> Vec<Prediction<T>> {
    targets
        .iter()
        .map(|t| {
            let p = predict_proba(model, &t.vector);
            Prediction {
                key: t.key.clone(),
                p,
                label: decide(p),
            }
        })
        .collect()
}

/// Indices of predictions whose confidence reaches `threshold`, before any
/// class balancing.
pub fn seed_candidates<T: Scalar>(predictions: &[Prediction<T>], threshold: T) -> Vec<usize> {
    predictions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.confidence() >= threshold)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SeedInstance<T> {
    pub key: ExampleKey,
    pub vector: FeatureVector<T>,
    pub pseudo_label: Label,
    pub confidence: T,
}

/// Pseudo-labeled target instances.
#[derive(Debug, Clone)]
pub struct SeedSet<T> {
    pub instances: Vec<SeedInstance<T>>,
    /// Threshold actually used, after any relaxation.
    pub threshold: T,
    pub requested_threshold: T,
    pub source_model_id: String,
    /// `(positive, negative)` counts before balancing.
    pub pre_balance: (usize, usize),
}

impl<T: Scalar> SeedSet<T> {
    pub fn count(&self, label: Label) -> usize {
        self.instances.iter().filter(|s| s.pseudo_label == label).count()
    }

    pub fn training_examples(&self) -> Vec<TrainingExample<T>> {
        self.instances
            .iter()
            .map(|s| TrainingExample {
                key: s.key.clone(),
                label: s.pseudo_label,
                vector: s.vector.clone(),
            })
            .collect()
    }

    /// Audit dump: `key,pseudo_label,confidence`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "pseudo_label", "confidence"])?;
        for s in &self.instances {
            w.write_record([s.key.to_string(), s.pseudo_label.name().to_string(), s.confidence.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<seed>", e))
    }
}

/// Score the target with `model` and harvest a balanced, high-confidence
/// seed.
pub fn select_seed<T: Scalar>(
    model: &Model<T>,
    targets: &[TargetInstance<T>],
    config: &TransferConfig<T>,
    source_model_id: &str,
) -> Result<SeedSet<T>> {
    config.validate()?;
    let predictions = cross_port(model, targets);
    seed_from_predictions(&predictions, targets, config, source_model_id)
}

fn seed_from_predictions<T: Scalar>(
    predictions: &[Prediction<T>],
    targets: &[TargetInstance<T>],
    config: &TransferConfig<T>,
    source_model_id: &str,
) -> Result<SeedSet<T>> {
    let requested = config.threshold.as_f64();
    let mut rung = 0u32;
    let (threshold, chosen) = loop {
        let t = (requested - RELAX_STEP * f64::from(rung)).max(THRESHOLD_FLOOR);
        let threshold = if rung == 0 { config.threshold } else { T::of(t) };
        let chosen = seed_candidates(predictions, threshold);
        let pos = chosen.iter().filter(|&&i| predictions[i].label.is_positive()).count();
        let neg = chosen.len() - pos;
        let enough = pos >= config.min_seed_per_class && neg >= config.min_seed_per_class;
        if enough || t <= THRESHOLD_FLOOR {
            if pos == 0 {
                return Err(Error::SeedInfeasible {
                    class: "positive",
                    floor: t,
                });
            }
            if neg == 0 {
                return Err(Error::SeedInfeasible {
                    class: "negative",
                    floor: t,
                });
            }
            break (threshold, chosen);
        }
        rung += 1;
    };

    let by_confidence = |label: Label| {
        let mut idx: Vec<usize> = chosen
            .iter()
            .copied()
            .filter(|&i| predictions[i].label == label)
            .collect();
        idx.sort_by(|&a, &b| {
            predictions[b]
                .confidence()
                .partial_cmp(&predictions[a].confidence())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    };
    let pos = by_confidence(Label::Positive);
    let neg = by_confidence(Label::Negative);
    let mut cap = pos.len().min(neg.len());
    if let Some(c) = config.per_class_cap {
        cap = cap.min(c);
    }
    let mut keep: Vec<usize> = pos[..cap].iter().chain(&neg[..cap]).copied().collect();
    keep.sort_unstable();

    Ok(SeedSet {
        instances: keep
            .into_iter()
            .map(|i| SeedInstance {
                key: predictions[i].key.clone(),
                vector: targets[i].vector.clone(),
                pseudo_label: predictions[i].label,
                confidence: predictions[i].confidence(),
            })
            .collect(),
        threshold,
        requested_threshold: config.threshold,
        source_model_id: source_model_id.to_string(),
        pre_balance: (pos.len(), neg.len()),
    })
}

/// Summary of one transfer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferManifest {
    pub source_ids: Vec<String>,
    pub requested_threshold: f64,
    pub final_threshold: f64,
    pub seed_positive: usize,
    pub seed_negative: usize,
    pub pre_balance_positive: usize,
    pub pre_balance_negative: usize,
    pub target_instances: usize,
}

/// Everything a cross-seeding run produces.
#[derive(Debug, Clone)]
pub struct CrossSeedOutcome<T> {
    pub union_space: Arc<FeatureSpace<T>>,
    /// Classifier trained on the pooled source data over the union space.
    pub source_model: Model<T>,
    /// The source classifier's predictions on the target (cross-porting).
    pub cross_port: Vec<Prediction<T>>,
    pub seed: SeedSet<T>,
    /// Target-specific classifier trained on the seed.
    pub model: Model<T>,
    /// The target-specific classifier's predictions on every target instance.
    pub predictions: Vec<Prediction<T>>,
    pub manifest: TransferManifest,
}

/// Cross-seed from one labeled source forum.
pub fn cross_seed<T: Scalar>(
    source: &[TrainingExample<T>],
    targets: &[TargetInstance<T>],
    config: &TransferConfig<T>,
) -> Result<CrossSeedOutcome<T>> {
    multi_source_cross_seed(&[source], targets, config)
}

fn shared_space<'a, T: Scalar>(
    mut vectors: impl Iterator<Item = &'a FeatureVector<T>>,
    what: &'static str,
) -> Result<Arc<FeatureSpace<T>>> {
    let first = vectors.next().ok_or(Error::EmptyInput(what))?;
    let space = Arc::clone(first.space());
    if vectors.any(|v| !same_space(v.space(), &space)) {
        return Err(Error::FeatureSpace(format!("{what}: vectors span several spaces")));
    }
    Ok(space)
}

/// Cross-seed from several labeled source forums pooled into one training
/// set over the union of all spaces.
pub fn multi_source_cross_seed<T: Scalar, S: AsRef<[TrainingExample<T>]>>(
    sources: &[S],
    targets: &[TargetInstance<T>],
    config: &TransferConfig<T>,
) -> Result<CrossSeedOutcome<T>> {
    config.validate()?;
    if sources.is_empty() {
        return Err(Error::EmptyInput("no source forums"));
    }
    let target_space = shared_space(targets.iter().map(|t| &t.vector), "empty target")?;
    let mut union = (*target_space).clone();
    let mut source_ids = Vec::with_capacity(sources.len());
    for (i, src) in sources.iter().enumerate() {
        let space = shared_space(src.as_ref().iter().map(|e| &e.vector), "empty source")?;
        union = union_spaces(&space, &union)?;
        source_ids.push(format!("source-{i}"));
    }
    let union = Arc::new(union);

    let pooled: Vec<TrainingExample<T>> = sources
        .iter()
        .flat_map(|s| s.as_ref().iter())
        .map(|e| TrainingExample {
            key: e.key.clone(),
            label: e.label,
            vector: project(&e.vector, &union),
        })
        .collect();
    let source_model = train(&pooled, &config.hyperparams, config.rng_seed)?;

    let projected: Vec<TargetInstance<T>> = targets
        .iter()
        .map(|t| TargetInstance {
            key: t.key.clone(),
            vector: project(&t.vector, &union),
        })
        .collect();
    let ported = cross_port(&source_model, &projected);
    let seed = seed_from_predictions(&ported, &projected, config, &source_ids.join("+"))?;
    let model = train(&seed.training_examples(), &config.hyperparams, config.rng_seed)?;
    let predictions = cross_port(&model, &projected);

    let manifest = TransferManifest {
        source_ids,
        requested_threshold: seed.requested_threshold.as_f64(),
        final_threshold: seed.threshold.as_f64(),
        seed_positive: seed.count(Label::Positive),
        seed_negative: seed.count(Label::Negative),
        pre_balance_positive: seed.pre_balance.0,
        pre_balance_negative: seed.pre_balance.1,
        target_instances: targets.len(),
    };
    Ok(CrossSeedOutcome {
        union_space: union,
        source_model,
        cross_port: ported,
        seed,
        model,
        predictions,
        manifest,
    })
}
