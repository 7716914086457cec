//! End-to-end flow: identify dot-decimal candidates, characterize the ones
//! judged to be addresses, and aggregate mentions into per-address reports.
//!
//! Also holds the dataset builders that turn a forum plus ground-truth rows
//! into vectorized training examples, or a forum alone into unlabeled
//! transfer targets.

mod blacklist;
mod report;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use blacklist::{compare_addresses, compare_blacklist, compare_with, parse_blacklist, BlacklistOverlap, BlacklistSource, FileBlacklist};
pub use report::{
    aggregate_report, read_mentions_csv, read_report_csv, write_mentions_csv, write_report_csv, IpReport,
    MentionRef, ReportRow,
};

use crate::classifier::{predict_proba, Model, TrainingExample};
use crate::corpus::{author_profiles, AuthorProfile, ExampleKey, Forum, LabeledExample};
use crate::error::{Error, Result};
use crate::extraction::{
    extract_candidates, tokenize, Candidate, ForumTokenizer, WordRange,
};
use crate::features::{
    build_space, characterization_document, characterization_vector, identification_document,
    identification_vector, FeatureSet, FeatureSpace, SpaceOptions,
};
use crate::scalar::Scalar;
use crate::transfer::TargetInstance;

/// A candidate with its identification score.
#[derive(Debug, Clone)]
pub struct Identified<T> {
    pub candidate: Candidate,
    pub p_is_ip: T,
}

/// One scored address mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mention<T> {
    pub address: String,
    pub post_id: String,
    pub span: (usize, usize),
    pub p_is_ip: T,
    pub p_malicious: T,
    pub timestamp: u64,
}

/// Every candidate of the forum, in forum order.
pub fn forum_candidates(forum: &Forum, range: WordRange) -> Vec<Candidate> {
    forum
        .posts()
        .iter()
        .flat_map(|p| extract_candidates(p, range))
        .collect()
}

fn check_set(set: FeatureSet, identification: bool) -> Result<()> {
    if set.is_identification() == identification {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "`{set}` is not a {} feature set",
            if identification { "identification" } else { "characterization" }
        )))
    }
}

/// Space over the context windows of `candidates`.
pub fn identification_space<T: Scalar>(
    candidates: &[Candidate],
    set: FeatureSet,
    min_df: usize,
) -> Result<FeatureSpace<T>> {
    check_set(set, true)?;
    let docs: Vec<Vec<String>> = candidates.iter().map(identification_document).collect();
    build_space(
        &docs,
        SpaceOptions {
            min_df,
            ..set.space_options()
        },
    )
}

fn span_key(c: &Candidate) -> ExampleKey {
    ExampleKey::Span {
        post_id: c.post_id.clone(),
        start: c.span.0,
        end: c.span.1,
    }
}

/// Vectorize identification ground truth. The space covers every candidate
/// of the forum, labeled or not.
pub fn identification_examples<T: Scalar>(
    forum: &Forum,
    labels: &[LabeledExample],
    range: WordRange,
    set: FeatureSet,
) -> Result<Vec<TrainingExample<T>>> {
    let candidates = forum_candidates(forum, range);
    let space = Arc::new(identification_space(&candidates, set, 1)?);
    let by_key: HashMap<ExampleKey, &Candidate> = candidates.iter().map(|c| (span_key(c), c)).collect();
    labels
        .iter()
        .map(|l| {
            let c = by_key.get(&l.key).ok_or_else(|| {
                Error::InvalidConfig(format!("label `{}` matches no dot-decimal candidate", l.key))
            })?;
            Ok(TrainingExample {
                key: l.key.clone(),
                label: l.label,
                vector: identification_vector(c, &space, set)?,
            })
        })
        .collect()
}

/// Every candidate of the forum as an unlabeled transfer target.
pub fn identification_targets<T: Scalar>(
    forum: &Forum,
    range: WordRange,
    set: FeatureSet,
) -> Result<Vec<TargetInstance<T>>> {
    let candidates = forum_candidates(forum, range);
    let space = Arc::new(identification_space(&candidates, set, 1)?);
    candidates
        .iter()
        .map(|c| {
            Ok(TargetInstance {
                key: span_key(c),
                vector: identification_vector(c, &space, set)?,
            })
        })
        .collect()
}

fn address_parts(key: &ExampleKey) -> Result<(&str, &str)> {
    match key {
        ExampleKey::Address { post_id, address } => Ok((post_id, address)),
        other => Err(Error::InvalidConfig(format!(
            "`{other}` is not an address key"
        ))),
    }
}

/// Vectorize `(post, address)` keys, one document per key.
fn characterization_vectors<T: Scalar>(
    forum: &Forum,
    keys: &[&ExampleKey],
    set: FeatureSet,
) -> Result<Vec<crate::features::FeatureVector<T>>> {
    check_set(set, false)?;
    let index = forum.index();
    let mut resolved = Vec::with_capacity(keys.len());
    let mut docs = Vec::with_capacity(keys.len());
    for key in keys {
        let (post_id, address) = address_parts(key)?;
        let post = *index
            .get(post_id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown post `{post_id}`")))?;
        docs.push(characterization_document(&tokenize(&post.body), address));
        resolved.push((post, address));
    }
    let space = Arc::new(build_space::<T, _, _>(&docs, set.space_options())?);
    let profiles = profiles_for(forum, set);
    resolved
        .into_iter()
        .map(|(post, address)| {
            characterization_vector(post, address, &space, set, profiles.get(&post.author_id))
        })
        .collect()
}

fn profiles_for(forum: &Forum, set: FeatureSet) -> BTreeMap<String, AuthorProfile> {
    if set == FeatureSet::ContextInfo {
        author_profiles(forum, &ForumTokenizer)
    } else {
        BTreeMap::new()
    }
}

/// Vectorize characterization ground truth.
pub fn characterization_examples<T: Scalar>(
    forum: &Forum,
    labels: &[LabeledExample],
    set: FeatureSet,
) -> Result<Vec<TrainingExample<T>>> {
    let keys: Vec<&ExampleKey> = labels.iter().map(|l| &l.key).collect();
    let vectors = characterization_vectors(forum, &keys, set)?;
    Ok(labels
        .iter()
        .zip(vectors)
        .map(|(l, vector)| TrainingExample {
            key: l.key.clone(),
            label: l.label,
            vector,
        })
        .collect())
}

/// Address mentions as unlabeled characterization targets.
pub fn characterization_targets<T: Scalar>(
    forum: &Forum,
    keys: &[ExampleKey],
    set: FeatureSet,
) -> Result<Vec<TargetInstance<T>>> {
    let refs: Vec<&ExampleKey> = keys.iter().collect();
    let vectors = characterization_vectors(forum, &refs, set)?;
    Ok(keys
        .iter()
        .zip(vectors)
        .map(|(k, vector)| TargetInstance {
            key: k.clone(),
            vector,
        })
        .collect())
}

/// Distinct `(post, address)` keys of the identified candidates scored at
/// least one half, in forum order.
pub fn identified_address_keys<T: Scalar>(identified: &[Identified<T>]) -> Vec<ExampleKey> {
    let mut seen = std::collections::HashSet::new();
    identified
        .iter()
        .filter(|i| i.p_is_ip >= T::of(0.5))
        .map(|i| ExampleKey::Address {
            post_id: i.candidate.post_id.clone(),
            address: i.candidate.address(),
        })
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

/// Score every candidate of the forum with an identification model.
pub fn run_identification<T: Scalar>(
    forum: &Forum,
    model: &Model<T>,
    range: WordRange,
    set: FeatureSet,
) -> Result<Vec<Identified<T>>> {
    check_set(set, true)?;
    forum_candidates(forum, range)
        .into_iter()
        .map(|candidate| {
            let v = identification_vector(&candidate, model.space(), set)?;
            Ok(Identified {
                p_is_ip: predict_proba(model, &v),
                candidate,
            })
        })
        .collect()
}

/// Score the maliciousness of every candidate identified as an address
/// (`p_is_ip >= 0.5`).
pub fn run_characterization<T: Scalar>(
    identified: &[Identified<T>],
    forum: &Forum,
    model: &Model<T>,
    set: FeatureSet,
) -> Result<Vec<Mention<T>>> {
    check_set(set, false)?;
    let index = forum.index();
    let profiles = profiles_for(forum, set);
    identified
        .iter()
        .filter(|i| i.p_is_ip >= T::of(0.5))
        .map(|i| {
            let c = &i.candidate;
            let post = *index
                .get(c.post_id.as_str())
                .ok_or_else(|| Error::InvalidConfig(format!("unknown post `{}`", c.post_id)))?;
            let address = c.address();
            let v = characterization_vector(post, &address, model.space(), set, profiles.get(&post.author_id))?;
            Ok(Mention {
                p_malicious: predict_proba(model, &v),
                address,
                post_id: c.post_id.clone(),
                span: c.span,
                p_is_ip: i.p_is_ip,
                timestamp: post.timestamp,
            })
        })
        .collect()
}
