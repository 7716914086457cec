//! Feature spaces and sparse tf-idf vectors for both classification problems.
//!
//! A [`FeatureSpace`] is an ordered list of named dimensions: `word:<token>`
//! dimensions carrying a smoothed idf, four optional `octet:<i>` dimensions
//! and five optional `author:<field>` dimensions. Word entries are
//! `count * idf` with `idf(w) = ln(N / (1 + df(w))) + 1`; no normalization.
//!
//! The "document" behind df counts is the candidate's context window for
//! identification and the whole post (minus the address token) for
//! characterization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorProfile, Post};
use crate::error::{Error, Result};
use crate::extraction::{normalize_address, tokenize, Candidate, Token};
use crate::scalar::Scalar;

/// On-disk format version of serialized feature spaces.
pub const SPACE_FORMAT_VERSION: u32 = 1;

/// Author behaviour fields used by the `ContextInfo` feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuthorField {
    PostCount,
    MeanPostLength,
    ActiveDays,
    PostsPerActiveDay,
    ThreadCount,
}

impl AuthorField {
    pub const ALL: [AuthorField; 5] = [
        AuthorField::PostCount,
        AuthorField::MeanPostLength,
        AuthorField::ActiveDays,
        AuthorField::PostsPerActiveDay,
        AuthorField::ThreadCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AuthorField::PostCount => "post_count",
            AuthorField::MeanPostLength => "mean_post_length",
            AuthorField::ActiveDays => "active_days",
            AuthorField::PostsPerActiveDay => "posts_per_active_day",
            AuthorField::ThreadCount => "thread_count",
        }
    }

    pub fn value(self, p: &AuthorProfile) -> f64 {
        match self {
            AuthorField::PostCount => p.post_count as f64,
            AuthorField::MeanPostLength => p.mean_post_length,
            AuthorField::ActiveDays => p.active_days as f64,
            AuthorField::PostsPerActiveDay => p.posts_per_active_day,
            AuthorField::ThreadCount => p.thread_count as f64,
        }
    }
}

/// A named feature dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Word(String),
    /// Octet position, 1 through 4.
    Octet(u8),
    Author(AuthorField),
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dimension::Word(w) => write!(f, "word:{w}"),
            Dimension::Octet(i) => write!(f, "octet:{i}"),
            Dimension::Author(a) => write!(f, "author:{}", a.name()),
        }
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::FeatureSpace(format!("bad dimension name `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "word" if !rest.is_empty() => Ok(Dimension::Word(rest.to_string())),
            "octet" => match rest.parse::<u8>() {
                Ok(i @ 1..=4) => Ok(Dimension::Octet(i)),
                _ => Err(bad()),
            },
            "author" => AuthorField::ALL
                .into_iter()
                .find(|a| a.name() == rest)
                .map(Dimension::Author)
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

/// Which features a vector is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Identification: tf-idf of the context window.
    TextInfo,
    /// Identification: the four raw octet values.
    DecimalVal,
    /// Identification: `TextInfo` and `DecimalVal` together.
    Mixed,
    /// Characterization: tf-idf of the whole post.
    PostText,
    /// Characterization: `PostText` plus author profile fields.
    ContextInfo,
}

impl FeatureSet {
    pub fn is_identification(self) -> bool {
        matches!(
            self,
            FeatureSet::TextInfo | FeatureSet::DecimalVal | FeatureSet::Mixed
        )
    }

    pub fn uses_words(self) -> bool {
        self != FeatureSet::DecimalVal
    }

    pub fn uses_octets(self) -> bool {
        matches!(self, FeatureSet::DecimalVal | FeatureSet::Mixed)
    }

    /// Space options required by vectors of this set.
    pub fn space_options(self) -> SpaceOptions {
        SpaceOptions {
            octets: self.uses_octets(),
            author: self == FeatureSet::ContextInfo,
            min_df: 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::TextInfo => "textinfo",
            FeatureSet::DecimalVal => "decimalval",
            FeatureSet::Mixed => "mixed",
            FeatureSet::PostText => "posttext",
            FeatureSet::ContextInfo => "contextinfo",
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            FeatureSet::TextInfo,
            FeatureSet::DecimalVal,
            FeatureSet::Mixed,
            FeatureSet::PostText,
            FeatureSet::ContextInfo,
        ]
        .into_iter()
        .find(|f| f.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown feature set `{s}`")))
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceOptions {
    /// Append the four `octet:<i>` dimensions.
    pub octets: bool,
    /// Append the `author:<field>` dimensions.
    pub author: bool,
    /// Minimum document frequency for a word to get a dimension.
    pub min_df: usize,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        SpaceOptions {
            octets: false,
            author: false,
            min_df: 1,
        }
    }
}

/// Smoothed inverse document frequency.
pub fn smoothed_idf<T: Scalar>(document_count: usize, df: usize) -> T {
    (T::of_usize(document_count) / T::of_usize(1 + df)).ln() + T::one()
}

/// Named dimensions plus document statistics. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpaceFile<T>", try_from = "SpaceFile<T>")]
#[serde(bound = "T: Scalar")]
pub struct FeatureSpace<T> {
    dimensions: Vec<Dimension>,
    word_index: HashMap<String, usize>,
    /// Document frequency per dimension, zero for non-word dimensions.
    df: Vec<usize>,
    /// Idf per dimension, one for non-word dimensions.
    idf: Vec<T>,
    document_count: usize,
    options: SpaceOptions,
}

impl<T: Scalar> FeatureSpace<T> {
    fn from_counts(
        df: BTreeMap<String, usize>,
        document_count: usize,
        options: SpaceOptions,
    ) -> Result<Self> {
        if document_count == 0 {
            return Err(Error::EmptyInput("feature space needs at least one document"));
        }
        let mut dimensions = Vec::with_capacity(df.len() + 9);
        let mut dfs = Vec::with_capacity(dimensions.capacity());
        let mut idf = Vec::with_capacity(dimensions.capacity());
        let mut word_index = HashMap::with_capacity(df.len());
        for (word, count) in df {
            word_index.insert(word.clone(), dimensions.len());
            idf.push(smoothed_idf(document_count, count));
            dfs.push(count);
            dimensions.push(Dimension::Word(word));
        }
        if options.octets {
            for i in 1..=4 {
                dimensions.push(Dimension::Octet(i));
                dfs.push(0);
                idf.push(T::one());
            }
        }
        if options.author {
            for a in AuthorField::ALL {
                dimensions.push(Dimension::Author(a));
                dfs.push(0);
                idf.push(T::one());
            }
        }
        if dimensions.is_empty() {
            return Err(Error::EmptyInput("no usable tokens for the feature space"));
        }
        Ok(FeatureSpace {
            dimensions,
            word_index,
            df: dfs,
            idf,
            document_count,
            options,
        })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn options(&self) -> SpaceOptions {
        self.options
    }

    pub fn word_count(&self) -> usize {
        self.word_index.len()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    pub fn df(&self, word: &str) -> Option<usize> {
        self.word_index(word).map(|i| self.df[i])
    }

    pub fn idf(&self, word: &str) -> Option<T> {
        self.word_index(word).map(|i| self.idf[i])
    }

    /// Idf by dimension index; one for non-word dimensions.
    pub fn idf_at(&self, index: usize) -> T {
        self.idf[index]
    }

    pub fn index_of(&self, dim: &Dimension) -> Option<usize> {
        match dim {
            Dimension::Word(w) => self.word_index(w),
            _ => self.dimensions.iter().position(|d| d == dim),
        }
    }

    fn octet_index(&self, position: u8) -> Option<usize> {
        self.options
            .octets
            .then(|| self.word_index.len() + usize::from(position) - 1)
    }

    fn author_index(&self, field: AuthorField) -> Option<usize> {
        let base = self.word_index.len() + if self.options.octets { 4 } else { 0 };
        self.options
            .author
            .then(|| base + AuthorField::ALL.iter().position(|&a| a == field).unwrap())
    }

    fn word_dfs(&self) -> BTreeMap<String, usize> {
        self.word_index
            .iter()
            .map(|(w, &i)| (w.clone(), self.df[i]))
            .collect()
    }

    /// Tf-idf entries for a bag of tokens; unknown tokens are dropped.
    fn weigh<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<(usize, T)> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.word_index(t) {
                *counts.entry(i).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .map(|(i, c)| (i, T::of_usize(c) * self.idf[i]))
            .collect()
    }
}

/// Build a space from token documents.
pub fn build_space<T, D, S>(documents: &[D], options: SpaceOptions) -> Result<FeatureSpace<T>>
where
    T: Scalar,
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    if documents.is_empty() {
        return Err(Error::EmptyInput("no documents"));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in documents {
        let distinct: BTreeSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        for w in distinct {
            if !w.is_empty() {
                *df.entry(w.to_string()).or_default() += 1;
            }
        }
    }
    df.retain(|_, &mut c| c >= options.min_df.max(1));
    FeatureSpace::from_counts(df, documents.len(), options)
}

/// Merge two spaces: dimension union, summed document counts and df, idf
/// recomputed from the combined counts.
pub fn union_spaces<T: Scalar>(a: &FeatureSpace<T>, b: &FeatureSpace<T>) -> Result<FeatureSpace<T>> {
    if a.options.octets != b.options.octets || a.options.author != b.options.author {
        return Err(Error::FeatureSpace(format!(
            "cannot union spaces with different layouts ({:?} vs {:?})",
            a.options, b.options
        )));
    }
    let mut df = a.word_dfs();
    for (w, c) in b.word_dfs() {
        *df.entry(w).or_default() += c;
    }
    let options = SpaceOptions {
        min_df: a.options.min_df.min(b.options.min_df),
        ..a.options
    };
    FeatureSpace::from_counts(df, a.document_count + b.document_count, options)
}

/// Sparse vector over a feature space; entries sorted by dimension index.
#[derive(Debug, Clone)]
pub struct FeatureVector<T> {
    space: Arc<FeatureSpace<T>>,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> FeatureVector<T> {
    /// Entries must be sorted by index, unique, and inside `space`.
    pub fn from_entries(space: Arc<FeatureSpace<T>>, mut entries: Vec<(usize, T)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::FeatureSpace("duplicate vector entry".into()));
        }
        if entries.last().is_some_and(|&(i, _)| i >= space.len()) {
            return Err(Error::FeatureSpace("vector entry outside its space".into()));
        }
        Ok(FeatureVector { space, entries })
    }

    pub fn empty(space: Arc<FeatureSpace<T>>) -> Self {
        FeatureVector {
            space,
            entries: Vec::new(),
        }
    }

    pub fn space(&self) -> &Arc<FeatureSpace<T>> {
        &self.space
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dim: &Dimension) -> Option<T> {
        let i = self.space.index_of(dim)?;
        self.entries
            .binary_search_by_key(&i, |&(j, _)| j)
            .ok()
            .map(|k| self.entries[k].1)
    }

    /// `(dimension, value)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&Dimension, T)> {
        self.entries
            .iter()
            .map(|&(i, v)| (&self.space.dimensions[i], v))
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }
}

/// True when both handles denote the same space.
pub fn same_space<T: Scalar>(a: &Arc<FeatureSpace<T>>, b: &Arc<FeatureSpace<T>>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// The tokens of a candidate's context window.
pub fn identification_document(candidate: &Candidate) -> Vec<String> {
    candidate.context().map(|t| t.text.clone()).collect()
}

/// The tokens of a post, minus every occurrence of `address`.
pub fn characterization_document(tokens: &[Token], address: &str) -> Vec<String> {
    let target = normalize_address(address);
    tokens
        .iter()
        .filter(|t| t.text != address && (target.is_none() || normalize_address(&t.text) != target))
        .map(|t| t.text.clone())
        .collect()
}

/// Identification vector for one candidate.
pub fn identification_vector<T: Scalar>(
    candidate: &Candidate,
    space: &Arc<FeatureSpace<T>>,
    set: FeatureSet,
) -> Result<FeatureVector<T>> {
    if !set.is_identification() {
        return Err(Error::InvalidConfig(format!(
            "`{set}` is not an identification feature set"
        )));
    }
    let mut entries = Vec::new();
    if set.uses_words() {
        entries.extend(space.weigh(candidate.context().map(|t| t.text.as_str())));
    }
    if set.uses_octets() {
        for (k, &x) in candidate.octets.iter().enumerate() {
            let i = space.octet_index(k as u8 + 1).ok_or_else(|| {
                Error::FeatureSpace(format!("`{set}` needs a space with octet dimensions"))
            })?;
            entries.push((i, T::of(f64::from(x))));
        }
    }
    Ok(FeatureVector {
        space: Arc::clone(space),
        entries,
    })
}

/// Characterization vector for one address mention in `post`.
pub fn characterization_vector<T: Scalar>(
    post: &Post,
    address: &str,
    space: &Arc<FeatureSpace<T>>,
    set: FeatureSet,
    profile: Option<&AuthorProfile>,
) -> Result<FeatureVector<T>> {
    let doc = characterization_document(&tokenize(&post.body), address);
    let mut entries = match set {
        FeatureSet::PostText | FeatureSet::ContextInfo => space.weigh(doc.iter().map(String::as_str)),
        other => {
            return Err(Error::InvalidConfig(format!(
                "`{other}` is not a characterization feature set"
            )))
        }
    };
    if set == FeatureSet::ContextInfo {
        let profile = profile.ok_or_else(|| {
            Error::InvalidConfig("ContextInfo needs the author's profile".into())
        })?;
        for field in AuthorField::ALL {
            let i = space.author_index(field).ok_or_else(|| {
                Error::FeatureSpace("ContextInfo needs a space with author dimensions".into())
            })?;
            entries.push((i, T::of(field.value(profile))));
        }
    }
    Ok(FeatureVector {
        space: Arc::clone(space),
        entries,
    })
}

/// Re-express `v` in `target`. Dimensions missing from `target` are dropped;
/// word entries are rescaled from the source idf to the target idf.
pub fn project<T: Scalar>(v: &FeatureVector<T>, target: &Arc<FeatureSpace<T>>) -> FeatureVector<T> {
    if Arc::ptr_eq(&v.space, target) {
        return v.clone();
    }
    let src = &v.space;
    let mut entries: Vec<(usize, T)> = v
        .entries
        .iter()
        .filter_map(|&(i, value)| {
            let j = match &src.dimensions[i] {
                Dimension::Word(w) => target.word_index(w)?,
                Dimension::Octet(k) => target.octet_index(*k)?,
                Dimension::Author(a) => target.author_index(*a)?,
            };
            let (from, to) = (src.idf[i], target.idf[j]);
            let value = if from == to { value } else { value / from * to };
            Some((j, value))
        })
        .collect();
    entries.sort_by_key(|&(j, _)| j);
    FeatureVector {
        space: Arc::clone(target),
        entries,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct SpaceFile<T> {
    format_version: u32,
    document_count: usize,
    min_df: usize,
    dimensions: Vec<String>,
    df: Vec<usize>,
    idf: Vec<T>,
}

impl<T: Scalar> From<FeatureSpace<T>> for SpaceFile<T> {
    fn from(s: FeatureSpace<T>) -> Self {
        SpaceFile {
            format_version: SPACE_FORMAT_VERSION,
            document_count: s.document_count,
            min_df: s.options.min_df,
            dimensions: s.dimensions.iter().map(ToString::to_string).collect(),
            df: s.df,
            idf: s.idf,
        }
    }
}

impl<T: Scalar> TryFrom<SpaceFile<T>> for FeatureSpace<T> {
    type Error = Error;

    fn try_from(f: SpaceFile<T>) -> Result<Self> {
        if f.format_version != SPACE_FORMAT_VERSION {
            return Err(Error::Version {
                found: f.format_version,
                expected: SPACE_FORMAT_VERSION,
            });
        }
        if f.df.len() != f.dimensions.len() {
            return Err(Error::FeatureSpace("df table length mismatch".into()));
        }
        let mut words = BTreeMap::new();
        let mut options = SpaceOptions {
            min_df: f.min_df,
            ..SpaceOptions::default()
        };
        for (name, &df) in f.dimensions.iter().zip(&f.df) {
            match name.parse::<Dimension>()? {
                Dimension::Word(w) => {
                    words.insert(w, df);
                }
                Dimension::Octet(_) => options.octets = true,
                Dimension::Author(_) => options.author = true,
            }
        }
        let space = FeatureSpace::from_counts(words, f.document_count, options)?;
        if space.dimensions.iter().map(ToString::to_string).ne(f.dimensions.iter().cloned()) {
            return Err(Error::FeatureSpace("dimension list is not in canonical order".into()));
        }
        Ok(space)
    }
}
