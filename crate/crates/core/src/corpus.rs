//! Forum dumps, ground-truth label files, corpus statistics and balanced
//! sampling.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::extraction::{normalize_address, Tokenizer};

const SECONDS_PER_DAY: u64 = 86_400;

/// One forum message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub forum_id: String,
    pub thread_id: String,
    pub post_id: String,
    pub author_id: String,
    /// UTC seconds since the epoch.
    pub timestamp: u64,
    pub body: String,
}

/// A forum's posts, sorted by `(thread_id, timestamp, post_id)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forum {
    pub forum_id: String,
    posts: Vec<Post>,
}

impl Forum {
    /// Sorts the posts and rejects duplicate post ids.
    pub fn new(forum_id: impl Into<String>, mut posts: Vec<Post>) -> Result<Self> {
        let forum_id = forum_id.into();
        let mut seen = HashSet::with_capacity(posts.len());
        for (i, p) in posts.iter().enumerate() {
            if p.forum_id != forum_id {
                return Err(Error::MixedForum {
                    line: i + 1,
                    expected: forum_id,
                    found: p.forum_id.clone(),
                });
            }
            if !seen.insert(p.post_id.as_str()) {
                return Err(Error::DuplicatePost {
                    forum_id,
                    post_id: p.post_id.clone(),
                    line: i + 1,
                });
            }
        }
        posts.sort_by(|a, b| {
            (&a.thread_id, a.timestamp, &a.post_id).cmp(&(&b.thread_id, b.timestamp, &b.post_id))
        });
        Ok(Forum { forum_id, posts })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn post(&self, post_id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.post_id == post_id)
    }

    /// Post lookup table keyed by post id.
    pub fn index(&self) -> BTreeMap<&str, &Post> {
        self.posts.iter().map(|p| (p.post_id.as_str(), p)).collect()
    }
}

fn field_str(obj: &serde_json::Map<String, Value>, line: usize, field: &str) -> Result<String> {
    match obj.get(field) {
        None => Err(malformed(line, field, "missing")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(malformed(line, field, "expected a string")),
    }
}

fn malformed(line: usize, field: &str, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_record(text: &str, line: usize) -> Result<Post> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| malformed(line, "<record>", e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed(line, "<record>", "expected a JSON object"));
    };
    let forum_id = field_str(&obj, line, "forum_id")?;
    let thread_id = field_str(&obj, line, "thread_id")?;
    let post_id = field_str(&obj, line, "post_id")?;
    if post_id.is_empty() {
        return Err(malformed(line, "post_id", "must not be empty"));
    }
    let author_id = field_str(&obj, line, "author_id")?;
    let timestamp = match obj.get("timestamp") {
        None => return Err(malformed(line, "timestamp", "missing")),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| malformed(line, "timestamp", "expected a non-negative integer"))?,
    };
    let body = field_str(&obj, line, "body")?;
    Ok(Post {
        forum_id,
        thread_id,
        post_id,
        author_id,
        timestamp,
        body,
    })
}

/// Parse a line-delimited dump. Blank lines are skipped. `fallback_id`
/// names the forum when the dump has no records.
pub fn read_forum_dump<R: BufRead>(reader: R, fallback_id: &str) -> Result<Forum> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    let mut forum_id: Option<String> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(format!("<line {lineno}>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let post = parse_record(&line, lineno)?;
        match &forum_id {
            None => forum_id = Some(post.forum_id.clone()),
            Some(id) if *id != post.forum_id => {
                return Err(Error::MixedForum {
                    line: lineno,
                    expected: id.clone(),
                    found: post.forum_id,
                })
            }
            Some(_) => {}
        }
        if !seen.insert(post.post_id.clone()) {
            return Err(Error::DuplicatePost {
                forum_id: post.forum_id,
                post_id: post.post_id,
                line: lineno,
            });
        }
        posts.push(post);
    }
    Forum::new(forum_id.unwrap_or_else(|| fallback_id.to_string()), posts)
}

/// Load a forum dump from disk. An empty file yields an empty forum named
/// after the file stem.
pub fn load_forum_dump(path: impl AsRef<Path>) -> Result<Forum> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_forum_dump(BufReader::new(file), &stem)
}

/// Write one JSON record per line, in forum order.
pub fn write_forum_dump<W: Write>(forum: &Forum, mut out: W) -> Result<()> {
    for post in forum.posts() {
        serde_json::to_writer(&mut out, post)?;
        out.write_all(b"\n").map_err(|e| Error::io("<dump>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CorpusStats {
    pub posts: usize,
    pub threads: usize,
    pub users: usize,
}

pub fn corpus_stats(forum: &Forum) -> CorpusStats {
    let threads: HashSet<&str> = forum.posts().iter().map(|p| p.thread_id.as_str()).collect();
    let users: HashSet<&str> = forum.posts().iter().map(|p| p.author_id.as_str()).collect();
    CorpusStats {
        posts: forum.len(),
        threads: threads.len(),
        users: users.len(),
    }
}

/// Posting behaviour of one author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub author_id: String,
    pub post_count: usize,
    /// Tokens per post.
    pub mean_post_length: f64,
    /// Distinct UTC days with at least one post.
    pub active_days: usize,
    pub posts_per_active_day: f64,
    pub thread_count: usize,
}

/// One profile per distinct author.
pub fn author_profiles<Tk: Tokenizer + ?Sized>(
    forum: &Forum,
    tokenizer: &Tk,
) -> BTreeMap<String, AuthorProfile> {
    #[derive(Default)]
    struct Acc<'a> {
        posts: usize,
        tokens: usize,
        days: BTreeSet<u64>,
        threads: BTreeSet<&'a str>,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for p in forum.posts() {
        let a = acc.entry(p.author_id.as_str()).or_default();
        a.posts += 1;
        a.tokens += tokenizer.tokenize(&p.body).len();
        a.days.insert(p.timestamp / SECONDS_PER_DAY);
        a.threads.insert(p.thread_id.as_str());
    }
    acc.into_iter()
        .map(|(id, a)| {
            let active_days = a.days.len();
            let profile = AuthorProfile {
                author_id: id.to_string(),
                post_count: a.posts,
                mean_post_length: if a.posts > 0 {
                    a.tokens as f64 / a.posts as f64
                } else {
                    0.0
                },
                active_days,
                posts_per_active_day: if active_days > 0 {
                    a.posts as f64 / active_days as f64
                } else {
                    0.0
                },
                thread_count: a.threads.len(),
            };
            (id.to_string(), profile)
        })
        .collect()
}

/// Binary class. Positive means "genuine IP" for identification and
/// "malicious" for characterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Self {
        Label::from_bool(!self.is_positive())
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

/// Which ground-truth file a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    Identification,
    Characterization,
}

impl LabelKind {
    fn columns(self) -> &'static [&'static str] {
        match self {
            LabelKind::Identification => &["post_id", "span_start", "span_end", "label"],
            LabelKind::Characterization => &["post_id", "address", "label"],
        }
    }

    /// Label token used in the CSV files.
    pub fn token(self, label: Label) -> &'static str {
        match (self, label) {
            (LabelKind::Identification, Label::Positive) => "ip",
            (LabelKind::Identification, Label::Negative) => "not_ip",
            (LabelKind::Characterization, Label::Positive) => "malicious",
            (LabelKind::Characterization, Label::Negative) => "benign",
        }
    }

    fn parse_token(self, token: &str) -> Option<Label> {
        [Label::Positive, Label::Negative]
            .into_iter()
            .find(|&l| self.token(l) == token)
    }
}

/// Identifies one labeled instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExampleKey {
    /// A dot-decimal span inside a post body (byte offsets).
    Span {
        post_id: String,
        start: usize,
        end: usize,
    },
    /// An address mentioned in a post, canonical dotted-quad form.
    Address { post_id: String, address: String },
}

impl ExampleKey {
    pub fn post_id(&self) -> &str {
        match self {
            ExampleKey::Span { post_id, .. } | ExampleKey::Address { post_id, .. } => post_id,
        }
    }
}

impl fmt::Display for ExampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleKey::Span {
                post_id,
                start,
                end,
            } => write!(f, "{post_id}:{start}-{end}"),
            ExampleKey::Address { post_id, address } => write!(f, "{post_id}:{address}"),
        }
    }
}

/// Anything that carries a class label.
pub trait Labeled {
    fn label(&self) -> Label;
}

/// A ground-truth row, before features are attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub key: ExampleKey,
    pub label: Label,
}

impl Labeled for LabeledExample {
    fn label(&self) -> Label {
        self.label
    }
}

/// Parse a ground-truth CSV of the given kind.
pub fn read_labels<R: Read>(reader: R, kind: LabelKind) -> Result<Vec<LabeledExample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = kind.columns();
    if header != expected {
        return Err(malformed(
            1,
            "header",
            format!("expected `{}`, found `{}`", expected.join(","), header.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut keys = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let post_id = rec[0].to_string();
        let (key, label_text) = match kind {
            LabelKind::Identification => {
                let start: usize = rec[1]
                    .parse()
                    .map_err(|_| malformed(row, "span_start", "expected an integer"))?;
                let end: usize = rec[2]
                    .parse()
                    .map_err(|_| malformed(row, "span_end", "expected an integer"))?;
                if end < start {
                    return Err(malformed(row, "span_end", "span_end precedes span_start"));
                }
                (
                    ExampleKey::Span {
                        post_id,
                        start,
                        end,
                    },
                    &rec[3],
                )
            }
            LabelKind::Characterization => {
                let address = normalize_address(&rec[1])
                    .ok_or_else(|| malformed(row, "address", "not a dotted-quad address"))?;
                (ExampleKey::Address { post_id, address }, &rec[2])
            }
        };
        let label = kind.parse_token(label_text).ok_or_else(|| Error::UnknownLabel {
            row,
            label: label_text.to_string(),
        })?;
        if !keys.insert(key.clone()) {
            return Err(Error::DuplicateKey(key.to_string()));
        }
        out.push(LabeledExample { key, label });
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>, kind: LabelKind) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, kind)
}

/// Write labels in the ground-truth CSV format. Keys must match `kind`.
pub fn write_labels<W: Write>(examples: &[LabeledExample], kind: LabelKind, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(kind.columns())?;
    for ex in examples {
        match (&ex.key, kind) {
            (
                ExampleKey::Span {
                    post_id,
                    start,
                    end,
                },
                LabelKind::Identification,
            ) => w.write_record([
                post_id.as_str(),
                &start.to_string(),
                &end.to_string(),
                kind.token(ex.label),
            ])?,
            (ExampleKey::Address { post_id, address }, LabelKind::Characterization) => {
                w.write_record([post_id.as_str(), address, kind.token(ex.label)])?
            }
            (key, _) => {
                return Err(Error::InvalidConfig(format!(
                    "key `{key}` does not fit a {kind:?} label file"
                )))
            }
        }
    }
    w.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

/// Downsample the majority class to the minority count. Survivors keep
/// their input order; the choice depends only on input order and `rng_seed`.
pub fn balanced_sample<E: Labeled + Clone>(examples: &[E], rng_seed: u64) -> Result<Vec<E>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..examples.len()).partition(|&i| examples[i].label().is_positive());
    if pos.is_empty() {
        return Err(Error::MissingClass("positive"));
    }
    if neg.is_empty() {
        return Err(Error::MissingClass("negative"));
    }
    let target = pos.len().min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut keep = minority;
    keep.extend(
        index::sample(&mut rng, majority.len(), target)
            .into_iter()
            .map(|i| majority[i]),
    );
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| examples[i].clone()).collect())
}
