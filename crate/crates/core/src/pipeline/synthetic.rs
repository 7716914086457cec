//! Seeded synthetic forums with known labels.
//!
//! Every post carries exactly one dot-decimal candidate. Genuine addresses
//! take realistic octets; look-alikes take the small field values of version
//! strings. Class-signal words for identification sit next to the candidate,
//! with random-class distractors a few tokens further out. Class-signal words
//! for characterization sit in a sentence elsewhere in the post.
//!
//! Each class of each problem has `vocab_size` signal slots. The target
//! forum owns one word per slot. A source forum shares the target word for a
//! `1 - vocabulary_shift` block of slots and uses words of its own for the
//! rest; with several sources the shared blocks start at evenly spaced
//! offsets, so their coverage is complementary. Source-only words still turn
//! up in the target, but as background noise unrelated to any label.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExampleKey, Forum, Label, LabeledExample, Post};
use crate::error::{Error, Result};
use crate::extraction::format_octets;

const MAX_VOCAB: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Signal words per class and problem.
    pub vocab_size: usize,
    pub posts_per_forum: usize,
    /// Fraction of signal slots a source does not share with the target.
    pub vocabulary_shift: f64,
    /// Probability that a recorded label is flipped.
    pub label_noise: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 24,
            posts_per_forum: 2000,
            vocabulary_shift: 0.0,
            label_noise: 0.0,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.vocab_size > MAX_VOCAB {
            return Err(Error::InvalidConfig(format!("vocab_size must lie in 1..={MAX_VOCAB}")));
        }
        if self.posts_per_forum == 0 {
            return Err(Error::InvalidConfig("posts_per_forum must be positive".into()));
        }
        for (name, v) in [("vocabulary_shift", self.vocabulary_shift), ("label_noise", self.label_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// A generated forum with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticForum {
    pub forum: Forum,
    /// One row per candidate.
    pub identification: Vec<LabeledExample>,
    /// One row per genuine address mention.
    pub characterization: Vec<LabeledExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub sources: Vec<SyntheticForum>,
    /// Labels here are for scoring only.
    pub target: SyntheticForum,
}

impl SyntheticCorpus {
    pub fn source(&self) -> &SyntheticForum {
        &self.sources[0]
    }
}

const IP_CONTEXT: &[&str] = &[
    "server", "address", "host", "hosts", "ip", "ping", "connect", "proxy", "gateway", "dns", "blocked",
    "firewall", "traffic", "port", "domain", "resolve", "lookup", "whois", "subnet", "nameserver", "tracert",
    "socks", "netstat", "routing",
];
const VERSION_CONTEXT: &[&str] = &[
    "version", "update", "build", "release", "firmware", "installed", "recovery", "menu", "driver", "patch",
    "upgrade", "app", "rom", "kernel", "flash", "changelog", "beta", "android", "stable", "download",
    "rollback", "bios", "nightly", "installer",
];
const MALICIOUS: &[&str] = &[
    "hijacked", "malware", "infected", "redirect", "trojan", "botnet", "phishing", "attack", "spam", "exploit",
    "ransomware", "virus", "rootkit", "keylogger", "backdoor", "scam", "adware", "worm", "spyware",
    "compromised", "ddos", "bruteforce", "miner", "payload",
];
const BENIGN: &[&str] = &[
    "config", "router", "home", "lan", "static", "dhcp", "printer", "local", "office", "nas", "vpn", "setup",
    "modem", "wifi", "netmask", "switch", "laptop", "desktop", "camera", "console", "bridge", "media", "tv",
    "backup",
];
const FILLERS: &[&str] = &[
    "the", "a", "i", "my", "it", "to", "and", "was", "is", "this", "that", "after", "when", "with", "for", "on",
    "in", "of", "have", "just", "but", "so", "can", "not", "any", "help", "thanks", "please", "some", "what",
    "how", "get", "got", "now", "then", "also", "still", "same", "again", "here",
];
const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pu", "do", "fe", "gi", "ha", "ju", "be",
];

/// Signal-word roles: (problem, class).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    IpContext,
    VersionContext,
    Malicious,
    Benign,
}

impl Role {
    fn index(self) -> usize {
        self as usize
    }

    fn real_words(self) -> &'static [&'static str] {
        match self {
            Role::IpContext => IP_CONTEXT,
            Role::VersionContext => VERSION_CONTEXT,
            Role::Malicious => MALICIOUS,
            Role::Benign => BENIGN,
        }
    }

    fn ident(is_ip: bool) -> Self {
        if is_ip {
            Role::IpContext
        } else {
            Role::VersionContext
        }
    }

    fn charac(malicious: bool) -> Self {
        if malicious {
            Role::Malicious
        } else {
            Role::Benign
        }
    }
}

/// Ten-letter pseudo-word, unique per id and never a real word of the lists.
fn pseudo_word(id: usize) -> String {
    (0..5).map(|k| SYLLABLES[(id >> (4 * k)) & 15]).collect()
}

/// Word for a slot; `owner` 0 is the target, `i + 1` is source `i`.
fn slot_word(role: Role, slot: usize, owner: usize) -> String {
    let real = role.real_words();
    if owner == 0 && slot < real.len() {
        return real[slot].to_string();
    }
    pseudo_word(((owner * 4 + role.index()) << 10) | slot)
}

struct Vocabulary {
    /// `[role][slot]`.
    signal: [Vec<String>; 4],
    /// Words with no label meaning in this forum.
    retired_ident: Vec<String>,
    retired_charac: Vec<String>,
}

impl Vocabulary {
    fn target(spec: &SyntheticSpec, sources: usize) -> Self {
        let k = spec.vocab_size;
        let signal: [Vec<String>; 4] = [Role::IpContext, Role::VersionContext, Role::Malicious, Role::Benign]
            .map(|r| (0..k).map(|j| slot_word(r, j, 0)).collect());
        let (mut retired_ident, mut retired_charac) = (Vec::new(), Vec::new());
        for i in 0..sources {
            let src = Vocabulary::source(spec, i, sources);
            for role in [Role::IpContext, Role::VersionContext, Role::Malicious, Role::Benign] {
                let bucket = if role.index() < 2 { &mut retired_ident } else { &mut retired_charac };
                bucket.extend(
                    src.signal[role.index()]
                        .iter()
                        .filter(|w| !signal[role.index()].contains(w))
                        .cloned(),
                );
            }
        }
        Vocabulary {
            signal,
            retired_ident,
            retired_charac,
        }
    }

    fn source(spec: &SyntheticSpec, index: usize, sources: usize) -> Self {
        let k = spec.vocab_size;
        let keep = ((1.0 - spec.vocabulary_shift) * k as f64).round() as usize;
        let offset = index * k / sources;
        let shared = |j: usize| (j + k - offset) % k < keep;
        let signal = [Role::IpContext, Role::VersionContext, Role::Malicious, Role::Benign].map(|r| {
            (0..k)
                .map(|j| slot_word(r, j, if shared(j) { 0 } else { index + 1 }))
                .collect()
        });
        Vocabulary {
            signal,
            retired_ident: Vec::new(),
            retired_charac: Vec::new(),
        }
    }

    fn pick<'a>(&'a self, role: Role, rng: &mut ChaCha8Rng) -> &'a str {
        self.signal[role.index()].choose(rng).expect("vocab_size > 0")
    }
}

const FAR_SLOTS: usize = 4;
const NEAR_SLOTS: usize = 2;
const P_NEAR_SIGNAL: f64 = 0.7;
const P_FAR_DISTRACTOR: f64 = 0.6;
const P_CHARAC_DISTRACTOR: f64 = 0.2;
const P_RETIRED: f64 = 0.25;
const P_REUSE_ADDRESS: f64 = 0.2;

fn filler(rng: &mut ChaCha8Rng) -> &'static str {
    FILLERS.choose(rng).expect("non-empty")
}

fn ip_octets(rng: &mut ChaCha8Rng) -> [u8; 4] {
    [rng.gen_range(1..=223), rng.gen(), rng.gen(), rng.gen()]
}

fn version_octets(rng: &mut ChaCha8Rng) -> [u8; 4] {
    [
        rng.gen_range(0..=10),
        rng.gen_range(0..=30),
        rng.gen_range(0..=200),
        rng.gen_range(0..=50),
    ]
}

fn noisy(label: Label, noise: f64, rng: &mut ChaCha8Rng) -> Label {
    if noise > 0.0 && rng.gen_bool(noise) {
        label.flipped()
    } else {
        label
    }
}

fn generate_forum(spec: &SyntheticSpec, forum_id: &str, vocab: &Vocabulary, stream: u64) -> Result<SyntheticForum> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(stream);
    let authors = (spec.posts_per_forum / 10).max(1);
    let mut thread = 0usize;
    let mut timestamp: u64 = 1_400_000_000 + rng.gen_range(0..86_400);
    let mut posts = Vec::with_capacity(spec.posts_per_forum);
    let mut identification = Vec::with_capacity(spec.posts_per_forum);
    let mut characterization = Vec::new();
    let mut used: [Vec<[u8; 4]>; 2] = [Vec::new(), Vec::new()];

    for i in 0..spec.posts_per_forum {
        if i > 0 && rng.gen_bool(0.15) {
            thread += 1;
        }
        timestamp += rng.gen_range(60..7_200);
        let is_ip = rng.gen_bool(0.5);
        let malicious = rng.gen_bool(0.5);

        let mut sentence: Vec<&str> = Vec::new();
        let charac_class = if is_ip { malicious } else { rng.gen_bool(0.5) };
        for _ in 0..rng.gen_range(2..=4) {
            sentence.push(vocab.pick(Role::charac(charac_class), &mut rng));
        }
        if rng.gen_bool(P_CHARAC_DISTRACTOR) {
            sentence.push(vocab.pick(Role::charac(!charac_class), &mut rng));
        }
        if !vocab.retired_charac.is_empty() && rng.gen_bool(P_RETIRED) {
            sentence.push(vocab.retired_charac.choose(&mut rng).expect("non-empty"));
        }
        for _ in 0..rng.gen_range(4..=6) {
            sentence.push(filler(&mut rng));
        }
        sentence.shuffle(&mut rng);

        let far = |rng: &mut ChaCha8Rng| -> &str {
            if rng.gen_bool(P_FAR_DISTRACTOR) {
                vocab.pick(Role::ident(rng.gen_bool(0.5)), rng)
            } else if !vocab.retired_ident.is_empty() && rng.gen_bool(P_RETIRED / 2.0) {
                vocab.retired_ident.choose(rng).expect("non-empty")
            } else {
                filler(rng)
            }
        };
        let near = |rng: &mut ChaCha8Rng| -> &str {
            if rng.gen_bool(P_NEAR_SIGNAL) {
                vocab.pick(Role::ident(is_ip), rng)
            } else {
                filler(rng)
            }
        };
        let mut left: Vec<&str> = (0..rng.gen_range(1..=2)).map(|_| filler(&mut rng)).collect();
        left.extend((0..FAR_SLOTS).map(|_| far(&mut rng)));
        left.extend((0..NEAR_SLOTS).map(|_| near(&mut rng)));
        let mut right: Vec<&str> = (0..NEAR_SLOTS).map(|_| near(&mut rng)).collect();
        right.extend((0..FAR_SLOTS).map(|_| far(&mut rng)));
        right.extend((0..rng.gen_range(3..=6)).map(|_| filler(&mut rng)));

        let octets = if is_ip {
            let pool = &mut used[usize::from(malicious)];
            match pool.choose(&mut rng) {
                Some(&o) if rng.gen_bool(P_REUSE_ADDRESS) => o,
                _ => {
                    let o = ip_octets(&mut rng);
                    pool.push(o);
                    o
                }
            }
        } else {
            version_octets(&mut rng)
        };
        let candidate = format_octets(octets);

        let mut body = sentence.join(" ");
        body.push_str(". ");
        body.push_str(&left.join(" "));
        body.push(' ');
        let start = body.len();
        body.push_str(&candidate);
        let end = body.len();
        body.push(' ');
        body.push_str(&right.join(" "));
        body.push('.');

        let post_id = format!("p{i}");
        identification.push(LabeledExample {
            key: ExampleKey::Span {
                post_id: post_id.clone(),
                start,
                end,
            },
            label: noisy(Label::from_bool(is_ip), spec.label_noise, &mut rng),
        });
        if is_ip {
            characterization.push(LabeledExample {
                key: ExampleKey::Address {
                    post_id: post_id.clone(),
                    address: candidate,
                },
                label: noisy(Label::from_bool(malicious), spec.label_noise, &mut rng),
            });
        }
        posts.push(Post {
            forum_id: forum_id.to_string(),
            thread_id: format!("t{thread}"),
            post_id,
            author_id: format!("u{}", rng.gen_range(0..authors)),
            timestamp,
            body,
        });
    }

    Ok(SyntheticForum {
        forum: Forum::new(forum_id, posts)?,
        identification,
        characterization,
    })
}

/// One source forum and one shifted target forum.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    generate_multi_source(spec, 1)
}

/// `sources` source forums with complementary shared vocabularies, plus a
/// target. The target does not depend on how many sources are drawn.
pub fn generate_multi_source(spec: &SyntheticSpec, sources: usize) -> Result<SyntheticCorpus> {
    spec.validate()?;
    if sources == 0 {
        return Err(Error::InvalidConfig("at least one source forum is required".into()));
    }
    let target_vocab = Vocabulary::target(spec, sources);
    let target = generate_forum(spec, "target", &target_vocab, 0)?;
    let sources = (0..sources)
        .map(|i| {
            let id = if sources == 1 { "source".to_string() } else { format!("source-{i}") };
            generate_forum(spec, &id, &Vocabulary::source(spec, i, sources), i as u64 + 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus { sources, target })
}

/// Every signal word of every role, for tests that check vocabulary layout.
pub fn signal_words(spec: &SyntheticSpec, source: Option<(usize, usize)>) -> BTreeSet<String> {
    let vocab = match source {
        Some((i, n)) => Vocabulary::source(spec, i, n),
        None => Vocabulary::target(spec, 1),
    };
    vocab.signal.into_iter().flatten().collect()
}
