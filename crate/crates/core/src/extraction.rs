//! Tokenization and dot-decimal candidate extraction.
//!
//! A post body is split into lowercase word tokens. Dots are kept inside a
//! token only when they sit between two ASCII digits, so `2.25.100.15`
//! survives as one token while `http://1.2.3.4/x` splits into `http`,
//! `1.2.3.4` and `x`. A token made only of digits and dots with exactly four
//! fields, each in `0..=255`, becomes a [`Candidate`].

use std::fmt;
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::corpus::Post;
use crate::error::{Error, Result};

/// A lowercase word with its byte span in the original body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: (usize, usize),
}

/// Number of context words taken on each side of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordRange(NonZeroUsize);

impl WordRange {
    pub fn new(words: usize) -> Result<Self> {
        NonZeroUsize::new(words)
            .map(WordRange)
            .ok_or_else(|| Error::InvalidConfig("word range must be at least 1".into()))
    }

    pub fn get(self) -> usize {
        self.0.get()
    }
}

impl Default for WordRange {
    fn default() -> Self {
        WordRange(NonZeroUsize::new(2).unwrap())
    }
}

impl fmt::Display for WordRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Splits a body into tokens.
pub trait Tokenizer {
    fn tokenize(&self, body: &str) -> Vec<Token>;
}

/// The default forum tokenizer, see the module docs.
#[derive(Debug, Default, Clone, Copy)]
pub struct ForumTokenizer;

impl Tokenizer for ForumTokenizer {
    fn tokenize(&self, body: &str) -> Vec<Token> {
        tokenize(body)
    }
}

impl<F> Tokenizer for F
where
    F: Fn(&str) -> Vec<Token>,
{
    fn tokenize(&self, body: &str) -> Vec<Token> {
        self(body)
    }
}

/// Tokenize with the default rules.
pub fn tokenize(body: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            let inner_dot = c == '.'
                && chars[j - 1].1.is_ascii_digit()
                && chars.get(j + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
            if c.is_alphanumeric() || inner_dot {
                j += 1;
            } else {
                break;
            }
        }
        let lo = chars[start].0;
        let hi = chars.get(j).map_or(body.len(), |&(b, _)| b);
        tokens.push(Token {
            text: body[lo..hi].to_lowercase(),
            span: (lo, hi),
        });
        i = j;
    }
    tokens
}

/// Parse `a.b.c.d` with every field a run of ASCII digits whose value is at
/// most 255. Leading zeros are accepted.
pub fn parse_dotted_quad(s: &str) -> Option<[u8; 4]> {
    let mut octets = [0u8; 4];
    let mut fields = s.split('.');
    for slot in octets.iter_mut() {
        let field = fields.next()?;
        if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let significant = field.trim_start_matches('0');
        if significant.len() > 3 {
            return None;
        }
        let value: u16 = if significant.is_empty() {
            0
        } else {
            significant.parse().ok()?
        };
        *slot = u8::try_from(value).ok()?;
    }
    if fields.next().is_some() {
        return None;
    }
    Some(octets)
}

/// Canonical dotted-quad text, no leading zeros.
pub fn format_octets(octets: [u8; 4]) -> String {
    format!("{}.{}.{}.{}", octets[0], octets[1], octets[2], octets[3])
}

/// Canonicalize an address string; `None` if it is not a valid dotted quad.
pub fn normalize_address(s: &str) -> Option<String> {
    parse_dotted_quad(s.trim()).map(format_octets)
}

/// A dot-decimal span inside a post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub post_id: String,
    pub span: (usize, usize),
    pub raw: String,
    pub octets: [u8; 4],
    pub context_before: Vec<Token>,
    pub context_after: Vec<Token>,
}

impl Candidate {
    /// Canonical address text for this candidate.
    pub fn address(&self) -> String {
        format_octets(self.octets)
    }

    /// All context tokens, before then after.
    pub fn context(&self) -> impl Iterator<Item = &Token> {
        self.context_before.iter().chain(self.context_after.iter())
    }
}

/// Up to `range` tokens on each side of `tokens[index]`, never crossing the
/// ends of the list.
pub fn context_window(tokens: &[Token], index: usize, range: WordRange) -> (Vec<Token>, Vec<Token>) {
    assert!(index < tokens.len(), "candidate index {index} out of bounds");
    let w = range.get();
    let before = tokens[index.saturating_sub(w)..index].to_vec();
    let after_end = (index + 1 + w).min(tokens.len());
    let after = tokens[index + 1..after_end].to_vec();
    (before, after)
}

/// Candidates of an already tokenized body.
pub fn candidates_from_tokens(post_id: &str, tokens: &[Token], range: WordRange) -> Vec<Candidate> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(i, tok)| {
            let octets = parse_dotted_quad(&tok.text)?;
            let (context_before, context_after) = context_window(tokens, i, range);
            Some(Candidate {
                post_id: post_id.to_string(),
                span: tok.span,
                raw: tok.text.clone(),
                octets,
                context_before,
                context_after,
            })
        })
        .collect()
}

/// Every dot-decimal candidate in `post`, in byte order.
pub fn extract_candidates(post: &Post, range: WordRange) -> Vec<Candidate> {
    candidates_from_tokens(&post.post_id, &tokenize(&post.body), range)
}
