//! Tokenization, gazetteer-based entity merging and n-gram features.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Punctuation peeled off the edges of whitespace-delimited chunks.
const EDGE_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\''];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    tokens: Vec<String>,
    merged: Vec<bool>,
}

impl TokenSeq {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let merged = vec![false; tokens.len()];
        Self { tokens, merged }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Per-token flag, true for tokens produced by [`merge_entities`].
    pub fn merged_flags(&self) -> &[bool] {
        &self.merged
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Appends `other`, keeping its merge flags.
    pub fn extend(&mut self, other: &TokenSeq) {
        self.tokens.extend(other.tokens.iter().cloned());
        self.merged.extend(other.merged.iter().copied());
    }

    pub fn push(&mut self, token: impl Into<String>) {
        self.tokens.push(token.into());
        self.merged.push(false);
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases, splits on whitespace and detaches leading/trailing
/// punctuation as separate tokens. Internal punctuation is kept.
pub fn tokenize(text: &str) -> TokenSeq {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lower.split_whitespace() {
        let mut rest = chunk;
        while let Some(c) = rest.chars().next().filter(|c| EDGE_PUNCT.contains(c)) {
            tokens.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next_back().filter(|c| EDGE_PUNCT.contains(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            tokens.push(rest.to_string());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    TokenSeq::from_tokens(tokens)
}

/// Multi-word surface forms recognized as single entities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    phrases: HashSet<Vec<String>>,
    max_phrase_len: usize,
}

impl Gazetteer {
    /// Builds a gazetteer; phrases are tokenized like running text and
    /// single-token entries are dropped.
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut g = Self::default();
        for p in phrases {
            g.insert(p.as_ref());
        }
        g
    }

    pub fn insert(&mut self, phrase: &str) -> bool {
        let toks = tokenize(phrase).tokens;
        if toks.len() < 2 {
            return false;
        }
        self.max_phrase_len = self.max_phrase_len.max(toks.len());
        self.phrases.insert(toks)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// One phrase per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    /// Sorted phrases, one per line.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = self.phrases.iter().map(|p| p.join(" ")).collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.phrases.contains(tokens)
    }
}

/// Greedy left-to-right longest-match merge of gazetteer phrases into
/// underscore-joined tokens.
pub fn merge_entities(seq: &TokenSeq, gazetteer: &Gazetteer) -> TokenSeq {
    let toks = &seq.tokens;
    let mut out = TokenSeq::default();
    let mut i = 0;
    while i < toks.len() {
        let longest = gazetteer.max_phrase_len.min(toks.len() - i);
        let hit = (2..=longest)
            .rev()
            .find(|&n| gazetteer.contains(&toks[i..i + n]));
        match hit {
            Some(n) => {
                out.tokens.push(toks[i..i + n].join("_"));
                out.merged.push(true);
                i += n;
            }
            None => {
                out.tokens.push(toks[i].clone());
                out.merged.push(seq.merged[i]);
                i += 1;
            }
        }
    }
    out
}

/// All contiguous n-grams for n = 1..=max_n, unigrams first, tokens joined
/// by a single space.
pub fn extract_features(seq: &TokenSeq, max_n: usize) -> Result<Vec<String>> {
    if max_n < 1 {
        return Err(Error::invalid("max n-gram order must be at least 1"));
    }
    let toks = &seq.tokens;
    let mut out = Vec::new();
    for n in 1..=max_n.min(toks.len()) {
        out.extend(toks.windows(n).map(|w| w.join(" ")));
    }
    Ok(out)
}
