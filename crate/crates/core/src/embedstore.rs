//! Pretrained word vectors and averaged sentence representations.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textproc::TokenSeq;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S: Scalar = f64> {
    dim: usize,
    // Insertion order is kept for stable serialization.
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<S>,
    warnings: Vec<String>,
}

/// Averaged representation of a token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded<S: Scalar = f64> {
    pub vector: Vec<S>,
    /// Share of tokens that received a vector, in `[0, 1]`.
    pub coverage: f64,
    pub warning: Option<String>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            warnings: Vec::new(),
        })
    }

    /// Adds a vector. Returns `false` (and records a warning) if the token
    /// is already present; the first vector is kept.
    pub fn insert(&mut self, token: &str, vector: &[S]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for {token:?} has length {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(token) {
            self.warnings
                .push(format!("duplicate token {token:?}; keeping first vector"));
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.vectors.extend_from_slice(vector);
        Ok(true)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the word-vector text format. A first line made of exactly two
    /// integers is treated as a `count dim` header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();

        let mut declared: Option<(usize, usize)> = None;
        if let Some(&(_, first)) = lines.peek() {
            let fields: Vec<&str> = first.split_whitespace().collect();
            if fields.len() == 2 {
                if let (Ok(count), Ok(dim)) = (fields[0].parse(), fields[1].parse()) {
                    declared = Some((count, dim));
                    lines.next();
                }
            }
        }

        let mut table: Option<Self> = match declared {
            Some((_, dim)) => Some(Self::new(dim)?),
            None => None,
        };
        let mut row = Vec::new();
        for (line_no, line) in lines {
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("nonblank line has a field");
            row.clear();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::format(line_no, format!("bad number {f:?}")))?;
                row.push(S::lit(v));
            }
            let t = match table.as_mut() {
                Some(t) => t,
                None => table.insert(
                    Self::new(row.len())
                        .map_err(|_| Error::format(line_no, "row without values"))?,
                ),
            };
            if row.len() != t.dim {
                return Err(Error::format(line_no, "dim mismatch"));
            }
            t.insert(token, &row)?;
        }

        let mut table = table.ok_or_else(|| Error::data("empty vector file"))?;
        if table.is_empty() {
            return Err(Error::data("empty vector file"));
        }
        if let Some((count, _)) = declared {
            if count != table.len() + table.warnings.len() {
                table.warnings.push(format!(
                    "header declares {count} rows, file has {}",
                    table.len() + table.warnings.len()
                ));
            }
        }
        Ok(table)
    }

    /// Serializes with a header line; values use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.len(), self.dim).unwrap();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, token: &str) -> Option<&[S]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Returns a copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            *v = *v * factor;
        }
        out
    }

    /// Vector for one token: a direct hit, or for underscore-merged tokens
    /// the mean of whichever sub-tokens are known.
    fn lookup_with_fallback(&self, token: &str, scratch: &mut [S]) -> bool {
        if let Some(v) = self.get(token) {
            scratch.copy_from_slice(v);
            return true;
        }
        if !token.contains('_') {
            return false;
        }
        scratch.iter_mut().for_each(|x| *x = S::zero());
        let mut found = 0usize;
        for part in token.split('_').filter(|p| !p.is_empty()) {
            if let Some(v) = self.get(part) {
                for (s, &x) in scratch.iter_mut().zip(v) {
                    *s = *s + x;
                }
                found += 1;
            }
        }
        if found == 0 {
            return false;
        }
        let n = S::from_usize_lossy(found);
        scratch.iter_mut().for_each(|x| *x = *x / n);
        true
    }

    /// Mean vector of the in-vocabulary tokens of `seq`.
    pub fn embed_tokens(&self, seq: &TokenSeq) -> Embedded<S> {
        let mut sum = vec![S::zero(); self.dim];
        if seq.is_empty() {
            return Embedded {
                vector: sum,
                coverage: 0.0,
                warning: Some("empty token sequence".into()),
            };
        }
        let mut scratch = vec![S::zero(); self.dim];
        let mut hits = 0usize;
        for tok in seq.tokens() {
            if self.lookup_with_fallback(tok, &mut scratch) {
                for (s, &x) in sum.iter_mut().zip(&scratch) {
                    *s = *s + x;
                }
                hits += 1;
            }
        }
        if hits > 0 {
            let n = S::from_usize_lossy(hits);
            sum.iter_mut().for_each(|x| *x = *x / n);
        }
        Embedded {
            vector: sum,
            coverage: hits as f64 / seq.len() as f64,
            warning: None,
        }
    }
}
