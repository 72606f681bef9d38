//! Tokenization, sentence segmentation, vocabulary and bag-of-words features.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::{Dataset, Post};
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const MAX_SENTENCE_TOKENS: usize = 50;
pub const MAX_SENTENCES: usize = 30;
/// Per-field cap for the convolutional path (four sentences' worth).
pub const MAX_FIELD_TOKENS: usize = 4 * MAX_SENTENCE_TOKENS;

/// Lowercases and splits on whitespace. Every non-alphanumeric character
/// becomes its own token, except an apostrophe with alphanumerics on both
/// sides (`don't`).
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if c.is_alphanumeric()
            || (c == '\'' && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()))
        {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Splits after `.`, `!` or `?` when followed by whitespace or the end of
/// the text. A trailing fragment without a terminator is kept. At most
/// [`MAX_SENTENCES`] sentences are returned.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = iter.peek().is_none_or(|(_, n)| n.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    sentences.push(s.to_string());
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        sentences.push(rest.to_string());
    }
    sentences.truncate(MAX_SENTENCES);
    sentences
}

pub fn bound_length<T: Clone>(tokens: &[T], max: usize) -> Vec<T> {
    assert!(max >= 1, "length bound must be at least 1");
    tokens[..tokens.len().min(max)].to_vec()
}

/// An ordered list of non-empty, length-bounded token lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceSeq {
    sentences: Vec<Vec<String>>,
}

impl SentenceSeq {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let sentences = texts
            .into_iter()
            .flat_map(split_sentences)
            .map(|s| bound_length(&tokenize(&s), MAX_SENTENCE_TOKENS))
            .filter(|t| !t.is_empty())
            .take(MAX_SENTENCES)
            .collect();
        Self { sentences }
    }

    /// Problem sentences followed by negative-take sentences.
    pub fn of_post(post: &Post) -> Self {
        Self::from_texts([post.problem.as_str(), post.negative_take.as_str()])
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Tokens of the two fields, each capped at [`MAX_FIELD_TOKENS`].
pub fn field_tokens(post: &Post) -> (Vec<String>, Vec<String>) {
    (
        bound_length(&tokenize(&post.problem), MAX_FIELD_TOKENS),
        bound_length(&tokenize(&post.negative_take), MAX_FIELD_TOKENS),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Counts tokens across `texts`, keeps those seen at least `min_count`
    /// times, and orders them by frequency (descending) then lexicographically.
    /// Index 0 is always [`PAD_TOKEN`].
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: u64) -> Result<Self> {
        let mut freq: HashMap<String, u64> = HashMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *freq.entry(tok).or_default() += 1;
            }
        }
        freq.remove(PAD_TOKEN);
        let mut kept: Vec<(String, u64)> =
            freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary(min_count as usize));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string()];
        let mut counts = vec![0];
        for (t, c) in kept {
            tokens.push(t);
            counts.push(c);
        }
        Ok(Self::from_parts(tokens, counts, min_count))
    }

    pub fn from_dataset(dataset: &Dataset, min_count: u64) -> Result<Self> {
        Self::build(
            dataset
                .posts
                .iter()
                .flat_map(|p| [p.problem.as_str(), p.negative_take.as_str()]),
            min_count,
        )
    }

    /// A vocabulary over an explicit token list (PAD is prepended if absent).
    pub fn from_tokens(list: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string()];
        tokens.extend(list.into_iter().filter(|t| t != PAD_TOKEN));
        let counts = vec![0; tokens.len()];
        Self::from_parts(tokens, counts, 0)
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// `token<TAB>index<TAB>count`, one entry per line.
    pub fn write_tsv(&self, mut out: impl Write) -> Result<()> {
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{t}\t{i}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv(input: impl BufRead) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(tok), Some(idx), Some(count), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(parse_err("expected token, index and count"));
            };
            let idx: usize = idx.parse().map_err(|_| parse_err("bad index"))?;
            if idx != tokens.len() {
                return Err(parse_err("indices must be dense and ascending"));
            }
            tokens.push(tok.to_string());
            counts.push(count.parse().map_err(|_| parse_err("bad count"))?);
        }
        let min_count = counts.iter().skip(1).copied().min().unwrap_or(0);
        Ok(Self::from_parts(tokens, counts, min_count))
    }
}

/// Sparse token-index counts.
pub type BowVector = BTreeMap<usize, u32>;

pub fn bow_of_text(text: &str, vocab: &Vocabulary) -> BowVector {
    let mut bow = BowVector::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.get(&tok).filter(|&i| i != 0) {
            *bow.entry(i).or_default() += 1;
        }
    }
    bow
}

/// Counts over the problem and negative-take tokens; out-of-vocabulary
/// tokens are dropped.
pub fn bow_featurize(post: &Post, vocab: &Vocabulary) -> BowVector {
    let mut bow = bow_of_text(&post.problem, vocab);
    for (i, c) in bow_of_text(&post.negative_take, vocab) {
        *bow.entry(i).or_default() += c;
    }
    bow
}
