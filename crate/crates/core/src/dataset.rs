//! Labeled embedding datasets: JSON-lines ingestion, text cleaning, a hashing
//! encoder for raw text, and stratified splits.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub label: Label,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    /// Front-page position, starting at 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
}

impl Sample {
    pub fn new(id: impl Into<String>, label: Label, embedding: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            label,
            embedding,
            source: None,
            date: None,
            rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dataset dimension must be >= 1".into()));
        }
        let mut ids = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            validate_sample(s, dim).map_err(|message| Error::Record {
                line: i + 1,
                message,
            })?;
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Record {
                    line: i + 1,
                    message: format!("duplicate id {:?}", s.id),
                });
            }
        }
        Ok(Self { dim, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn validate_sample(s: &Sample, dim: usize) -> std::result::Result<(), String> {
    if s.embedding.len() != dim {
        return Err(format!(
            "embedding length {} does not match dimension {dim}",
            s.embedding.len()
        ));
    }
    if s.embedding.iter().any(|v| !v.is_finite()) {
        return Err("embedding contains a non-finite value".into());
    }
    if s.rank == Some(0) {
        return Err("rank must be >= 1".into());
    }
    if let Some(date) = &s.date {
        if !is_iso_day(date) {
            return Err(format!("date {date:?} is not an ISO-8601 day (YYYY-MM-DD)"));
        }
    }
    Ok(())
}

pub(crate) fn is_iso_day(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u32> {
        let part = &s[r];
        part.bytes().all(|c| c.is_ascii_digit()).then(|| part.parse().ok())?
    };
    let (Some(y), Some(m), Some(d)) = (num(0..4), num(5..7), num(8..10)) else {
        return false;
    };
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&d)
}

// ---------------------------------------------------------------------------
// Text cleaning

/// Case-insensitive stopword set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StopWords(HashSet<String>);

/// Small default list of function words and news-page boilerplate.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "by", "for", "from",
    "with", "as", "is", "are", "was", "were", "be", "been", "it", "its", "this", "that",
    "these", "those", "he", "she", "they", "we", "you", "i", "his", "her", "their", "our",
    "said", "says", "also", "advertisement", "subscribe", "newsletter", "click", "share",
    "read", "more", "image", "photo", "getty", "images", "reuters", "ap",
];

impl StopWords {
    pub fn none() -> Self {
        Self(HashSet::new())
    }

    pub fn default_list() -> Self {
        DEFAULT_STOPWORDS.iter().copied().collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl<S: AsRef<str>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.as_ref().to_lowercase()).collect())
    }
}

const IRREGULAR_CONTRACTIONS: &[(&str, &str)] = &[
    ("won't", "will not"),
    ("can't", "cannot"),
    ("shan't", "shall not"),
    ("ain't", "is not"),
    ("let's", "let us"),
    ("it's", "it is"),
    ("he's", "he is"),
    ("she's", "she is"),
    ("that's", "that is"),
    ("there's", "there is"),
    ("here's", "here is"),
    ("what's", "what is"),
    ("who's", "who is"),
    ("where's", "where is"),
    ("how's", "how is"),
];

const CONTRACTION_SUFFIXES: &[(&str, &str)] = &[
    ("n't", " not"),
    ("'re", " are"),
    ("'ll", " will"),
    ("'ve", " have"),
    ("'m", " am"),
    ("'d", " would"),
];

fn expand_contraction(word: &str, out: &mut String) {
    if let Some((_, full)) = IRREGULAR_CONTRACTIONS.iter().find(|(c, _)| *c == word) {
        out.push_str(full);
        return;
    }
    for (suffix, full) in CONTRACTION_SUFFIXES {
        if let Some(stem) = word.strip_suffix(suffix) {
            out.push_str(stem);
            out.push_str(full);
            return;
        }
    }
    out.push_str(word);
}

/// Removes `<...>` tags and `&name;` / `&#123;` entities, replacing each with a space.
fn strip_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find(['<', '&']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let skip = if tail.starts_with('<') {
            tail.find('>').map(|j| j + 1)
        } else {
            let body = &tail[1..];
            let end = body
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))
                .unwrap_or(body.len());
            (end > 0 && end <= 10 && body[end..].starts_with(';')).then_some(end + 2)
        };
        match skip {
            Some(n) => {
                out.push(' ');
                rest = &tail[n..];
            }
            None => {
                out.push(' ');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Normalises raw article text for encoding.
///
/// Newlines become spaces, markup is stripped, text is lowercased, a fixed
/// table of English contractions is expanded, every character other than a
/// letter or digit becomes a separator (apostrophes are dropped in place),
/// and stopwords are removed. The result is single-spaced.
pub fn clean_text(raw: &str, stopwords: &StopWords) -> String {
    let text = raw.replace(['\r', '\n'], " ");
    let text = strip_markup(&text).to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");

    let mut expanded = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            expand_contraction(word, out);
            out.push(' ');
            word.clear();
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            word.push(c);
        } else {
            flush(&mut word, &mut expanded);
        }
    }
    flush(&mut word, &mut expanded);

    let mut out = String::with_capacity(expanded.len());
    for token in expanded.split_whitespace() {
        let token: String = token.chars().filter(|&c| c != '\'').collect();
        if token.is_empty() || stopwords.contains(&token) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&token);
    }
    out
}

// ---------------------------------------------------------------------------
// Hashing encoder

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Signed feature-hashing bag of words, L2-normalised.
///
/// Each whitespace token is hashed with 64-bit FNV-1a (offset basis
/// `0xcbf29ce484222325`, prime `0x100000001b3`) over its UTF-8 bytes. The
/// bucket is `hash % dim` and the sign is `+1` when bit 32 of the hash is
/// clear, `-1` otherwise. Empty text, or text whose signed counts cancel
/// exactly, encodes to the zero vector.
pub fn hash_encode(cleaned: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    for token in cleaned.split_whitespace() {
        let h = fnv1a(token.as_bytes());
        let idx = (h % dim as u64) as usize;
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Declared embedding width. Required for raw-text records; when absent
    /// it is taken from the first embedded record.
    pub dim: Option<usize>,
    pub stopwords: StopWords,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            dim: None,
            stopwords: StopWords::default_list(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    label: i64,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    date: Option<String>,
    #[serde(default)]
    rank: Option<u32>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset_with(path, &LoadOptions::default())
}

pub fn load_dataset_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path)?;
    parse_dataset(BufReader::new(file), opts)
}

/// Parses JSON-lines records. Blank lines are ignored; every error carries
/// the 1-based line number.
pub fn parse_dataset<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut dim = opts.dim;
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Record {
            line: line_no,
            message,
        };
        let rec: RawRecord =
            serde_json::from_str(&line).map_err(|e| err(format!("malformed record: {e}")))?;
        let label = Label::from_value(rec.label).map_err(|e| err(e.to_string()))?;
        let embedding = match (rec.embedding, rec.text) {
            (Some(e), None) => e,
            (None, Some(text)) => {
                let d = dim.ok_or_else(|| {
                    err("raw-text record needs a declared embedding dimension".into())
                })?;
                hash_encode(&clean_text(&text, &opts.stopwords), d)
            }
            (Some(_), Some(_)) => return Err(err("record has both embedding and text".into())),
            (None, None) => return Err(err("record has neither embedding nor text".into())),
        };
        let d = *dim.get_or_insert(embedding.len());
        let sample = Sample {
            id: rec.id,
            label,
            embedding,
            source: rec.source,
            date: rec.date,
            rank: rec.rank,
        };
        validate_sample(&sample, d).map_err(err)?;
        if !ids.insert(sample.id.clone()) {
            return Err(err(format!("duplicate id {:?}", sample.id)));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::Empty("dataset has no records"));
    }
    Dataset::new(dim.expect("set by first record"), samples)
}

// ---------------------------------------------------------------------------
// Splitting

const SPLIT_STREAM: u64 = 0x5917;

/// Label-stratified split into train, validation and test sets.
///
/// Each class is shuffled with a stream derived from `seed` and cut at the
/// rounded cumulative fractions; each resulting split is then shuffled again
/// so classes are interleaved.
pub fn split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidParameter("split fractions must be positive".into()));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("split fractions must sum to 1".into()));
    }
    let mut by_class: BTreeMap<Label, Vec<&Sample>> = BTreeMap::new();
    for s in ds.samples() {
        by_class.entry(s.label).or_default().push(s);
    }
    let mut parts: [Vec<Sample>; 3] = Default::default();
    for (label, mut group) in by_class {
        group.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM, label.index() as u64]));
        let n = group.len() as f64;
        let cut1 = (n * fractions[0]).round() as usize;
        let cut2 = ((n * (fractions[0] + fractions[1])).round() as usize).max(cut1);
        for (i, s) in group.into_iter().enumerate() {
            let part = if i < cut1 {
                0
            } else if i < cut2 {
                1
            } else {
                2
            };
            parts[part].push(s.clone());
        }
    }
    for (i, p) in parts.iter_mut().enumerate() {
        p.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM, 0xff, i as u64]));
    }
    let [train, val, test] = parts;
    Ok((
        Dataset::new(ds.dim(), train)?,
        Dataset::new(ds.dim(), val)?,
        Dataset::new(ds.dim(), test)?,
    ))
}
