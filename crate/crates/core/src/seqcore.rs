//! Binary words and eventually periodic binary sequences.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Finite binary word; every entry is 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(d) = digits.iter().find(|&&d| d > 1) {
            return Err(Error::Precondition(format!("digit {d} is not binary")));
        }
        Ok(Word(digits))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn repeat(d: u8, n: usize) -> Self {
        Word(vec![d & 1; n])
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_digits(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, d: u8) {
        self.0.push(d & 1);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `w^+`: the last digit set to 1.
    pub fn plus(&self) -> Result<Word> {
        self.set_last(0, 1)
    }

    /// `w^-`: the last digit set to 0.
    pub fn minus(&self) -> Result<Word> {
        self.set_last(1, 0)
    }

    fn set_last(&self, from: u8, to: u8) -> Result<Word> {
        match self.0.last() {
            Some(&d) if d == from => {
                let mut v = self.0.clone();
                *v.last_mut().unwrap() = to;
                Ok(Word(v))
            }
            _ => Err(Error::Precondition(format!(
                "word {self} must end in {from}"
            ))),
        }
    }

    pub fn conjugate(&self) -> Word {
        Word(self.0.iter().map(|d| 1 - d).collect())
    }

    /// Length of the longest common prefix.
    pub fn common_prefix(&self, other: &Word) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::Parse(format!("'{c}' is not a binary digit in \"{s}\""))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Word)
    }
}

/// Classification of a sequence by its tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqKind {
    /// Ends in `0^∞` after a last 1.
    Finite,
    /// Ends in `1^∞` after a last 0.
    CoFinite,
    /// Everything else, including `0^∞` and `1^∞`.
    DoublyInfinite,
}

/// Eventually periodic binary sequence `pre per per per ...`, kept canonical:
/// the period is primitive and the preperiod is as short as possible.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EpSeq {
    pre: Vec<u8>,
    per: Vec<u8>,
}

impl EpSeq {
    pub fn new(pre: Word, per: Word) -> Result<Self> {
        if per.is_empty() {
            return Err(Error::Precondition("period must be non-empty".into()));
        }
        Ok(Self::canonical(pre.0, per.0))
    }

    pub fn periodic(per: Word) -> Result<Self> {
        Self::new(Word::empty(), per)
    }

    pub fn zeros() -> Self {
        EpSeq { pre: vec![], per: vec![0] }
    }

    pub fn ones() -> Self {
        EpSeq { pre: vec![], per: vec![1] }
    }

    fn canonical(mut pre: Vec<u8>, mut per: Vec<u8>) -> Self {
        let n = per.len();
        if let Some(p) = (1..=n)
            .filter(|&p| n.is_multiple_of(p))
            .find(|&p| (p..n).all(|i| per[i] == per[i - p]))
        {
            per.truncate(p);
        }
        while let Some(&last) = pre.last() {
            if last != *per.last().unwrap() {
                break;
            }
            pre.pop();
            per.rotate_right(1);
        }
        EpSeq { pre, per }
    }

    pub fn pre(&self) -> Word {
        Word(self.pre.clone())
    }

    pub fn per(&self) -> Word {
        Word(self.per.clone())
    }

    pub fn pre_digits(&self) -> &[u8] {
        &self.pre
    }

    pub fn per_digits(&self) -> &[u8] {
        &self.per
    }

    /// Digit at 1-based position `i`.
    pub fn digit(&self, i: usize) -> u8 {
        assert!(i >= 1, "positions are 1-based");
        let k = i - 1;
        if k < self.pre.len() {
            self.pre[k]
        } else {
            self.per[(k - self.pre.len()) % self.per.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word((1..=n).map(|i| self.digit(i)).collect())
    }

    /// `σ^n`.
    pub fn shift(&self, n: usize) -> EpSeq {
        if n <= self.pre.len() {
            return Self::canonical(self.pre[n..].to_vec(), self.per.clone());
        }
        let mut per = self.per.clone();
        let k = (n - self.pre.len()) % per.len();
        per.rotate_left(k);
        EpSeq { pre: vec![], per }
    }

    pub fn conjugate(&self) -> EpSeq {
        EpSeq {
            pre: self.pre.iter().map(|d| 1 - d).collect(),
            per: self.per.iter().map(|d| 1 - d).collect(),
        }
    }

    pub fn kind(&self) -> SeqKind {
        match (self.per.as_slice(), self.pre.is_empty()) {
            ([0], false) => SeqKind::Finite,
            ([1], false) => SeqKind::CoFinite,
            _ => SeqKind::DoublyInfinite,
        }
    }

    pub fn is_zeros(&self) -> bool {
        self.pre.is_empty() && self.per == [0]
    }

    pub fn is_ones(&self) -> bool {
        self.pre.is_empty() && self.per == [1]
    }

    /// All distinct tails `σ^n(self)`, n ≥ 0, in order of first appearance.
    pub fn distinct_tails(&self) -> Vec<EpSeq> {
        (0..self.pre.len() + self.per.len())
            .map(|n| self.shift(n))
            .collect()
    }

    /// Number of positions that decide any comparison with `other`.
    fn horizon(&self, other: &EpSeq) -> usize {
        self.pre.len().max(other.pre.len()) + lcm(self.per.len(), other.per.len())
    }

    /// First 1-based position where the sequences differ.
    pub fn first_difference(&self, other: &EpSeq) -> Option<usize> {
        (1..=self.horizon(other)).find(|&i| self.digit(i) != other.digit(i))
    }

    /// Lexicographic comparison against a finite prefix of a sequence.
    /// `None` when the two agree on every available digit.
    pub fn compare_prefix(&self, w: &Word) -> Option<Ordering> {
        w.0.iter()
            .enumerate()
            .map(|(k, &d)| self.digit(k + 1).cmp(&d))
            .find(|o| o.is_ne())
    }

    /// Append this sequence to a finite word.
    pub fn prepend(&self, w: &Word) -> EpSeq {
        let mut pre = w.0.clone();
        pre.extend_from_slice(&self.pre);
        Self::canonical(pre, self.per.clone())
    }
}

impl Ord for EpSeq {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.first_difference(other) {
            Some(i) => self.digit(i).cmp(&other.digit(i)),
            None => Ordering::Equal,
        }
    }
}

impl PartialOrd for EpSeq {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn compare_lex(a: &EpSeq, b: &EpSeq) -> Ordering {
    a.cmp(b)
}

/// `2^{-j}` with `j` the first differing position, 0 for equal sequences.
pub fn seq_metric(a: &EpSeq, b: &EpSeq) -> f64 {
    match a.first_difference(b) {
        Some(j) => 2f64.powi(-(j as i32)),
        None => 0.0,
    }
}

/// Max metric on pairs of sequences.
pub fn pair_metric(a: (&EpSeq, &EpSeq), b: (&EpSeq, &EpSeq)) -> f64 {
    seq_metric(a.0, b.0).max(seq_metric(a.1, b.1))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl fmt::Display for EpSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})*", Word(self.pre.clone()), Word(self.per.clone()))
    }
}

impl FromStr for EpSeq {
    type Err = Error;

    /// Parses `PRE(PER)*`, e.g. `0001(01)*` or `(10)*`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("\"{s}\" is not of the form PRE(PER)*"));
        let body = s.strip_suffix(")*").ok_or_else(bad)?;
        let (pre, per) = body.split_once('(').ok_or_else(bad)?;
        if per.is_empty() {
            return Err(Error::Parse(format!("\"{s}\" has an empty period")));
        }
        EpSeq::new(pre.parse()?, per.parse()?)
    }
}

#[derive(Serialize, Deserialize)]
struct EpSeqJson {
    pre: String,
    per: String,
}

impl Serialize for EpSeq {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EpSeqJson {
            pre: Word(self.pre.clone()).to_string(),
            per: Word(self.per.clone()).to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EpSeq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = EpSeqJson::deserialize(d)?;
        let pre: Word = j.pre.parse().map_err(serde::de::Error::custom)?;
        let per: Word = j.per.parse().map_err(serde::de::Error::custom)?;
        EpSeq::new(pre, per).map_err(serde::de::Error::custom)
    }
}
