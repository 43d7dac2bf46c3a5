//! Train/dev/test splitting: the two-round systematic split and a seeded random baseline.
//!
//! The systematic split sorts documents by character length, cuts the sorted list
//! into groups, and inside each group orders members by their summed edit distance
//! to the rest of the group. The lowest-distance members go to train; the others
//! are shuffled between dev and test.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split policy: {0}")]
    InvalidPolicy(String),
    #[error("assignment line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Train:dev:test proportions; serialized as `"A:B:C"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ratio {
    pub train: u32,
    pub dev: u32,
    pub test: u32,
}

impl Ratio {
    pub const EIGHT_ONE_ONE: Ratio = Ratio::new(8, 1, 1);
    pub const FOUR_THREE_THREE: Ratio = Ratio::new(4, 3, 3);

    pub const fn new(train: u32, dev: u32, test: u32) -> Self {
        Ratio { train, dev, test }
    }

    pub fn sum(&self) -> u32 {
        self.train + self.dev + self.test
    }

    fn parts(&self) -> [u32; 3] {
        [self.train, self.dev, self.test]
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.dev, self.test)
    }
}

impl TryFrom<String> for Ratio {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ratio> for String {
    fn from(r: Ratio) -> String {
        r.to_string()
    }
}

impl FromStr for Ratio {
    type Err = String;

    /// Parses `A:B:C`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected A:B:C, got `{s}`"));
        }
        let n: Vec<u32> = parts
            .iter()
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        Ok(Ratio::new(n[0], n[1], n[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Levenshtein over the characters of the raw text.
    CharLevenshtein,
    /// Levenshtein over the token layer.
    WordLevenshtein,
}

/// How group members are ordered by their summed distance before allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupOrder {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub group_size: usize,
    pub ratio: Ratio,
    pub seed: u64,
    pub distance: DistanceKind,
    pub order: GroupOrder,
}

impl SplitPolicy {
    pub fn new(group_size: usize, ratio: Ratio, seed: u64) -> Self {
        SplitPolicy {
            group_size,
            ratio,
            seed,
            distance: DistanceKind::CharLevenshtein,
            order: GroupOrder::Ascending,
        }
    }

    /// Groups of ten at 8:1:1.
    pub fn english(seed: u64) -> Self {
        Self::new(10, Ratio::EIGHT_ONE_ONE, seed)
    }

    /// Groups of ten at 4:3:3, for languages with less gold data.
    pub fn low_resource(seed: u64) -> Self {
        Self::new(10, Ratio::FOUR_THREE_THREE, seed)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if self.group_size == 0 {
            return Err(SplitError::InvalidPolicy("group size must be positive".into()));
        }
        if self.ratio.sum() as usize != self.group_size {
            return Err(SplitError::InvalidPolicy(format!(
                "ratio {} does not sum to group size {}",
                self.ratio, self.group_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Systematic,
    Random,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "systematic" => Ok(Method::Systematic),
            "random" => Ok(Method::Random),
            other => Err(format!("unknown split method `{other}`")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Systematic => "systematic",
            Method::Random => "random",
        })
    }
}

/// Document ids with their split, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub entries: Vec<(String, Split)>,
    pub policy: SplitPolicy,
    pub method: Method,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for (_, s) in &self.entries {
            c[*s as usize] += 1;
        }
        c
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, s)| *s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn lookup(&self) -> HashMap<&str, Split> {
        self.entries.iter().map(|(id, s)| (id.as_str(), *s)).collect()
    }

    /// Documents of one split, in corpus order.
    pub fn select<'a>(&self, docs: &'a [Document], split: Split) -> Vec<&'a Document> {
        let map = self.lookup();
        docs.iter().filter(|d| map.get(d.id.as_str()) == Some(&split)).collect()
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("method={}", self.method),
            format!("seed={}", self.policy.seed),
            format!("ratio={}", self.policy.ratio),
            format!("group_size={}", self.policy.group_size),
            format!(
                "distance={} order={}",
                serde_json::to_value(self.policy.distance)
                    .expect("enum")
                    .as_str()
                    .unwrap_or_default(),
                serde_json::to_value(self.policy.order)
                    .expect("enum")
                    .as_str()
                    .unwrap_or_default()
            ),
        ]
    }

    /// Writes `# key=value` header comments followed by one `id<TAB>split` line per document.
    pub fn write_tsv<W: Write>(&self, extra_header: &[String], mut out: W) -> io::Result<()> {
        for line in extra_header.iter().chain(self.header_lines().iter()) {
            writeln!(out, "# {line}")?;
        }
        for (id, split) in &self.entries {
            writeln!(out, "{id}\t{split}")?;
        }
        out.flush()
    }
}

/// Document ids with their splits, and the header comment lines.
pub type AssignmentFile = (Vec<(String, Split)>, Vec<String>);

/// Parses an assignment file, returning its entries and header comment lines.
pub fn read_assignment<R: BufRead>(reader: R) -> Result<AssignmentFile, SplitError> {
    let mut entries = Vec::new();
    let mut header = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(comment) = line.strip_prefix('#') {
            header.push(comment.trim().to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, split) = line.split_once('\t').ok_or_else(|| SplitError::Parse {
            line: idx + 1,
            message: "expected `id<TAB>split`".into(),
        })?;
        let split = split
            .parse()
            .map_err(|message| SplitError::Parse { line: idx + 1, message })?;
        entries.push((id.to_string(), split));
    }
    Ok((entries, header))
}

/// Unit-cost Levenshtein distance over any comparable sequence.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag } else { 1 + diag.min(above).min(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// Character-level Levenshtein distance.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

/// Splits `total` items by `ratio` with the largest-remainder method. Ties go to
/// the earlier split (train, then dev, then test).
pub fn apportion(total: usize, ratio: Ratio) -> [usize; 3] {
    let sum = ratio.sum() as usize;
    if sum == 0 {
        return [0; 3];
    }
    let parts = ratio.parts();
    let mut sizes = [0usize; 3];
    let mut remainders = [(0usize, 0usize); 3];
    for (i, r) in parts.iter().enumerate() {
        let num = total * *r as usize;
        sizes[i] = num / sum;
        remainders[i] = (num % sum, i);
    }
    let mut left = total - sizes.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in remainders {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

fn group_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Summed distance of each member to the other members of its group.
fn dissimilarity_keys(group: &[&Document], kind: DistanceKind) -> Vec<usize> {
    let n = group.len();
    let mut keys = vec![0usize; n];
    let chars: Vec<Vec<char>> = group.iter().map(|d| d.text.chars().collect()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = match kind {
                DistanceKind::CharLevenshtein => levenshtein(&chars[i], &chars[j]),
                DistanceKind::WordLevenshtein => levenshtein(&group[i].tokens, &group[j].tokens),
            };
            keys[i] += d;
            keys[j] += d;
        }
    }
    keys
}

/// Allocates one group: returns the split of each member, in `group` order.
fn allocate_group(group: &[&Document], policy: &SplitPolicy, group_idx: usize) -> Vec<Split> {
    let keys = dissimilarity_keys(group, policy.distance);
    let mut order: Vec<usize> = (0..group.len()).collect();
    order.sort_by(|&a, &b| {
        let by_key = match policy.order {
            GroupOrder::Ascending => keys[a].cmp(&keys[b]),
            GroupOrder::Descending => keys[b].cmp(&keys[a]),
        };
        by_key.then_with(|| group[a].id.cmp(&group[b].id))
    });

    let [train, dev, _] = if group.len() == policy.group_size {
        [
            policy.ratio.train as usize,
            policy.ratio.dev as usize,
            policy.ratio.test as usize,
        ]
    } else {
        apportion(group.len(), policy.ratio)
    };

    let mut out = vec![Split::Test; group.len()];
    for &i in &order[..train] {
        out[i] = Split::Train;
    }
    let mut rest = order[train..].to_vec();
    rest.shuffle(&mut group_rng(policy.seed, group_idx as u64));
    for (k, &i) in rest.iter().enumerate() {
        out[i] = if k < dev { Split::Dev } else { Split::Test };
    }
    out
}

/// Two-round systematic split. Ties are broken by document id throughout.
pub fn systematic_split(docs: &[Document], policy: &SplitPolicy) -> Result<SplitAssignment, SplitError> {
    policy.validate()?;
    let mut sorted: Vec<usize> = (0..docs.len()).collect();
    sorted.sort_by(|&a, &b| {
        docs[a]
            .char_length()
            .cmp(&docs[b].char_length())
            .then_with(|| docs[a].id.cmp(&docs[b].id))
    });

    let groups: Vec<&[usize]> = sorted.chunks(policy.group_size).collect();
    let allocations: Vec<Vec<Split>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, members)| {
            let group: Vec<&Document> = members.iter().map(|&i| &docs[i]).collect();
            allocate_group(&group, policy, g)
        })
        .collect();

    let mut splits = vec![Split::Train; docs.len()];
    for (members, alloc) in groups.iter().zip(allocations) {
        for (&i, s) in members.iter().zip(alloc) {
            splits[i] = s;
        }
    }
    Ok(SplitAssignment {
        entries: docs.iter().map(|d| d.id.clone()).zip(splits).collect(),
        policy: *policy,
        method: Method::Systematic,
    })
}

/// Seeded shuffle, then contiguous cuts sized by largest remainder.
pub fn random_split(docs: &[Document], ratio: Ratio, seed: u64) -> Result<SplitAssignment, SplitError> {
    if ratio.sum() == 0 {
        return Err(SplitError::InvalidPolicy("ratio sums to zero".into()));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut group_rng(seed, 0));
    let [train, dev, _] = apportion(docs.len(), ratio);
    let mut splits = vec![Split::Test; docs.len()];
    for (k, &i) in order.iter().enumerate() {
        splits[i] = if k < train {
            Split::Train
        } else if k < train + dev {
            Split::Dev
        } else {
            Split::Test
        };
    }
    Ok(SplitAssignment {
        entries: docs.iter().map(|d| d.id.clone()).zip(splits).collect(),
        policy: SplitPolicy::new(ratio.sum() as usize, ratio, seed),
        method: Method::Random,
    })
}

pub fn split_with(docs: &[Document], policy: &SplitPolicy, method: Method) -> Result<SplitAssignment, SplitError> {
    match method {
        Method::Systematic => systematic_split(docs, policy),
        Method::Random => random_split(docs, policy.ratio, policy.seed),
    }
}
