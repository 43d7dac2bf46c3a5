//! Pseudo-log-likelihood scoring and the top-fraction plausibility filter.
//!
//! Two scorers implement [`Scorer`]: an in-process bidirectional n-gram model and a
//! client for an external process speaking a line-delimited JSON protocol.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::recombine::Candidate;

#[derive(Debug, Error)]
pub enum PllError {
    #[error("cannot score an empty sentence")]
    EmptySentence,
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("invalid scorer configuration: {0}")]
    InvalidSpec(String),
    #[error("failed to start scorer `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scorer i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("scorer did not answer within {0:?}")]
    Timeout(Duration),
    #[error("scorer closed its output")]
    Closed,
    #[error("protocol violation ({message}) in frame `{frame}`")]
    Protocol { frame: String, message: String },
    #[error("scorer reported an error in frame `{frame}`")]
    Remote { frame: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PllScore {
    pub value: f64,
    pub token_count: usize,
    pub normalized: f64,
}

impl PllScore {
    pub fn new(value: f64, token_count: usize) -> Self {
        PllScore {
            value,
            token_count,
            normalized: value / token_count.max(1) as f64,
        }
    }

    pub fn get(&self, normalization: Normalization) -> f64 {
        match normalization {
            Normalization::Total => self.value,
            Normalization::PerToken => self.normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Total,
    #[default]
    PerToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerKind {
    ReferenceNgram { order: usize, alpha: f64 },
    External { command: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    pub normalization: Normalization,
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec {
            kind: ScorerKind::ReferenceNgram { order: 3, alpha: 0.1 },
            normalization: Normalization::PerToken,
        }
    }
}

impl ScorerSpec {
    pub fn validate(&self) -> Result<(), PllError> {
        match &self.kind {
            ScorerKind::ReferenceNgram { order, alpha } => {
                if *order < 1 {
                    return Err(PllError::InvalidSpec("order must be at least 1".into()));
                }
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(PllError::InvalidSpec(format!("alpha must be positive, got {alpha}")));
                }
            }
            ScorerKind::External { command } => {
                if command.trim().is_empty() {
                    return Err(PllError::InvalidSpec("external scorer needs a command".into()));
                }
            }
        }
        Ok(())
    }
}

/// One sentence to score: the token layer and its surface form.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub tokens: &'a [String],
    pub text: &'a str,
}

pub trait Scorer {
    /// Scores are returned in request order.
    fn score_batch(&mut self, requests: &[ScoreRequest<'_>]) -> Result<Vec<PllScore>, PllError>;

    /// Short provenance string recorded next to the scores.
    fn describe(&self) -> String;
}

const BOS: u32 = u32::MAX;
const EOS: u32 = u32::MAX - 1;
const UNK: u32 = u32::MAX - 2;

#[derive(Debug, Default, Clone)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Additively smoothed n-gram model with symmetric context on both sides.
///
/// Each position is predicted from `k` tokens to its left and `k` to its right,
/// for every `k` in `1..order`; the level estimates
/// `(c(ctx, w) + α) / (c(ctx) + α·V)` are averaged. `V` counts the training
/// vocabulary plus one slot for unknown tokens. With `order = 1` the model is a
/// smoothed unigram.
#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    alpha: f64,
    vocab: HashMap<String, u32>,
    levels: Vec<HashMap<Vec<u32>, ContextCounts>>,
    unigrams: ContextCounts,
}

impl NgramScorer {
    pub fn train<I, S>(sentences: I, order: usize, alpha: f64) -> Result<Self, PllError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        ScorerSpec {
            kind: ScorerKind::ReferenceNgram { order, alpha },
            normalization: Normalization::PerToken,
        }
        .validate()?;
        let mut model = NgramScorer {
            order,
            alpha,
            vocab: HashMap::new(),
            levels: vec![HashMap::new(); order.saturating_sub(1)],
            unigrams: ContextCounts::default(),
        };
        for sentence in sentences {
            let ids: Vec<u32> = sentence
                .as_ref()
                .iter()
                .map(|t| {
                    let next = model.vocab.len() as u32;
                    *model.vocab.entry(t.clone()).or_insert(next)
                })
                .collect();
            for (t, &w) in ids.iter().enumerate() {
                model.unigrams.total += 1;
                *model.unigrams.next.entry(w).or_insert(0) += 1;
                for k in 1..order {
                    let entry = model.levels[k - 1].entry(context(&ids, t, k)).or_default();
                    entry.total += 1;
                    *entry.next.entry(w).or_insert(0) += 1;
                }
            }
        }
        Ok(model)
    }

    /// Vocabulary size including the unknown-token slot.
    pub fn v(&self) -> f64 {
        (self.vocab.len() + 1) as f64
    }

    fn estimate(&self, counts: Option<&ContextCounts>, w: u32) -> f64 {
        let (joint, total) = counts.map_or((0, 0), |c| (c.next.get(&w).copied().unwrap_or(0), c.total));
        (joint as f64 + self.alpha) / (total as f64 + self.alpha * self.v())
    }

    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<PllScore, PllError> {
        if tokens.is_empty() {
            return Err(PllError::EmptySentence);
        }
        let ids: Vec<u32> = tokens
            .iter()
            .map(|t| self.vocab.get(t.as_ref()).copied().unwrap_or(UNK))
            .collect();
        let mut value = 0.0;
        for (t, &w) in ids.iter().enumerate() {
            let p = if self.order == 1 {
                self.estimate(Some(&self.unigrams), w)
            } else {
                let sum: f64 = (1..self.order)
                    .map(|k| self.estimate(self.levels[k - 1].get(&context(&ids, t, k)), w))
                    .sum();
                sum / (self.order - 1) as f64
            };
            value += p.ln();
        }
        Ok(PllScore::new(value, tokens.len()))
    }
}

fn context(ids: &[u32], t: usize, k: usize) -> Vec<u32> {
    let left = (1..=k).map(|j| if t >= j { ids[t - j] } else { BOS });
    let right = (1..=k).map(|j| ids.get(t + j).copied().unwrap_or(EOS));
    left.chain(right).collect()
}

impl Scorer for NgramScorer {
    fn score_batch(&mut self, requests: &[ScoreRequest<'_>]) -> Result<Vec<PllScore>, PllError> {
        requests.par_iter().map(|r| self.score_tokens(r.tokens)).collect()
    }

    fn describe(&self) -> String {
        format!(
            "reference_ngram order={} alpha={} vocab={}",
            self.order,
            self.alpha,
            self.vocab.len()
        )
    }
}

/// Convenience wrapper for scoring one sentence with the reference model.
pub fn pll_score<S: AsRef<str>>(tokens: &[S], scorer: &NgramScorer) -> Result<PllScore, PllError> {
    scorer.score_tokens(tokens)
}

/// Client for an external scorer process.
///
/// Frames are single JSON objects, one per line, on the child's stdin and stdout.
/// Both sides open with `{"hello": 1}`. Requests are `{"id", "text"}` and
/// responses `{"id", "pll", "tokens"}`, possibly out of order; a response carrying
/// an `error` field aborts the batch.
pub struct ExternalScorer {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    batch_size: usize,
    next_id: u64,
}

impl ExternalScorer {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, PllError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PllError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut scorer = ExternalScorer {
            command: command.to_string(),
            stdin: child.stdin.take(),
            child,
            lines: rx,
            timeout,
            batch_size: 64,
            next_id: 0,
        };
        scorer.handshake()?;
        Ok(scorer)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn send(&mut self, frame: &Value) -> Result<(), PllError> {
        let stdin = self.stdin.as_mut().ok_or(PllError::Closed)?;
        writeln!(stdin, "{frame}")?;
        Ok(())
    }

    fn flush(&mut self) -> Result<(), PllError> {
        self.stdin.as_mut().ok_or(PllError::Closed)?.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, PllError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PllError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(PllError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(PllError::Closed),
        }
    }

    fn handshake(&mut self) -> Result<(), PllError> {
        self.send(&json!({"hello": 1}))?;
        self.flush()?;
        let frame = self.recv()?;
        let value: Value = serde_json::from_str(&frame).map_err(|e| PllError::Protocol {
            frame: frame.clone(),
            message: e.to_string(),
        })?;
        if value.get("hello").and_then(Value::as_i64) != Some(1) {
            return Err(PllError::Protocol {
                frame,
                message: "expected hello frame with version 1".into(),
            });
        }
        Ok(())
    }

    fn parse_response(frame: &str) -> Result<(u64, PllScore), PllError> {
        let violation = |message: &str| PllError::Protocol {
            frame: frame.to_string(),
            message: message.to_string(),
        };
        let value: Value = serde_json::from_str(frame).map_err(|e| violation(&e.to_string()))?;
        if value.get("error").is_some() {
            return Err(PllError::Remote {
                frame: frame.to_string(),
            });
        }
        let id = value
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| violation("missing id"))?;
        let pll = value
            .get("pll")
            .and_then(Value::as_f64)
            .filter(|p| p.is_finite())
            .ok_or_else(|| violation("missing or non-finite pll"))?;
        let tokens = value
            .get("tokens")
            .and_then(Value::as_u64)
            .filter(|&t| t > 0)
            .ok_or_else(|| violation("tokens must be a positive integer"))?;
        Ok((id, PllScore::new(pll, tokens as usize)))
    }

    fn score_chunk(&mut self, requests: &[ScoreRequest<'_>]) -> Result<Vec<PllScore>, PllError> {
        let first = self.next_id;
        for (offset, r) in requests.iter().enumerate() {
            if r.text.trim().is_empty() {
                return Err(PllError::EmptySentence);
            }
            self.send(&json!({"id": first + offset as u64, "text": r.text}))?;
        }
        self.next_id += requests.len() as u64;
        self.flush()?;

        let mut results: BTreeMap<u64, PllScore> = BTreeMap::new();
        while results.len() < requests.len() {
            let frame = self.recv()?;
            if frame.trim().is_empty() {
                continue;
            }
            let (id, score) = Self::parse_response(&frame)?;
            if id < first || id >= self.next_id {
                return Err(PllError::Protocol {
                    frame,
                    message: "response id matches no pending request".into(),
                });
            }
            if results.insert(id, score).is_some() {
                return Err(PllError::Protocol {
                    frame,
                    message: "duplicate response id".into(),
                });
            }
        }
        Ok(results.into_values().collect())
    }
}

impl Scorer for ExternalScorer {
    fn score_batch(&mut self, requests: &[ScoreRequest<'_>]) -> Result<Vec<PllScore>, PllError> {
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.batch_size) {
            out.extend(self.score_chunk(chunk)?);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("external command={:?}", self.command)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        drop(self.stdin.take());
        match self.child.try_wait() {
            Ok(Some(_)) => {}
            _ => {
                thread::sleep(Duration::from_millis(20));
                if !matches!(self.child.try_wait(), Ok(Some(_))) {
                    let _ = self.child.kill();
                }
                let _ = self.child.wait();
            }
        }
    }
}

/// Builds the scorer named by `spec`. The reference model is trained on `train`.
pub fn build_scorer(spec: &ScorerSpec, train: &[Vec<String>], timeout: Duration) -> Result<Box<dyn Scorer>, PllError> {
    spec.validate()?;
    Ok(match &spec.kind {
        ScorerKind::ReferenceNgram { order, alpha } => Box::new(NgramScorer::train(train, *order, *alpha)?),
        ScorerKind::External { command } => Box::new(ExternalScorer::spawn(command, timeout)?),
    })
}

/// Fills in `pll` for every candidate.
pub fn score_candidates(cands: &mut [Candidate], scorer: &mut dyn Scorer) -> Result<(), PllError> {
    let tokens: Vec<Vec<String>> = cands
        .iter()
        .map(|c| c.tree.tokens().into_iter().map(String::from).collect())
        .collect();
    let requests: Vec<ScoreRequest<'_>> = cands
        .iter()
        .zip(&tokens)
        .map(|(c, t)| ScoreRequest {
            tokens: t,
            text: &c.text,
        })
        .collect();
    let scores = scorer.score_batch(&requests)?;
    for (c, s) in cands.iter_mut().zip(scores) {
        c.pll = Some(s);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// One rank cutoff over the whole pool.
    #[default]
    Global,
    /// A separate cutoff for each (operation kind, iteration count) stratum.
    PerStratum,
}

/// `⌈fraction · n⌉`, with a small tolerance so that products such as `0.05 · 20`
/// are not pushed up by floating-point error.
pub fn keep_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn rank_key(c: &Candidate, normalization: Normalization) -> f64 {
    c.pll.map_or(f64::NEG_INFINITY, |p| p.get(normalization))
}

fn rank(cands: &mut [Candidate], normalization: Normalization) {
    cands.sort_by(|a, b| {
        rank_key(b, normalization)
            .total_cmp(&rank_key(a, normalization))
            .then_with(|| a.source_id.cmp(&b.source_id))
            .then_with(|| a.text.cmp(&b.text))
    });
}

/// Keeps the highest-scoring `⌈fraction · N⌉` candidates, best first.
///
/// Ties are broken by source id and then text, both ascending. Unscored
/// candidates rank below every scored one.
pub fn filter_top(
    cands: Vec<Candidate>,
    fraction: f64,
    normalization: Normalization,
    mode: CutoffMode,
) -> Result<Vec<Candidate>, PllError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PllError::InvalidFraction(fraction));
    }
    let mut kept = match mode {
        CutoffMode::Global => {
            let mut all = cands;
            rank(&mut all, normalization);
            let n = keep_count(fraction, all.len());
            all.truncate(n);
            all
        }
        CutoffMode::PerStratum => {
            let mut strata: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
            for c in cands {
                strata.entry(c.stratum()).or_default().push(c);
            }
            let mut kept = Vec::new();
            for (_, mut group) in strata {
                rank(&mut group, normalization);
                let n = keep_count(fraction, group.len());
                kept.extend(group.into_iter().take(n));
            }
            kept
        }
    };
    rank(&mut kept, normalization);
    Ok(kept)
}
