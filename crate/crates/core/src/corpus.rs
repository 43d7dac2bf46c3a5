//! Corpus documents, the line-delimited manifest format and descriptive statistics.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Nl,
    It,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Nl => "nl",
            Language::It => "it",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            "nl" => Ok(Language::Nl),
            "it" => Ok(Language::It),
            other => Err(format!("unsupported language code `{other}`")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Annotation status: fully, partially or un-corrected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Gold,
    Silver,
    Bronze,
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold" => Ok(Status::Gold),
            "silver" => Ok(Status::Silver),
            "bronze" => Ok(Status::Bronze),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// One corpus item. Field order here is the canonical manifest field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: Language,
    pub text: String,
    pub tokens: Vec<String>,
    pub sbn: Option<String>,
    pub ccg: Option<String>,
    pub status: Status,
}

impl Document {
    /// Minimal gold English document with whitespace tokens; handy for tests and synthetic data.
    pub fn new(id: impl Into<String>, text: impl Into<String>, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            lang: Language::En,
            text: text.into(),
            tokens,
            sbn: None,
            ccg: None,
            status: Status::Gold,
        }
    }

    pub fn char_length(&self) -> usize {
        self.text.chars().count()
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let bad = |field: &str, message: &str| CorpusError::Malformed {
            line,
            field: field.to_string(),
            message: message.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("id", "must be non-empty"));
        }
        if self.text.is_empty() {
            return Err(bad("text", "must contain at least one character"));
        }
        if self.tokens.is_empty() {
            return Err(bad("tokens", "must be non-empty when text is non-empty"));
        }
        Ok(())
    }

    /// Canonical single-line JSON encoding.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("document serialization cannot fail")
    }
}

fn take_string(obj: &Map<String, Value>, field: &str, line: usize) -> Result<String, CorpusError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(CorpusError::Malformed {
            line,
            field: field.into(),
            message: "expected a string".into(),
        }),
        None => Err(CorpusError::Malformed {
            line,
            field: field.into(),
            message: "missing".into(),
        }),
    }
}

fn take_nullable(obj: &Map<String, Value>, field: &str, line: usize) -> Result<Option<String>, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(CorpusError::Malformed {
            line,
            field: field.into(),
            message: "expected a string or null".into(),
        }),
    }
}

/// Parses one manifest record. `line` is 1-based and only used for diagnostics.
pub fn parse_record(raw: &str, line: usize) -> Result<Document, CorpusError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
        line,
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(CorpusError::Malformed {
            line,
            field: "<record>".into(),
            message: "expected a JSON object".into(),
        });
    };
    let malformed = |field: &str, message: String| CorpusError::Malformed {
        line,
        field: field.into(),
        message,
    };

    let id = take_string(&obj, "id", line)?;
    let lang = take_string(&obj, "lang", line)?
        .parse::<Language>()
        .map_err(|m| malformed("lang", m))?;
    let text = take_string(&obj, "text", line)?;
    let tokens = match obj.get("tokens") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|t| match t {
                Value::String(s) => Ok(s.clone()),
                _ => Err(malformed("tokens", "expected an array of strings".into())),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed("tokens", "expected an array of strings".into())),
        None => return Err(malformed("tokens", "missing".into())),
    };
    let sbn = take_nullable(&obj, "sbn", line)?;
    let ccg = take_nullable(&obj, "ccg", line)?;
    let status = take_string(&obj, "status", line)?
        .parse::<Status>()
        .map_err(|m| malformed("status", m))?;

    let doc = Document {
        id,
        lang,
        text,
        tokens,
        sbn,
        ccg,
        status,
    };
    doc.validate(line)?;
    Ok(doc)
}

/// Reads a manifest from any buffered reader. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, path: &Path) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let raw = line.map_err(|e| CorpusError::io(path, e))?;
        if raw.trim().is_empty() {
            continue;
        }
        let doc = parse_record(&raw, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: doc.id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus(BufReader::new(file), path)
}

pub fn write_corpus<W: Write>(docs: &[Document], mut out: W) -> io::Result<()> {
    for doc in docs {
        out.write_all(doc.to_record().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_corpus(docs, BufWriter::new(file)).map_err(|e| CorpusError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    /// Mean number of tokens per document, punctuation tokens included.
    pub avg_sentence_length: f64,
    pub avg_char_length: f64,
}

pub fn corpus_stats<'a, I>(docs: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a Document>,
{
    let (mut count, mut tokens, mut chars) = (0usize, 0usize, 0usize);
    for doc in docs {
        count += 1;
        tokens += doc.tokens.len();
        chars += doc.char_length();
    }
    if count == 0 {
        return CorpusStats::default();
    }
    CorpusStats {
        doc_count: count,
        avg_sentence_length: tokens as f64 / count as f64,
        avg_char_length: chars as f64 / count as f64,
    }
}
