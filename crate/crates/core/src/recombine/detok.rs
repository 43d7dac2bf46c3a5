use std::collections::{HashMap, HashSet};

use crate::corpus::Document;

const ATTACH_LEFT: &[&str] = &[
    ".", ",", "!", "?", ";", ":", "...", "%", ")", "]", "}", "'s", "'S", "n't", "N'T", "'re", "'ve", "'ll", "'d", "'m",
    "'",
];
const ATTACH_RIGHT: &[&str] = &["(", "[", "{", "$", "#"];

/// Joins tokens into surface text.
///
/// Punctuation and clitics attach to the previous token, opening brackets to the
/// next one, and straight double quotes alternate between opening and closing.
/// Extra attachment rules can be learned from a corpus whose texts and token
/// layers are both known.
#[derive(Debug, Clone)]
pub struct Detokenizer {
    attach_left: HashSet<String>,
    attach_right: HashSet<String>,
}

impl Default for Detokenizer {
    fn default() -> Self {
        Detokenizer {
            attach_left: ATTACH_LEFT.iter().map(|s| s.to_string()).collect(),
            attach_right: ATTACH_RIGHT.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Faithfulness {
    pub exact: usize,
    pub total: usize,
    /// Document ids whose text could not be reproduced.
    pub mismatches: Vec<String>,
}

impl Faithfulness {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.exact as f64 / self.total as f64
        }
    }
}

/// Whether each token boundary in `doc` is written with whitespace; `None` when the
/// tokens cannot be located in the text in order.
fn boundaries(doc: &Document) -> Option<Vec<bool>> {
    let mut rest = doc.text.as_str();
    let mut spaced = Vec::with_capacity(doc.tokens.len());
    for (i, tok) in doc.tokens.iter().enumerate() {
        let trimmed = rest.trim_start();
        if i > 0 {
            spaced.push(trimmed.len() != rest.len());
        }
        rest = trimmed.strip_prefix(tok.as_str())?;
    }
    rest.trim().is_empty().then_some(spaced)
}

impl Detokenizer {
    /// Default rules extended with tokens that the corpus writes attached to a
    /// neighbour more often than not.
    pub fn learn<'a, I: IntoIterator<Item = &'a Document>>(docs: I) -> Self {
        let mut det = Detokenizer::default();
        let docs: Vec<(&Document, Vec<bool>)> =
            docs.into_iter().filter_map(|d| boundaries(d).map(|b| (d, b))).collect();

        let mut left: HashMap<&str, (usize, usize)> = HashMap::new();
        for (doc, spaced) in &docs {
            for (i, &s) in spaced.iter().enumerate() {
                let e = left.entry(doc.tokens[i + 1].as_str()).or_default();
                if s {
                    e.1 += 1
                } else {
                    e.0 += 1
                }
            }
        }
        for (tok, (glued, apart)) in &left {
            if glued > apart && *tok != "\"" {
                det.attach_left.insert(tok.to_string());
            }
        }

        let mut right: HashMap<&str, (usize, usize)> = HashMap::new();
        for (doc, spaced) in &docs {
            for (i, &s) in spaced.iter().enumerate() {
                if det.attach_left.contains(&doc.tokens[i + 1]) {
                    continue;
                }
                let e = right.entry(doc.tokens[i].as_str()).or_default();
                if s {
                    e.1 += 1
                } else {
                    e.0 += 1
                }
            }
        }
        for (tok, (glued, apart)) in &right {
            if glued > apart && *tok != "\"" {
                det.attach_right.insert(tok.to_string());
            }
        }
        det
    }

    pub fn realize<S: AsRef<str>>(&self, tokens: &[S], capitalize: bool) -> String {
        let mut out = String::new();
        let mut glue_next = true;
        let mut quote_open = false;
        for tok in tokens {
            let tok = tok.as_ref();
            let (attach_left, attach_right) = if tok == "\"" {
                quote_open = !quote_open;
                (!quote_open, quote_open)
            } else {
                (self.attach_left.contains(tok), self.attach_right.contains(tok))
            };
            if !glue_next && !attach_left {
                out.push(' ');
            }
            out.push_str(tok);
            glue_next = attach_right;
        }
        if capitalize {
            if let Some(first) = out.chars().next() {
                if first.is_lowercase() {
                    let upper: String = first.to_uppercase().collect();
                    out.replace_range(..first.len_utf8(), &upper);
                }
            }
        }
        out
    }

    /// Realizes every document's token layer and compares it with its text.
    pub fn faithfulness<'a, I: IntoIterator<Item = &'a Document>>(&self, docs: I) -> Faithfulness {
        let mut report = Faithfulness::default();
        for doc in docs {
            report.total += 1;
            if self.realize(&doc.tokens, false) == doc.text {
                report.exact += 1;
            } else {
                report.mismatches.push(doc.id.clone());
            }
        }
        report
    }
}

pub fn starts_uppercase(text: &str) -> bool {
    text.chars().next().is_some_and(char::is_uppercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, tokens: &[&str]) -> Document {
        Document::new(id, text, tokens.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn default_rules() {
        let d = Detokenizer::default();
        assert_eq!(d.realize(&["I", "have", "a", "dog", "."], false), "I have a dog.");
        assert_eq!(
            d.realize(&["My", "bag", "is", "very", "heavy", "."], false),
            "My bag is very heavy."
        );
        assert_eq!(
            d.realize(&["He", "does", "n't", "know", "Tom", "'s", "dog", "!"], false),
            "He doesn't know Tom's dog!"
        );
        assert_eq!(
            d.realize(&["She", "said", "\"", "hi", "\"", "."], false),
            "She said \"hi\"."
        );
        assert_eq!(d.realize(&["a", "(", "b", ")", "c"], false), "a (b) c");
        assert_eq!(d.realize(&["the", "cat", "."], true), "The cat.");
    }

    #[test]
    fn learns_corpus_attachments() {
        let docs = [
            doc("1", "I can't swim.", &["I", "ca", "n't", "swim", "."]),
            doc("2", "It costs €5.", &["It", "costs", "€", "5", "."]),
            doc("3", "Pay €10 now.", &["Pay", "€", "10", "now", "."]),
        ];
        let plain = Detokenizer::default();
        assert!(plain.faithfulness(&docs).rate() < 1.0);
        let learned = Detokenizer::learn(&docs);
        let f = learned.faithfulness(&docs);
        assert_eq!(f.exact, 3, "{:?}", f.mismatches);
    }

    #[test]
    fn boundary_detection() {
        let d = doc("1", "Tom's here.", &["Tom", "'s", "here", "."]);
        assert_eq!(boundaries(&d), Some(vec![false, true, false]));
        let bad = doc("2", "abc", &["x"]);
        assert_eq!(boundaries(&bad), None);
    }
}
