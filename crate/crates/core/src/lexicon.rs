//! Term lexicon for the mention matcher.
//!
//! The file format is a sequence of `[section]` stanzas with one term per
//! line; `#` starts a comment and a `# version: N` comment pins the lexicon
//! version. Terms are compared token by token after lower-casing, so
//! punctuation and hyphens inside a term are insignificant.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::Modality;

/// The embedded default lexicon.
pub const DEFAULT_LEXICON: &str = include_str!("lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermClass {
    Modality(Modality),
    /// Unqualified "blood pressure": either BP vital.
    BloodPressure,
    High,
    Low,
    Abnormal,
    Normal,
    Negation,
    Absence,
}

impl TermClass {
    pub fn section(self) -> &'static str {
        match self {
            TermClass::Modality(m) => m.name(),
            TermClass::BloodPressure => "blood_pressure",
            TermClass::High => "high",
            TermClass::Low => "low",
            TermClass::Abnormal => "abnormal",
            TermClass::Normal => "normal",
            TermClass::Negation => "negation",
            TermClass::Absence => "absence",
        }
    }

    fn from_section(name: &str) -> Option<Self> {
        if let Ok(m) = name.parse::<Modality>() {
            return Some(TermClass::Modality(m));
        }
        Some(match name {
            "blood_pressure" => TermClass::BloodPressure,
            "high" => TermClass::High,
            "low" => TermClass::Low,
            "abnormal" => TermClass::Abnormal,
            "normal" => TermClass::Normal,
            "negation" => TermClass::Negation,
            "absence" => TermClass::Absence,
            _ => return None,
        })
    }

    pub fn is_indicator(self) -> bool {
        matches!(self, TermClass::High | TermClass::Low | TermClass::Abnormal | TermClass::Normal)
    }

    pub fn is_modality(self) -> bool {
        matches!(self, TermClass::Modality(_) | TermClass::BloodPressure)
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: term `{term}` appears before any section")]
    TermOutsideSection { line: usize, term: String },
    #[error("line {line}: term `{term}` already listed under [{first}]")]
    DuplicateTerm { line: usize, term: String, first: &'static str },
    #[error("line {line}: term has no words")]
    EmptyTerm { line: usize },
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A word token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lower-cased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                tokens.push(Token { text: text[s..i].to_lowercase(), start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: text[s..].to_lowercase(), start: s, end: text.len() });
    }
    tokens
}

/// A lexicon term found in a token sequence, `start..end` in token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hit {
    pub class: TermClass,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    version: Option<String>,
    /// Longest terms first so the scan is greedy.
    terms: Vec<(Vec<String>, TermClass)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("embedded lexicon is valid")
    }
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut version = None;
        let mut section: Option<TermClass> = None;
        let mut seen: BTreeMap<Vec<String>, TermClass> = BTreeMap::new();
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                section = Some(TermClass::from_section(name).ok_or_else(|| LexiconError::UnknownSection {
                    line,
                    name: name.to_string(),
                })?);
                continue;
            }
            let Some(class) = section else {
                return Err(LexiconError::TermOutsideSection { line, term: trimmed.to_string() });
            };
            let words: Vec<String> = tokenize(trimmed).into_iter().map(|t| t.text).collect();
            if words.is_empty() {
                return Err(LexiconError::EmptyTerm { line });
            }
            if let Some(first) = seen.get(&words) {
                return Err(LexiconError::DuplicateTerm {
                    line,
                    term: trimmed.to_string(),
                    first: first.section(),
                });
            }
            seen.insert(words.clone(), class);
            terms.push((words, class));
        }
        // Stable: equal-length terms keep file order.
        terms.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        Ok(Self { version, terms })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    /// Terms of one class as space-joined words, sorted.
    pub fn terms_of(&self, class: TermClass) -> Vec<String> {
        let mut out: Vec<_> = self.terms.iter().filter(|(_, c)| *c == class).map(|(w, _)| w.join(" ")).collect();
        out.sort();
        out
    }

    /// Greedy longest-match scan. Hits never overlap.
    pub fn scan(&self, tokens: &[Token]) -> Vec<Hit> {
        let mut hits = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let found = self.terms.iter().find(|(words, _)| {
                words.len() <= tokens.len() - i && words.iter().zip(&tokens[i..]).all(|(w, t)| *w == t.text)
            });
            match found {
                Some((words, class)) => {
                    hits.push(Hit { class: *class, start: i, end: i + words.len() });
                    i += words.len();
                }
                None => i += 1,
            }
        }
        hits
    }
}

impl fmt::Display for TermClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.section())
    }
}
