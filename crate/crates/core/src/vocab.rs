//! Controlled vocabularies for intake form fields.
//!
//! File format: UTF-8, one token per line; blank lines and lines starting
//! with `#` are ignored.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::normalize::normalize;

pub const TITLES: &str = "titles";
pub const LAND_TYPES: &str = "land_types";
pub const EMPLOYMENT: &str = "employment";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VocabularyError {
    #[error("vocabulary {name:?}: duplicate token {token:?}")]
    DuplicateToken { name: String, token: String },
    #[error("vocabulary {0:?}: io error: {1}")]
    Io(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    name: String,
    entries: Vec<String>,
}

impl Vocabulary {
    pub fn new(name: impl Into<String>, entries: Vec<String>) -> Result<Self, VocabularyError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for token in &entries {
            if !seen.insert(normalize(token)) {
                return Err(VocabularyError::DuplicateToken {
                    name,
                    token: token.clone(),
                });
            }
        }
        Ok(Vocabulary { name, entries })
    }

    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, VocabularyError> {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Self::new(name, entries)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Canonical spelling of `token`, if it is in the vocabulary.
    pub fn lookup(&self, token: &str) -> Option<&str> {
        let key = normalize(token);
        self.entries
            .iter()
            .find(|e| normalize(e) == key)
            .map(String::as_str)
    }
}

/// The named vocabularies shipped as config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabularies(BTreeMap<String, Vocabulary>);

impl Vocabularies {
    pub fn insert(&mut self, vocab: Vocabulary) {
        self.0.insert(vocab.name.clone(), vocab);
    }

    pub fn get(&self, name: &str) -> Option<&Vocabulary> {
        self.0.get(name)
    }

    /// Loads every `*.txt` in `dir`; the file stem is the vocabulary name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, VocabularyError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| VocabularyError::Io(dir.display().to_string(), e.to_string());
        let mut out = Vocabularies::default();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let name = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let text = std::fs::read_to_string(&path).map_err(io)?;
            out.insert(Vocabulary::parse(name, &text)?);
        }
        Ok(out)
    }
}
