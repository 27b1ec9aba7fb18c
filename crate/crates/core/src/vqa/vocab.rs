use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const YES: &str = "yes";
pub const NO: &str = "no";

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, PartialEq)]
pub enum VocabularyError {
    #[error("vocabulary name is empty")]
    EmptyName,
    #[error("{0:?} is listed twice")]
    Duplicate(String),
    #[error("{0:?} is reserved for yes/no answers")]
    Reserved(String),
    #[error("synonym {alias:?} maps to {target:?}, which is not in the vocabulary")]
    DanglingSynonym { alias: String, target: String },
}

/// Ordered member and damage names plus an answer synonym table.
///
/// Order matters: when a question has several correct answers, oracles pick
/// the first in vocabulary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    members: Vec<String>,
    damages: Vec<String>,
    synonyms: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    members: Vec<String>,
    damages: Vec<String>,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = VocabularyError;
    fn try_from(f: VocabularyFile) -> Result<Self, Self::Error> {
        Vocabulary::new(f.members, f.damages)?.with_synonyms(f.synonyms)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            members: v.members,
            damages: v.damages,
            synonyms: v.synonyms,
        }
    }
}

impl Default for Vocabulary {
    /// Member and damage names seen on steel girder bridges in inspection
    /// reports. Extend through a vocabulary file for larger label sets.
    fn default() -> Self {
        let members = [
            "main girder",
            "cross beam",
            "slab",
            "abutment",
            "drainage pipe",
            "wheel guard",
            "expansion joint",
            "bearing",
            "utility attachment",
            "wall",
        ];
        let damages = [
            "corrosion",
            "cracking",
            "leaking",
            "free lime",
            "degradation of the anticorrosive",
            "fracture",
            "fissure",
            "sinking/displacement/slanting",
        ];
        Vocabulary::new(members, damages)
            .and_then(|v| v.with_synonyms([("water leakage", "leaking")]))
            .expect("built-in vocabulary is valid")
    }
}

impl Vocabulary {
    pub fn new<M, D>(members: M, damages: D) -> Result<Self, VocabularyError>
    where
        M: IntoIterator,
        M::Item: AsRef<str>,
        D: IntoIterator,
        D::Item: AsRef<str>,
    {
        let members = clean_names(members)?;
        let damages = clean_names(damages)?;
        Ok(Self {
            members,
            damages,
            synonyms: BTreeMap::new(),
        })
    }

    /// Adds answer synonyms. Targets must be vocabulary names or yes/no.
    pub fn with_synonyms<I, A, B>(mut self, pairs: I) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        for (alias, target) in pairs {
            let alias = normalize(alias.as_ref());
            let target = normalize(target.as_ref());
            if !self.is_answer(&target) {
                return Err(VocabularyError::DanglingSynonym { alias, target });
            }
            self.synonyms.insert(alias, target);
        }
        Ok(self)
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn damages(&self) -> &[String] {
        &self.damages
    }

    pub fn synonyms(&self) -> &BTreeMap<String, String> {
        &self.synonyms
    }

    /// Normalized form with synonyms applied.
    pub fn canonical(&self, raw: &str) -> String {
        let n = normalize(raw);
        match self.synonyms.get(&n) {
            Some(target) => target.clone(),
            None => n,
        }
    }

    pub fn member_rank(&self, name: &str) -> Option<usize> {
        self.members.iter().position(|m| m == name)
    }

    pub fn damage_rank(&self, name: &str) -> Option<usize> {
        self.damages.iter().position(|d| d == name)
    }

    /// Canonical member name for `raw`, if it is one.
    pub fn member(&self, raw: &str) -> Option<&str> {
        let c = self.canonical(raw);
        self.members.iter().find(|m| **m == c).map(String::as_str)
    }

    pub fn damage(&self, raw: &str) -> Option<&str> {
        let c = self.canonical(raw);
        self.damages.iter().find(|d| **d == c).map(String::as_str)
    }

    fn is_answer(&self, canonical: &str) -> bool {
        canonical == YES
            || canonical == NO
            || self.members.iter().any(|m| m == canonical)
            || self.damages.iter().any(|d| d == canonical)
    }

    /// Canonical answer for a raw reply, or `None` when it falls outside
    /// members, damages and yes/no.
    pub fn normalize_answer(&self, raw: &str) -> Option<String> {
        let c = self.canonical(raw);
        self.is_answer(&c).then_some(c)
    }
}

fn clean_names<I>(names: I) -> Result<Vec<String>, VocabularyError>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut out: Vec<String> = Vec::new();
    for raw in names {
        let n = normalize(raw.as_ref());
        if n.is_empty() {
            return Err(VocabularyError::EmptyName);
        }
        if n == YES || n == NO {
            return Err(VocabularyError::Reserved(n));
        }
        if out.contains(&n) {
            return Err(VocabularyError::Duplicate(n));
        }
        out.push(n);
    }
    Ok(out)
}

/// An oracle's reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Answer {
    pub fn new(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            confidence: None,
        }
    }

    pub fn yes_no(yes: bool) -> Self {
        Self::new(if yes { YES } else { NO })
    }

    pub fn is_yes(&self) -> bool {
        self.value == YES
    }

    pub fn is_no(&self) -> bool {
        self.value == NO
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_and_lowercases() {
        assert_eq!(normalize("  Main\t  GIRDER \n"), "main girder");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn default_vocabulary_order() {
        let v = Vocabulary::default();
        assert_eq!(v.members().len(), 10);
        assert_eq!(v.damages().len(), 8);
        assert_eq!(v.damages()[0], "corrosion");
        assert_eq!(v.member("Cross  Beam"), Some("cross beam"));
        assert_eq!(v.damage("Water Leakage"), Some("leaking"));
        assert_eq!(v.member("pier"), None);
    }

    #[test]
    fn answer_normalization() {
        let v = Vocabulary::default();
        assert_eq!(v.normalize_answer(" YES "), Some("yes".into()));
        assert_eq!(
            v.normalize_answer("water   leakage"),
            Some("leaking".into())
        );
        assert_eq!(v.normalize_answer("Slab"), Some("slab".into()));
        assert_eq!(v.normalize_answer("maybe"), None);
    }

    #[test]
    fn rejects_bad_vocabularies() {
        assert_eq!(
            Vocabulary::new(["slab", "Slab"], ["corrosion"]),
            Err(VocabularyError::Duplicate("slab".into()))
        );
        assert_eq!(
            Vocabulary::new(["yes"], ["corrosion"]),
            Err(VocabularyError::Reserved("yes".into()))
        );
        assert_eq!(
            Vocabulary::new([" "], ["x"]),
            Err(VocabularyError::EmptyName)
        );
        let v = Vocabulary::new(["slab"], ["corrosion"]).unwrap();
        assert!(matches!(
            v.with_synonyms([("rust", "oxidation")]),
            Err(VocabularyError::DanglingSynonym { .. })
        ));
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let v = Vocabulary::default();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
        let bad = r#"{"members": ["a", "a"], "damages": []}"#;
        assert!(serde_json::from_str::<Vocabulary>(bad).is_err());
    }
}
