use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::PurposeLabel;
use crate::text::{collapse_lower, find_words, normalize_phrase, words};

#[derive(Clone, Debug)]
struct Reduction {
    pattern: Vec<String>,
    reduced: String,
}

/// Grammar-reduction rules: normalized pattern -> reduced phrase.
#[derive(Clone, Debug, Default)]
pub struct ReductionRules {
    rules: Vec<Reduction>,
}

impl ReductionRules {
    pub fn new(rules: impl IntoIterator<Item = (String, String)>) -> Result<Self, String> {
        let mut out = Vec::new();
        for (pattern, reduced) in rules {
            let norm = normalize_phrase(&pattern);
            if norm.is_empty() {
                return Err(format!("empty pattern for reduction {reduced:?}"));
            }
            out.push(Reduction {
                pattern: words(&norm).into_iter().map(String::from).collect(),
                reduced,
            });
        }
        Ok(Self { rules: out })
    }

    /// Reduced phrase of the longest rule pattern contained in `purpose`
    /// (earlier rules win ties); otherwise the input lower-cased with
    /// whitespace collapsed.
    pub fn simplify(&self, purpose: &str) -> String {
        let norm = normalize_phrase(purpose);
        let hay = words(&norm);
        let mut best: Option<&Reduction> = None;
        for rule in &self.rules {
            let needle: Vec<&str> = rule.pattern.iter().map(String::as_str).collect();
            if find_words(&hay, &needle).is_some() && best.is_none_or(|b| rule.pattern.len() > b.pattern.len()) {
                best = Some(rule);
            }
        }
        match best {
            Some(rule) => rule.reduced.clone(),
            None => collapse_lower(purpose),
        }
    }
}

/// Result of purpose synonymization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum CanonicalPurpose {
    Label(PurposeLabel),
    Unmapped,
}

impl CanonicalPurpose {
    pub const UNMAPPED: &'static str = "UNMAPPED";

    pub fn label(&self) -> Option<&PurposeLabel> {
        match self {
            Self::Label(l) => Some(l),
            Self::Unmapped => None,
        }
    }
}

impl From<CanonicalPurpose> for String {
    fn from(value: CanonicalPurpose) -> Self {
        value.to_string()
    }
}

impl From<String> for CanonicalPurpose {
    fn from(value: String) -> Self {
        match PurposeLabel::new(value) {
            Ok(l) if l.as_str() != Self::UNMAPPED => Self::Label(l),
            _ => Self::Unmapped,
        }
    }
}

impl fmt::Display for CanonicalPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Label(l) => l.fmt(f),
            Self::Unmapped => f.write_str(Self::UNMAPPED),
        }
    }
}

/// Phrase -> canonical purpose label. Label order is precedence order.
#[derive(Clone, Debug, Default)]
pub struct SynonymLexicon {
    labels: Vec<(PurposeLabel, Vec<Vec<String>>)>,
    exact: HashMap<String, usize>,
}

impl SynonymLexicon {
    /// Each label implicitly owns its own spelled-out name
    /// (`CONTENT_PERSONALIZATION` -> "content personalization").
    pub fn new(labels: Vec<(PurposeLabel, Vec<String>)>) -> Result<Self, String> {
        let mut lex = SynonymLexicon::default();
        for (idx, (label, phrases)) in labels.into_iter().enumerate() {
            if label.is_not_provided() {
                return Err("NOT_PROVIDED cannot be a synonym target".into());
            }
            if lex.labels.iter().any(|(l, _)| *l == label) {
                return Err(format!("label {label} listed twice"));
            }
            let mut owned = Vec::new();
            for phrase in std::iter::once(label.as_str().to_string()).chain(phrases) {
                let norm = normalize_phrase(&phrase);
                if norm.is_empty() {
                    return Err(format!("empty phrase for {label}"));
                }
                match lex.exact.get(&norm) {
                    Some(&other) if other != idx => {
                        return Err(format!(
                            "phrase {norm:?} maps to both {} and {label}",
                            lex.labels[other].0
                        ));
                    }
                    Some(_) => continue,
                    None => {
                        lex.exact.insert(norm.clone(), idx);
                    }
                }
                owned.push(words(&norm).into_iter().map(String::from).collect());
            }
            lex.labels.push((label, owned));
        }
        Ok(lex)
    }

    pub fn labels(&self) -> impl Iterator<Item = &PurposeLabel> + '_ {
        self.labels.iter().map(|(l, _)| l)
    }

    /// Exact phrase match first; otherwise the highest-precedence label with
    /// a phrase contained in the input.
    pub fn canonicalize(&self, reduced: &str) -> CanonicalPurpose {
        let norm = normalize_phrase(reduced);
        if let Some(&idx) = self.exact.get(&norm) {
            return CanonicalPurpose::Label(self.labels[idx].0.clone());
        }
        let hay = words(&norm);
        for (label, phrases) in &self.labels {
            for phrase in phrases {
                let needle: Vec<&str> = phrase.iter().map(String::as_str).collect();
                if find_words(&hay, &needle).is_some() {
                    return CanonicalPurpose::Label(label.clone());
                }
            }
        }
        CanonicalPurpose::Unmapped
    }
}
