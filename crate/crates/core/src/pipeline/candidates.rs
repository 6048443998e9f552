use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::{Token, TokenKind};

/// The six requesting-verb lemmas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestingVerb {
    Collect,
    Access,
    Transfer,
    Share,
    Retain,
    Use,
}

impl RequestingVerb {
    pub const ALL: [RequestingVerb; 6] = [
        Self::Collect,
        Self::Access,
        Self::Transfer,
        Self::Share,
        Self::Retain,
        Self::Use,
    ];

    pub fn lemma(self) -> &'static str {
        match self {
            Self::Collect => "collect",
            Self::Access => "access",
            Self::Transfer => "transfer",
            Self::Share => "share",
            Self::Retain => "retain",
            Self::Use => "use",
        }
    }

    pub fn from_lemma(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.lemma() == s)
    }
}

impl fmt::Display for RequestingVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.lemma())
    }
}

/// Inflection table for requesting verbs, plus the small word lists the
/// decomposer uses to spot purpose clauses.
#[derive(Clone, Debug, Default)]
pub struct VerbLexicon {
    forms: HashMap<String, RequestingVerb>,
    purpose_verbs: HashSet<String>,
    adverbs: HashSet<String>,
}

impl VerbLexicon {
    pub fn new(
        forms: impl IntoIterator<Item = (String, RequestingVerb)>,
        purpose_verbs: impl IntoIterator<Item = String>,
        adverbs: impl IntoIterator<Item = String>,
    ) -> Self {
        Self {
            forms: forms.into_iter().map(|(f, v)| (f.to_lowercase(), v)).collect(),
            purpose_verbs: purpose_verbs.into_iter().map(|v| v.to_lowercase()).collect(),
            adverbs: adverbs.into_iter().map(|v| v.to_lowercase()).collect(),
        }
    }

    /// Lemma for an inflected form; expects lower-case input.
    pub fn lemma_of(&self, word: &str) -> Option<RequestingVerb> {
        self.forms.get(word).copied()
    }

    pub fn requesting(&self, tok: &Token) -> Option<RequestingVerb> {
        match tok.kind {
            TokenKind::Word => self.lemma_of(&tok.lower),
            TokenKind::Punct => None,
        }
    }

    pub fn is_purpose_verb(&self, word: &str) -> bool {
        self.purpose_verbs.contains(word)
    }

    pub fn is_adverb(&self, word: &str) -> bool {
        self.adverbs.contains(word) || (word.len() > 4 && word.ends_with("ly"))
    }

    pub fn forms(&self) -> impl Iterator<Item = (&str, RequestingVerb)> + '_ {
        self.forms.iter().map(|(f, v)| (f.as_str(), *v))
    }
}

/// A policy sentence holding at least one requesting verb.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateStatement {
    pub source_app: String,
    pub sentence: String,
    /// Lemmas in order of first appearance.
    pub matched_verbs: Vec<RequestingVerb>,
}

/// Lemmas found in `sentence`, case-insensitive, on word boundaries.
pub fn matched_verbs(sentence: &str, lexicon: &VerbLexicon) -> Vec<RequestingVerb> {
    let mut found = Vec::new();
    for word in sentence.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        if word.is_empty() {
            continue;
        }
        if let Some(v) = lexicon.lemma_of(&word.to_lowercase()) {
            if !found.contains(&v) {
                found.push(v);
            }
        }
    }
    found
}

pub fn find_candidates(source_app: &str, sentences: &[&str], lexicon: &VerbLexicon) -> Vec<CandidateStatement> {
    sentences
        .iter()
        .filter_map(|s| {
            let verbs = matched_verbs(s, lexicon);
            (!verbs.is_empty()).then(|| CandidateStatement {
                source_app: source_app.to_string(),
                sentence: s.to_string(),
                matched_verbs: verbs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Lexicons;

    #[test]
    fn tiktok_sentence_matches_access_and_collect() {
        let lex = Lexicons::builtin();
        let s = "We will access and collect the names and phone numbers and match that information against existing users in the platform.";
        let c = find_candidates("TikTok", &[s], &lex.verbs);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].matched_verbs, [RequestingVerb::Access, RequestingVerb::Collect]);
    }

    #[test]
    fn non_request_sentence_excluded() {
        let lex = Lexicons::builtin();
        assert!(find_candidates("x", &["This app is great."], &lex.verbs).is_empty());
    }

    #[test]
    fn word_boundaries_and_case() {
        let lex = Lexicons::builtin();
        assert_eq!(matched_verbs("USED by partners", &lex.verbs), [RequestingVerb::Use]);
        assert!(matched_verbs("our usefulness and accessibility", &lex.verbs).is_empty());
        assert!(matched_verbs("data collection", &lex.verbs).is_empty());
        assert_eq!(matched_verbs("re-use", &lex.verbs), [RequestingVerb::Use]);
    }
}
