//! Data-verb-purpose decomposition of a candidate statement.
//!
//! The rules, in order of application:
//!
//! * a *verb chain* is one requesting verb plus any requesting verbs
//!   coordinated with it (`access and collect`, `collect, use, and share`);
//! * the *object* is the text after the chain up to the first boundary: a
//!   purpose cue, a coordinated verb phrase, a clause preposition or clause
//!   punctuation. A leading article is dropped, possessives are kept;
//! * the *purpose* is the clause introduced by `to <verb>`, `in order to`,
//!   `so that`, `for`, or by `and <verb> <noun phrase>`, and runs to the end
//!   of the clause;
//! * a passive chain (`is collected`) with nothing after the verb takes the
//!   preceding subject as its object;
//! * pronoun objects (`it`, `this information`) refer to the previous chain's
//!   object, and a chain with no purpose borrows the purpose of the chain it
//!   is coordinated with, or of a sentence-initial `To ...,` clause.

use serde::{Deserialize, Serialize};

use super::candidates::{CandidateStatement, RequestingVerb, VerbLexicon};
use super::PipelineError;
use crate::text::{tokenize, Token, TokenKind};

/// One (data object, requesting verb, purpose) decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DVPTriple {
    pub object: String,
    pub verb: RequestingVerb,
    /// `None` when the statement gives no purpose.
    pub purpose_text: Option<String>,
}

const ARTICLES: &[&str] = &["the", "a", "an"];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor"];
const CLAUSE_WORDS: &[&str] = &[
    "after", "among", "as", "at", "because", "before", "between", "by", "during", "from",
    "if", "through", "unless", "until", "via", "when", "whenever", "where", "which", "while",
    "who", "whom", "whose", "with", "within", "without",
];
/// Prepositions that end the object but may be followed, in the same clause,
/// by a purpose cue (`share X with partners to provide ...`).
const SOFT_STOPS: &[&str] = &[
    "among", "at", "between", "by", "for", "from", "through", "to", "via", "with", "within",
];
const NEGATIONS: &[&str] = &["never", "not"];
const LY_NOUNS: &[&str] = &["apply", "assembly", "family", "reply", "supply", "ally", "italy"];
const CLAUSE_PUNCT: &[&str] = &[";", ":", "(", ")", "[", "]", ".", "!", "?"];
const SUBJECTS: &[&str] = &["we", "which", "who", "they", "our"];
const NP_STARTERS: &[&str] = &[
    "the", "a", "an", "that", "this", "these", "those", "it", "them", "you", "your", "our", "their",
    "its", "such", "other", "us", "with", "against",
];
const NON_PURPOSE_AFTER_FOR: &[&str] = &[
    "a", "an", "as", "at", "days", "long", "longer", "months", "period", "periods", "so", "the",
    "up", "years",
];
const BE_FORMS: &[&str] = &["is", "are", "was", "were", "be", "been", "being"];
const PRONOUN_OBJECTS: &[&str] = &[
    "it", "them", "this", "that", "these", "those", "this information", "that information",
    "such information", "this data", "that data", "such data", "the information", "the data",
];
const NON_SERVICE_SUBJECTS: &[&str] = &["you", "users"];

#[derive(Debug)]
enum Stop {
    End,
    /// Purpose clause starting at this token.
    Purpose(usize),
    /// Another requesting verb coordinated with this chain.
    Chain(usize),
    /// Unrelated clause starts here.
    Clause(usize),
}

#[derive(Debug)]
struct Chain {
    verbs: Vec<RequestingVerb>,
    object: Option<String>,
    purpose: Option<String>,
    coordinated_with_next: bool,
}

struct Cursor<'a> {
    text: &'a str,
    toks: Vec<Token>,
    lex: &'a VerbLexicon,
}

impl<'a> Cursor<'a> {
    fn word(&self, i: usize) -> Option<&str> {
        self.toks
            .get(i)
            .filter(|t| t.kind == TokenKind::Word)
            .map(|t| t.lower.as_str())
    }

    fn is_word_in(&self, i: usize, set: &[&str]) -> bool {
        self.word(i).is_some_and(|w| set.contains(&w))
    }

    fn is_punct(&self, i: usize, p: &str) -> bool {
        self.toks.get(i).is_some_and(|t| t.is_punct(p))
    }

    fn is_number(&self, i: usize) -> bool {
        self.word(i).is_some_and(|w| w.chars().all(|c| c.is_ascii_digit()))
    }

    fn skip_adverbs(&self, mut i: usize) -> usize {
        while self.word(i).is_some_and(|w| self.lex.is_adverb(w)) {
            i += 1;
        }
        i
    }

    /// Adverbs from the lexicon plus negations and `-ly` words.
    fn is_loose_adverb(&self, i: usize) -> bool {
        self.word(i).is_some_and(|w| {
            self.lex.is_adverb(w)
                || NEGATIONS.contains(&w)
                || (w.len() > 4 && w.ends_with("ly") && !LY_NOUNS.contains(&w))
        })
    }

    fn skip_loose_adverbs(&self, mut i: usize) -> usize {
        while self.is_loose_adverb(i) {
            i += 1;
        }
        i
    }

    fn is_any_verb(&self, i: usize) -> bool {
        self.word(i)
            .is_some_and(|w| self.lex.is_purpose_verb(w) || self.lex.lemma_of(w).is_some())
    }

    /// Text from token `from` through token `to - 1`, trailing punctuation
    /// trimmed. `None` if nothing remains.
    fn span(&self, from: usize, to: usize) -> Option<String> {
        let mut to = to.min(self.toks.len());
        while to > from && self.toks[to - 1].kind == TokenKind::Punct {
            to -= 1;
        }
        if to <= from {
            return None;
        }
        let s = self.text[self.toks[from].start..self.toks[to - 1].end].trim();
        (!s.is_empty()).then(|| s.to_string())
    }

    /// Skip connectors (`,` `and` `or` `/`) and report the token after them.
    fn after_connectors(&self, mut i: usize) -> (usize, bool) {
        let start = i;
        while self.is_punct(i, ",") || self.is_punct(i, "/") || self.is_word_in(i, &["and", "or"]) {
            i += 1;
        }
        (i, i > start)
    }

    /// Requesting verb at `i` that the service itself performs.
    fn service_verb(&self, i: usize) -> Option<RequestingVerb> {
        let verb = self.lex.requesting(&self.toks[i])?;
        let lookback = (0..i)
            .rev()
            .filter(|&k| self.toks[k].kind == TokenKind::Word)
            .take(3);
        for k in lookback {
            if NON_SERVICE_SUBJECTS.contains(&self.toks[k].lower.as_str()) {
                return None;
            }
        }
        Some(verb)
    }

    fn verb_chain(&self, i: usize) -> (Vec<RequestingVerb>, usize) {
        let mut verbs = vec![self.lex.requesting(&self.toks[i]).expect("chain starts on a verb")];
        let mut end = i + 1;
        loop {
            let (k, skipped) = self.after_connectors(end);
            let k = self.skip_adverbs(k);
            match self.toks.get(k).and_then(|t| self.lex.requesting(t)) {
                Some(v) if skipped => {
                    if !verbs.contains(&v) {
                        verbs.push(v);
                    }
                    end = k + 1;
                }
                _ => break,
            }
        }
        (verbs, end)
    }

    /// Purpose clause start if a cue begins at token `k`.
    fn purpose_cue(&self, k: usize) -> Option<usize> {
        let w = self.word(k)?;
        match w {
            "to" => {
                let v = self.skip_adverbs(k + 1);
                self.is_any_verb(v).then_some(v)
            }
            "in" if self.word(k + 1) == Some("order") && self.word(k + 2) == Some("to") => {
                Some(self.skip_adverbs(k + 3))
            }
            "so" if self.word(k + 1) == Some("that") => Some(k + 2),
            "for" => {
                if self.word(k + 1) == Some("the")
                    && self.is_word_in(k + 2, &["purpose", "purposes"])
                    && self.word(k + 3) == Some("of")
                {
                    return Some(k + 4);
                }
                if self.is_word_in(k + 1, &["purpose", "purposes"]) && self.word(k + 2) == Some("of") {
                    return Some(k + 3);
                }
                let next_ok = self.word(k + 1).is_some()
                    && !self.is_number(k + 1)
                    && !self.is_word_in(k + 1, NON_PURPOSE_AFTER_FOR);
                next_ok.then_some(k + 1)
            }
            _ => None,
        }
    }

    fn object_stop(&self, start: usize) -> (usize, Stop) {
        let n = self.toks.len();
        let mut k = start;
        while k < n {
            let tok = &self.toks[k];
            if tok.kind == TokenKind::Punct {
                if CLAUSE_PUNCT.contains(&tok.lower.as_str()) {
                    return (k, Stop::Clause(k));
                }
                if tok.lower == "," {
                    if self.is_word_in(k + 1, SUBJECTS) {
                        return (k, Stop::Clause(k + 1));
                    }
                    if let Some(p) = self.purpose_cue(k + 1) {
                        return (k, Stop::Purpose(p));
                    }
                }
            } else {
                let w = tok.lower.as_str();
                if w == "such" && self.word(k + 1) == Some("as") {
                    k += 2;
                    continue;
                }
                if let Some(p) = self.purpose_cue(k) {
                    return (k, Stop::Purpose(p));
                }
                if SOFT_STOPS.contains(&w) {
                    return match self.cue_in_clause(k + 1) {
                        Some(p) => (k, Stop::Purpose(p)),
                        None => (k, Stop::Clause(k)),
                    };
                }
                if CLAUSE_WORDS.contains(&w) {
                    return (k, Stop::Clause(k));
                }
            }
            if tok.is_punct(",") || tok.is_word("and") || tok.is_word("or") {
                let (next, _) = self.after_connectors(k);
                let next = self.skip_adverbs(next);
                if let Some(t) = self.toks.get(next) {
                    if self.lex.requesting(t).is_some() {
                        return (k, Stop::Chain(next));
                    }
                    if self.lex.is_purpose_verb(&t.lower) && self.is_word_in(next + 1, NP_STARTERS) {
                        return (k, Stop::Purpose(next));
                    }
                }
                if self.is_word_in(next, &["we"]) {
                    return (k, Stop::Clause(next));
                }
            }
            k += 1;
        }
        (n, Stop::End)
    }

    /// A purpose cue later in the same clause, before any punctuation,
    /// subordinate clause or further requesting verb.
    fn cue_in_clause(&self, from: usize) -> Option<usize> {
        let mut k = from;
        while k < self.toks.len() {
            if let Some(p) = self.purpose_cue(k) {
                return Some(p);
            }
            let tok = &self.toks[k];
            if tok.kind == TokenKind::Punct
                || (CLAUSE_WORDS.contains(&tok.lower.as_str()) && !SOFT_STOPS.contains(&tok.lower.as_str()))
                || self.lex.requesting(tok).is_some()
            {
                return None;
            }
            k += 1;
        }
        None
    }

    fn purpose_end(&self, start: usize) -> usize {
        let n = self.toks.len();
        let mut k = start;
        while k < n {
            if self.is_punct(k, ";") || self.is_punct(k, ".") || self.is_punct(k, "!") || self.is_punct(k, "?") {
                return k;
            }
            if self.is_punct(k, ",") && (self.is_word_in(k + 1, &["we"]) || (self.word(k + 1) == Some("and") && self.word(k + 2) == Some("we"))) {
                return k;
            }
            if self.word(k) == Some("and") && self.word(k + 1) == Some("we") {
                return k;
            }
            k += 1;
        }
        n
    }

    fn object(&self, from: usize, to: usize) -> Option<String> {
        let mut from = from;
        while from < to && self.is_word_in(from, ARTICLES) {
            from += 1;
        }
        if from < to && (self.is_word_in(from, CONJUNCTIONS) || self.toks[from].kind == TokenKind::Punct) {
            return None;
        }
        let mut to = to;
        while to > from && (self.word(to - 1).is_some_and(|w| self.lex.is_adverb(w)) || self.is_word_in(to - 1, NEGATIONS)) {
            to -= 1;
        }
        self.span(from, to)
    }

    /// Subject of a passive `be + participle` ending just before `verb_at`.
    fn passive_subject(&self, verb_at: usize) -> Option<String> {
        let mut aux = verb_at;
        loop {
            if aux == 0 {
                return None;
            }
            aux -= 1;
            let w = self.word(aux)?;
            if BE_FORMS.contains(&w) {
                break;
            }
            if !self.is_loose_adverb(aux) {
                return None;
            }
        }
        let mut start = aux;
        while start > 0 {
            let prev = &self.toks[start - 1];
            if prev.kind == TokenKind::Punct || CLAUSE_WORDS.contains(&prev.lower.as_str()) || prev.lower == "that" {
                break;
            }
            if ["may", "will", "can", "might", "could", "would", "should", "must"].contains(&prev.lower.as_str()) {
                start -= 1;
                continue;
            }
            start -= 1;
        }
        // drop trailing modals between subject and auxiliary
        let mut end = aux;
        while end > start && self.is_word_in(end - 1, &["may", "will", "can", "might", "could", "would", "should", "must"]) {
            end -= 1;
        }
        self.object(start, end)
    }

    fn leading_purpose(&self) -> (Option<String>, usize) {
        let start = if self.word(0) == Some("to") && self.is_any_verb(self.skip_adverbs(1)) {
            Some(self.skip_adverbs(1))
        } else if self.word(0) == Some("in") && self.word(1) == Some("order") && self.word(2) == Some("to") {
            Some(self.skip_adverbs(3))
        } else {
            None
        };
        let Some(start) = start else {
            return (None, 0);
        };
        match (start..self.toks.len()).find(|&k| self.is_punct(k, ",")) {
            Some(comma) => (self.span(start, comma), comma + 1),
            None => (None, 0),
        }
    }
}

fn resolve_pronoun(object: Option<String>, previous: Option<&String>) -> Option<String> {
    match object {
        Some(o) if PRONOUN_OBJECTS.contains(&o.to_lowercase().as_str()) => {
            previous.cloned().or(Some(o))
        }
        other => other,
    }
}

/// Breaks a candidate statement into data-verb-purpose triples, one per
/// (verb, object) attachment.
pub fn decompose_statement(stmt: &CandidateStatement, lexicon: &VerbLexicon) -> Result<Vec<DVPTriple>, PipelineError> {
    let cur = Cursor {
        text: &stmt.sentence,
        toks: tokenize(&stmt.sentence),
        lex: lexicon,
    };
    let (lead_purpose, mut i) = cur.leading_purpose();
    let n = cur.toks.len();
    let mut chains: Vec<Chain> = Vec::new();

    while i < n {
        if cur.service_verb(i).is_none() {
            i += 1;
            continue;
        }
        let (verbs, after) = cur.verb_chain(i);
        let after = cur.skip_loose_adverbs(after);
        let (obj_end, stop) = cur.object_stop(after);
        let mut object = cur.object(after, obj_end);
        if object.is_none() {
            object = cur.passive_subject(i);
        }
        let previous = chains.iter().rev().find_map(|c| c.object.as_ref());
        let object = resolve_pronoun(object, previous);
        let mut chain = Chain {
            verbs,
            object,
            purpose: None,
            coordinated_with_next: false,
        };
        i = match stop {
            Stop::End => n,
            Stop::Purpose(p) => {
                let end = cur.purpose_end(p);
                chain.purpose = cur.span(p, end);
                end
            }
            Stop::Chain(next) => {
                chain.coordinated_with_next = true;
                next
            }
            Stop::Clause(next) => next.max(i + 1),
        };
        chains.push(chain);
    }

    // purposes flow backwards through coordinated chains
    for idx in (0..chains.len()).rev() {
        if chains[idx].purpose.is_none() && chains[idx].coordinated_with_next {
            if let Some(next) = chains.get(idx + 1) {
                chains[idx].purpose = next.purpose.clone();
            }
        }
    }

    let mut triples = Vec::new();
    for chain in chains {
        let Some(object) = chain.object else { continue };
        let purpose = chain.purpose.or_else(|| lead_purpose.clone());
        for verb in chain.verbs {
            triples.push(DVPTriple {
                object: object.clone(),
                verb,
                purpose_text: purpose.clone(),
            });
        }
    }
    if triples.is_empty() {
        return Err(PipelineError::ExtractionFailed {
            sentence: stmt.sentence.clone(),
        });
    }
    Ok(triples)
}
