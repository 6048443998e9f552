use std::collections::HashSet;

/// Deterministic sentence splitter.
///
/// A sentence ends at `.`, `?` or `!` (plus any closing quotes or brackets)
/// when followed by whitespace and an uppercase letter, unless the word
/// before a single `.` is a known abbreviation or a lone initial. An
/// abbreviation still ends the sentence when the next word is a typical
/// sentence opener (`Inc. We ...`). Blank lines always end a sentence.
#[derive(Clone, Debug, Default)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
    openers: HashSet<String>,
}

fn is_opener_punct(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

impl Segmenter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
            openers: HashSet::new(),
        }
    }

    pub fn with_sentence_openers<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.openers = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        self
    }

    fn opens_sentence(&self, rest: &str) -> bool {
        let word: String = rest.chars().take_while(|c| c.is_alphanumeric()).collect();
        self.openers.contains(&word.to_lowercase())
    }

    fn is_abbreviation(&self, text: &str, period: usize) -> bool {
        let before = &text[..period];
        let word_start = before
            .char_indices()
            .rev()
            .take_while(|&(_, c)| c.is_alphanumeric() || c == '.')
            .last()
            .map_or(period, |(i, _)| i);
        let word = &before[word_start..];
        if word.is_empty() {
            return false;
        }
        let mut letters = word.chars();
        let single_initial = matches!((letters.next(), letters.next()), (Some(c), None) if c.is_uppercase());
        single_initial || self.abbreviations.contains(&word.to_lowercase())
    }

    /// Splits `text` into trimmed, non-empty sentence slices.
    pub fn segment<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        let push = |out: &mut Vec<&'a str>, from: usize, to: usize| {
            let s = text[from..to].trim();
            if !s.is_empty() {
                out.push(s);
            }
        };
        while i < chars.len() {
            let (pos, c) = chars[i];
            if c == '\n' {
                // blank line: newline, optional horizontal space, newline
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_whitespace() && chars[j].1 != '\n' {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '\n' {
                    push(&mut out, start, pos);
                    start = chars[j].0;
                    i = j + 1;
                    continue;
                }
            }
            if matches!(c, '.' | '?' | '!') {
                let mut j = i + 1;
                while j < chars.len() && (matches!(chars[j].1, '.' | '?' | '!') || is_closer(chars[j].1)) {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let mut w = k;
                while w < chars.len() && is_opener_punct(chars[w].1) {
                    w += 1;
                }
                let followed_by_capital = k > j && w < chars.len() && chars[w].1.is_uppercase();
                let lone_period = c == '.' && j == i + 1;
                let held = lone_period
                    && self.is_abbreviation(text, pos)
                    && !(w == k && self.opens_sentence(&text[chars[w.min(chars.len() - 1)].0..]));
                if followed_by_capital && !held {
                    push(&mut out, start, end);
                    start = end;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        push(&mut out, start, text.len());
        out
    }
}
