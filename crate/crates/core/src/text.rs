//! Small text helpers shared by the pipeline phases.

/// Lower-cases and collapses runs of whitespace to a single space.
pub fn collapse_lower(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Matching key for phrases: lower-case words, punctuation and underscores
/// become separators, apostrophes vanish.
pub fn normalize_phrase(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn words(normalized: &str) -> Vec<&str> {
    normalized.split(' ').filter(|w| !w.is_empty()).collect()
}

/// Position of `needle` as a contiguous word run inside `haystack`.
pub fn find_words(haystack: &[&str], needle: &[&str]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Naive English singular for one word: `numbers` -> `number`,
/// `addresses` -> `address`, `entries` -> `entry`.
pub fn singular(word: &str) -> String {
    if word.len() <= 3 {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "xes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

pub fn singular_phrase(normalized: &str) -> String {
    words(normalized)
        .into_iter()
        .map(singular)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
}

/// A token with its byte span in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lower: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_word(&self, w: &str) -> bool {
        self.kind == TokenKind::Word && self.lower == w
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.lower == p
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Words are runs of alphanumerics/underscore, joined across a single inner
/// apostrophe (`user's`). Every other non-space character is a punctuation
/// token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if (cj == '\'' || cj == '\u{2019}')
                    && j + 1 < chars.len()
                    && is_word_char(chars[j + 1].1)
                {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            tokens.push(Token {
                kind: TokenKind::Word,
                lower: text[start..end].to_lowercase(),
                start,
                end,
            });
            i = j;
        } else {
            let end = chars.get(i + 1).map_or(text.len(), |&(b, _)| b);
            tokens.push(Token {
                kind: TokenKind::Punct,
                lower: text[start..end].to_string(),
                start,
                end,
            });
            i += 1;
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize() {
        assert_eq!(normalize_phrase("  Run, or TAILOR our services!"), "run or tailor our services");
        assert_eq!(normalize_phrase("CONTENT_PERSONALIZATION"), "content personalization");
        assert_eq!(normalize_phrase("user's data"), "users data");
        assert_eq!(collapse_lower("Play\n  Music"), "play music");
    }

    #[test]
    fn singulars() {
        assert_eq!(singular("numbers"), "number");
        assert_eq!(singular("addresses"), "address");
        assert_eq!(singular("entries"), "entry");
        assert_eq!(singular("address"), "address");
        assert_eq!(singular("gps"), "gps");
        assert_eq!(singular_phrase("phone numbers"), "phone number");
    }

    #[test]
    fn tokens_keep_spans() {
        let text = "We collect user's data, e.g. names.";
        let toks = tokenize(text);
        let words: Vec<&str> = toks.iter().map(|t| &text[t.start..t.end]).collect();
        assert_eq!(words, ["We", "collect", "user's", "data", ",", "e", ".", "g", ".", "names", "."]);
        assert_eq!(toks[0].lower, "we");
    }

    #[test]
    fn word_runs() {
        let hay = ["audio", "file", "stored", "on", "device"];
        assert_eq!(find_words(&hay, &["file", "stored"]), Some(1));
        assert_eq!(find_words(&hay, &["device", "id"]), None);
        assert_eq!(find_words(&hay, &[]), None);
    }
}
