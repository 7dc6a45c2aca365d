//! Whitespace tokenization and character-offset helpers.
//!
//! All offsets in this crate count unicode scalar values, not bytes.

/// A maximal run of non-whitespace characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    /// Inclusive start, in characters.
    pub start: usize,
    /// Exclusive end, in characters.
    pub end: usize,
}

impl Token<'_> {
    pub fn char_len(&self) -> usize {
        self.end - self.start
    }
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    // (byte offset, char offset) of the current token start
    let mut open: Option<(usize, usize)> = None;
    let mut char_pos = 0;
    for (byte_pos, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some((b0, c0)) = open.take() {
                tokens.push(Token {
                    text: &text[b0..byte_pos],
                    start: c0,
                    end: char_pos,
                });
            }
        } else if open.is_none() {
            open = Some((byte_pos, char_pos));
        }
        char_pos += 1;
    }
    if let Some((b0, c0)) = open {
        tokens.push(Token {
            text: &text[b0..],
            start: c0,
            end: char_pos,
        });
    }
    tokens
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by character offsets; `None` when the range is out of bounds
/// or inverted.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut byte_start = None;
    for (i, (b, _)) in text.char_indices().enumerate() {
        if i == start {
            byte_start = Some(b);
        }
        if i == end {
            return byte_start.map(|s| &text[s..b]);
        }
    }
    let n = char_len(text);
    if end == n {
        if start == n {
            return Some("");
        }
        return byte_start.map(|s| &text[s..]);
    }
    None
}

/// Maps character offsets to byte offsets for repeated slicing of one text.
#[derive(Debug, Clone)]
pub struct CharIndex {
    byte_of: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut byte_of: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_of.push(text.len());
        CharIndex { byte_of }
    }

    pub fn char_len(&self) -> usize {
        self.byte_of.len() - 1
    }

    pub fn byte(&self, char_pos: usize) -> Option<usize> {
        self.byte_of.get(char_pos).copied()
    }

    pub fn slice<'a>(&self, text: &'a str, start: usize, end: usize) -> Option<&'a str> {
        if start > end {
            return None;
        }
        Some(&text[self.byte(start)?..self.byte(end)?])
    }
}

/// Lowercases and strips leading and trailing non-alphanumeric characters.
pub fn normalize_word(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Collapses whitespace runs and lowercases; used as the duplicate key.
pub fn normalize_for_dedup(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(text: &str) -> Vec<(&str, usize, usize)> {
        tokenize(text)
            .into_iter()
            .map(|t| (t.text, t.start, t.end))
            .collect()
    }

    #[test]
    fn splits_on_whitespace_runs() {
        assert_eq!(spans("a b  c"), vec![("a", 0, 1), ("b", 2, 3), ("c", 5, 6)]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n ").is_empty());
    }

    #[test]
    fn punctuation_stays_attached() {
        let oracle: Vec<&str> = "vaccine, jab!".split_whitespace().collect();
        let got: Vec<&str> = tokenize("vaccine, jab!").iter().map(|t| t.text).collect();
        assert_eq!(got, oracle);
        assert_eq!(got, vec!["vaccine,", "jab!"]);
    }

    #[test]
    fn offsets_are_chars_not_bytes() {
        let toks = spans("¿Qué pasa?  añ");
        assert_eq!(toks, vec![("¿Qué", 0, 4), ("pasa?", 5, 10), ("añ", 12, 14)]);
    }

    #[test]
    fn char_slice_bounds() {
        let t = "añbc";
        assert_eq!(char_slice(t, 1, 3), Some("ñb"));
        assert_eq!(char_slice(t, 0, 4), Some("añbc"));
        assert_eq!(char_slice(t, 4, 4), Some(""));
        assert_eq!(char_slice(t, 2, 5), None);
        assert_eq!(char_slice(t, 3, 2), None);
        let idx = CharIndex::new(t);
        assert_eq!(idx.slice(t, 1, 3), Some("ñb"));
        assert_eq!(idx.slice(t, 1, 9), None);
    }

    #[test]
    fn word_normalization() {
        assert_eq!(normalize_word("Hate,"), "hate");
        assert_eq!(normalize_word("¡HATE!"), "hate");
        assert_eq!(normalize_word("--"), "");
        assert_eq!(normalize_word("don't"), "don't");
    }
}
