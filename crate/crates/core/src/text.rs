//! Tokenization, stopwords, sentence boundaries and offset conversion.
//!
//! Offsets exchanged with providers and written to files are character
//! (Unicode scalar) offsets; offsets used for slicing inside the crate are
//! byte offsets. The helpers here convert between the two.

use std::collections::HashSet;

use once_cell::sync::Lazy;

/// Bundled English stopword list, one word per line.
const STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

static STOPWORDS: Lazy<HashSet<&'static str>> = Lazy::new(|| {
    STOPWORDS_TXT
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(word.to_lowercase().as_str())
}

/// A word token with its byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSpan<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of alphanumeric characters, allowing a single internal
/// apostrophe or hyphen between alphanumerics ("co-wrote", "Lennon's").
pub fn words(text: &str) -> Vec<WordSpan<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
            } else if (c == '\'' || c == '-' || c == '\u{2019}')
                && j + 1 < chars.len()
                && chars[j + 1].1.is_alphanumeric()
            {
                j += 2;
            } else {
                break;
            }
        }
        let end = if j < chars.len() { chars[j].0 } else { text.len() };
        out.push(WordSpan { text: &text[start..end], start, end });
        i = j;
    }
    out
}

/// Lowercased word tokens with stopwords removed, in order of appearance.
pub fn content_tokens(text: &str) -> Vec<String> {
    words(text)
        .into_iter()
        .map(|w| w.text.to_lowercase())
        .filter(|w| !STOPWORDS.contains(w.as_str()))
        .collect()
}

/// Distinct content tokens.
pub fn content_token_set(text: &str) -> HashSet<String> {
    content_tokens(text).into_iter().collect()
}

/// Sentence byte ranges, trimmed of surrounding whitespace.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace (or the end of
/// the text), and at every line break.
pub fn sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let next = iter.peek().map(|&(_, n)| n);
        let boundary = match c {
            '\n' => true,
            '.' | '!' | '?' => next.is_none_or(char::is_whitespace),
            _ => false,
        };
        if boundary {
            let end = i + c.len_utf8();
            let end = if c == '\n' { i } else { end };
            push_trimmed(text, start, end, &mut out);
            start = i + c.len_utf8();
        }
    }
    push_trimmed(text, start, text.len(), &mut out);
    out
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead + trail < slice.len() {
        out.push((start + lead, end - trail));
    }
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `ch`-th character; `Some(text.len())` for `ch == len`.
pub fn char_to_byte(text: &str, ch: usize) -> Option<usize> {
    if ch == 0 {
        return Some(0);
    }
    match text.char_indices().nth(ch) {
        Some((b, _)) => Some(b),
        None if char_len(text) == ch => Some(text.len()),
        None => None,
    }
}

/// Character offset of a byte position (which must be a char boundary).
pub fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Slice by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = char_to_byte(text, start)?;
    let b1 = char_to_byte(text, end)?;
    Some(&text[b0..b1])
}

/// Collapses runs of whitespace to single spaces and trims.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}
