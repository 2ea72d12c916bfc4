//! Token-level text helpers shared by answer normalization and phrase detection.

/// Lowercases, drops every character that is not a letter, digit or
/// whitespace, and splits on whitespace.
pub fn tokens(text: &str) -> Vec<String> {
    strip_punctuation(&text.to_lowercase())
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

pub(crate) fn strip_punctuation(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect()
}

/// True when `phrase` occurs as a contiguous run inside `haystack`.
/// An empty phrase never matches.
pub fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && phrase.len() <= haystack.len()
        && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Whitespace tokenization with no other processing.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}
