//! Word tokenization shared by the mock backends and answer scoring.

use std::collections::BTreeSet;

/// Function words ignored by mock scoring.
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "all", "am", "an", "and", "any", "are", "around", "as", "at", "be", "by", "can",
    "could", "do", "does", "find", "for", "from", "get", "go", "have", "here", "how", "i", "in",
    "into", "is", "it", "its", "me", "my", "near", "of", "on", "or", "please", "show", "so", "some",
    "take", "that", "the", "their", "there", "this", "to", "want", "was", "we", "what", "where",
    "which", "with", "would", "you", "your",
];

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

/// Lowercased alphanumeric runs, including stop words.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercased content words in order of appearance (stop words removed).
pub fn content_tokens(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !is_stop_word(w)).collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    content_tokens(text).into_iter().collect()
}

/// Number of distinct query content tokens present in `text`.
pub fn overlap(query: &BTreeSet<String>, text: &str) -> usize {
    let tokens = token_set(text);
    query.intersection(&tokens).count()
}
