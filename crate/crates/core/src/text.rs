//! Tokenisation shared by the utterance encoders, the entity linker and the
//! generation metrics.

/// Case-folds and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
